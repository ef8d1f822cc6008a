#!/usr/bin/env python3
"""
OCR Metrics Module

Character and word error rates of recognized text lines against their
ground truth, aggregated per difficulty class and weighted overall.

Characters are Unicode scalar values after NFC normalization; words are
maximal runs of non-whitespace.
"""

import csv
import json
import logging
import math
import unicodedata
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from dataset_manifest import DIFFICULTIES, load_manifest

logger = logging.getLogger(__name__)

CLASS_LABELS = {'easy': 'Easy', 'medium': 'Medium', 'hard': 'Hard', 'unknown': 'Unknown'}
METRICS = ('cer', 'wer')


class UndefinedMetricError(ValueError):
    """The reference has no characters (CER) or no words (WER)."""


class EvalInputError(ValueError):
    """Hypothesis or report input cannot be used."""


def normalize_text(text: str) -> str:
    return unicodedata.normalize('NFC', text)


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Minimal number of single-token insertions, deletions and substitutions.

    Works on any token sequences (strings, word lists). Unit costs; the DP
    keeps one row of the (len(a)+1) x (len(b)+1) grid.
    """
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, token_b in enumerate(b, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (token_a != token_b),
            )
        previous = current
    return previous[-1]


def tokenize_words(text: str) -> List[str]:
    return text.split()


def cer(hypothesis: str, reference: str) -> float:
    """Character error rate d_C / N_C; may exceed 1.

    Raises:
        UndefinedMetricError: If the reference is empty after normalization
    """
    ref = normalize_text(reference)
    if not ref:
        raise UndefinedMetricError("reference has no characters")
    return levenshtein(normalize_text(hypothesis), ref) / len(ref)


def wer(hypothesis: str, reference: str) -> float:
    """Word error rate d_W / N_W.

    Raises:
        UndefinedMetricError: If the reference has no words
    """
    ref = tokenize_words(normalize_text(reference))
    if not ref:
        raise UndefinedMetricError("reference has no words")
    return levenshtein(tokenize_words(normalize_text(hypothesis)), ref) / len(ref)


@dataclass(frozen=True)
class LineEval:
    id: str
    reference: str
    hypothesis: str
    char_distance: int
    word_distance: int
    n_chars: int
    n_words: int
    cer: float
    wer: Optional[float]
    difficulty: str
    missing: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def evaluate_line(line_id: str, hypothesis: str, reference: str, difficulty: str = 'unknown',
                  missing: bool = False) -> LineEval:
    """Score one line.

    A reference with characters but no words (whitespace only) keeps its
    CER; its WER is None.

    Raises:
        UndefinedMetricError: If the reference has no characters
    """
    ref = normalize_text(reference)
    hyp = normalize_text(hypothesis)
    ref_words = tokenize_words(ref)
    if not ref:
        raise UndefinedMetricError(f"line '{line_id}': reference has no characters")
    d_c = levenshtein(hyp, ref)
    d_w = levenshtein(tokenize_words(hyp), ref_words)
    return LineEval(
        id=line_id,
        reference=reference,
        hypothesis=hypothesis,
        char_distance=d_c,
        word_distance=d_w,
        n_chars=len(ref),
        n_words=len(ref_words),
        cer=d_c / len(ref),
        wer=d_w / len(ref_words) if ref_words else None,
        difficulty=difficulty,
        missing=missing,
    )


@dataclass
class ClassStats:
    count: int = 0
    wer_count: int = 0
    macro_cer: Optional[float] = None
    macro_wer: Optional[float] = None
    micro_cer: Optional[float] = None
    micro_wer: Optional[float] = None
    char_distance: int = 0
    n_chars: int = 0
    word_distance: int = 0
    n_words: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ClassStats':
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass
class EvalReport:
    classes: Dict[str, ClassStats]
    overall: ClassStats
    lines: List[LineEval] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def metric(self, class_name: str, name: str, kind: str = 'macro') -> Optional[float]:
        stats = self.overall if class_name == 'overall' else self.classes[class_name]
        return getattr(stats, f"{kind}_{name}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'metadata': self.metadata,
            'classes': {name: stats.to_dict() for name, stats in self.classes.items()},
            'overall': self.overall.to_dict(),
            'lines': [line.to_dict() for line in self.lines],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvalReport':
        try:
            classes = {name: ClassStats.from_dict(data['classes'].get(name, {})) for name in DIFFICULTIES}
            overall = ClassStats.from_dict(data['overall'])
            lines = [LineEval(**line) for line in data.get('lines', [])]
        except (KeyError, TypeError, AttributeError) as e:
            raise EvalInputError(f"not an evaluation report: {e}") from e
        return cls(classes=classes, overall=overall, lines=lines, metadata=data.get('metadata', {}))

    def save_json(self, output_file: Union[str, Path]) -> None:
        with open(output_file, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, ensure_ascii=False)
            f.write('\n')

    @classmethod
    def load_json(cls, path: Union[str, Path]) -> 'EvalReport':
        """Read a report written by ``save_json``.

        Raises:
            EvalInputError: Unreadable file or wrong structure
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise EvalInputError(f"cannot read report {path}: {e}") from e
        return cls.from_dict(data)

    def export_to_csv(self, output_file: Union[str, Path]) -> int:
        """Table of percentages, one row per metric, one column per class plus overall.

        Returns:
            Number of rows written
        """
        fieldnames = ['metric'] + [CLASS_LABELS[name] for name in DIFFICULTIES] + ['Overall']
        with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=fieldnames)
            writer.writeheader()
            for metric in METRICS:
                row = {'metric': metric.upper()}
                for name in DIFFICULTIES:
                    row[CLASS_LABELS[name]] = _percent_cell(self.metric(name, metric))
                row['Overall'] = _percent_cell(self.metric('overall', metric))
                writer.writerow(row)
        return len(METRICS)


def _percent_cell(value: Optional[float]) -> str:
    return '' if value is None else f"{value * 100:.2f}"


def _percent_text(value: Optional[float]) -> str:
    return 'n/a' if value is None else f"{value * 100:.2f}%"


def _mean(values: List[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def aggregate(evals: Iterable[LineEval], metadata: Optional[Dict[str, Any]] = None) -> EvalReport:
    """Per-class macro and micro rates; overall is weighted by class line counts.

    WER only covers lines whose reference has words, so its overall macro is
    weighted by ``wer_count`` instead of ``count``. Empty classes get count 0
    and null metrics. Lines are kept in id order so the report does not depend
    on input order.
    """
    lines = sorted(evals, key=lambda e: e.id)
    classes = {}
    for name in DIFFICULTIES:
        members = [e for e in lines if e.difficulty == name]
        worded = [e for e in members if e.wer is not None]
        stats = ClassStats(count=len(members), wer_count=len(worded))
        if members:
            stats.macro_cer = _mean([e.cer for e in members])
            stats.char_distance = sum(e.char_distance for e in members)
            stats.n_chars = sum(e.n_chars for e in members)
            stats.micro_cer = stats.char_distance / stats.n_chars
        if worded:
            stats.macro_wer = _mean([e.wer for e in worded])
            stats.word_distance = sum(e.word_distance for e in worded)
            stats.n_words = sum(e.n_words for e in worded)
            stats.micro_wer = stats.word_distance / stats.n_words
        classes[name] = stats

    populated = [s for s in classes.values() if s.count]
    total = sum(s.count for s in populated)
    total_worded = sum(s.wer_count for s in populated)
    overall = ClassStats(count=total, wer_count=total_worded)
    if total:
        overall.macro_cer = math.fsum(s.count * s.macro_cer for s in populated) / total
        overall.char_distance = sum(s.char_distance for s in populated)
        overall.n_chars = sum(s.n_chars for s in populated)
        overall.micro_cer = overall.char_distance / overall.n_chars
    if total_worded:
        overall.macro_wer = math.fsum(s.wer_count * s.macro_wer for s in populated if s.wer_count) / total_worded
        overall.word_distance = sum(s.word_distance for s in populated)
        overall.n_words = sum(s.n_words for s in populated)
        overall.micro_wer = overall.word_distance / overall.n_words
    return EvalReport(classes=classes, overall=overall, lines=lines, metadata=dict(metadata or {}))


def load_hypotheses(path: Union[str, Path]) -> Dict[str, str]:
    """Read ``id<TAB>text`` lines; a line without a TAB is an id with empty text.

    Raises:
        EvalInputError: Unreadable file or duplicate id
    """
    hypotheses: Dict[str, str] = {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            for line_number, raw in enumerate(f, start=1):
                raw = raw.rstrip('\r\n')
                if not raw.strip():
                    continue
                line_id, _, text = raw.partition('\t')
                if line_id in hypotheses:
                    raise EvalInputError(f"{path}:{line_number}: duplicate hypothesis id '{line_id}'")
                hypotheses[line_id] = text
    except (OSError, UnicodeDecodeError) as e:
        raise EvalInputError(f"cannot read hypothesis file {path}: {e}") from e
    return hypotheses


def evaluate_run(reference_manifest: Union[str, Path], hypothesis_file: Union[str, Path]) -> EvalReport:
    """Join references and hypotheses on id and aggregate.

    Missing hypotheses are scored as empty text; hypotheses for unknown ids
    are ignored with a warning; references with no characters are excluded
    from every rate and tallied in the metadata. Whitespace-only references
    count towards CER only.

    Raises:
        ManifestParseError: Malformed or duplicate reference lines
        EvalInputError: Unreadable or duplicate hypotheses
    """
    hypotheses = load_hypotheses(hypothesis_file)
    references = load_manifest(reference_manifest, decode_images=False, allow_empty_transcripts=True)

    evals = []
    missing = []
    excluded = []
    for sample in references:
        is_missing = sample.id not in hypotheses
        try:
            line = evaluate_line(sample.id, hypotheses.get(sample.id, ''), sample.transcript,
                                 sample.difficulty, missing=is_missing)
        except UndefinedMetricError as e:
            logger.warning("Excluding line from rates: %s", e)
            excluded.append(sample.id)
            continue
        evals.append(line)
        if is_missing:
            missing.append(sample.id)

    reference_ids = {s.id for s in references}
    unknown = sorted(set(hypotheses) - reference_ids)
    for line_id in unknown:
        logger.warning("Hypothesis for unknown id '%s' ignored", line_id)
    if missing:
        logger.warning("%d reference line(s) have no hypothesis and are scored as empty", len(missing))

    metadata = {
        'reference_manifest': str(reference_manifest),
        'hypothesis_file': str(hypothesis_file),
        'timestamp': datetime.now().isoformat(timespec='seconds'),
        'missing_hypotheses': len(missing),
        'unknown_hypotheses': len(unknown),
        'excluded_lines': len(excluded),
        'wer_undefined_lines': sum(1 for e in evals if e.wer is None),
    }
    return aggregate(evals, metadata)


def format_report_lines(report: EvalReport) -> List[str]:
    """Human summary: one line per populated class, then the overall line."""
    lines = []
    for name in DIFFICULTIES:
        stats = report.classes[name]
        if not stats.count:
            continue
        lines.append(f"{CLASS_LABELS[name]} ({stats.count} lines) "
                     f"CER {_percent_text(stats.macro_cer)} WER {_percent_text(stats.macro_wer)}")
    overall = report.overall
    lines.append(f"Overall CER {_percent_text(overall.macro_cer)} WER {_percent_text(overall.macro_wer)}")
    return lines


def compare_reports(reference: EvalReport, runs: Sequence[Tuple[str, EvalReport]],
                    kind: str = 'macro') -> List[Dict[str, Any]]:
    """Differences of each run to a reference run in percentage points.

    Returns:
        One row per (run, metric): {'run', 'metric', 'easy', 'medium', 'hard',
        'unknown', 'overall'}; a cell is None where either side has no lines
    """
    rows = []
    for run_name, report in runs:
        for metric in METRICS:
            row: Dict[str, Any] = {'run': run_name, 'metric': metric.upper()}
            for name in DIFFICULTIES + ('overall',):
                ref_value = reference.metric(name, metric, kind)
                run_value = report.metric(name, metric, kind)
                row[name] = None if ref_value is None or run_value is None else (run_value - ref_value) * 100
            rows.append(row)
    return rows


def format_comparison(rows: Sequence[Dict[str, Any]]) -> List[str]:
    """Fixed-width table with explicit signs and two decimals."""
    columns = ('easy', 'medium', 'hard', 'unknown', 'overall')
    width = max([len(r['run']) for r in rows] + [3])
    header = f"{'Run':<{width}}  Metric" + ''.join(f"{CLASS_LABELS.get(c, 'Overall'):>10}" for c in columns)
    lines = [header]
    for row in rows:
        cells = ''.join(f"{'n/a' if row[c] is None else format(row[c], '+.2f'):>10}" for c in columns)
        lines.append(f"{row['run']:<{width}}  {row['metric']:<6}{cells}")
    return lines


def export_comparison_csv(rows: Sequence[Dict[str, Any]], output_file: Union[str, Path]) -> int:
    fieldnames = ['run', 'metric', 'easy', 'medium', 'hard', 'unknown', 'overall']
    with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ('' if row[k] is None else (f"{row[k]:+.2f}" if k not in ('run', 'metric') else row[k]))
                             for k in fieldnames})
    return len(rows)
