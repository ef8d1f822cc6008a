#!/usr/bin/env python3
"""
Test script for OCR metrics.

Tests edit distance, CER/WER, per-class aggregation and run evaluation.
"""

import csv
import math
import tempfile
from functools import lru_cache
from pathlib import Path

import numpy as np

from ocr_metrics import (
    EvalInputError, EvalReport, UndefinedMetricError, aggregate, cer, compare_reports, evaluate_line,
    evaluate_run, export_comparison_csv, format_comparison, format_report_lines, levenshtein,
    load_hypotheses, wer,
)


def reference_distance(a, b):
    """Edit distance straight from its recursive definition."""
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def write_references(root: Path, rows):
    manifest = root / 'refs.tsv'
    manifest.write_text(''.join(f"{i}\t{d}\t{t}\n" for i, d, t in rows), encoding='utf-8')
    return manifest


def write_hypotheses(root: Path, rows, name='hyp.tsv'):
    path = root / name
    path.write_text(''.join(f"{i}\t{t}\n" for i, t in rows), encoding='utf-8')
    return path


REFS = [
    ('p/l1.png', 'easy', 'the cat sat'),
    ('p/l2.png', 'easy', 'kitten'),
    ('p/l3.png', 'hard', 'Ein Würfel fällt'),
    ('p/l4.png', 'medium', 'a b'),
]


def test_levenshtein_against_definition():
    """Test DP edit distance on 10,000 random pairs of up to 6 symbols."""
    print("🧪 Testing edit distance...")
    rng = np.random.default_rng(12)
    alphabet = list('ab c')
    for _ in range(10_000):
        a = ''.join(rng.choice(alphabet, size=rng.integers(0, 7)))
        b = ''.join(rng.choice(alphabet, size=rng.integers(0, 7)))
        c = ''.join(rng.choice(alphabet, size=rng.integers(0, 7)))
        assert levenshtein(a, b) == reference_distance(a, b) == levenshtein(b, a)
        assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
        assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein('', '') == 0
    assert levenshtein(['the', 'cat'], ['the', 'dog', 'cat']) == 1
    print("✅ Edit distance matches the recursive definition")


def test_error_rate_fixtures():
    print("\n🧪 Testing CER/WER fixtures...")
    assert math.isclose(cer('kitten', 'sitting'), 3 / 7)
    assert math.isclose(wer('the cat sat', 'the cat sat on'), 0.25)
    assert wer('x', 'a b') == 1.0
    assert cer('abcdef', 'a') == 5.0
    assert cer('same', 'same') == 0.0 and wer('same  words', 'same words') == 0.0
    # composed and decomposed forms are the same characters
    assert cer('caf\u00e9', 'cafe\u0301') == 0.0

    for hyp, ref in (('x', ''), ('x', '   ')):
        try:
            wer(hyp, ref)
        except UndefinedMetricError:
            pass
        else:
            raise AssertionError(f"WER defined for reference {ref!r}")
    try:
        cer('x', '')
    except UndefinedMetricError:
        pass
    else:
        raise AssertionError("CER defined for empty reference")
    print("✅ Error rate fixtures verified")


def test_evaluate_line():
    line = evaluate_line('id', 'the cat', 'the cat sat', 'hard')
    assert line.char_distance == 4 and line.n_chars == 11
    assert line.word_distance == 1 and line.n_words == 3
    assert line.difficulty == 'hard' and not line.missing
    # one wrong letter is one edit at both levels
    typo = evaluate_line('id', 'the cot sat', 'the cat sat')
    assert typo.word_distance == typo.char_distance == 1
    assert typo.wer > typo.cer
    # whitespace-only reference: characters but no words
    blank = evaluate_line('id', 'x', '  ')
    assert blank.char_distance == 2 and blank.n_chars == 2 and blank.cer == 1.0
    assert blank.wer is None and blank.n_words == 0
    try:
        evaluate_line('id', 'x', '')
    except UndefinedMetricError:
        pass
    else:
        raise AssertionError("empty reference scored")


def test_aggregation_identities():
    print("\n🧪 Testing aggregation over random partitions...")
    rng = np.random.default_rng(5)
    words = ['ab', 'ba', 'abc', 'c', 'bca']
    for _ in range(20):
        evals = []
        for i in range(int(rng.integers(1, 40))):
            ref = ' '.join(rng.choice(words, size=rng.integers(1, 5)))
            hyp = ' '.join(rng.choice(words, size=rng.integers(0, 5)))
            difficulty = str(rng.choice(['easy', 'medium', 'hard', 'unknown']))
            evals.append(evaluate_line(f"l{i:03d}", hyp, ref, difficulty))

        report = aggregate(evals)
        assert report.overall.count == len(evals) == sum(s.count for s in report.classes.values())
        assert math.isclose(report.overall.macro_cer, math.fsum(e.cer for e in evals) / len(evals))
        assert math.isclose(report.overall.macro_wer, math.fsum(e.wer for e in evals) / len(evals))
        assert math.isclose(report.overall.micro_cer,
                            sum(e.char_distance for e in evals) / sum(e.n_chars for e in evals))
        for stats in report.classes.values():
            if stats.count == 0:
                assert stats.macro_cer is None and stats.micro_wer is None

        shuffled = aggregate([evals[i] for i in rng.permutation(len(evals))])
        assert shuffled.to_dict() == report.to_dict()
    print("✅ Overall rates are class-count weighted")


def test_whitespace_reference_keeps_cer():
    print("\n🧪 Testing a whitespace-only reference...")
    evals = [evaluate_line('a', 'the cat', 'the cat sat', 'easy'),
             evaluate_line('b', 'x', '   ', 'easy'),
             evaluate_line('c', 'sitting', 'kitten', 'hard')]
    report = aggregate(evals)
    easy = report.classes['easy']
    assert easy.count == 2 and easy.wer_count == 1
    assert math.isclose(easy.macro_cer, (4 / 11 + 1.0) / 2)
    assert math.isclose(easy.micro_cer, 7 / 14)
    assert math.isclose(easy.macro_wer, 1 / 3)
    assert easy.word_distance == 1 and easy.n_words == 3

    overall = report.overall
    assert overall.count == 3 and overall.wer_count == 2
    assert math.isclose(overall.macro_cer, (4 / 11 + 1.0 + 3 / 6) / 3)
    # WER is weighted by the lines that have words
    assert math.isclose(overall.macro_wer, (1 / 3 + 1.0) / 2)
    assert format_report_lines(report)[0] == "Easy (2 lines) CER 68.18% WER 33.33%"

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        refs = write_references(root, [('a.png', 'easy', 'the cat sat'), ('b.png', 'easy', '   ')])
        hyp = write_hypotheses(root, [('a.png', 'the cat'), ('b.png', 'x')])
        run = evaluate_run(refs, hyp)
        assert run.metadata['excluded_lines'] == 0
        assert run.metadata['wer_undefined_lines'] == 1
        assert run.overall.count == 2 and run.overall.wer_count == 1
    print("✅ Whitespace references count towards CER only")


def test_empty_aggregate():
    report = aggregate([])
    assert report.overall.count == 0 and report.overall.macro_cer is None
    assert format_report_lines(report) == ["Overall CER n/a WER n/a"]


def test_perfect_run():
    print("\n🧪 Testing a perfect hypothesis file...")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        refs = write_references(root, REFS)
        hyp = write_hypotheses(root, [(i, t) for i, _, t in REFS])
        report = evaluate_run(refs, hyp)
        lines = format_report_lines(report)
        assert lines[0] == "Easy (2 lines) CER 0.00% WER 0.00%"
        assert lines[-1] == "Overall CER 0.00% WER 0.00%"
        assert len(lines) == 4
        assert report.metadata['missing_hypotheses'] == 0
    print("✅ Perfect run scores zero")


def test_missing_unknown_and_excluded():
    print("\n🧪 Testing missing, unknown and excluded lines...")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        refs = write_references(root, REFS + [('p/blank.png', 'hard', '')])
        hyp = write_hypotheses(root, [
            ('p/l1.png', 'the cat sat on'),
            ('p/l2.png', 'sitting'),
            ('p/l4.png', 'x'),
            ('p/ghost.png', 'boo'),
        ])
        report = evaluate_run(refs, hyp)
        meta = report.metadata
        assert meta['missing_hypotheses'] == 1
        assert meta['unknown_hypotheses'] == 1
        assert meta['excluded_lines'] == 1
        assert report.overall.count == 4

        hard = report.classes['hard']
        assert hard.count == 1 and hard.macro_cer == 1.0 and hard.macro_wer == 1.0
        by_id = {line.id: line for line in report.lines}
        assert by_id['p/l3.png'].missing
        assert math.isclose(by_id['p/l1.png'].wer, 1 / 3)
        assert report.classes['medium'].macro_wer == 1.0

        easy = report.classes['easy']
        assert math.isclose(easy.macro_cer, (3 / 11 + 3 / 6) / 2)
        assert math.isclose(easy.micro_cer, 6 / 17)
    print("✅ Missing hypotheses score as empty text")


def test_hypothesis_file_errors():
    print("\n🧪 Testing hypothesis file parsing...")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        path = root / 'hyp.tsv'
        path.write_text("a.png\tone\nb.png\n\nc.png\tx\ty\n", encoding='utf-8')
        hypotheses = load_hypotheses(path)
        assert hypotheses == {'a.png': 'one', 'b.png': '', 'c.png': 'x\ty'}

        path.write_text("a.png\tone\na.png\ttwo\n", encoding='utf-8')
        for call in (lambda: load_hypotheses(path), lambda: load_hypotheses(root / 'absent.tsv')):
            try:
                call()
            except EvalInputError:
                pass
            else:
                raise AssertionError("bad hypothesis file accepted")
    print("✅ Hypothesis errors reported")


def test_report_persistence_and_csv():
    print("\n🧪 Testing report JSON and CSV export...")
    evals = [evaluate_line('a', 'the cat', 'the cat sat', 'easy'),
             evaluate_line('b', 'kitten', 'sitting', 'hard')]
    report = aggregate(evals, {'hypothesis_file': 'hyp.tsv'})
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        report.save_json(root / 'report.json')
        loaded = EvalReport.load_json(root / 'report.json')
        assert loaded.to_dict() == report.to_dict()

        assert report.export_to_csv(root / 'report.csv') == 2
        with open(root / 'report.csv', newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        assert rows[0]['metric'] == 'CER' and rows[1]['metric'] == 'WER'
        assert rows[0]['Medium'] == '' and rows[0]['Hard'] == '42.86'
        assert rows[1]['Easy'] == '33.33'

        (root / 'junk.json').write_text('[1, 2]', encoding='utf-8')
        try:
            EvalReport.load_json(root / 'junk.json')
        except EvalInputError:
            pass
        else:
            raise AssertionError("junk report accepted")
    print("✅ Reports persist and export")


def test_compare_reports():
    print("\n🧪 Testing run comparison...")
    base = aggregate([evaluate_line('a', 'the cat', 'the cat sat', 'easy'),
                      evaluate_line('b', 'sitting', 'sitting', 'hard')])
    better = aggregate([evaluate_line('a', 'the cat sat', 'the cat sat', 'easy'),
                        evaluate_line('b', 'sitting', 'sitting', 'hard')])
    rows = compare_reports(base, [('augmented', better)])
    assert len(rows) == 2
    cer_row = rows[0]
    assert cer_row['run'] == 'augmented' and cer_row['metric'] == 'CER'
    assert math.isclose(cer_row['easy'], -400 / 11)
    assert cer_row['hard'] == 0.0
    assert cer_row['medium'] is None
    assert math.isclose(cer_row['overall'], -200 / 11)

    table = format_comparison(rows)
    assert '-36.36' in table[1] and '+0.00' in table[1] and 'n/a' in table[1]

    micro = compare_reports(base, [('augmented', better)], kind='micro')
    assert math.isclose(micro[0]['overall'], -400 / 18)

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'diff.csv'
        assert export_comparison_csv(rows, out) == 2
        with open(out, newline='', encoding='utf-8') as f:
            first = next(csv.DictReader(f))
        assert first['easy'] == '-36.36' and first['medium'] == ''
    print("✅ Comparison in percentage points")


def main():
    """Run all OCR metric tests."""
    print("📏 OCR Metrics Test Suite")
    print("=" * 50)

    try:
        test_levenshtein_against_definition()
        test_error_rate_fixtures()
        test_evaluate_line()
        test_aggregation_identities()
        test_whitespace_reference_keeps_cer()
        test_empty_aggregate()
        test_perfect_run()
        test_missing_unknown_and_excluded()
        test_hypothesis_file_errors()
        test_report_persistence_and_csv()
        test_compare_reports()

        print("\n🎉 All OCR metric tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
