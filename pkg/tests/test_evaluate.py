import json

import pytest

from qforge.evaluate import (
    DuplicatePredictionError,
    GoldEntry,
    bucket_by_answer_occurrence,
    breakdown_by_kind,
    evaluate,
    is_correct,
    load_predictions,
    make_buckets,
    score,
)
from qforge.folds import ConfigValueError

from conftest import write_jsonl_file
from oracles import filter_and_count


def gold(sample_id, answers, kind=None, fold=None):
    return GoldEntry(sample_id=sample_id, answers=tuple(answers), kind=kind, fold=fold)


class TestMatching:
    def test_exact_normalized_match(self):
        entry = gold("s1", ["bottle"])
        assert is_correct("bottle", entry)
        assert is_correct("  Bottle ", entry)
        assert not is_correct("bottles", entry)
        assert not is_correct("", entry)
        assert not is_correct(None, entry)

    def test_any_gold_answer_counts(self):
        entry = gold("s1", ["bottle", "jar"])
        assert is_correct("jar", entry)
        assert is_correct("bottle", entry)
        assert not is_correct("tank", entry)


class TestLoadPredictions:
    def test_reads_jsonl(self, tmp_path):
        path = write_jsonl_file(
            tmp_path / "preds.jsonl",
            [{"sample_id": "s1", "answer": "bottle"}, {"sample_id": "s2", "answer": "jar"}],
        )
        assert load_predictions(path) == {"s1": "bottle", "s2": "jar"}

    def test_duplicate_sample_id_rejected(self, tmp_path):
        path = write_jsonl_file(
            tmp_path / "preds.jsonl",
            [{"sample_id": "s1", "answer": "bottle"}, {"sample_id": "s1", "answer": "jar"}],
        )
        with pytest.raises(DuplicatePredictionError):
            load_predictions(path)


@pytest.fixture
def fixture_30():
    """30 scored items over 3 folds and both kinds, with some multi-answer."""
    gold_set = []
    predictions = {}
    answers_pool = ["bottle", "jar", "cup", "spoon", "plate"]
    for i in range(30):
        answers = [answers_pool[i % 5]]
        if i % 7 == 0:
            answers.append(answers_pool[(i + 1) % 5])
        kind = "FixA" if i % 2 == 0 else "FixQ"
        entry = gold(f"s{i:02d}", answers, kind=kind, fold=i % 3)
        gold_set.append(entry)
        if i % 5 == 0:
            predictions[entry.sample_id] = answers[-1]  # hit via secondary when present
        elif i % 3 == 0:
            predictions[entry.sample_id] = answers[0]
        elif i % 4 == 0:
            predictions[entry.sample_id] = "wrong"
        # remaining ids have no prediction at all
    occurrences = {"bottle": 2, "jar": 9, "cup": 10, "spoon": 49, "plate": 80}
    return predictions, gold_set, occurrences


class TestScore:
    def test_overall_matches_filter_and_count(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        report = score(predictions, gold_set)
        correct, total = filter_and_count(predictions, gold_set, lambda g: True)
        assert (report.correct, report.total) == (correct, total)
        assert report.accuracy == correct / total

    def test_kind_breakdown_matches_oracle(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        report = score(predictions, gold_set)
        for kind in ("FixA", "FixQ"):
            c, t = filter_and_count(predictions, gold_set, lambda g, k=kind: g.kind == k)
            assert report.per_kind[kind] == (c, t)
            assert report.kind_accuracy(kind) == (c / t if t else None)

    def test_fold_breakdown_matches_oracle(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        report = score(predictions, gold_set)
        for fold in (0, 1, 2):
            c, t = filter_and_count(predictions, gold_set, lambda g, f=fold: g.fold == f)
            assert report.per_fold[fold] == (c, t)

    def test_missing_kind_is_none_not_zero(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        report = score(predictions, gold_set)
        assert report.kind_accuracy("FixZ") is None

    def test_breakdown_by_kind_wrapper(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        breakdown = breakdown_by_kind(predictions, gold_set)
        assert set(breakdown) == {"FixA", "FixQ"}
        report = score(predictions, gold_set)
        assert breakdown["FixA"] == report.kind_accuracy("FixA")

    def test_fold_mean_std_population(self, fixture_30):
        predictions, gold_set, _ = fixture_30
        report = score(predictions, gold_set)
        accs = list(report.fold_accuracies().values())
        mean = sum(accs) / len(accs)
        var = sum((a - mean) ** 2 for a in accs) / len(accs)
        assert report.fold_mean_std() == pytest.approx((mean, var**0.5))

    def test_empty_gold_set(self):
        report = score({}, [])
        assert report.total == 0
        assert report.accuracy == 0.0


class TestBuckets:
    def test_edges_validated(self):
        for bad in ([], [1, 10], [0, 10, 10], [0, 50, 10]):
            with pytest.raises(ConfigValueError):
                make_buckets(bad)

    def test_labels_and_bounds(self):
        buckets = make_buckets([0, 10, 50])
        assert [(b.label, b.low, b.high) for b in buckets] == [
            ("0-10", 0, 10),
            ("10-50", 10, 50),
            ("50+", 50, None),
        ]

    def test_half_open_boundaries(self):
        gold_set = [gold("s1", ["a"]), gold("s2", ["b"]), gold("s3", ["c"]), gold("s4", ["d"])]
        occurrences = {"a": 3, "b": 10, "c": 49, "d": 50}
        buckets = bucket_by_answer_occurrence({}, gold_set, occurrences, [0, 10, 50])
        by_label = {b.label: b.total for b in buckets}
        assert by_label == {"0-10": 1, "10-50": 2, "50+": 1}

    def test_unseen_answer_counts_as_zero_occurrences(self):
        buckets = bucket_by_answer_occurrence({}, [gold("s1", ["ghost"])], {}, [0, 10])
        assert buckets[0].total == 1
        assert buckets[0].occurrence_sum == 0

    def test_bucket_sums_consistent_with_overall(self, fixture_30):
        predictions, gold_set, occurrences = fixture_30
        report = evaluate(predictions, gold_set, occurrences, [0, 10, 50])
        assert sum(b.total for b in report.buckets) == report.total
        assert sum(b.correct for b in report.buckets) == report.correct

    def test_bucket_accuracy_matches_oracle(self, fixture_30):
        predictions, gold_set, occurrences = fixture_30
        buckets = bucket_by_answer_occurrence(predictions, gold_set, occurrences, [0, 10, 50])
        for bucket in buckets:
            def in_bucket(g, b=bucket):
                occ = occurrences.get(g.answers[0], 0)
                return occ >= b.low and (b.high is None or occ < b.high)

            c, t = filter_and_count(predictions, gold_set, in_bucket)
            assert (bucket.correct, bucket.total) == (c, t)

    def test_empty_bucket_accuracy_is_none(self):
        buckets = bucket_by_answer_occurrence({}, [], {}, [0, 10])
        assert all(b.accuracy is None for b in buckets)


class TestReportOutput:
    def test_jsonable_and_table(self, fixture_30):
        predictions, gold_set, occurrences = fixture_30
        report = evaluate(predictions, gold_set, occurrences, [0, 10, 50])
        payload = report.to_jsonable()
        json.dumps(payload)
        assert payload["std_convention"] == "population"
        assert payload["total"] == 30
        assert {b["label"] for b in payload["buckets"]} == {"0-10", "10-50", "50+"}
        table = report.format_table()
        assert "overall" in table
        assert "FixA" in table and "FixQ" in table
        assert "occ 0-10" in table
