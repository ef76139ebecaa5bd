import random

import pytest

from qforge.kg import load_kg
from qforge.templates import extract_template
from qforge.variants import (
    KIND_FIX_A,
    KIND_FIX_Q,
    STATUS_NEEDS_REVIEW,
    STATUS_PENDING,
    generate_all,
    generate_fix_a,
    generate_fix_q,
    render_question,
    sample_id_for,
)

from conftest import write_kg
from test_templates import make_sample


@pytest.fixture
def bottle_template(bottle_index):
    sample = make_sample(
        "what is used for storing liquid in this image?",
        ("bottle", "/r/UsedFor", "store liquid"),
        "bottle",
    )
    return extract_template(sample, bottle_index)


class TestWorkedExample:
    def test_fix_a_rewords_question_keeps_answer(self, bottle_template, bottle_index):
        samples = generate_fix_a(bottle_template, bottle_index)
        assert [s.question_text for s in samples] == [
            "what is used for holding water in this image?"
        ]
        assert samples[0].answer_nodes == ["bottle"]
        assert samples[0].kind == KIND_FIX_A
        assert samples[0].triplet == ("bottle", "/r/UsedFor", "hold water")

    def test_fix_q_keeps_question_swaps_answer(self, bottle_template, bottle_index):
        samples = generate_fix_q(bottle_template, bottle_index)
        assert {s.question_text for s in samples} == {
            "what is used for storing liquid in this image?"
        }
        assert sorted(s.answer_nodes[0] for s in samples) == ["jar", "tank"]
        assert all(s.kind == KIND_FIX_Q for s in samples)

    def test_originating_image_carried_for_exclusion(self, bottle_template, bottle_index):
        for sample in generate_fix_q(bottle_template, bottle_index):
            assert sample.originating_image_id == "img1"
            assert sample.image_id is None  # not assigned yet


class TestRendering:
    def test_render_applies_recorded_inflection(self, bottle_template):
        text, fallback = render_question(bottle_template, "hold water")
        assert text == "what is used for holding water in this image?"
        assert not fallback

    def test_render_falls_back_to_verbatim(self, bottle_template):
        # already a gerund, transform does not apply
        text, fallback = render_question(bottle_template, "swimming laps")
        assert text == "what is used for swimming laps in this image?"
        assert fallback

    def test_fallback_marks_needs_review(self, tmp_path):
        index = load_kg(
            write_kg(
                tmp_path / "kg.tsv",
                [
                    ("bottle", "/r/UsedFor", "store liquid"),
                    ("bottle", "/r/UsedFor", "swimming laps"),
                ],
            )
        )
        sample = make_sample(
            "what is used for storing liquid in this image?",
            ("bottle", "/r/UsedFor", "store liquid"),
            "bottle",
        )
        template = extract_template(sample, index)
        samples = generate_fix_a(template, index)
        assert len(samples) == 1
        assert samples[0].review_status == STATUS_NEEDS_REVIEW
        assert samples[0].review_reason == "inflection-fallback"


class TestCapsAndSelection:
    def _index(self, tmp_path, n):
        rows = [("bottle", "/r/UsedFor", "store liquid")]
        rows += [("bottle", "/r/UsedFor", f"task {i:02d}") for i in range(n)]
        rows += [(f"thing {i:02d}", "/r/UsedFor", "store liquid") for i in range(n)]
        return load_kg(write_kg(tmp_path / "kg.tsv", rows))

    def _template(self, index):
        sample = make_sample(
            "what is used for storing liquid in this image?",
            ("bottle", "/r/UsedFor", "store liquid"),
            "bottle",
        )
        return extract_template(sample, index)

    def test_cap_truncates_sorted_sibling_order(self, tmp_path):
        index = self._index(tmp_path, 20)
        template = self._template(index)
        fix_a = generate_fix_a(template, index, cap=5)
        fix_q = generate_fix_q(template, index, cap=5)
        assert len(fix_a) == len(fix_q) == 5
        # deterministic head of the sorted sibling list
        assert [s.triplet[2] for s in fix_a] == [f"task {i:02d}" for i in range(5)]
        assert [s.triplet[0] for s in fix_q] == [f"thing {i:02d}" for i in range(5)]

    def test_under_cap_keeps_all(self, tmp_path):
        index = self._index(tmp_path, 3)
        template = self._template(index)
        assert len(generate_fix_a(template, index, cap=5)) == 3

    def test_random_selection_is_seeded_subset(self, tmp_path):
        index = self._index(tmp_path, 20)
        template = self._template(index)
        runs = [
            generate_all([template], index, selection="random", seed=7)
            for _ in range(3)
        ]
        assert runs[0] == runs[1] == runs[2]
        other = generate_all([template], index, selection="random", seed=8)
        assert other != runs[0]
        all_tails = {f"task {i:02d}" for i in range(20)}
        chosen = {s.triplet[2] for s in runs[0] if s.kind == KIND_FIX_A}
        assert chosen < all_tails and len(chosen) == 5

    def test_random_without_rng_rejected(self, tmp_path):
        index = self._index(tmp_path, 20)
        template = self._template(index)
        with pytest.raises(ValueError):
            generate_fix_a(template, index, cap=5, selection="random", rng=None)

    def test_negative_cap_rejected(self, tmp_path):
        index = self._index(tmp_path, 3)
        template = self._template(index)
        with pytest.raises(ValueError):
            generate_fix_a(template, index, cap=-1)


class TestInvariants:
    def test_inverted_template_generates_nothing(self, bottle_index):
        sample = make_sample("is the bottle full?", ("bottle", "/r/UsedFor", "store liquid"), "bottle")
        template = extract_template(sample, bottle_index)
        assert template.inverted
        assert generate_fix_a(template, bottle_index) == []
        assert generate_fix_q(template, bottle_index) == []

    def test_fix_a_never_reproduces_originating_question(self, tmp_path):
        # sibling rendering identical to the source question is dropped
        index = load_kg(
            write_kg(
                tmp_path / "kg.tsv",
                [
                    ("bottle", "/r/UsedFor", "store liquid"),
                    ("bottle", "/r/UsedFor", "storing liquid"),
                ],
            )
        )
        sample = make_sample(
            "what is used for storing liquid in this image?",
            ("bottle", "/r/UsedFor", "store liquid"),
            "bottle",
        )
        template = extract_template(sample, index)
        samples = generate_fix_a(template, index)
        assert samples == []

    def test_ids_stable_across_runs(self, bottle_template, bottle_index):
        first = generate_all([bottle_template], bottle_index, seed=3)
        second = generate_all([bottle_template], bottle_index, seed=3)
        assert [s.id for s in first] == [s.id for s in second]
        assert all(s.id.startswith("adv-") for s in first)

    def test_id_is_pure_function_of_inputs(self):
        a = sample_id_for("tpl-1", KIND_FIX_A, ("a", "/r/UsedFor", "b"))
        b = sample_id_for("tpl-1", KIND_FIX_A, ("a", "/r/UsedFor", "b"))
        c = sample_id_for("tpl-1", KIND_FIX_Q, ("a", "/r/UsedFor", "b"))
        assert a == b != c

    def test_generate_all_canonical_order(self, tmp_path):
        rows = [
            ("bottle", "/r/UsedFor", "store liquid"),
            ("bottle", "/r/UsedFor", "hold water"),
            ("jar", "/r/UsedFor", "store liquid"),
            ("spoon", "/r/UsedFor", "scoop food"),
            ("ladle", "/r/UsedFor", "scoop food"),
            ("spoon", "/r/UsedFor", "stir soup"),
        ]
        index = load_kg(write_kg(tmp_path / "kg.tsv", rows))
        t1 = extract_template(
            make_sample(
                "what is used for storing liquid in this image?",
                ("bottle", "/r/UsedFor", "store liquid"),
                "bottle",
                sample_id="q1",
            ),
            index,
        )
        t2 = extract_template(
            make_sample(
                "what is used for scooping food in this image?",
                ("spoon", "/r/UsedFor", "scoop food"),
                "spoon",
                sample_id="q2",
            ),
            index,
        )
        forward = generate_all([t1, t2], index)
        backward = generate_all([t2, t1], index)
        assert forward == backward
        keys = [(s.template_id, s.kind, s.triplet) for s in forward]
        assert keys == sorted(keys)

    def test_round_trip_record(self, bottle_template, bottle_index):
        sample = generate_fix_a(bottle_template, bottle_index)[0]
        from qforge.variants import AdversarialSample

        assert AdversarialSample.from_record(sample.to_record()) == sample
