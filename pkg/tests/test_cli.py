import hashlib
import json
from pathlib import Path

import pytest

from qforge.cli import main
from qforge.config import PipelineConfig
from qforge.runio import read_json, read_jsonl

from conftest import make_workspace, write_json_file, write_jsonl_file

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run(args):
    return main([str(a) for a in args])


def read_manifest(outdir, stage):
    return read_json(Path(outdir) / stage / "manifest.json")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full pipeline run shared by the read-only assertions below."""
    ws = make_workspace(tmp_path_factory.mktemp("pipeline"))
    base = ws["cli"]
    assert run(["extract-templates", *base]) == 0
    assert run(["generate-variants", *base]) == 0
    assert run(["assign-images", *base]) == 0
    assert run(["build-folds", *base]) == 0
    assert run(["augment", *base, "--freeze"]) == 0
    assert run(["stats", *base]) == 0

    # predictions over the adversarial gold: alternate right and wrong
    outdir = Path(ws["outdir"])
    predictions = []
    seen = set()
    for fold_dir in sorted(outdir.glob("folds/fold*")):
        for i, record in enumerate(read_jsonl(fold_dir / "adversarial_test.jsonl")):
            if record["id"] in seen:
                continue
            seen.add(record["id"])
            answer = record["answers"][0] if i % 2 == 0 else "definitely wrong"
            predictions.append({"sample_id": record["id"], "answer": answer})
    ws["predictions"] = write_jsonl_file(outdir.parent / "predictions.jsonl", predictions)
    assert run(["evaluate", *base, "--predictions", ws["predictions"]]) == 0
    return ws


class TestStageArtifacts:
    def test_templates_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        templates = list(read_jsonl(outdir / "templates" / "templates.jsonl"))
        assert templates
        assert all("<h>" in t["text"] or "<t>" in t["text"] for t in templates)
        manifest = read_manifest(outdir, "templates")
        assert manifest["stage"] == "templates"
        assert manifest["counts"]["templates_after_dedupe"] == len(templates)

    def test_variants_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        samples = list(read_jsonl(outdir / "variants" / "samples.jsonl"))
        assert samples
        kinds = {s["kind"] for s in samples}
        assert kinds == {"FixA", "FixQ"}
        manifest = read_manifest(outdir, "variants")
        assert manifest["counts"]["samples_total"] == len(samples)
        assert manifest["counts"]["kind_FixA"] + manifest["counts"]["kind_FixQ"] == len(samples)

    def test_caps_respected(self, pipeline):
        outdir = Path(pipeline["outdir"])
        per_template = {}
        for s in read_jsonl(outdir / "variants" / "samples.jsonl"):
            key = (s["template_id"], s["kind"])
            per_template[key] = per_template.get(key, 0) + 1
        assert max(per_template.values()) <= 5

    def test_images_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        assigned = list(read_jsonl(outdir / "images" / "samples.jsonl"))
        assert assigned
        assert all(s["image_id"] for s in assigned)
        for s in assigned:
            if s["kind"] == "FixQ":
                assert s["image_id"] != s["originating_image_id"]
        report = read_json(outdir / "images" / "assignment.json")
        assert report["assigned"] == len(assigned)
        counts = report["ledger"]["counts"]
        assert sum(counts.values()) == len(assigned)

    def test_folds_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        fold_dirs = sorted((outdir / "folds").glob("fold*"))
        assert len(fold_dirs) == 3
        for fold_dir in fold_dirs:
            train = list(read_jsonl(fold_dir / "standard_train.jsonl"))
            test = list(read_jsonl(fold_dir / "standard_test.jsonl"))
            adv = list(read_jsonl(fold_dir / "adversarial_test.jsonl"))
            aug = list(read_jsonl(fold_dir / "augmentation.jsonl"))
            origins = list(read_jsonl(fold_dir / "originating.jsonl"))
            assert train and test
            test_ids = {s["id"] for s in test}
            assert {s["id"] for s in origins} <= test_ids
            assert {a["template_id"] for a in adv}.isdisjoint(
                {a["template_id"] for a in aug}
            )

    def test_augment_stage_freeze(self, pipeline):
        outdir = Path(pipeline["outdir"])
        manifest = read_manifest(outdir, "augment")
        assert manifest["counts"]["frozen"] == 1
        for fold_dir in sorted((outdir / "augment").glob("fold*")):
            plan = list(read_jsonl(fold_dir / "plan.jsonl"))
            train = list(read_jsonl(fold_dir / "train.jsonl"))
            assert train
            planned_ids = {p["id"] for p in plan}
            replaced = [t for t in train if t["replaced"]]
            fold_name = fold_dir.name
            assert manifest["counts"][f"{fold_name}_replaced"] == len(replaced)
            assert manifest["counts"][f"{fold_name}_emitted"] == len(train)
            # only planned samples may have been replaced
            for record in replaced:
                assert record["originating_sample_id"] in planned_ids

    def test_stats_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        stats_dir = outdir / "stats"
        stats = read_json(stats_dir / "stats.json")
        assert len(stats["per_fold_counts"]) == 3
        tsv = (stats_dir / "stats.tsv").read_text().splitlines()
        assert tsv[0] == "fold\tset\tcount"
        assert len(tsv) == 1 + 3 * 5  # 3 folds x 5 named sets
        assert "standard_train" in (stats_dir / "table.txt").read_text()
        for name in ("set_counts.png", "answer_histogram.png"):
            assert (stats_dir / name).read_bytes()[:8] == PNG_MAGIC

    def test_eval_stage(self, pipeline):
        outdir = Path(pipeline["outdir"])
        eval_dir = outdir / "eval"
        report = read_json(eval_dir / "report.json")
        assert report["std_convention"] == "population"
        assert set(report["per_kind"]) <= {"FixA", "FixQ"}
        assert sum(b["total"] for b in report["buckets"]) == report["total"]
        tsv = (eval_dir / "report.tsv").read_text().splitlines()
        assert tsv[0] == "group\tname\tcorrect\ttotal\taccuracy"
        overall = tsv[1].split("\t")
        assert int(overall[2]) == report["correct"]
        for name in ("kind_accuracy.png", "bucket_accuracy.png"):
            assert (eval_dir / name).read_bytes()[:8] == PNG_MAGIC
        manifest = read_manifest(outdir, "eval")
        assert manifest["accuracy"] == report["accuracy"]
        assert manifest["gold_set"] == "adversarial_test"


class TestManifests:
    def test_stage_sequence_is_monotone(self, pipeline):
        outdir = Path(pipeline["outdir"])
        stages = ["templates", "variants", "images", "folds", "augment", "stats", "eval"]
        seqs = [read_manifest(outdir, s)["stage_seq"] for s in stages]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_config_hash_consistent(self, pipeline):
        outdir = Path(pipeline["outdir"])
        hashes = {read_manifest(outdir, s)["config_hash"] for s in ("templates", "variants", "folds")}
        assert len(hashes) == 1

    def test_input_hashes_are_real_sha256(self, pipeline):
        outdir = Path(pipeline["outdir"])
        manifest = read_manifest(outdir, "templates")
        kg_entry = manifest["inputs"]["kg"]
        digest = hashlib.sha256(Path(kg_entry["path"]).read_bytes()).hexdigest()
        assert kg_entry["sha256"] == digest

    def test_variants_records_upstream_hash(self, pipeline):
        outdir = Path(pipeline["outdir"])
        manifest = read_manifest(outdir, "variants")
        upstream = read_manifest(outdir, "templates")
        assert manifest["upstream_config_hash"] == upstream["config_hash"]


class TestDeterminism:
    def test_stage_rerun_is_byte_identical(self, tmp_path):
        ws = make_workspace(tmp_path, n_samples=30, n_images=8)
        base = ws["cli"]
        assert run(["extract-templates", *base]) == 0
        assert run(["generate-variants", *base]) == 0
        outdir = Path(ws["outdir"])
        first = {
            p.name: p.read_bytes()
            for p in (outdir / "variants").iterdir()
        }
        assert run(["generate-variants", *base]) == 0
        second = {
            p.name: p.read_bytes()
            for p in (outdir / "variants").iterdir()
        }
        assert first == second


class TestExitCodes:
    def test_missing_input_is_validation_error(self, tmp_path, capsys):
        code = run(
            ["extract-templates", "--kg", tmp_path / "nope.tsv",
             "--corpus", tmp_path / "nope.jsonl", "--outdir", tmp_path / "out"]
        )
        assert code == 1
        assert "validation error" in capsys.readouterr().err

    def test_missing_prerequisite_stage(self, tmp_path, capsys):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        code = run(["generate-variants", *ws["cli"]])
        assert code == 2
        err = capsys.readouterr().err
        assert "extract-templates" in err  # tells the user what to run

    def test_usage_error_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["extract-templates", "--no-such-flag"])
        assert exc.value.code == 1

    def test_unknown_subcommand_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["transmogrify"])
        assert exc.value.code == 1

    def test_evaluate_requires_predictions(self, pipeline, capsys):
        code = run(["evaluate", *pipeline["cli"]])
        assert code == 1
        assert "predictions" in capsys.readouterr().err

    def test_bad_replace_prob(self, tmp_path):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        assert run(["extract-templates", *ws["cli"], "--replace-prob", "1.5"]) == 1

    def test_unknown_config_key(self, tmp_path):
        config = write_json_file(tmp_path / "config.json", {"no_such_knob": 1})
        assert run(["extract-templates", "--config", config]) == 1

    def test_runtime_error_exits_three(self, tmp_path, monkeypatch, capsys):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        base = ws["cli"]
        assert run(["extract-templates", *base]) == 0
        assert run(["generate-variants", *base]) == 0
        assert run(["assign-images", *base]) == 0
        import qforge.cli as cli_mod

        def boom(*args, **kwargs):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(cli_mod, "build_bundle", boom)
        assert run(["build-folds", *base]) == 3
        assert "runtime error" in capsys.readouterr().err

    def test_aborted_stage_leaves_no_partial_dir(self, tmp_path, monkeypatch):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        base = ws["cli"]
        assert run(["extract-templates", *base]) == 0
        import qforge.cli as cli_mod

        def boom(*args, **kwargs):
            raise RuntimeError("mid-stage crash")

        monkeypatch.setattr(cli_mod, "generate_all", boom)
        assert run(["generate-variants", *base]) == 3
        outdir = Path(ws["outdir"])
        assert not (outdir / "variants").exists()
        assert not list(outdir.glob(".variants*"))  # no temp dir left behind


class TestConfigPrecedence:
    def test_flags_override_config_file(self, tmp_path):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        config = write_json_file(
            tmp_path / "config.json",
            {
                "kg": str(ws["kg"]),
                "corpus": str(ws["corpus"]),
                "outdir": str(ws["outdir"]),
                "seed": 1,
                "fix_a_cap": 2,
            },
        )
        assert run(["extract-templates", "--config", config, "--seed", "99"]) == 0
        manifest = read_manifest(ws["outdir"], "templates")
        assert manifest["config"]["seed"] == 99
        assert manifest["config"]["fix_a_cap"] == 2

    def test_config_file_alone_suffices(self, tmp_path):
        ws = make_workspace(tmp_path, n_samples=10, n_images=4)
        config = write_json_file(
            tmp_path / "config.json",
            {"kg": str(ws["kg"]), "corpus": str(ws["corpus"]), "outdir": str(ws["outdir"])},
        )
        assert run(["extract-templates", "--config", config]) == 0


class TestReviewFlow:
    def _through_images(self, tmp_path):
        ws = make_workspace(tmp_path, n_samples=30, n_images=8)
        base = ws["cli"]
        assert run(["extract-templates", *base]) == 0
        assert run(["generate-variants", *base]) == 0
        assert run(["assign-images", *base]) == 0
        return ws

    def _config(self, ws):
        return PipelineConfig(
            kg=str(ws["kg"]),
            corpus=str(ws["corpus"]),
            catalog=str(ws["catalog"]),
            folds=str(ws["folds"]),
            outdir=str(ws["outdir"]),
        )

    def test_export_without_verdicts(self, tmp_path, capsys):
        ws = self._through_images(tmp_path)
        assert run(["export", *ws["cli"]]) == 0
        outdir = Path(ws["outdir"])
        export = read_json(outdir / "review" / "export.json")
        assert export["accepted_samples"] == []
        assert export["funnel"]["accepted"] == 0
        funnel = read_json(outdir / "review" / "funnel.json")
        assert funnel == export["funnel"]

    def test_folds_auto_accept_without_export(self, tmp_path):
        ws = self._through_images(tmp_path)
        assert run(["build-folds", *ws["cli"]]) == 0
        manifest = read_manifest(ws["outdir"], "folds")
        assert manifest["verification_source"] == "auto-accept"

    def test_accepted_verdicts_flow_into_folds(self, tmp_path):
        from qforge.cli import _build_store, _default_log_path
        from qforge.review import DECISION_ACCEPT, ITEM_SAMPLE, Verdict

        ws = self._through_images(tmp_path)
        config = self._config(ws)
        store = _build_store(config, _default_log_path(config))
        sample_items = [i for i in store.queue(kind=ITEM_SAMPLE)][:12]
        for item in sample_items:
            for annotator in ("a1", "a2"):
                store.submit(Verdict(annotator=annotator, item_id=item.item_id,
                                     decision=DECISION_ACCEPT))
        assert run(["export", *ws["cli"]]) == 0
        assert run(["build-folds", *ws["cli"]]) == 0

        manifest = read_manifest(ws["outdir"], "folds")
        assert manifest["verification_source"] == "review-export"
        accepted_ids = {i.item_id for i in sample_items}
        outdir = Path(ws["outdir"])
        seen = set()
        for fold_dir in sorted((outdir / "folds").glob("fold*")):
            for record in read_jsonl(fold_dir / "adversarial_test.jsonl"):
                seen.add(record["id"])
            for record in read_jsonl(fold_dir / "augmentation.jsonl"):
                seen.add(record["id"])
        assert seen == accepted_ids

    def test_edited_text_reaches_fold_output(self, tmp_path):
        from qforge.cli import _build_store, _default_log_path
        from qforge.review import DECISION_EDIT, ITEM_SAMPLE, Verdict

        ws = self._through_images(tmp_path)
        config = self._config(ws)
        store = _build_store(config, _default_log_path(config))
        item = next(
            i for i in store.queue(kind=ITEM_SAMPLE) if i.payload["kind"] == "FixA"
        )
        edited = "what object here is used for the edited purpose?"
        for annotator in ("a1", "a2"):
            store.submit(Verdict(annotator=annotator, item_id=item.item_id,
                                 decision=DECISION_EDIT, new_text=edited))
        assert run(["export", *ws["cli"]]) == 0
        assert run(["build-folds", *ws["cli"]]) == 0
        outdir = Path(ws["outdir"])
        questions = {
            record["id"]: record["question"]
            for fold_dir in (outdir / "folds").glob("fold*")
            for name in ("adversarial_test.jsonl", "augmentation.jsonl")
            for record in read_jsonl(fold_dir / name)
        }
        assert questions[item.item_id] == edited

    def test_verdict_log_survives_stage_rerun(self, tmp_path):
        from qforge.cli import _build_store, _default_log_path
        from qforge.review import DECISION_ACCEPT, ITEM_SAMPLE, Verdict

        ws = self._through_images(tmp_path)
        config = self._config(ws)
        log_path = _default_log_path(config)
        store = _build_store(config, log_path)
        item = store.queue(kind=ITEM_SAMPLE)[0]
        store.submit(Verdict(annotator="a1", item_id=item.item_id, decision=DECISION_ACCEPT))
        before = log_path.read_bytes()
        assert run(["export", *ws["cli"]]) == 0
        assert run(["export", *ws["cli"]]) == 0  # rerun replaces review/ wholesale
        assert log_path.read_bytes() == before

    def test_blocklisted_triplets_excluded_on_regenerate(self, tmp_path):
        from qforge.cli import _build_store, _default_log_path
        from qforge.review import DECISION_FLAG, ITEM_SAMPLE, Verdict

        ws = self._through_images(tmp_path)
        config = self._config(ws)
        store = _build_store(config, _default_log_path(config))
        item = store.queue(kind=ITEM_SAMPLE)[0]
        flagged_triplet = tuple(item.triplet)
        store.submit(Verdict(annotator="a1", item_id=item.item_id, decision=DECISION_FLAG))
        assert run(["export", *ws["cli"]]) == 0
        blocklist_file = Path(ws["outdir"]) / "review" / "blocklist_additions.txt"
        assert "\t".join(flagged_triplet) in blocklist_file.read_text()

        assert run(["generate-variants", *ws["cli"]]) == 0
        regenerated = list(read_jsonl(Path(ws["outdir"]) / "variants" / "samples.jsonl"))
        assert all(tuple(s["triplet"]) != flagged_triplet for s in regenerated)

    def test_review_serve_rejects_missing_static_dir(self, tmp_path):
        ws = self._through_images(tmp_path)
        code = run(["review-serve", *ws["cli"], "--static-dir", tmp_path / "absent"])
        assert code == 1


class TestHelp:
    def test_help_lists_all_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for name in (
            "extract-templates", "generate-variants", "assign-images", "build-folds",
            "augment", "stats", "evaluate", "review-serve", "export",
        ):
            assert name in out
