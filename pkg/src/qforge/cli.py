"""Staged command line pipeline.

Each stage reads its inputs, writes artifacts plus a manifest under
<outdir>/<stage>/ via an atomic temp-dir rename, and can be rerun
individually. Manifests record the config hash, input hashes, counts, and a
fixed stage ordinal, so two runs with identical config and inputs produce
byte-identical trees.

Exit codes: 0 success, 1 validation, 2 missing prerequisite, 3 runtime.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import traceback
from collections import Counter
from pathlib import Path

from .config import PipelineConfig, load_config
from .corpus import CorpusError, QaSample, load_corpus
from .evaluate import GoldEntry, evaluate, load_predictions
from .folds import (
    ConfigValueError,
    FoldError,
    apply_augmentation,
    build_bundle,
    check_fold_coverage,
    check_leakage,
    compute_stats,
    load_folds,
    DatasetBundle,
    FoldSets,
    SET_NAMES,
)
from .images import ImageCatalog, assign_all
from .kg import KgParseError, load_blocklist, load_kg
from .review import ReviewStore
from .runio import StageWriter, read_json, read_jsonl, sha256_file, write_json, write_jsonl
from .templates import (
    AmbiguousSpanError,
    QuestionTemplate,
    TemplateExtractionError,
    TRANSFERABLE_OK,
    dedupe_templates,
    extract_template,
    flag_non_transferable,
)
from .variants import AdversarialSample, STATUS_NEEDS_REVIEW, generate_all

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PREREQUISITE = 2
EXIT_RUNTIME = 3

# Fixed ordinals keep manifest chains monotone without wall-clock stamps,
# which would break byte-identical reruns.
STAGE_ORDER = {
    "templates": 1,
    "variants": 2,
    "images": 3,
    "review": 4,
    "folds": 5,
    "augment": 6,
    "stats": 7,
    "eval": 8,
}


class PrerequisiteError(Exception):
    pass


def _stage_dir(config: PipelineConfig, stage: str) -> Path:
    return Path(config.outdir) / stage


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise PrerequisiteError(f"missing {path}; run `qforge {produced_by}` first")
    return path


def _read_manifest(config: PipelineConfig, stage: str, produced_by: str) -> dict:
    return read_json(_require(_stage_dir(config, stage) / "manifest.json", produced_by))


def _hash_inputs(**paths) -> dict:
    hashed = {}
    for name, path in sorted(paths.items()):
        if path is None:
            continue
        hashed[name] = {"path": str(path), "sha256": sha256_file(path)}
    return hashed


def _manifest(config: PipelineConfig, stage: str, inputs: dict, counts: dict) -> dict:
    return {
        "stage_seq": STAGE_ORDER[stage],
        "config_hash": config.config_hash(),
        "config": config.to_jsonable(),
        "seed": config.seed,
        "inputs": inputs,
        "counts": counts,
    }


def _merged_blocklist(config: PipelineConfig) -> set[tuple[str, str, str]]:
    """Configured blocklist plus any triplets flagged during review."""
    blocked: set[tuple[str, str, str]] = set()
    if config.blocklist:
        blocked |= load_blocklist(config.blocklist)
    review = _review_state(config)
    blocked |= review["blocklist"]
    return blocked


def _review_state(config: PipelineConfig) -> dict:
    """Decisions from a prior `qforge export`, if one has run."""
    path = _stage_dir(config, "review") / "export.json"
    state = {"present": False, "final_text": {}, "blocklist": set(), "path": path}
    if not path.exists():
        return state
    data = read_json(path)
    for record in data["accepted_templates"] + data["accepted_samples"]:
        state["final_text"][record["item_id"]] = record["question"]
    state["blocklist"] = {tuple(key) for key in data["blocklist_additions"]}
    state["present"] = True
    return state


def _load_templates(config: PipelineConfig) -> list[QuestionTemplate]:
    path = _require(_stage_dir(config, "templates") / "templates.jsonl", "extract-templates")
    return [QuestionTemplate.from_record(r) for r in read_jsonl(path)]


def _load_assigned_samples(config: PipelineConfig) -> list[AdversarialSample]:
    path = _require(_stage_dir(config, "images") / "samples.jsonl", "assign-images")
    return [AdversarialSample.from_record(r) for r in read_jsonl(path)]


def _verified_samples(config: PipelineConfig) -> tuple[list[AdversarialSample], str]:
    """Samples cleared for dataset building.

    When a review export exists it is authoritative: only accepted samples
    pass, with their final (possibly edited) text. Without one, samples that
    did not ask for review are taken as-is.
    """
    assigned = _load_assigned_samples(config)
    review = _review_state(config)
    if review["present"]:
        verified = []
        for sample in assigned:
            if sample.id in review["final_text"]:
                sample.question_text = review["final_text"][sample.id]
                sample.review_status = "accepted"
                verified.append(sample)
        return verified, "review-export"
    return [s for s in assigned if s.review_status != STATUS_NEEDS_REVIEW], "auto-accept"


# -- stages -------------------------------------------------------------------


def cmd_extract_templates(config: PipelineConfig, args) -> int:
    config.validate(required_paths=("kg", "corpus"))
    index = load_kg(config.kg, config.relations, config.blocklist)
    samples, skipped = load_corpus(config.corpus, index)

    templates: list[QuestionTemplate] = []
    failures: list[dict] = list(skipped)
    flagged = inverted = 0
    for sample in samples:
        try:
            template = extract_template(sample, index)
        except AmbiguousSpanError as exc:
            failures.append({"id": sample.id, "reason": exc.reason, "review": True})
            continue
        except TemplateExtractionError as exc:
            failures.append({"id": sample.id, "reason": exc.reason, "review": True})
            continue
        if template is None:
            failures.append({"id": sample.id, "reason": "no-entity-span"})
            continue
        template = flag_non_transferable(template)
        flagged += template.transferable != TRANSFERABLE_OK
        inverted += template.inverted
        templates.append(template)

    deduped = dedupe_templates(templates, config.dedupe_threshold)
    kept_ids = {t.id for t in deduped}
    dropped_ids = sorted(t.id for t in templates if t.id not in kept_ids)

    writer = StageWriter(config.outdir, "templates")
    try:
        write_jsonl(writer.path("templates.jsonl"), (t.to_record() for t in deduped))
        write_jsonl(writer.path("skipped.jsonl"), failures)
        counts = {
            "corpus_samples": len(samples) + len(skipped),
            "corpus_skipped": len(skipped),
            "extraction_failed": len(failures) - len(skipped),
            "templates_extracted": len(templates),
            "templates_after_dedupe": len(deduped),
            "dedupe_dropped": len(dropped_ids),
            "flagged": flagged,
            "inverted": inverted,
        }
        manifest = _manifest(
            config,
            "templates",
            _hash_inputs(kg=config.kg, corpus=config.corpus, blocklist=config.blocklist),
            counts,
        )
        manifest["dedupe_dropped_ids"] = dropped_ids
        writer.commit(manifest)
    except BaseException:
        writer.abort()
        raise
    print(
        f"extract-templates: {len(deduped)} templates "
        f"({flagged} flagged, {len(templates) - len(deduped)} near-duplicates dropped), "
        f"{len(failures)} corpus samples skipped -> {writer.final_dir}"
    )
    return EXIT_OK


def cmd_generate_variants(config: PipelineConfig, args) -> int:
    config.validate(required_paths=("kg",))
    templates_manifest = _read_manifest(config, "templates", "extract-templates")
    templates = _load_templates(config)
    review = _review_state(config)
    index = load_kg(config.kg, config.relations, _merged_blocklist(config))

    usable: list[QuestionTemplate] = []
    excluded_flagged = excluded_blocked = 0
    for template in templates:
        if template.source_triplet in review["blocklist"]:
            excluded_blocked += 1
            continue
        if template.transferable == TRANSFERABLE_OK:
            usable.append(template)
        elif template.id in review["final_text"]:
            template.text = review["final_text"][template.id]
            template.review_status = "accepted"
            usable.append(template)
        else:
            excluded_flagged += 1

    samples = generate_all(
        usable,
        index,
        fix_a_cap=config.fix_a_cap,
        fix_q_cap=config.fix_q_cap,
        selection=config.selection,
        seed=config.seed,
    )
    by_kind = Counter(s.kind for s in samples)
    needs_review = sum(s.review_status == STATUS_NEEDS_REVIEW for s in samples)

    writer = StageWriter(config.outdir, "variants")
    try:
        write_jsonl(writer.path("samples.jsonl"), (s.to_record() for s in samples))
        counts = {
            "templates_used": len(usable),
            "templates_excluded_flagged": excluded_flagged,
            "templates_excluded_blocklisted": excluded_blocked,
            "samples_total": len(samples),
            "needs_review": needs_review,
            **{f"kind_{kind}": n for kind, n in sorted(by_kind.items())},
        }
        inputs = _hash_inputs(
            kg=config.kg,
            templates_manifest=_stage_dir(config, "templates") / "manifest.json",
            review_export=review["path"] if review["present"] else None,
        )
        manifest = _manifest(config, "variants", inputs, counts)
        manifest["upstream_config_hash"] = templates_manifest["config_hash"]
        writer.commit(manifest)
    except BaseException:
        writer.abort()
        raise
    print(
        f"generate-variants: {len(samples)} samples "
        f"({by_kind.get('FixA', 0)} FixA, {by_kind.get('FixQ', 0)} FixQ, "
        f"{needs_review} needing review) from {len(usable)} templates -> {writer.final_dir}"
    )
    return EXIT_OK


def cmd_assign_images(config: PipelineConfig, args) -> int:
    config.validate(required_paths=("catalog",))
    _read_manifest(config, "variants", "generate-variants")
    samples_path = _require(_stage_dir(config, "variants") / "samples.jsonl", "generate-variants")
    samples = [AdversarialSample.from_record(r) for r in read_jsonl(samples_path)]
    catalog = ImageCatalog.load(config.catalog)

    ledger, report = assign_all(samples, catalog)
    assigned = [s for s in samples if s.image_id is not None]
    dropped = [s for s in samples if s.image_id is None]

    writer = StageWriter(config.outdir, "images")
    try:
        write_jsonl(writer.path("samples.jsonl"), (s.to_record() for s in assigned))
        write_jsonl(
            writer.path("dropped.jsonl"),
            ({"id": s.id, "reason": "no-image", "triplet": list(s.triplet)} for s in dropped),
        )
        write_json(writer.path("assignment.json"), report)
        used = [n for n in ledger.counts.values() if n > 0]
        counts = {
            "assigned": report["assigned"],
            "dropped": sum(report["dropped"].values()),
            "catalog_images": len(catalog.objects),
            "images_used": len(used),
            "max_per_image": max(used, default=0),
            "min_per_used_image": min(used, default=0),
        }
        inputs = _hash_inputs(
            catalog=config.catalog,
            variants_manifest=_stage_dir(config, "variants") / "manifest.json",
        )
        writer.commit(_manifest(config, "images", inputs, counts))
    except BaseException:
        writer.abort()
        raise
    print(
        f"assign-images: {counts['assigned']} assigned over {counts['images_used']} images "
        f"(spread {counts['max_per_image']}-{counts['min_per_used_image']}), "
        f"{counts['dropped']} dropped -> {writer.final_dir}"
    )
    return EXIT_OK


def cmd_build_folds(config: PipelineConfig, args) -> int:
    config.validate(required_paths=("kg", "corpus", "folds"))
    _read_manifest(config, "images", "assign-images")
    index = load_kg(config.kg, config.relations, config.blocklist)
    corpus_samples, _ = load_corpus(config.corpus, index)
    folds = load_folds(config.folds)
    check_fold_coverage(folds, corpus_samples)
    templates = _load_templates(config)
    verified, verification_source = _verified_samples(config)

    bundle = build_bundle(corpus_samples, folds, verified, templates)
    leaks = check_leakage(bundle)
    if leaks:
        raise RuntimeError("leakage check failed: " + "; ".join(leaks))

    writer = StageWriter(config.outdir, "folds")
    try:
        per_fold = []
        for fold_sets in bundle.folds:
            base = f"fold{fold_sets.fold_index}"
            write_jsonl(
                writer.path(f"{base}/standard_train.jsonl"),
                (s.to_record() for s in fold_sets.standard_train),
            )
            write_jsonl(
                writer.path(f"{base}/standard_test.jsonl"),
                (s.to_record() for s in fold_sets.standard_test),
            )
            write_jsonl(
                writer.path(f"{base}/originating.jsonl"),
                (s.to_record() for s in fold_sets.originating),
            )
            write_jsonl(
                writer.path(f"{base}/adversarial_test.jsonl"),
                (s.to_record() for s in fold_sets.adversarial_test),
            )
            write_jsonl(
                writer.path(f"{base}/augmentation.jsonl"),
                (s.to_record() for s in fold_sets.augmentation),
            )
            per_fold.append(fold_sets.counts())
        write_json(writer.path("counts.json"), per_fold)
        counts = {
            "folds": len(bundle.folds),
            "verified_samples": len(verified),
            "leakage_violations": 0,
        }
        inputs = _hash_inputs(
            kg=config.kg,
            corpus=config.corpus,
            folds=config.folds,
            images_manifest=_stage_dir(config, "images") / "manifest.json",
            templates_manifest=_stage_dir(config, "templates") / "manifest.json",
        )
        manifest = _manifest(config, "folds", inputs, counts)
        manifest["per_fold_counts"] = per_fold
        manifest["verification_source"] = verification_source
        writer.commit(manifest)
    except BaseException:
        writer.abort()
        raise
    sizes = ", ".join(
        f"fold{f.fold_index}: {len(f.adversarial_test)} adv-test/{len(f.augmentation)} aug"
        for f in bundle.folds
    )
    print(
        f"build-folds: {len(bundle.folds)} folds from {len(verified)} verified samples "
        f"({verification_source}); {sizes} -> {writer.final_dir}"
    )
    return EXIT_OK


def _load_bundle(config: PipelineConfig) -> DatasetBundle:
    folds_dir = _stage_dir(config, "folds")
    _require(folds_dir / "manifest.json", "build-folds")
    bundle = DatasetBundle()
    fold_dirs = [d for d in folds_dir.glob("fold*") if d.is_dir()]
    for fold_dir in sorted(fold_dirs, key=lambda d: int(d.name.removeprefix("fold"))):
        index = int(fold_dir.name.removeprefix("fold"))
        bundle.folds.append(
            FoldSets(
                fold_index=index,
                standard_train=[QaSample.from_record(r) for r in read_jsonl(fold_dir / "standard_train.jsonl")],
                standard_test=[QaSample.from_record(r) for r in read_jsonl(fold_dir / "standard_test.jsonl")],
                originating=[QaSample.from_record(r) for r in read_jsonl(fold_dir / "originating.jsonl")],
                adversarial_test=[
                    AdversarialSample.from_record(r)
                    for r in read_jsonl(fold_dir / "adversarial_test.jsonl")
                ],
                augmentation=[
                    AdversarialSample.from_record(r)
                    for r in read_jsonl(fold_dir / "augmentation.jsonl")
                ],
            )
        )
    if not bundle.folds:
        raise PrerequisiteError(f"no fold directories under {folds_dir}; run `qforge build-folds` first")
    return bundle


def _full_corpus(bundle: DatasetBundle) -> list[QaSample]:
    # Any single fold's train+test partition covers the whole corpus.
    first = bundle.folds[0]
    return first.standard_train + first.standard_test


def cmd_augment(config: PipelineConfig, args) -> int:
    config.validate()
    bundle = _load_bundle(config)
    wanted = [f for f in bundle.folds if args.fold is None or f.fold_index == args.fold]
    if not wanted:
        raise ConfigValueError(f"fold {args.fold} not present in build-folds output")

    writer = StageWriter(config.outdir, "augment")
    try:
        counts: dict[str, int] = {"folds": len(wanted), "frozen": int(bool(args.freeze))}
        for fold_sets in wanted:
            base = f"fold{fold_sets.fold_index}"
            variants_by_origin: dict[str, list[str]] = {}
            for sample in fold_sets.augmentation:
                variants_by_origin.setdefault(sample.originating_sample_id, []).append(sample.id)
            plan = (
                {
                    "id": train.id,
                    "variants": sorted(variants_by_origin[train.id]),
                    "replace_prob": config.replace_prob,
                }
                for train in fold_sets.standard_train
                if train.id in variants_by_origin
            )
            counts[f"fold{fold_sets.fold_index}_planned"] = write_jsonl(
                writer.path(f"{base}/plan.jsonl"), plan
            )
            if args.freeze:
                replaced = 0
                emitted = []
                for item in apply_augmentation(
                    fold_sets.standard_train,
                    fold_sets.augmentation,
                    seed=config.seed,
                    replace_prob=config.replace_prob,
                ):
                    record = item.to_record()
                    record["replaced"] = isinstance(item, AdversarialSample)
                    replaced += record["replaced"]
                    emitted.append(record)
                write_jsonl(writer.path(f"{base}/train.jsonl"), emitted)
                counts[f"fold{fold_sets.fold_index}_replaced"] = replaced
                counts[f"fold{fold_sets.fold_index}_emitted"] = len(emitted)
        inputs = _hash_inputs(folds_manifest=_stage_dir(config, "folds") / "manifest.json")
        writer.commit(_manifest(config, "augment", inputs, counts))
    except BaseException:
        writer.abort()
        raise
    mode = "materialized train sets" if args.freeze else "replacement plans"
    print(f"augment: {mode} for {len(wanted)} folds -> {writer.final_dir}")
    return EXIT_OK


def cmd_stats(config: PipelineConfig, args) -> int:
    config.validate()
    bundle = _load_bundle(config)
    corpus = _full_corpus(bundle)
    stats = compute_stats(bundle, corpus)

    from . import figures

    writer = StageWriter(config.outdir, "stats")
    try:
        write_json(writer.path("stats.json"), stats.to_jsonable())
        rows = ["fold\tset\tcount"]
        for fold_sets, counts in zip(bundle.folds, stats.per_fold_counts):
            for name in SET_NAMES:
                if name in counts:
                    rows.append(f"{fold_sets.fold_index}\t{name}\t{counts[name]}")
        writer.path("stats.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        writer.path("table.txt").write_text(stats.format_table() + "\n", encoding="utf-8")
        figures.plot_set_counts(stats, writer.path("set_counts.png"))
        figures.plot_answer_histogram(stats.answer_histogram, writer.path("answer_histogram.png"))
        counts = {
            "folds": len(bundle.folds),
            "distinct_answers": stats.answers_total,
            "answers_below_three": stats.answers_below_three,
        }
        inputs = _hash_inputs(folds_manifest=_stage_dir(config, "folds") / "manifest.json")
        writer.commit(_manifest(config, "stats", inputs, counts))
    except BaseException:
        writer.abort()
        raise
    print(stats.format_table())
    print(f"stats: tables and figures -> {writer.final_dir}")
    return EXIT_OK


def cmd_evaluate(config: PipelineConfig, args) -> int:
    config.validate()
    if not args.predictions:
        raise ConfigValueError("--predictions is required for evaluate")
    predictions_path = Path(args.predictions)
    if not predictions_path.exists():
        raise ConfigValueError(f"predictions file does not exist: {predictions_path}")
    bundle = _load_bundle(config)
    predictions = load_predictions(predictions_path)

    gold: list[GoldEntry] = []
    for fold_sets in bundle.folds:
        if args.set == "adversarial_test":
            for s in fold_sets.adversarial_test:
                gold.append(
                    GoldEntry(
                        sample_id=s.id,
                        answers=tuple(s.answer_nodes),
                        kind=s.kind,
                        fold=fold_sets.fold_index,
                    )
                )
        else:
            for qa in getattr(fold_sets, args.set):
                gold.append(
                    GoldEntry(
                        sample_id=qa.id,
                        answers=(qa.answer_node,),
                        kind=None,
                        fold=fold_sets.fold_index,
                    )
                )
    occurrences = Counter(qa.answer_node for qa in _full_corpus(bundle))
    report = evaluate(predictions, gold, occurrences, config.bucket_edges)

    from . import figures

    writer = StageWriter(config.outdir, "eval")
    try:
        write_json(writer.path("report.json"), report.to_jsonable())
        rows = ["group\tname\tcorrect\ttotal\taccuracy"]
        rows.append(f"overall\toverall\t{report.correct}\t{report.total}\t{report.accuracy:.6f}")
        for fold, (c, t) in sorted(report.per_fold.items()):
            rows.append(f"fold\t{fold}\t{c}\t{t}\t{c / t if t else 0:.6f}")
        for kind, (c, t) in sorted(report.per_kind.items()):
            rows.append(f"kind\t{kind}\t{c}\t{t}\t{c / t if t else 0:.6f}")
        for bucket in report.buckets:
            acc = bucket.accuracy if bucket.total else 0
            rows.append(f"bucket\t{bucket.label}\t{bucket.correct}\t{bucket.total}\t{acc:.6f}")
        writer.path("report.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        writer.path("table.txt").write_text(report.format_table() + "\n", encoding="utf-8")
        if report.per_kind:
            figures.plot_kind_accuracy(report, writer.path("kind_accuracy.png"))
        if report.buckets:
            figures.plot_bucket_accuracy(report.buckets, writer.path("bucket_accuracy.png"))
        mean, std = report.fold_mean_std()
        counts = {
            "gold": report.total,
            "correct": report.correct,
            "predictions": len(predictions),
        }
        inputs = _hash_inputs(
            predictions=predictions_path,
            folds_manifest=_stage_dir(config, "folds") / "manifest.json",
        )
        manifest = _manifest(config, "eval", inputs, counts)
        manifest["accuracy"] = report.accuracy
        manifest["fold_mean"] = mean
        manifest["fold_std"] = std
        manifest["gold_set"] = args.set
        writer.commit(manifest)
    except BaseException:
        writer.abort()
        raise
    print(report.format_table())
    print(f"evaluate: {args.set} -> {writer.final_dir}")
    return EXIT_OK


def _build_store(config: PipelineConfig, log_path: Path) -> ReviewStore:
    templates = _load_templates(config)
    samples = _load_assigned_samples(config)
    store = ReviewStore(log_path, annotators=config.annotators)
    store.add_templates(templates)
    store.add_samples(
        samples,
        originating_questions={t.id: t.originating_question() for t in templates},
    )
    store.replay()
    return store


def _default_log_path(config: PipelineConfig) -> Path:
    # Lives outside any stage directory: stages are replaced wholesale on
    # rerun and the verdict log must survive that.
    return Path(config.outdir) / "verdicts.jsonl"


def cmd_review_serve(config: PipelineConfig, args) -> int:
    config.validate()
    log_path = Path(args.log) if args.log else _default_log_path(config)
    store = _build_store(config, log_path)
    static_dir = Path(args.static_dir) if args.static_dir else None
    if static_dir is not None and not static_dir.is_dir():
        raise ConfigValueError(f"static dir does not exist: {static_dir}")

    from .review import create_app

    app = create_app(store, static_dir=static_dir)
    import uvicorn

    print(
        f"review-serve: {len(store.items)} items, log {log_path}, "
        f"annotators {', '.join(config.annotators)} on http://{args.host}:{args.port}"
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_export(config: PipelineConfig, args) -> int:
    config.validate()
    log_path = Path(args.log) if args.log else _default_log_path(config)
    store = _build_store(config, log_path)
    exported = store.export_resolved()

    writer = StageWriter(config.outdir, "review")
    try:
        write_json(writer.path("export.json"), exported)
        write_jsonl(writer.path("accepted_samples.jsonl"), exported["accepted_samples"])
        write_jsonl(writer.path("accepted_templates.jsonl"), exported["accepted_templates"])
        writer.path("blocklist_additions.txt").write_text(
            "".join("\t".join(key) + "\n" for key in exported["blocklist_additions"]),
            encoding="utf-8",
        )
        write_json(writer.path("funnel.json"), exported["funnel"])
        inputs = _hash_inputs(
            verdict_log=log_path if log_path.exists() else None,
            images_manifest=_stage_dir(config, "images") / "manifest.json",
        )
        writer.commit(_manifest(config, "review", inputs, dict(exported["funnel"])))
    except BaseException:
        writer.abort()
        raise
    funnel = exported["funnel"]
    rate = funnel["acceptance_rate"]
    rate_text = f"rate {rate:.3f}" if rate is not None else "nothing registered"
    print(
        f"export: {funnel['accepted']}/{funnel['generated']} accepted ({rate_text}), "
        f"{len(exported['blocklist_additions'])} blocklist additions -> {writer.final_dir}"
    )
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures (exit 1, not argparse's 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _comma_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _comma_ints(value: str) -> tuple[int, ...]:
    return tuple(int(part) for part in value.split(",") if part.strip())


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--kg", help="knowledge graph TSV")
    parser.add_argument("--corpus", help="QA corpus JSONL")
    parser.add_argument("--catalog", help="image catalog JSON")
    parser.add_argument("--folds", help="fold definition JSON")
    parser.add_argument("--blocklist", help="blocked triplet TSV")
    parser.add_argument("--outdir", help="artifact output directory (default: out)")
    parser.add_argument("--whitelist", type=_comma_list, help="comma-separated relation whitelist")
    parser.add_argument("--fix-a-cap", type=int, dest="fix_a_cap")
    parser.add_argument("--fix-q-cap", type=int, dest="fix_q_cap")
    parser.add_argument("--dedupe-threshold", type=float, dest="dedupe_threshold")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replace-prob", type=float, dest="replace_prob")
    parser.add_argument("--bucket-edges", type=_comma_ints, dest="bucket_edges")
    parser.add_argument("--selection", choices=("truncate", "random"))
    parser.add_argument("--annotators", type=_comma_list)
    parser.add_argument("--image-base-url", dest="image_base_url")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="stage", required=True, parser_class=_Parser)

    stages = {
        "extract-templates": (cmd_extract_templates, "mine slot templates from the corpus"),
        "generate-variants": (cmd_generate_variants, "expand templates into FixA/FixQ samples"),
        "assign-images": (cmd_assign_images, "pick a balanced image per sample"),
        "build-folds": (cmd_build_folds, "derive leakage-safe per-fold sets"),
        "augment": (cmd_augment, "emit training streams with variant replacement"),
        "stats": (cmd_stats, "dataset statistics tables and figures"),
        "evaluate": (cmd_evaluate, "score a prediction file against a gold set"),
        "review-serve": (cmd_review_serve, "run the two-annotator review service"),
        "export": (cmd_export, "write accepted items, funnel, blocklist additions"),
    }
    for name, (func, help_text) in stages.items():
        sp = sub.add_parser(name, help=help_text)
        _add_config_flags(sp)
        sp.set_defaults(func=func)

    augment = sub.choices["augment"]
    augment.add_argument("--freeze", action="store_true", help="materialize one seeded draw")
    augment.add_argument("--fold", type=int, help="limit to one fold index")

    ev = sub.choices["evaluate"]
    ev.add_argument("--predictions", help="JSONL of {sample_id, answer}")
    ev.add_argument(
        "--set",
        choices=("adversarial_test", "standard_test", "originating"),
        default="adversarial_test",
        help="gold set to score against (default: adversarial_test)",
    )

    serve = sub.choices["review-serve"]
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--static-dir", dest="static_dir", help="UI bundle to serve at /")
    serve.add_argument("--log", help="verdict log path (default: <outdir>/verdicts.jsonl)")

    sub.choices["export"].add_argument(
        "--log", help="verdict log path (default: <outdir>/verdicts.jsonl)"
    )
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    field_names = {f.name for f in dataclasses.fields(PipelineConfig)}
    overrides = {
        name: getattr(args, name) for name in field_names if getattr(args, name, None) is not None
    }
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        return args.func(config, args)
    except (ConfigValueError, KgParseError, CorpusError, FoldError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PrerequisiteError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return EXIT_PREREQUISITE
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
