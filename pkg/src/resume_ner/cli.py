"""Command-line entry point: batch access to every capability plus `serve`.

Exit codes: 0 success, 1 usage error, 2 data/domain error.  Output files are
written to a temp sibling and renamed into place, so failures never leave
partial files behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bootstrap as bs
from .corpus import (
    Dataset,
    InvalidDatasetError,
    Split,
    dataset_to_text,
    read_dataset,
    sections_by_id,
    validate_dataset,
)
from .evaluation import (
    MetricsReport,
    predictions_to_lines,
    read_predictions,
    render_report,
    score,
)
from .fixture import FixtureProfile, generate_fixture
from .splitter import (
    SplitConfig,
    assignment_to_lines,
    read_assignment,
    stratified_split,
)
from .tagger import TrainConfig, load_model, make_example, predict, save_model, train

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(USAGE_EXIT)


def _atomic_write_text(path: Path, content: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _ratios(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated fractions")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios: {raw!r}") from None


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        averaging=not args.no_averaging,
    )


def _add_train_flags(parser) -> None:
    parser.add_argument("--max-epochs", type=int, default=50)
    parser.add_argument("--patience", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-averaging", action="store_true")


def _examples_for_split(dataset: Dataset, assignment, split: Split):
    examples = []
    for doc in dataset.documents:
        if assignment.get(doc.doc_id) is not split:
            continue
        for section in doc.sections:
            example = make_example(section)
            if example[0]:
                examples.append(example)
    return examples


def _open_project(path: str) -> tuple[bs.ProjectStore, bs.Project]:
    directory = Path(path)
    store = bs.ProjectStore(directory.parent)
    return store, store.load(directory.name)


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_fixture(args) -> int:
    profile = FixtureProfile.zero_labels() if args.zero_labels else FixtureProfile.default()
    if args.scale != 1.0:
        profile = profile.scaled(args.scale)
    dataset, assignment = generate_fixture(profile, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "dataset.jsonl", dataset_to_text(dataset))
    _atomic_write_text(
        out / "assignment.jsonl", "".join(line + "\n" for line in assignment_to_lines(assignment))
    )
    total = sum(d.span_count() for d in dataset.documents)
    print(f"wrote {len(dataset.documents)} documents, {total} spans to {out}")
    return 0


def cmd_validate(args) -> int:
    dataset = read_dataset(args.dataset, validate=False)
    violations = validate_dataset(dataset)
    if not violations:
        print(f"{args.dataset}: valid ({len(dataset.documents)} documents)")
        return 0
    for v in violations:
        where = v.section_id or v.doc_id or "-"
        print(f"{v.code}\t{where}\t{v.message}", file=sys.stderr)
    print(f"{args.dataset}: {len(violations)} violation(s)", file=sys.stderr)
    return DATA_EXIT


def cmd_split(args) -> int:
    dataset = read_dataset(args.dataset)
    config = SplitConfig(
        ratios=args.ratios,
        seed=args.seed,
        weight_labels=args.weight_labels,
        weight_fields=args.weight_fields,
        restarts=args.restarts,
    )
    assignment, imbalance = stratified_split(dataset, config)
    _atomic_write_text(
        Path(args.out), "".join(line + "\n" for line in assignment_to_lines(assignment))
    )
    sizes = {s.value: sum(1 for v in assignment.values() if v is s) for s in Split}
    print(f"sizes: {sizes}  imbalance: {imbalance:.6f}")
    return 0


def cmd_train(args) -> int:
    dataset = read_dataset(args.dataset)
    assignment = read_assignment(args.assignment)
    train_set = _examples_for_split(dataset, assignment, Split.TRAIN)
    dev_set = _examples_for_split(dataset, assignment, Split.DEV)
    model, log = train(train_set, dev_set, _train_config(args))
    tmp = Path(args.out).with_name(Path(args.out).name + ".tmp")
    save_model(model, tmp)
    os.replace(tmp, args.out)
    for record in log.records:
        print(
            f"epoch {record.epoch:3d}  train position errors {record.train_position_errors:5d}  "
            f"dev micro F1 {record.dev_f1:6.2f}"
        )
    print(
        f"best epoch {log.best_epoch} (dev micro F1 {log.best_dev_f1:.2f}); "
        f"model written to {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    dataset = read_dataset(args.dataset)
    chosen = None
    if args.split is not None:
        if args.assignment is None:
            raise ValueError("--split requires --assignment")
        assignment = read_assignment(args.assignment)
        split = Split.parse(args.split)
        chosen = {
            s.section_id
            for sid, (doc, s) in sections_by_id(dataset).items()
            if assignment.get(doc.doc_id) is split
        }
    predictions = {}
    for doc in dataset.documents:
        for section in doc.sections:
            if chosen is not None and section.section_id not in chosen:
                continue
            spans = predict(model, section)
            if spans:
                predictions[section.section_id] = spans
    _atomic_write_text(
        Path(args.out), "".join(line + "\n" for line in predictions_to_lines(predictions))
    )
    total = sum(len(v) for v in predictions.values())
    print(f"wrote {total} predicted spans over {len(predictions)} sections to {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = read_dataset(args.gold)
    assignment = read_assignment(args.assignment)
    predictions = read_predictions(args.pred)
    report = score(dataset, assignment, args.split, predictions)
    if args.out:
        _atomic_write_text(Path(args.out), json.dumps(report.to_dict(), indent=2) + "\n")
    if args.format == "structured":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(render_report(report, style=args.style, name=args.name), end="")
    return 0


def cmd_report(args) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    report = MetricsReport.from_dict(data)
    print(render_report(report, style=args.style, name=args.name), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_root)
    # long keep-alive: review clients idle between items
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning", timeout_keep_alive=75)
    return 0


# -- bootstrap stages ---------------------------------------------------------


def cmd_bootstrap_create(args) -> int:
    directory = Path(args.project)
    dataset = read_dataset(args.dataset)
    store = bs.ProjectStore(directory.parent)
    config = bs.ProjectConfig(
        project_id=directory.name,
        seed=args.seed,
        seed_fraction=args.seed_fraction,
        split=SplitConfig(seed=args.seed, restarts=args.restarts),
    )
    project = store.create(dataset, config, actor="cli")
    print(
        f"created project {project.project_id}: {len(dataset.documents)} documents, "
        f"seed subset {len(project.seed_doc_ids)} documents"
    )
    return 0


def cmd_bootstrap_seed_annotate(args) -> int:
    store, project = _open_project(args.project)
    store.seed_annotate(project, actor="cli")
    done, total = project.progress(1)
    print(f"state {project.state.value}; pass 1 queue {total} sections")
    return 0


def cmd_bootstrap_review(args) -> int:
    store, project = _open_project(args.project)
    pass_no = project._active_pass()  # noqa: SLF001 - CLI is a trusted caller
    override = None
    if args.spans:
        override = read_predictions(args.spans)
    gold = None
    if args.from_gold:
        gold = {sid: sec.spans for sid, (_, sec) in sections_by_id(project.dataset).items()}
    submitted = 0
    while (item := project.next_pending(pass_no)) is not None:
        if args.limit is not None and submitted >= args.limit:
            break
        if override is not None:
            spans = override.get(item.section_id, [])
        elif gold is not None:
            spans = gold[item.section_id]
        else:
            spans = item.proposals
        store.submit_review(
            project, item.section_id, spans, expected_revision=item.revision, actor="cli"
        )
        submitted += 1
    done, total = project.progress(pass_no)
    print(f"submitted {submitted} reviews; pass {pass_no} progress {done}/{total}; state {project.state.value}")
    return 0


def cmd_bootstrap_train(args) -> int:
    store, project = _open_project(args.project)
    store.train(project, _train_config(args), actor="cli")
    summary = project.last_train_summary
    print(
        f"state {project.state.value}; dev micro F1 {summary['dev_f1']:.2f} "
        f"(best epoch {summary['best_epoch']}, {summary['epochs_run']} epochs)"
    )
    return 0


def cmd_bootstrap_model_annotate(args) -> int:
    store, project = _open_project(args.project)
    store.model_annotate(project, actor="cli")
    done, total = project.progress(2)
    print(f"state {project.state.value}; pass 2 queue {total} sections")
    return 0


def cmd_bootstrap_finalize(args) -> int:
    store, project = _open_project(args.project)
    export, stats = store.finalize(project, actor="cli")
    if args.out:
        _atomic_write_text(Path(args.out), dataset_to_text(export))
        print(f"exported gold dataset to {args.out}")
    print(json.dumps(stats, indent=2))
    return 0


def cmd_bootstrap_status(args) -> int:
    _, project = _open_project(args.project)
    print(json.dumps(project.view(), indent=2))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="resume-ner", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="generate a synthetic corpus with pinned marginals")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-labels", action="store_true", help="documents only, no spans")
    p.add_argument("--scale", type=float, default=1.0, help="scale all marginals (e.g. 0.05 for a small corpus)")
    p.set_defaults(handler=cmd_fixture)

    p = sub.add_parser("validate", help="check dataset invariants")
    p.add_argument("dataset")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("split", help="person-level stratified split")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", type=_ratios, default=(0.70, 0.15, 0.15))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-labels", type=float, default=1.0)
    p.add_argument("--weight-fields", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=16)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train", help="train the tagger on TRAIN, early-stop on DEV")
    p.add_argument("dataset")
    p.add_argument("assignment")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="tag sections with a trained model")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--assignment")
    p.add_argument("--split")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("eval", help="entity-level scores for a predictions file")
    p.add_argument("--gold", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--split", default="TEST")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--style", choices=("per-type", "model-comparison"), default="per-type")
    p.add_argument("--name", default="model")
    p.add_argument("--out", help="also write the structured report here")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("report", help="render a stored structured report")
    p.add_argument("report")
    p.add_argument("--style", choices=("per-type", "model-comparison"), default="per-type")
    p.add_argument("--name", default="model")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("bootstrap", help="drive the four-stage annotation loop")
    stages = p.add_subparsers(dest="stage", required=True)

    s = stages.add_parser("create")
    s.add_argument("--project", required=True, help="project directory (created)")
    s.add_argument("--dataset", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seed-fraction", type=float, default=0.2)
    s.add_argument("--restarts", type=int, default=16)
    s.set_defaults(handler=cmd_bootstrap_create)

    s = stages.add_parser("seed-annotate")
    s.add_argument("--project", required=True)
    s.set_defaults(handler=cmd_bootstrap_seed_annotate)

    s = stages.add_parser("review")
    s.add_argument("--project", required=True)
    group = s.add_mutually_exclusive_group()
    group.add_argument("--accept-proposals", action="store_true", help="accept queue proposals as-is (default)")
    group.add_argument("--from-gold", action="store_true", help="submit the dataset's own spans (perfect reviewer)")
    group.add_argument("--spans", help="predictions-format file with the reviewed spans")
    s.add_argument("--limit", type=int, help="review at most N sections")
    s.set_defaults(handler=cmd_bootstrap_review)

    s = stages.add_parser("train")
    s.add_argument("--project", required=True)
    _add_train_flags(s)
    s.set_defaults(handler=cmd_bootstrap_train)

    s = stages.add_parser("model-annotate")
    s.add_argument("--project", required=True)
    s.set_defaults(handler=cmd_bootstrap_model_annotate)

    s = stages.add_parser("finalize")
    s.add_argument("--project", required=True)
    s.add_argument("--out", help="write the gold export here")
    s.set_defaults(handler=cmd_bootstrap_finalize)

    s = stages.add_parser("status")
    s.add_argument("--project", required=True)
    s.set_defaults(handler=cmd_bootstrap_status)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--data-root", default=None, help="project store root (or $RESUME_NER_DATA_ROOT)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8234)
    p.set_defaults(handler=cmd_serve)

    return parser


_DOMAIN_ERRORS = (
    InvalidDatasetError,
    bs.StateViolationError,
    bs.VersionConflictError,
    bs.ReviewNotFoundError,
    bs.InvalidSpansError,
    ValueError,
    FileNotFoundError,
    FileExistsError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 0
    except _DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
