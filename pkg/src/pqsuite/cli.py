"""Command-line surface: evaluate, convert, visualize, synth, selftest.

Exit codes: 0 success, 1 evaluation/conversion/self-test failure, 2 usage
error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
from PIL import Image

from . import panoptic_io, pqmetrics, synth
from .errors import PqSuiteError
from .oracle import oracle_metrics
from .pqmetrics import ALL_METRICS, MetricConfig, MetricReport
from .segmap import validate

_METRIC_COLUMNS = (("pq", "PQ"), ("mpq_plus", "mPQ+"), ("bpq", "bPQ"),
                   ("ipq", "iPQ"), ("wpq", "wPQ"), ("fwpq", "fwPQ"), ("r2", "R2"))

ORACLE_TOLERANCE = 1e-12


@click.group()
def main() -> None:
    """Panoptic quality evaluation toolkit."""


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    return f"{100.0 * value:7.2f}"


def _print_table(report: MetricReport) -> None:
    headers = [label for key, label in _METRIC_COLUMNS if key in report.aggregate]
    values = [_fmt(report.aggregate[key]) for key, _ in _METRIC_COLUMNS
              if key in report.aggregate]
    widths = [max(len(h), 7) for h in headers]
    click.echo("  ".join(h.rjust(w) for h, w in zip(headers, widths)))
    click.echo("  ".join(v.rjust(w) for v, w in zip(values, widths)))
    if report.warnings:
        click.echo(f"({len(report.warnings)} warning(s); see report)")


def _parse_metrics(value: str) -> tuple[str, ...]:
    names = tuple(m.strip().lower() for m in value.split(",") if m.strip())
    alias = {"mpq_plus": "mpq+", "mpq": "mpq+"}
    names = tuple(alias.get(m, m) for m in names)
    unknown = set(names) - set(ALL_METRICS)
    if unknown:
        raise click.UsageError(f"unknown metrics: {sorted(unknown)}; "
                               f"valid: {', '.join(ALL_METRICS)}")
    return names


def _denominator(value: str) -> str:
    return {"kirillov": "kirillov", "eq1": "eq1-literal",
            "eq1-literal": "eq1-literal"}[value]


def _aggregate(value: str) -> str:
    return {"class": "macro-class", "image": "macro-image"}[value]


@main.command()
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="Ground-truth manifest JSON.")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True),
              help="Prediction manifest JSON.")
@click.option("--gt-dir", type=click.Path(), default=None,
              help="Ground-truth PNG directory (default: <manifest stem>/).")
@click.option("--pred-dir", type=click.Path(), default=None,
              help="Prediction PNG directory.")
@click.option("--metrics", default=",".join(ALL_METRICS), show_default=True,
              help="Comma-separated subset of pq,mpq+,bpq,ipq,wpq,fwpq,r2.")
@click.option("--bpq-d", default=0.02, show_default=True,
              help="Contour fraction of the image diagonal for bPQ.")
@click.option("--wpq-a", default=10.0, show_default=True,
              help="Boundary importance factor for wPQ.")
@click.option("--wpq-d", default=0.02, show_default=True,
              help="Band fraction for wPQ weight maps.")
@click.option("--bpq-mode", type=click.Choice(["boundary", "min"]),
              default="boundary", show_default=True)
@click.option("--fwpq-basis", type=click.Choice(["pixels", "instances"]),
              default="pixels", show_default=True,
              help="Class-frequency basis for fwPQ.")
@click.option("--denominator", type=click.Choice(["kirillov", "eq1", "eq1-literal"]),
              default="kirillov", show_default=True)
@click.option("--aggregate", type=click.Choice(["class", "image"]),
              default="class", show_default=True)
@click.option("--all-aggregates", is_flag=True,
              help="Report both aggregation conventions side by side.")
@click.option("--match-threshold", default=0.5, show_default=True)
@click.option("--void-threshold", default=0.5, show_default=True)
@click.option("--subtract-void", is_flag=True,
              help="Remove void overlap from the union in the matching IoU.")
@click.option("--score-background", is_flag=True,
              help="Promote instance-free pixels to a scored class.")
@click.option("--format", "out_format", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Report output path.")
@click.option("--jobs", type=int, default=None,
              help="Worker processes (default: PQSUITE_JOBS or core count).")
@click.option("--strict/--lenient", default=True, show_default=True,
              help="Fail on image-set mismatches vs. evaluate the intersection.")
@click.option("--verify-oracle", is_flag=True,
              help="Cross-check the report against the brute-force oracle.")
@click.option("--no-timestamp", is_flag=True, help="Omit the timestamp field.")
@click.option("--dump-matches", type=click.Path(), default=None,
              help="Write per-image match detail JSON files to this directory.")
def evaluate(gt_path, pred_path, gt_dir, pred_dir, metrics, bpq_d, wpq_a, wpq_d,
             bpq_mode, fwpq_basis, denominator, aggregate, all_aggregates,
             match_threshold, void_threshold, subtract_void, score_background,
             out_format, out, jobs, strict, verify_oracle, no_timestamp,
             dump_matches) -> None:
    """Evaluate a prediction manifest against a ground-truth manifest."""
    config = MetricConfig(
        denominator=_denominator(denominator),
        aggregate=_aggregate(aggregate),
        match_threshold=match_threshold,
        void_fraction_threshold=void_threshold,
        bpq_d=bpq_d, bpq_mode=bpq_mode, wpq_a=wpq_a, wpq_d=wpq_d,
        fwpq_weight_basis=fwpq_basis,
        subtract_void=subtract_void, score_background=score_background,
    )
    metric_names = _parse_metrics(metrics)
    try:
        gt_manifest = panoptic_io.load_manifest(gt_path, gt_dir)
        pred_manifest = panoptic_io.load_manifest(pred_path, pred_dir)
        report = pqmetrics.evaluate_dataset(
            gt_manifest, pred_manifest, config, metrics=metric_names,
            jobs=pqmetrics.resolve_jobs(jobs), strict=strict,
            with_timestamp=not no_timestamp, all_aggregates=all_aggregates)
    except PqSuiteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    _print_table(report)

    if dump_matches:
        dump_dir = Path(dump_matches)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for entry in report.per_image:
            path = dump_dir / f"{entry['image_id']}.json"
            path.write_text(json.dumps(entry, indent=2, sort_keys=True) + "\n")

    if out:
        out_path = Path(out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        if out_format == "csv":
            out_path.write_text(report.to_csv())
        else:
            out_path.write_text(report.to_json() + "\n")
        click.echo(f"report written to {out_path}")

    if verify_oracle:
        gt_anns = {i: panoptic_io.load_annotation(gt_manifest, i)
                   for i in gt_manifest.image_ids()}
        pred_anns = {i: panoptic_io.load_annotation(pred_manifest, i)
                     for i in pred_manifest.image_ids()}
        try:
            reference = oracle_metrics(gt_anns, pred_anns, config)
        except PqSuiteError as exc:
            click.echo(f"oracle verification unavailable: {exc}", err=True)
            sys.exit(1)
        mismatches = []
        for key, expected in reference.items():
            got = report.aggregate.get(key)
            if expected is None and got is None:
                continue
            if expected is None or got is None or abs(expected - got) > ORACLE_TOLERANCE:
                mismatches.append(f"{key}: fast {got!r} vs oracle {expected!r}")
        if mismatches:
            click.echo("oracle mismatch:\n  " + "\n  ".join(mismatches), err=True)
            sys.exit(1)
        click.echo("oracle verification passed")


@main.command()
@click.option("--masks", "mask_root", required=True, type=click.Path(exists=True),
              help="Directory of <stem>_class.png / <stem>_instance.png pairs.")
@click.option("--categories", "categories_path", required=True,
              type=click.Path(exists=True),
              help="Categories JSON: list of {id, name, isthing}.")
@click.option("--out", "out_root", required=True, type=click.Path(),
              help="Output directory for panoptic.json plus panoptic/ PNGs.")
def convert(mask_root, categories_path, out_root) -> None:
    """Convert class+instance mask pairs to a panoptic dataset."""
    mask_root = Path(mask_root)
    out_root = Path(out_root)
    with open(categories_path) as f:
        raw = json.load(f)
    categories = {int(c["id"]): panoptic_io.Category(int(c["id"]),
                                                     str(c.get("name", c["id"])),
                                                     bool(c.get("isthing", 1)))
                  for c in raw}
    mapping = {cid: cid for cid in categories}

    annotations = []
    failures = []
    for class_path in sorted(mask_root.glob("*_class.png")):
        stem = class_path.name[: -len("_class.png")]
        instance_path = mask_root / f"{stem}_instance.png"
        try:
            if not instance_path.exists():
                raise PqSuiteError(f"missing instance mask {instance_path.name}")
            ann = panoptic_io.ingest_mask_pair(
                panoptic_io.read_mask(class_path),
                panoptic_io.read_mask(instance_path),
                mapping, image_id=stem)
            violations = validate(ann)
            if violations:
                raise PqSuiteError(f"converted annotation invalid: {violations[0].message}")
            annotations.append(ann)
        except PqSuiteError as exc:
            failures.append(f"{stem}: {exc}")
    if not annotations and not failures:
        click.echo("error: no *_class.png masks found", err=True)
        sys.exit(1)

    if annotations:
        panoptic_io.write_dataset(out_root / "panoptic.json", out_root / "panoptic",
                                  annotations, categories)
        click.echo(f"converted {len(annotations)} image(s) to {out_root}")
    for failure in failures:
        click.echo(f"failed: {failure}", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--dir", "png_dir", type=click.Path(), default=None)
@click.option("--images", default=None,
              help="Comma-separated image ids (default: all).")
@click.option("--palette-seed", default=0, show_default=True)
@click.option("--contours", is_flag=True, help="Overlay 1-pixel segment rims.")
@click.option("--pred", "pred_path", type=click.Path(exists=True), default=None,
              help="Second manifest to render side by side.")
@click.option("--pred-dir", type=click.Path(), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
def visualize(manifest_path, png_dir, images, palette_seed, contours,
              pred_path, pred_dir, out_dir) -> None:
    """Render panoptic annotations as colored PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        manifest = panoptic_io.load_manifest(manifest_path, png_dir)
        pred_manifest = (panoptic_io.load_manifest(pred_path, pred_dir)
                         if pred_path else None)
        wanted = ([i.strip() for i in images.split(",")] if images
                  else manifest.image_ids())
        for image_id in wanted:
            ann = panoptic_io.load_annotation(manifest, image_id)
            raster = panoptic_io.render_visualization(ann, palette_seed, contours)
            if pred_manifest is not None:
                pred_ann = panoptic_io.load_annotation(pred_manifest, image_id)
                pred_raster = panoptic_io.render_visualization(
                    pred_ann, palette_seed, contours)
                raster = panoptic_io.compose_side_by_side(raster, pred_raster)
            Image.fromarray(raster).save(out_dir / f"{image_id}.png",
                                         format="PNG", optimize=False,
                                         compress_level=6)
    except PqSuiteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(wanted)} render(s) to {out_dir}")


def _parse_perturbation(value: str) -> synth.Perturbation:
    parts = value.split(":")
    if len(parts) not in (2, 3):
        raise click.UsageError(
            f"--perturb expects kind:magnitude[:seed], got {value!r}")
    kind, magnitude = parts[0], float(parts[1])
    seed = int(parts[2]) if len(parts) == 3 else 0
    try:
        return synth.Perturbation(kind=kind, magnitude=magnitude, seed=seed)
    except PqSuiteError as exc:
        raise click.UsageError(str(exc))


@main.command("synth")
@click.option("--out", "out_root", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--images", "image_count", default=4, show_default=True)
@click.option("--width", default=64, show_default=True)
@click.option("--height", default=64, show_default=True)
@click.option("--classes", default=2, show_default=True)
@click.option("--instances", nargs=2, type=int, default=(2, 4), show_default=True)
@click.option("--radius", nargs=2, type=float, default=(3.0, 6.0), show_default=True)
@click.option("--gap", default=2, show_default=True)
@click.option("--perturb", "perturbations", multiple=True,
              help="kind:magnitude[:seed]; repeatable, applied in order to "
                   "the predictions.")
def synth_command(out_root, seed, image_count, width, height, classes,
                  instances, radius, gap, perturbations) -> None:
    """Emit a seeded synthetic dataset as gt/pred panoptic manifest pairs."""
    out_root = Path(out_root)
    plist = [_parse_perturbation(v) for v in perturbations]
    categories = {c: panoptic_io.Category(c, f"class-{c}") for c in
                  range(1, classes + 1)}
    gt_anns, pred_anns = [], []
    try:
        for index in range(image_count):
            spec = synth.SceneSpec(seed=seed + index, width=width, height=height,
                                   classes=classes,
                                   instances_per_class=tuple(instances),
                                   radius_range=tuple(radius), min_gap=gap)
            scene = synth.generate_scene(spec)
            gt_anns.append(scene)
            pred_anns.append(synth.perturb_many(scene, plist))
        panoptic_io.write_dataset(out_root / "gt.json", out_root / "gt",
                                  gt_anns, categories)
        panoptic_io.write_dataset(out_root / "pred.json", out_root / "pred",
                                  pred_anns, categories)
    except PqSuiteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {image_count} gt/pred image pair(s) under {out_root}")


@main.command()
@click.option("--seeds", default=5, show_default=True,
              help="Number of seed banks per property.")
@click.option("--inject-fault", is_flag=True, hidden=True,
              help="Relax the strict match inequality (must make selftest fail).")
def selftest(seeds, inject_fault) -> None:
    """Run the built-in identity, strictness, and oracle-equivalence checks."""
    from . import selftest as _selftest

    click.echo(f"exercising {seeds} seed bank(s) per property")
    results = _selftest.run(seed_banks=seeds, accept_equal_iou=inject_fault)
    failed = False
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        line = f"{status}  {name}"
        if detail and not ok:
            line += f"  ({detail})"
        click.echo(line)
        failed = failed or not ok
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
