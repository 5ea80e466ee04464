"""Command-line entry point: one subcommand per analysis, CSV/JSON outputs
plus a run manifest, deterministic for a given (inputs, seed)."""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import clustering as cl
from . import io as nio
from . import matching as mt
from . import metrics as mx
from . import recommend as rc
from . import synth as sy
from .errors import NetqualityError
from .graphstore import final_snapshot
from .scoring import cronbach_alpha, decile_curve, spearman_rho
from .errors import UndefinedStatisticError


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("NETQUALITY_THREADS")
    return int(env) if env else 1


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else str(x) for x in row])


def _manifest(out_dir: Path, subcommand: str, *, inputs, config, seed, threads, started) -> None:
    payload = {
        "subcommand": subcommand,
        "config": str(config) if config else None,
        "inputs": [str(p) for p in inputs],
        "seed": seed,
        "threads": threads,
        "out_dir": str(out_dir),
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    _write_json(out_dir / "manifest.json", payload)


def _load(data_dir) -> tuple:
    data_dir = Path(data_dir)
    paths = [nio.stream_path(data_dir, name) for name in nio.STREAM_NAMES]
    return nio.load_dataset(data_dir), paths


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


data_opt = click.option("--data", required=True, type=click.Path(), help="Directory with the four event-stream files.")
out_opt = click.option("--out", required=True, type=click.Path(), help="Output directory.")
seed_opt = click.option("--seed", type=int, default=None, help="RNG seed override.")
threads_opt = click.option("--threads", type=int, default=None, help="Worker count (NETQUALITY_THREADS fallback; results never depend on it).")


@click.group()
@click.version_option(version=__version__, prog_name="netquality")
def main():
    """Quality-attributed social network analysis toolkit."""


@main.command("synth")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Generator config JSON.")
@out_opt
@seed_opt
@threads_opt
def synth_cmd(config_path, out, seed, threads):
    """Generate the four event-stream CSVs from a seeded config."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        cfg = sy.SynthConfig.from_json(config_path)
        if seed is not None:
            cfg = sy.SynthConfig(**{**cfg.__dict__, "seed": seed})
        streams = sy.generate(cfg)
        nio.write_dataset(out_dir, streams)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.filename or exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    _manifest(out_dir, "synth", inputs=[config_path], config=config_path, seed=cfg.seed, threads=threads, started=started)


@main.command("ingest-check")
@data_opt
@out_opt
@threads_opt
def ingest_check_cmd(data, out, threads):
    """Validate the event streams and emit dataset summary statistics."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    summary = {
        "n_users": g.n_users,
        "n_follows": g.n_edges,
        "n_photos": len(g.photos),
        "n_favorites": len(g.favorites),
        "n_group_joins": len(g.groups),
        "last_week": g.last_week,
        "warnings": g.ingest_warnings,
    }
    _write_json(out_dir / "summary.json", summary)
    _manifest(out_dir, "ingest-check", inputs=paths, config=None, seed=None, threads=threads, started=started)


@main.command("metrics")
@data_opt
@out_opt
@threads_opt
def metrics_cmd(data, out, threads):
    """Degree-beauty correlations plus inequality of beauty and favorites."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    profiles = mx.BeautyProfiles(g).overall_map()
    snap = final_snapshot(g)
    beauty_values = [profiles[u] for u in sorted(profiles)]
    favs_per_photo = [
        len(g.favorites_received(u)) / len(g.photos_of(u)) for u in sorted(profiles)
    ]

    def maybe(fn, *args):
        try:
            return fn(*args)
        except (UndefinedStatisticError, ValueError) as exc:
            return {"undefined": str(exc)}

    payload = {
        "n_profiled_users": len(profiles),
        "degree_beauty_rho_in": maybe(mx.degree_beauty_correlation, snap, profiles, "in"),
        "degree_beauty_rho_out": maybe(mx.degree_beauty_correlation, snap, profiles, "out"),
        "gini_beauty": maybe(mx.gini, beauty_values),
        "gini_favs_per_photo": maybe(mx.gini, favs_per_photo),
        "mean_beauty": float(np.mean(beauty_values)) if beauty_values else None,
    }
    _write_json(out_dir / "metrics.json", payload)
    for name, values in (("lorenz_beauty.csv", beauty_values), ("lorenz_favs.csv", favs_per_photo)):
        try:
            points = mx.lorenz_curve(values)
        except (UndefinedStatisticError, ValueError):
            points = []
        _write_csv(out_dir / name, ("pop_share", "resource_share"), points)
    _manifest(out_dir, "metrics", inputs=paths, config=None, seed=None, threads=threads, started=started)


@main.command("spectrum")
@data_opt
@out_opt
@threads_opt
@click.option("--bins", type=int, default=100, show_default=True)
@click.option("--null-seed", type=int, default=None, help="Also emit the reshuffled-beauty spectrum for this seed.")
def spectrum_cmd(data, out, threads, bins, null_seed):
    """Mean out-neighbor beauty vs own beauty, in fixed-width bins."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    profiles = mx.BeautyProfiles(g).overall_map()
    snap = final_snapshot(g)
    curve = mx.correlation_spectrum(snap, profiles, bins=bins)
    _write_csv(out_dir / "spectrum.csv", ("bin_center", "b_nn", "count", "variance"), curve.as_rows())
    if null_seed is not None:
        shuffled = mx.shuffle_null_model(profiles, null_seed)
        null_curve = mx.correlation_spectrum(snap, shuffled, bins=bins)
        _write_csv(out_dir / "spectrum_null.csv", ("bin_center", "b_nn", "count", "variance"), null_curve.as_rows())
    _manifest(out_dir, "spectrum", inputs=paths, config=None, seed=null_seed, threads=threads, started=started)


@main.command("illusion")
@data_opt
@out_opt
@threads_opt
@click.option("--threshold", default="mean", show_default=True, help="'mean', 'median', or an explicit value in [0,1].")
def illusion_cmd(data, out, threads, threshold):
    """Share of users whose neighborhoods over-represent above-threshold beauty."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    profiles = mx.BeautyProfiles(g).overall_map()
    if threshold == "mean":
        thr = None
    elif threshold == "median":
        thr = float(np.median(list(profiles.values()))) if profiles else 0.0
    else:
        try:
            thr = float(threshold)
        except ValueError:
            _fail(f"--threshold must be 'mean', 'median' or a number, got {threshold!r}")
    try:
        report = mx.majority_illusion(final_snapshot(g), profiles, threshold=thr)
    except (NetqualityError, ValueError) as exc:
        _fail(str(exc))
    _write_json(
        out_dir / "illusion.json",
        {
            "threshold": report.threshold,
            "global_fraction": report.global_fraction,
            "share": report.share,
            "n_nodes": report.n_nodes,
        },
    )
    _write_csv(
        out_dir / "neighbor_fractions.csv",
        ("node", "neighbor_fraction"),
        ((u, report.node_fractions[u]) for u in sorted(report.node_fractions)),
    )
    _manifest(out_dir, "illusion", inputs=paths, config=None, seed=None, threads=threads, started=started)


@main.command("match")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
@data_opt
@out_opt
@seed_opt
@threads_opt
def match_cmd(config_path, data, out, seed, threads):
    """Run one matching experiment: build, balance, evaluate outcomes."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        cfg = mt.ExperimentConfig.from_json(config_path)
        if seed is not None:
            cfg = mt.ExperimentConfig(**{**cfg.__dict__, "seed": seed})
        g, paths = _load(data)
        result = mt.run_experiment(g, cfg)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    _write_json(out_dir / "result.json", result.to_dict())
    _manifest(out_dir, "match", inputs=[config_path, *paths], config=config_path, seed=cfg.seed, threads=threads, started=started)


@main.command("recommend")
@data_opt
@out_opt
@seed_opt
@threads_opt
@click.option("--band", type=float, default=0.10, show_default=True, help="Relative beauty band for the BB rule.")
@click.option("--sample", type=int, default=None, help="Number of recipients (seeded sample; default all profiled users).")
def recommend_cmd(data, out, seed, threads, band, sample):
    """Issue CN and beauty-band recommendations and compare the two rules."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    seed = 0 if seed is None else seed
    profiles = mx.BeautyProfiles(g).overall_map()
    snap = final_snapshot(g)
    recipients = sorted(profiles)
    if sample is not None and sample < len(recipients):
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(recipients), size=sample, replace=False))
        recipients = [recipients[i] for i in idx]
    recs = rc.simulate(snap, profiles, recipients=recipients, band=band)

    fm = cl.features(g, profiles)
    model = cl.label_clusters(cl.kmeans(fm.X, 4, seed=seed)) if len(fm.users) >= 4 else None
    forlorn: set[int] = set()
    if model is not None and model.labels:
        forlorn_cluster = next(j for j, lab in model.labels.items() if lab == "forlorn_beauty")
        forlorn = {int(u) for u in fm.users[model.assignments == forlorn_cluster]}
    favs = rc.favorites_received_counts(g)

    rows = []
    for rule in ("CN", "BB"):
        rows.extend((r.recipient, r.rule, r.candidate, r.score) for r in recs[rule])
    _write_csv(out_dir / "recommendations.csv", ("u", "rule", "r", "score"), rows)
    payload = {}
    for rule in ("CN", "BB"):
        if recs[rule]:
            payload[rule] = rc.evaluate(recs[rule], profiles, favs, forlorn).to_dict()
        else:
            payload[rule] = None
    _write_json(out_dir / "rec_metrics.json", payload)
    _manifest(out_dir, "recommend", inputs=paths, config=None, seed=seed, threads=threads, started=started)


@main.command("cluster")
@data_opt
@out_opt
@seed_opt
@threads_opt
@click.option("--k", type=int, default=4, show_default=True, help="Cluster count (labels applied when 4).")
@click.option("--select-k", is_flag=True, help="Pick k in 2..10 by the gap statistic instead.")
def cluster_cmd(data, out, seed, threads, k, select_k):
    """Partition users into behavior classes over (beauty, favs/photo, followers)."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    try:
        g, paths = _load(data)
    except FileNotFoundError as exc:
        _fail(f"missing input file: {exc.args[0] if exc.args else exc}")
    except NetqualityError as exc:
        _fail(str(exc))
    seed = 0 if seed is None else seed
    profiles = mx.BeautyProfiles(g).overall_map()
    fm = cl.features(g, profiles)
    gap_info = None
    try:
        if select_k:
            gap = cl.gap_statistic(fm.X, seed=seed)
            k = gap.selected_k
            gap_info = {
                "selected_k": gap.selected_k,
                "ks": list(gap.ks),
                "gaps": [float(x) for x in gap.gaps],
                "s_k": [float(x) for x in gap.s_k],
            }
        model = cl.label_clusters(cl.kmeans(fm.X, k, seed=seed))
    except (NetqualityError, ValueError) as exc:
        _fail(str(exc))
    _write_csv(
        out_dir / "clusters.csv",
        ("user", "cluster", "label"),
        (
            (int(u), int(c), (model.labels or {}).get(int(c), str(int(c))))
            for u, c in zip(fm.users, model.assignments)
        ),
    )
    summary = cl.cluster_summary(g, fm, model)
    if gap_info:
        summary["gap"] = gap_info
    _write_json(out_dir / "clusters.json", summary)
    _manifest(out_dir, "cluster", inputs=paths, config=None, seed=seed, threads=threads, started=started)


@main.command("validate-scores")
@click.option("--ratings", "ratings_path", required=True, type=click.Path(), help="CSV item,rater,grade.")
@click.option("--scores", "scores_path", required=True, type=click.Path(), help="CSV item,score.")
@out_opt
@threads_opt
def validate_scores_cmd(ratings_path, scores_path, out, threads):
    """Compare predicted scores against human grades."""
    started = time.perf_counter()
    threads = _threads(threads)
    out_dir = _out_dir(out)
    ratings_path, scores_path = Path(ratings_path), Path(scores_path)
    for p in (ratings_path, scores_path):
        if not p.exists():
            _fail(f"missing input file: {p}")
    try:
        ratings = _read_ratings(ratings_path)
        scores = _read_scores(scores_path)
    except NetqualityError as exc:
        _fail(str(exc))
    common = sorted(set(ratings) & set(scores))
    if len(common) < 2:
        _fail("need at least 2 items present in both files")
    human_means = [float(np.mean(ratings[i])) for i in common]
    predicted = [scores[i] for i in common]

    payload = {"n_items": len(common)}
    try:
        payload["spearman_rho"] = spearman_rho(predicted, human_means)
    except NetqualityError as exc:
        payload["spearman_rho"] = {"undefined": str(exc)}
    raters = sorted({r for grades in ratings.values() for r in grades})
    matrix = _complete_matrix(ratings, common)
    if matrix is not None:
        try:
            payload["cronbach_alpha"] = cronbach_alpha(matrix)
        except NetqualityError as exc:
            payload["cronbach_alpha"] = {"undefined": str(exc)}
    else:
        payload["cronbach_alpha"] = {"undefined": "ratings matrix is incomplete"}
    payload["n_raters"] = len(raters)
    curve = decile_curve(predicted, human_means)
    _write_csv(
        out_dir / "decile.csv",
        ("bucket_low", "bucket_high", "mean_human_score"),
        ((b / 10, (b + 1) / 10, "" if m is None else m) for b, m in enumerate(curve)),
    )
    _write_json(out_dir / "validation.json", payload)
    _manifest(out_dir, "validate-scores", inputs=[ratings_path, scores_path], config=None, seed=None, threads=threads, started=started)


def _read_ratings(path: Path) -> dict[int, dict[int, int]]:
    from .errors import MalformedRecordError

    out: dict[int, dict[int, int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            line = reader.line_num
            try:
                item, rater, grade = int(rec["item"]), int(rec["rater"]), int(rec["grade"])
            except (KeyError, TypeError, ValueError):
                raise MalformedRecordError(path, line, "expected integer item,rater,grade") from None
            if grade not in (1, 2, 3, 4, 5):
                raise MalformedRecordError(path, line, f"grade {grade} outside 1..5")
            out.setdefault(item, {})[rater] = grade
    return out


def _read_scores(path: Path) -> dict[int, float]:
    from .errors import MalformedRecordError

    out: dict[int, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            line = reader.line_num
            try:
                item, score = int(rec["item"]), float(rec["score"])
            except (KeyError, TypeError, ValueError):
                raise MalformedRecordError(path, line, "expected item,score") from None
            if not (0.0 <= score <= 1.0):
                raise MalformedRecordError(path, line, f"score {score} outside [0, 1]")
            out[item] = score
    return out


def _complete_matrix(ratings: dict[int, dict[int, int]], items) -> np.ndarray | None:
    raters = sorted({r for i in items for r in ratings[i]})
    if len(raters) < 2 or len(items) < 2:
        return None
    matrix = np.empty((len(items), len(raters)))
    for row, i in enumerate(items):
        for col, r in enumerate(raters):
            if r not in ratings[i]:
                return None
            matrix[row, col] = ratings[i][r]
    return matrix


if __name__ == "__main__":
    main()
