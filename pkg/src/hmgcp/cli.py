"""Command-line front end: simulate | fit | predict | evaluate | experiment.

Every command is deterministic given its arguments and seed; output files
carry a metadata block (tool version, config hash, seed, RNG id, creation
timestamp). The timestamp and recorded runtimes are the only
non-deterministic fields and live exclusively inside the metadata block.

Exit codes: 0 success, 2 usage or input error, 1 numerical failure.
"""

import datetime
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data import (
    DatasetError,
    MaskSpec,
    dataset_to_dict,
    load_dataset,
)
from .evaluate import evaluate_metrics
from .experiment import ExperimentSettings, run_experiment
from .inference import (
    DivergenceError,
    FitConfig,
    fit,
    hyperparams_from_dict,
    load_checkpoint,
    posterior_functions,
    sample_reported,
    save_checkpoint,
)
from .rng import RNG_ID
from .simulate import (
    STREAM_TEST,
    PRESET_NAMES,
    SimulationConfig,
    preset,
    sample_observations,
    save_ground_truth,
    simulate_dataset,
)

VOLATILE_METADATA_KEYS = ("created_at", "runtimes", "runtime_seconds")


def _config_hash(obj) -> str:
    canon = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def _metadata(seed, config_obj) -> dict:
    return {
        "tool_version": __version__,
        "config_hash": _config_hash(config_obj),
        "seed": seed,
        "rng": RNG_ID,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _write_json(path, payload: dict, metadata: dict):
    obj = dict(payload)
    obj["metadata"] = metadata
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def strip_volatile(obj):
    """Drop the volatile metadata fields; used for byte-stability checks."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items()
                if k not in VOLATILE_METADATA_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def _parse_counts(text):
    if text is None:
        return None
    parts = [int(p) for p in str(text).split(",") if p != ""]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _echo(quiet, message):
    if not quiet:
        click.echo(message)


@click.group()
@click.version_option(version=__version__)
def main():
    """Heterogeneous multi-task Gaussian Cox process toolkit."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--preset", "preset_name", type=str, default=None,
              help=f"Built-in benchmark preset: {', '.join(PRESET_NAMES)}.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Simulation config JSON.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--quiet", is_flag=True)
def simulate(preset_name, config_path, seed, out_dir, quiet):
    """Generate a synthetic dataset, an independent test draw and the ground truth."""
    config = _load_sim_config(preset_name, config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, truth = simulate_dataset(config, seed)
    test = sample_observations(config, truth, seed, stream=STREAM_TEST)
    meta = _metadata(seed, {"command": "simulate", "config": config.to_dict()})
    meta["config"] = config.to_dict()
    _write_json(out / "dataset.json", dataset_to_dict(dataset), meta)
    _write_json(out / "test_dataset.json", dataset_to_dict(test), meta)
    save_ground_truth(truth, out / "ground_truth.json", metadata=meta)
    _echo(quiet, f"wrote dataset.json, test_dataset.json, ground_truth.json to {out}")


def _load_sim_config(preset_name, config_path) -> SimulationConfig:
    if (preset_name is None) == (config_path is None):
        raise click.UsageError("provide exactly one of --preset or --config")
    if preset_name is not None:
        try:
            return preset(preset_name).simulation
        except KeyError as exc:
            raise click.UsageError(str(exc)) from exc
    with open(config_path, encoding="utf-8") as fh:
        return SimulationConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


@main.command(name="fit")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Training dataset JSON.")
@click.option("--preset", "preset_name", type=str, default=None,
              help="Take initial hyperparameters and grid sizes from a preset.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Fit config JSON (see FitConfig.echo schema).")
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--n-inducing", type=str, default=None, help='e.g. "30" or "10,5".')
@click.option("--n-quad", type=str, default=None, help='e.g. "100" or "50,25".')
@click.option("--max-iter", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--monitor", type=click.Choice(["tll", "elbo"]), default=None)
@click.option("--no-hyper-update", is_flag=True, help="Freeze hyperparameters.")
@click.option("--hyper-every", type=int, default=None)
@click.option("--inner-iters", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--quiet", is_flag=True)
def fit_cmd(data_path, preset_name, config_path, seed, n_inducing, n_quad, max_iter,
            tol, monitor, no_hyper_update, hyper_every, inner_iters, out_dir, quiet):
    """Fit the model and write a checkpoint plus the fit report."""
    try:
        dataset = load_dataset(data_path)
    except DatasetError as exc:
        raise click.UsageError(f"{data_path}: {exc}") from exc
    config = _build_fit_config(
        preset_name, config_path, seed=seed, n_inducing=_parse_counts(n_inducing),
        n_quad=_parse_counts(n_quad), max_iter=max_iter, tol=tol, monitor=monitor,
        update_hyperparams=(False if no_hyper_update else None),
        hyper_every=hyper_every, inner_iters=inner_iters,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = fit(dataset, config)
    except DivergenceError as exc:
        click.echo(f"fit aborted: {exc}", err=True)
        sys.exit(1)
    meta = _metadata(config.seed, {"command": "fit", "config": config.echo()})
    meta["runtime_seconds"] = result.report.runtime_seconds
    save_checkpoint(out / "checkpoint.json", result, dataset.domain, config, metadata=meta)
    _write_json(out / "fit_report.json", {"report": result.report.deterministic_fields()},
                meta)
    _echo(quiet, f"converged={result.report.converged} after "
                 f"{result.report.iterations} sweeps; wrote checkpoint.json, "
                 f"fit_report.json to {out}")


def _build_fit_config(preset_name, config_path, **overrides) -> FitConfig:
    if preset_name is not None and config_path is not None:
        raise click.UsageError("provide at most one of --preset or --config")
    if preset_name is not None:
        try:
            p = preset(preset_name)
        except KeyError as exc:
            raise click.UsageError(str(exc)) from exc
        base = {
            "hyperparams": p.simulation.hyperparams,
            "n_inducing": p.n_inducing,
            "n_quad": p.n_quad,
        }
    elif config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        base = {k: raw[k] for k in (
            "n_inducing", "n_quad", "max_iter", "tol", "seed", "update_hyperparams",
            "hyper_every", "inner_iters", "monitor") if k in raw}
        if "hyperparams" not in raw:
            raise click.UsageError(f"{config_path}: missing 'hyperparams'")
        base["hyperparams"] = hyperparams_from_dict(raw["hyperparams"])
        for key in ("n_inducing", "n_quad"):
            if isinstance(base.get(key), list):
                base[key] = tuple(base[key])
    else:
        raise click.UsageError("provide one of --preset or --config")
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    base.setdefault("seed", 0)
    return FitConfig(**base)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


@main.command()
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--grid-counts", type=str, default=None,
              help='Evaluation grid, e.g. "200" or "100,50" (default 200 per dim).')
@click.option("--draws", type=int, default=100, show_default=True,
              help="Posterior draws for the band of transformed tasks.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--svg", "emit_svg", is_flag=True, help="Also render per-task SVG figures.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--quiet", is_flag=True)
def predict(ckpt_path, grid_counts, draws, seed, emit_svg, out_dir, quiet):
    """Evaluate posterior summaries on a grid; write predictions.csv (+ SVGs).

    Columns: coordinates, task, mean, lower, upper, where the band is the
    reported-function mean plus/minus one standard deviation (analytic for
    regression, sampled for sigmoid-transformed tasks).
    """
    try:
        ckpt = load_checkpoint(ckpt_path)
    except (ValueError, KeyError) as exc:
        raise click.UsageError(f"{ckpt_path}: {exc}") from exc
    domain = ckpt["domain"]
    counts = _parse_counts(grid_counts)
    if counts is None:
        counts = 200 if domain.dims == 1 else (200, 200)
    from .kernels import lattice_points

    points = lattice_points(domain, counts)
    state, gamma, grid, hyp = ckpt["state"], ckpt["gamma"], ckpt["grid"], ckpt["hyperparams"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _metadata(seed, {"command": "predict", "checkpoint": ckpt["config"],
                            "grid_counts": counts, "draws": draws})
    rows = []
    per_task = []
    for i in range(state.n_tasks):
        summary = posterior_functions(state, gamma, grid, hyp, i, points)
        mean = summary["reported"]
        if state.task_type(i) == "regression":
            sd = np.sqrt(summary["latent_var"])
        else:
            samples = sample_reported(state, gamma, grid, hyp, i, points,
                                      n_draws=draws, seed=seed)
            sd = samples.std(axis=0, ddof=1)
        per_task.append((mean, mean - sd, mean + sd))
        for j in range(points.shape[0]):
            rows.append([*points[j], i, mean[j], mean[j] - sd[j], mean[j] + sd[j]])
    _write_predictions_csv(out / "predictions.csv", rows, domain.dims, meta)
    if emit_svg:
        _render_svgs(out, domain, counts, points, state, per_task)
    _echo(quiet, f"wrote predictions.csv ({len(rows)} rows) to {out}")


def _write_predictions_csv(path, rows, dims, meta):
    header = ",".join([f"x{d}" for d in range(dims)] + ["task", "mean", "lower", "upper"])
    lines = [f"# metadata: {json.dumps(meta, sort_keys=True)}", header]
    for row in rows:
        coords = [f"{v:.10g}" for v in row[:dims]]
        task = str(int(row[dims]))
        vals = [f"{v:.10g}" for v in row[dims + 1:]]
        lines.append(",".join(coords + [task] + vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _render_svgs(out, domain, counts, points, state, per_task):
    from .svg import render_curve, render_heatmap

    for i, (mean, lower, upper) in enumerate(per_task):
        kind = state.task_type(i)
        name = out / f"task_{i}_{kind}.svg"
        if domain.dims == 1:
            render_curve(name, points[:, 0], mean, lower, upper,
                         title=f"task {i} ({kind})")
        else:
            nx = counts[0] if not np.isscalar(counts) else counts
            ny = counts[1] if not np.isscalar(counts) else counts
            render_heatmap(name, mean.reshape(nx, ny),
                           (domain.lower[0], domain.upper[0],
                            domain.lower[1], domain.upper[1]),
                           title=f"task {i} ({kind})")


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Held-out dataset JSON for test log-likelihood.")
@click.option("--train-data", "train_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Training dataset JSON (records per-task n_train).")
@click.option("--ground-truth", "truth_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Ground-truth JSON for estimation error.")
@click.option("--masks", "masks_path", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="JSON list of per-task mask boxes; point-process integrals "
                   "are then restricted to each task's box.")
@click.option("--quad-counts", type=str, default="100", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--quiet", is_flag=True)
def evaluate(ckpt_path, data_path, train_path, truth_path, masks_path, quad_counts,
             out_dir, quiet):
    """Score a checkpoint against held-out data and/or a known ground truth."""
    try:
        ckpt = load_checkpoint(ckpt_path)
    except (ValueError, KeyError) as exc:
        raise click.UsageError(f"{ckpt_path}: {exc}") from exc
    if data_path is None and truth_path is None:
        raise click.UsageError("nothing to score: pass --data and/or --ground-truth")
    test = truth = regions = n_train = None
    if data_path is not None:
        try:
            test = load_dataset(data_path)
        except DatasetError as exc:
            raise click.UsageError(f"{data_path}: {exc}") from exc
    if train_path is not None:
        try:
            train = load_dataset(train_path)
        except DatasetError as exc:
            raise click.UsageError(f"{train_path}: {exc}") from exc
        n_train = [len(train.task_points(i)) for i in range(train.n_tasks)]
    if truth_path is not None:
        from .simulate import load_ground_truth

        truth = load_ground_truth(truth_path)
    if masks_path is not None:
        with open(masks_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        regions = [None if m is None else MaskSpec(lower=m["lower"], upper=m["upper"])
                   for m in raw]
    metrics = evaluate_metrics(
        ckpt["state"], ckpt["gamma"], ckpt["grid"], ckpt["hyperparams"],
        test_dataset=test, truth=truth, regions=regions,
        quad_counts=_parse_counts(quad_counts), n_train=n_train,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _metadata(ckpt["config"].get("seed"), {"command": "evaluate",
                                                  "checkpoint": ckpt["config"]})
    _write_json(out / "metrics.json", metrics, meta)
    _echo(quiet, f"wrote metrics.json to {out}")


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


@main.command()
@click.option("--preset", "preset_name", type=str, required=True,
              help=f"One of: {', '.join(PRESET_NAMES)}.")
@click.option("--widths", type=str, default="0,5,10", show_default=True,
              help="Comma-separated gap widths (0 = complete data).")
@click.option("--replicates", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iter", type=int, default=50, show_default=True)
@click.option("--tol", type=float, default=1e-3, show_default=True)
@click.option("--single-task", is_flag=True,
              help="Also refit each point-process task alone and compare "
                   "masked-gap log-likelihoods.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--quiet", is_flag=True)
def experiment(preset_name, widths, replicates, seed, max_iter, tol, single_task,
               out_dir, quiet):
    """Mask, refit and score over replicate mask placements; write experiment.json."""
    if preset_name not in PRESET_NAMES:
        raise click.UsageError(f"unknown preset {preset_name!r}; "
                               f"available: {', '.join(PRESET_NAMES)}")
    try:
        width_list = tuple(float(w) for w in widths.split(","))
    except ValueError as exc:
        raise click.UsageError(f"bad --widths value {widths!r}") from exc
    settings = ExperimentSettings(
        preset=preset_name, widths=width_list, replicates=replicates, seed=seed,
        max_iter=max_iter, tol=tol, single_task=single_task,
    )
    try:
        results = run_experiment(settings)
    except DivergenceError as exc:
        click.echo(f"experiment aborted: {exc}", err=True)
        sys.exit(1)
    runtimes = results.pop("runtimes", [])
    meta = _metadata(seed, {"command": "experiment", "settings": vars(settings)})
    meta["runtimes"] = runtimes
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "experiment.json", results, meta)
    if not quiet:
        for block in results["widths"]:
            s = block["summary"]
            ee = s.get("ee_cox_sum")
            click.echo(f"width {block['width']:g}: EE(cox sum) "
                       f"{ee['mean']:.3f} +/- {ee['sd']:.3f}" if ee else
                       f"width {block['width']:g}: no point-process EE")
        click.echo(f"wrote experiment.json to {out}")


if __name__ == "__main__":
    main()
