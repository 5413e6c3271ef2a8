"""Command-line surface.

Subcommands: ``explain`` (one input, one method), ``coverage`` /
``localize`` / ``lambda-study`` (experiment harnesses emitting JSON + CSV)
and ``oracle`` (exhaustive ground-truth importance). Every command accepts
``--seed`` and is byte-reproducible under it; results go to ``--output``
(``-`` for stdout) and everything else to stderr.

Exit codes: 0 success, 1 runtime/numeric error, 2 usage error, 3 adapter
protocol error.
"""

from __future__ import annotations

import functools
import json
import sys

import click
import numpy as np

from .baselines import BaselineConfig, explain_bayeslime, explain_lime
from .blackbox import InputSpace, SubprocessModel, resolve_builtin
from .errors import AdapterProtocolError, EblimeError, InvalidInputError
from .evaluation import (
    make_defect_suite,
    make_synthetic_suite,
    run_coverage_experiment,
    run_lambda_study,
    run_localization_experiment,
    write_report,
)
from .oracle import ground_truth_beta
from .perturbation import (
    FeatureSpace,
    KernelConfig,
    build_perturbation_set,
    default_theta,
    grid_segment,
    read_image,
)
from .posterior import PriorConfig, explain_eblime

EXIT_RUNTIME = 1
EXIT_ADAPTER = 3


def _load_config_file(ctx, param, value):
    """Eager --config callback: file values become defaults, flags win."""
    if not value:
        return value
    defaults = {}
    with open(value, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(f"malformed config line: {raw.rstrip()}")
            key, val = (part.strip() for part in line.split("=", 1))
            defaults[key.replace("-", "_")] = val.strip("\"'")
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return value


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AdapterProtocolError as exc:
            click.echo(f"error: adapter protocol: {exc}", err=True)
            sys.exit(EXIT_ADAPTER)
        except EblimeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def common_options(fn):
    decorators = [
        click.option("--config", callback=_load_config_file, is_eager=True, expose_value=False,
                     type=click.Path(exists=True), help="key=value file; flags override it."),
        click.option("--grid-max", type=float, default=1.0, show_default=True),
        click.option("--grid-size", type=int, default=20_000, show_default=True),
        click.option("--samples", type=int, default=2_500, show_default=True),
        click.option("--prior-a", type=float, default=1.0, show_default=True),
        click.option("--prior-b", type=float, default=1.0, show_default=True),
        click.option("--theta", type=float, default=None,
                     help="Kernel width; defaults to sqrt(p)/4 for explain/oracle."),
        click.option("--distance", type=click.Choice(["euclidean", "cosine"]), default=None,
                     help="Mask distance (default euclidean; suites may carry their own)."),
        click.option("--ci-level", type=float, default=0.95, show_default=True),
        click.option("--fixed-lambda", "--lambda", "fixed_lambda", type=float, default=1.0,
                     show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--output", type=str, default="-", show_default=True,
                     help="Output path; '-' writes to stdout."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                     show_default=True),
        click.option("--threads", type=int, default=1, show_default=True,
                     help="Worker threads for experiment cells; never changes results."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _prior(grid_max, grid_size, samples, prior_a, prior_b, ci_level) -> PriorConfig:
    return PriorConfig(
        a=prior_a, b=prior_b, grid_max=grid_max, grid_size=grid_size,
        samples=samples, ci_level=ci_level,
    )


def _parse_segments(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise click.UsageError(f"--segments must look like 3x3, got {text!r}") from None


def _resolve_model(model: str, input_path, abstract_p, segments):
    """Turn --model/--input/--abstract-p/--segments into (handle, space, original)."""
    if model.startswith("builtin:"):
        handle, space, original = resolve_builtin(model[len("builtin:"):])
        if input_path is not None:
            original = read_image(input_path)
            if original.shape != space.instance_shape:
                raise InvalidInputError(
                    f"--input shape {original.shape} does not match model input "
                    f"{space.instance_shape}"
                )
        return handle, space, original
    if model.startswith("exec:"):
        command = model[len("exec:"):]
        if input_path is not None:
            if segments is None:
                raise click.UsageError("--input with an external model requires --segments")
            original = read_image(input_path)
            rows, cols = _parse_segments(segments)
            labels = grid_segment(original.shape[0], original.shape[1], rows, cols)
            channels = 1 if original.ndim == 2 else original.shape[2]
            space = FeatureSpace.image(labels, channels=channels)
            handle = SubprocessModel(command, InputSpace("image", original.shape))
            return handle, space, original
        if abstract_p is not None:
            space = FeatureSpace.abstract(abstract_p)
            handle = SubprocessModel(command, InputSpace("abstract-mask", (abstract_p,)))
            return handle, space, np.ones(abstract_p)
        raise click.UsageError("external models need --input or --abstract-p")
    raise click.UsageError(f"--model must be builtin:<name> or exec:<command>, got {model!r}")


def _emit_text(text: str, output: str) -> None:
    if output == "-":
        click.echo(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")


def _explanation_csv(expl) -> str:
    rows = ["feature,mean,variance,ci_lower,ci_upper"]
    variances = np.diag(expl.beta_cov)
    for j in range(expl.p):
        lower = "" if expl.ci_lower is None else repr(float(expl.ci_lower[j]))
        upper = "" if expl.ci_upper is None else repr(float(expl.ci_upper[j]))
        rows.append(
            f"{j},{float(expl.beta_mean[j])!r},{float(variances[j])!r},{lower},{upper}"
        )
    return "\n".join(rows)


def _emit_report(report, output: str, fmt: str) -> None:
    if output == "-":
        if fmt == "json":
            click.echo(json.dumps(report.to_json_dict(), sort_keys=True))
        else:
            for row in report.csv_rows():
                click.echo(",".join(str(v) for v in row))
    else:
        for path in write_report(report, output, fmt="both"):
            click.echo(f"wrote {path}", err=True)


def _make_suite(name: str, seed: int):
    if name.startswith("synthetic-"):
        return make_synthetic_suite(int(name.split("-", 1)[1]), seed=seed)
    if name.startswith("defect-"):
        return make_defect_suite(int(name.split("-", 1)[1]), seed=seed)
    raise click.UsageError(f"unknown suite {name!r} (expected synthetic-<k> or defect-<k>)")


@click.group()
def main():
    """Local surrogate explanations with calibrated uncertainty."""


@main.command()
@click.option("--method", type=click.Choice(["lime", "bayeslime", "eblime"]), required=True)
@click.option("--model", required=True, help="builtin:<name> or exec:<command>.")
@click.option("--input", "input_path", type=click.Path(exists=True), default=None,
              help="PGM (P5) or PNG image to explain.")
@click.option("--abstract-p", type=int, default=None, help="Feature count for mask-only models.")
@click.option("--segments", default=None, help="Grid segmentation <rows>x<cols> for images.")
@click.option("--num-perturbations", "-n", type=int, default=200, show_default=True)
@common_options
@_handle_errors
def explain(method, model, input_path, abstract_p, segments, num_perturbations,
            grid_max, grid_size, samples, prior_a, prior_b, theta, distance,
            ci_level, fixed_lambda, seed, output, fmt, threads):
    """Explain one input with the chosen method; writes explanation JSON."""
    handle, space, original = _resolve_model(model, input_path, abstract_p, segments)
    kernel = KernelConfig(theta=theta if theta is not None else default_theta(space.p),
                          distance=distance or "euclidean")
    with handle:
        pset = build_perturbation_set(space, original, handle, num_perturbations, seed,
                                      kernel=kernel)
    design = pset.to_design()
    if method == "eblime":
        prior = _prior(grid_max, grid_size, samples, prior_a, prior_b, ci_level)
        expl = explain_eblime(design, prior, seed=seed)
    elif method == "bayeslime":
        cfg = BaselineConfig(method="bayeslime", fixed_lambda=fixed_lambda,
                             samples=samples, ci_level=ci_level)
        expl = explain_bayeslime(design, cfg, seed=seed)
    else:
        expl = explain_lime(design, fixed_lambda=fixed_lambda)
    expl.config = {
        **(expl.config or {}),
        "model": model,
        "num_perturbations": num_perturbations,
        "theta": kernel.theta,
        "distance": kernel.distance,
    }
    _emit_text(_explanation_csv(expl) if fmt == "csv" else expl.to_json(), output)


@main.command()
@click.option("--suite", default="synthetic-100", show_default=True)
@click.option("--n", "n_values", default="50,100,200,400,500", show_default=True,
              help="Comma-separated perturbation counts.")
@click.option("--seeds", type=int, default=5, show_default=True,
              help="Number of random initializations.")
@click.option("--methods", default="eblime,bayeslime", show_default=True)
@click.option("--gt-mode", type=click.Choice(["exact", "sampled-10000"]), default="exact",
              show_default=True)
@common_options
@_handle_errors
def coverage(suite, n_values, seeds, methods, gt_mode, grid_max, grid_size, samples,
             prior_a, prior_b, theta, distance, ci_level, fixed_lambda, seed, output,
             fmt, threads):
    """Credible-interval coverage against the reference importance."""
    scenarios = _make_suite(suite, seed)
    prior = _prior(grid_max, grid_size, samples, prior_a, prior_b, ci_level)
    report = run_coverage_experiment(
        scenarios,
        n_values=[int(v) for v in n_values.split(",")],
        seeds=list(range(seeds)),
        methods=methods.split(","),
        prior=prior,
        gt_mode=gt_mode,
        fixed_lambda=fixed_lambda,
        theta=theta,
        distance=distance,
        master_seed=seed,
        threads=threads,
    )
    _emit_report(report, output, fmt)
    summary = report.summary()
    worst = min(summary.items(), key=lambda kv: kv[1][1])
    click.echo(
        f"coverage: {len(report.records)} cells; lowest median "
        f"{worst[1][1]:.3f} at method={worst[0][0]} n={worst[0][1]}",
        err=True,
    )


@main.command()
@click.option("--suite", default="defect-69", show_default=True)
@click.option("--methods", default="lime,bayeslime,eblime", show_default=True)
@click.option("--num-perturbations", "-n", type=int, default=200, show_default=True)
@click.option("-k", "--top-k", "top_k", type=int, default=5, show_default=True)
@common_options
@_handle_errors
def localize(suite, methods, num_perturbations, top_k, grid_max, grid_size, samples,
             prior_a, prior_b, theta, distance, ci_level, fixed_lambda, seed, output,
             fmt, threads):
    """Top-k positive-segment defect localization on synthetic scans."""
    scenarios = _make_suite(suite, seed)
    prior = _prior(grid_max, grid_size, samples, prior_a, prior_b, ci_level)
    report = run_localization_experiment(
        scenarios,
        methods=methods.split(","),
        prior=prior,
        k=top_k,
        n_perturbations=num_perturbations,
        theta=theta,
        distance=distance,
        master_seed=seed,
        threads=threads,
    )
    _emit_report(report, output, fmt)
    rates = report.rates()
    line = "; ".join(f"{m}: strict {v['strict']:.3f}" for m, v in rates.items())
    click.echo(f"localization over {len(scenarios)} scenarios: {line}", err=True)


@main.command("lambda-study")
@click.option("--suite", default="synthetic-100", show_default=True)
@click.option("--seeds", type=int, default=1, show_default=True)
@click.option("--num-perturbations", "-n", type=int, default=200, show_default=True)
@common_options
@_handle_errors
def lambda_study(suite, seeds, num_perturbations, grid_max, grid_size, samples,
                 prior_a, prior_b, theta, distance, ci_level, fixed_lambda, seed,
                 output, fmt, threads):
    """Posterior mean of the ridge parameter across inputs and reruns."""
    scenarios = _make_suite(suite, seed)
    prior = _prior(grid_max, grid_size, samples, prior_a, prior_b, ci_level)
    report = run_lambda_study(
        scenarios,
        prior=prior,
        seeds=list(range(seeds)),
        n_perturbations=num_perturbations,
        theta=theta,
        distance=distance,
        master_seed=seed,
        threads=threads,
    )
    _emit_report(report, output, fmt)
    std = report.across_input_std
    click.echo(
        f"lambda study: {len(report.records)} cells; across-input std "
        f"{'n/a' if std is None else format(std, '.4g')}",
        err=True,
    )


@main.command()
@click.option("--model", required=True, help="builtin:<name> (deterministic models only).")
@click.option("--input", "input_path", type=click.Path(exists=True), default=None)
@click.option("--abstract-p", type=int, default=None)
@click.option("--segments", default=None)
@common_options
@_handle_errors
def oracle(model, input_path, abstract_p, segments, grid_max, grid_size, samples,
           prior_a, prior_b, theta, distance, ci_level, fixed_lambda, seed, output,
           fmt, threads):
    """Exhaustive ground-truth importance over all 2^p masks."""
    handle, space, original = _resolve_model(model, input_path, abstract_p, segments)
    kernel = KernelConfig(theta=theta if theta is not None else default_theta(space.p),
                          distance=distance or "euclidean")
    with handle:
        beta = ground_truth_beta(space, handle, kernel, fixed_lambda, original=original)
    if fmt == "csv":
        rows = ["feature,beta"] + [f"{j},{float(v)!r}" for j, v in enumerate(beta)]
        _emit_text("\n".join(rows), output)
    else:
        doc = {
            "model": model,
            "fixed_lambda": fixed_lambda,
            "theta": kernel.theta,
            "distance": kernel.distance,
            "beta": beta.tolist(),
        }
        _emit_text(json.dumps(doc, sort_keys=True), output)


if __name__ == "__main__":
    main()
