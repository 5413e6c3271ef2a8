"""Empirical protocols: interval coverage across sample sizes, top-k defect
localization on synthetic images, and the ridge-posterior-mean study.

All experiments are deterministic functions of (suite, seeds, prior): every
cell derives its own master seed from the experiment seed and the cell
coordinates, and aggregation order is fixed.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import BaselineConfig, explain_bayeslime, explain_lime
from .blackbox import BlackBoxHandle, make_defect_model, make_rough_logistic_model
from .errors import InvalidInputError
from .oracle import ground_truth_beta, ground_truth_beta_sampled
from .perturbation import FeatureSpace, KernelConfig, build_perturbation_set, grid_segment
from .posterior import Explanation, PriorConfig, explain_eblime
from .rng import derive_seed, substream

METHODS = ("lime", "bayeslime", "eblime")
SAMPLED_GT_SIZE = 10_000


@dataclass(frozen=True)
class SegmentScore:
    segment: int
    mean: float
    variance: float
    scaled_variance: float


def top_k_segments(expl: Explanation, k: int, mode: str = "absolute") -> list[SegmentScore]:
    """Top-k segments by importance, with raw and min-max scaled variances.

    'absolute' ranks by |mean|; 'positive' keeps only positive means and
    ranks by mean. Ties break to the lower segment index. Variances are
    min-max scaled across all p segments of this explanation.
    """
    if mode not in ("absolute", "positive"):
        raise InvalidInputError(f"mode must be absolute or positive, got {mode!r}")
    p = expl.p
    if not (1 <= k <= p):
        raise InvalidInputError(f"need 1 <= k <= {p}, got k={k}")
    means = expl.beta_mean
    variances = np.diag(expl.beta_cov)
    span = variances.max() - variances.min()
    if span > 0:
        scaled = (variances - variances.min()) / span
    else:
        scaled = np.zeros(p)

    if mode == "absolute":
        candidates = np.arange(p)
        keys = -np.abs(means)
    else:
        candidates = np.flatnonzero(means > 0)
        if candidates.size == 0:
            return []
        keys = -means[candidates]
    order = candidates[np.lexsort((candidates, keys))]
    return [
        SegmentScore(int(j), float(means[j]), float(variances[j]), float(scaled[j]))
        for j in order[:k]
    ]


@dataclass(frozen=True)
class Scenario:
    """One synthetic input: a feature space, a model, the instance to
    explain, and the kernel its design was calibrated for; defect
    scenarios carry their ground-truth segments."""

    name: str
    space: FeatureSpace
    handle: BlackBoxHandle
    original: np.ndarray
    defect_segments: frozenset[int] | None = None
    kernel: KernelConfig | None = None


def make_synthetic_suite(
    num_inputs: int = 100,
    p_range: tuple[int, int] = (8, 13),
    seed: int = 0,
    roughness: float = 1.5,
) -> list[Scenario]:
    """Logistic abstract-mask models with sparse ground-truth coefficients.

    Each input draws its feature count from ``p_range``, activates 2-4
    features with weak signed magnitudes, centers the intercept, and adds
    deterministic per-mask logit offsets (``roughness``) standing in for
    the interaction structure a real classifier has over mask space. A
    smooth additive surrogate target would make the fixed-ridge baseline's
    error model essentially correct, hiding the miscalibration this suite
    exists to expose.

    The paired kernel width sqrt(p)/2.8 concentrates weight near the
    unmodified input strongly enough that the move from prior- to
    data-dominated intervals happens inside the 50..500 perturbation
    range studied.
    """
    rng = substream(seed, "suite")
    scenarios = []
    for i in range(num_inputs):
        p = int(rng.integers(p_range[0], p_range[1] + 1))
        n_active = int(rng.integers(2, 5))
        active = rng.choice(p, size=n_active, replace=False)
        beta_star = np.zeros(p)
        beta_star[active] = rng.uniform(0.1, 0.35, size=n_active) * rng.choice([-1.0, 1.0], size=n_active)
        intercept = -0.5 * beta_star.sum() + rng.uniform(-0.25, 0.25)
        handle = make_rough_logistic_model(
            beta_star,
            intercept=intercept,
            roughness=roughness,
            seed=derive_seed(seed, "model", i),
            name=f"suite-{i}",
        )
        scenarios.append(
            Scenario(
                name=f"input-{i:03d}",
                space=FeatureSpace.abstract(p),
                handle=handle,
                original=np.ones(p),
                kernel=KernelConfig(theta=float(np.sqrt(p) / 2.8)),
            )
        )
    return scenarios


def make_defect_suite(
    num_scenarios: int = 69,
    seed: int = 0,
    k: int = 5,
    pixels_per_block: int = 6,
) -> list[Scenario]:
    """Synthetic grid-segmented defect images with known defect segments.

    Each scenario picks a grid and marks 1-3 adjacent segments as the
    defect. The defect core is bright; where the physical defect extends
    into its last segment it only fills part of that segment's pixels, so
    one ground-truth segment carries a genuinely weak signal, mirroring
    scans whose defects straddle segment boundaries. Scenarios whose
    defect has more segments than ``k`` are rejected up front since a
    top-k set could never cover them.
    """
    grids = [(4, 5), (5, 5), (5, 6), (6, 6), (5, 8)]
    rng = substream(seed, "defect-suite")
    scenarios = []
    for i in range(num_scenarios):
        rows, cols = grids[int(rng.integers(0, len(grids)))]
        h, w = rows * pixels_per_block, cols * pixels_per_block
        n_defect = int(rng.integers(1, 4))
        if n_defect > k:
            raise InvalidInputError(
                f"scenario defect size {n_defect} exceeds top-k budget {k}"
            )
        r0 = int(rng.integers(0, rows))
        c0 = int(rng.integers(0, cols - (n_defect - 1)))
        defect = frozenset(r0 * cols + c0 + d for d in range(n_defect))
        labels = grid_segment(h, w, rows, cols)
        background = rng.uniform(0.05, 0.45, size=(h, w))
        bright = np.isin(labels, sorted(defect))
        in_edge = np.zeros_like(bright)
        if n_defect > 1:
            # the defect barely reaches into its last segment: a couple of
            # bright pixels against a dark interior, leaving that
            # ground-truth segment's signal near the estimation noise floor
            edge = max(r0 * cols + c0 + d for d in range(n_defect))
            in_edge = labels == edge
            edge_pixels = np.flatnonzero(in_edge.ravel())
            n_bright = int(rng.integers(1, 4))
            sliver = np.zeros(in_edge.size, dtype=bool)
            sliver[edge_pixels[:n_bright]] = True
            bright = (bright & ~in_edge) | sliver.reshape(in_edge.shape)
        image = np.where(bright, rng.uniform(0.85, 1.0, size=(h, w)), background)
        image[in_edge & ~bright] = 0.0
        handle = make_defect_model(h, w, rows, cols, defect, name=f"defect-{i}")
        scenarios.append(
            Scenario(
                name=f"defect-{i:03d}",
                space=FeatureSpace.image(labels),
                handle=handle,
                original=image,
                defect_segments=defect,
                kernel=KernelConfig(theta=0.25, distance="cosine"),
            )
        )
    return scenarios


def _suite_kernel(scen: Scenario, theta: float | None, distance: str | None) -> KernelConfig:
    """Explicit theta wins, then the scenario's calibrated kernel, then the
    package default width."""
    if theta is not None:
        return KernelConfig(theta=theta, distance=distance or "euclidean")
    if scen.kernel is not None and distance is None:
        return scen.kernel
    if scen.kernel is not None:
        return KernelConfig(theta=scen.kernel.theta, distance=distance)
    from .perturbation import default_theta

    return KernelConfig(theta=default_theta(scen.space.p), distance=distance or "euclidean")


def _explain(method: str, design, prior: PriorConfig, fixed_lambda: float, cell_seed: int):
    if method == "eblime":
        return explain_eblime(design, prior, seed=cell_seed)
    if method == "bayeslime":
        cfg = BaselineConfig(
            method="bayeslime",
            fixed_lambda=fixed_lambda,
            samples=prior.samples,
            ci_level=prior.ci_level,
        )
        return explain_bayeslime(design, cfg, seed=cell_seed)
    if method == "lime":
        return explain_lime(design, fixed_lambda=fixed_lambda)
    raise InvalidInputError(f"unknown method {method!r}")


@dataclass
class CoverageRecord:
    method: str
    input: str
    n: int
    seed: int
    inside: int
    total: int


@dataclass
class CoverageReport:
    """Interval coverage against the reference importance.

    fractions[(method, n, seed)] pools every input's coordinates for that
    cell; summary[(method, n)] is (min, median, max) over seeds. Raw
    per-input records allow the denominators to be re-derived.
    """

    methods: list[str]
    n_values: list[int]
    seeds: list[int]
    gt_mode: str
    records: list[CoverageRecord] = field(default_factory=list)

    def fractions(self) -> dict[tuple[str, int, int], float]:
        inside: dict[tuple[str, int, int], int] = {}
        total: dict[tuple[str, int, int], int] = {}
        for rec in self.records:
            key = (rec.method, rec.n, rec.seed)
            inside[key] = inside.get(key, 0) + rec.inside
            total[key] = total.get(key, 0) + rec.total
        return {key: inside[key] / total[key] for key in inside}

    def summary(self) -> dict[tuple[str, int], tuple[float, float, float]]:
        fractions = self.fractions()
        out = {}
        for method in self.methods:
            for n in self.n_values:
                vals = [fractions[(method, n, s)] for s in self.seeds]
                out[(method, n)] = (min(vals), float(np.median(vals)), max(vals))
        return out

    def to_json_dict(self) -> dict:
        return {
            "methods": self.methods,
            "n_values": self.n_values,
            "seeds": self.seeds,
            "gt_mode": self.gt_mode,
            "fractions": [
                {"method": m, "n": n, "seed": s, "coverage": c}
                for (m, n, s), c in sorted(self.fractions().items())
            ],
            "summary": [
                {"method": m, "n": n, "min": lo, "median": med, "max": hi}
                for (m, n), (lo, med, hi) in sorted(self.summary().items())
            ],
            "records": [asdict(r) for r in self.records],
        }

    def csv_rows(self):
        header = ["method", "n", "seed", "inputs", "coordinates", "inside", "coverage"]
        counts: dict[tuple[str, int, int], list[int]] = {}
        for rec in self.records:
            cell = counts.setdefault((rec.method, rec.n, rec.seed), [0, 0, 0])
            cell[0] += 1
            cell[1] += rec.total
            cell[2] += rec.inside
        rows = [header]
        for (m, n, s), (n_inputs, total, inside) in sorted(counts.items()):
            rows.append([m, n, s, n_inputs, total, inside, inside / total])
        return rows


def run_coverage_experiment(
    suite: list[Scenario],
    n_values: list[int],
    seeds: list[int],
    methods: list[str],
    prior: PriorConfig | None = None,
    gt_mode: str = "exact",
    fixed_lambda: float = 1.0,
    theta: float | None = None,
    distance: str | None = None,
    master_seed: int = 0,
    ci_inflation: float = 0.0,
    threads: int = 1,
) -> CoverageReport:
    """Fraction of reference coefficients inside the nominal intervals.

    One perturbation set is built per (input, n, seed) cell and shared by
    every method; the reference importance per input is the exhaustive
    enumeration at ``fixed_lambda`` (or a 10,000-sample run in
    'sampled-10000' mode). ``ci_inflation`` widens every interval by a
    fixed margin (a hook for the monotone-coverage sanity test).
    """
    prior = prior or PriorConfig()
    if gt_mode not in ("exact", "sampled-10000"):
        raise InvalidInputError(f"gt_mode must be exact or sampled-10000, got {gt_mode!r}")
    for method in methods:
        if method not in METHODS:
            raise InvalidInputError(f"unknown method {method!r}")
        if method == "lime":
            raise InvalidInputError("lime produces no credible intervals; coverage is undefined")

    ground_truth = {}
    for scen in suite:
        cfg = _suite_kernel(scen, theta, distance)
        if gt_mode == "exact":
            ground_truth[scen.name] = ground_truth_beta(
                scen.space, scen.handle, cfg, fixed_lambda, original=scen.original
            )
        else:
            ground_truth[scen.name] = ground_truth_beta_sampled(
                scen.space,
                scen.handle,
                cfg,
                fixed_lambda,
                SAMPLED_GT_SIZE,
                derive_seed(master_seed, "gt", scen.name),
                original=scen.original,
            )

    cells = [(n, seed, scen) for n in n_values for seed in seeds for scen in suite]

    def run_cell(cell):
        n, seed, scen = cell
        cfg = _suite_kernel(scen, theta, distance)
        cell_seed = derive_seed(master_seed, "cell", scen.name, n, seed)
        pset = build_perturbation_set(scen.space, scen.original, scen.handle, n, cell_seed, kernel=cfg)
        design = pset.to_design()
        gt = ground_truth[scen.name]
        out = []
        for method in methods:
            expl = _explain(method, design, prior, fixed_lambda, cell_seed)
            lower = expl.ci_lower - ci_inflation
            upper = expl.ci_upper + ci_inflation
            inside = int(np.sum((gt >= lower) & (gt <= upper)))
            out.append(CoverageRecord(method, scen.name, n, seed, inside, scen.space.p))
        return out

    report = CoverageReport(
        methods=list(methods), n_values=list(n_values), seeds=list(seeds), gt_mode=gt_mode
    )
    for result in _map_cells(run_cell, cells, threads):
        report.records.extend(result)
    return report


@dataclass
class LocalizationRecord:
    method: str
    scenario: str
    defect_segments: list[int]
    top_segments: list[int]
    strict_hit: bool
    lenient_hit: bool


@dataclass
class LocalizationReport:
    """Top-k localization outcomes: strict = every defect segment in the
    top-k positive set, lenient = nonempty intersection."""

    k: int
    methods: list[str]
    records: list[LocalizationRecord] = field(default_factory=list)

    def rates(self) -> dict[str, dict[str, float]]:
        out = {}
        for method in self.methods:
            recs = [r for r in self.records if r.method == method]
            out[method] = {
                "strict": sum(r.strict_hit for r in recs) / len(recs),
                "lenient": sum(r.lenient_hit for r in recs) / len(recs),
                "total": len(recs),
            }
        return out

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "methods": self.methods,
            "rates": self.rates(),
            "records": [asdict(r) for r in self.records],
        }

    def csv_rows(self):
        rows = [["method", "scenario", "defect_segments", "top_segments", "strict_hit", "lenient_hit"]]
        for r in self.records:
            rows.append(
                [
                    r.method,
                    r.scenario,
                    " ".join(map(str, r.defect_segments)),
                    " ".join(map(str, r.top_segments)),
                    int(r.strict_hit),
                    int(r.lenient_hit),
                ]
            )
        return rows


def run_localization_experiment(
    scenarios: list[Scenario],
    methods: list[str],
    prior: PriorConfig | None = None,
    k: int = 5,
    n_perturbations: int = 200,
    theta: float | None = None,
    distance: str | None = None,
    master_seed: int = 0,
    threads: int = 1,
) -> LocalizationReport:
    """Whether the top-k positive segments cover the known defect area."""
    prior = prior or PriorConfig()
    for scen in scenarios:
        if scen.defect_segments is None:
            raise InvalidInputError(f"scenario {scen.name} has no defect ground truth")
        if len(scen.defect_segments) > k:
            raise InvalidInputError(
                f"scenario {scen.name} has {len(scen.defect_segments)} defect segments; "
                f"a top-{k} set can never cover it"
            )

    def run_cell(scen: Scenario):
        cfg = _suite_kernel(scen, theta, distance)
        cell_seed = derive_seed(master_seed, "loc", scen.name)
        pset = build_perturbation_set(
            scen.space, scen.original, scen.handle, n_perturbations, cell_seed, kernel=cfg
        )
        design = pset.to_design()
        out = []
        for method in methods:
            expl = _explain(method, design, prior, 1.0, cell_seed)
            top = top_k_segments(expl, k, mode="positive")
            top_set = {t.segment for t in top}
            defect = set(scen.defect_segments)
            out.append(
                LocalizationRecord(
                    method=method,
                    scenario=scen.name,
                    defect_segments=sorted(defect),
                    top_segments=[t.segment for t in top],
                    strict_hit=defect.issubset(top_set),
                    lenient_hit=bool(defect & top_set),
                )
            )
        return out

    report = LocalizationReport(k=k, methods=list(methods))
    for result in _map_cells(run_cell, scenarios, threads):
        report.records.extend(result)
    return report


@dataclass
class LambdaStudyReport:
    """Posterior means of the ridge parameter per (input, seed)."""

    records: list[dict] = field(default_factory=list)
    across_input_std: float | None = None
    across_seed_std: dict[str, float] | None = None

    def to_json_dict(self) -> dict:
        return {
            "records": self.records,
            "across_input_std": self.across_input_std,
            "across_seed_std": self.across_seed_std,
        }

    def csv_rows(self):
        rows = [["input", "seed", "lambda_mean", "log_lambda_mean"]]
        for r in self.records:
            rows.append([r["input"], r["seed"], r["lambda_mean"], r["log_lambda_mean"]])
        return rows


def run_lambda_study(
    suite: list[Scenario],
    prior: PriorConfig | None = None,
    seeds: list[int] = (0,),
    n_perturbations: int = 200,
    theta: float | None = None,
    distance: str | None = None,
    master_seed: int = 0,
    threads: int = 1,
) -> LambdaStudyReport:
    """Posterior mean of the ridge parameter across inputs and reruns.

    Dispersion across inputs (and across seeds for a fixed input) is the
    quantity of interest; a single (input, seed) pair reports no
    dispersion.
    """
    if not suite:
        raise InvalidInputError("suite must be nonempty")
    prior = prior or PriorConfig()
    cells = [(scen, seed) for scen in suite for seed in seeds]

    def run_cell(cell):
        scen, seed = cell
        cfg = _suite_kernel(scen, theta, distance)
        cell_seed = derive_seed(master_seed, "lambda", scen.name, seed)
        pset = build_perturbation_set(
            scen.space, scen.original, scen.handle, n_perturbations, cell_seed, kernel=cfg
        )
        expl = explain_eblime(pset.to_design(), prior, seed=cell_seed)
        value = expl.lambda_posterior_mean
        return {
            "input": scen.name,
            "seed": seed,
            "lambda_mean": value,
            "log_lambda_mean": float(np.log(value)),
        }

    report = LambdaStudyReport()
    report.records = list(_map_cells(run_cell, cells, threads))

    per_input = {}
    for rec in report.records:
        per_input.setdefault(rec["input"], []).append(rec["lambda_mean"])
    means = [float(np.mean(vals)) for vals in per_input.values()]
    if len(means) > 1:
        report.across_input_std = float(np.std(means, ddof=1))
    if len(seeds) > 1:
        report.across_seed_std = {
            name: float(np.std(vals, ddof=1)) for name, vals in per_input.items()
        }
    return report


def _map_cells(fn, cells, threads: int):
    """Run cells and return results in cell order; thread count only
    affects wall time, never output."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, cells))
    return [fn(cell) for cell in cells]


def write_report(report, base_path, fmt: str = "both") -> list[str]:
    """Write a report as JSON and/or tidy CSV next to ``base_path``."""
    written = []
    if fmt in ("json", "both"):
        path = f"{base_path}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = f"{base_path}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerows(report.csv_rows())
        written.append(path)
    return written
