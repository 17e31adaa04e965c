"""Experiment harness: seeded trials, win-rate tables, deterministic output.

Seeds are derived per (master seed, context, trial) by hashing, so trials
are order-independent and reruns are byte-identical.  Within a trial every
estimator sees the identical resampled data; only the privatization noise
streams differ.  All delimited output renders floats with %.10g.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimators import (
    ExpFamily1D,
    GlmLogistic,
    expfam_onestep,
    glm_onestep_coords,
    mle_logistic,
    private_sgd,
    rr_bernoulli_estimate,
)

FLOAT_FMT = ".10g"


def trial_seed(master_seed: int, *context) -> int:
    """Stable 64-bit stream seed from the master seed and context tokens."""
    text = ":".join([str(int(master_seed))] + [str(c) for c in context])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class TrialReport:
    trial_id: int
    seed: int
    estimator: str
    target: float
    estimate: float
    error: float
    runtime_ms: float


# ---- synthetic population -----------------------------------------------------


@dataclass
class SyntheticPopulation:
    """Fixed feature table; targets are signs of a held-out column.

    Features are tanh of standard normals, so covariates live in (-1, 1)
    and the sufficient statistics of every induced regression are bounded
    by 1 in sup norm.
    """

    seed: int
    features: np.ndarray
    _models: dict = field(default_factory=dict, repr=False)
    _mles: dict = field(default_factory=dict, repr=False)

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def covariates(self, target_col: int) -> np.ndarray:
        return np.delete(self.features, target_col, axis=1)

    def labels(self, target_col: int) -> np.ndarray:
        y = np.sign(self.features[:, target_col])
        y[y == 0.0] = 1.0
        return y

    def glm_model(self, target_col: int) -> GlmLogistic:
        if target_col not in self._models:
            self._models[target_col] = GlmLogistic.from_rows(self.covariates(target_col))
        return self._models[target_col]

    def population_mle(self, target_col: int) -> np.ndarray:
        """Full-population MLE coefficients: the experiment's ground truth."""
        if target_col not in self._mles:
            model = self.glm_model(target_col)
            res = mle_logistic(model, (self.covariates(target_col), self.labels(target_col)))
            if not res.converged:
                raise RuntimeError("population MLE did not converge")
            self._mles[target_col] = res.theta
        return self._mles[target_col]


def make_population(seed: int, rows: int = 5000, dim: int = 6) -> SyntheticPopulation:
    """Hub-correlated Gaussian columns, tanh-compressed.

    Column 0 is a hub; every other column correlates with it at rho but with
    its siblings only at rho^2.  Predicting the hub's sign therefore puts
    genuine, evenly spread signal on every covariate (an uncorrelated table
    would make each regression truth ~0 and the ranking experiments vacuous)
    while the covariate Gram stays close to the iid one — pairwise
    correlations of rho^2 barely move its smallest eigenvalue, which is what
    keeps the noisy-mean-to-parameter inversion stable.  Marginals stay
    standard normal, so features land in (-1, 1).
    """
    rho = 0.35
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((rows, dim))
    pre = np.empty_like(z)
    pre[:, 0] = z[:, 0]
    pre[:, 1:] = rho * z[:, [0]] + math.sqrt(1.0 - rho * rho) * z[:, 1:]
    return SyntheticPopulation(seed, np.tanh(pre))


# ---- generic trial runner -------------------------------------------------------


def _bernoulli_trial(config, trial, master_seed):
    p, eps, n = config["p"], config["epsilon"], config["n"]
    data_rng = np.random.default_rng(trial_seed(master_seed, "data", trial))
    bits = (data_rng.random(n) < p).astype(float)
    rng = np.random.default_rng(trial_seed(master_seed, trial, "rr_bernoulli"))
    start = time.perf_counter()
    est = rr_bernoulli_estimate(bits, eps, rng)
    ms = (time.perf_counter() - start) * 1e3
    return [("rr_bernoulli", float(p), est.p_hat, ms)]


def _gaussian_trial(config, trial, master_seed):
    theta0, eps, n = config["theta0"], config["epsilon"], config["n"]
    fam = ExpFamily1D.gaussian_location()
    data_rng = np.random.default_rng(trial_seed(master_seed, "data", trial))
    sample = fam.sample(theta0, n, data_rng)
    rng = np.random.default_rng(trial_seed(master_seed, trial, "expfam_onestep"))
    start = time.perf_counter()
    res = expfam_onestep(fam, sample, eps, rng)
    ms = (time.perf_counter() - start) * 1e3
    return [("expfam_onestep", float(theta0), res.theta_hat, ms)]


def _glm_trial(config, trial, master_seed, population):
    eps, n = config["epsilon"], config["n"]
    col = config.get("target_col", 0)
    coord = config.get("coordinate", 0)
    model = population.glm_model(col)
    truth = population.population_mle(col)
    names = config.get("estimators", ["onestep", "sgd", "mle"])
    data_rng = np.random.default_rng(trial_seed(master_seed, "data", trial))
    idx = data_rng.integers(0, population.rows, size=n)
    sample = (population.covariates(col)[idx], population.labels(col)[idx])
    v = np.zeros(model.dim)
    v[coord] = 1.0
    out = []
    for name in names:
        rng = np.random.default_rng(trial_seed(master_seed, trial, name))
        start = time.perf_counter()
        if name == "onestep":
            ests, _, _ = glm_onestep_coords(model, sample, [v], eps, rng, clamp_init=True)
            value = float(ests[0])
        elif name == "sgd":
            value = float(private_sgd(model, sample, eps, rng)[coord])
        elif name == "mle":
            value = float(mle_logistic(model, sample).theta[coord])
        else:
            raise ValueError(f"unknown estimator {name!r}")
        ms = (time.perf_counter() - start) * 1e3
        out.append((name, float(truth[coord]), value, ms))
    return out


def run_trials(config: dict) -> list[TrialReport]:
    """Run seeded trials per a config dict; see the CLI docs for schemas.

    kinds: "bernoulli" (randomized-response mean), "gaussian_location"
    (two-stage estimator; n is the total sample), "glm" (population
    resampling with onestep/sgd/mle).  Reports come back sorted by
    (trial_id, estimator).
    """
    kind = config["kind"]
    trials = int(config.get("trials", 1))
    master_seed = int(config.get("seed", 0))
    population = None
    if kind == "glm":
        pop_cfg = config.get("population", {})
        population = make_population(
            int(pop_cfg.get("seed", 0)),
            int(pop_cfg.get("rows", 5000)),
            int(pop_cfg.get("dim", 6)),
        )
    reports = []
    for trial in range(trials):
        if kind == "bernoulli":
            rows = _bernoulli_trial(config, trial, master_seed)
        elif kind == "gaussian_location":
            rows = _gaussian_trial(config, trial, master_seed)
        elif kind == "glm":
            rows = _glm_trial(config, trial, master_seed, population)
        else:
            raise ValueError(f"unknown trial kind {kind!r}")
        for name, target, estimate, ms in rows:
            reports.append(
                TrialReport(
                    trial_id=trial,
                    seed=trial_seed(master_seed, trial, name),
                    estimator=name,
                    target=target,
                    estimate=estimate,
                    error=estimate - target,
                    runtime_ms=ms,
                )
            )
    reports.sort(key=lambda r: (r.trial_id, r.estimator))
    return reports


@dataclass(frozen=True)
class VarianceVerdict:
    empirical: float
    target: float
    rel_err: float
    passed: bool


def variance_check(
    reports: Sequence[TrialReport],
    target_variance: float,
    tolerance: float,
    scale_n: int | None = None,
) -> VarianceVerdict:
    """Compare Var(sqrt(n) * error) over trials to a target within rel tol.

    ``scale_n`` is the CLT normalization (the stage-2 half for the
    two-stage estimator); omit it to compare raw error variance.
    """
    errors = np.array([r.error for r in reports], dtype=float)
    if errors.size < 2:
        raise ValueError("need at least two reports")
    factor = float(scale_n) if scale_n is not None else 1.0
    emp = float(np.var(np.sqrt(factor) * errors, ddof=1))
    rel = abs(emp - target_variance) / target_variance
    return VarianceVerdict(emp, target_variance, rel, rel <= tolerance)


# ---- GLM ranking experiment -------------------------------------------------------


@dataclass(frozen=True)
class ExperimentCell:
    """One (N, epsilon) cell: win rates over (trial, coordinate) pairs and
    per-estimator error histograms (shared bin edges)."""

    sample_size: int
    epsilon: float
    trials: int
    win_vs_sgd: float
    win_vs_init: float
    bin_edges: tuple
    histograms: dict


@dataclass(frozen=True)
class ExperimentResult:
    target_col: int
    coords: int
    cells: tuple


def experiment_glm(
    population: SyntheticPopulation,
    n_list: Sequence[int],
    epsilon_list: Sequence[float],
    trials: int,
    target_col: int = 0,
    master_seed: int = 0,
) -> ExperimentResult:
    """Head-to-head ranking of one-step vs noisy SGD vs its own initializer.

    For each (N, eps) and trial: resample N population rows (shared across
    methods), run private SGD, the shared-pilot one-step per coordinate,
    and the non-private MLE; count |onestep_j - truth_j| < |other_j -
    truth_j| over (trial, coordinate) pairs.  Errors are binned on
    symmetric edges for the report path.
    """
    model = population.glm_model(target_col)
    truth = population.population_mle(target_col)
    d = model.dim
    basis = [np.eye(d)[j] for j in range(d)]
    cells = []
    for n in n_list:
        for eps in epsilon_list:
            err = {"onestep": [], "sgd": [], "mle": [], "init": []}
            wins_sgd = 0
            wins_init = 0
            for trial in range(trials):
                data_rng = np.random.default_rng(
                    trial_seed(master_seed, "data", n, eps, trial)
                )
                idx = data_rng.integers(0, population.rows, size=n)
                sample = (
                    population.covariates(target_col)[idx],
                    population.labels(target_col)[idx],
                )
                os_rng = np.random.default_rng(
                    trial_seed(master_seed, "onestep", n, eps, trial)
                )
                ests, _, pilot = glm_onestep_coords(
                    model, sample, basis, eps, os_rng, clamp_init=True
                )
                sgd_rng = np.random.default_rng(
                    trial_seed(master_seed, "sgd", n, eps, trial)
                )
                theta_sgd = private_sgd(model, sample, eps, sgd_rng)
                theta_mle = mle_logistic(model, sample).theta
                e_os = ests - truth
                e_sgd = theta_sgd - truth
                e_init = pilot.theta_tilde - truth
                e_mle = theta_mle - truth
                err["onestep"].extend(e_os)
                err["sgd"].extend(e_sgd)
                err["init"].extend(e_init)
                err["mle"].extend(e_mle)
                wins_sgd += int(np.sum(np.abs(e_os) < np.abs(e_sgd)))
                wins_init += int(np.sum(np.abs(e_os) < np.abs(e_init)))
            pairs = trials * d
            edges, hists = _bin_errors(err)
            cells.append(
                ExperimentCell(
                    sample_size=int(n),
                    epsilon=float(eps),
                    trials=trials,
                    win_vs_sgd=wins_sgd / pairs,
                    win_vs_init=wins_init / pairs,
                    bin_edges=edges,
                    histograms=hists,
                )
            )
    return ExperimentResult(target_col, d, tuple(cells))


def _bin_errors(err: dict, bins: int = 40) -> tuple[tuple, dict]:
    """Symmetric shared-edge histograms; the limit is rounded to two
    significant digits so rebinning is float-stable.  The 1.05 padding
    keeps the limit above the true max after the round-down worst case,
    so every error lands in a bin and totals stay exact."""
    largest = max(
        (max(abs(min(v)), abs(max(v))) for v in err.values() if v), default=0.0
    )
    limit = float(f"{largest * 1.05:.2g}") or 1.0
    edges = np.linspace(-limit, limit, bins + 1)
    hists = {}
    for name, vals in err.items():
        counts, _ = np.histogram(np.asarray(vals), bins=edges)
        hists[name] = tuple(int(c) for c in counts)
    return tuple(float(e) for e in edges), hists


# ---- deterministic emission --------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, FLOAT_FMT)
    return str(x)


def _round_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(format(obj, FLOAT_FMT))
    if isinstance(obj, (int, str)) or obj is None:
        return obj
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_round_floats(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return _round_floats(obj.item())
    return str(obj)


TRIAL_COLUMNS = ("trial_id", "seed", "estimator", "target", "estimate", "error", "runtime_ms")


def _reports_rows(reports: Sequence[TrialReport]):
    for r in reports:
        yield {
            "trial_id": r.trial_id,
            "seed": r.seed,
            "estimator": r.estimator,
            "target": r.target,
            "estimate": r.estimate,
            "error": r.error,
            "runtime_ms": r.runtime_ms,
        }


def _experiment_rows(result: ExperimentResult):
    for cell in result.cells:
        for comparison, rate in (
            ("vs_sgd", cell.win_vs_sgd),
            ("vs_init", cell.win_vs_init),
        ):
            yield {
                "record": "win_rate",
                "sample_size": cell.sample_size,
                "epsilon": cell.epsilon,
                "trials": cell.trials,
                "estimator": "onestep",
                "comparison": comparison,
                "value": rate,
            }
        for name in sorted(cell.histograms):
            counts = cell.histograms[name]
            for b, count in enumerate(counts):
                yield {
                    "record": "histogram",
                    "sample_size": cell.sample_size,
                    "epsilon": cell.epsilon,
                    "trials": cell.trials,
                    "estimator": name,
                    "bin_left": cell.bin_edges[b],
                    "bin_right": cell.bin_edges[b + 1],
                    "count": count,
                }


def emit(obj, fmt: str = "csv", path=None) -> str:
    """Render trial reports, experiment results, or row dicts to csv/json.

    Floats are fixed to %.10g in both formats; JSON keys are sorted; rows
    keep their given order (report producers sort upstream).  Returns the
    rendered text and writes it to ``path`` when given.
    """
    header = None
    if isinstance(obj, ExperimentResult):
        rows = list(_experiment_rows(obj))
    elif isinstance(obj, Sequence) and obj and isinstance(obj[0], TrialReport):
        rows = list(_reports_rows(obj))
    elif isinstance(obj, Sequence) and all(isinstance(r, dict) for r in obj):
        rows = [dict(r) for r in obj]
        if not rows:
            header = list(TRIAL_COLUMNS)
    else:
        raise TypeError("emit expects TrialReports, an ExperimentResult, or row dicts")
    if fmt == "csv":
        if header is None:
            header = list(rows[0].keys()) if rows else list(TRIAL_COLUMNS)
            for r in rows[1:]:
                for k in r:
                    if k not in header:
                        header.append(k)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_fmt(r.get(k, "")) for k in header])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(_round_floats(rows), sort_keys=True, indent=2) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
