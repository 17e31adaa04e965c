"""Command line entry points.

Subcommands:
  verify-channel   measure privacy levels of a channel against a claim
  contract-check   divergence contraction checks (sweeps or one instance)
  bound            evaluate a named risk bound from a config
  estimate         run seeded estimator trials, optional variance check
  experiment       glm ranking experiment: tables plus histogram figures

Exit codes: 0 all checks passed, 2 a verdict failed, 1 usage/config error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bounds as bnd
from . import contraction as ctr
from .channels import (
    FiniteChannel,
    RandomizedResponseBit,
    analytic_log_ratio_bound,
    verify_chi2,
    verify_fk,
    verify_ldp,
    verify_renyi,
)
from .divergences import DiscreteDistribution, is_inf
from .estimators import ExpFamily1D, expfam_asymptotic_variance, rr_bernoulli_variance
from .harness import emit, run_trials, make_population, experiment_glm, variance_check
from .information import bernoulli_score_model, generic_private_lb, one_param_info_bound

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here reserves 2 for
    failed verdicts, so usage errors remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class ConfigError(ValueError):
    pass


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    return obj


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config key {key!r} is required")
    return cfg[key]


def _write_out(text: str, args) -> None:
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _channel_from_spec(spec) -> FiniteChannel:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("channel spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "randomized_response":
        return RandomizedResponseBit(float(_need(spec, "epsilon"))).channel()
    if kind == "matrix":
        for key in ("inputs", "outputs", "kernel"):
            _need(spec, key)
        return FiniteChannel.from_json_dict(spec)
    raise ConfigError(f"unknown channel kind {kind!r}")


def _dist_from_spec(spec) -> DiscreteDistribution:
    if not isinstance(spec, dict):
        raise ConfigError("distribution spec must be an object")
    if "bernoulli" in spec:
        return DiscreteDistribution.bernoulli(float(spec["bernoulli"]))
    if "atoms" in spec and "weights" in spec:
        return DiscreteDistribution.from_json_dict(spec)
    raise ConfigError("distribution spec needs 'bernoulli' or 'atoms'+'weights'")


def _modulus_from_spec(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("modulus spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "power":
        coeff = float(spec.get("coeff", 1.0))
        exponent = float(spec.get("exponent", 2.0))
        return lambda delta: coeff * delta**exponent
    if kind == "bernoulli-mean":
        loss = bnd.LossSpec(spec.get("loss", "squared"))
        p0 = DiscreteDistribution.bernoulli(float(spec.get("p0", 0.5)))
        fam = bnd.bernoulli_grid_family(float(spec.get("step", 0.01)))
        return bnd.family_modulus(loss, p0, fam)
    raise ConfigError(f"unknown modulus kind {kind!r}")


def _phi_from_spec(spec):
    if spec is None:
        spec = {"kind": "power", "coeff": 1.0, "exponent": 2.0}
    if not isinstance(spec, dict) or spec.get("kind") != "power":
        raise ConfigError("phi spec must be {'kind': 'power', ...}")
    coeff = float(spec.get("coeff", 1.0))
    exponent = float(spec.get("exponent", 2.0))
    return lambda x: coeff * float(np.linalg.norm(np.atleast_1d(x))) ** exponent


# ---- verify-channel ---------------------------------------------------------


def cmd_verify_channel(args) -> int:
    cfg = _load_config(args)
    channel = _channel_from_spec(_need(cfg, "channel"))
    tol = float(cfg.get("tolerance", 1e-9))
    claimed = cfg.get("claimed_epsilon")
    rows = []

    def add(check, measured, threshold):
        passed = True if threshold is None else bool(measured <= threshold + tol)
        rows.append(
            {
                "check": check,
                "measured": float(measured),
                "threshold": float("nan") if threshold is None else float(threshold),
                "passed": passed,
            }
        )

    ldp = verify_ldp(channel)
    add("ldp", ldp, None if claimed is None else float(claimed))
    if claimed is not None:
        growth = math.expm1(float(claimed))
        add("chi2", verify_chi2(channel), growth**2)
        for alpha in cfg.get("renyi_alpha", [2.0]):
            add(f"renyi_{alpha:g}", verify_renyi(channel, float(alpha)), float(claimed))
        for k in cfg.get("fk_k", [2.0, 3.0]):
            add(f"fk_{k:g}", verify_fk(channel, float(k)), growth)
    else:
        add("chi2", verify_chi2(channel), None)
    spec = cfg["channel"]
    if spec.get("kind") == "randomized_response":
        mech = RandomizedResponseBit(float(spec["epsilon"]))
        analytic = analytic_log_ratio_bound(mech)
        rows.append(
            {
                "check": "analytic_vs_measured",
                "measured": float(ldp),
                "threshold": float(analytic),
                "passed": bool(abs(ldp - analytic) <= 1e-9),
            }
        )
    _write_out(emit(rows, args.format), args)
    failed = [r["check"] for r in rows if not r["passed"]]
    if failed:
        print(f"verify-channel: FAIL ({', '.join(failed)})", file=sys.stderr)
        return EXIT_FAILED
    print("verify-channel: ok", file=sys.stderr)
    return EXIT_OK


# ---- contract-check ---------------------------------------------------------


def cmd_contract_check(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    reports = []
    if "sweep" in cfg:
        which = cfg["sweep"]
        instances = int(cfg.get("instances", 32))
        if which == "fk":
            reports = ctr.fk_contraction_sweep(
                instances,
                tuple(float(k) for k in cfg.get("k_values", (1.5, 2.0, 3.0))),
                seed=seed,
            )
        elif which == "tensorized":
            reports = ctr.tensorization_sweep(
                instances, tuple(int(c) for c in cfg.get("coords", (2, 3))), seed=seed
            )
        elif which == "both":
            reports = ctr.fk_contraction_sweep(instances, seed=seed)
            reports += ctr.tensorization_sweep(instances, seed=seed)
        else:
            raise ConfigError(f"unknown sweep {which!r}")
    elif "channels" in cfg:
        channels = [_channel_from_spec(s) for s in cfg["channels"]]
        p0s = [_dist_from_spec(s) for s in _need(cfg, "p0_list")]
        p1s = [_dist_from_spec(s) for s in _need(cfg, "p1_list")]
        reports = [ctr.check_tensorized_chi(channels, p0s, p1s)]
    elif "channel" in cfg:
        channel = _channel_from_spec(cfg["channel"])
        p0 = _dist_from_spec(_need(cfg, "p0"))
        p1 = _dist_from_spec(_need(cfg, "p1"))
        reports = [ctr.check_fk_contraction(channel, p0, p1, float(cfg.get("k", 2.0)))]
    else:
        raise ConfigError("config needs 'sweep', 'channel', or 'channels'")
    rows = [
        {
            "name": r.name,
            "lhs": r.lhs,
            "rhs": r.rhs,
            "epsilon_used": r.epsilon_used,
            "holds": r.holds,
            "slack": r.slack,
        }
        for r in reports
    ]
    _write_out(emit(rows, args.format), args)
    bad = sum(1 for r in reports if not r.holds)
    print(
        f"contract-check: {len(reports) - bad}/{len(reports)} instances hold",
        file=sys.stderr,
    )
    return EXIT_FAILED if bad else EXIT_OK


# ---- bound ------------------------------------------------------------------


def _rows_for(name: str, params: dict, values: dict) -> list[dict]:
    blob = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return [
        {"bound": name, "detail": d, "params": blob, "value": v}
        for d, v in values.items()
    ]


def _bound_theorem1(cfg):
    omega = _modulus_from_spec(_need(cfg, "modulus"))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    b = bnd.theorem1_lower(omega, n, eps2)
    return _rows_for(
        "theorem1",
        {"n": n, "epsilon2": eps2},
        {
            "exact": b.exact,
            "simplified": b.simplified,
            "radius_exact": b.radius_exact,
            "radius_simplified": b.radius_simplified,
        },
    )


def _bound_achievable(cfg):
    omega = _modulus_from_spec(_need(cfg, "modulus"))
    n, eps = int(_need(cfg, "n")), float(_need(cfg, "epsilon"))
    gamma = float(cfg.get("gamma", 1.0))
    beta = float(cfg.get("beta", 1.0))
    alpha = float(cfg.get("alpha", 2.0))
    b = bnd.achievable_upper(omega, n, eps, gamma, beta, alpha)
    return _rows_for(
        "achievable",
        {"alpha": alpha, "beta": beta, "epsilon": eps, "gamma": gamma, "n": n},
        {"value": b.value, "delta_eps": b.delta_eps, "radius": b.radius},
    )


def _bound_superefficiency(cfg):
    omega = _modulus_from_spec(_need(cfg, "modulus"))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    eta = float(_need(cfg, "eta"))
    t = float(cfg.get("t", 0.5))
    gamma = float(cfg.get("gamma", 1.0))
    v = bnd.superefficiency_floor(omega, n, eps2, eta, t, gamma)
    return _rows_for(
        "superefficiency",
        {"epsilon2": eps2, "eta": eta, "gamma": gamma, "n": n, "t": t},
        {"value": v},
    )


def _bound_bernoulli_mean(cfg):
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    return _rows_for(
        "bernoulli-mean",
        {"epsilon2": eps2, "n": n},
        {"value": bnd.bernoulli_lower(n, eps2)},
    )


def _bound_one_param_info(cfg):
    p = float(cfg.get("p", 0.5))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    v = one_param_info_bound(bernoulli_score_model(p), n, eps2)
    return _rows_for(
        "one-param-info", {"epsilon2": eps2, "n": n, "p": p}, {"value": v}
    )


def _bound_generic_l1(cfg):
    p = float(cfg.get("p", 0.5))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    grad = cfg.get("grad_phi", [1.0])
    phi = _phi_from_spec(cfg.get("phi"))
    v = generic_private_lb(bernoulli_score_model(p), grad, n, eps2, phi)
    return _rows_for(
        "generic-l1", {"epsilon2": eps2, "n": n, "p": p}, {"value": v}
    )


def _bound_logistic_pred(cfg):
    theta0 = float(_need(cfg, "theta0"))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    b = bnd.logistic_pred_lower(theta0, n, eps2)
    return _rows_for(
        "logistic-pred",
        {"epsilon2": eps2, "n": n, "theta0": theta0},
        {
            "value": b.value,
            "modulus_delta": b.modulus_delta,
            "nonprivate": b.nonprivate,
            "regime": b.regime,
        },
    )


def _bound_le_cam(cfg):
    sep = float(_need(cfg, "separation"))
    tv = float(_need(cfg, "tv"))
    return _rows_for(
        "le-cam", {"separation": sep, "tv": tv}, {"value": bnd.le_cam_private(sep, tv)}
    )


def _bound_highdim_mean(cfg):
    d = int(_need(cfg, "d"))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    phi = _phi_from_spec(cfg.get("phi"))
    psi_cols = cfg.get("psi_cols", [1.0] * d)
    v = bnd.highdim_mean_lower(d, n, eps2, phi, psi_cols)
    return _rows_for(
        "highdim-mean", {"d": d, "epsilon2": eps2, "n": n}, {"value": v}
    )


def _bound_sparse_logistic(cfg):
    theta0 = float(_need(cfg, "theta0"))
    d = int(_need(cfg, "d"))
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    phi = _phi_from_spec(cfg.get("phi"))
    psi_cols = cfg.get("psi_cols", [1.0] * d)
    b = bnd.sparse_logistic_lower(theta0, d, n, eps2, phi, psi_cols)
    return _rows_for(
        "sparse-logistic",
        {"d": d, "epsilon2": eps2, "n": n, "theta0": theta0},
        {"value": b.value, "delta_n": b.delta_n},
    )


def _bound_mis_expfam(cfg):
    grad_phi = _need(cfg, "grad_phi")
    hess_a = _need(cfg, "hess_a")
    mean0 = _need(cfg, "mean0")
    candidates = _need(cfg, "mean_candidates")
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    phi = _phi_from_spec(cfg.get("phi"))
    v = bnd.mis_expfam_lower(grad_phi, hess_a, mean0, candidates, n, eps2, phi)
    return _rows_for("mis-expfam", {"epsilon2": eps2, "n": n}, {"value": v})


def _bound_kl_tensor(cfg):
    n, eps2 = int(_need(cfg, "n")), float(_need(cfg, "epsilon2"))
    tv_list = [float(t) for t in _need(cfg, "tv_list")]
    b = ctr.kl_tensor_bound(n, eps2, tv_list)
    return _rows_for(
        "kl-tensor", {"epsilon2": eps2, "n": n}, {"tight": b.tight, "loose": b.loose}
    )


def _family_from_spec(spec) -> ctr.PackingFamily:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("family spec must be an object with a 'kind'")
    if spec["kind"] == "hypercube":
        return ctr.hypercube_mean_packing(int(_need(spec, "d")), float(_need(spec, "delta")))
    if spec["kind"] == "sparse-logistic":
        return ctr.sparse_logistic_packing(
            int(_need(spec, "d")), float(_need(spec, "delta")), float(_need(spec, "theta0"))
        )
    raise ConfigError(f"unknown family kind {spec['kind']!r}")


def _bound_big_tensor(cfg):
    fam = _family_from_spec(_need(cfg, "family"))
    n = int(_need(cfg, "n"))
    mode = str(_need(cfg, "mode"))
    privacy = float(_need(cfg, "privacy"))
    pstar = None
    if cfg.get("pstar") == "uniform-joint":
        pstar = ctr.uniform_joint_reference(fam)
    reference = pstar if cfg.get("reference") == "pstar" else None
    v = ctr.big_tensor_bound(fam, n, mode, privacy, reference=reference, pstar=pstar)
    return _rows_for(
        "big-tensor", {"mode": mode, "n": n, "privacy": privacy}, {"value": v}
    )


def _bound_complexity(cfg):
    fam = _family_from_spec(_need(cfg, "family"))
    pstar = None
    if cfg.get("pstar") == "uniform-joint":
        pstar = ctr.uniform_joint_reference(fam)
    values = {}
    which = cfg.get("which", ["c2"])
    if "c2" in which:
        values["c2"] = ctr.complexity_c2(fam, pstar)
    if "cinf" in which:
        values["cinf"] = ctr.complexity_cinf(fam, pstar)
    if not values:
        raise ConfigError("'which' must contain 'c2' and/or 'cinf'")
    return _rows_for("complexity", {}, values)


def _bound_logreg_complexity(cfg):
    theta0 = float(_need(cfg, "theta0"))
    delta = float(_need(cfg, "delta"))
    d = int(_need(cfg, "d"))
    v = ctr.logreg_complexity_bound(theta0, delta, d)
    return _rows_for(
        "logreg-complexity", {"d": d, "delta": delta, "theta0": theta0}, {"value": v}
    )


BOUND_DISPATCH = {
    "theorem1": _bound_theorem1,
    "achievable": _bound_achievable,
    "superefficiency": _bound_superefficiency,
    "bernoulli-mean": _bound_bernoulli_mean,
    "one-param-info": _bound_one_param_info,
    "generic-l1": _bound_generic_l1,
    "logistic-pred": _bound_logistic_pred,
    "le-cam": _bound_le_cam,
    "highdim-mean": _bound_highdim_mean,
    "sparse-logistic": _bound_sparse_logistic,
    "mis-expfam": _bound_mis_expfam,
    "kl-tensor": _bound_kl_tensor,
    "big-tensor": _bound_big_tensor,
    "complexity": _bound_complexity,
    "logreg-complexity": _bound_logreg_complexity,
}


def cmd_bound(args) -> int:
    cfg = _load_config(args)
    name = _need(cfg, "bound")
    if name not in BOUND_DISPATCH:
        known = ", ".join(sorted(BOUND_DISPATCH))
        raise ConfigError(f"unknown bound {name!r} (known: {known})")
    try:
        rows = BOUND_DISPATCH[name](cfg.get("params", cfg))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bound {name!r}: {exc}") from exc
    _write_out(emit(rows, args.format), args)
    return EXIT_OK


# ---- estimate ---------------------------------------------------------------


def _auto_check(cfg: dict) -> tuple[float, int]:
    kind = cfg["kind"]
    n, eps = int(_need(cfg, "n")), float(_need(cfg, "epsilon"))
    if kind == "gaussian_location":
        fam = ExpFamily1D.gaussian_location()
        return expfam_asymptotic_variance(fam, float(_need(cfg, "theta0")), eps), n // 2
    if kind == "bernoulli":
        p = float(_need(cfg, "p"))
        return n * rr_bernoulli_variance(p, n, eps), n
    raise ConfigError(f"no automatic variance target for kind {kind!r}")


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        reports = run_trials(cfg)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad trial config: {exc}") from exc
    _write_out(emit(reports, args.format), args)
    check = cfg.get("check")
    if check is None:
        return EXIT_OK
    tol = float(check.get("tolerance", 0.2))
    if check.get("target_variance", "auto") == "auto":
        target, scale_n = _auto_check(cfg)
    else:
        target = float(check["target_variance"])
        scale_n = check.get("scale_n")
        scale_n = int(scale_n) if scale_n is not None else None
    verdict = variance_check(reports, target, tol, scale_n)
    status = "PASS" if verdict.passed else "FAIL"
    print(
        f"variance check: empirical={verdict.empirical:.6g} "
        f"target={verdict.target:.6g} rel_err={verdict.rel_err:.3f} {status}",
        file=sys.stderr,
    )
    return EXIT_OK if verdict.passed else EXIT_FAILED


# ---- experiment -------------------------------------------------------------


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    pop_cfg = cfg.get("population", {})
    population = make_population(
        int(pop_cfg.get("seed", 0)),
        int(pop_cfg.get("rows", 5000)),
        int(pop_cfg.get("dim", 6)),
    )
    result = experiment_glm(
        population,
        [int(n) for n in _need(cfg, "n_list")],
        [float(e) for e in _need(cfg, "epsilon_list")],
        int(cfg.get("trials", 50)),
        int(cfg.get("target_col", 0)),
        seed,
    )
    _write_out(emit(result, args.format), args)
    if args.out is not None and cfg.get("figures", True):
        from .figures import render_histograms

        out_dir = os.path.dirname(os.path.abspath(args.out))
        for path in render_histograms(result, out_dir):
            print(f"figure: {path}", file=sys.stderr)
    for cell in result.cells:
        print(
            f"n={cell.sample_size} eps={cell.epsilon:g}: "
            f"onestep beats sgd {cell.win_vs_sgd:.1%}, "
            f"beats initializer {cell.win_vs_init:.1%}",
            file=sys.stderr,
        )
    return EXIT_OK


# ---- entry ------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="locpriv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "verify-channel": cmd_verify_channel,
        "contract-check": cmd_contract_check,
        "bound": cmd_bound,
        "estimate": cmd_estimate,
        "experiment": cmd_experiment,
    }
    for name, fn in handlers.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a JSON config")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="write the table here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("locpriv: error: --seed must fit in a u64", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"locpriv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
