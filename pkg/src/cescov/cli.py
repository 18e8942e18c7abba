"""Command-line front end: sampling, estimation, closed-form shrinkage
theory, the shrinkage-versus-kurtosis curve, and Monte Carlo verification.

All commands emit JSON (indented by default, compact with ``--json``) except
``sample`` and ``curve``, whose primary output is CSV.  Exit codes: 0 on
success / verification pass, 1 on verification failure, 2 on configuration
or input errors.  With the environment variable ``CES_SCM_CI=1`` every
randomized command requires an explicit ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from .ces_sampler import CESModel, RngStream, parse_family, sample_ces
from .errors import CescovError
from .estimators import estimate_kurtosis, scm
from .lin_core import (
    dump_complex_matrix,
    load_complex_matrix,
    save_complex_matrix,
    scale_and_sphericity,
)
from .mc_verify import (
    MCConfig,
    Tolerances,
    compare_to_theory,
    empirical_moments,
    radial_estimate_from_moments,
    verify_oracle_efficiency,
    verify_sphere_moments,
)
from .theory import (
    affine_equivariant_var,
    beta_opt,
    empirical_structure_pair,
    mse_scm,
    nmse_from_sphericity,
    radial_var_structure,
    scm_radial_structure,
    shrinkage_curve,
    shrinkage_report,
)

SCHEMA_VERSION = 1
CI_ENV = "CES_SCM_CI"

MC_TARGETS = ("thm1", "thm3", "transport", "sphere", "oracle")


class CliError(Exception):
    """Configuration error reported with exit code 2."""


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    if os.environ.get(CI_ENV) == "1":
        raise CliError(f"--seed is required when {CI_ENV}=1")
    return int(np.random.SeedSequence().entropy) % (2**63)


def spiked_covariance(p: int, gamma: float, tol: float = 1e-12) -> np.ndarray:
    """Identity plus a rank-one spike along the all-ones direction, with the
    spike weight solved by bisection so the sphericity equals ``gamma``."""
    if not (1.0 <= gamma < p):
        raise CliError(f"spiked preset needs 1 <= gamma < p = {p}, got gamma = {gamma}")

    def sphericity(w: float) -> float:
        # tr(M) = p + w, tr(M^2) = p + 2w + w^2 for M = I + w vv^H, |v| = 1
        return p * (p + 2 * w + w * w) / (p + w) ** 2

    if gamma == 1.0:
        w = 0.0
    else:
        hi = 1.0
        while sphericity(hi) < gamma:
            hi *= 2.0
        lo = 0.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if sphericity(mid) < gamma:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
    v = np.full(p, 1.0 / math.sqrt(p))
    return np.eye(p, dtype=np.complex128) + w * np.outer(v, v)


def _resolve_cov(spec: str, p: int) -> np.ndarray:
    if spec == "identity":
        return np.eye(p, dtype=np.complex128)
    if spec.startswith("diag:"):
        try:
            vals = [float(v) for v in spec[len("diag:"):].split(",")]
        except ValueError:
            raise CliError(f"cannot parse --cov {spec!r}") from None
        if len(vals) != p:
            raise CliError(
                f"conflicting flags: --cov diag has {len(vals)} entries but --p is {p}"
            )
        if any(v <= 0 for v in vals):
            raise CliError("--cov diag entries must be positive")
        return np.diag(np.asarray(vals, dtype=np.complex128))
    if spec.startswith("spiked:gamma="):
        try:
            g = float(spec[len("spiked:gamma="):])
        except ValueError:
            raise CliError(f"cannot parse --cov {spec!r}") from None
        return spiked_covariance(p, g)
    try:
        m = load_complex_matrix(spec)
    except OSError as e:
        raise CliError(f"cannot read --cov file {spec!r}: {e}") from None
    except ValueError as e:
        raise CliError(f"malformed --cov file {spec!r}: {e}") from None
    if m.shape != (p, p):
        raise CliError(
            f"conflicting flags: --cov file is {m.shape[0]} x {m.shape[1]} but --p is {p}"
        )
    return m


def _resolve_mu(spec: str, p: int) -> np.ndarray:
    if spec == "zero":
        return np.zeros(p, dtype=np.complex128)
    try:
        m = load_complex_matrix(spec)
    except OSError as e:
        raise CliError(f"cannot read --mu file {spec!r}: {e}") from None
    except ValueError as e:
        raise CliError(f"malformed --mu file {spec!r}: {e}") from None
    if 1 not in m.shape or max(m.shape) != p:
        raise CliError(
            f"conflicting flags: --mu file has shape {m.shape} but --p is {p}"
        )
    return m.ravel()


def _print_json(payload: dict, compact: bool, stream=None) -> None:
    stream = stream or sys.stdout
    print(json.dumps(payload, indent=None if compact else 2), file=stream)


def _complex_pairs(a: np.ndarray) -> list:
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_complex_pairs(row) for row in a]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sample(args) -> int:
    family = parse_family(args.dist)
    cov = _resolve_cov(args.cov, args.p)
    mu = _resolve_mu(args.mu, args.p)
    model = CESModel(mu, cov, family)
    seed = _resolve_seed(args.seed)
    x = sample_ces(model, args.n, RngStream(seed))
    if args.out == "-":
        dump_complex_matrix(sys.stdout, x)
    else:
        save_complex_matrix(args.out, x)
    eta, gamma = scale_and_sphericity(model.cov)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n": args.n,
        "p": args.p,
        "family": str(family),
        "kappa": model.kappa,
        "eta": eta,
        "gamma": gamma,
        "seed": seed,
    }
    _print_json(summary, compact=True, stream=sys.stderr)
    return 0


def cmd_theory(args) -> int:
    if (args.gamma is None) == (args.cov is None):
        raise CliError("conflicting flags: give exactly one of --gamma and --cov")
    if args.cov is not None:
        cov = _resolve_cov(args.cov, args.p)
        rep = shrinkage_report(args.n, args.p, args.kappa, cov=cov)
    else:
        rep = shrinkage_report(args.n, args.p, args.kappa, gamma=args.gamma)
    s = scm_radial_structure(args.n, args.kappa, args.p)
    payload = {"schema_version": SCHEMA_VERSION, **rep.to_dict(), "tau1": s.tau1, "tau2": s.tau2}
    _print_json(payload, compact=args.json)
    return 0


def cmd_curve(args) -> int:
    kappa_min = args.kappa_min if args.kappa_min is not None else -1.0 / (args.p + 1)
    if args.steps < 1:
        raise CliError(f"--steps must be >= 1, got {args.steps}")
    if args.kappa_max <= kappa_min:
        raise CliError(
            f"conflicting flags: --kappa-max {args.kappa_max} must exceed --kappa-min {kappa_min}"
        )
    grid = np.linspace(kappa_min, args.kappa_max, args.steps + 1)
    try:
        series = shrinkage_curve(args.n, args.p, args.gamma, grid)
    except ValueError as e:
        raise CliError(str(e)) from None
    lines = ["kappa,beta_o"] + [f"{k:.12g},{b:.12g}" for k, b in series]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="ascii") as f:
            f.write(text)
    return 0


def cmd_mc_verify(args) -> int:
    seed = _resolve_seed(args.seed)
    t0 = time.perf_counter()
    config_echo = {
        "target": args.target,
        "dist": args.dist,
        "n": args.n,
        "p": args.p,
        "cov": args.cov,
        "reps": args.reps,
        "workers": args.workers,
        "stat": args.stat,
    }

    if args.target == "sphere":
        report = verify_sphere_moments(args.p, args.reps, seed, workers=args.workers)
    else:
        family = parse_family(args.dist)
        tol = Tolerances.for_family(family)
        if args.target in ("thm1", "thm3"):
            cov = np.eye(args.p, dtype=np.complex128)
        else:
            cov = _resolve_cov(args.cov, args.p)
        model = CESModel(np.zeros(args.p, dtype=np.complex128), cov, family)
        stat = args.stat if args.target == "thm1" else "scm"
        cfg = MCConfig(
            replications=args.reps,
            n=args.n,
            model=model,
            statistic=stat,
            seed=seed,
            workers=args.workers,
        )
        if args.target == "thm1":
            emp = empirical_moments(cfg)
            est = radial_estimate_from_moments(emp)
            pair = empirical_structure_pair(est.tau1, est.tau2, args.p)
            report = compare_to_theory(emp, pair, tol)
        elif args.target == "thm3":
            emp = empirical_moments(cfg)
            est = radial_estimate_from_moments(emp)
            struct = scm_radial_structure(args.n, model.kappa, args.p)
            pair = radial_var_structure(struct.tau1, struct.tau2, args.p)
            mse_t, _ = mse_scm(model.cov, args.n, model.kappa)
            report = compare_to_theory(
                emp, pair, tol, radial_theory=struct, radial_estimate=est, mse_theory=mse_t
            )
        elif args.target == "transport":
            emp = empirical_moments(cfg)
            struct = scm_radial_structure(args.n, model.kappa, args.p)
            pair = affine_equivariant_var(model.cov, struct)
            mse_t, _ = mse_scm(model.cov, args.n, model.kappa)
            report = compare_to_theory(emp, pair, tol, mse_theory=mse_t)
        else:  # oracle
            report = verify_oracle_efficiency(cfg, include_plugin=args.plugin)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": config_echo,
        "seed": seed,
        "wall_time_s": time.perf_counter() - t0,
        "report": report.to_dict(),
    }
    _print_json(payload, compact=args.json)
    return 0 if report.passed else 1


def cmd_estimate(args) -> int:
    try:
        x = load_complex_matrix(args.infile)
    except OSError as e:
        raise CliError(f"cannot read dataset {args.infile!r}: {e}") from None
    except ValueError as e:
        raise CliError(f"malformed dataset {args.infile!r}: {e}") from None
    n, p = x.shape
    if n < 2:
        raise CliError(f"need at least 2 observations, got {n}")
    res = scm(x)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n": n,
        "p": p,
        "xbar": _complex_pairs(res.xbar),
        "eta": None,
        "gamma": None,
        "kappa": None,
        "nmse": None,
        "beta_o": None,
        "partial": False,
        "error": None,
    }
    try:
        eta, gamma = scale_and_sphericity(res.s)
        kappa = estimate_kurtosis(x)
        nmse = nmse_from_sphericity(n, p, gamma, kappa)
        payload.update(
            eta=eta, gamma=gamma, kappa=kappa, nmse=nmse, beta_o=beta_opt(nmse)
        )
    except CescovError as e:
        payload["partial"] = True
        payload["error"] = str(e)
    if args.scm_out:
        save_complex_matrix(args.scm_out, res.s)
    else:
        payload["scm"] = _complex_pairs(res.s)
    _print_json(payload, compact=args.json)
    return 2 if payload["partial"] else 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cescov",
        description="Complex elliptical sampling, covariance estimation, "
        "shrinkage theory, and Monte Carlo verification.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="draw a dataset from a CES model")
    p_sample.add_argument("--dist", required=True, help="gaussian, t:NU (NU > 4) or k:ALPHA")
    p_sample.add_argument("--n", type=int, required=True, help="number of observations")
    p_sample.add_argument("--p", type=int, required=True, help="dimension")
    p_sample.add_argument("--mu", default="zero", help="'zero' or a complex CSV vector file")
    p_sample.add_argument(
        "--cov",
        default="identity",
        help="identity, diag:a,b,..., spiked:gamma=G, or a complex CSV file",
    )
    p_sample.add_argument("--seed", type=int, default=None)
    p_sample.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p_sample.set_defaults(func=cmd_sample)

    p_theory = sub.add_parser("theory", help="closed-form MSE and shrinkage report")
    p_theory.add_argument("--n", type=int, required=True)
    p_theory.add_argument("--p", type=int, required=True)
    p_theory.add_argument("--kappa", type=float, required=True, help="elliptical kurtosis")
    p_theory.add_argument("--gamma", type=float, default=None, help="sphericity in [1, p]")
    p_theory.add_argument("--cov", default=None, help="covariance preset or CSV file")
    p_theory.add_argument("--json", action="store_true", help="compact single-line JSON")
    p_theory.set_defaults(func=cmd_theory)

    p_curve = sub.add_parser("curve", help="shrinkage coefficient versus kurtosis CSV")
    p_curve.add_argument("--n", type=int, default=10)
    p_curve.add_argument("--p", type=int, default=10)
    p_curve.add_argument("--gamma", type=float, default=2.0)
    p_curve.add_argument("--kappa-min", type=float, default=None, help="default -1/(p+1)")
    p_curve.add_argument("--kappa-max", type=float, default=3.0)
    p_curve.add_argument("--steps", type=int, default=40, help="grid intervals (steps+1 rows)")
    p_curve.add_argument("--out", default="-")
    p_curve.set_defaults(func=cmd_curve)

    p_mc = sub.add_parser("mc-verify", help="Monte Carlo checks against the closed forms")
    p_mc.add_argument(
        "--target",
        required=True,
        choices=MC_TARGETS,
        help="thm1: radial form of the statistic at the spherical model; "
        "thm3: SCM constants vs closed form; transport: full matrices at a "
        "general covariance; sphere: unit-sphere moments; oracle: shrinkage "
        "MSE ratio",
    )
    p_mc.add_argument("--dist", default="gaussian")
    p_mc.add_argument("--n", type=int, default=10)
    p_mc.add_argument("--p", type=int, default=2)
    p_mc.add_argument("--cov", default="identity", help="used by transport/oracle")
    p_mc.add_argument("--reps", type=int, default=200_000)
    p_mc.add_argument("--seed", type=int, default=None)
    p_mc.add_argument("--workers", type=int, default=1)
    p_mc.add_argument("--stat", default="scm", choices=("scm", "wscm:one", "wscm:fobi"))
    p_mc.add_argument("--plugin", action="store_true", help="report plug-in shrinkage ratio")
    p_mc.add_argument("--json", action="store_true")
    p_mc.set_defaults(func=cmd_mc_verify)

    p_est = sub.add_parser("estimate", help="sample statistics of a dataset CSV")
    p_est.add_argument("--in", dest="infile", required=True)
    p_est.add_argument("--scm-out", default=None, help="write the SCM to this CSV file")
    p_est.add_argument("--json", action="store_true")
    p_est.set_defaults(func=cmd_estimate)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CescovError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
