"""Experiment drivers behind the CLI: simulations, verification, limits.

Each driver takes a RunConfig, runs the library, and writes plain data
artifacts (CSV columns plus a JSON report).  Output is deterministic for a
fixed config and seed: nothing time- or machine-dependent goes into the
files (wall times are printed, not stored).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dynamics import Trajectory, finite_difference_residual, flow, vector_field
from .errors import ConfigError, NumericError
from .fitness import estimate_constants, verify_assumptions
from .kernels import gaussian_kernel
from .measures import MeasureVec, bl_distance, unit_atom
from .reductions import (
    DiscreteSystem,
    integrate_discrete,
    mm_residual,
    normalized_trajectory,
    replicator_check,
)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON-serializable: {type(x)}")


def _summary_stride(cfg: RunConfig, traj: Trajectory) -> int:
    if cfg.summary_stride is not None:
        return max(1, int(cfg.summary_stride))
    return max(1, traj.n_nodes // 200)


# ─── simulate ────────────────────────────────────────────────────────


def simulate(cfg: RunConfig, out_dir) -> dict:
    """Run the configured flow; write trajectory, summary and metadata files.

    When the Picard solver is selected, an RK4 reference at the same dt is
    run alongside and the sup-TV cross distance recorded in the metadata.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    space, kernel, fp, u = cfg.build()
    traj = flow(
        u,
        kernel,
        fp,
        cfg.T,
        solver=cfg.solver,
        dt=cfg.dt,
        tol=cfg.picard_tol,
        max_iter=cfg.picard_max_iter,
        ball_radius=cfg.ball_radius,
    )
    meta = {
        "solver": cfg.solver,
        "T": cfg.T,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "n_nodes": traj.n_nodes,
        "initial_mass": traj.masses[0],
        "final_mass": traj.masses[-1],
        "trajectory_meta": traj.meta,
    }
    if cfg.solver == "picard":
        reference = flow(u, kernel, fp, cfg.T, solver="rk4", dt=cfg.dt)
        meta["rk4_cross_sup_tv"] = traj.sup_tv_distance(reference)
    if not fp.mean_fitness_mortality:
        m_f1 = float(np.max(fp.f1(0.0)))
        meta["M_f1"] = m_f1
        meta["gronwall_excess"] = traj.mass_bound_excess(m_f1)
    traj.write_csv(out / "trajectory.csv")
    traj.write_summary_csv(out / "summary.csv", stride=_summary_stride(cfg, traj))
    _write_json(out / "metadata.json", meta)
    return meta


# ─── verify ──────────────────────────────────────────────────────────


def verify(cfg: RunConfig, out_dir=None) -> dict:
    """Run the named invariant checks on a config; report pass/fail each.

    Checks: rate assumptions, the Lipschitz bound of the vector field, flow
    positivity, the exponential mass bound, the semigroup axioms, agreement
    with direct integration of the finite class system, and (where defined)
    finite-difference consistency of the frequency dynamics.
    """
    space, kernel, fp, u = cfg.build()
    rng = np.random.default_rng(cfg.seed)
    checks: dict[str, dict] = {}

    def record(name, passed, **info):
        checks[name] = {"passed": bool(passed), **info}

    u_mass = u.total_mass()
    ball = cfg.ball_radius if cfg.ball_radius is not None else max(1.0, u_mass)

    # rate assumptions on a sampling lattice
    constants = None
    if fp.mean_fitness_mortality:
        record("assumptions", True, applicable=False)
    else:
        constants = estimate_constants(fp, space, u_mass, ball)
        report = verify_assumptions(fp, space, k_tilde=constants.k_tilde)
        info = {k: v for k, v in report.to_dict().items() if k != "passed"}
        record("assumptions", report.passed, **info)

    # Lipschitz bound of the truncated field on a TV ball
    if constants is not None:
        c_w = constants.C1
        k_f = constants.B1 + constants.B2 + (constants.L1 + constants.L2) * c_w
        fpt = fp.truncated(constants.k_tilde)
        worst = 0.0
        for _ in range(200):
            w1 = rng.uniform(0.0, 1.0, space.n)
            w2 = rng.uniform(0.0, 1.0, space.n)
            w1 *= rng.uniform(0.0, c_w) / max(w1.sum(), 1e-300)
            w2 *= rng.uniform(0.0, c_w) / max(w2.sum(), 1e-300)
            m1 = MeasureVec(space, w1)
            m2 = MeasureVec(space, w2)
            dv = vector_field(m1, kernel, fpt).add_scaled(-1.0, vector_field(m2, kernel, fpt))
            dm = m1.add_scaled(-1.0, m2).tv_norm()
            if dm > 0:
                worst = max(worst, dv.tv_norm() / dm)
        record("lipschitz_field", worst <= k_f, observed_ratio=worst, bound=k_f)

    # positivity and the mass bound along the configured run
    traj = None
    try:
        traj = flow(
            u, kernel, fp, cfg.T, solver=cfg.solver, dt=cfg.dt,
            tol=cfg.picard_tol, max_iter=cfg.picard_max_iter, ball_radius=cfg.ball_radius,
        )
        record("positivity", True)
    except NumericError as exc:
        record("positivity", False, witness=str(exc))
    if traj is not None and not fp.mean_fitness_mortality:
        m_f1 = float(np.max(fp.f1(0.0)))
        excess = traj.mass_bound_excess(m_f1)
        record("gronwall", excess <= 1e-6, excess=excess, M_f1=m_f1)

    # semigroup axioms: identity at 0, composition at a grid-aligned split;
    # composition is checked on the RK4 realization of the flow
    from .dynamics import rk4_integrate

    ident = flow(u, kernel, fp, 0.0, solver=cfg.solver, dt=cfg.dt)
    record("semigroup_identity", np.array_equal(ident.weights[0], u.weights))
    if cfg.T > 0:
        t1 = max(cfg.dt, np.floor(0.5 * cfg.T / cfg.dt) * cfg.dt)
        if t1 < cfg.T:
            try:
                whole = flow(u, kernel, fp, cfg.T, solver="rk4", dt=cfg.dt)
                first = flow(u, kernel, fp, t1, solver="rk4", dt=cfg.dt)
                second = flow(first.final, kernel, fp, cfg.T - t1, solver="rk4", dt=cfg.dt)
                gap = second.final.add_scaled(-1.0, whole.final).tv_norm()
                record("semigroup_composition", gap <= 1e-6, tv_gap=gap, split_at=t1)
            except NumericError as exc:
                record("semigroup_composition", False, witness=str(exc))

    # reduction equivalences, reported in the {case, max_discrepancy,
    # tolerance, pass} schema as well as the named checks
    reductions: list[dict] = []

    def record_reduction(case, discrepancy, tolerance, passed, **info):
        reductions.append(
            {"case": case, "max_discrepancy": discrepancy, "tolerance": tolerance, "pass": bool(passed)}
        )
        record(case, passed, max_discrepancy=discrepancy, tolerance=tolerance, **info)

    # the finite class system is the same ODE: direct integration must agree
    if not fp.mean_fitness_mortality:
        t_red = min(cfg.T, 10.0) if cfg.T > 0 else 1.0
        try:
            mtraj = rk4_integrate(u, kernel, fp, t_red, cfg.dt)
            fpt = fp.truncated(mtraj.meta["k_tilde"])
            sys = DiscreteSystem.from_measure_problem(kernel, fpt)
            _, xs = integrate_discrete(sys, u.weights, t_red, cfg.dt)
            gap = float(np.max(np.abs(mtraj.weights - xs).sum(axis=1)))
            record_reduction("discrete_reduction", gap, 1e-10, gap <= 1e-10, T=t_red)
        except NumericError as exc:
            record_reduction("discrete_reduction", float("nan"), 1e-10, False, witness=str(exc))

    # frequency-dynamics consistency, at two resolutions (order check)
    if traj is not None and not fp.mean_fitness_mortality and np.all(traj.masses > 0):
        t_fd = min(cfg.T, 1.0)
        try:
            coarse = rk4_integrate(u, kernel, fp, t_fd, cfg.dt)
            fine = rk4_integrate(u, kernel, fp, t_fd, cfg.dt / 2.0)
            if kernel.is_dirac:
                rc = replicator_check(coarse, kernel, fp).max_discrepancy
                rf = replicator_check(fine, kernel, fp).max_discrepancy
                tol = max(1e-12, rc / 2.8)
                record_reduction("replicator_fd", rf, tol, rc <= 1e-10 or rf <= tol, coarse=rc)
            nc = mm_residual(normalized_trajectory(coarse), kernel, fp).max_discrepancy
            nf = mm_residual(normalized_trajectory(fine), kernel, fp).max_discrepancy
            tol = max(1e-12, nc / 2.8)
            record_reduction("normalized_fd", nf, tol, nc <= 1e-10 or nf <= tol, coarse=nc)
        except NumericError as exc:
            record_reduction("normalized_fd", float("nan"), 0.0, False, witness=str(exc))

    passed = all(c["passed"] for c in checks.values())
    report = {"passed": passed, "checks": checks, "reductions": reductions, "seed": cfg.seed}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "verify.json", report)
    return report


# ─── Dirac concentration ─────────────────────────────────────────────


def dirac_limit(cfg: RunConfig, out_dir) -> dict:
    """Track mass concentration onto the fittest class under pure selection.

    Requires a Dirac kernel and a logistic-family fitness (birth a(q),
    mortality floor + b(q) X).  Emits a time series of the mass share in
    the fittest cell and the flat distance between the normalized state and
    the unit atom there, plus trend summaries.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    space, kernel, fp, u = cfg.build()
    if not kernel.is_dirac:
        raise ConfigError("dirac-limit requires the Dirac (pure selection) kernel")
    if fp.family != "logistic":
        raise ConfigError("dirac-limit expects the logistic fitness family")
    a = fp.params["a"]
    b = fp.params["b"]
    floor = fp.params["floor"]
    if np.any(b <= 0):
        raise ConfigError("dirac-limit needs positive density-mortality coefficients")
    ratio_floored = (a - floor) / b
    ratio_raw = a / b
    order = np.argsort(ratio_floored)
    best = int(order[-1])
    tie = bool(len(order) > 1 and ratio_floored[order[-2]] >= ratio_floored[best] - 1e-12)

    traj = flow(u, kernel, fp, cfg.T, solver=cfg.solver, dt=cfg.dt,
                tol=cfg.picard_tol, max_iter=cfg.picard_max_iter, ball_radius=cfg.ball_radius)
    stride = _summary_stride(cfg, traj)
    idx = list(range(0, traj.n_nodes, stride))
    if idx[-1] != traj.n_nodes - 1:
        idx.append(traj.n_nodes - 1)

    target_atom = unit_atom(space, best)
    rows = []
    for k in idx:
        mass = traj.masses[k]
        frac = traj.weights[k, best] / mass if mass > 0 else 0.0
        dist = bl_distance(traj.state(k).normalized(), target_atom) if mass > 0 else float("nan")
        rows.append((traj.times[k], frac, dist, mass))
    with open(out / "concentration.csv", "w", newline="") as fh:
        fh.write("t,mass_fraction,bl_to_atom,total_mass\n")
        for t, frac, dist, mass in rows:
            fh.write(",".join(format(v, ".17g") for v in (t, frac, dist, mass)) + "\n")

    fracs = np.array([r[1] for r in rows])
    dists = np.array([r[2] for r in rows])
    reach = next((rows[i][0] for i in range(len(rows)) if fracs[i] >= 0.95), None)
    report = {
        "tie": tie,
        "fittest_index_floored": best,
        "fittest_index_unfloored": int(np.argmax(ratio_raw)),
        "fittest_point": space.points[best].tolist(),
        "target_mass": float(ratio_floored[best]),
        "final_mass": traj.masses[-1],
        "final_fraction": float(fracs[-1]),
        "final_bl_to_atom": float(dists[-1]),
        "t_fraction_reaches_095": reach,
        "fraction_trend_monotone": bool(np.all(np.diff(fracs) >= -1e-9)),
        "bl_trend_monotone": bool(np.all(np.diff(dists) <= 1e-9)),
    }
    if tie:
        shares = (traj.weights[-1] / traj.masses[-1]).tolist()
        report["final_shares"] = shares
        with open(out / "shares.csv", "w", newline="") as fh:
            fh.write("index,share\n")
            for i, s in enumerate(shares):
                fh.write(f"{i},{format(s, '.17g')}\n")
    _write_json(out / "dirac_limit.json", report)
    return report


# ─── mutation -> selection continuity ────────────────────────────────


def mutation_limit(cfg: RunConfig, sigmas, out_dir) -> dict:
    """Compare Gaussian-kernel runs against the pure-selection baseline.

    For each sigma in the (decreasing) list, runs the config with a Gaussian
    kernel of that width and measures the flat distance to the Dirac-kernel
    run at sampled times; the report checks that the final-time distance is
    nonincreasing along the list (5% slack).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise ConfigError("mutation-limit needs at least one sigma")
    space, _, fp, u = cfg.build()

    kw = dict(solver=cfg.solver, dt=cfg.dt, tol=cfg.picard_tol,
              max_iter=cfg.picard_max_iter, ball_radius=cfg.ball_radius)
    from .kernels import dirac_kernel

    base = flow(u, dirac_kernel(space), fp, cfg.T, **kw)

    def run_sigma(sigma: float) -> Trajectory:
        return flow(u, gaussian_kernel(space, sigma), fp, cfg.T, **kw)

    max_workers = max(1, int(os.environ.get("EVOMEASURE_THREADS", "1")))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(run_sigma, sigmas))
    else:
        runs = [run_sigma(s) for s in sigmas]

    stride = _summary_stride(cfg, base)
    idx = list(range(0, base.n_nodes, stride))
    if idx[-1] != base.n_nodes - 1:
        idx.append(base.n_nodes - 1)
    table = np.empty((len(idx), len(sigmas)))
    for c, traj in enumerate(runs):
        for r, k in enumerate(idx):
            table[r, c] = bl_distance(traj.state(k), base.state(k))
    with open(out / "mutation_limit.csv", "w", newline="") as fh:
        fh.write("t," + ",".join(f"sigma_{s:g}" for s in sigmas) + "\n")
        for r, k in enumerate(idx):
            fh.write(format(base.times[k], ".17g") + ","
                     + ",".join(format(v, ".17g") for v in table[r]) + "\n")

    final = table[-1]
    nonincreasing = all(final[i + 1] <= final[i] * 1.05 for i in range(len(sigmas) - 1))
    strictly = all(final[i + 1] < final[i] for i in range(len(sigmas) - 1))
    report = {
        "sigmas": sigmas,
        "final_distances": final.tolist(),
        "nonincreasing_with_slack": bool(nonincreasing),
        "strictly_decreasing": bool(strictly),
        "passed": bool(nonincreasing),
    }
    _write_json(out / "mutation_limit.json", report)
    return report
