"""The measure-valued vector field and its two solvers.

The dynamics on a measure mu over the strategy space is

    d/dt mu(E) = int_Q f1(mu(Q), q_hat) gamma(q_hat)(E) dmu(q_hat)
                 - int_E f2(mu(Q), q) dmu(q),

semi-discretized over the support points into a coupled ODE on the weight
vector.  Two independent solvers are provided:

  * ``rk4_integrate``: classical fixed-step RK4 on the weights;
  * ``picard_solve``: the fixed-point iteration of the integral operator

        [S alpha](t) = e^(-int_0^t f2~) du
                       + int_0^t int_Q f1~(alpha(s)(Q), q_hat)
                         gbar_{s,t,alpha}(q_hat) d alpha(s)(q_hat) ds,

    where gbar is the mutation kernel discounted by accumulated mortality
    between s and t.  On a window b chosen from the truncation constants, S
    is a strict contraction and the iteration converges to the solution.

``flow`` composes either solver into a global trajectory on [0, T]; the
Picard route re-derives its window from the current mass before each window
so the contraction estimate stays valid as the population grows.

Time quadrature throughout is composite trapezoid on the node grid, with
linear interpolation of the mass path inside partial end cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NumericError
from .fitness import FitnessPair, TruncationConstants, estimate_constants
from .kernels import MutationKernel
from .measures import MeasureVec
from .space import StrategySpace, _frozen

# hard failure threshold for negative weights, relative to max(1, TV)
NEG_ABORT = 1e-8


@dataclass(frozen=True)
class MassPath:
    """A sampled total-mass path t -> mu(t)(Q), linearly interpolated."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass
class Trajectory:
    """Time grid plus one measure per node; what solvers produce.

    ``masses`` caches mu(t_k)(Q) with the same summation used by
    ``MeasureVec.total_mass``.  States are nonnegative within the round-off
    tolerance; construction rejects anything worse.
    """

    space: StrategySpace
    times: np.ndarray
    weights: np.ndarray
    solver: str = ""
    meta: dict = field(default_factory=dict)
    masses: np.ndarray = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape != (len(t), self.space.n):
            raise ValueError(f"weights must be ({len(t)}, {self.space.n}), got {w.shape}")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise NumericError("trajectory contains non-finite weights")
        tv = np.abs(w).sum(axis=1)
        tol = 1e-12 * np.maximum(1.0, tv)
        worst = w.min(axis=1)
        if np.any(worst < -tol):
            k = int(np.argmin(worst + tol))
            raise NumericError(
                f"trajectory state at t={t[k]} has weight {worst[k]}, below -tol_neg"
            )
        self.times = _frozen(t)
        self.weights = _frozen(w)
        self.masses = _frozen(np.array([float(np.sum(row)) for row in w]))

    @property
    def n_nodes(self) -> int:
        return len(self.times)

    def state(self, k: int) -> MeasureVec:
        return MeasureVec(self.space, self.weights[k].copy())

    @property
    def initial(self) -> MeasureVec:
        return self.state(0)

    @property
    def final(self) -> MeasureVec:
        return self.state(self.n_nodes - 1)

    def mass_path(self) -> MassPath:
        return MassPath(self.times, self.masses)

    def sup_tv_distance(self, other: "Trajectory") -> float:
        """Max over shared nodes of TV(self(t_k) - other(t_k))."""
        if not np.allclose(self.times, other.times, atol=1e-12):
            raise ValueError("trajectories live on different time grids")
        return float(np.max(np.abs(self.weights - other.weights).sum(axis=1)))

    def mass_bound_excess(self, m_f1: float) -> float:
        """Largest relative violation of mu(t)(Q) <= mu(0)(Q) e^(M_f1 t).

        Nonpositive means the exponential a-priori mass bound holds along
        the whole trajectory.
        """
        bound = self.masses[0] * np.exp(m_f1 * self.times)
        scale = np.maximum(bound, 1e-300)
        return float(np.max(self.masses / scale - 1.0))

    def write_csv(self, path) -> None:
        """Long-form ``t,index,weight`` rows, 17 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write("t,index,weight\n")
            for t, row in zip(self.times, self.weights):
                ts = format(t, ".17g")
                for i, w in enumerate(row):
                    fh.write(f"{ts},{i},{format(w, '.17g')}\n")

    def write_summary_csv(self, path, stride: int = 1) -> None:
        """``t,total_mass,bl_to_final`` rows (flat distance to the end state)."""
        from .measures import bl_distance

        final = self.final
        idx = list(range(0, self.n_nodes, max(1, stride)))
        if idx[-1] != self.n_nodes - 1:
            idx.append(self.n_nodes - 1)
        with open(path, "w", newline="") as fh:
            fh.write("t,total_mass,bl_to_final\n")
            for k in idx:
                d = bl_distance(self.state(k), final)
                fh.write(
                    f"{format(self.times[k], '.17g')},"
                    f"{format(self.masses[k], '.17g')},"
                    f"{format(d, '.17g')}\n"
                )


# ─── the vector field ────────────────────────────────────────────────


def vector_field(m: MeasureVec, kernel: MutationKernel, fp: FitnessPair) -> MeasureVec:
    """F(mu, gamma): births pushed through the kernel minus deaths.

    weights_out[i] = sum_j f1(X, q_j) row_j[i] w_j - f2(X, q_i) w_i with
    X = mu(Q).  A signed measure in general.
    """
    _check_shared_space(m.space, kernel, fp)
    return MeasureVec(m.space, _field_weights(m.weights, kernel, fp))


def _field_weights(w: np.ndarray, kernel: MutationKernel, fp: FitnessPair) -> np.ndarray:
    X = float(np.sum(w))
    births = kernel.push_births(fp.f1(X) * w)
    if fp.mean_fitness_mortality:
        fbar = float(np.dot(fp.f1(X), w)) / X if X != 0.0 else 0.0
        deaths = fbar * w
    else:
        deaths = fp.f2(X) * w
    return births - deaths


def _check_shared_space(space: StrategySpace, kernel: MutationKernel, fp: FitnessPair) -> None:
    if not (space.same_support(kernel.space) and space.same_support(fp.space)):
        raise ValueError("measure, kernel and fitness must share one strategy space")


# ─── RK4 ─────────────────────────────────────────────────────────────


def rk4_integrate(
    u: MeasureVec,
    kernel: MutationKernel,
    fp: FitnessPair,
    T: float,
    dt: float,
    k_tilde: float | None = None,
) -> Trajectory:
    """Classical fixed-step RK4 on the weight vector over [0, T].

    The pair is truncated at a level above the a-priori mass bound
    u(Q) e^(M_f1 T) unless the caller already truncated it.  Weights that
    dip below zero by round-off are clipped; anything below
    -1e-8 max(1, TV) aborts with the offending step (step size too large).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    _check_shared_space(u.space, kernel, fp)
    if not u.is_nonnegative():
        raise ValueError("initial measure must be nonnegative")

    m_f1 = float(np.max(fp.f1(0.0))) if fp.space.n else 0.0
    if fp.k_tilde is None:
        if k_tilde is None:
            k_tilde = max(1.0, u.total_mass()) * math.exp(min(m_f1 * T, 60.0)) * 1.1 + 1.0
        fp = fp.truncated(k_tilde)
    meta = {"dt": dt, "M_f1": m_f1, "k_tilde": fp.k_tilde}

    if T == 0.0:
        return Trajectory(u.space, np.array([0.0]), u.weights[None, :].copy(), solver="rk4",
                          meta=meta)

    n_steps = max(1, math.ceil(T / dt - 1e-9))
    times = np.minimum(dt * np.arange(n_steps + 1), T)
    times[-1] = T
    out = np.empty((n_steps + 1, u.space.n))
    out[0] = u.weights
    w = u.weights.copy()
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        k1 = _field_weights(w, kernel, fp)
        k2 = _field_weights(w + 0.5 * h * k1, kernel, fp)
        k3 = _field_weights(w + 0.5 * h * k2, kernel, fp)
        k4 = _field_weights(w + h * k3, kernel, fp)
        w = w + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(w)):
            raise NumericError(f"RK4 produced non-finite weights at step {k + 1} (t={times[k + 1]})")
        w = _enforce_nonneg(w, k + 1, times[k + 1])
        out[k + 1] = w
    return Trajectory(u.space, times, out, solver="rk4", meta=meta)


def _enforce_nonneg(w: np.ndarray, step: int, t: float) -> np.ndarray:
    lowest = float(w.min())
    if lowest >= 0.0:
        return w
    tv = float(np.abs(w).sum())
    if lowest < -NEG_ABORT * max(1.0, tv):
        raise NumericError(
            f"weight {lowest} at step {step} (t={t}) is below the negativity "
            f"tolerance; the step size is too large"
        )
    return np.maximum(w, 0.0)


# ─── discounted kernel ───────────────────────────────────────────────


def _mortality_integrals(fp: FitnessPair, s: float, t: float, path: MassPath) -> np.ndarray:
    """int_s^t f2(mass(tau), q_i) dtau for every support point.

    Composite trapezoid over the path nodes inside [s, t]; the end cells use
    linearly interpolated masses.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if s == t:
        return np.zeros(fp.space.n)
    inner = path.times[(path.times > s) & (path.times < t)]
    taus = np.concatenate([[s], inner, [t]])
    masses = np.interp(taus, path.times, path.values)
    f2_tab = np.stack([fp.f2(x) for x in masses])
    return np.trapezoid(f2_tab, x=taus, axis=0)


def survival_factor(fp: FitnessPair, s: float, t: float, q, path: MassPath) -> float:
    """exp(-int_s^t f2(mass(tau), q) dtau): survival of a q-offspring from s to t."""
    i = q if isinstance(q, (int, np.integer)) else fp.space.index_of(q)
    return float(np.exp(-_mortality_integrals(fp, s, t, path)[i]))


def gamma_bar(
    fp: FitnessPair, kernel: MutationKernel, s: float, t: float, j: int, path: MassPath
) -> MeasureVec:
    """gamma(q_hat_j) discounted by mortality accumulated between s and t.

    The net proportion of q_hat_j's offspring still alive at t: nonnegative
    with total mass at most 1.
    """
    row = kernel.apply(j)
    factors = np.exp(-_mortality_integrals(fp, s, t, path))
    return MeasureVec(fp.space, row.weights * factors)


# ─── Picard fixed point ──────────────────────────────────────────────


def picard_operator(
    alpha: Trajectory, u: MeasureVec, kernel: MutationKernel, fp: FitnessPair
) -> Trajectory:
    """One application of the integral operator S to a candidate trajectory.

    ``fp`` must already be truncated.  Output node k carries

        e^(-I_k) * (u + trapz_{s <= t_k} e^(+I_s) births(alpha(s)) ds),

    where I_k[i] = int_0^{t_k} f2~(alpha(tau)(Q), q_i) dtau and
    births(alpha(s)) = sum_j f1~(alpha(s)(Q), q_hat_j) gamma(q_hat_j) alpha_j(s);
    this is exactly the trapezoid discretization of S with the discount
    folded in.  [S alpha](0) = u exactly.
    """
    if fp.k_tilde is None:
        raise ValueError("picard_operator requires a truncated fitness pair")
    _check_shared_space(alpha.space, kernel, fp)
    if not np.allclose(alpha.weights[0], u.weights, atol=1e-12):
        raise ValueError("candidate trajectory must start at the initial measure")
    times = alpha.times
    f2_tab = np.stack([fp.f2(x) for x in alpha.masses])
    cumint = cumulative_trapezoid(f2_tab, x=times, axis=0, initial=0.0)
    births = np.stack(
        [kernel.push_births(fp.f1(x) * w) for x, w in zip(alpha.masses, alpha.weights)]
    )
    integrand = np.exp(cumint) * births
    accum = cumulative_trapezoid(integrand, x=times, axis=0, initial=0.0)
    out = np.exp(-cumint) * (u.weights[None, :] + accum)
    out[0] = u.weights
    return Trajectory(alpha.space, times.copy(), out, solver="picard_operator", meta={})


def picard_solve(
    u: MeasureVec,
    kernel: MutationKernel,
    fp: FitnessPair,
    constants: TruncationConstants,
    dt: float,
    tol: float = 1e-10,
    max_iter: int = 30,
    window: float | None = None,
) -> Trajectory:
    """Iterate alpha <- S alpha from the constant guess until sup-TV change < tol.

    ``constants`` supplies the contraction window b and the truncation level;
    ``window`` may shorten (never lengthen) the solved interval.  The
    returned trajectory records the residuals and observed contraction
    ratios per iteration.
    """
    if fp.mean_fitness_mortality:
        raise ValueError("mean-fitness mortality is outside the contraction theory; use RK4")
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = constants.b if window is None else float(window)
    if b > constants.b * (1 + 1e-12):
        raise ValueError(f"window {b} exceeds the contraction window b={constants.b}")
    if b <= 0:
        raise ValueError("window must be positive")
    n_sub = max(1, int(round(b / dt)))
    times = np.linspace(0.0, b, n_sub + 1)
    fpt = fp.truncated(constants.k_tilde)

    alpha = Trajectory(
        u.space, times, np.tile(u.weights, (n_sub + 1, 1)), solver="picard", meta={}
    )
    residuals: list[float] = []
    ratios: list[float] = []
    for it in range(max_iter):
        new = picard_operator(alpha, u, kernel, fpt)
        residual = alpha.sup_tv_distance(new)
        if residuals:
            ratios.append(residual / residuals[-1] if residuals[-1] > 0 else 0.0)
        residuals.append(residual)
        alpha = new
        if residual < tol:
            alpha.solver = "picard"
            alpha.meta = {
                "iterations": it + 1,
                "residuals": residuals,
                "contraction_ratios": ratios,
                "constants": constants.to_dict(),
                "window": b,
                "dt": dt,
                "tol": tol,
            }
            return alpha
        if len(ratios) >= 3 and all(r >= 1.0 for r in ratios[-3:]):
            raise NumericError(
                f"Picard iteration is not contracting (last ratios {ratios[-3:]}); "
                f"the truncation constants are likely wrong for this problem"
            )
    raise NumericError(
        f"Picard iteration did not reach tol={tol} in {max_iter} iterations "
        f"(last residual {residuals[-1]})"
    )


def flow(
    u: MeasureVec,
    kernel: MutationKernel,
    fp: FitnessPair,
    T: float,
    solver: str = "rk4",
    dt: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
    ball_radius: float | None = None,
    k_tilde: float | None = None,
) -> Trajectory:
    """The global semiflow phi(t; u, gamma) on [0, T].

    ``rk4`` integrates in one pass.  ``picard`` solves consecutive
    contraction windows, re-estimating the truncation constants from the
    mass at each window start, and concatenates the pieces.  Windows are
    aligned to multiples of dt so both solvers share node times.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    _check_shared_space(u.space, kernel, fp)
    if dt is None:
        dt = T / 2000.0 if T > 0 else 1.0
    if T == 0.0:
        return Trajectory(u.space, np.array([0.0]), u.weights[None, :].copy(), solver=solver)

    if solver == "rk4":
        return rk4_integrate(u, kernel, fp, T, dt, k_tilde=k_tilde)
    if solver != "picard":
        raise ValueError(f"unknown solver {solver!r}")
    if fp.mean_fitness_mortality:
        raise ValueError("mean-fitness mortality is outside the contraction theory; use RK4")

    times_acc = [np.array([0.0])]
    weights_acc = [u.weights[None, :].copy()]
    window_meta = []
    breaks = []
    current = u
    t_done = 0.0
    while t_done < T - 1e-12:
        mass = current.total_mass()
        a = ball_radius if ball_radius is not None else max(1.0, mass)
        constants = estimate_constants(fp, fp.space, mass, a)
        m = int(math.floor(constants.b / dt + 1e-12))
        if m < 1:
            raise NumericError(
                f"dt={dt} exceeds the contraction window b={constants.b}; reduce dt"
            )
        window = min(m * dt, T - t_done)
        piece = picard_solve(
            current, kernel, fp, constants, dt, tol=tol, max_iter=max_iter, window=window
        )
        times_acc.append(t_done + piece.times[1:])
        weights_acc.append(piece.weights[1:])
        window_meta.append(
            {
                "t_start": t_done,
                "window": window,
                "iterations": piece.meta["iterations"],
                "contraction_ratios": piece.meta["contraction_ratios"],
                "constants": piece.meta["constants"],
            }
        )
        t_done += window
        current = piece.final
        breaks.append(sum(len(t) for t in times_acc) - 1)
    return Trajectory(
        u.space,
        np.concatenate(times_acc),
        np.vstack(weights_acc),
        solver="picard",
        meta={"dt": dt, "tol": tol, "windows": window_meta, "window_breaks": breaks[:-1]},
    )


# ─── consistency diagnostics ─────────────────────────────────────────


def finite_difference_residual(
    traj: Trajectory, kernel: MutationKernel, fp: FitnessPair, skip: tuple[int, ...] = ()
) -> float:
    """Max TV gap between central differences of the states and the field.

    Checks that the trajectory solves the differential form: at interior
    nodes, TV((w[k+1]-w[k-1])/(2 dt) - F(w[k])).  Nodes in ``skip`` (e.g.
    window seams of a stitched Picard run) are excluded.
    """
    worst = 0.0
    skipset = set(skip)
    for k in range(1, traj.n_nodes - 1):
        if k in skipset:
            continue
        h1 = traj.times[k] - traj.times[k - 1]
        h2 = traj.times[k + 1] - traj.times[k]
        if abs(h1 - h2) > 1e-12 * max(h1, h2):
            continue
        deriv = (traj.weights[k + 1] - traj.weights[k - 1]) / (h1 + h2)
        f = _field_weights(traj.weights[k], kernel, fp)
        worst = max(worst, float(np.abs(deriv - f).sum()))
    return worst
