"""Classical special cases of the measure dynamics, as independent oracles.

Each reduction is integrated directly (its own RK4 loop, deliberately not
sharing code with the measure solvers) so the measure model can be verified
against it:

  * finite class systems x_i(t) = mu({q_i}) with a stochastic mixing matrix,
  * the replicator-mutator equation on the simplex,
  * the normalized (frequency) dynamics and the density-dependent replicator
    equation obtained under a pure-selection kernel,
  * the quasi-species variant where mortality is the average birth rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory
from .fitness import FitnessPair, mean_fitness_pair
from .kernels import MutationKernel
from .measures import MeasureVec


@dataclass(frozen=True)
class DiscreteSystem:
    """Finite class model: n atoms, mixing matrix, rates restricted to atoms.

    ``P[i][j]`` is the share of class j's offspring landing in class i, so
    each column is a probability vector (columns are sources; this is the
    transpose of the kernel's row layout).
    """

    points: np.ndarray
    P: np.ndarray
    fp: FitnessPair

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n):
            raise ValueError("P must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=0) - 1.0) > 1e-10):
            raise ValueError("columns of P must be probability vectors")
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @staticmethod
    def from_measure_problem(kernel: MutationKernel, fp: FitnessPair) -> "DiscreteSystem":
        """View a kernel/fitness pair on a finite support as a class system."""
        n = kernel.space.n
        rows = np.eye(n) if kernel.is_dirac else kernel.rows
        return DiscreteSystem(points=kernel.space.points, P=rows.T.copy(), fp=fp)


def discrete_rhs(x: np.ndarray, sys: DiscreteSystem) -> np.ndarray:
    """dx_i/dt = sum_j f1(X, q_j) P[i][j] x_j - f2(X, q_i) x_i, X = sum x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"state must have {sys.n} entries")
    X = float(np.sum(x))
    return sys.P @ (sys.fp.f1(X) * x) - sys.fp.f2(X) * x


def integrate_discrete(sys: DiscreteSystem, x0, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Plain RK4 on the class system; the oracle side of reduction checks."""
    x = np.asarray(x0, dtype=float).copy()
    n_steps = max(1, int(round(T / dt)))
    times = np.linspace(0.0, T, n_steps + 1)
    out = np.empty((n_steps + 1, sys.n))
    out[0] = x
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        k1 = discrete_rhs(x, sys)
        k2 = discrete_rhs(x + 0.5 * h * k1, sys)
        k3 = discrete_rhs(x + 0.5 * h * k2, sys)
        k4 = discrete_rhs(x + h * k3, sys)
        x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[k + 1] = x
    return times, out


# ─── replicator-mutator on the simplex ───────────────────────────────


def replicator_mutator_rhs(x: np.ndarray, f, Q: np.ndarray) -> np.ndarray:
    """dx_i/dt = sum_j x_j f_j(x) Q_ij - phi(x) x_i with phi = sum_j f_j x_j.

    ``Q[i][j]`` is the share of class j mutating into class i (columns sum
    to 1), and ``f`` is an (n,) fitness vector or a callable x -> (n,).
    The state must sit on the simplex within 1e-9; the right-hand side then
    sums to zero identically.
    """
    x = np.asarray(x, dtype=float)
    if abs(float(np.sum(x)) - 1.0) > 1e-9:
        raise ValueError(f"state is off the simplex: sum = {np.sum(x)!r}")
    fv = np.asarray(f(x), dtype=float) if callable(f) else np.asarray(f, dtype=float)
    phi = float(np.dot(fv, x))
    return np.asarray(Q, dtype=float) @ (fv * x) - phi * x


def integrate_replicator_mutator(x0, f, Q, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 for the simplex dynamics; renormalization-free (mass is conserved)."""
    x = np.asarray(x0, dtype=float).copy()
    n_steps = max(1, int(round(T / dt)))
    times = np.linspace(0.0, T, n_steps + 1)
    out = np.empty((n_steps + 1, len(x)))
    out[0] = x
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        k1 = replicator_mutator_rhs(x, f, Q)
        k2 = replicator_mutator_rhs(x + 0.5 * h * k1, f, Q)
        k3 = replicator_mutator_rhs(x + 0.5 * h * k2, f, Q)
        k4 = replicator_mutator_rhs(x + h * k3, f, Q)
        x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[k + 1] = x
    return times, out


# ─── normalized (frequency) dynamics ─────────────────────────────────


def normalized_trajectory(traj: Trajectory) -> Trajectory:
    """Scale every node to unit mass: P(t) = mu(t) / mu(t)(Q).

    The source masses are kept in the metadata because the frequency
    dynamics still depends on the unnormalized total.
    """
    if np.any(traj.masses <= 0.0):
        k = int(np.argmin(traj.masses))
        raise ValueError(f"cannot normalize: mass {traj.masses[k]} at t={traj.times[k]}")
    weights = traj.weights / traj.masses[:, None]
    meta = dict(traj.meta)
    meta["source_masses"] = traj.masses.copy()
    return Trajectory(traj.space, traj.times.copy(), weights, solver=traj.solver, meta=meta)


def mm_rhs(p: np.ndarray, X: float, kernel: MutationKernel, fp: FitnessPair) -> np.ndarray:
    """Right-hand side of the frequency dynamics, exactly as stated.

    dP_i/dt = sum_j [f1(X,q_j) K[j][i] - (sum_q f1(X,q) p_q) P_i] p_j
              - [f2(X,q_i) - sum_q f2(X,q) p_q] p_i,

    with X the unnormalized total mass driving the density dependence.
    """
    p = np.asarray(p, dtype=float)
    f1 = fp.f1(X)
    f2 = fp.f2(X)
    fbar1 = float(np.dot(f1, p))
    fbar2 = float(np.dot(f2, p))
    total = float(np.sum(p))
    return kernel.push_births(f1 * p) - fbar1 * p * total - (f2 - fbar2) * p


@dataclass
class FdReport:
    """Finite-difference consistency of a trajectory with a stated RHS."""

    max_discrepancy: float
    n_nodes_checked: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "max_discrepancy": self.max_discrepancy,
            "n_nodes_checked": self.n_nodes_checked,
            **self.details,
        }


def mm_residual(traj: Trajectory, kernel: MutationKernel, fp: FitnessPair) -> FdReport:
    """Central-difference check of the normalized dynamics against ``mm_rhs``.

    ``traj`` must be a normalized trajectory carrying its source masses.
    """
    masses = traj.meta.get("source_masses")
    if masses is None:
        raise ValueError("trajectory was not produced by normalized_trajectory")
    worst = 0.0
    checked = 0
    for k in range(1, traj.n_nodes - 1):
        h = traj.times[k + 1] - traj.times[k - 1]
        deriv = (traj.weights[k + 1] - traj.weights[k - 1]) / h
        rhs = mm_rhs(traj.weights[k], float(masses[k]), kernel, fp)
        worst = max(worst, float(np.abs(deriv - rhs).sum()))
        checked += 1
    return FdReport(max_discrepancy=worst, n_nodes_checked=checked)


def replicator_check(traj: Trajectory, kernel: MutationKernel, fp: FitnessPair) -> FdReport:
    """Verify the pure-selection frequency dynamics is the replicator equation.

    With a Dirac kernel, dP/dt(E) = int_E [f(X,q) - fbar] dP where
    f = f1 - f2 and fbar = int_Q f dP; the report carries the max TV gap
    between central differences of the normalized states and that RHS.
    """
    if not kernel.is_dirac:
        raise ValueError("the replicator reduction is only defined for the Dirac kernel")
    ntraj = normalized_trajectory(traj)
    masses = ntraj.meta["source_masses"]
    worst = 0.0
    checked = 0
    for k in range(1, ntraj.n_nodes - 1):
        h = ntraj.times[k + 1] - ntraj.times[k - 1]
        deriv = (ntraj.weights[k + 1] - ntraj.weights[k - 1]) / h
        X = float(masses[k])
        p = ntraj.weights[k]
        fvals = fp.f1(X) - fp.f2(X)
        rhs = (fvals - float(np.dot(fvals, p))) * p
        worst = max(worst, float(np.abs(deriv - rhs).sum()))
        checked += 1
    return FdReport(max_discrepancy=worst, n_nodes_checked=checked)


# ─── quasi-species run ───────────────────────────────────────────────


def quasispecies_run(
    u: MeasureVec,
    kernel: MutationKernel,
    f1,
    T: float,
    dt: float,
    solver: str = "rk4",
) -> Trajectory:
    """Replicator-mutator dynamics with average-fitness mortality.

    The mortality equals the population mean of f1, which conserves total
    mass exactly (RK4 preserves linear invariants), so the returned
    normalized trajectory drifts off the simplex only by round-off.  Only
    the direct RK4 solver is legal here; the contraction theory does not
    cover state-dependent mortality.
    """
    if solver != "rk4":
        raise ValueError("quasi-species dynamics is outside the contraction theory; use rk4")
    from .dynamics import rk4_integrate

    fp = f1 if isinstance(f1, FitnessPair) else mean_fitness_pair(u.space, f1)
    if not fp.mean_fitness_mortality:
        raise ValueError("quasispecies_run requires an average-fitness mortality pair")
    traj = rk4_integrate(u, kernel, fp, T, dt)
    return normalized_trajectory(traj)
