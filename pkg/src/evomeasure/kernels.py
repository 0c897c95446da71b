"""Selection-mutation kernels: the family gamma(q_hat) in P(Q).

Three concrete guises share one interface:

  * Dirac: offspring inherit the parent strategy exactly (pure selection),
  * Matrix: an explicit row-stochastic matrix over the support points,
  * Density: a probability density p(q, q_hat), discretized per source row.

Rows are indexed by the source point q_hat_j; row j, column i holds
gamma(q_hat_j)({q_i}).  Kernels are immutable after construction and safe to
share between solver threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import MeasureVec, bl_distance
from .space import StrategySpace, _frozen

TOL_ROW = 1e-10


@dataclass(frozen=True)
class MutationKernel:
    """gamma: Q -> P(Q) on a fixed discretized strategy space.

    For the Dirac variant ``rows`` is None and every source maps to the unit
    atom at itself.
    """

    space: StrategySpace
    variant: str
    rows: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in ("dirac", "matrix", "density"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "dirac":
            if self.rows is not None:
                raise ValueError("dirac kernel carries no rows")
            return
        rows = np.asarray(self.rows, dtype=float)
        n = self.space.n
        if rows.shape != (n, n):
            raise ValueError(f"kernel matrix must be {n}x{n}, got {rows.shape}")
        if np.any(rows < 0):
            raise ValueError("kernel rows must be nonnegative")
        sums = rows.sum(axis=1)
        bad = np.abs(sums - 1.0) > TOL_ROW
        if np.any(bad):
            j = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"kernel row {j} sums to {sums[j]!r}, not 1 within {TOL_ROW}")
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def is_dirac(self) -> bool:
        return self.variant == "dirac"

    def apply(self, j: int) -> MeasureVec:
        """gamma(q_hat_j) as a probability measure on the space."""
        n = self.space.n
        if not 0 <= j < n:
            raise IndexError(f"source index {j} out of range for {n} points")
        if self.is_dirac:
            w = np.zeros(n)
            w[j] = 1.0
            return MeasureVec(self.space, w)
        return MeasureVec(self.space, self.rows[j].copy())

    def push_births(self, v: np.ndarray) -> np.ndarray:
        """Redistribute per-source birth output v_j onto targets.

        Returns sum_j v[j] * row_j, the birth part of the vector field.
        """
        if self.is_dirac:
            return v
        return self.rows.T @ v

    def continuity_modulus(self) -> float:
        """Discrete Lipschitz estimate of q_hat -> gamma(q_hat) in the flat metric.

        Max over nearest-neighbour source pairs of
        bl_distance(row_j, row_j') / d(q_hat_j, q_hat_j').
        """
        n = self.space.n
        if n < 2:
            return 0.0
        dist = self.space.distance_matrix()
        np.fill_diagonal(dist, np.inf)
        worst = 0.0
        for j in range(n):
            jn = int(np.argmin(dist[j]))
            num = bl_distance(self.apply(j), self.apply(jn))
            worst = max(worst, num / dist[j, jn])
        return worst

    def to_dict(self) -> dict:
        if self.is_dirac:
            return {"variant": "dirac"}
        return {"variant": "matrix", "rows": self.rows.tolist()}


def dirac_kernel(space: StrategySpace) -> MutationKernel:
    """Pure selection: gamma(q_hat) = delta_{q_hat}."""
    return MutationKernel(space, "dirac")


def matrix_kernel(space: StrategySpace, rows) -> MutationKernel:
    """Explicit row-stochastic kernel; rows are validated on construction."""
    return MutationKernel(space, "matrix", rows=np.asarray(rows, dtype=float))


def kernel_from_density(space: StrategySpace, p) -> MutationKernel:
    """Discretize a density p(q, q_hat) into a row-stochastic kernel.

    Row j is proportional to p(q_i, q_hat_j) * cell_volumes[i], renormalized
    to sum exactly to 1 so that gamma(q_hat_j) stays in P(Q) even when the
    density is truncated by the compact space.  A row whose quadrature
    vanishes falls back to the Dirac row at q_hat_j.
    """
    n = space.n
    rows = np.empty((n, n))
    for j in range(n):
        qhat = space.points[j]
        vals = np.array([p(q, qhat) for q in space.points], dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            i = int(np.argmin(vals))
            raise ValueError(
                f"density is negative or non-finite at (q={space.points[i]}, q_hat={qhat})"
            )
        row = vals * space.cell_volumes
        s = row.sum()
        if s > 0:
            rows[j] = row / s
        else:
            rows[j] = 0.0
            rows[j, j] = 1.0
    return MutationKernel(space, "density", rows=rows, meta={"source": "density"})


def gaussian_kernel(space: StrategySpace, sigma: float) -> MutationKernel:
    """Gaussian mutation density centered at the parent, truncated to Q."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    inv = 1.0 / (2.0 * sigma * sigma)

    def p(q, qhat):
        return float(np.exp(-inv * np.sum((q - qhat) ** 2)))

    k = kernel_from_density(space, p)
    return MutationKernel(space, "density", rows=k.rows, meta={"source": "gaussian", "sigma": sigma})


def uniform_kernel(space: StrategySpace) -> MutationKernel:
    """Offspring strategy uniform over Q regardless of the parent."""
    row = space.cell_volumes / space.volume()
    rows = np.tile(row, (space.n, 1))
    return MutationKernel(space, "density", rows=rows, meta={"source": "uniform"})


def kernel_from_config(cfg: dict, space: StrategySpace) -> MutationKernel:
    """Build a kernel from its JSON config form.

    Accepted forms: {"variant":"dirac"} | {"variant":"matrix","rows":[...]}
    | {"variant":"gaussian","sigma":s} | {"variant":"uniform"}.
    """
    variant = cfg.get("variant")
    if variant == "dirac":
        return dirac_kernel(space)
    if variant == "matrix":
        return matrix_kernel(space, cfg["rows"])
    if variant == "gaussian":
        return gaussian_kernel(space, float(cfg["sigma"]))
    if variant == "uniform":
        return uniform_kernel(space)
    raise ValueError(f"unknown kernel variant {variant!r}")
