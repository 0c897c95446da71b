"""Finite signed measures on a discretized strategy space.

A measure is a weight per support point: ``weights[i] = mu(cell_i)``.  For a
gridded density x(q), the density value times the cell volume is pre-folded
into the weight, so atoms and densities share one code path.

The weak* topology is proxied by the bounded-Lipschitz (flat) metric,
computed exactly on the finite joint support as a linear program over the
test-function values f(q_i) with |f| <= 1 and |f(q_i)-f(q_j)| <= d(q_i,q_j).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .space import StrategySpace, _frozen


@dataclass(frozen=True)
class MeasureVec:
    """A finite signed measure with finite support.

    Attributes:
        space: the StrategySpace carrying the support points.
        weights: (n,) array, weights[i] = mu({cell_i}).
    """

    space: StrategySpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.space.n,):
            raise ValueError(
                f"weights shape {w.shape} does not match space with {self.space.n} points"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", _frozen(w))

    # -- scalar summaries ---------------------------------------------------

    def total_mass(self) -> float:
        """mu(Q): the signed sum of all weights."""
        return float(np.sum(self.weights))

    def tv_norm(self) -> float:
        """Total variation norm: sum of absolute weights."""
        return float(np.sum(np.abs(self.weights)))

    def tol_neg(self) -> float:
        """Absolute slack below zero tolerated by nonnegativity checks."""
        return 1e-12 * max(1.0, self.tv_norm())

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.weights >= -self.tol_neg()))

    # -- algebra --------------------------------------------------------------

    def pair(self, f) -> float:
        """<mu, f> = sum_i f(q_i) * weights[i].

        ``f`` is either a callable on points or an (n,) array of values.
        """
        if callable(f):
            vals = np.array([f(q) for q in self.space.points], dtype=float)
        else:
            vals = np.asarray(f, dtype=float)
            if vals.shape != self.weights.shape:
                raise ValueError("test-function values must match the support size")
        return float(np.dot(vals, self.weights))

    def add_scaled(self, c: float, other: "MeasureVec") -> "MeasureVec":
        """Return the measure with weights ``self.weights + c * other.weights``."""
        if not self.space.same_support(other.space):
            raise ValueError("measures live on different spaces; merge supports first")
        return MeasureVec(self.space, self.weights + c * other.weights)

    def scaled(self, c: float) -> "MeasureVec":
        return MeasureVec(self.space, c * self.weights)

    def normalized(self) -> "MeasureVec":
        m = self.total_mass()
        if m <= 0:
            raise ValueError("cannot normalize a measure with nonpositive mass")
        return MeasureVec(self.space, self.weights / m)

    # -- serialization ----------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write ``index,q1[,q2],weight`` rows; 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            cols = ["index", "q1", "weight"] if self.space.dim == 1 else ["index", "q1", "q2", "weight"]
            writer.writerow(cols)
            for i, (q, w) in enumerate(zip(self.space.points, self.weights)):
                writer.writerow([i, *(_fmt(x) for x in q), _fmt(w)])

    @staticmethod
    def from_csv(path, space: StrategySpace) -> "MeasureVec":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            w = np.zeros(space.n)
            for row in reader:
                w[int(row[0])] = float(row[-1])
        if len(header) != space.dim + 2:
            raise ValueError("CSV header does not match the space dimension")
        return MeasureVec(space, w)

    def to_json_dict(self) -> dict:
        return {"space": self.space.to_dict(), "weights": self.weights.tolist()}

    @staticmethod
    def from_json_dict(d: dict) -> "MeasureVec":
        return MeasureVec(StrategySpace.from_dict(d["space"]), np.asarray(d["weights"], dtype=float))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @staticmethod
    def from_json(path) -> "MeasureVec":
        with open(path) as fh:
            return MeasureVec.from_json_dict(json.load(fh))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- module-level aliases matching the operation vocabulary --------------------


def total_mass(m: MeasureVec) -> float:
    return m.total_mass()


def tv_norm(m: MeasureVec) -> float:
    return m.tv_norm()


def pair(m: MeasureVec, f) -> float:
    return m.pair(f)


def add_scaled(m1: MeasureVec, c: float, m2: MeasureVec) -> MeasureVec:
    return m1.add_scaled(c, m2)


def zero_measure(space: StrategySpace) -> MeasureVec:
    return MeasureVec(space, np.zeros(space.n))


def unit_atom(space: StrategySpace, i: int) -> MeasureVec:
    w = np.zeros(space.n)
    w[i] = 1.0
    return MeasureVec(space, w)


def from_density(space: StrategySpace, density) -> MeasureVec:
    """Fold a density x(q) into weights x(q_i) * cell_volumes[i].

    ``density`` is a callable on points or an (n,) array of density values.
    """
    if callable(density):
        vals = np.array([density(q) for q in space.points], dtype=float)
    else:
        vals = np.asarray(density, dtype=float)
    return MeasureVec(space, vals * space.cell_volumes)


def merge_supports(m1: MeasureVec, m2: MeasureVec) -> tuple[MeasureVec, MeasureVec]:
    """Re-express two measures on the union of their supports (zero-filled)."""
    if m1.space.same_support(m2.space):
        return m1, m2
    if m1.space.dim != m2.space.dim:
        raise ValueError("cannot merge supports of different dimension")
    pts = np.vstack([m1.space.points, m2.space.points])
    rounded = pts.round(decimals=12)
    _, idx, inv = np.unique(rounded, axis=0, return_index=True, return_inverse=True)
    union_pts = pts[idx]
    n1 = m1.space.n
    w1 = np.zeros(len(idx))
    w2 = np.zeros(len(idx))
    np.add.at(w1, inv[:n1], m1.weights)
    np.add.at(w2, inv[n1:], m2.weights)
    lo = union_pts.min(axis=0)
    hi = union_pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    space = StrategySpace(
        points=union_pts,
        cell_volumes=np.ones(len(idx)),
        bounds=np.column_stack([lo - 1e-9 * span, hi + 1e-9 * span]),
        kind="atoms",
    )
    return MeasureVec(space, w1), MeasureVec(space, w2)


def bl_distance(m1: MeasureVec, m2: MeasureVec) -> float:
    """Bounded-Lipschitz (flat) distance between two measures.

    Solves, exactly on the joint finite support,

        sup { <m1 - m2, f> : ||f||_inf <= 1, Lip(f) <= 1 }

    as a linear program in the values f(q_i).  Metrizes weak* convergence on
    TV-bounded sets of measures over a compact space.
    """
    if not m1.space.same_support(m2.space):
        m1, m2 = merge_supports(m1, m2)
    d = m1.weights - m2.weights
    if not np.any(d):
        return 0.0
    n = m1.space.n
    if n == 1:
        return float(abs(d[0]))
    dist = m1.space.distance_matrix()
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = len(iu)
    # rows: f_i - f_j <= d_ij and f_j - f_i <= d_ij
    rows = np.repeat(np.arange(2 * n_pairs), 2)
    cols = np.empty(4 * n_pairs, dtype=int)
    vals = np.empty(4 * n_pairs)
    cols[0::4], cols[1::4] = iu, ju
    vals[0::4], vals[1::4] = 1.0, -1.0
    cols[2::4], cols[3::4] = iu, ju
    vals[2::4], vals[3::4] = -1.0, 1.0
    a_ub = csr_matrix((vals, (rows, cols)), shape=(2 * n_pairs, n))
    b_ub = np.repeat(dist[iu, ju], 2)
    res = linprog(-d, A_ub=a_ub, b_ub=b_ub, bounds=[(-1.0, 1.0)] * n, method="highs")
    if not res.success:
        raise RuntimeError(f"flat-metric LP failed: {res.message}")
    return float(-res.fun)
