"""Density-dependent birth/mortality rate pairs.

The model's rates are a pair (f1, f2): f1(X, q) is the per-capita birth rate
of strategy q at total population X, f2(X, q) the per-capita mortality.  The
standing assumptions are that f1 is nonincreasing and f2 nondecreasing in X,
both nonnegative and Lipschitz in X, and that mortality has a strictly
positive density-independent floor: min_q f2(0, q) = varpi > 0.

Families whose natural mortality vanishes at X = 0 (pure density-dependent
death) are offered with an additive floor so the implemented pair satisfies
the assumptions; passing floor=0 reproduces the raw model outside the proven
well-posedness regime, and assumption verification will flag it.

``estimate_constants`` measures the bounds and Lipschitz constants of the
truncated pair on a sampling lattice and chooses the contraction window b
for the Picard solver:

    (1 - e^(-B2 b)) u(Q) + 2 B1 C1 b < a,
    b < min{1, 1 / (2 L2 C1 + 2 B1 + 2 C2 C1)},

with C1 = u(Q) + 2a and C2 = L1 + 2 b L2 B1 (solved by fixed-point iteration
since C2 depends on b).  The chosen b sits at 0.9x the binding bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .space import StrategySpace


def _coef(space: StrategySpace, spec, name: str) -> np.ndarray:
    """Tabulate a coefficient over the support points.

    Accepts a scalar, an (n,) array, {"trait": i} (use coordinate i of each
    point), or a callable on points.
    """
    n = space.n
    if isinstance(spec, dict):
        i = int(spec["trait"])
        if not 0 <= i < space.dim:
            raise ValueError(f"coefficient {name}: trait index {i} out of range")
        return space.points[:, i].copy()
    if callable(spec):
        return np.array([float(spec(q)) for q in space.points])
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"coefficient {name} has {arr.shape[0]} entries, space has {n} points")
    return arr.copy()


@dataclass(frozen=True)
class FitnessPair:
    """Vectorized rate pair bound to a strategy space.

    ``birth`` and ``death`` map a scalar X to the (n,) vector of rates at
    the support points.  When ``k_tilde`` is set, X is clamped to
    [0, k_tilde] before evaluation (the truncated extension); the resulting
    functions are globally bounded and globally Lipschitz in X.

    ``mean_fitness_mortality`` marks the quasi-species variant in which the
    mortality is the population's average birth rate; such pairs have no
    pointwise f2 and are only legal with the direct RK4 solver.
    """

    space: StrategySpace
    family: str
    birth: Callable[[float], np.ndarray]
    death: Callable[[float], np.ndarray] | None
    params: dict = field(default_factory=dict)
    mean_fitness_mortality: bool = False
    k_tilde: float | None = None

    def _clamp(self, X: float) -> float:
        if self.k_tilde is None:
            return X
        return min(max(X, 0.0), self.k_tilde)

    def f1(self, X: float) -> np.ndarray:
        return self.birth(self._clamp(X))

    def f2(self, X: float) -> np.ndarray:
        if self.mean_fitness_mortality:
            raise ValueError(
                "mean-fitness mortality has no pointwise f2; the rate is the "
                "population average of f1 and is computed by the solver"
            )
        return self.death(self._clamp(X))

    def eval(self, which: str, X: float, q) -> float:
        """Rate value at a single (X, q); errors on a negative result."""
        i = q if isinstance(q, (int, np.integer)) else self.space.index_of(q)
        if which == "f1":
            v = float(self.f1(X)[i])
        elif which == "f2":
            v = float(self.f2(X)[i])
        else:
            raise ValueError("which must be 'f1' or 'f2'")
        if v < 0:
            raise ValueError(f"{which}({X}, q_{i}) = {v} < 0 violates the rate assumptions")
        return v

    def truncated(self, k_tilde: float) -> "FitnessPair":
        """Clamp X to [0, k_tilde] before evaluation; idempotent."""
        if k_tilde <= 0:
            raise ValueError("k_tilde must be positive")
        return FitnessPair(
            space=self.space,
            family=self.family,
            birth=self.birth,
            death=self.death,
            params=self.params,
            mean_fitness_mortality=self.mean_fitness_mortality,
            k_tilde=float(k_tilde),
        )


# ─── families ────────────────────────────────────────────────────────


def constant_pair(space: StrategySpace, a, b) -> FitnessPair:
    """f1 = a(q), f2 = b(q), both independent of X."""
    av = _coef(space, a, "a")
    bv = _coef(space, b, "b")
    return FitnessPair(space, "constant", lambda X: av, lambda X: bv, params={"a": av, "b": bv})


def logistic_pair(space: StrategySpace, a, b, floor: float = 1e-3) -> FitnessPair:
    """f1 = a(q), f2 = floor + b(q) X (generalized logistic with mortality floor)."""
    av = _coef(space, a, "a")
    bv = _coef(space, b, "b")
    return FitnessPair(
        space,
        "logistic",
        lambda X: av,
        lambda X: floor + bv * X,
        params={"a": av, "b": bv, "floor": floor},
    )


def beverton_holt_pair(space: StrategySpace, a, c, b, floor: float = 1e-3) -> FitnessPair:
    """f1 = a(q) / (1 + c(q) X), f2 = floor + b(q) X."""
    av = _coef(space, a, "a")
    cv = _coef(space, c, "c")
    bv = _coef(space, b, "b")
    return FitnessPair(
        space,
        "beverton_holt",
        lambda X: av / (1.0 + cv * X),
        lambda X: floor + bv * X,
        params={"a": av, "b": bv, "c": cv, "floor": floor},
    )


def ricker_pair(space: StrategySpace, a, c, b, floor: float = 1e-3) -> FitnessPair:
    """f1 = a(q) exp(-c(q) X), f2 = floor + b(q) X."""
    av = _coef(space, a, "a")
    cv = _coef(space, c, "c")
    bv = _coef(space, b, "b")
    return FitnessPair(
        space,
        "ricker",
        lambda X: av * np.exp(-cv * X),
        lambda X: floor + bv * X,
        params={"a": av, "b": bv, "c": cv, "floor": floor},
    )


def custom_pair(space: StrategySpace, f1, f2) -> FitnessPair:
    """Arbitrary callables (X, points) -> (n,) rates."""
    return FitnessPair(
        space,
        "custom",
        lambda X: np.asarray(f1(X, space.points), dtype=float),
        lambda X: np.asarray(f2(X, space.points), dtype=float),
    )


def mean_fitness_pair(space: StrategySpace, f1) -> FitnessPair:
    """Quasi-species variant: mortality is the average birth rate.

    ``f1`` is a coefficient spec (constant in X) or a callable
    (X, points) -> (n,).  The pair is quarantined: assumption verification
    reports "not applicable" and the Picard solver rejects it.
    """
    if callable(f1):
        birth = lambda X: np.asarray(f1(X, space.points), dtype=float)
    else:
        av = _coef(space, f1, "a")
        birth = lambda X: av
    return FitnessPair(space, "mean_fitness", birth, None, mean_fitness_mortality=True)


def fitness_from_config(cfg: dict, space: StrategySpace) -> FitnessPair:
    """Build a pair from its JSON config form.

    {"family":"ricker","a":...,"c":...,"b":...,"floor":...} and analogous
    forms for the other families; coefficients are scalars, arrays matching
    the point count, or {"trait": i}.
    """
    family = cfg.get("family")
    floor = float(cfg.get("floor", 1e-3))
    if family == "constant":
        return constant_pair(space, cfg["a"], cfg["b"])
    if family == "logistic":
        return logistic_pair(space, cfg["a"], cfg["b"], floor=floor)
    if family == "beverton_holt":
        return beverton_holt_pair(space, cfg["a"], cfg.get("c", 1.0), cfg["b"], floor=floor)
    if family == "ricker":
        return ricker_pair(space, cfg["a"], cfg.get("c", 1.0), cfg["b"], floor=floor)
    if family == "mean_fitness":
        return mean_fitness_pair(space, cfg["a"])
    raise ValueError(f"unknown fitness family {family!r}")


# ─── assumption verification ─────────────────────────────────────────


@dataclass
class AssumptionReport:
    """Outcome of sampling-based verification of the rate assumptions."""

    applicable: bool
    passed: bool
    varpi: float
    n_x: int
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "passed": self.passed,
            "varpi": self.varpi,
            "n_x": self.n_x,
            "violations": self.violations[:20],
        }


def verify_assumptions(
    fp: FitnessPair, space: StrategySpace, k_tilde: float = 10.0, n_x: int = 101
) -> AssumptionReport:
    """Check nonnegativity, monotonicity in X, and the mortality floor.

    Sampled on a lattice of ``n_x`` X-values on [0, k_tilde] times all
    support points.  Mean-fitness pairs are reported as not applicable.
    """
    if fp.mean_fitness_mortality:
        return AssumptionReport(applicable=False, passed=True, varpi=float("nan"), n_x=0)
    xs = np.linspace(0.0, k_tilde, n_x)
    f1_tab = np.stack([fp.f1(x) for x in xs])
    f2_tab = np.stack([fp.f2(x) for x in xs])
    violations = []

    def witness(kind, k, i, value, x2=None):
        violations.append(
            {
                "kind": kind,
                "X": float(xs[k]),
                **({"X2": float(x2)} if x2 is not None else {}),
                "q_index": int(i),
                "q": space.points[i].tolist(),
                "value": float(value),
            }
        )

    for tab, name in ((f1_tab, "f1_negative"), (f2_tab, "f2_negative")):
        if np.any(tab < 0):
            k, i = np.unravel_index(int(np.argmin(tab)), tab.shape)
            witness(name, k, i, tab[k, i])
    d1 = np.diff(f1_tab, axis=0)
    if np.any(d1 > 1e-12):
        k, i = np.unravel_index(int(np.argmax(d1)), d1.shape)
        witness("f1_not_nonincreasing", k, i, d1[k, i], x2=xs[k + 1])
    d2 = np.diff(f2_tab, axis=0)
    if np.any(d2 < -1e-12):
        k, i = np.unravel_index(int(np.argmin(d2)), d2.shape)
        witness("f2_not_nondecreasing", k, i, d2[k, i], x2=xs[k + 1])
    varpi = float(np.min(f2_tab[0]))
    if varpi <= 0:
        witness("mortality_floor_nonpositive", 0, int(np.argmin(f2_tab[0])), varpi)
    return AssumptionReport(
        applicable=True, passed=not violations, varpi=varpi, n_x=n_x, violations=violations
    )


# ─── truncation constants and the contraction window ─────────────────


@dataclass(frozen=True)
class TruncationConstants:
    """Bounds of the truncated pair and the Picard window they license.

    B1, B2 bound f1~, f2~ on [0, K~] x Q; L1, L2 are their Lipschitz
    constants in X; C1 = u(Q) + 2a, C2 = L1 + 2 b L2 B1; kappa is the
    contraction factor 2b (L2 C1 + B1 + C1 C2) < 1 of the fixed-point map.
    """

    k_tilde: float
    B1: float
    B2: float
    L1: float
    L2: float
    M_f1: float
    varpi: float
    u_mass: float
    a: float
    b: float
    C1: float
    C2: float
    kappa: float

    def to_dict(self) -> dict:
        return {
            "k_tilde": self.k_tilde,
            "B1": self.B1,
            "B2": self.B2,
            "L1": self.L1,
            "L2": self.L2,
            "M_f1": self.M_f1,
            "varpi": self.varpi,
            "u_mass": self.u_mass,
            "a": self.a,
            "b": self.b,
            "C1": self.C1,
            "C2": self.C2,
            "kappa": self.kappa,
        }


def _lattice_bounds(fp: FitnessPair, k_tilde: float, n_x: int):
    """Sup bounds and max divided differences of the truncated pair."""
    xs = np.linspace(0.0, k_tilde, n_x)
    f1_tab = np.stack([fp.f1(min(x, k_tilde)) for x in xs])
    f2_tab = np.stack([fp.f2(min(x, k_tilde)) for x in xs])
    dx = xs[1] - xs[0]
    b1 = float(np.max(f1_tab))
    b2 = float(np.max(f2_tab))
    l1 = float(np.max(np.abs(np.diff(f1_tab, axis=0)))) / dx
    l2 = float(np.max(np.abs(np.diff(f2_tab, axis=0)))) / dx
    return b1, b2, l1, l2


def estimate_constants(
    fp: FitnessPair,
    space: StrategySpace,
    u_mass: float,
    a: float,
    k_tilde: float | None = None,
    n_x: int = 101,
) -> TruncationConstants:
    """Measure B1, B2, L1, L2 on a lattice and pick the contraction window b.

    The lattice is refined once at double resolution and the larger estimate
    kept.  b is set to 0.9x the binding bound, iterating because C2 depends
    on b; both window inequalities are re-asserted at the result.
    """
    if fp.mean_fitness_mortality:
        raise ValueError("mean-fitness mortality is outside the contraction theory; use RK4")
    if a <= 0:
        raise ValueError("ball radius a must be positive")
    if u_mass < 0:
        raise ValueError("u_mass must be nonnegative")
    C1 = u_mass + 2.0 * a
    if k_tilde is None:
        k_tilde = 1.1 * C1
    if k_tilde <= C1:
        raise ValueError(f"k_tilde must exceed u(Q) + 2a = {C1}")
    fpt = fp.truncated(k_tilde)
    b1a, b2a, l1a, l2a = _lattice_bounds(fpt, k_tilde, n_x)
    b1b, b2b, l1b, l2b = _lattice_bounds(fpt, k_tilde, 2 * n_x - 1)
    B1, B2 = max(b1a, b1b), max(b2a, b2b)
    L1, L2 = max(l1a, l1b), max(l2a, l2b)

    # window condition 1: (1 - e^(-B2 b)) u(Q) + 2 B1 C1 b < a, increasing in b
    def g(b):
        return (1.0 - np.exp(-B2 * b)) * u_mass + 2.0 * B1 * C1 * b

    if g(1.0) < a:
        b1_star = np.inf
    else:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < a:
                lo = mid
            else:
                hi = mid
        b1_star = lo

    # window condition 2 couples to C2 = L1 + 2 b L2 B1: iterate to a fixed point
    b = 0.9 * min(1.0, b1_star)
    for _ in range(20):
        C2 = L1 + 2.0 * b * L2 * B1
        denom = 2.0 * L2 * C1 + 2.0 * B1 + 2.0 * C2 * C1
        bound2 = np.inf if denom == 0 else 1.0 / denom
        b_new = 0.9 * min(1.0, b1_star, bound2)
        if abs(b_new - b) < 1e-12:
            b = b_new
            break
        b = b_new
    if not (b > 0 and np.isfinite(b)):
        raise RuntimeError(
            f"no positive window satisfies the contraction conditions "
            f"(bound from growth: {b1_star}, bound from Lipschitz terms: {bound2})"
        )
    C2 = L1 + 2.0 * b * L2 * B1
    denom = 2.0 * L2 * C1 + 2.0 * B1 + 2.0 * C2 * C1
    bound2 = np.inf if denom == 0 else 1.0 / denom
    # both inequalities must hold with the 10% construction margin
    if not (g(b) < a and b < min(1.0, bound2) and b <= 0.9 * min(1.0, b1_star, bound2) * (1 + 1e-9)):
        binding = "growth" if b1_star <= bound2 else "Lipschitz"
        raise RuntimeError(f"window selection failed; binding constraint: {binding}")
    kappa = 2.0 * b * (L2 * C1 + B1 + C1 * C2)
    f1_zero = fpt.f1(0.0)
    f2_zero = fpt.f2(0.0)
    return TruncationConstants(
        k_tilde=float(k_tilde),
        B1=B1,
        B2=B2,
        L1=L1,
        L2=L2,
        M_f1=float(np.max(f1_zero)),
        varpi=float(np.min(f2_zero)),
        u_mass=float(u_mass),
        a=float(a),
        b=float(b),
        C1=float(C1),
        C2=float(C2),
        kappa=float(kappa),
    )
