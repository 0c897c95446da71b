"""Run configuration: one JSON document wires a whole simulation.

A config embeds the component specs::

    {
      "space":   {"kind": "grid1d", "bounds": [0.0, 2.0], "cells": 64},
      "kernel":  {"variant": "gaussian", "sigma": 0.15},
      "fitness": {"family": "ricker", "a": 1.5, "c": 0.6, "b": 0.5, "floor": 0.2},
      "initial": {"kind": "uniform", "mass": 1.0},
      "solver":  "rk4",
      "T": 1.0,
      "dt": 0.001,
      "seed": 0
    }

Validation failures raise ConfigError (CLI exit code 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fitness import FitnessPair, fitness_from_config
from .kernels import MutationKernel, kernel_from_config
from .measures import MeasureVec
from .space import StrategySpace, atoms, grid_1d, grid_2d


def space_from_config(cfg: dict) -> StrategySpace:
    kind = cfg.get("kind")
    if kind == "grid1d":
        lo, hi = cfg["bounds"]
        return grid_1d(float(lo), float(hi), int(cfg.get("cells", 128)))
    if kind == "grid2d":
        return grid_2d(cfg["bounds"], cfg.get("cells", (32, 32)))
    if kind == "atoms":
        return atoms(cfg["points"])
    raise ConfigError(f"unknown space kind {kind!r}")


def initial_from_config(cfg: dict, space: StrategySpace, seed: int | None = None) -> MeasureVec:
    kind = cfg.get("kind")
    if kind == "uniform":
        w = space.cell_volumes / space.volume()
    elif kind == "gaussian":
        center = np.asarray(cfg["center"], dtype=float).reshape(space.dim)
        sigma = float(cfg["sigma"])
        baseline = float(cfg.get("baseline", 0.0))
        if sigma <= 0:
            raise ConfigError("initial gaussian needs sigma > 0")
        d2 = ((space.points - center) ** 2).sum(axis=1)
        w = (baseline + np.exp(-d2 / (2.0 * sigma * sigma))) * space.cell_volumes
    elif kind == "weights":
        w = np.asarray(cfg["weights"], dtype=float)
        if w.shape != (space.n,):
            raise ConfigError(f"initial weights need {space.n} entries, got {w.shape}")
    elif kind == "random":
        rng = np.random.default_rng(seed)
        lo = float(cfg.get("low", 0.0))
        hi = float(cfg.get("high", 1.0))
        w = rng.uniform(lo, hi, space.n) * space.cell_volumes
    else:
        raise ConfigError(f"unknown initial measure kind {kind!r}")
    if np.any(w < 0):
        raise ConfigError("initial measure must be nonnegative")
    mass = cfg.get("mass")
    if mass is not None:
        total = float(np.sum(w))
        if total <= 0:
            raise ConfigError("cannot scale a zero initial measure to a target mass")
        w = w * (float(mass) / total)
    return MeasureVec(space, w)


@dataclass
class RunConfig:
    """Validated run description; ``build()`` materializes the components."""

    space_spec: dict
    kernel_spec: dict
    fitness_spec: dict
    initial_spec: dict
    solver: str = "rk4"
    T: float = 1.0
    dt: float | None = None
    seed: int = 0
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    ball_radius: float | None = None
    summary_stride: int | None = None
    raw: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        try:
            for key in ("space", "kernel", "fitness", "initial"):
                if key not in d:
                    raise ConfigError(f"config is missing the {key!r} section")
            solver = d.get("solver", "rk4")
            if solver not in ("rk4", "picard"):
                raise ConfigError(f"solver must be 'rk4' or 'picard', got {solver!r}")
            T = float(d.get("T", 1.0))
            if T < 0:
                raise ConfigError("T must be nonnegative")
            dt = d.get("dt")
            if dt is None:
                dt = T / 2000.0 if T > 0 else 1.0
            dt = float(dt)
            if dt <= 0:
                raise ConfigError("dt must be positive")
            picard = d.get("picard", {})
            return RunConfig(
                space_spec=d["space"],
                kernel_spec=d["kernel"],
                fitness_spec=d["fitness"],
                initial_spec=d["initial"],
                solver=solver,
                T=T,
                dt=dt,
                seed=int(d.get("seed", 0)),
                picard_tol=float(picard.get("tol", 1e-10)),
                picard_max_iter=int(picard.get("max_iter", 30)),
                ball_radius=picard.get("ball_radius"),
                summary_stride=d.get("summary_stride"),
                raw=d,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @staticmethod
    def from_json(path) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return RunConfig.from_dict(d)

    def build(self) -> tuple[StrategySpace, MutationKernel, FitnessPair, MeasureVec]:
        try:
            space = space_from_config(self.space_spec)
            kernel = kernel_from_config(self.kernel_spec, space)
            fp = fitness_from_config(self.fitness_spec, space)
            u = initial_from_config(self.initial_spec, space, seed=self.seed)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid component spec: {exc}") from exc
        if fp.mean_fitness_mortality and self.solver == "picard":
            raise ConfigError(
                "mean-fitness mortality is outside the contraction theory; use solver 'rk4'"
            )
        return space, kernel, fp, u
