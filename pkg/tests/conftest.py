"""Shared reference problem for solver, reduction and acceptance tests.

One smooth selection-mutation problem is reused everywhere results are
compared across routes: a 1-D grid on [0, 2], Ricker births with a
trait-increasing ceiling, linear mortality with a floor, and a Gaussian
mutation kernel.
"""

import numpy as np

from evomeasure import MeasureVec, gaussian_kernel, grid_1d, ricker_pair


def reference_space(cells=64):
    return grid_1d(0.0, 2.0, cells)


def reference_birth_ceiling(space):
    return 1.0 + 0.5 * space.points[:, 0]


def reference_components(cells=64, sigma=0.15):
    """(space, kernel, fitness, initial) of the reference problem."""
    sp = reference_space(cells)
    kernel = gaussian_kernel(sp, sigma)
    fp = ricker_pair(sp, a=reference_birth_ceiling(sp), c=0.6, b=0.5, floor=0.2)
    u = MeasureVec(sp, sp.cell_volumes / sp.volume())
    return sp, kernel, fp, u


def reference_config_dict(cells=64, sigma=0.15, solver="rk4", T=1.0, dt=1e-3):
    """The same problem as a JSON-ready run config."""
    sp = reference_space(cells)
    return {
        "space": {"kind": "grid1d", "bounds": [0.0, 2.0], "cells": cells},
        "kernel": {"variant": "gaussian", "sigma": sigma},
        "fitness": {
            "family": "ricker",
            "a": reference_birth_ceiling(sp).tolist(),
            "c": 0.6,
            "b": 0.5,
            "floor": 0.2,
        },
        "initial": {"kind": "uniform", "mass": 1.0},
        "solver": solver,
        "T": T,
        "dt": dt,
        "seed": 0,
    }


def concentration_config_dict(cells=128, T=200.0, dt=0.05):
    """Pure-selection problem whose population concentrates onto one cell.

    The birth ceiling has a kink at q* = 0.93 so neighbouring cells are
    suppressed at a rate proportional to the cell size (a smooth peak would
    concentrate only on the diffusive timescale).
    """
    sp = reference_space(cells)
    q = sp.points[:, 0]
    return {
        "space": {"kind": "grid1d", "bounds": [0.0, 2.0], "cells": cells},
        "kernel": {"variant": "dirac"},
        "fitness": {
            "family": "logistic",
            "a": (2.0 - 1.5 * np.abs(q - 0.93)).tolist(),
            "b": 1.0,
            "floor": 1e-3,
        },
        "initial": {"kind": "gaussian", "center": [0.7], "sigma": 0.5, "baseline": 0.5, "mass": 1.0},
        "solver": "rk4",
        "T": T,
        "dt": dt,
        "seed": 0,
    }
