"""
Reference functions with known answers, shared by tests and the docs.
"""

from typing import List, Tuple

import numpy as np

from app.models import expr as E
from app.models.funcrep import JumpRecord, RepFunc, SmoothPiece, constant, from_expr, identity_on, to_token, unit_step
from app.models.qde import CoefficientSet
from app.models.variation import Partition


def chirp() -> RepFunc:
    """t cos(pi / 2t) on [0, 1]: continuous, unbounded variation."""
    return from_expr(E.Chirp(), 0.0, 1.0)


def harmonic_partition(n: int) -> Partition:
    """0 < 1/(2n) < 1/(2n-1) < ... < 1/2 < 1; the chirp's partition sum is 1 + 1/2 + ... + 1/n."""
    return Partition(tuple([0.0] + [1.0 / k for k in range(2 * n, 0, -1)]))


def cantor_stage(k: int) -> RepFunc:
    """Piecewise-linear k-th approximation of Cantor's ladder on [0, 1]; increasing, variation 1."""
    intervals: List[Tuple[float, float]] = [(0.0, 1.0)]
    for _ in range(k):
        intervals = [iv for u, v in intervals
                     for iv in ((u, u + (v - u) / 3.0), (v - (v - u) / 3.0, v))]
    rise = 1.0 / len(intervals)
    pieces = []
    level = 0.0
    prev = 0.0
    for u, v in intervals:
        if u > prev:
            pieces.append(SmoothPiece(prev, u, E.const(level)))
        slope = rise / (v - u)
        pieces.append(SmoothPiece(u, v, E.Poly((level - slope * u, slope))))
        level += rise
        prev = v
    return RepFunc(0.0, 1.0, tuple(pieces))


def nonexistent_pair() -> Tuple[RepFunc, RepFunc]:
    """f jumps right after 0, g jumps into 0; on [-1, 1] neither integral exists."""
    f = unit_step("0", -1.0, 1.0)
    g = RepFunc(-1.0, 1.0, (), 0.0, (JumpRecord(to_token("0"), 1.0, 0.0),))
    return f, g


def impulse_coefficients(c: str = "0.5", sigma: float = 1.0) -> CoefficientSet:
    """x'' + sigma delta_c x = 0 on [0, 1]."""
    zero = constant(0.0, 0.0, 1.0)
    return CoefficientSet.create([zero, unit_step(c, 0.0, 1.0, sigma), zero])


def damped_coefficients() -> CoefficientSet:
    """x'' + x' = 0 on [0, 1]."""
    zero = constant(0.0, 0.0, 1.0)
    return CoefficientSet.create([identity_on(0.0, 1.0), zero, zero])


def harmonic_sum(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))
