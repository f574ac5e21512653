"""Independent brute-force oracles used by tests and acceptance checks.

These deliberately avoid the code paths they are meant to validate:
spectral radii come from Gelfand's formula instead of power iteration,
constraint values from truncated trace series instead of closed forms, and
gradients from central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import DiGraph

__all__ = [
    "OracleReport",
    "enumerate_closed_walks",
    "finite_diff_grad",
    "pst_series_oracle",
    "sortnregress",
    "spectral_radius_oracle",
]


@dataclass
class OracleReport:
    quantity: str
    oracle_value: float
    subject_value: float

    @property
    def abs_err(self) -> float:
        return abs(self.oracle_value - self.subject_value)

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.oracle_value), abs(self.subject_value))
        return self.abs_err / scale if scale > 0 else 0.0


def spectral_radius_oracle(a, m: int = 30) -> float:
    """Gelfand estimate ||A^(2^m)||_F^(1/2^m) with log-scale renormalization.

    Each squaring renormalizes by the Frobenius norm and accumulates the
    log scale, so the estimate never overflows.
    """
    b = np.asarray(a, dtype=np.float64).copy()
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("spectral_radius_oracle requires a square matrix")
    log_scale = 0.0
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    b /= norm
    log_scale = math.log(norm)
    for _ in range(m):
        b = b @ b
        norm = float(np.linalg.norm(b))
        if norm == 0.0:
            return 0.0  # nilpotent
        b /= norm
        log_scale = 2.0 * log_scale + math.log(norm)
    return math.exp(log_scale / 2.0**m)


_SERIES_COEFF = {
    "exp": lambda k: 1.0 / math.factorial(k),
    "log": lambda k: 1.0 / k,
    "inv": lambda k: 1.0,
}


def pst_series_oracle(kind: str, a, k_max: int = 60) -> float:
    """Truncated power-series-of-traces value sum_k a_k Tr(A^k)."""
    kind = kind.lower()
    if kind not in _SERIES_COEFF:
        raise ValueError(f"unknown series kind: {kind!r}")
    if k_max < 40:
        raise ValueError("k_max must be at least 40 for a meaningful truncation")
    a = np.asarray(a, dtype=np.float64)
    if kind in ("log", "inv") and spectral_radius_oracle(a) >= 0.9:
        raise ValueError(f"spectral radius too large for the {kind} series")
    coeff = _SERIES_COEFF[kind]
    total = 0.0
    power = np.eye(a.shape[0])
    for k in range(1, k_max + 1):
        power = power @ a
        total += coeff(k) * float(np.trace(power))
    return total


def finite_diff_grad(f, a, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar matrix function, per entry."""
    a = np.asarray(a, dtype=np.float64)
    g = np.zeros_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            hi, lo = a.copy(), a.copy()
            hi[i, j] += step
            lo[i, j] -= step
            g[i, j] = (f(hi) - f(lo)) / (2.0 * step)
    return g


def enumerate_closed_walks(g: DiGraph, k_max: int) -> list:
    """Count closed walks of each length 1..k_max by exhaustive DFS.

    Mirrors the trace criterion: the 0/1 adjacency matrix has a cycle of
    length k exactly when some closed walk of length k exists. d is capped
    at 12 because enumeration is exponential.
    """
    if g.d > 12:
        raise ValueError("closed-walk enumeration is limited to d <= 12")
    succ = [sorted(g.children(v)) for v in range(g.d)]
    counts = [0] * (k_max + 1)

    def dfs(start: int, v: int, depth: int):
        if depth > 0 and v == start:
            counts[depth] += 1
        if depth == k_max:
            return
        for w in succ[v]:
            dfs(start, w, depth + 1)

    for start in range(g.d):
        dfs(start, start, 0)
    return counts[1:]


def sortnregress(x: np.ndarray, coeff_threshold: float = 0.05) -> DiGraph:
    """Variance-sorting diagnostic baseline.

    Orders variables by increasing sample variance and regresses each one
    on all of its predecessors; coefficients above the threshold in
    absolute value become edges. Intended as a simulation-artifact
    detector, not a tuned method.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n < d + 1:
        raise ValueError("sortnregress needs at least d + 1 rows")
    variances = x.var(axis=0)
    order = sorted(range(d), key=lambda j: (variances[j], j))
    edges = set()
    xc = x - x.mean(axis=0)
    for pos in range(1, d):
        target = order[pos]
        preds = order[:pos]
        design = xc[:, preds]
        coef, *_ = np.linalg.lstsq(design, xc[:, target], rcond=None)
        for p, c in zip(preds, coef):
            if abs(c) > coeff_threshold:
                edges.add((p, target))
    return DiGraph(d, frozenset(edges))
