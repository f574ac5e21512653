"""The acyclicity-constraint family.

Four power-series-of-traces constraints (exp, log, inv, binom) and the
spectral-radius constraint, each returning a value together with its
analytic gradient, plus a stability probe that records how each constraint
behaves (underflow, overflow, domain errors) as matrices grow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DEGENERACY_EPS,
    LUFactors,
    PowerIterState,
    lu_factorize,
    matrix_exp,
    matrix_power,
    power_iteration,
)
from .oracle import spectral_radius_oracle

__all__ = [
    "ConstraintEval",
    "ConstraintKind",
    "CycleFamily",
    "DomainViolationError",
    "ProbeRow",
    "UniformFamily",
    "cycle_matrix",
    "h_binom",
    "h_exp",
    "h_inv",
    "h_log",
    "h_spectral",
    "probe_rows_to_csv",
    "stability_probe",
]


class ConstraintKind(enum.Enum):
    EXP = "exp"
    LOG = "log"
    INV = "inv"
    BINOM = "binom"
    SPECTRAL = "spectral"


class DomainViolationError(ValueError):
    """The matrix left the constraint's domain of definition.

    Raised by h_log / h_inv when det(I - A) <= 0, i.e. the spectral radius
    has reached 1. Carries the determinant sign so callers can distinguish
    a singular boundary from a negative-determinant escape.
    """

    def __init__(self, det_sign: int):
        self.det_sign = det_sign
        super().__init__(
            f"det(I - A) is {'zero' if det_sign == 0 else 'negative'}; "
            "matrix left the constraint domain"
        )


@dataclass
class ConstraintEval:
    """Constraint value h(A) and its gradient, grad[i][j] = dh/dA[i][j]."""

    value: float
    grad: np.ndarray
    degenerate: bool = False


def _check_domain(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if (a < 0).any():
        raise ValueError("constraint domain is entrywise-nonnegative matrices")
    return a


def h_exp(a) -> ConstraintEval:
    """Tr exp(A) - d, gradient exp(A)^T. Overflow propagates as +inf."""
    a = _check_domain(a)
    e = matrix_exp(a)
    return ConstraintEval(value=float(np.trace(e)) - a.shape[0], grad=e.T.copy())


def _factor_i_minus_a(a: np.ndarray) -> LUFactors:
    lu = lu_factorize(np.eye(a.shape[0]) - a)
    if lu.sign <= 0:
        raise DomainViolationError(lu.sign)
    return lu


def h_log(a) -> ConstraintEval:
    """-log det(I - A), gradient ((I - A)^-1)^T."""
    a = _check_domain(a)
    lu = _factor_i_minus_a(a)
    inv = lu.solve(np.eye(a.shape[0]))
    return ConstraintEval(value=-lu.logabsdet, grad=inv.T.copy())


def h_inv(a) -> ConstraintEval:
    """Tr (I - A)^-1 - d, gradient ((I - A)^-2)^T."""
    a = _check_domain(a)
    lu = _factor_i_minus_a(a)
    inv = lu.solve(np.eye(a.shape[0]))
    return ConstraintEval(
        value=float(np.trace(inv)) - a.shape[0], grad=(inv @ inv).T.copy()
    )


def h_binom(a, d_power: int | None = None) -> ConstraintEval:
    """Tr (I + A)^d - d, gradient (d (I + A)^(d-1))^T."""
    a = _check_domain(a)
    d = a.shape[0]
    p = d if d_power is None else int(d_power)
    b = np.eye(d) + a
    value = float(np.trace(matrix_power(b, p))) - d
    grad = p * matrix_power(b, p - 1).T if p >= 1 else np.zeros_like(a)
    return ConstraintEval(value=value, grad=np.ascontiguousarray(grad))


def h_spectral(
    a, state: PowerIterState | None = None, iters: int = 15
) -> tuple[ConstraintEval, PowerIterState]:
    """Spectral-radius constraint via warm-startable power iteration.

    Returns the estimate u^T A v / (u^T v) and the rank-one gradient
    grad[i][j] = u[i] v[j] / (u^T v), where u and v are the left and right
    dominant-eigenvector estimates. The returned state should be fed back
    in on the next call to warm-start the iteration.
    """
    a = _check_domain(a)
    if np.isnan(a).any():
        raise ValueError("h_spectral requires NaN-free input")
    if state is None:
        state = PowerIterState.uniform(a.shape[0])
    lam, new_state, degenerate = power_iteration(a, state, iters)
    u, v = (state.u, state.v) if degenerate else (new_state.u, new_state.v)
    denom = float(u @ v)
    if abs(denom) < DEGENERACY_EPS:
        grad = np.zeros_like(a)
        degenerate = True
    else:
        grad = np.outer(u, v) / denom
    return ConstraintEval(value=lam, grad=grad, degenerate=degenerate), new_state


def cycle_matrix(d: int, w: float) -> np.ndarray:
    """Adjacency of the directed cycle 0 -> 1 -> ... -> d-1 -> 0, weight w."""
    if d < 2:
        raise ValueError("cycle_matrix needs d >= 2")
    if w < 0:
        raise ValueError("cycle weight must be nonnegative")
    a = np.zeros((d, d))
    for i in range(d):
        a[i, (i + 1) % d] = w
    return a


@dataclass(frozen=True)
class CycleFamily:
    """Probe matrices: a directed cycle of the given weight.

    length defaults to the probe dimension d (a full-length cycle); a
    shorter cycle is embedded in the top-left block.
    """

    w: float
    length: int | None = None

    name = "cycle"

    def build(self, d: int) -> np.ndarray:
        length = d if self.length is None else min(self.length, d)
        a = np.zeros((d, d))
        a[:length, :length] = cycle_matrix(max(length, 2), self.w)[:length, :length]
        return a

    @property
    def scale(self) -> float:
        return self.w


@dataclass(frozen=True)
class UniformFamily:
    """Probe matrices: i.i.d. uniform entries in [0, eps], zero diagonal."""

    eps: float
    seed: int = 0

    name = "uniform"

    def build(self, d: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        a = rng.uniform(0.0, self.eps, size=(d, d))
        np.fill_diagonal(a, 0.0)
        return a

    @property
    def scale(self) -> float:
        return self.eps


@dataclass
class ProbeRow:
    d: int
    constraint: str
    family: str
    scale: float
    value: float
    status: str


_UNDERFLOW_CUTOFF = 1e-100


def _probe_value(kind: ConstraintKind, a: np.ndarray) -> float:
    if kind is ConstraintKind.EXP:
        return h_exp(a).value
    if kind is ConstraintKind.LOG:
        return h_log(a).value
    if kind is ConstraintKind.INV:
        return h_inv(a).value
    if kind is ConstraintKind.BINOM:
        return h_binom(a).value
    # Spectral values are reported from the Gelfand oracle: the probe
    # families include periodic matrices on which a fixed-iteration power
    # method does not settle.
    return spectral_radius_oracle(a)


def stability_probe(kind: ConstraintKind, family, d_list) -> list[ProbeRow]:
    """Evaluate one constraint over a family of probe matrices.

    Statuses: ok, underflow-to-zero (nonzero cyclic matrix but the value
    dropped below 1e-100), overflow-to-inf, domain-error.
    """
    rows = []
    for d in d_list:
        a = family.build(int(d))
        try:
            value = _probe_value(kind, a)
        except DomainViolationError:
            rows.append(
                ProbeRow(d, kind.value, family.name, family.scale,
                         float("nan"), "domain-error")
            )
            continue
        if not np.isfinite(value):
            status = "overflow-to-inf"
        elif abs(value) < _UNDERFLOW_CUTOFF and np.any(a != 0.0):
            status = "underflow-to-zero"
        else:
            status = "ok"
        rows.append(ProbeRow(d, kind.value, family.name, family.scale,
                             float(value), status))
    return rows


def probe_rows_to_csv(rows: list[ProbeRow]) -> str:
    lines = ["d,constraint,family,scale,value,status"]
    for r in rows:
        lines.append(
            f"{r.d},{r.constraint},{r.family},{format(r.scale, '.17g')},"
            f"{format(r.value, '.17g')},{r.status}"
        )
    return "\n".join(lines) + "\n"
