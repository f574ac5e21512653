"""Dense real linear algebra primitives shared by the constraint family.

Everything operates on plain float64 numpy arrays. All functions are pure
and deterministic: reductions use fixed loop/BLAS orderings, so repeated
calls on identical inputs produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LUFactors",
    "PowerIterState",
    "lu_factorize",
    "matmul",
    "matrix_exp",
    "matrix_power",
    "power_iteration",
    "load_matrix_csv",
    "save_matrix_csv",
    "trace",
]

# Denominator below which a u^T v bilinear estimate is considered collapsed.
DEGENERACY_EPS = 1e-12


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def _require_square(a: np.ndarray) -> np.ndarray:
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def trace(a) -> float:
    """Sum of diagonal entries of a square matrix."""
    a = _require_square(a)
    return float(np.trace(a))


@dataclass
class LUFactors:
    """PA = LU factorization with partial pivoting.

    `lu` stores L (unit diagonal, below) and U (on and above the diagonal)
    in one array; `perm` is the row permutation. `sign` is the determinant
    sign in {-1, 0, +1}; `logabsdet` is -inf for exactly singular input.
    """

    lu: np.ndarray
    perm: np.ndarray
    sign: int
    logabsdet: float

    @property
    def singular(self) -> bool:
        return self.sign == 0

    def solve(self, b) -> np.ndarray:
        """Solve A x = b for a vector or a matrix of right-hand sides."""
        if self.singular:
            raise np.linalg.LinAlgError("matrix is exactly singular")
        b = np.asarray(b, dtype=np.float64)
        x = b[self.perm].copy()
        n = self.lu.shape[0]
        for i in range(1, n):
            x[i] -= self.lu[i, :i] @ x[:i]
        for i in range(n - 1, -1, -1):
            x[i] -= self.lu[i, i + 1 :] @ x[i + 1 :]
            x[i] /= self.lu[i, i]
        return x


def lu_factorize(a) -> LUFactors:
    """LU with partial pivoting; pivot = largest |entry|, ties to lowest row."""
    a = _require_square(a)
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    sign = 1
    for k in range(n):
        # np.argmax returns the first maximizer, giving lowest-row tie-breaks.
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0.0:
            # Singular: determinant is exactly zero, remaining columns moot.
            return LUFactors(lu, perm, 0, float("-inf"))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    diag = np.diag(lu)
    sign *= int(np.prod(np.sign(diag)))
    logabsdet = float(np.sum(np.log(np.abs(diag))))
    return LUFactors(lu, perm, sign, logabsdet)


# Scaling-and-squaring target: after scaling, ||A / 2^s||_1 <= this bound.
_EXPM_NORM_BOUND = 0.5
# Truncated Taylor order used after scaling. Must stay below typical cycle
# lengths so that exp of a long pure cycle has an exactly-d trace.
_EXPM_TAYLOR_ORDER = 13


def matrix_exp(a) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with truncated Taylor.

    Overflow is not an error: entries that exceed float64 range become
    +/-inf and propagate to the caller, which is the behavior the
    constraint-stability probes rely on.
    """
    a = _require_square(a)
    norm1 = float(np.max(np.sum(np.abs(a), axis=0))) if a.size else 0.0
    if not np.isfinite(norm1):
        raise ValueError("matrix_exp requires finite entries")
    s = 0
    if norm1 > _EXPM_NORM_BOUND:
        s = int(np.ceil(np.log2(norm1 / _EXPM_NORM_BOUND)))
    b = a / (2.0**s)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, _EXPM_TAYLOR_ORDER + 1):
            term = (term @ b) / k
            result = result + term
        for _ in range(s):
            result = result @ result
    return result


def matrix_power(a, k: int) -> np.ndarray:
    """A^k by repeated squaring; A^0 is the identity."""
    a = _require_square(a)
    if k < 0:
        raise ValueError("exponent must be nonnegative")
    result = np.eye(a.shape[0])
    base = a.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        while k > 0:
            if k & 1:
                result = result @ base
            k >>= 1
            if k:
                base = base @ base
    return result


@dataclass
class PowerIterState:
    """Left (u) and right (v) dominant-eigenvector estimates, unit norm."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def uniform(cls, d: int) -> "PowerIterState":
        vec = np.full(d, 1.0 / np.sqrt(d))
        return cls(u=vec.copy(), v=vec.copy())

    def copy(self) -> "PowerIterState":
        return PowerIterState(self.u.copy(), self.v.copy())


def _bilinear_estimate(a: np.ndarray, u: np.ndarray, v: np.ndarray):
    denom = float(u @ v)
    if abs(denom) < DEGENERACY_EPS:
        return None
    return float(u @ a @ v / denom)


def power_iteration(a, state: PowerIterState, iters: int):
    """Alternating left/right power iteration for the dominant eigenvalue.

    Each iteration maps u <- normalize(A^T u) and v <- normalize(A v); the
    returned estimate is the bilinear form u^T A v / (u^T v). Returns
    (lambda_est, new_state, degenerate) where `degenerate` flags a collapsed
    u^T v denominator; in that case the estimate from the incoming state is
    returned instead.
    """
    a = _require_square(a)
    if np.isnan(a).any():
        raise ValueError("power_iteration requires NaN-free input")
    u, v = state.u.copy(), state.v.copy()
    last_valid = _bilinear_estimate(a, u, v)
    for _ in range(iters):
        u_new = a.T @ u
        nu = float(np.linalg.norm(u_new))
        if nu > 0.0:
            u = u_new / nu
        v_new = a @ v
        nv = float(np.linalg.norm(v_new))
        if nv > 0.0:
            v = v_new / nv
        est = _bilinear_estimate(a, u, v)
        if est is not None:
            last_valid = est
    new_state = PowerIterState(u=u, v=v)
    lam = _bilinear_estimate(a, u, v)
    if lam is None:
        return (last_valid if last_valid is not None else 0.0), new_state, True
    return lam, new_state, False


def save_matrix_csv(a, path) -> None:
    """Write a matrix as CSV, one row per line, 17 significant digits."""
    a = _as_matrix(a)
    with open(path, "w") as fh:
        for row in a:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    return np.asarray(rows, dtype=np.float64)
