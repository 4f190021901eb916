"""Dense complex linear-algebra kernels for per-frequency demixing updates.

Everything here targets small square systems (N <= 8, one per frequency bin)
in double-precision complex arithmetic.  Each kernel has a stacked variant
operating on a batch of matrices at once so a full sweep over frequency bins
is a single vectorized call; the single-matrix entry points reuse the stacked
code on a batch of one, so both paths share identical arithmetic.

Elimination uses partial pivoting and fails loudly: a pivot whose magnitude
falls below ``1e-12 * max |entry|`` of the original matrix raises
:class:`SingularMatrixError` instead of producing quiet garbage.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SingularMatrixError",
    "solve",
    "solve_stack",
    "inverse_stack",
    "log_abs_det",
    "log_abs_det_stack",
    "hermitian_quadratic",
]

# Relative pivot threshold below which a matrix counts as singular.
PIVOT_RTOL = 1e-12

HERMITIAN_RTOL = 1e-10


class SingularMatrixError(ValueError):
    """A matrix is singular to working precision.

    Attributes:
        pivot_magnitude: Magnitude of the offending pivot.
        stack_index: Position within the batch for stacked calls (``None``
            for single-matrix calls).
    """

    def __init__(
        self,
        pivot_magnitude: float,
        stack_index: int | None = None,
        detail: str = "",
    ):
        self.pivot_magnitude = float(pivot_magnitude)
        self.stack_index = stack_index
        where = "" if stack_index is None else f" at stack index {stack_index}"
        if detail:
            where += f" ({detail})"
        super().__init__(
            f"matrix singular to working precision{where}: "
            f"|pivot| = {self.pivot_magnitude:.3e}"
        )


def _as_stack(mats: np.ndarray) -> np.ndarray:
    a = np.asarray(mats, dtype=np.complex128)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected a (batch, N, N) stack, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix stack contains non-finite entries")
    return a


def _lu_factor(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-pivoted LU of a stack of square matrices.

    Returns the packed LU factors (unit lower triangle implicit) and the row
    permutation applied to each matrix.  Raises on any pivot below the
    relative threshold.
    """
    a = _as_stack(mats).copy()
    batch, n, _ = a.shape
    perm = np.tile(np.arange(n), (batch, 1))
    scale = np.max(np.abs(a), axis=(1, 2))
    scale = np.where(scale > 0.0, scale, 1.0)
    rows = np.arange(batch)
    for k in range(n):
        p = np.argmax(np.abs(a[:, k:, k]), axis=1) + k
        pivot_mag = np.abs(a[rows, p, k])
        bad = pivot_mag < PIVOT_RTOL * scale
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise SingularMatrixError(float(pivot_mag[idx]), stack_index=idx)
        swap = p != k
        if np.any(swap):
            tmp = a[rows, k].copy()
            a[rows, k] = a[rows, p]
            a[rows, p] = tmp
            tperm = perm[rows, k].copy()
            perm[rows, k] = perm[rows, p]
            perm[rows, p] = tperm
        if k + 1 < n:
            a[:, k + 1 :, k] /= a[:, k, k][:, None]
            a[:, k + 1 :, k + 1 :] -= (
                a[:, k + 1 :, k][:, :, None] * a[:, k, k + 1 :][:, None, :]
            )
    return a, perm


def _lu_solve(lu: np.ndarray, perm: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward/back substitution for a stack of factored systems.

    ``rhs`` has shape (batch, N, K).
    """
    batch, n, _ = lu.shape
    x = np.take_along_axis(rhs, perm[:, :, None], axis=1).astype(np.complex128)
    for k in range(1, n):
        x[:, k] -= np.sum(lu[:, k, :k, None] * x[:, :k], axis=1)
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            x[:, k] -= np.sum(lu[:, k, k + 1 :, None] * x[:, k + 1 :], axis=1)
        x[:, k] /= lu[:, k, k][:, None]
    return x


def solve_stack(mats: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mats[b] @ x[b] = rhs`` for every matrix in the stack.

    Args:
        mats: (batch, N, N) complex stack.
        rhs: either a shared (N,) vector or a (batch, N) stack of vectors.

    Returns:
        (batch, N) solutions.
    """
    a = _as_stack(mats)
    b = np.asarray(rhs, dtype=np.complex128)
    if b.ndim == 1:
        b = np.broadcast_to(b, (a.shape[0], b.shape[0]))
    if b.shape != a.shape[:2]:
        raise ValueError(f"rhs shape {b.shape} incompatible with stack {a.shape}")
    lu, perm = _lu_factor(a)
    return _lu_solve(lu, perm, b[:, :, None])[:, :, 0]


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a single N x N complex system with partial pivoting.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-12 * max |entry|``.
    """
    a = np.asarray(matrix, dtype=np.complex128)
    try:
        return solve_stack(a[None], np.asarray(rhs)[None])[0]
    except SingularMatrixError as err:
        raise SingularMatrixError(err.pivot_magnitude) from None


def inverse_stack(mats: np.ndarray) -> np.ndarray:
    """Inverses of a stack of square matrices via the pivoted LU."""
    a = _as_stack(mats)
    batch, n, _ = a.shape
    lu, perm = _lu_factor(a)
    eye = np.broadcast_to(np.eye(n, dtype=np.complex128), (batch, n, n)).copy()
    return _lu_solve(lu, perm, eye)


def log_abs_det_stack(mats: np.ndarray) -> np.ndarray:
    """log |det M| for each matrix in the stack, from the LU pivots."""
    lu, _ = _lu_factor(mats)
    diag = np.diagonal(lu, axis1=1, axis2=2)
    return np.sum(np.log(np.abs(diag)), axis=1)


def log_abs_det(matrix: np.ndarray) -> float:
    """log |det M| of a single nonsingular square matrix."""
    a = np.asarray(matrix, dtype=np.complex128)
    try:
        return float(log_abs_det_stack(a[None])[0])
    except SingularMatrixError as err:
        raise SingularMatrixError(err.pivot_magnitude) from None


def hermitian_quadratic(w: np.ndarray, u: np.ndarray) -> float:
    """Real quadratic form ``w^H U w`` for Hermitian ``U``.

    ``U`` must be Hermitian to within a 1e-10 relative defect, and the
    imaginary residue of the result must stay below 1e-10 of its real part;
    both conditions raise ``ValueError`` when violated.
    """
    w = np.asarray(w, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or w.shape != (u.shape[0],):
        raise ValueError(f"shape mismatch: w {w.shape}, U {u.shape}")
    scale = max(float(np.max(np.abs(u))), 1.0)
    defect = float(np.max(np.abs(u - u.conj().T)))
    if defect > HERMITIAN_RTOL * scale:
        raise ValueError(f"matrix is not Hermitian: defect {defect:.3e}")
    value = complex(w.conj() @ (u @ w))
    if abs(value.imag) > 1e-10 * abs(value.real) + np.finfo(float).tiny:
        raise ValueError(
            f"quadratic form has imaginary residue {value.imag:.3e} "
            f"for real part {value.real:.3e}"
        )
    return float(value.real)
