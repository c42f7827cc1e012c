"""Polynomial right-hand sides ``F(x) = sum_j A_j x^(kron j)`` and their Jacobians."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .sparse_core import SparseMatrix, check_dim

DENSE_EVAL_MAX = 250_000


def kron_power(x, i: int) -> np.ndarray:
    """``x`` Kronecker-multiplied with itself ``i`` times (first factor most significant)."""
    x = np.asarray(x, dtype=float)
    if i < 1:
        raise ValueError("Kronecker power needs i >= 1")
    check_dim(x.size**i, "Kronecker power")
    out = x
    for _ in range(i - 1):
        out = np.multiply.outer(x, out).ravel()
    return out


def column_digits(cols: np.ndarray, n: int, j: int) -> np.ndarray:
    """Mixed-radix digits of Kronecker column indices, shape ``(len(cols), j)``.

    Digit 0 is the most significant, i.e. the factor index of the leftmost ``x``.
    """
    cols = np.asarray(cols, dtype=np.int64)
    digits = np.empty((cols.size, j), dtype=np.int64)
    rest = cols.copy()
    for m in range(j - 1, -1, -1):
        digits[:, m] = rest % n
        rest //= n
    return digits


@dataclass(frozen=True, eq=False)
class PolynomialSystem:
    """``dx/dt = sum_j A_j x^(kron j)`` with ``A_j`` of shape ``n x n**j``."""

    n_state: int
    coeffs: tuple[SparseMatrix, ...]

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.n_state < 1:
            raise ValueError("n_state must be >= 1")
        if not coeffs:
            raise ValueError("need at least the linear coefficient A_1")
        for j, a in enumerate(coeffs, start=1):
            want = (self.n_state, check_dim(self.n_state**j, f"A_{j} column"))
            if a.shape != want:
                raise ValueError(f"A_{j} has shape {a.shape}, expected {want}")

    @classmethod
    def from_dense(cls, coeffs: Sequence) -> "PolynomialSystem":
        mats = [SparseMatrix.from_dense(c) for c in coeffs]
        return cls(mats[0].rows, tuple(mats))

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolynomialSystem):
            return NotImplemented
        return self.n_state == other.n_state and self.coeffs == other.coeffs

    __hash__ = None

    @cached_property
    def _monomials(self):
        # Only columns that actually appear in some A_j are evaluated. Digits are
        # padded with index n_state, which points at a trailing 1.0 in the
        # extended state, so every degree shares one product.
        n, d = self.n_state, self.degree
        blocks, digits = [], []
        for j, a in enumerate(self.coeffs, start=1):
            cols = np.unique(a.csr.indices)
            if cols.size == 0:
                continue
            dig = np.full((cols.size, d), n, dtype=np.int64)
            dig[:, :j] = column_digits(cols, n, j)
            digits.append(dig)
            blocks.append(a.csr[:, cols])
        if not blocks:
            return np.zeros((0, d), dtype=np.int64), sp.csr_array((n, 0))
        return np.vstack(digits), sp.hstack(blocks, format="csr")

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Unchecked fast path of :func:`eval_rhs`."""
        digits, mat = self._monomials
        xe = np.append(x, 1.0)
        return mat @ np.prod(xe[digits], axis=1)

    @cached_property
    def evaluator(self):
        """``f(xe) -> F(x)`` on the extended state ``xe = (x, 1)``, for stepping loops.

        Small coefficient tables are densified; one gather per factor beats a
        general reduction for degree <= 3.
        """
        digits, mat = self._monomials
        cols = [np.ascontiguousarray(digits[:, k]) for k in range(digits.shape[1])]
        op = mat.toarray() if mat.shape[0] * mat.shape[1] <= DENSE_EVAL_MAX else mat
        first, rest = cols[0], cols[1:]

        def f(xe: np.ndarray) -> np.ndarray:
            m = xe[first]
            for c in rest:
                m = m * xe[c]
            return op @ m

        return f

    def term(self, j: int, x) -> np.ndarray:
        """Contribution ``A_j x^(kron j)`` of a single degree."""
        return self.coeffs[j - 1].csr @ kron_power(x, j)


def _check_state(sys: PolynomialSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n_state,):
        raise ValueError(f"state of shape {x.shape} does not match n_state={sys.n_state}")
    return x


def eval_rhs(sys: PolynomialSystem, x) -> np.ndarray:
    return sys.eval(_check_state(sys, x))


def jacobian(sys: PolynomialSystem, x) -> SparseMatrix:
    """Analytic ``dF/dx`` as an ``n x n`` sparse matrix."""
    x = _check_state(sys, x)
    n, d = sys.n_state, sys.degree
    digits, mat = sys._monomials
    xe = np.append(x, 1.0)
    vals = xe[digits]
    rows, cols, data = [], [], []
    for m in range(d):
        others = np.prod(np.delete(vals, m, axis=1), axis=1)
        active = digits[:, m] < n
        rows.append(np.nonzero(active)[0])
        cols.append(digits[active, m])
        data.append(others[active])
    dmono = sp.csr_array(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(digits.shape[0], n),
    )
    return SparseMatrix.from_scipy(mat @ dmono)


def jacobian_by_kron(sys: PolynomialSystem, x) -> SparseMatrix:
    """Product-rule formula ``sum_j A_j sum_k x^(k-1) (x) I (x) x^(j-k)``.

    Slow; kept as the literal form of the Jacobian for cross-checks.
    """
    x = _check_state(sys, x)
    n = sys.n_state
    total = sp.csr_array((n, n))
    eye = sp.identity(n, format="csr")
    for j, a in enumerate(sys.coeffs, start=1):
        acc = sp.csr_array((n**j, n))
        for k in range(1, j + 1):
            left = kron_power(x, k - 1).reshape(-1, 1) if k > 1 else np.ones((1, 1))
            right = kron_power(x, j - k).reshape(-1, 1) if j > k else np.ones((1, 1))
            acc = acc + sp.kron(sp.kron(sp.csr_array(left), eye), sp.csr_array(right), format="csr")
        total = total + a.csr @ acc
    return SparseMatrix.from_scipy(total)
