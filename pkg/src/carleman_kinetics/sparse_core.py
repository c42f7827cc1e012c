"""Sparse-matrix primitives: Kronecker products, block assembly and direct solves.

Storage and LU factorization are delegated to :mod:`scipy.sparse`; what lives
here is the canonical form (summed duplicates, row-major order, finite values)
and the block back-substitution used by the implicit Carleman step.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Largest row/column count we agree to build. Beyond this index arithmetic
# leaves int64 comfort and memory is long gone anyway.
MAX_DIM = 2**40

SOLVE_RTOL = 1e-10
PIVOT_RTOL = 1e-14
# off-diagonal strips this small are stored dense; a dense dot beats sparse dispatch
DENSE_STRIP_MAX = 4096


class DimensionOverflow(ValueError):
    """Requested matrix or vector is larger than :data:`MAX_DIM`."""

    def __init__(self, size: int, what: str = "matrix", hint: str = ""):
        msg = f"{what} dimension {size} exceeds the addressable limit {MAX_DIM}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)
        self.size = size


class SingularMatrix(ArithmeticError):
    pass


class SingularBlock(SingularMatrix):
    def __init__(self, block: int, detail: str = ""):
        super().__init__(f"diagonal block {block} is singular" + (f" ({detail})" if detail else ""))
        self.block = block


def check_dim(size: int, what: str = "matrix", hint: str = "") -> int:
    if size > MAX_DIM:
        raise DimensionOverflow(size, what, hint)
    return size


class SparseMatrix:
    """Immutable real sparse matrix with explicit shape.

    Construction sums duplicate ``(row, col)`` pairs, drops explicit zeros and
    sorts entries row-major, so two matrices with the same values always carry
    identical storage.
    """

    def __init__(self, rows: int, cols: int, entries: Iterable[tuple[int, int, float]] = ()):
        entries = list(entries)
        if entries:
            r, c, v = (np.asarray(a) for a in zip(*entries))
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        self._csr = _canonical(sp.coo_array((v.astype(float), (r.astype(np.int64), c.astype(np.int64))), shape=(rows, cols)))

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        obj = cls.__new__(cls)
        obj._csr = _canonical(sp.csr_array(m))
        return obj

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_array(np.atleast_2d(np.asarray(a, dtype=float))))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls(rows, cols)

    @property
    def csr(self) -> sp.csr_array:
        return self._csr

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def entries(self) -> list[tuple[int, int, float]]:
        coo = self._csr.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def pattern(self) -> set[tuple[int, int]]:
        coo = self._csr.tocoo()
        return set(zip(coo.row.tolist(), coo.col.tolist()))

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            return SparseMatrix.from_scipy(self._csr @ other._csr)
        return spmv(self, other)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} + {other.shape}")
        return SparseMatrix.from_scipy(self._csr + other._csr)

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        return self + other.scale(-1.0)

    def scale(self, factor: float) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr * float(factor))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        a, b = self._csr, other._csr
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


def _canonical(m) -> sp.csr_array:
    csr = sp.csr_array(m, dtype=float)
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    if not np.all(np.isfinite(csr.data)):
        raise ValueError("sparse matrix entries must be finite")
    return csr


def identity(n: int) -> SparseMatrix:
    if n < 1:
        raise ValueError("identity size must be >= 1")
    return SparseMatrix.from_scipy(sp.identity(n, format="csr"))


def kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    check_dim(a.rows * b.rows, "kron row")
    check_dim(a.cols * b.cols, "kron column")
    return SparseMatrix.from_scipy(sp.kron(a.csr, b.csr, format="csr"))


def kron_vec(x, y) -> np.ndarray:
    return np.kron(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def spmv(m: SparseMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != m.cols:
        raise ValueError(f"vector of length {v.shape} does not match {m.rows}x{m.cols} matrix")
    return m.csr @ v


def hstack(mats: list[SparseMatrix]) -> SparseMatrix:
    return SparseMatrix.from_scipy(sp.hstack([m.csr for m in mats], format="csr"))


class _LU:
    """SuperLU factor with the relative-pivot singularity test applied.

    A purely diagonal matrix is its own LU factor; it is kept as reciprocal
    pivots so tiny blocks do not pay SuperLU call overhead.
    """

    def __init__(self, m: sp.csr_array, block: int | None = None):
        n, k = m.shape
        if n != k:
            raise ValueError(f"cannot factorize non-square {n}x{k} matrix")
        scale = abs(m.data).max() if m.nnz else 0.0
        err = SingularMatrix("matrix is singular") if block is None else SingularBlock(block)
        if scale == 0.0:
            raise err
        self.n = n
        self.lu = None
        coo = m.tocoo()
        if np.all(coo.row == coo.col):
            pivots = m.diagonal()
            if np.min(np.abs(pivots)) < PIVOT_RTOL * scale:
                raise err
            self.inv_diag = 1.0 / pivots
            return
        try:
            # diag_pivot_thresh=1 is classic partial pivoting
            self.lu = spla.splu(m.tocsc(), diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            raise err from exc
        pivots = np.abs(self.lu.U.diagonal())
        if pivots.min() < PIVOT_RTOL * scale:
            raise err

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return rhs * self.inv_diag
        return self.lu.solve(rhs)


def solve_sparse_lu(m: SparseMatrix, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (m.rows,):
        raise ValueError(f"rhs length {rhs.shape} does not match {m.rows} rows")
    return _LU(m.csr).solve(rhs)


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """Square block matrix; ``offsets`` are the shared row/column boundaries.

    ``blocks`` maps ``(block_row, block_col)`` to the block contents. Missing
    keys are zero blocks.
    """

    offsets: tuple[int, ...]
    blocks: Mapping[tuple[int, int], SparseMatrix] = field(default_factory=dict)

    def __post_init__(self):
        off = tuple(int(o) for o in self.offsets)
        if off[0] != 0 or any(b <= a for a, b in zip(off, off[1:])):
            raise ValueError(f"block offsets must start at 0 and increase strictly: {off}")
        object.__setattr__(self, "offsets", off)
        nb = len(off) - 1
        for (i, j), blk in self.blocks.items():
            if not (0 <= i < nb and 0 <= j < nb):
                raise ValueError(f"block index {(i, j)} outside a {nb}x{nb} partition")
            want = (off[i + 1] - off[i], off[j + 1] - off[j])
            if blk.shape != want:
                raise ValueError(f"block {(i, j)} has shape {blk.shape}, expected {want}")

    @property
    def n_blocks(self) -> int:
        return len(self.offsets) - 1

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def nnz(self) -> int:
        return sum(b.nnz for b in self.blocks.values())

    def block_sizes(self) -> list[int]:
        return [b - a for a, b in zip(self.offsets, self.offsets[1:])]

    def is_upper(self) -> bool:
        return all(j >= i for i, j in self.blocks)

    def block(self, i: int, j: int) -> SparseMatrix:
        blk = self.blocks.get((i, j))
        if blk is None:
            sizes = self.block_sizes()
            return SparseMatrix.zeros(sizes[i], sizes[j])
        return blk

    @cached_property
    def flat(self) -> SparseMatrix:
        nb = self.n_blocks
        grid = [[self.blocks[(i, j)].csr if (i, j) in self.blocks else None for j in range(nb)] for i in range(nb)]
        sizes = self.block_sizes()
        # sp.block_array needs at least one entry per block row/column to infer shapes
        for k in range(nb):
            if all(g is None for g in grid[k]) or all(grid[r][k] is None for r in range(nb)):
                grid[k][k] = sp.csr_array((sizes[k], sizes[k])) if grid[k][k] is None else grid[k][k]
        return SparseMatrix.from_scipy(sp.block_array(grid, format="csr"))

    def matvec(self, v) -> np.ndarray:
        return spmv(self.flat, v)

    def map_blocks(self, fn) -> "BlockMatrix":
        return BlockMatrix(self.offsets, {k: fn(k, b) for k, b in self.blocks.items()})

    @cached_property
    def factor(self) -> "BlockTriangularFactor":
        return BlockTriangularFactor(self)


class BlockTriangularFactor:
    """Per-block LU factors of a block upper-triangular matrix.

    Every diagonal block is factorized exactly once; the strictly-upper part of
    each block row is kept as one horizontal strip so a back-substitution
    sweep costs one sparse product and one triangular solve per block row.
    """

    def __init__(self, m: BlockMatrix):
        if not m.is_upper():
            raise ValueError("matrix is not block upper-triangular")
        off = m.offsets
        nb = m.n_blocks
        self.offsets = off
        self.lus: list[_LU] = []
        self.strips: list[sp.csr_array | None] = []
        for i in range(nb):
            self.lus.append(_LU(m.block(i, i).csr, block=i))
            right = [m.blocks[(i, j)] for j in range(i + 1, nb) if (i, j) in m.blocks]
            if not right:
                self.strips.append(None)
                continue
            strip = hstack([m.block(i, j) for j in range(i + 1, nb)])
            if not strip.nnz:
                self.strips.append(None)
            elif strip.rows * strip.cols <= DENSE_STRIP_MAX:
                self.strips.append(strip.toarray())
            else:
                self.strips.append(strip.csr)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        off = self.offsets
        if rhs.shape != (off[-1],):
            raise ValueError(f"rhs length {rhs.shape} does not match dimension {off[-1]}")
        x = np.empty_like(rhs)
        for i in range(len(self.lus) - 1, -1, -1):
            lo, hi = off[i], off[i + 1]
            r = rhs[lo:hi]
            strip = self.strips[i]
            if strip is not None:
                r = r - strip @ x[hi:]
            x[lo:hi] = self.lus[i].solve(r)
        return x


def solve_block_upper_triangular(m: BlockMatrix, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` by block back-substitution.

    Diagonal-block factors are cached on ``m`` and reused by later calls.
    """
    return m.factor.solve(rhs)


def residual(m: SparseMatrix | BlockMatrix, x, rhs) -> float:
    """Relative residual ``||m x - rhs||_inf / max(1, ||rhs||_inf)``."""
    rhs = np.asarray(rhs, dtype=float)
    mx = m.matvec(x) if isinstance(m, BlockMatrix) else spmv(m, x)
    return float(np.max(np.abs(mx - rhs), initial=0.0) / max(1.0, np.max(np.abs(rhs), initial=0.0)))


def write_matrix_market(m: SparseMatrix, fh=None, comment: str = "") -> str:
    """MatrixMarket coordinate text, 1-based, entries in row-major order."""
    out = io.StringIO()
    out.write("%%MatrixMarket matrix coordinate real general\n")
    for line in comment.splitlines():
        out.write(f"% {line}\n")
    out.write(f"{m.rows} {m.cols} {m.nnz}\n")
    for r, c, v in m.entries():
        out.write(f"{r + 1} {c + 1} {v!r}\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_matrix_market(text: str) -> SparseMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("%")]
    rows, cols, nnz = (int(t) for t in lines[0].split())
    entries = []
    for ln in lines[1 : 1 + nnz]:
        r, c, v = ln.split()
        entries.append((int(r) - 1, int(c) - 1, float(v)))
    return SparseMatrix(rows, cols, entries)
