"""Truncated Carleman linearization of a polynomial system.

The lifted state stacks the Kronecker powers ``x, x(x)x, ...`` up to the
truncation order. Its generator ``A_c`` is block upper-triangular; block
``(i, i+j-1)`` is the transfer block of ``A_j`` at level ``i`` and every block
whose column would exceed the truncation order is dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .poly_ode import PolynomialSystem, kron_power
from .sparse_core import (
    BlockMatrix,
    SparseMatrix,
    check_dim,
    identity,
    kron,
)


def lifted_dim(n: int, n_t: int) -> int:
    if n < 1 or n_t < 1:
        raise ValueError("need n >= 1 and n_t >= 1")
    if n == 1:
        return n_t
    return (n ** (n_t + 1) - n) // (n - 1)


def block_offsets(n: int, n_t: int) -> tuple[int, ...]:
    off = [0]
    for i in range(1, n_t + 1):
        off.append(off[-1] + n**i)
    return tuple(off)


def transfer_block(a_j: SparseMatrix, j: int, i: int, n_state: int) -> SparseMatrix:
    """Block mapping ``x^(i+j-1)`` into ``d/dt x^(i)`` generated by ``A_j``.

    Built by the recursion ``A_j^1 = A_j``,
    ``A_j^i = A_j (x) I^(i-1) + I (x) A_j^(i-1)``.
    """
    if a_j.shape != (n_state, n_state**j):
        raise ValueError(f"A_{j} has shape {a_j.shape}, expected {(n_state, n_state**j)}")
    if i < 1:
        raise ValueError("level i must be >= 1")
    check_dim(n_state ** (i + j - 1), "transfer block column", "reduce the truncation order")
    block = a_j
    eye_n = identity(n_state)
    for level in range(2, i + 1):
        block = kron(a_j, identity(n_state ** (level - 1))) + kron(eye_n, block)
    return block


@dataclass(frozen=True, eq=False)
class CarlemanSystem:
    base: PolynomialSystem
    n_t: int
    offsets: tuple[int, ...]
    a_c: BlockMatrix
    _implicit: dict = field(default_factory=dict, repr=False)

    @property
    def n_state(self) -> int:
        return self.base.n_state

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def nnz(self) -> int:
        return self.a_c.nnz

    @cached_property
    def flat(self) -> SparseMatrix:
        return self.a_c.flat

    def apply(self, X) -> np.ndarray:
        """``A_c @ X``."""
        return self.flat.csr @ np.asarray(X, dtype=float)

    def implicit_operator(self, dt: float) -> BlockMatrix:
        """``I - dt*A_c`` in block form; cached per ``dt`` so its factors are reused."""
        key = float(dt)
        op = self._implicit.get(key)
        if op is None:
            sizes = self.a_c.block_sizes()

            def shift(k, blk):
                out = blk.scale(-key)
                return out + identity(sizes[k[0]]) if k[0] == k[1] else out

            op = self.a_c.map_blocks(shift)
            self._implicit[key] = op
        return op


def assemble(sys: PolynomialSystem, n_t: int) -> CarlemanSystem:
    if n_t < 1:
        raise ValueError("truncation order must be >= 1")
    n = sys.n_state
    check_dim(lifted_dim(n, n_t), "Carleman system", f"use a truncation order below {n_t}")
    offsets = block_offsets(n, n_t)
    blocks: dict[tuple[int, int], SparseMatrix] = {}
    for i in range(1, n_t + 1):
        for j, a_j in enumerate(sys.coeffs, start=1):
            c = i + j - 1
            if c > n_t:
                break
            blocks[(i - 1, c - 1)] = transfer_block(a_j, j, i, n)
    return CarlemanSystem(sys, n_t, offsets, BlockMatrix(offsets, blocks))


def lift(x, n_t: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n_t < 1:
        raise ValueError("truncation order must be >= 1")
    check_dim(lifted_dim(x.size, n_t), "lifted state")
    parts = [x]
    for _ in range(n_t - 1):
        parts.append(np.multiply.outer(x, parts[-1]).ravel())
    return np.concatenate(parts)


def readout(X, n_state: int) -> np.ndarray:
    return np.asarray(X, dtype=float)[:n_state].copy()


def split_blocks(X, n_state: int) -> list[np.ndarray]:
    X = np.asarray(X, dtype=float)
    out, lo, size = [], 0, n_state
    while lo < X.size:
        out.append(X[lo : lo + size])
        lo += size
        size *= n_state
    if lo != X.size:
        raise ValueError(f"length {X.size} is not a lifted length for n_state={n_state}")
    return out


def rescale_system(sys: PolynomialSystem, gamma: float) -> PolynomialSystem:
    """Same dynamics in ``z = x / gamma``: ``A_j`` becomes ``gamma**(j-1) A_j``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    coeffs = tuple(a.scale(gamma ** (j - 1)) for j, a in enumerate(sys.coeffs, start=1))
    return PolynomialSystem(sys.n_state, coeffs)


def consistency_defect(X, n_state: int) -> float:
    """Largest deviation of any block from the Kronecker power of the readout."""
    blocks = split_blocks(X, n_state)
    if len(blocks) < 2:
        raise ValueError("consistency defect needs truncation order >= 2")
    x = blocks[0]
    return max(float(np.max(np.abs(b - kron_power(x, i)))) for i, b in enumerate(blocks, start=1))


def block_offsets_text(cs: CarlemanSystem) -> str:
    lines = [f"# n_state={cs.n_state} n_t={cs.n_t} dim={cs.dim}", "# level start end"]
    for i, (lo, hi) in enumerate(zip(cs.offsets, cs.offsets[1:]), start=1):
        lines.append(f"{i} {lo} {hi}")
    return "\n".join(lines) + "\n"
