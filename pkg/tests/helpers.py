"""Independent oracles and random generators shared by the tests."""
import numpy as np

from carleman_kinetics.poly_ode import PolynomialSystem
from carleman_kinetics.sparse_core import SparseMatrix, identity, kron


def random_system(rng, n, degree, density=0.5, scale=1.0) -> PolynomialSystem:
    coeffs = []
    for j in range(1, degree + 1):
        a = rng.uniform(-scale, scale, (n, n**j))
        a[rng.random(a.shape) > density] = 0.0
        coeffs.append(SparseMatrix.from_dense(a))
    return PolynomialSystem(n, tuple(coeffs))


def summation_transfer_block(a_j: SparseMatrix, i: int, n: int) -> SparseMatrix:
    """sum_k I^(k-1) (x) A_j (x) I^(i-k), written without the recursion."""
    total = None
    for k in range(1, i + 1):
        term = kron(kron(identity(n ** (k - 1)), a_j), identity(n ** (i - k)))
        total = term if total is None else total + term
    return total


def dense_kron_power(x, i):
    out = np.ones(1)
    for _ in range(i):
        out = np.kron(out, x)
    return out


def product_rule_derivative(f, x, i):
    """d/dt x^(kron i) = sum_k x^(k-1) (x) f (x) x^(i-k)."""
    total = np.zeros(x.size**i)
    for k in range(1, i + 1):
        total += np.kron(np.kron(dense_kron_power(x, k - 1), f), dense_kron_power(x, i - k))
    return total
