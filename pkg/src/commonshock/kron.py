"""Dense Kronecker-product helpers used to assemble structured covariances.

The heavy lifting is delegated to numpy; these wrappers fix the conventions
(2-d float arrays everywhere) relied on by the covariance builders.
"""

import numpy as np


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two dense matrices.

    Block (i, j) of the result equals ``a[i, j] * b``, so an (m, n) and a
    (p, q) input produce an (m*p, n*q) output.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return np.kron(a, b)


def ones_vector(n: int) -> np.ndarray:
    """Column vector of ones, shape (n, 1)."""
    return np.ones((n, 1))


def identity(n: int) -> np.ndarray:
    return np.eye(n)
