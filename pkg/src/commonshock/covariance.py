"""Parametric covariance structures for the stacked log observations.

Every structure here is linear in its variance components,
Sigma(omega) = sum_k omega_k D_k with fixed symmetric D_k, which makes the
analytic derivatives trivial and lets the score equations be written in
terms of the D_k alone. Each structure also knows its Gamma-and-L
factorization Sigma = L Gamma L^T, with Gamma the block-diagonal covariance
of the stacked shock and idiosyncratic vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, NumericalError
from .kron import kron

STRUCTURE_NAMES = ("diagonal_scalar", "example48", "cellwise_two_level")


class GammaStructure:
    """Interface shared by the covariance structures.

    Subclasses define ``omega_names``, ``zero_allowed`` (whether each
    component may sit on the zero boundary while Sigma stays positive
    definite), and the derivative matrices ``dsigma_matrices``.
    """

    omega_names: tuple = ()
    zero_allowed: tuple = ()

    @property
    def n_params(self) -> int:
        return len(self.omega_names)

    def _check(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float).ravel()
        if omega.size != self.n_params:
            raise ConfigError(
                f"expected {self.n_params} variance components "
                f"{self.omega_names}, got {omega.size}"
            )
        if np.any(omega < 0):
            raise ConfigError("variance components must be non-negative")
        return omega

    def sigma(self, omega) -> np.ndarray:
        omega = self._check(omega)
        mats = self.dsigma_matrices()
        out = np.zeros_like(mats[0])
        for w, d in zip(omega, mats):
            out += w * d
        return 0.5 * (out + out.T)

    def dsigma_matrices(self) -> list:
        raise NotImplementedError

    def gamma_matrix(self, omega) -> np.ndarray:
        raise NotImplementedError

    def l_matrix(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class CellwiseTwoLevel(GammaStructure):
    """Across-array shock shared cell by cell plus a white idiosyncratic term.

    Sigma = sigma2 (1_N 1_N^T kron I_cells) + v2 I. omega = (sigma2, v2).
    """

    n_arrays: int
    cells: int

    omega_names = ("sigma2", "v2")
    zero_allowed = (True, False)

    def dsigma_matrices(self) -> list:
        d_shock = kron(np.ones((self.n_arrays, self.n_arrays)), np.eye(self.cells))
        return [d_shock, np.eye(self.n_arrays * self.cells)]

    def gamma_matrix(self, omega) -> np.ndarray:
        s2, v2 = self._check(omega)
        n = self.n_arrays * self.cells
        return np.diag(np.concatenate([np.full(self.cells, s2), np.full(n, v2)]))

    def l_matrix(self) -> np.ndarray:
        n = self.n_arrays * self.cells
        return np.hstack([kron(np.ones((self.n_arrays, 1)), np.eye(self.cells)), np.eye(n)])

    def analytic_inverse(self, omega) -> np.ndarray:
        s2, v2 = self._check(omega)
        return sigma_inverse_cellwise(s2, v2, self.cells, self.n_arrays)


@dataclass(frozen=True)
class DiagonalScalar(GammaStructure):
    """Scalar-block Gamma: sigma2 I_P, optionally tau2 I_NP, and v2 I.

    Built from the design's shock coefficient blocks A (and B when within
    shocks are present): Sigma = sigma2 A A^T [+ tau2 B B^T] + v2 I.
    omega = (sigma2[, tau2], v2).
    """

    A: np.ndarray
    B: np.ndarray = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        if self.B is not None and np.asarray(self.B).size == 0:
            object.__setattr__(self, "B", None)
        if self.B is not None:
            B = np.asarray(self.B, dtype=float)
            if B.shape[0] != A.shape[0]:
                raise ConfigError("A and B must have the same number of rows")
            object.__setattr__(self, "B", B)
        names = ("sigma2", "tau2", "v2") if self.B is not None else ("sigma2", "v2")
        zeros = (True, True, False) if self.B is not None else (True, False)
        object.__setattr__(self, "omega_names", names)
        object.__setattr__(self, "zero_allowed", zeros)

    def dsigma_matrices(self) -> list:
        mats = [self.A @ self.A.T]
        if self.B is not None:
            mats.append(self.B @ self.B.T)
        mats.append(np.eye(self.A.shape[0]))
        return mats

    def gamma_matrix(self, omega) -> np.ndarray:
        omega = self._check(omega)
        n = self.A.shape[0]
        parts = [np.full(self.A.shape[1], omega[0])]
        if self.B is not None:
            parts.append(np.full(self.B.shape[1], omega[1]))
        parts.append(np.full(n, omega[-1]))
        return np.diag(np.concatenate(parts))

    def l_matrix(self) -> np.ndarray:
        n = self.A.shape[0]
        blocks = [self.A]
        if self.B is not None:
            blocks.append(self.B)
        blocks.append(np.eye(n))
        return np.hstack(blocks)


@dataclass(frozen=True)
class Example48(GammaStructure):
    """Shared development operator with per-array shock and noise scales.

    Sigma = (sigma2 1_N 1_N^T + Phi) kron (A0 R A0^T) + Psi kron I_cells with
    Phi = diag(tau2_1..tau2_N) and Psi = diag(v2_1..v2_N).
    omega = (sigma2, tau2_1..tau2_N, v2_1..v2_N), in that order.
    """

    n_arrays: int
    A0: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A0 = np.asarray(self.A0, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise ConfigError("A0 must be square")
        if R.shape != A0.shape:
            raise ConfigError("R must match the shape of A0")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "R", R)
        names = (
            ("sigma2",)
            + tuple(f"tau2_{n}" for n in range(1, self.n_arrays + 1))
            + tuple(f"v2_{n}" for n in range(1, self.n_arrays + 1))
        )
        object.__setattr__(self, "omega_names", names)
        object.__setattr__(
            self, "zero_allowed", (True,) + (True,) * self.n_arrays + (False,) * self.n_arrays
        )

    @property
    def cells(self) -> int:
        return self.A0.shape[0]

    def dsigma_matrices(self) -> list:
        N = self.n_arrays
        K = self.A0 @ self.R @ self.A0.T
        mats = [kron(np.ones((N, N)), K)]
        for n in range(N):
            e = np.zeros((N, N))
            e[n, n] = 1.0
            mats.append(kron(e, K))
        for n in range(N):
            e = np.zeros((N, N))
            e[n, n] = 1.0
            mats.append(kron(e, np.eye(self.cells)))
        return mats

    def gamma_matrix(self, omega) -> np.ndarray:
        omega = self._check(omega)
        N, c = self.n_arrays, self.cells
        s2 = omega[0]
        phi = np.diag(omega[1 : 1 + N])
        psi = omega[1 + N :]
        top = s2 * self.R
        mid = kron(phi, self.R)
        bottom = np.diag(np.repeat(psi, c))
        out = np.zeros((c + N * c + N * c, c + N * c + N * c))
        out[:c, :c] = top
        out[c : c + N * c, c : c + N * c] = mid
        out[c + N * c :, c + N * c :] = bottom
        return out

    def l_matrix(self) -> np.ndarray:
        N, c = self.n_arrays, self.cells
        return np.hstack(
            [kron(np.ones((N, 1)), self.A0), kron(np.eye(N), self.A0), np.eye(N * c)]
        )


def sigma_example48(n_arrays, sigma2, tau2, v2, A0, R) -> "SigmaModel":
    """Materialize the shared-operator structure directly from its pieces.

    tau2 and v2 are per-array vectors (length n_arrays).
    """
    structure = Example48(n_arrays, A0, R)
    omega = np.concatenate([[sigma2], np.asarray(tau2, float).ravel(), np.asarray(v2, float).ravel()])
    return SigmaModel(structure, omega)


def sigma_inverse_cellwise(sigma2: float, v2: float, cells: int, n_arrays: int = 2) -> np.ndarray:
    """Closed-form inverse of the two-array cell-matched structure.

    For N = 2, Sigma = sigma2 (1 1^T kron I) + v2 I inverts to
    (1 / (v2 (2 sigma2 + v2))) [[(sigma2+v2) I, -sigma2 I], [-sigma2 I, (sigma2+v2) I]].
    """
    if n_arrays != 2:
        raise ConfigError("the closed-form inverse is for exactly two arrays")
    if v2 <= 0:
        raise NumericalError("v2 must be positive, the structure is singular at v2 = 0")
    eye = np.eye(cells)
    scale = 1.0 / (v2 * (2.0 * sigma2 + v2))
    top = np.hstack([(sigma2 + v2) * eye, -sigma2 * eye])
    bottom = np.hstack([-sigma2 * eye, (sigma2 + v2) * eye])
    return scale * np.vstack([top, bottom])


def sigma_from_gamma(L: np.ndarray, structure: GammaStructure, omega) -> "SigmaModel":
    """Sigma = L Gamma(omega) L^T, symmetrized to machine precision."""
    L = np.asarray(L, dtype=float)
    gamma = structure.gamma_matrix(omega)
    if L.shape[1] != gamma.shape[0]:
        raise ConfigError(
            f"L has {L.shape[1]} columns but Gamma is {gamma.shape[0]} x {gamma.shape[0]}"
        )
    sig = L @ gamma @ L.T
    return SigmaModel(structure, omega, sigma=0.5 * (sig + sig.T))


def dsigma_domega(structure: GammaStructure, k: int) -> np.ndarray:
    """Analytic derivative of Sigma with respect to component k of omega."""
    mats = structure.dsigma_matrices()
    if not 0 <= k < len(mats):
        raise ConfigError(
            f"component index {k} out of range for {structure.omega_names}"
        )
    return mats[k]


class SigmaModel:
    """A covariance structure evaluated at a parameter vector.

    Holds the dense matrix and a Cholesky factor; solves and log-determinants
    go through the factor rather than an explicit inverse.
    """

    def __init__(self, structure: GammaStructure, omega, sigma: np.ndarray | None = None):
        self.structure = structure
        self.omega = np.asarray(omega, dtype=float).ravel()
        self.sigma = structure.sigma(self.omega) if sigma is None else np.asarray(sigma, float)
        try:
            self._cho = cho_factor(self.sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"covariance is not positive definite at omega = {self.omega.tolist()}"
            ) from exc

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self._cho, rhs)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._cho[0]))))

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Multiply by Sigma^(-1/2) (via the lower Cholesky factor)."""
        from scipy.linalg import solve_triangular

        return solve_triangular(self._cho[0], x, lower=True)
