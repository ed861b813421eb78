"""
Row-section sensing operators with their singular value decompositions.

Every operator represents ``A = U diag(s) Vt`` with ``U`` of size ``M x r`` and
``Vt`` of size ``r x Nc``.  Transform-based operators never store ``Vt``: the
right factor is a row subset of an orthonormal transform applied on the fly.
"""

import numpy as np
from scipy.fft import dct, idct
from scipy.stats import ortho_group

from core.exceptions import ConfigError, DimError

HADAMARD = "hadamard"
DCT = "dct"
HAAR = "haar"

BASES = (HADAMARD, DCT, HAAR)


def is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


def fwht(x):
    """Unnormalized fast Walsh-Hadamard transform in natural (Sylvester) order."""
    x = np.array(x, dtype=float)
    n = x.shape[0]
    if not is_power_of_two(n):
        raise DimError(f"Hadamard transform size {n} is not a power of two")
    h = 1
    while h < n:
        pairs = x.reshape(-1, 2, h)
        x = np.stack((pairs[:, 0] + pairs[:, 1], pairs[:, 0] - pairs[:, 1]), axis=1).reshape(n)
        h *= 2
    return x


class SectionOperator:
    """Common interface; subclasses fill in the right factor."""

    def __init__(self, M, Nc, singular_values):
        self.M = M
        self.Nc = Nc
        self.s = np.asarray(singular_values, dtype=float)

    @property
    def rank(self):
        return int(np.count_nonzero(self.s > 0))

    @property
    def eigenvalues(self):
        """Nonzero-padded eigenvalues of ``AᵀA`` on the rank subspace."""
        return self.s**2

    def project(self, x):
        raise NotImplementedError

    def lift(self, c):
        raise NotImplementedError

    def left(self, c):
        raise NotImplementedError

    def left_adjoint(self, r):
        raise NotImplementedError

    def matvec(self, x):
        return self.left(self.s * self.project(x))

    def rmatvec(self, r):
        return self.lift(self.s * self.left_adjoint(r))

    def dense(self):
        """Materialized matrix, for small sizes and tests."""
        return np.column_stack([self.matvec(e) for e in np.eye(self.Nc)])


class DenseSection(SectionOperator):
    def __init__(self, u, s, vt):
        super().__init__(u.shape[0], vt.shape[1], s)
        self.u = u
        self.vt = vt

    @classmethod
    def from_matrix(cls, matrix):
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
        return cls(u, s, vt)

    def project(self, x):
        return self.vt @ x

    def lift(self, c):
        return self.vt.T @ c

    def left(self, c):
        return self.u @ c

    def left_adjoint(self, r):
        return self.u.T @ r


class TransformSection(SectionOperator):
    """``A = diag(s) P T`` with ``T`` an orthonormal transform and ``P`` a row selection."""

    def __init__(self, s, rows, Nc, basis):
        super().__init__(len(rows), Nc, s)
        self.rows = np.asarray(rows)
        self.basis = basis
        if basis == HADAMARD and not is_power_of_two(Nc):
            raise DimError(f"Hadamard sections need a power-of-two width, got {Nc}")
        self._scale = 1.0 / np.sqrt(Nc)

    def _forward(self, x):
        if self.basis == HADAMARD:
            return fwht(x) * self._scale
        return dct(x, norm="ortho")

    def _inverse(self, c):
        if self.basis == HADAMARD:
            return fwht(c) * self._scale
        return idct(c, norm="ortho")

    def project(self, x):
        return self._forward(x)[self.rows]

    def lift(self, c):
        full = np.zeros(self.Nc)
        full[self.rows] = c
        return self._inverse(full)

    def left(self, c):
        return np.asarray(c, dtype=float)

    def left_adjoint(self, r):
        return np.asarray(r, dtype=float)


def row_orthogonal_singular_values(M, Nc):
    return np.full(M, np.sqrt(Nc / M))


def geometric_singular_values(M, Nc, kappa):
    """
    ``sigma_m/sigma_{m-1} = kappa^(-1/(M-1))`` with ``Σ sigma_m² = Nc`` so the
    rescaled section has unit-mean eigenvalues.
    """
    if kappa == 1.0:
        return row_orthogonal_singular_values(M, Nc)
    if M < 2:
        raise DimError("geometric singular values need at least two rows")
    ratio = kappa ** (-2.0 / (M - 1))
    sigma0_sq = Nc * (1.0 - ratio) / (1.0 - ratio**M)
    return np.sqrt(sigma0_sq * ratio ** np.arange(M))


def orthogonal_section(singular_values, Nc, basis, rng):
    """Draw ``diag(sigma) H`` with ``H`` a row-permuted orthogonal basis."""
    M = len(singular_values)
    if basis == HAAR:
        vt = ortho_group.rvs(Nc, random_state=rng)[:M] if Nc > 1 else np.ones((1, 1))
        return DenseSection(np.eye(M), singular_values, vt)
    if basis not in (HADAMARD, DCT):
        raise ConfigError(f"unknown orthogonal basis {basis!r}")
    rows = rng.permutation(Nc)[:M]
    return TransformSection(singular_values, rows, Nc, basis)


def iid_gaussian_section(M, Nc, rng):
    """Entries N(0, 1/M); the SVD is cached for the LMMSE filter."""
    matrix = rng.normal(scale=1.0 / np.sqrt(M), size=(M, Nc))
    return DenseSection.from_matrix(matrix)


def scaled(operator, factor):
    """Operator for ``factor * A`` sharing the cached factors."""
    if isinstance(operator, DenseSection):
        return DenseSection(operator.u, operator.s * factor, operator.vt)
    return TransformSection(operator.s * factor, operator.rows, operator.Nc, operator.basis)
