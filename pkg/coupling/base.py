"""
Base matrices of spatially coupled systems and the index bookkeeping
around them.

Row sections are indexed by ``ell`` in ``0 .. L+W-1`` and column sections by
``l`` in ``0 .. L-1``; row section ``ell`` sees the column sections
``ell - w`` for ``w`` in its window ``{max(ell-(L-1), 0), .., min(W, ell)}``.
"""

from dataclasses import dataclass

import numpy as np

from core.exceptions import DimError

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    """Banded ``(L+W) x L`` weight matrix ``gamma[ell][l]``."""

    L: int
    W: int
    gamma: np.ndarray

    def __post_init__(self):
        if self.L < 1 or self.W < 0:
            raise DimError("need L >= 1 and W >= 0")
        if self.W >= self.L:
            raise DimError(f"coupling width W={self.W} must be smaller than L={self.L}")
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.shape != (self.L + self.W, self.L):
            raise DimError(f"gamma must have shape {(self.L + self.W, self.L)}")
        rows, cols = np.indices(gamma.shape)
        band = (rows - cols >= 0) & (rows - cols <= self.W)
        if np.any(gamma[~band] != 0) or np.any(gamma[band] <= 0) or np.any(gamma < 0):
            raise DimError("gamma must be positive inside the band and zero outside")
        power = np.sum(gamma**2) / self.L
        if abs(power - 1.0) > NORMALIZATION_TOL:
            raise DimError(f"gamma is not power normalized ({power})")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @property
    def rows(self):
        return self.L + self.W

    def window(self, ell):
        """Return ``(w_min, w_max)`` for row section ``ell``."""
        self._check_row(ell)
        return max(ell - (self.L - 1), 0), min(self.W, ell)

    def width(self, ell):
        w_min, w_max = self.window(ell)
        return w_max - w_min + 1

    def widths(self):
        return np.array([self.width(ell) for ell in range(self.rows)])

    def weight(self, ell, l):
        return float(self.gamma[ell, l])

    def _check_row(self, ell):
        if not 0 <= ell < self.rows:
            raise IndexError(f"row section {ell} outside 0..{self.rows - 1}")


def uniform_base(L, W):
    """All in-band weights equal to ``1/sqrt(W+1)``."""
    if W >= L:
        raise DimError(f"coupling width W={W} must be smaller than L={L}")
    gamma = np.zeros((L + W, L))
    for l in range(L):
        gamma[l : l + W + 1, l] = 1.0 / np.sqrt(W + 1)
    return BaseMatrix(L=L, W=W, gamma=gamma)


@dataclass(frozen=True)
class GammaEntry:
    w: int
    l: int
    weight: float
    block: slice


class GammaProjector:
    """
    Action of ``Gamma[ell]``: stacks ``gamma[ell][ell-w] x[ell-w]`` for the
    columns of the window in increasing ``l``, so the block of offset ``w``
    sits at position ``w_max - w``.
    """

    def __init__(self, base, ell, N):
        w_min, w_max = base.window(ell)
        self.ell = ell
        self.N = N
        self.width = w_max - w_min + 1
        self.entries = []
        for w in range(w_max, w_min - 1, -1):
            position = w_max - w
            self.entries.append(
                GammaEntry(
                    w=w,
                    l=ell - w,
                    weight=base.weight(ell, ell - w),
                    block=slice(position * N, (position + 1) * N),
                )
            )
        self._L = base.L

    @property
    def size(self):
        return self.width * self.N

    def block_of(self, w):
        for entry in self.entries:
            if entry.w == w:
                return entry.block
        raise IndexError(f"offset {w} is not in the window of row section {self.ell}")

    def apply(self, x):
        x = np.asarray(x)
        out = np.empty(self.size, dtype=x.dtype)
        for entry in self.entries:
            out[entry.block] = entry.weight * x[entry.l * self.N : (entry.l + 1) * self.N]
        return out

    def adjoint(self, u):
        u = np.asarray(u)
        out = np.zeros(self._L * self.N, dtype=u.dtype)
        for entry in self.entries:
            out[entry.l * self.N : (entry.l + 1) * self.N] += entry.weight * u[entry.block]
        return out


def gamma_projector(base, ell, N):
    return GammaProjector(base, ell, N)


def initial_variance(base, ell, N):
    """``|W[ell]| Nc⁻¹ Σ_w N gamma²[ell][ell-w]`` for equal section sizes."""
    w_min, w_max = base.window(ell)
    width = w_max - w_min + 1
    nc = width * N
    total = sum(N * base.gamma[ell, ell - w] ** 2 for w in range(w_min, w_max + 1))
    return width * total / nc
