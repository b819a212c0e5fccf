"""Neumann-Laplacian eigenbasis on rectangular boxes.

The eigenfunctions of -Laplace with homogeneous Neumann conditions on a box
[0,L_1] x ... x [0,L_d] are tensor products of cosines,

    e_k(x) = prod_j a_{k_j} cos(pi k_j x_j / L_j),   mu_k = sum_j (pi k_j / L_j)^2,

with a_0 = sqrt(1/L) and a_k = sqrt(2/L) so that {e_k} is orthonormal in L^2.
Collocation is at cell midpoints x_j = (j + 1/2) L / N, where the DCT-II /
DST-II pair is exactly unitary on the retained modes.  All differential
operators and the semigroup of the stiff linear part are diagonal here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class BoxDomain:
    """Rectangular domain with a midpoint collocation grid.

    lengths are the box sides, points the per-dimension resolution N_j
    (even, at least 4 so the padded transforms stay well formed).
    """

    dim: int
    lengths: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.points) != self.dim:
            raise ValueError("lengths and points must have one entry per dimension")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("box side lengths must be positive")
        if any(N < 4 or N % 2 != 0 for N in self.points):
            raise ValueError("points per dimension must be even and >= 4")
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "points", tuple(int(N) for N in self.points))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def grid(self, resolution=None):
        """Per-dimension midpoint coordinate arrays."""
        res = self.points if resolution is None else tuple(resolution)
        return [
            (np.arange(R) + 0.5) * L / R for L, R in zip(self.lengths, res)
        ]


class SpectralBasis:
    """Retained cosine modes 0..n_j per dimension, with transforms.

    Coefficient arrays have shape (n_1+1, ..., n_d+1, C) for C-component
    fields; nodal arrays have shape (R_1, ..., R_d, C) with R the chosen
    midpoint resolution (the domain grid or the 2x-padded one used to
    dealias products).  Instances are immutable after construction and
    safe to share between trajectory workers.
    """

    def __init__(self, domain: BoxDomain, cutoff):
        cutoff = tuple(int(n) for n in (cutoff if np.iterable(cutoff) else [cutoff] * domain.dim))
        if len(cutoff) != domain.dim:
            raise ValueError("cutoff must have one entry per dimension")
        if any(n < 0 for n in cutoff):
            raise ValueError("cutoff indices must be nonnegative")
        if any(n >= N for n, N in zip(cutoff, domain.points)):
            raise ValueError("cutoff must stay below the collocation resolution (no aliasing)")
        self.domain = domain
        self.cutoff = cutoff
        self.shape = tuple(n + 1 for n in cutoff)
        # (pi k / L)^2 along each axis, broadcast-summed into the eigenvalue grid
        self._mu_axes = [
            (np.pi * np.arange(n + 1) / L) ** 2
            for n, L in zip(cutoff, domain.lengths)
        ]
        mu = np.zeros(self.shape)
        for ax, m in enumerate(self._mu_axes):
            mu = mu + m.reshape([-1 if i == ax else 1 for i in range(domain.dim)])
        self.mu_grid = mu
        self.mu_grid.flags.writeable = False
        self._mask_cache: dict[int, np.ndarray] = {}

    # -- mode bookkeeping -------------------------------------------------

    @cached_property
    def modes(self) -> np.ndarray:
        """All retained multi-indices in lexicographic order, shape (n_modes, d)."""
        return np.array(list(product(*[range(n + 1) for n in self.cutoff])), dtype=int)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """mu_k for each row of `modes` (lexicographic = C-order flattening)."""
        return self.mu_grid.reshape(-1).copy()

    @property
    def n_modes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def padded_points(self) -> tuple[int, ...]:
        """Resolution of the dealiasing grid (factor 2 per dimension)."""
        return tuple(2 * N for N in self.domain.points)

    def quad_weight(self, resolution=None) -> float:
        """Midpoint-rule cell volume for the given nodal resolution."""
        res = self.domain.points if resolution is None else tuple(resolution)
        return self.domain.volume / float(np.prod(res))

    # -- transforms --------------------------------------------------------

    def _spatial_axes(self, batch_ndim):
        return tuple(range(batch_ndim, batch_ndim + self.domain.dim))

    def _scale(self, resolution) -> float:
        return float(np.prod([np.sqrt(L / R) for L, R in zip(self.domain.lengths, resolution)]))

    def analyze(self, values: np.ndarray, batch_ndim: int = 0) -> np.ndarray:
        """Nodal field on any midpoint grid -> coefficients on retained modes."""
        axes = self._spatial_axes(batch_ndim)
        res = tuple(values.shape[a] for a in axes)
        if any(R < S for R, S in zip(res, self.shape)):
            raise ValueError(f"nodal resolution {res} cannot hold cutoff {self.cutoff}")
        coeffs = values
        for a in axes:
            coeffs = scipy.fft.dct(coeffs, type=2, norm="ortho", axis=a)
        sl = [slice(None)] * values.ndim
        for a, S in zip(axes, self.shape):
            sl[a] = slice(0, S)
        return coeffs[tuple(sl)] * self._scale(res)

    def synthesize(self, coeffs: np.ndarray, resolution=None, batch_ndim: int = 0) -> np.ndarray:
        """Coefficients -> nodal values on the domain grid (or a finer one)."""
        res = self.domain.points if resolution is None else tuple(resolution)
        axes = self._spatial_axes(batch_ndim)
        shape = list(coeffs.shape)
        for a, R in zip(axes, res):
            shape[a] = R
        padded = np.zeros(shape, dtype=coeffs.dtype)
        sl = [slice(None)] * coeffs.ndim
        for a, S in zip(axes, self.shape):
            sl[a] = slice(0, S)
        padded[tuple(sl)] = coeffs
        values = padded
        for a in axes:
            values = scipy.fft.idct(values, type=2, norm="ortho", axis=a)
        return values / self._scale(res)

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Strict forward transform from the domain collocation grid."""
        if values.shape[: self.domain.dim] != self.domain.points:
            raise ValueError(
                f"field shape {values.shape} does not match domain grid {self.domain.points}"
            )
        return self.analyze(values)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        if coeffs.shape[: self.domain.dim] != self.shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match retained modes {self.shape}"
            )
        return self.synthesize(coeffs)

    def gradient_values(self, coeffs: np.ndarray, axis: int, resolution=None) -> np.ndarray:
        """Nodal values of d/dx_axis of the expansion (a sine series along `axis`)."""
        res = self.domain.points if resolution is None else tuple(resolution)
        d = self.domain.dim
        n_ax = self.cutoff[axis]
        L_ax = self.domain.lengths[axis]
        shape = list(coeffs.shape)
        shape[axis] = res[axis]
        sine = np.zeros(shape, dtype=coeffs.dtype)
        if n_ax >= 1:
            # d/dx of the orthonormal cosine mode k is -(pi k / L) times the
            # orthonormal sine mode k; DST index m stores sine mode m+1.
            k = np.arange(1, n_ax + 1)
            fac = -(np.pi * k / L_ax)
            fac = fac.reshape([-1 if i == axis else 1 for i in range(d)] + [1] * (coeffs.ndim - d))
            src = [slice(None)] * coeffs.ndim
            src[axis] = slice(1, n_ax + 1)
            dst = [slice(None)] * coeffs.ndim
            dst[axis] = slice(0, n_ax)
            sine[tuple(dst)] = coeffs[tuple(src)] * fac
        out = scipy.fft.idst(sine, type=2, norm="ortho", axis=axis)
        cos_axes = [a for a in range(d) if a != axis]
        if cos_axes:
            shape = list(out.shape)
            for a in cos_axes:
                shape[a] = res[a]
            padded = np.zeros(shape, dtype=out.dtype)
            sl = [slice(None)] * out.ndim
            for a in cos_axes:
                sl[a] = slice(0, self.shape[a])
            padded[tuple(sl)] = out
            out = scipy.fft.idctn(padded, type=2, norm="ortho", axes=cos_axes)
        return out / self._scale(res)

    # -- diagonal operators --------------------------------------------------

    def laplacian(self, coeffs: np.ndarray) -> np.ndarray:
        """Apply the Neumann Laplacian: mode k is scaled by -mu_k."""
        extra = coeffs.ndim - self.domain.dim
        return coeffs * (-self.mu_grid).reshape(self.mu_grid.shape + (1,) * extra)

    def mode_mask(self, n: int) -> np.ndarray:
        """Boolean grid, True where all k_j <= n (the projection onto V_n)."""
        if n not in self._mask_cache:
            mask = np.ones(self.shape, dtype=bool)
            for ax in range(self.domain.dim):
                keep = (np.arange(self.shape[ax]) <= n).reshape(
                    [-1 if i == ax else 1 for i in range(self.domain.dim)]
                )
                mask &= keep
            mask.flags.writeable = False
            self._mask_cache[n] = mask
        return self._mask_cache[n]

    def project(self, coeffs: np.ndarray, n: int) -> np.ndarray:
        """Orthogonal projection: zero every coefficient with any k_j > n."""
        extra = coeffs.ndim - self.domain.dim
        return coeffs * self.mode_mask(n).reshape(self.shape + (1,) * extra)


def build_basis(domain: BoxDomain, cutoff) -> SpectralBasis:
    """Construct the retained-mode basis; rejects cutoff >= resolution."""
    return SpectralBasis(domain, cutoff)


@dataclass(frozen=True, eq=False)
class OperatorA:
    """Positive self-adjoint stiff part lam_e*Lap^2 - (lam_r-lam_e)*Lap + beta0*I.

    Diagonal in the cosine basis with symbol
    a_k = lam_e*mu_k^2 + (lam_r - lam_e)*mu_k + beta0 >= lambda0 > 0.
    """

    lambda_r: float
    lambda_e: float
    beta0: float
    symbols: np.ndarray = field(repr=False)
    lambda0: float = 0.0

    @staticmethod
    def select_beta0(lambda_r: float, lambda_e: float) -> float:
        # Keeps the symbol uniformly positive: when lam_e > lam_r the parabola
        # in mu dips by (lam_e-lam_r)^2/(4 lam_e) below beta0.
        if lambda_e > lambda_r:
            return max(1.0, (lambda_e - lambda_r) ** 2 / (4.0 * lambda_e) + 1.0)
        return 1.0

    @classmethod
    def build(cls, basis: SpectralBasis, lambda_r: float, lambda_e: float, beta0=None) -> "OperatorA":
        if lambda_r <= 0 or lambda_e < 0:
            raise ValueError("need lambda_r > 0 and lambda_e >= 0")
        if beta0 is None:
            beta0 = cls.select_beta0(lambda_r, lambda_e)
        mu = basis.mu_grid
        a = lambda_e * mu**2 + (lambda_r - lambda_e) * mu + beta0
        lam0 = float(a.min())
        if lam0 <= 0:
            raise ValueError(f"operator not positive: min symbol {lam0} <= 0")
        a.flags.writeable = False
        return cls(lambda_r=float(lambda_r), lambda_e=float(lambda_e),
                   beta0=float(beta0), symbols=a, lambda0=lam0)

    def apply_semigroup(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        """Scale mode k by exp(-t a_k); an L^2 contraction for t >= 0."""
        if t < 0:
            raise ValueError("semigroup time must be nonnegative")
        extra = coeffs.ndim - self.symbols.ndim
        return coeffs * np.exp(-t * self.symbols).reshape(self.symbols.shape + (1,) * extra)
