"""Truncated Wiener forcing: coefficient families, diffusion, increment streams.

The K driving processes act through fixed directions g_k (additive) and h_k
(multiplicative, entering as gamma * u x h_k).  Both are scaled basis modes

    g_k = c_g (1 + mu_k)^-r e_k ghat_k,   h_k = c_h (1 + mu_k)^-r e_k hhat_k,

where e_k runs through the retained scalar modes in lexicographic order and
the unit vectors ghat_k, hhat_k cycle through the coordinate axes.  With
r >= 2 the continuum tails sum((1+mu_k)^(-2r) (1+mu_k+mu_k^2)) beyond any
truncation stay summable, so sigma_g^2, sigma_h^2 are honest approximations
of the full series (not asserted at runtime, only documented here).

Increments are counter-based: blocks of BLOCK fine steps are drawn from a
Philox generator keyed by (seed) with counter (path_id, block), making every
increment a pure function of (seed, path id, step, k).  Runs that share a
path consume bit-identical increments regardless of scheduling, and a path
with `substeps` > 1 aggregates the same fine grid, which couples runs across
time-step refinements exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fields import COMPONENTS, VectorField, cross3, from_padded_values
from .spectral import SpectralBasis

BLOCK = 256  # fine steps drawn per counter; part of the stream layout


@dataclass(frozen=True, eq=False)
class NoiseFamily:
    """K noise directions with their spectral data and H^2 mass."""

    basis: SpectralBasis
    K: int
    r: float
    c_g: float
    c_h: float
    g_hat: np.ndarray = field(repr=False)  # (K, *modes, 3)
    h_hat: np.ndarray = field(repr=False)
    sigma_g2: float = 0.0
    sigma_h2: float = 0.0

    @cached_property
    def g_padded(self) -> np.ndarray:
        """Nodal values of every g_k on the dealiasing grid, shape (K, *M, 3)."""
        return self._synth_stack(self.g_hat)

    @cached_property
    def h_padded(self) -> np.ndarray:
        return self._synth_stack(self.h_hat)

    def _synth_stack(self, hat: np.ndarray) -> np.ndarray:
        if self.K == 0:
            return np.zeros((0,) + self.basis.padded_points + (COMPONENTS,))
        return np.stack(
            [self.basis.synthesize(hat[k], resolution=self.basis.padded_points) for k in range(self.K)]
        )

    def direction_g(self, k: int) -> VectorField:
        self._check_index(k)
        return VectorField(self.basis, self.g_hat[k].copy())

    def direction_h(self, k: int) -> VectorField:
        self._check_index(k)
        return VectorField(self.basis, self.h_hat[k].copy())

    def _check_index(self, k: int):
        if not 0 <= k < self.K:
            raise IndexError(f"noise index {k} outside 0..{self.K - 1}")

    @property
    def is_additive_free(self) -> bool:
        return self.K == 0 or not np.any(self.g_hat)


def build_noise_family(basis: SpectralBasis, K: int, r: float = 2.0,
                       c_g: float = 0.0, c_h: float = 0.0) -> NoiseFamily:
    """Assemble the truncated families and their H^2 sums.

    Rejects K beyond the number of retained modes; K = 0 gives the
    deterministic dynamics with sigma_g = sigma_h = 0.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if r <= 0:
        raise ValueError("decay exponent r must be positive")
    if K > basis.n_modes:
        raise ValueError(f"K={K} exceeds the {basis.n_modes} retained modes")
    shape = basis.shape + (COMPONENTS,)
    g_hat = np.zeros((K,) + shape)
    h_hat = np.zeros((K,) + shape)
    mu_flat = basis.eigenvalues
    sigma_g2 = 0.0
    sigma_h2 = 0.0
    for k in range(K):
        idx = tuple(basis.modes[k])
        axis = k % COMPONENTS
        mu = mu_flat[k]
        decay = (1.0 + mu) ** (-r)
        h2_mass = 1.0 + mu + mu**2  # ||e_k||^2_{H^2} for a unit coefficient
        g_hat[(k,) + idx + (axis,)] = c_g * decay
        h_hat[(k,) + idx + (axis,)] = c_h * decay
        sigma_g2 += (c_g * decay) ** 2 * h2_mass
        sigma_h2 += (c_h * decay) ** 2 * h2_mass
    g_hat.flags.writeable = False
    h_hat.flags.writeable = False
    return NoiseFamily(basis=basis, K=int(K), r=float(r), c_g=float(c_g), c_h=float(c_h),
                       g_hat=g_hat, h_hat=h_hat,
                       sigma_g2=float(sigma_g2), sigma_h2=float(sigma_h2))


def scale_to_sigma_h2(basis: SpectralBasis, K: int, r: float, target_sigma_h2: float,
                      c_g: float = 0.0) -> NoiseFamily:
    """Pick c_h so the family's sigma_h^2 hits a target exactly."""
    probe = build_noise_family(basis, K, r, c_g=0.0, c_h=1.0)
    if probe.sigma_h2 == 0.0:
        raise ValueError("cannot scale an empty multiplicative family")
    c_h = np.sqrt(target_sigma_h2 / probe.sigma_h2)
    return build_noise_family(basis, K, r, c_g=c_g, c_h=c_h)


def diffusion(u: VectorField, fam: NoiseFamily, gamma: float, k: int) -> VectorField:
    """G_k(u) = g_k + gamma u x h_k, projected onto the retained modes."""
    fam._check_index(k)
    vals = fam.g_padded[k] + gamma * cross3(u.values_padded, fam.h_padded[k])
    return from_padded_values(u.basis, vals)


def quadratic_variation_sum(u: VectorField, fam: NoiseFamily, gamma: float) -> float:
    """sum_k ||Pi G_k(u)||_{L^2}^2, the Ito correction of the L^2 balance."""
    if fam.K == 0:
        return 0.0
    basis = u.basis
    vals = fam.g_padded + gamma * cross3(u.values_padded[None], fam.h_padded)
    hats = basis.analyze(vals, batch_ndim=1)
    return float(np.sum(hats**2))


@dataclass
class NoisePath:
    """One reproducible increment stream (seed, path id, step, k) -> dW.

    dt is the consumer's step; with substeps > 1 each increment aggregates
    that many draws of the underlying fine grid with dt_fine = dt/substeps,
    so paths sharing (seed, path_id, dt_fine) but differing in substeps are
    coupled exactly across time-step refinements.
    """

    seed: int
    path_id: int
    dt: float
    K: int
    substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.path_id < 0 or self.seed < 0:
            raise ValueError("seed and path id must be nonnegative")
        self._blocks: dict[int, np.ndarray] = {}

    @property
    def fine_dt(self) -> float:
        return self.dt / self.substeps

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            # path and block live in the high counter words; the generator
            # itself advances the low word while drawing, so streams with
            # different (path, block) can never overlap
            gen = np.random.Generator(np.random.Philox(key=self.seed, counter=[0, 0, b, self.path_id]))
            blk = gen.standard_normal((BLOCK, self.K))
            blk.flags.writeable = False
            if len(self._blocks) > 8:  # keep the cache tiny; access is sequential
                self._blocks.clear()
            self._blocks[b] = blk
        return blk

    def _fine_rows(self, start: int, stop: int) -> np.ndarray:
        rows = np.empty((stop - start, self.K))
        i = start
        while i < stop:
            b, off = divmod(i, BLOCK)
            take = min(BLOCK - off, stop - i)
            rows[i - start : i - start + take] = self._block(b)[off : off + take]
            i += take
        return rows

    def increments(self, step: int) -> np.ndarray:
        """The K Wiener increments over [step*dt, (step+1)*dt), N(0, dt) each."""
        if step < 0:
            raise ValueError("step index must be nonnegative")
        lo = step * self.substeps
        rows = self._fine_rows(lo, lo + self.substeps)
        return rows.sum(axis=0) * np.sqrt(self.fine_dt)


def sample_increments(path: NoisePath, step: int) -> np.ndarray:
    return path.increments(step)
