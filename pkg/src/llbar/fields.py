"""R^3-valued magnetisation fields and their pointwise/variational algebra.

Fields are stored by their retained-mode coefficients (band-limited by
construction); nodal values on the domain grid and on the 2x-padded grid are
derived lazily.  Every nonlinear product (cubic term, cross products, spin
torque) is evaluated on the padded grid and re-expanded, which makes the
projection of any triple product of retained modes exact and keeps the
discrete energy identities clean.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import SpectralBasis

COMPONENTS = 3


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Componentwise cross product over the trailing axis (faster than np.cross)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the magnetisation dynamics and its effective field.

    lambda_r, lambda_e, gamma: relativistic damping, exchange relaxation
    (zero selects the second-order limit model) and gyromagnetic ratio.
    alpha, kappa1, kappa2 enter the field H = alpha*Lap(u) + kappa1*u
    - kappa2*|u|^2 u, with kappa1 = +1 below and -1 above the Curie point.
    beta1, beta2 and the constant spin current nu drive the advective
    torque; (L_matrix, L_offset) is an optional affine torque u -> M u + b.
    """

    lambda_r: float
    lambda_e: float
    gamma: float
    alpha: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    beta1: float = 0.0
    beta2: float = 0.0
    nu: tuple[float, ...] | None = None
    L_matrix: tuple | None = None
    L_offset: tuple | None = None

    def __post_init__(self):
        if self.lambda_r <= 0:
            raise ValueError("lambda_r must be positive")
        if self.lambda_e < 0:
            raise ValueError("lambda_e must be nonnegative")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.kappa1 not in (-1.0, 1.0, -1, 1):
            raise ValueError("kappa1 must be +1 (below Curie) or -1 (above)")
        if self.kappa2 < 0:
            raise ValueError("kappa2 must be nonnegative")
        if self.nu is not None:
            object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        if self.L_matrix is not None:
            M = np.asarray(self.L_matrix, dtype=float).reshape(3, 3)
            object.__setattr__(self, "L_matrix", tuple(map(tuple, M)))
        if self.L_offset is not None:
            b = np.asarray(self.L_offset, dtype=float).reshape(3)
            object.__setattr__(self, "L_offset", tuple(b))

    @property
    def has_spin_current(self) -> bool:
        return self.nu is not None and any(v != 0.0 for v in self.nu)

    @property
    def has_affine_torque(self) -> bool:
        return self.L_matrix is not None or self.L_offset is not None

    @property
    def affine_matrix(self) -> np.ndarray:
        return np.zeros((3, 3)) if self.L_matrix is None else np.asarray(self.L_matrix)

    @property
    def affine_offset(self) -> np.ndarray:
        return np.zeros(3) if self.L_offset is None else np.asarray(self.L_offset)

    @property
    def lipschitz_bound(self) -> float:
        """Operator norm of the affine torque's linear part."""
        if self.L_matrix is None:
            return 0.0
        return float(np.linalg.norm(self.affine_matrix, 2))


class VectorField:
    """Band-limited R^3 field over a box, coefficient-first representation."""

    def __init__(self, basis: SpectralBasis, coeffs: np.ndarray, check: bool = True):
        # check=False skips validation for intermediates derived from already
        # validated fields (the integrator re-checks each accepted state)
        if check:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != basis.shape + (COMPONENTS,):
                raise ValueError(
                    f"coefficients {coeffs.shape} do not match basis {basis.shape + (COMPONENTS,)}"
                )
            if not np.isfinite(coeffs).all():
                raise ValueError("field contains non-finite entries")
        self.basis = basis
        self.coeffs = coeffs
        self.coeffs.flags.writeable = False

    # -- constructors --------------------------------------------------------

    @classmethod
    def zeros(cls, basis) -> "VectorField":
        return cls(basis, np.zeros(basis.shape + (COMPONENTS,)))

    @classmethod
    def from_values(cls, basis, values) -> "VectorField":
        """Project nodal data onto the retained modes (Pi_n of supplied data)."""
        values = np.asarray(values, dtype=float)
        if values.shape != basis.domain.points + (COMPONENTS,):
            raise ValueError(
                f"nodal shape {values.shape} does not match grid {basis.domain.points}"
            )
        return cls(basis, basis.forward(values))

    @classmethod
    def constant(cls, basis, vec) -> "VectorField":
        c = np.zeros(basis.shape + (COMPONENTS,))
        # constant mode e_0 = 1/sqrt(|D|), so a constant field c has
        # coefficient c*sqrt(|D|) there
        c[(0,) * basis.domain.dim] = np.asarray(vec, dtype=float) * np.sqrt(basis.domain.volume)
        return cls(basis, c)

    @classmethod
    def single_mode(cls, basis, mode, amplitude) -> "VectorField":
        mode = tuple(int(k) for k in (mode if np.iterable(mode) else [mode]))
        if len(mode) != basis.domain.dim:
            raise ValueError("mode multi-index must have one entry per dimension")
        if any(k < 0 or k > n for k, n in zip(mode, basis.cutoff)):
            raise ValueError(f"mode {mode} outside retained cutoff {basis.cutoff}")
        amp = np.asarray(amplitude, dtype=float)
        if amp.shape == ():
            amp = np.array([amp, 0.0, 0.0])
        c = np.zeros(basis.shape + (COMPONENTS,))
        c[mode] = amp
        return cls(basis, c)

    @classmethod
    def random_band_limited(cls, basis, max_mode, amplitude, seed, decay: float = 0.0) -> "VectorField":
        """I.i.d. N(0, amplitude^2) coefficients on modes with all k_j <= max_mode.

        decay > 0 multiplies mode k by (1+mu_k)^-decay for smoother samples.
        """
        rng = np.random.default_rng(seed)
        c = amplitude * rng.standard_normal(basis.shape + (COMPONENTS,))
        if decay:
            c = c * (1.0 + basis.mu_grid[..., None]) ** (-decay)
        c = c * basis.mode_mask(int(max_mode))[..., None]
        return cls(basis, c)

    # -- representations -------------------------------------------------------

    @cached_property
    def values(self) -> np.ndarray:
        """Nodal values on the domain collocation grid."""
        v = self.basis.synthesize(self.coeffs)
        v.flags.writeable = False
        return v

    @cached_property
    def values_padded(self) -> np.ndarray:
        """Nodal values on the 2x dealiasing grid."""
        v = self.basis.synthesize(self.coeffs, resolution=self.basis.padded_points)
        v.flags.writeable = False
        return v

    @cached_property
    def gradient_padded(self) -> tuple[np.ndarray, ...]:
        """Nodal values of each partial derivative on the padded grid."""
        res = self.basis.padded_points
        grads = tuple(
            self.basis.gradient_values(self.coeffs, axis=ax, resolution=res)
            for ax in range(self.basis.domain.dim)
        )
        for g in grads:
            g.flags.writeable = False
        return grads

    # -- linear algebra ---------------------------------------------------------

    def __add__(self, other):
        self._check(other)
        return VectorField(self.basis, self.coeffs + other.coeffs, check=False)

    def __sub__(self, other):
        self._check(other)
        return VectorField(self.basis, self.coeffs - other.coeffs, check=False)

    def __mul__(self, scalar):
        return VectorField(self.basis, self.coeffs * float(scalar), check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.basis, -self.coeffs, check=False)

    def _check(self, other):
        if not isinstance(other, VectorField) or other.basis is not self.basis:
            raise ValueError("fields must share one basis")


def from_padded_values(basis: SpectralBasis, values: np.ndarray) -> VectorField:
    """Expand padded-grid nodal data and truncate to the retained modes."""
    return VectorField(basis, basis.analyze(values), check=False)


# -- norms and energies ------------------------------------------------------


def norms(u: VectorField) -> dict:
    """L^2, L^4, L^6, H^1-seminorm, ||Lap u|| and L^inf of a field.

    L^2 and the derivative norms are spectral sums (Parseval); the L^p norms
    use midpoint quadrature on the dealiasing grid, exact through quartic
    products of retained modes.
    """
    basis = u.basis
    c2 = np.sum(u.coeffs**2, axis=-1)
    mu = basis.mu_grid
    w = basis.quad_weight(basis.padded_points)
    sq = np.sum(u.values_padded**2, axis=-1)
    return {
        "l2": float(np.sqrt(c2.sum())),
        "l4": float((w * np.sum(sq**2)) ** 0.25),
        "l6": float((w * np.sum(sq**3)) ** (1.0 / 6.0)),
        "h1_semi": float(np.sqrt((mu * c2).sum())),
        "lap": float(np.sqrt((mu**2 * c2).sum())),
        "linf": float(np.sqrt(sq.max(initial=0.0))),
    }


def h2_norm_sq(u: VectorField) -> float:
    """Squared H^2 norm, ||u||^2 + ||grad u||^2 + ||grad^2 u||^2 spectrally."""
    c2 = np.sum(u.coeffs**2, axis=-1)
    mu = u.basis.mu_grid
    return float(((1.0 + mu + mu**2) * c2).sum())


def inner_l2(u: VectorField, v: VectorField) -> float:
    return float(np.sum(u.coeffs * v.coeffs))


def energy_psi(u: VectorField, p: ModelParams) -> float:
    """(alpha/2)||grad u||^2 + (kappa2/4)||u||_L4^4 - (kappa1/2)||u||^2.

    Its Gateaux derivative in direction h is -<H(u), h> with H the
    effective field, so trajectories of the noise-free flow dissipate it.
    """
    n = norms(u)
    return 0.5 * p.alpha * n["h1_semi"] ** 2 + 0.25 * p.kappa2 * n["l4"] ** 4 - 0.5 * p.kappa1 * n["l2"] ** 2


def pointwise_gradient_norms(u: VectorField) -> dict:
    """Quadrature of mixed field/gradient products used by the L^2 balance.

    Returns || |u| |grad u| ||^2, ||u . grad u||^2 and ||grad |u|^2||^2
    (the last equals 4 ||u . grad u||^2).
    """
    w = u.basis.quad_weight(u.basis.padded_points)
    vals = u.values_padded
    abs_sq = 0.0
    dot_sq = 0.0
    for g in u.gradient_padded:
        abs_sq += np.sum(np.sum(vals**2, axis=-1) * np.sum(g**2, axis=-1))
        dot_sq += np.sum(np.sum(vals * g, axis=-1) ** 2)
    return {
        "abs_u_grad_u_sq": float(w * abs_sq),
        "u_dot_grad_u_sq": float(w * dot_sq),
        "grad_u_sq_norm_sq": float(4.0 * w * dot_sq),
    }


# -- nonlinear operations ------------------------------------------------------


def cubic(u: VectorField) -> VectorField:
    """|u|^2 u, dealiased and projected back onto the retained modes."""
    vals = u.values_padded
    return from_padded_values(u.basis, np.sum(vals**2, axis=-1, keepdims=True) * vals)


def laplacian_cubic(u: VectorField) -> VectorField:
    """Lap(|u|^2 u) via the spectral Laplacian of the dealiased cubic."""
    c = cubic(u)
    return VectorField(u.basis, u.basis.laplacian(c.coeffs), check=False)


def effective_field(u: VectorField, p: ModelParams, n: int | None = None) -> VectorField:
    """H = alpha*Lap(u) + kappa1*u - kappa2*Pi(|u|^2 u).

    With n given, the cubic term is additionally projected onto V_n so the
    result matches the Galerkin closure at cutoff n.
    """
    basis = u.basis
    # the linear part of a V_n field stays in V_n; only the cubic needs Pi_n
    h = basis.laplacian(u.coeffs) * p.alpha + p.kappa1 * u.coeffs
    if p.kappa2 != 0.0:
        c = cubic(u).coeffs
        if n is not None:
            c = basis.project(c, n)
        h = h - p.kappa2 * c
    return VectorField(basis, h, check=False)


def spin_torque(u: VectorField, p: ModelParams) -> VectorField:
    """beta1 (nu . grad) u + beta2 u x (nu . grad) u for constant nu."""
    basis = u.basis
    if not p.has_spin_current:
        return VectorField.zeros(basis)
    adv = np.zeros(basis.padded_points + (COMPONENTS,))
    for ax, nu_ax in enumerate(p.nu):
        if nu_ax != 0.0:
            adv += nu_ax * u.gradient_padded[ax]
    out = p.beta1 * adv
    if p.beta2 != 0.0:
        out = out + p.beta2 * cross3(u.values_padded, adv)
    return from_padded_values(basis, out)


def affine_torque(u: VectorField, p: ModelParams) -> VectorField:
    """The Lipschitz torque u -> M u + b, applied spectrally (M is constant)."""
    basis = u.basis
    if not p.has_affine_torque:
        return VectorField.zeros(basis)
    c = u.coeffs @ p.affine_matrix.T
    b = p.affine_offset
    if np.any(b != 0.0):
        c = c.copy()
        c[(0,) * basis.domain.dim] += b * np.sqrt(basis.domain.volume)
    return VectorField(basis, c, check=False)


def s_total(u: VectorField, p: ModelParams) -> VectorField:
    """Total torque: spin-current part plus the affine part."""
    return spin_torque(u, p) + affine_torque(u, p)
