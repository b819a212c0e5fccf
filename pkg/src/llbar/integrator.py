"""Time stepping for the projected dynamics.

The drift splits as F(u) = -A u + N(u) with A the stiff positive operator
(diagonal symbol a_k) and N the nonstiff remainder; the remainder of a pure
high mode grows like O(mu_k), not O(mu_k^2).  Two one-step schemes share the
splitting:

    exponential Euler:  u+ = e^{-dt A} u + dt phi1(-dt A) N(u) + e^{-dt A} sum_k G_k(u) dW_k
    IMEX Euler:         u+ = (u + dt N(u) + sum_k G_k(u) dW_k) / (I + dt A)

Noise is evaluated at the left endpoint (Ito convention).  Every step ends
inside the retained subspace; a NaN/Inf state aborts the trajectory with a
blow-up error instead of propagating garbage.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import fields
from .fields import ModelParams, VectorField
from .noise import NoiseFamily, NoisePath
from .spectral import OperatorA, SpectralBasis

SCHEMES = ("exponential_euler", "imex_euler")


class BlowUpError(RuntimeError):
    """Raised when a trajectory leaves the representable range."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:.6g}); "
                         f"reduce dt or the initial amplitude")
        self.step = step
        self.t = t


class HypothesisError(ValueError):
    """A check was asked to run outside its validity assumptions."""


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    t_final: float
    scheme: str = "exponential_euler"
    n: int | None = None  # Galerkin cutoff; None keeps the full basis
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > self.t_final and self.t_final > 0:
            raise ValueError("dt must not exceed the final time")
        if self.t_final < 0:
            raise ValueError("final time must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class TrajectoryState:
    t: float
    u: VectorField
    step: int
    noise_digest: str = ""


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with a series branch near 0 to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0 + zs**3 / 24.0
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def galerkin_field(u: VectorField, p: ModelParams, n: int | None = None) -> VectorField:
    """Effective field with the cubic term closed inside the cutoff subspace."""
    return fields.effective_field(u, p, n=n)


def drift(u: VectorField, p: ModelParams, n: int | None = None) -> VectorField:
    """lam_r H - lam_e Lap H - gamma Pi(u x H) + Pi S(u) with the Galerkin H."""
    F, _ = drift_and_field(u, p, n=n)
    return F


def drift_and_field(u, p, n=None):
    basis = u.basis
    H = galerkin_field(u, p, n=n)
    mu = basis.mu_grid[..., None]
    f = (p.lambda_r + p.lambda_e * mu) * H.coeffs
    if p.gamma != 0.0:
        cross = basis.analyze(fields.cross3(u.values_padded, H.values_padded))
        if n is not None:
            cross = basis.project(cross, n)
        f = f - p.gamma * cross
    if p.has_spin_current or p.has_affine_torque:
        s = fields.s_total(u, p).coeffs
        if n is not None:
            s = basis.project(s, n)
        f = f + s
    return VectorField(basis, f, check=False), H


@dataclass(frozen=True, eq=False)
class LinearSplit:
    """Stiff operator plus the explicit remainder N(u) = drift(u) + A u."""

    operator: OperatorA
    params: ModelParams
    n: int | None = None

    def remainder(self, u: VectorField) -> VectorField:
        F = drift(u, self.params, n=self.n)
        a = self.operator.symbols[..., None]
        return VectorField(u.basis, F.coeffs + a * u.coeffs, check=False)


def split_linear(basis: SpectralBasis, p: ModelParams, n: int | None = None,
                 beta0: float | None = None) -> LinearSplit:
    """Identify A (with its beta0) so that du = (-A u + N(u)) dt + noise exactly."""
    op = OperatorA.build(basis, p.lambda_r, p.lambda_e, beta0=beta0)
    return LinearSplit(operator=op, params=p, n=n)


class _Stepper:
    """Precomputed per-mode factors for one (basis, params, scheme) triple.

    The advance path works on raw coefficient arrays (the formulas match
    `drift_and_field`, which stays the reference implementation used by the
    diagnostics and identity checks).
    """

    def __init__(self, basis: SpectralBasis, cfg: SchemeConfig, p: ModelParams,
                 fam: NoiseFamily):
        self.basis = basis
        self.cfg = cfg
        self.p = p
        self.fam = fam
        self.split = split_linear(basis, p, n=cfg.n)
        a = self.split.operator.symbols[..., None]
        self.a = a
        if cfg.scheme == "exponential_euler":
            self.decay = np.exp(-cfg.dt * a)
            self.weight = cfg.dt * phi1(-cfg.dt * a)
        else:
            self.denom = 1.0 + cfg.dt * a
        self.mask = None
        if cfg.n is not None:
            self.mask = basis.mode_mask(cfg.n)[..., None].astype(float)
        mu = basis.mu_grid[..., None]
        self.field_lin = -p.alpha * mu + p.kappa1  # H before the cubic part
        self.drift_lin = p.lambda_r + p.lambda_e * mu  # lam_r H - lam_e Lap H
        self.need_cubic = p.kappa2 != 0.0
        self.need_cross = p.gamma != 0.0
        self.need_torque = p.has_spin_current or p.has_affine_torque
        self.need_mult_noise = fam.K > 0 and p.gamma != 0.0 and bool(np.any(fam.h_hat))
        self.g_flat = fam.g_hat.reshape(fam.K, -1) if fam.K else None
        self.h_flat = fam.h_hat.reshape(fam.K, -1) if fam.K else None
        self.hat_shape = basis.shape + (3,)

    def _pad(self, coeffs):
        return self.basis.synthesize(coeffs, resolution=self.basis.padded_points)

    def drift_hat(self, c, u_pad):
        """Drift coefficients; same assembly as drift_and_field, array-level."""
        basis = self.basis
        if self.need_cubic:
            cub = basis.analyze(np.sum(u_pad**2, axis=-1, keepdims=True) * u_pad)
            if self.mask is not None:
                cub *= self.mask
            h = self.field_lin * c - self.p.kappa2 * cub
        else:
            h = self.field_lin * c
        f = self.drift_lin * h
        if self.need_cross:
            cross = basis.analyze(fields.cross3(u_pad, self._pad(h)))
            if self.mask is not None:
                cross *= self.mask
            f -= self.p.gamma * cross
        if self.need_torque:
            s = fields.s_total(VectorField(basis, c, check=False), self.p).coeffs
            if self.mask is not None:
                s = s * self.mask
            f = f + s
        return f

    def noise_hat(self, u_pad, dw):
        """sum_k Pi G_k(u) dW_k using the bilinearity of the cross product."""
        g_sum = (dw @ self.g_flat).reshape(self.hat_shape)
        if self.need_mult_noise:
            h_sum = self._pad((dw @ self.h_flat).reshape(self.hat_shape))
            g_sum = g_sum + self.p.gamma * self.basis.analyze(fields.cross3(u_pad, h_sum))
        if self.mask is not None:
            g_sum *= self.mask
        return g_sum

    def advance_coeffs(self, c, step_index, path, digest=None):
        # overflow here is a diagnosed blow-up, not a warning-worthy surprise
        with np.errstate(over="ignore", invalid="ignore"):
            cfg = self.cfg
            u_pad = self._pad(c)
            f = self.drift_hat(c, u_pad)
            noise = None
            if self.fam.K:
                dw = path.increments(step_index)
                if digest is not None:
                    digest.update(dw.tobytes())
                noise = self.noise_hat(u_pad, dw)
            n_hat = f + self.a * c
            if cfg.scheme == "exponential_euler":
                new = self.decay * c + self.weight * n_hat
                if noise is not None:
                    new += self.decay * noise
            else:
                new = c + cfg.dt * n_hat
                if noise is not None:
                    new += noise
                new /= self.denom
            if self.mask is not None:
                new *= self.mask
        return new

    def advance(self, state: TrajectoryState, path: NoisePath,
                digest=None) -> TrajectoryState:
        new = self.advance_coeffs(state.u.coeffs, state.step, path, digest=digest)
        step = state.step + 1
        t = step * self.cfg.dt
        if not np.isfinite(new).all():
            raise BlowUpError(step=step, t=t)
        return TrajectoryState(t=t, u=VectorField(self.basis, new, check=False), step=step,
                               noise_digest=state.noise_digest)


def step(state: TrajectoryState, cfg: SchemeConfig, p: ModelParams,
         fam: NoiseFamily, path: NoisePath) -> TrajectoryState:
    """One scheme step; see `integrate` for whole trajectories."""
    return _Stepper(state.u.basis, cfg, p, fam).advance(state, path)


def integrate(u0: VectorField, cfg: SchemeConfig, p: ModelParams, fam: NoiseFamily,
              path: NoisePath, sinks=()) -> TrajectoryState:
    """Run to t_final, invoking every sink at t=0, each record stride and the end.

    The result is a deterministic function of (u0, cfg, p, fam, path); the
    final state carries a digest of all consumed increments so coupled runs
    can prove they saw the same noise.
    """
    basis = u0.basis
    coeffs = u0.coeffs
    if cfg.n is not None:
        coeffs = basis.project(coeffs, cfg.n)
    state = TrajectoryState(t=0.0, u=VectorField(basis, coeffs), step=0)
    stepper = _Stepper(basis, cfg, p, fam)
    digest = hashlib.sha256()
    for sink in sinks:
        sink(state)
    n_steps = cfg.n_steps
    for _ in range(n_steps):
        state = stepper.advance(state, path, digest=digest)
        if state.step % cfg.record_every == 0 or state.step == n_steps:
            for sink in sinks:
                sink(state)
    state.noise_digest = digest.hexdigest()
    return state
