"""Identity suite: the mathematical core, checked on randomized fields.

Runs every structural identity the solver relies on, each with an
independently assembled right-hand side:

  * Parseval (nodal quadrature vs spectral sum),
  * semigroup composition e^{-sA} e^{-tA} = e^{-(s+t)A},
  * the cubic-Laplacian expansion
    Lap(|v|^2 v) = 2|grad v|^2 v + 2(v.Lap v)v + 4 grad v (v.grad v)^T + |v|^2 Lap v,
  * the interpolation bound ||grad v||^2 <= (1/4e)||v||^2 + e||Lap v||^2,
  * the drift-field pairing <F(u),H(u)> = lam_r ||H||^2 + lam_e ||grad H||^2 + <S(u),H>.

Each check reports its worst residual over the sampled fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as fo
from .fields import ModelParams, VectorField
from .integrator import drift_and_field
from .spectral import BoxDomain, OperatorA, build_basis


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)


def _suite_cases(seed: int):
    d1 = BoxDomain(dim=1, lengths=(1.0,), points=(128,))
    d2 = BoxDomain(dim=2, lengths=(1.0, 1.3), points=(64, 64))
    return [
        (build_basis(d1, (31,)), seed),
        (build_basis(d2, (15, 15)), seed + 1),
    ]


def _random_field(basis, rng, amplitude=0.5):
    c = amplitude * rng.standard_normal(basis.shape + (3,))
    c *= (1.0 + basis.mu_grid[..., None]) ** -0.5
    return VectorField(basis, c)


def check_parseval(basis, u: VectorField) -> float:
    nodal = basis.quad_weight() * float(np.sum(u.values**2))
    spectral = float(np.sum(u.coeffs**2))
    return abs(nodal - spectral) / max(spectral, 1e-300)


def check_semigroup(basis, u: VectorField, s=0.13, t=0.29) -> float:
    op = OperatorA.build(basis, lambda_r=1.0, lambda_e=0.7)
    two = op.apply_semigroup(op.apply_semigroup(u.coeffs, t), s)
    one = op.apply_semigroup(u.coeffs, s + t)
    scale = np.abs(one).max()
    return float(np.abs(two - one).max() / max(scale, 1e-300))


def check_cubic_laplacian(basis, u: VectorField) -> float:
    left = fo.laplacian_cubic(u).coeffs
    vals = u.values_padded
    grads = u.gradient_padded
    lap = basis.synthesize(basis.laplacian(u.coeffs), resolution=basis.padded_points)
    grad_sq = sum(np.sum(g**2, axis=-1, keepdims=True) for g in grads)
    v_dot_lap = np.sum(vals * lap, axis=-1, keepdims=True)
    rhs = 2.0 * grad_sq * vals + 2.0 * v_dot_lap * vals + np.sum(vals**2, axis=-1, keepdims=True) * lap
    for g in grads:
        rhs = rhs + 4.0 * np.sum(vals * g, axis=-1, keepdims=True) * g
    right = basis.analyze(rhs)
    denom = np.sqrt(np.sum(left**2))
    return float(np.sqrt(np.sum((left - right) ** 2)) / max(denom, 1e-300))


def check_interpolation(basis, u: VectorField, eps=(0.1, 1.0, 10.0)) -> float:
    """Worst signed violation of the bound; negative slack counts as 0 residual."""
    n = fo.norms(u)
    worst = 0.0
    for e in eps:
        lhs = n["h1_semi"] ** 2
        rhs = n["l2"] ** 2 / (4.0 * e) + e * n["lap"] ** 2
        worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    return worst


def check_pairing(basis, u: VectorField, p: ModelParams, flip_field_sign=False) -> float:
    F, H = drift_and_field(u, p)
    if flip_field_sign:
        H = -H  # test hook: a sign mutation must break this identity
    lhs = fo.inner_l2(F, H)
    s = fo.s_total(u, p)
    nh = fo.norms(H)
    rhs = p.lambda_r * nh["l2"] ** 2 + p.lambda_e * nh["h1_semi"] ** 2 + fo.inner_l2(s, H)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def run_selftest(seed: int = 2024, n_fields: int = 20, _mutate: str | None = None) -> list[CheckResult]:
    """Run the identity suite; `_mutate` injects deliberate defects for canaries."""
    params = ModelParams(lambda_r=1.0, lambda_e=0.5, gamma=1.2, alpha=1.0,
                         kappa1=1.0, kappa2=1.0, beta1=0.4, beta2=0.7,
                         nu=None, L_matrix=None)
    worst = {"parseval": 0.0, "semigroup": 0.0, "cubic_laplacian": 0.0,
             "interpolation": 0.0, "pairing": 0.0}
    for basis, case_seed in _suite_cases(seed):
        rng = np.random.default_rng(case_seed)
        p = ModelParams(
            lambda_r=params.lambda_r, lambda_e=params.lambda_e, gamma=params.gamma,
            beta1=params.beta1, beta2=params.beta2,
            nu=tuple(0.3 for _ in range(basis.domain.dim)),
            L_matrix=((0.1, 0.0, -0.2), (0.0, 0.05, 0.0), (0.2, 0.0, 0.1)),
            L_offset=(0.01, -0.02, 0.0),
        )
        for _ in range(n_fields):
            u = _random_field(basis, rng)
            worst["parseval"] = max(worst["parseval"], check_parseval(basis, u))
            worst["semigroup"] = max(worst["semigroup"], check_semigroup(basis, u))
            worst["cubic_laplacian"] = max(worst["cubic_laplacian"], check_cubic_laplacian(basis, u))
            worst["interpolation"] = max(worst["interpolation"], check_interpolation(basis, u))
            worst["pairing"] = max(
                worst["pairing"],
                check_pairing(basis, u, p, flip_field_sign=(_mutate == "flip_effective_field")),
            )
    thresholds = {"parseval": 1e-12, "semigroup": 1e-12, "cubic_laplacian": 1e-8,
                  "interpolation": 0.0, "pairing": 1e-8}
    return [CheckResult(name, worst[name], thresholds[name]) for name in worst]


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name:<16s} residual {r.residual:.3e}  (threshold {r.threshold:.0e})")
    return "\n".join(lines)
