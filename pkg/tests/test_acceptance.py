"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one line (visible with `pytest -s` or on failure) and
asserts the criterion plus its runtime budget.  The checks are property
based at desk scale: structural identities at machine precision, scheme
orders against closed forms and coupled references, and the qualitative
statements (pathwise decay, bounded time integrals, vanishing-exchange
limit, ergodic averaging) on the configurations that satisfy their
hypotheses exactly.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from llbar.config import get_preset, with_overrides
from llbar.diagnostics import (ErgodicAverage, RecordCollector, StateHistory,
                               check_integrated_bound, ergodic_update, loglog_slope)
from llbar.experiment import run_decay_test, run_llb_limit, run_single_path
from llbar.fields import ModelParams, VectorField, energy_psi, norms
from llbar.integrator import SchemeConfig, drift_and_field, galerkin_field, integrate
from llbar.noise import NoisePath, build_noise_family, diffusion
from llbar.selftest import run_selftest
from llbar.spectral import BoxDomain, build_basis


def report(name, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {name}: {status} ({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")


def test_identity_suite():
    t0 = time.perf_counter()
    results = run_selftest(seed=2024, n_fields=20)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 10.0
    detail = ", ".join(f"{r.name}={r.residual:.1e}" for r in results)
    report("identity-suite", ok, detail, elapsed, 10)
    assert all(r.passed for r in results), results
    assert elapsed < 10.0


def test_linear_mode_oracle():
    t0 = time.perf_counter()
    basis = build_basis(BoxDomain(1, (np.pi,), (16,)), (4,))
    fam = build_noise_family(basis, 0)
    p = ModelParams(lambda_r=1.0, lambda_e=0.5, gamma=0.0, alpha=1.0, kappa1=-1.0, kappa2=0.0)

    # exponential Euler against the exact exponential rate
    k, amp = 1, 0.8
    mu = basis.mu_grid[k]
    rate = (p.lambda_r + p.lambda_e * mu) * (-p.alpha * mu + p.kappa1)
    cfg = SchemeConfig(dt=4e-6, t_final=0.05, record_every=10**9)
    final = integrate(VectorField.single_mode(basis, (k,), (amp, 0, 0)),
                      cfg, p, fam, NoisePath(seed=0, path_id=0, dt=cfg.dt, K=0))
    exact = amp * np.exp(rate * cfg.t_final)
    rel_exp = abs(final.u.coeffs[k, 0] - exact) / abs(exact)

    # IMEX: first order, observed slope 1 +/- 0.1
    k2, T2 = 2, 0.2
    mu2 = basis.mu_grid[k2]
    rate2 = (p.lambda_r + p.lambda_e * mu2) * (-p.alpha * mu2 + p.kappa1)
    dts = (1e-3, 5e-4, 2.5e-4)
    errs = []
    for dt in dts:
        c = SchemeConfig(dt=dt, t_final=T2, scheme="imex_euler", record_every=10**9)
        f = integrate(VectorField.single_mode(basis, (k2,), (amp, 0, 0)),
                      c, p, fam, NoisePath(seed=0, path_id=0, dt=dt, K=0))
        errs.append(abs(f.u.coeffs[k2, 0] - amp * np.exp(rate2 * T2)))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]

    elapsed = time.perf_counter() - t0
    ok = rel_exp < 1e-6 and abs(slope - 1.0) <= 0.1 and elapsed < 1.0
    report("linear-mode-oracle", ok,
           f"exp-euler rel={rel_exp:.2e}, imex slope={slope:.3f}", elapsed, 1)
    assert rel_exp < 1e-6
    assert abs(slope - 1.0) <= 0.1
    assert elapsed < 1.0


class _EnergySink:
    """Collects the energy and the dissipation-rate integrand along a run."""

    def __init__(self, p, stride=1):
        self.p = p
        self.stride = stride
        self.psi = []
        self.t_pair = []
        self.pair = []

    def __call__(self, state):
        self.psi.append(energy_psi(state.u, self.p))
        if state.step % self.stride == 0:
            H = galerkin_field(state.u, self.p)
            nh = norms(H)
            self.t_pair.append(state.t)
            self.pair.append(self.p.lambda_r * nh["l2"] ** 2
                             + self.p.lambda_e * nh["h1_semi"] ** 2)


def test_deterministic_energy_dissipation():
    t0 = time.perf_counter()
    cfg = get_preset("deterministic-dissipation")
    basis = cfg.basis()
    p = cfg.params()
    fam = cfg.family(basis)
    u0 = cfg.initial_field(basis)
    path = NoisePath(seed=0, path_id=0, dt=cfg.dt, K=0)

    # monotone energy along the full run from the rough random state
    scheme = SchemeConfig(dt=cfg.dt, t_final=cfg.t_final, record_every=1)
    psi = []
    relaxed = integrate(u0, scheme, p, fam, path,
                        sinks=[lambda s: psi.append(energy_psi(s.u, p))])
    monotone = bool(np.all(np.diff(psi) <= 1e-13))

    # balance residual at first order: measured on the relaxed state, where the
    # dissipation-rate integrand is resolvable by quadrature on the dt grid
    u_ref = relaxed.u
    residuals = []
    dts = (1e-4, 5e-5, 2.5e-5)
    for dt in dts:
        window = SchemeConfig(dt=dt, t_final=0.5, record_every=1)
        sink = _EnergySink(p, stride=1)
        integrate(u_ref, window, p, fam, NoisePath(seed=0, path_id=0, dt=dt, K=0),
                  sinks=[sink])
        res = abs(sink.psi[-1] - sink.psi[0] + np.trapezoid(sink.pair, sink.t_pair))
        residuals.append(res)
    slope = np.polyfit(np.log(dts), np.log(residuals), 1)[0]

    elapsed = time.perf_counter() - t0
    ok = monotone and 0.7 < slope < 1.3 and elapsed < 30.0
    report("deterministic-dissipation", ok,
           f"monotone={monotone}, balance residuals={residuals[0]:.2e}->"
           f"{residuals[2]:.2e}, slope={slope:.2f}", elapsed, 30)
    assert monotone
    assert 0.7 < slope < 1.3, (residuals, slope)
    assert elapsed < 30.0


def test_pathwise_decay_bound(tmp_path):
    t0 = time.perf_counter()
    cfg = get_preset("above-curie-decay")
    assert cfg.paths == 100 and cfg.t_final == 5.0 and cfg.dt == 1e-3
    outcome = run_decay_test(cfg, tmp_path / "decay")
    rep = outcome["report"]

    # margin shrinks under dt refinement: coupled runs on a fixed record grid
    basis = cfg.basis()
    p = cfg.params()
    fam = cfg.family(basis)
    mu = rep.mu_theoretical
    u0 = cfg.initial_field(basis)
    u0_sq = float(np.sum(u0.coeffs**2))
    dt_fine = 5e-4
    margins = []
    for dt in (2e-3, 1e-3, 5e-4):
        stride = int(round(0.02 / dt))
        worst = -np.inf
        for pid in range(8):
            path = NoisePath(seed=cfg.seed, path_id=pid, dt=dt, K=cfg.K,
                             substeps=int(round(dt / dt_fine)))
            scheme = SchemeConfig(dt=dt, t_final=2.0, record_every=stride)
            ratios = []

            def sink(state):
                if state.t > 0:
                    sq = float(np.sum(state.u.coeffs**2))
                    ratios.append(sq / u0_sq * np.exp(mu * state.t))

            integrate(u0, scheme, p, fam, path, sinks=[sink])
            worst = max(worst, max(ratios))
        margins.append(worst - 1.0)
    shrinking = (abs(margins[1] - margins[2]) <= abs(margins[0] - margins[1]) + 1e-9
                 and margins[2] <= margins[0] + 1e-9)

    elapsed = time.perf_counter() - t0
    ok = (rep.violations == 0 and rep.max_ratio <= 1.0 + rep.tol
          and shrinking and elapsed < 300.0)
    report("pathwise-decay", ok,
           f"mu={mu:.3f} violations={rep.violations} max_ratio={rep.max_ratio:.4f} "
           f"margins={['%.2e' % m for m in margins]}", elapsed, 300)
    assert rep.violations == 0
    assert rep.max_ratio <= 1.0 + rep.tol
    assert shrinking, margins
    assert elapsed < 300.0


def test_integrated_bound_plateau():
    t0 = time.perf_counter()
    cfg = replace(get_preset("above-curie-decay"), t_final=20.0, paths=16,
                  record_every=10)
    basis = cfg.basis()
    p = cfg.params()
    fam = cfg.family(basis)
    worst_change = 0.0
    ratios_t10 = []
    for pid in range(cfg.paths):
        collector, _, _ = run_single_path(cfg, pid)
        out = check_integrated_bound(collector.records, [5.0, 10.0, 20.0], p, fam)
        r10, r20 = out[10.0]["ratio"], out[20.0]["ratio"]
        ratios_t10.append(r10)
        worst_change = max(worst_change, abs(r20 - r10) / r10)
    elapsed = time.perf_counter() - t0
    ok = worst_change < 0.10 and elapsed < 300.0
    report("integrated-bound-plateau", ok,
           f"ratio({np.mean(ratios_t10):.3f} at T=10) changes {worst_change:.2%} "
           f"to T=20 over {cfg.paths} paths", elapsed, 300)
    assert worst_change < 0.10
    assert elapsed < 300.0


def test_vanishing_exchange_limit(tmp_path):
    t0 = time.perf_counter()
    cfg = get_preset("llb-limit")
    assert cfg.llb_epsilons == (1e-1, 1e-2, 1e-3) and cfg.paths == 32
    outcome = run_llb_limit(cfg, tmp_path / "llb")
    errs = [row["err_total"] for row in outcome["errors"]]
    eps = [row["eps"] for row in outcome["errors"]]
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    slope = outcome["slope"]
    elapsed = time.perf_counter() - t0
    ok = decreasing and slope >= 0.8 and elapsed < 600.0
    report("vanishing-exchange-limit", ok,
           f"errors={['%.3e' % e for e in errs]} at eps={eps}, slope={slope:.2f}",
           elapsed, 600)
    assert decreasing, errs
    assert slope >= 0.8, (eps, errs, slope)
    assert elapsed < 600.0


def test_continuous_dependence(tmp_path):
    t0 = time.perf_counter()
    cfg = with_overrides(get_preset("below-curie"), paths=1)
    basis = cfg.basis()
    p = cfg.params()
    fam = cfg.family(basis)
    scheme = cfg.scheme_config()
    u0 = cfg.initial_field(basis)
    bumped = np.array(u0.coeffs)
    bumped[0, 0] += 1e-8  # the least-damped mode, so the bump actually evolves
    u0b = VectorField(basis, bumped)

    hists = []
    for start in (u0, u0b):
        path = NoisePath(seed=cfg.seed, path_id=0, dt=cfg.dt, K=cfg.K)
        h = StateHistory()
        integrate(start, scheme, p, fam, path, sinks=[h])
        hists.append(h)
    sup_diff = max(
        np.sqrt(np.sum((a - b) ** 2))
        for a, b in zip(hists[0].coeffs, hists[1].coeffs)
    )

    # identical data: two full reruns must agree bit for bit
    from llbar.experiment import run_experiment

    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    identical = ((tmp_path / "a" / "trajectory_000.csv").read_bytes()
                 == (tmp_path / "b" / "trajectory_000.csv").read_bytes())

    elapsed = time.perf_counter() - t0
    ok = sup_diff < 1e-6 and identical and elapsed < 60.0
    report("continuous-dependence", ok,
           f"1e-8 bump grows to sup={sup_diff:.2e}; identical reruns={identical}",
           elapsed, 60)
    assert sup_diff < 1e-6
    assert identical
    assert elapsed < 60.0


def test_ito_isometry_and_ci_scaling():
    t0 = time.perf_counter()
    # one-step pairing variance over 1e5 samples vs dt sum_k <G_k(u), phi>^2
    basis = build_basis(BoxDomain(1, (1.0,), (48,)), (16,))
    gamma = 1.0
    fam = build_noise_family(basis, 8, c_g=0.3, c_h=0.5)
    u = VectorField.random_band_limited(basis, 10, 0.5, 3, decay=0.5)
    phi = VectorField.random_band_limited(basis, 10, 1.0, 4, decay=0.5)
    pair = np.array([float(np.sum(diffusion(u, fam, gamma, k).coeffs * phi.coeffs))
                     for k in range(fam.K)])
    dt = 1e-2
    n_samples = 10**5
    path = NoisePath(seed=99, path_id=0, dt=dt, K=fam.K)
    dws = np.vstack([path._fine_rows(i * 256, (i + 1) * 256)
                     for i in range(n_samples // 256 + 1)])[:n_samples] * np.sqrt(dt)
    X = dws @ pair
    want = dt * float(np.sum(pair**2))
    got = X.var(ddof=1)
    se = want * np.sqrt(2.0 / (n_samples - 1))  # relative sd of a chi^2 variance
    iso_ok = abs(got - want) <= 3 * se

    # CI half-width shrinks by ~2x from 64 to 256 paths (nested ensembles)
    from llbar.diagnostics import mc_moments

    cfg = replace(get_preset("below-curie"), points=(32,), cutoff=(8,), K=4,
                  t_final=0.1, dt=1e-3, record_every=5, ic_max_mode=4,
                  ic_amplitude=0.2, paths=256, seed=505)
    trajectories = []
    for pid in range(256):
        collector, _, _ = run_single_path(cfg, pid)
        trajectories.append(collector.records)
    ci64 = mc_moments(trajectories[:64])["sup_l2"]["ci_half_width"]
    ci256 = mc_moments(trajectories)["sup_l2"]["ci_half_width"]
    ratio = ci64 / ci256

    elapsed = time.perf_counter() - t0
    ok = iso_ok and abs(ratio - 2.0) <= 0.3
    report("ito-isometry-mc", ok,
           f"variance {got:.4e} vs {want:.4e} ({abs(got-want)/se:.2f} se); "
           f"CI ratio 64->256 = {ratio:.2f}", elapsed, 60)
    assert iso_ok, (got, want, se)
    assert abs(ratio - 2.0) <= 0.3, ratio
    assert elapsed < 60.0


def test_ergodic_averaging():
    t0 = time.perf_counter()
    cfg = get_preset("invariant-measure")
    assert cfg.t_final == 200.0
    collector, _, _ = run_single_path(cfg, 0)
    avg = ErgodicAverage(observable="h1_sq", burn_in=50.0)
    for rec in collector.records:
        ergodic_update(avg, rec)
    m1 = avg.window_mean(50.0, 100.0)
    m2 = avg.window_mean(100.0, 200.0)
    sem = avg.window_sem(100.0, 200.0, n_batches=10)
    elapsed = time.perf_counter() - t0
    ok = abs(m1 - m2) <= 3.0 * sem and elapsed < 600.0
    report("ergodic-averaging", ok,
           f"window means {m1:.4f} vs {m2:.4f}, tail sem {sem:.4f}, "
           f"|diff|/sem={abs(m1-m2)/sem:.2f}", elapsed, 600)
    assert abs(m1 - m2) <= 3.0 * sem, (m1, m2, sem)
    assert elapsed < 600.0
