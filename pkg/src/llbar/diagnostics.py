"""Norm/energy time series and the checks built on top of them.

Everything here consumes either DiagnosticsRecord rows (norm time series) or
stored coefficient snapshots (for coupled-trajectory differences), so the
checks can run on freshly integrated states or on data read back from CSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ModelParams, energy_psi, norms
from .integrator import BlowUpError, HypothesisError, TrajectoryState, galerkin_field
from .noise import NoiseFamily, quadratic_variation_sum

CSV_COLUMNS = (
    "t", "norm_u_L2", "norm_grad_u", "norm_lap_u", "norm_u_L4",
    "norm_u_Linf", "psi", "norm_H_L2", "norm_grad_H", "quad_var",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    norm_u_L2: float
    norm_grad_u: float
    norm_lap_u: float
    norm_u_L4: float
    norm_u_Linf: float
    psi: float
    norm_H_L2: float
    norm_grad_H: float
    quad_var: float

    def as_row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def record(state: TrajectoryState, p: ModelParams, fam: NoiseFamily,
           n: int | None = None) -> DiagnosticsRecord:
    """Compute one diagnostics row from a trajectory state."""
    u = state.u
    with np.errstate(over="ignore", invalid="ignore"):
        nu = norms(u)
        H = galerkin_field(u, p, n=n)
        nh = norms(H)
        row = DiagnosticsRecord(
            t=state.t,
            norm_u_L2=nu["l2"],
            norm_grad_u=nu["h1_semi"],
            norm_lap_u=nu["lap"],
            norm_u_L4=nu["l4"],
            norm_u_Linf=nu["linf"],
            psi=energy_psi(u, p),
            norm_H_L2=nh["l2"],
            norm_grad_H=nh["h1_semi"],
            quad_var=quadratic_variation_sum(u, fam, p.gamma),
        )
    for name in CSV_COLUMNS:
        if not np.isfinite(getattr(row, name)):
            # a finite state can still overflow its squared norms; that is a
            # numerical blow-up, not a configuration problem
            raise BlowUpError(step=state.step, t=state.t)
    return row


class RecordCollector:
    """Trajectory sink accumulating DiagnosticsRecord rows."""

    def __init__(self, p: ModelParams, fam: NoiseFamily, n: int | None = None):
        self.p = p
        self.fam = fam
        self.n = n
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, state: TrajectoryState):
        rec = record(state, self.p, self.fam, n=self.n)
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("record times must be strictly increasing")
        self.records.append(rec)

    def rows(self) -> np.ndarray:
        return np.array([r.as_row() for r in self.records])


class StateHistory:
    """Trajectory sink storing (t, coefficients) snapshots for coupled diffs."""

    def __init__(self):
        self.times: list[float] = []
        self.coeffs: list[np.ndarray] = []

    def __call__(self, state: TrajectoryState):
        self.times.append(state.t)
        self.coeffs.append(state.u.coeffs.copy())


# -- pathwise decay (dissipative regime) --------------------------------------


@dataclass(frozen=True)
class DecayReport:
    mu_theoretical: float
    tol: float
    max_ratio_per_path: tuple[float, ...]
    violations: int
    fitted_rate: float

    @property
    def max_ratio(self) -> float:
        return max(self.max_ratio_per_path)


def decay_rate(p: ModelParams, fam: NoiseFamily) -> float:
    """The guaranteed exponential rate lam_r - gamma^2 sigma_h^2 / 2."""
    return p.lambda_r - 0.5 * p.gamma**2 * fam.sigma_h2


def require_decay_hypotheses(p: ModelParams, fam: NoiseFamily):
    """The dissipative regime: above Curie, multiplicative noise only, no torque."""
    if p.kappa1 != -1:
        raise HypothesisError("decay bound needs kappa1 = -1 (above the Curie point)")
    if not fam.is_additive_free:
        raise HypothesisError("decay bound needs g_k = 0 (no additive noise)")
    if p.has_spin_current or p.has_affine_torque:
        raise HypothesisError("decay bound needs a vanishing torque S")
    mu = decay_rate(p, fam)
    if mu <= 0:
        raise HypothesisError(
            f"decay bound needs lambda_r > gamma^2 sigma_h^2 / 2 (rate {mu:.6g} <= 0)")
    return mu


def check_pathwise_decay(trajectories, p: ModelParams, fam: NoiseFamily,
                         tol: float = 0.05) -> DecayReport:
    """Verify ||u(t)||^2 <= (1+tol) e^{-mu t} ||u0||^2 at every recorded time.

    `trajectories` is a list (one per path) of DiagnosticsRecord lists. The
    tolerance absorbs the time-discretisation error and is reported back.
    """
    mu = require_decay_hypotheses(p, fam)
    if not trajectories or any(len(recs) == 0 for recs in trajectories):
        raise ValueError("empty trajectory")
    max_ratios = []
    violations = 0
    rates = []
    for recs in trajectories:
        t = np.array([r.t for r in recs])
        sq = np.array([r.norm_u_L2 for r in recs]) ** 2
        if sq[0] == 0.0:
            max_ratios.append(0.0)
            continue
        ratio = sq / sq[0] * np.exp(mu * t)
        max_ratios.append(float(ratio.max()))
        violations += int(np.count_nonzero(ratio > 1.0 + tol))
        pos = sq > 0
        if pos.sum() >= 2:
            slope = np.polyfit(t[pos], np.log(sq[pos]), 1)[0]
            rates.append(-slope)
    fitted = float(np.mean(rates)) if rates else 0.0
    return DecayReport(mu_theoretical=mu, tol=tol,
                       max_ratio_per_path=tuple(max_ratios),
                       violations=violations, fitted_rate=fitted)


def check_integrated_bound(records, horizons, p: ModelParams, fam: NoiseFamily) -> dict:
    """Trapezoid integrals of ||u||_{H^2}^2 and ||u||_{L^4}^4 up to each horizon.

    Returns, per horizon T, the integrals and their ratio to ||u0||^2; in the
    dissipative regime the ratio must plateau in T (the constant in front of
    ||u0||^2 does not grow with the horizon).
    """
    require_decay_hypotheses(p, fam)
    if not records:
        raise ValueError("empty trajectory")
    t = np.array([r.t for r in records])
    h2 = (np.array([r.norm_u_L2 for r in records]) ** 2
          + np.array([r.norm_grad_u for r in records]) ** 2
          + np.array([r.norm_lap_u for r in records]) ** 2)
    l4 = np.array([r.norm_u_L4 for r in records]) ** 4
    u0_sq = records[0].norm_u_L2 ** 2
    out = {}
    for T in horizons:
        if T > t[-1] + 1e-12:
            raise ValueError(f"horizon {T} beyond recorded time {t[-1]}")
        m = t <= T + 1e-12
        int_h2 = float(np.trapezoid(h2[m], t[m]))
        int_l4 = float(np.trapezoid(l4[m], t[m]))
        ratio = 0.0 if u0_sq == 0.0 else (int_h2 + int_l4) / u0_sq
        out[T] = {"int_H2": int_h2, "int_L4": int_l4, "ratio": ratio}
    return out


# -- ensemble moments ----------------------------------------------------------


def mc_moments(trajectories, order: int = 1, z: float = 1.96) -> dict:
    """Ensemble mean and normal-approximation CI of the moment functionals.

    Per path: (sup_t ||u||^2)^p and (int ||u||_{H^2}^2 dt)^p; at least two
    paths are required for a confidence interval.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least 2 paths for ensemble moments")
    sup_stats = []
    int_stats = []
    for recs in trajectories:
        t = np.array([r.t for r in recs])
        sq = np.array([r.norm_u_L2 for r in recs]) ** 2
        h2 = (sq + np.array([r.norm_grad_u for r in recs]) ** 2
              + np.array([r.norm_lap_u for r in recs]) ** 2)
        sup_stats.append(sq.max() ** order)
        int_stats.append(np.trapezoid(h2, t) ** order)
    out = {}
    for name, vals in (("sup_l2", np.array(sup_stats)), ("int_h2", np.array(int_stats))):
        m = len(vals)
        mean = float(vals.mean())
        sem = float(vals.std(ddof=1) / np.sqrt(m))
        out[name] = {"mean": mean, "ci_half_width": z * sem, "n_paths": m}
    return out


# -- time averages -------------------------------------------------------------


@dataclass
class ErgodicAverage:
    """Running trapezoid Cesaro mean (1/T) int_0^T phi(u(t)) dt of an observable.

    Samples after `burn_in` are kept so window means and batch-based standard
    errors over any tail interval stay recomputable.
    """

    observable: str = "h1_sq"
    burn_in: float = 0.0
    t_last: float | None = None
    f_last: float = 0.0
    t_start: float | None = None
    integral: float = 0.0
    tail_t: list[float] = field(default_factory=list)
    tail_f: list[float] = field(default_factory=list)

    OBSERVABLES = ("l2_sq", "h1_sq", "psi")

    def __post_init__(self):
        if self.observable not in self.OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable!r}")

    def value_from(self, rec: DiagnosticsRecord) -> float:
        if self.observable == "l2_sq":
            return rec.norm_u_L2**2
        if self.observable == "h1_sq":
            return rec.norm_u_L2**2 + rec.norm_grad_u**2
        return rec.psi

    @property
    def mean(self) -> float:
        if self.t_last is None or self.t_last == self.t_start:
            return self.f_last
        return self.integral / (self.t_last - self.t_start)

    def window_mean(self, t_lo: float, t_hi: float) -> float:
        t = np.array(self.tail_t)
        f = np.array(self.tail_f)
        m = (t >= t_lo) & (t <= t_hi)
        if m.sum() < 2:
            raise ValueError(f"window [{t_lo},{t_hi}] holds fewer than 2 samples")
        return float(np.trapezoid(f[m], t[m]) / (t[m][-1] - t[m][0]))

    def window_sem(self, t_lo: float, t_hi: float, n_batches: int = 10) -> float:
        """Batch-means standard error over a window (robust to autocorrelation)."""
        t = np.array(self.tail_t)
        f = np.array(self.tail_f)
        m = (t >= t_lo) & (t <= t_hi)
        if m.sum() < 2 * n_batches:
            raise ValueError("window too short for batch statistics")
        batches = np.array_split(f[m], n_batches)
        means = np.array([b.mean() for b in batches])
        return float(means.std(ddof=1) / np.sqrt(n_batches))


def ergodic_update(avg: ErgodicAverage, rec: DiagnosticsRecord) -> ErgodicAverage:
    """Advance the running mean by one record; time must strictly increase."""
    f = avg.value_from(rec)
    if avg.t_last is None:
        avg.t_start = rec.t
    else:
        if rec.t <= avg.t_last:
            raise ValueError(f"non-monotone time {rec.t} after {avg.t_last}")
        avg.integral += 0.5 * (f + avg.f_last) * (rec.t - avg.t_last)
    avg.t_last = rec.t
    avg.f_last = f
    if rec.t >= avg.burn_in:
        avg.tail_t.append(rec.t)
        avg.tail_f.append(f)
    return avg


# -- coupled-path limit curves ---------------------------------------------------


def trajectory_difference(a: StateHistory, b: StateHistory, basis) -> dict:
    """sup_t ||a-b||_{L^2}^2 and int ||a-b||_{H^1}^2 dt for one coupled pair."""
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("coupled trajectories must share record times")
    mu = basis.mu_grid[..., None]
    sup_l2 = 0.0
    h1 = np.empty(len(a.times))
    for i, (ca, cb) in enumerate(zip(a.coeffs, b.coeffs)):
        d = ca - cb
        l2_sq = float(np.sum(d**2))
        sup_l2 = max(sup_l2, l2_sq)
        h1[i] = l2_sq + float(np.sum(mu * d**2))
    return {"sup_l2_sq": sup_l2, "int_h1_sq": float(np.trapezoid(h1, np.array(a.times)))}


def llb_limit_error(histories_by_eps: dict, reference, basis) -> list[dict]:
    """Mean coupled-path error of each exchange-relaxation value vs the eps=0 run.

    `histories_by_eps` maps eps -> list of StateHistory (one per path);
    `reference` is the matching list for the limit run.  All runs must share
    initial data, record times and path count; only d in {1, 2} is supported.
    """
    if basis.domain.dim >= 3:
        raise ValueError("the vanishing-exchange limit check is stated for d in {1, 2}; "
                         "d = 3 lacks the required continuity estimate")
    out = []
    for eps, hists in sorted(histories_by_eps.items(), reverse=True):
        if len(hists) != len(reference):
            raise ValueError("mismatched path counts between runs")
        errs_sup = []
        errs_int = []
        for h, ref in zip(hists, reference):
            if not np.array_equal(h.coeffs[0], ref.coeffs[0]):
                raise ValueError("coupled runs must start from identical initial data")
            d = trajectory_difference(h, ref, basis)
            errs_sup.append(d["sup_l2_sq"])
            errs_int.append(d["int_h1_sq"])
        out.append({
            "eps": float(eps),
            "err_sup_l2": float(np.mean(errs_sup)),
            "err_int_h1": float(np.mean(errs_int)),
            "err_total": float(np.mean(errs_sup) + np.mean(errs_int)),
        })
    return out


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log10(y) against log10(x)."""
    return float(np.polyfit(np.log10(np.asarray(xs, dtype=float)),
                            np.log10(np.asarray(ys, dtype=float)), 1)[0])
