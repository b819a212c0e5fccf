"""Experiment configuration: strict key=value parsing and named presets.

Configs are flat INI-style text (diffable, hand-editable); every section and
key is validated against the schema below and anything unrecognized aborts
before computation.  A parsed config resolves to immutable simulation
objects plus a metadata dict (including derived quantities such as beta0,
sigma_g^2, sigma_h^2 and the guaranteed decay rate) whose hash stamps every
output file.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field, fields as dc_fields, replace

import numpy as np

from .fields import ModelParams, VectorField
from .integrator import SchemeConfig
from .noise import NoiseFamily, build_noise_family, scale_to_sigma_h2
from .spectral import BoxDomain, OperatorA, SpectralBasis, build_basis


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


IC_KINDS = ("zero", "constant", "single_mode", "random")

_SCHEMA = {
    "domain": {"dim", "lengths", "points"},
    "basis": {"cutoff"},
    "model": {"lambda_r", "lambda_e", "gamma", "alpha", "kappa1", "kappa2",
              "beta1", "beta2", "nu", "l_matrix", "l_offset"},
    "noise": {"k", "r", "c_g", "c_h"},
    "scheme": {"scheme", "dt", "t_final", "record_every", "cutoff"},
    "ensemble": {"paths", "seed"},
    "initial": {"kind", "value", "mode", "amplitude", "max_mode", "ic_seed", "decay"},
    "output": {"directory"},
    "llb": {"epsilons"},
    "decay": {"tol"},
}
_REQUIRED_SECTIONS = ("domain", "basis", "model", "noise", "scheme", "ensemble", "initial")


@dataclass(frozen=True)
class ExperimentConfig:
    # domain / discretisation
    dim: int
    lengths: tuple[float, ...]
    points: tuple[int, ...]
    cutoff: tuple[int, ...]
    # model coefficients
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
    # noise family
    K: int = 0
    r: float = 2.0
    c_g: float = 0.0
    c_h: float = 0.0
    # scheme
    scheme: str = "exponential_euler"
    dt: float = 1e-3
    t_final: float = 1.0
    record_every: int = 1
    scheme_cutoff: int | None = None
    # ensemble
    paths: int = 1
    seed: int = 0
    # initial condition
    ic_kind: str = "zero"
    ic_value: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ic_mode: tuple[int, ...] = ()
    ic_amplitude: float = 1.0
    ic_max_mode: int = 0
    ic_seed: int = 0
    ic_decay: float = 0.0
    # outputs / check knobs
    out_dir: str | None = None
    llb_epsilons: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    decay_tol: float = 0.05

    def __post_init__(self):
        if self.ic_kind not in IC_KINDS:
            raise ConfigError(f"unknown initial-condition kind {self.ic_kind!r}")
        if self.paths < 1:
            raise ConfigError("ensemble needs at least one path")

    # -- resolution ----------------------------------------------------------

    def domain(self) -> BoxDomain:
        return BoxDomain(dim=self.dim, lengths=self.lengths, points=self.points)

    def basis(self) -> SpectralBasis:
        return build_basis(self.domain(), self.cutoff)

    def params(self) -> ModelParams:
        return ModelParams(
            lambda_r=self.lambda_r, lambda_e=self.lambda_e, gamma=self.gamma,
            alpha=self.alpha, kappa1=self.kappa1, kappa2=self.kappa2,
            beta1=self.beta1, beta2=self.beta2, nu=self.nu,
            L_matrix=self.L_matrix, L_offset=self.L_offset,
        )

    def family(self, basis: SpectralBasis) -> NoiseFamily:
        return build_noise_family(basis, self.K, self.r, c_g=self.c_g, c_h=self.c_h)

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(dt=self.dt, t_final=self.t_final, scheme=self.scheme,
                            n=self.scheme_cutoff, record_every=self.record_every)

    def initial_field(self, basis: SpectralBasis) -> VectorField:
        if self.ic_kind == "zero":
            return VectorField.zeros(basis)
        if self.ic_kind == "constant":
            return VectorField.constant(basis, self.ic_value)
        if self.ic_kind == "single_mode":
            return VectorField.single_mode(basis, self.ic_mode, self.ic_amplitude)
        return VectorField.random_band_limited(
            basis, self.ic_max_mode, self.ic_amplitude, self.ic_seed, decay=self.ic_decay)

    def to_meta(self) -> dict:
        """Resolved configuration plus derived constants, JSON-serialisable."""
        basis = self.basis()
        fam = self.family(basis)
        beta0 = OperatorA.select_beta0(self.lambda_r, self.lambda_e)
        op = OperatorA.build(basis, self.lambda_r, self.lambda_e)
        meta = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        meta.update({
            "beta0": beta0,
            "lambda0": op.lambda0,
            "sigma_g2": fam.sigma_g2,
            "sigma_h2": fam.sigma_h2,
            "mu": self.lambda_r - 0.5 * self.gamma**2 * fam.sigma_h2,
            "mode_ordering": "lexicographic",
        })
        return _jsonable(meta)

    def config_hash(self) -> str:
        meta = {k: v for k, v in self.to_meta().items() if k != "out_dir"}
        blob = json.dumps(meta, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# -- parsing ---------------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; known: {sorted(_SCHEMA)}")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in [{section}]; known: {sorted(_SCHEMA[section])}")
    for section in _REQUIRED_SECTIONS:
        if section not in cp:
            raise ConfigError(f"missing required section [{section}]")

    def need(section, key):
        if key not in cp[section]:
            raise ConfigError(f"missing key '{key}' in [{section}]")
        return cp[section][key]

    def opt(section, key, default=None):
        if section in cp and key in cp[section]:
            return cp[section][key]
        return default

    try:
        dim = int(need("domain", "dim"))
        kwargs = dict(
            dim=dim,
            lengths=_floats(need("domain", "lengths")),
            points=_ints(need("domain", "points")),
            cutoff=_ints(need("basis", "cutoff")),
            lambda_r=float(need("model", "lambda_r")),
            lambda_e=float(need("model", "lambda_e")),
            gamma=float(need("model", "gamma")),
            alpha=float(opt("model", "alpha", "1.0")),
            kappa1=float(opt("model", "kappa1", "1.0")),
            kappa2=float(opt("model", "kappa2", "1.0")),
            beta1=float(opt("model", "beta1", "0.0")),
            beta2=float(opt("model", "beta2", "0.0")),
            K=int(need("noise", "k")),
            r=float(opt("noise", "r", "2.0")),
            c_g=float(opt("noise", "c_g", "0.0")),
            c_h=float(opt("noise", "c_h", "0.0")),
            scheme=need("scheme", "scheme"),
            dt=float(need("scheme", "dt")),
            t_final=float(need("scheme", "t_final")),
            record_every=int(opt("scheme", "record_every", "1")),
            paths=int(need("ensemble", "paths")),
            seed=int(need("ensemble", "seed")),
            ic_kind=need("initial", "kind"),
        )
        if opt("model", "nu") is not None:
            kwargs["nu"] = _floats(opt("model", "nu"))
        if opt("model", "l_matrix") is not None:
            m = _floats(opt("model", "l_matrix"))
            if len(m) != 9:
                raise ConfigError("l_matrix needs 9 entries (row-major 3x3)")
            kwargs["L_matrix"] = (m[0:3], m[3:6], m[6:9])
        if opt("model", "l_offset") is not None:
            b = _floats(opt("model", "l_offset"))
            if len(b) != 3:
                raise ConfigError("l_offset needs 3 entries")
            kwargs["L_offset"] = b
        if opt("scheme", "cutoff") is not None:
            kwargs["scheme_cutoff"] = int(opt("scheme", "cutoff"))
        kind = kwargs["ic_kind"]
        if kind == "constant":
            kwargs["ic_value"] = _floats(need("initial", "value"))
        elif kind == "single_mode":
            kwargs["ic_mode"] = _ints(need("initial", "mode"))
            kwargs["ic_amplitude"] = float(need("initial", "amplitude"))
        elif kind == "random":
            kwargs["ic_max_mode"] = int(need("initial", "max_mode"))
            kwargs["ic_amplitude"] = float(need("initial", "amplitude"))
            kwargs["ic_seed"] = int(need("initial", "ic_seed"))
            kwargs["ic_decay"] = float(opt("initial", "decay", "0.0"))
        if opt("output", "directory") is not None:
            kwargs["out_dir"] = opt("output", "directory")
        if opt("llb", "epsilons") is not None:
            kwargs["llb_epsilons"] = _floats(opt("llb", "epsilons"))
        if opt("decay", "tol") is not None:
            kwargs["decay_tol"] = float(opt("decay", "tol"))
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    try:
        return ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config back to INI text (a runnable round-trip of the preset)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["domain"] = {"dim": str(cfg.dim),
                    "lengths": ", ".join(repr(x) for x in cfg.lengths),
                    "points": ", ".join(str(x) for x in cfg.points)}
    cp["basis"] = {"cutoff": ", ".join(str(x) for x in cfg.cutoff)}
    model = {"lambda_r": repr(cfg.lambda_r), "lambda_e": repr(cfg.lambda_e),
             "gamma": repr(cfg.gamma), "alpha": repr(cfg.alpha),
             "kappa1": repr(cfg.kappa1), "kappa2": repr(cfg.kappa2),
             "beta1": repr(cfg.beta1), "beta2": repr(cfg.beta2)}
    if cfg.nu is not None:
        model["nu"] = ", ".join(repr(x) for x in cfg.nu)
    if cfg.L_matrix is not None:
        model["l_matrix"] = ", ".join(repr(x) for row in cfg.L_matrix for x in row)
    if cfg.L_offset is not None:
        model["l_offset"] = ", ".join(repr(x) for x in cfg.L_offset)
    cp["model"] = model
    cp["noise"] = {"k": str(cfg.K), "r": repr(cfg.r),
                   "c_g": repr(cfg.c_g), "c_h": repr(cfg.c_h)}
    scheme = {"scheme": cfg.scheme, "dt": repr(cfg.dt), "t_final": repr(cfg.t_final),
              "record_every": str(cfg.record_every)}
    if cfg.scheme_cutoff is not None:
        scheme["cutoff"] = str(cfg.scheme_cutoff)
    cp["scheme"] = scheme
    cp["ensemble"] = {"paths": str(cfg.paths), "seed": str(cfg.seed)}
    initial = {"kind": cfg.ic_kind}
    if cfg.ic_kind == "constant":
        initial["value"] = ", ".join(repr(x) for x in cfg.ic_value)
    elif cfg.ic_kind == "single_mode":
        initial["mode"] = ", ".join(str(x) for x in cfg.ic_mode)
        initial["amplitude"] = repr(cfg.ic_amplitude)
    elif cfg.ic_kind == "random":
        initial["max_mode"] = str(cfg.ic_max_mode)
        initial["amplitude"] = repr(cfg.ic_amplitude)
        initial["ic_seed"] = str(cfg.ic_seed)
        initial["decay"] = repr(cfg.ic_decay)
    cp["initial"] = initial
    cp["llb"] = {"epsilons": ", ".join(repr(x) for x in cfg.llb_epsilons)}
    cp["decay"] = {"tol": repr(cfg.decay_tol)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- presets ------------------------------------------------------------------


def _decay_c_h(target_sigma_h2: float, points: int, cutoff: int, K: int, r: float) -> float:
    basis = build_basis(BoxDomain(1, (1.0,), (points,)), (cutoff,))
    fam = scale_to_sigma_h2(basis, K, r, target_sigma_h2)
    return fam.c_h


def presets() -> dict[str, ExperimentConfig]:
    """Named experiment configurations mirroring the studied regimes."""
    out = {}
    out["zero-fixed-point"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(64,), cutoff=(16,),
        lambda_r=1.0, lambda_e=0.5, gamma=1.0,
        K=0, scheme="exponential_euler", dt=1e-3, t_final=0.5, record_every=10,
        paths=1, seed=1, ic_kind="zero",
    )
    out["below-curie"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(96,), cutoff=(32,),
        lambda_r=1.0, lambda_e=0.5, gamma=1.0,
        alpha=1.0, kappa1=1.0, kappa2=1.0,
        K=8, r=2.0, c_g=0.05, c_h=0.3,
        scheme="exponential_euler", dt=1e-3, t_final=1.0, record_every=10,
        paths=4, seed=20240801,
        ic_kind="random", ic_max_mode=8, ic_amplitude=0.2, ic_seed=11, ic_decay=0.5,
    )
    out["deterministic-dissipation"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(160,), cutoff=(64,),
        lambda_r=1.0, lambda_e=0.5, gamma=1.0,
        alpha=1.0, kappa1=1.0, kappa2=1.0,
        K=0, scheme="exponential_euler", dt=1e-4, t_final=1.0, record_every=1,
        paths=1, seed=3,
        ic_kind="random", ic_max_mode=16, ic_amplitude=0.15, ic_seed=5, ic_decay=0.5,
    )
    # multiplicative noise scaled so lambda_r - gamma^2 sigma_h^2 / 2 = 0.8
    out["above-curie-decay"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(160,), cutoff=(64,),
        lambda_r=1.0, lambda_e=0.1, gamma=1.0,
        alpha=1.0, kappa1=-1.0, kappa2=1.0,
        K=16, r=2.0, c_g=0.0, c_h=_decay_c_h(0.4, 160, 64, 16, 2.0),
        scheme="exponential_euler", dt=1e-3, t_final=5.0, record_every=5,
        paths=100, seed=77,
        ic_kind="random", ic_max_mode=12, ic_amplitude=0.4, ic_seed=9, ic_decay=0.5,
        decay_tol=0.05,
    )
    out["llb-limit"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(96,), cutoff=(32,),
        lambda_r=1.0, lambda_e=1e-1, gamma=1.0,
        alpha=1.0, kappa1=-1.0, kappa2=1.0,
        K=8, r=2.0, c_g=0.02, c_h=0.2,
        scheme="exponential_euler", dt=2.5e-4, t_final=1.0, record_every=10,
        paths=32, seed=424242,
        ic_kind="random", ic_max_mode=8, ic_amplitude=0.3, ic_seed=21, ic_decay=0.5,
        llb_epsilons=(1e-1, 1e-2, 1e-3),
    )
    out["invariant-measure"] = ExperimentConfig(
        dim=1, lengths=(1.0,), points=(48,), cutoff=(16,),
        lambda_r=1.0, lambda_e=0.5, gamma=1.0,
        alpha=1.0, kappa1=1.0, kappa2=1.0,
        K=8, r=2.0, c_g=0.1, c_h=0.3,
        scheme="exponential_euler", dt=1e-3, t_final=200.0, record_every=20,
        paths=1, seed=1234,
        ic_kind="random", ic_max_mode=8, ic_amplitude=0.3, ic_seed=2, ic_decay=0.5,
    )
    return out


def get_preset(name: str) -> ExperimentConfig:
    table = presets()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(table))}")
    return table[name]


def with_overrides(cfg: ExperimentConfig, paths=None, seed=None, out_dir=None) -> ExperimentConfig:
    updates = {}
    if paths is not None:
        updates["paths"] = int(paths)
    if seed is not None:
        updates["seed"] = int(seed)
    if out_dir is not None:
        updates["out_dir"] = str(out_dir)
    return replace(cfg, **updates) if updates else cfg
