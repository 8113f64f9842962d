"""Closed-loop clock scenarios, temperature-unit views, sensitivity sweeps and
strategy comparisons.

Each cycle interleaves one D and one Q measurement.  The true detunings are

    delta_D/D0 = (D(T) - D0)/D0 + y,    delta_Q/Q0 = (Q(T) - Q0)/Q0 + y,

where ``y`` is the local-oscillator offset expressed as the correction the
clock should apply (``true_LO_offset``).  Quadratures are forward-modelled with
shot noise, detunings extracted by arctangent and combined according to the
feedback mode.  The estimator is open loop: the oscillator is not steered, so
``clock_error = frac_psi - true_LO_offset`` is the residual a perfect steering
loop would leave.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import clock_composer as cc
from . import pulse_engine as pe
from .errors import ConfigError, DomainError
from .noise_stats import AllanCurve, NoiseSpec, PsnParams, allan_deviation, generate_noise, make_rng, psn_fractional
from .spin_model import SpinConstants, fractional_shifts, transition_frequencies

__all__ = [
    "MODES",
    "ReadoutSettings",
    "ScenarioConfig",
    "ClockTimeSeries",
    "run_scenario",
    "temperature_in_units",
    "SweepResult",
    "sensitivity_sweep",
    "strategy_comparison",
    "scenario_from_dict",
    "readout_from_dict",
]

MODES = ("open_loop", "composite", "D_only", "Q_only", "thermometer_compensated")
SWEEP_PARAMETERS = ("temperature", "Bz", "tau_D", "tau_Q", "prep_fidelity", "pulse_area_scale")

# stream ids for the counter-based generator
_S_TEMP, _S_LO, _S_THERM, _S_PSN_D, _S_PSN_Q = 100, 200, 300, 400, 500


@dataclass(frozen=True)
class ReadoutSettings:
    """Readout of one target; ``tau=None`` picks the sensitivity optimum."""

    T2: float
    p: float = 1.0
    C: float = 0.03
    tau: float | None = None
    G: float = 1e4
    V0: float = 0.07
    t_A: float = 0.5e-6
    t_B: float = 1.5e-6
    N_green: float | None = None
    t_cycle: float = 2e-3

    @property
    def tau_eff(self):
        return self.tau if self.tau is not None else cc.optimal_tau(self.T2, self.p)

    def amplitude(self, S0=1.0):
        return 4.0 * S0 * self.C * math.exp(-((self.tau_eff / self.T2) ** self.p))

    def psn(self, f, t):
        return PsnParams(
            f=abs(f), tau=self.tau_eff, C=self.C, T2=self.T2, p=self.p, G=self.G, V0=self.V0,
            t_A=self.t_A, t_B=self.t_B, N_green=self.N_green, t_cycle=self.t_cycle, t=t,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    constants: SpinConstants = field(default_factory=SpinConstants)
    readout_D: ReadoutSettings = field(default_factory=lambda: ReadoutSettings(T2=1.68e-6))
    readout_Q: ReadoutSettings = field(default_factory=lambda: ReadoutSettings(T2=0.881e-3, V0=1.0))
    temperature_noise: tuple[NoiseSpec, ...] = ()
    lo_noise: tuple[NoiseSpec, ...] = ()
    thermometer_noise: tuple[NoiseSpec, ...] = ()
    t_cycle: float = 1.0
    n_cycles: int = 200_000
    mode: str = "composite"
    seed: int = 0
    T_mean: float = 297.0
    psn: bool = True
    unwrap: bool = False
    second_order: bool = False
    Bz: float = 475.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.t_cycle > 0:
            raise ConfigError("t_cycle must be positive")
        if self.n_cycles < 100:
            raise ConfigError("duration must be at least 100 cycles")

    @property
    def duration(self):
        return self.n_cycles * self.t_cycle

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class ClockTimeSeries:
    timestamps: np.ndarray
    frac_D: np.ndarray
    frac_Q: np.ndarray
    frac_psi: np.ndarray
    true_temperature: np.ndarray
    true_LO_offset: np.ndarray
    flagged: np.ndarray
    mode: str = "composite"

    @property
    def clock_error(self):
        return self.frac_psi - self.true_LO_offset

    def columns(self):
        return {
            "t_s": self.timestamps,
            "frac_D": self.frac_D,
            "frac_Q": self.frac_Q,
            "frac_psi": self.frac_psi,
            "true_temperature_K": self.true_temperature,
            "true_LO_offset": self.true_LO_offset,
            "clock_error": self.clock_error,
            "flagged": self.flagged.astype(int),
        }

    def allan(self, taus=None, which="clock_error") -> AllanCurve:
        return allan_deviation(self.columns()[which], self.timestamps[1] - self.timestamps[0], taus)


def _sum_noise(specs, n, dt, seed, base_stream):
    total = np.zeros(n)
    for i, s in enumerate(specs):
        total += generate_noise(replace(s, seed=seed, dt=dt, stream=base_stream + i), n)
    return total


def _extract(frac_true, f0, rd: ReadoutSettings, sigma_frac, rng, unwrap):
    """Forward-model TTZFS-8 quadratures and extract the fractional detuning."""
    tau = rd.tau_eff
    A = rd.amplitude()
    Sx, Sy = cc.forward_quadratures(frac_true * f0, tau, A)
    if sigma_frac > 0:
        sq = A * 2.0 * math.pi * tau * sigma_frac * abs(f0)
        noise = rng.standard_normal((2, frac_true.size)) * sq
        Sx = Sx + noise[0]
        Sy = Sy + noise[1]
    df, flagged = cc.detunings_from_series(Sx, Sy, tau, unwrap=unwrap)
    return df / f0, flagged


def _combine(frac_D, frac_Q, c, alpha=None, second_order=False):
    if alpha is None:
        if second_order:
            return cc.composite_correction_2nd(frac_Q, frac_D, c)
        return cc.composite_correction(frac_Q, frac_D, c)
    return alpha * frac_Q + (1.0 - alpha) * frac_D


def run_scenario(cfg: ScenarioConfig) -> ClockTimeSeries:
    """Simulate ``cfg.n_cycles`` interleaved D/Q cycles; bit-reproducible given the seed."""
    c = cfg.constants
    n = cfg.n_cycles
    dt = cfg.t_cycle
    t = np.arange(n) * dt
    T = cfg.T_mean + _sum_noise(cfg.temperature_noise, n, dt, cfg.seed, _S_TEMP)
    lo, hi = 70.0, 400.0
    if np.any(T < lo) or np.any(T > hi):
        raise DomainError("temperature trajectory leaves the model range [70, 400] K")
    y = _sum_noise(cfg.lo_noise, n, dt, cfg.seed, _S_LO)
    fD_T, fQ_T = fractional_shifts(c, T)
    fD_true = fD_T + y
    fQ_true = fQ_T + y
    sig_D = psn_fractional(cfg.readout_D.psn(c.D0, dt)) if cfg.psn else 0.0
    sig_Q = psn_fractional(cfg.readout_Q.psn(c.Q0, dt)) if cfg.psn else 0.0
    frac_D, flag_D = _extract(fD_true, c.D0, cfg.readout_D, sig_D, make_rng(cfg.seed, _S_PSN_D), cfg.unwrap)
    frac_Q, flag_Q = _extract(fQ_true, c.Q0, cfg.readout_Q, sig_Q, make_rng(cfg.seed, _S_PSN_Q), cfg.unwrap)

    mode = cfg.mode
    if mode == "open_loop":
        psi = np.zeros(n)
    elif mode == "composite":
        psi = _combine(frac_D, frac_Q, c, second_order=cfg.second_order)
    elif mode == "D_only":
        psi = _combine(frac_D, frac_Q, c, alpha=0.0)
    elif mode == "Q_only":
        psi = _combine(frac_D, frac_Q, c, alpha=1.0)
    else:
        dT_ext = (T - c.T0) + _sum_noise(cfg.thermometer_noise, n, dt, cfg.seed, _S_THERM)
        psi = cc.compensate_with_thermometer(frac_D * c.D0, dT_ext, c) / c.D0
    return ClockTimeSeries(t, frac_D, frac_Q, np.asarray(psi, dtype=float), T, y, flag_D | flag_Q, mode)


def temperature_in_units(series: ClockTimeSeries, c: SpinConstants):
    """``(frac_D/lambda_D, frac_Q/lambda_Q)`` in kelvin."""
    return series.frac_D / c.lambda_D, series.frac_Q / c.lambda_Q


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: np.ndarray
    frac_D: np.ndarray
    frac_Q: np.ndarray
    frac_psi: np.ndarray
    slope: dict
    curvature: dict
    method: dict
    flags: dict

    def columns(self):
        return {"value": self.values, "frac_D": self.frac_D, "frac_Q": self.frac_Q, "frac_psi": self.frac_psi}


def _ttzfs8_frac(seq: pe.TTZFSSequence, tau, f0, fwhm=0.0, n_nodes=16):
    """Detuning read back from simulated TTZFS-8 quadratures, as a fraction of ``f0``."""
    taus = np.array([tau])
    x = pe.scan_signal(seq, taus, pe.TTZFS8, fwhm=fwhm, n_nodes=n_nodes)
    yq = pe.scan_signal(seq, taus, pe.TTZFS8.quadrature(), fwhm=fwhm, n_nodes=n_nodes)
    if abs(x[0]) < 1e-14 and abs(yq[0]) < 1e-14:
        return float("nan")
    return math.atan2(-yq[0], -x[0]) / (2.0 * math.pi * tau) / f0


def _sweep_point(cfg: ScenarioConfig, parameter, v, ref_fD, ref_fQ, probe_frac):
    c = cfg.constants
    if parameter == "temperature":
        return fractional_shifts(c, v)
    if parameter == "Bz":
        fq = transition_frequencies(c, v, cfg.T_mean)
        return (fq.d_half_sum - ref_fD) / ref_fD, (fq.q_half_sum - ref_fQ) / abs(c.Q0)
    # pulse-level parameters: recover a fixed probe detuning through TTZFS-8
    tau_D, tau_Q = cfg.readout_D.tau_eff, cfg.readout_Q.tau_eff
    scale, prep = 1.0, 1.0
    if parameter == "tau_D":
        tau_D = v
    elif parameter == "tau_Q":
        tau_Q = v
    elif parameter == "prep_fidelity":
        prep = v
    else:
        scale = v
    areas = [a * scale for a in pe.IDEAL_AREAS]
    dD = probe_frac * c.D0
    dQ = probe_frac * abs(c.Q0)
    seq_D = pe.TTZFSSequence.from_areas(dD, dD, areas)
    seq_Q = pe.TTZFSSequence.from_areas(dQ, dQ, areas, prep_fidelity=prep)
    fD = _ttzfs8_frac(seq_D, tau_D, c.D0) - probe_frac
    fQ = _ttzfs8_frac(seq_Q, tau_Q, abs(c.Q0)) - probe_frac
    return fD, fQ


def sensitivity_sweep(cfg: ScenarioConfig, parameter: str, grid, probe_frac: float = 1e-6, linear_threshold: float = 1e-3) -> SweepResult:
    """Noise-free shifts of the three targets across ``grid`` of ``parameter``.

    Units of the grid: K, G, s, fraction, area scale.  ``slope`` is the central
    finite difference at the grid centre (fractional per unit).  When the
    linear term is small compared with the quadratic one over the grid the
    quadratic coefficient is used instead (``method`` = "quadratic").  Flags
    mark flat ("no_signal") and non-monotonic responses.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or not np.all(np.diff(grid) > 0):
        raise ConfigError("sweep grid needs >= 3 strictly increasing values")
    c = cfg.constants
    ref_fD = ref_fQ = None
    if parameter == "Bz":
        fq = transition_frequencies(c, float(grid[grid.size // 2]), cfg.T_mean)
        ref_fD, ref_fQ = fq.d_half_sum, fq.q_half_sum
    rows = [_sweep_point(cfg, parameter, float(v), ref_fD, ref_fQ, probe_frac) for v in grid]
    fD = np.array([r[0] for r in rows])
    fQ = np.array([r[1] for r in rows])
    fpsi = _combine(fD, fQ, c)
    slope, curv, method, flags = {}, {}, {}, {}
    mid = grid.size // 2
    lo, hi = max(mid - 1, 0), min(mid + 1, grid.size - 1)
    half = 0.5 * (grid[-1] - grid[0])
    for name, vals in (("D", fD), ("Q", fQ), ("psi", fpsi)):
        f = []
        if not np.all(np.isfinite(vals)):
            flags[name] = ["no_signal"]
            slope[name] = curv[name] = float("nan")
            method[name] = "none"
            continue
        s = float((vals[hi] - vals[lo]) / (grid[hi] - grid[lo]))
        q2, q1, _ = np.polyfit(grid - grid[mid], vals, 2)
        slope[name], curv[name] = s, float(q2)
        span = float(np.ptp(vals))
        scale_ref = max(float(np.max(np.abs(vals))), 1e-300)
        if span <= 1e-13 * max(scale_ref, 1.0) or span == 0.0:
            f.append("no_signal")
        d = np.diff(vals)
        if not f and np.any(d > 0) and np.any(d < 0):
            f.append("non_monotonic")
        quad_dominant = abs(q1) * half < linear_threshold * abs(q2) * half * half
        method[name] = "quadratic" if quad_dominant and q2 != 0 else "linear"
        flags[name] = f
    return SweepResult(parameter, grid, fD, fQ, fpsi, slope, curv, method, flags)


def strategy_comparison(cfg: ScenarioConfig, stabilization_factor=0.01, cryo_factor=15.0, thermometer_noise=None,
                        taus=None, workers: int | None = None):
    """Allan curves of the clock error for the competing temperature strategies.

    All variants share ``cfg.seed`` and therefore the same noise realisations.
    Returns ``{name: (ClockTimeSeries, AllanCurve)}``.
    """
    therm = tuple(thermometer_noise) if thermometer_noise is not None else cfg.thermometer_noise
    c = cfg.constants
    variants = {
        "uncompensated": cfg.with_(mode="D_only"),
        "thermometer_compensated": cfg.with_(mode="thermometer_compensated", thermometer_noise=therm),
        "cryogenic": cfg.with_(mode="D_only", constants=c.with_(lambda_D=c.lambda_D / cryo_factor,
                                                                 lambda_D2=c.lambda_D2 / cryo_factor)),
        "stabilized": cfg.with_(
            mode="D_only",
            temperature_noise=tuple(replace(s, magnitude=s.magnitude * stabilization_factor) for s in cfg.temperature_noise),
        ),
        "composite": cfg.with_(mode="composite"),
    }

    def job(item):
        name, v = item
        ts = run_scenario(v)
        return name, ts, ts.allan(taus)

    items = list(variants.items())
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, items))
    else:
        results = [job(it) for it in items]
    return {name: (ts, curve) for name, ts, curve in results}


def readout_from_dict(d: dict) -> ReadoutSettings:
    try:
        return ReadoutSettings(**{k: (None if v is None else float(v)) for k, v in d.items()})
    except TypeError as exc:
        raise ConfigError(f"bad readout block: {exc}") from exc


def noise_list(items) -> tuple[NoiseSpec, ...]:
    out = []
    for it in items or ():
        try:
            out.append(NoiseSpec(kind=it["kind"], magnitude=float(it["magnitude"]),
                                 period=float(it.get("period", 86400.0)), phase=float(it.get("phase", 0.0))))
        except (KeyError, TypeError, ValueError, DomainError) as exc:
            raise ConfigError(f"bad noise spec {it!r}: {exc}") from exc
    return tuple(out)


def scenario_from_dict(cfg: dict, mode: str | None = None, seed: int | None = None) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a merged config mapping."""
    sc = cfg.get("scenario", {})
    try:
        return ScenarioConfig(
            constants=SpinConstants.from_dict(cfg.get("constants") or {}),
            readout_D=readout_from_dict(cfg["readout"]["D"]),
            readout_Q=readout_from_dict(cfg["readout"]["Q"]),
            temperature_noise=noise_list(sc.get("temperature_noise")),
            lo_noise=noise_list(sc.get("lo_noise")),
            thermometer_noise=noise_list(sc.get("thermometer_noise")),
            t_cycle=float(sc.get("t_cycle", 1.0)),
            n_cycles=int(sc.get("n_cycles", 200_000)),
            mode=mode or sc.get("mode", "composite"),
            seed=int(seed if seed is not None else cfg.get("seed", 0)),
            T_mean=float(sc.get("T_mean", 297.0)),
            psn=bool(sc.get("psn", True)),
            unwrap=bool(sc.get("unwrap", False)),
            second_order=bool(sc.get("second_order", False)),
            Bz=float(cfg.get("field_G", 475.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad scenario block: {exc}") from exc
