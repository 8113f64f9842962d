"""Composite-clock algebra: detuning extraction, temperature-insensitive
combinations, temperature estimation, thermometer compensation and the
instability budget.

Fractional detunings ``frac_dD = delta_D/D`` and ``frac_dQ = delta_Q/Q`` are
dimensionless; temperatures are in kelvin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DomainError
from .spin_model import SpinConstants

__all__ = [
    "DetuningPair",
    "QuadratureReadout",
    "WindowedReadout",
    "BudgetEntry",
    "normalized_readout",
    "forward_quadratures",
    "detuning_from_quadratures",
    "detunings_from_series",
    "alpha_from_lambdas",
    "normalization_constant",
    "composite_correction",
    "composite_correction_temperature_units",
    "composite_correction_2nd",
    "temperature_estimate",
    "compensate_with_thermometer",
    "feedback_shift",
    "optimal_tau",
    "BudgetRow",
    "DEFAULT_BUDGET",
    "budget_table",
    "budget_totals",
    "budget_rows_from_records",
]


@dataclass(frozen=True)
class DetuningPair:
    delta_D: float
    delta_Q: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta_D) and math.isfinite(self.delta_Q)):
            raise DomainError("detunings must be finite")


@dataclass(frozen=True)
class QuadratureReadout:
    """In-phase/quadrature TTZFS-8 signals for one target ("D" or "Q")."""

    Sx: float
    Sy: float
    tau: float
    target: str = "D"

    def __post_init__(self):
        if self.target not in ("D", "Q"):
            raise DomainError(f"target must be 'D' or 'Q', got {self.target!r}")
        if not self.tau > 0:
            raise DomainError("tau must be positive")


@dataclass(frozen=True)
class WindowedReadout:
    """Front/back window voltages of one optical readout."""

    V_A: float
    V_B: float
    t_A: float
    t_B: float
    offset: float = 0.0

    def __post_init__(self):
        if not (self.t_A > 0 and self.t_B > 0):
            raise DomainError("window durations must be positive")


def normalized_readout(w: WindowedReadout) -> float:
    """``(V_A - V_B)/(V_B + offset)``; the balanced-detection offset only enters the denominator."""
    den = w.V_B + w.offset
    if den == 0:
        raise DomainError("V_B + offset is zero")
    return (w.V_A - w.V_B) / den


def forward_quadratures(delta_f, tau, amplitude=1.0):
    """Ideal TTZFS-8 quadratures ``amplitude * (cos, sin)(2 pi delta_f tau)``.

    ``amplitude`` stands for ``4 S0 C exp(-(tau/T2)^p)``; it cancels in the
    detuning extraction.
    """
    ph = 2.0 * np.pi * np.asarray(delta_f, dtype=float) * tau
    return amplitude * np.cos(ph), amplitude * np.sin(ph)


def detuning_from_quadratures(q: QuadratureReadout) -> float:
    """Principal-branch detuning ``atan2(Sy, Sx)/(2 pi tau)`` in Hz."""
    if q.Sx == 0 and q.Sy == 0:
        raise DomainError("quadratures (0, 0) carry no phase information")
    return math.atan2(q.Sy, q.Sx) / (2.0 * math.pi * q.tau)


def detunings_from_series(Sx, Sy, tau, unwrap=False, margin=0.25 * math.pi):
    """Vectorised extraction for a time series.

    Returns ``(delta_f, flagged)``.  Without unwrapping, samples whose phase is
    within ``margin`` of the branch cut at +-pi are flagged.  With unwrapping
    the phase is made continuous (steps larger than pi/2 between consecutive
    samples are flagged as ambiguous).
    """
    Sx = np.asarray(Sx, dtype=float)
    Sy = np.asarray(Sy, dtype=float)
    zero = (Sx == 0) & (Sy == 0)
    phase = np.arctan2(Sy, Sx)
    if unwrap:
        phase = np.unwrap(phase)
        jumps = np.zeros(phase.shape, dtype=bool)
        if phase.size > 1:
            jumps[1:] = np.abs(np.diff(phase)) > 0.5 * math.pi
        flagged = jumps | zero
    else:
        flagged = (np.abs(phase) > math.pi - margin) | zero
    return phase / (2.0 * math.pi * tau), flagged


def alpha_from_lambdas(c: SpinConstants) -> float:
    """Weight ``lambda_D/(lambda_D - lambda_Q)`` of the Q detuning in the composite."""
    if c.lambda_D == c.lambda_Q:
        raise ConfigError("lambda_D == lambda_Q: alpha would approach infinity, no composite exists")
    return c.lambda_D / (c.lambda_D - c.lambda_Q)


def normalization_constant(c: SpinConstants) -> float:
    """``1/(1/lambda_Q - 1/lambda_D)`` in 1/K."""
    return 1.0 / (1.0 / c.lambda_Q - 1.0 / c.lambda_D)


def composite_correction(frac_dQ, frac_dD, c: SpinConstants):
    """First-order temperature-insensitive fractional correction ``alpha dQ/Q + (1-alpha) dD/D``."""
    a = alpha_from_lambdas(c)
    return np.asarray(frac_dQ) * a + np.asarray(frac_dD) * (1.0 - a)


def composite_correction_temperature_units(frac_dQ, frac_dD, c: SpinConstants):
    """Same quantity written as a temperature-unit difference times the normalisation constant."""
    return (np.asarray(frac_dQ) / c.lambda_Q - np.asarray(frac_dD) / c.lambda_D) * normalization_constant(c)


def composite_correction_2nd(frac_dQ, frac_dD, c: SpinConstants):
    """Composite correction with the second-order temperature term removed."""
    diff = np.asarray(frac_dD) - np.asarray(frac_dQ)
    k = 0.5 * (c.lambda_D2 * c.lambda_Q - c.lambda_D * c.lambda_Q2) / (c.lambda_D - c.lambda_Q) ** 3
    return composite_correction(frac_dQ, frac_dD, c) + k * diff * diff


def temperature_estimate(frac_dD, frac_dQ, c: SpinConstants):
    """First-order temperature excursion (K); blind to common fractional shifts."""
    return (np.asarray(frac_dD) - np.asarray(frac_dQ)) / (c.lambda_D - c.lambda_Q)


def compensate_with_thermometer(delta_D, delta_T_ext, c: SpinConstants, D: float | None = None):
    """``delta_D - lambda_D * D * delta_T_ext`` (Hz)."""
    D = c.D0 if D is None else D
    return np.asarray(delta_D) - c.lambda_D * D * np.asarray(delta_T_ext)


def feedback_shift(readout_Q: QuadratureReadout, readout_D: QuadratureReadout, c: SpinConstants, psi: float, D=None, Q=None):
    """Corrective shift (Hz) to apply to an oscillator at ``psi``."""
    if readout_Q.target != "Q" or readout_D.target != "D":
        raise DomainError("feedback_shift expects a Q readout and a D readout")
    D = c.D0 if D is None else D
    Q = c.Q0 if Q is None else Q
    a = alpha_from_lambdas(c)
    dQ = detuning_from_quadratures(readout_Q) * readout_Q.tau * 2.0 * math.pi
    dD = detuning_from_quadratures(readout_D) * readout_D.tau * 2.0 * math.pi
    return psi * (
        a / (2.0 * math.pi * Q * readout_Q.tau) * dQ
        + (1.0 - a) / (2.0 * math.pi * D * readout_D.tau) * dD
    )


def optimal_tau(T2: float, p: float = 1.0, n_grid: int = 20001) -> float:
    """Free-evolution time maximising ``tau * exp(-(tau/T2)^p)`` on a grid up to 4 T2."""
    if not (T2 > 0 and p > 0):
        raise DomainError("T2 and p must be positive")
    tau = np.linspace(0.0, 4.0 * T2, n_grid)[1:]
    return float(tau[np.argmax(tau * np.exp(-((tau / T2) ** p)))])


@dataclass(frozen=True)
class BudgetRow:
    """One input line of an instability budget.

    ``instability`` is in ``unit``; sensitivities are fractional per ``unit``
    for the targets D, Q and psi.  Values are kept as exact fractions.
    """

    parameter: str
    instability: Fraction
    unit: str
    sens_D: Fraction
    sens_Q: Fraction
    sens_psi: Fraction
    upper_bound_psi: bool = False


@dataclass(frozen=True)
class BudgetEntry:
    parameter: str
    target: str
    instability: Fraction
    unit: str
    sensitivity: Fraction
    contribution: Fraction
    upper_bound: bool = False


def _F(x):
    return Fraction(str(x)) if not isinstance(x, Fraction) else x


_PPB = Fraction(1, 10**9)
_PPM = Fraction(1, 10**6)

# Instabilities over 200 s and measured sensitivities.  Native units: mK, mG,
# dB, mW.  The Bx instability is 0.5 mG.
DEFAULT_BUDGET = (
    BudgetRow("temperature", Fraction(10), "mK", 25 * _PPB, Fraction("7.2") * _PPB, Fraction("0.5") * _PPB, True),
    BudgetRow("Bz", Fraction("0.05"), "mG", Fraction("1.6") * _PPB, Fraction("0.6") * _PPB, Fraction("1.2") * _PPB),
    BudgetRow("Bx", Fraction("0.5"), "mG", Fraction("0.38") * _PPB, Fraction("0.64") * _PPB, Fraction("0.72") * _PPB),
    BudgetRow("rf_power", Fraction("0.001"), "dB", Fraction("0.4") * _PPM, Fraction("1.4") * _PPM, Fraction("2.0") * _PPM),
    BudgetRow("laser_power", Fraction("0.02"), "mW", 110 * _PPB, 22 * _PPB, 22 * _PPB),
)


def budget_table(rows=DEFAULT_BUDGET) -> list[BudgetEntry]:
    """Multiply instability by sensitivity for each parameter and target."""
    rows = list(rows)
    if not rows:
        raise ConfigError("budget needs at least one row")
    out = []
    for r in rows:
        vals = (r.instability, r.sens_D, r.sens_Q, r.sens_psi)
        if any(v is None for v in vals):
            raise ConfigError(f"budget row {r.parameter!r} is missing a value")
        inst = _F(r.instability)
        for target, s in (("D", r.sens_D), ("Q", r.sens_Q), ("psi", r.sens_psi)):
            s = _F(s)
            out.append(
                BudgetEntry(r.parameter, target, inst, r.unit, s, abs(s * inst), target == "psi" and r.upper_bound_psi)
            )
    return out


def budget_totals(entries) -> dict[str, float]:
    """Root-sum-square of contributions per target, as floats."""
    acc = {}
    for e in entries:
        acc[e.target] = acc.get(e.target, Fraction(0)) + e.contribution**2
    return {k: math.sqrt(v) for k, v in acc.items()}


def budget_rows_from_records(records) -> list[BudgetRow]:
    """Build rows from dicts with keys parameter, instability, unit, sens_D, sens_Q, sens_psi."""
    rows = []
    for rec in records:
        try:
            rows.append(
                BudgetRow(
                    str(rec["parameter"]),
                    _F(rec["instability"]),
                    str(rec.get("unit", "")),
                    _F(rec["sens_D"]),
                    _F(rec["sens_Q"]),
                    _F(rec["sens_psi"]),
                    str(rec.get("upper_bound_psi", "false")).lower() in ("1", "true", "yes"),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"budget record missing {exc}") from exc
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad budget value: {exc}") from exc
    return rows
