"""Noise generation, photon-shot-noise model, Allan deviation and fringe fitting."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import hilbert

from .errors import ConvergenceError, DomainError
from .spin_model import SpinConstants

__all__ = [
    "make_rng",
    "NoiseSpec",
    "generate_noise",
    "AllanCurve",
    "octave_taus",
    "allan_deviation",
    "PsnParams",
    "psn_fractional",
    "psn_factors",
    "psn_composite",
    "psn_monte_carlo",
    "FringeFit",
    "fringe_model",
    "fit_fringe",
]

E_CHARGE = 1.602176634e-19
NOISE_KINDS = ("white", "random_walk", "linear_drift", "sinusoidal")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``; streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class NoiseSpec:
    """One noise process sampled every ``dt`` seconds.

    ``magnitude`` is the per-sample standard deviation (white), the per-step
    standard deviation (random_walk), the rate per second (linear_drift) or the
    amplitude (sinusoidal).
    """

    kind: str
    magnitude: float
    seed: int = 0
    dt: float = 1.0
    period: float = 86400.0
    phase: float = 0.0
    stream: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not (math.isfinite(self.magnitude) and self.magnitude >= 0):
            raise DomainError("magnitude must be finite and >= 0")
        if self.kind == "sinusoidal" and not self.period > 0:
            raise DomainError("period must be positive")


def generate_noise(spec: NoiseSpec, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError("n must be >= 1")
    t = np.arange(n) * spec.dt
    if spec.kind == "linear_drift":
        return spec.magnitude * t
    if spec.kind == "sinusoidal":
        return spec.magnitude * np.sin(2.0 * np.pi * t / spec.period + spec.phase)
    rng = make_rng(spec.seed, spec.stream)
    w = rng.standard_normal(n) * spec.magnitude
    if spec.kind == "white":
        return w
    return np.cumsum(w)


@dataclass(frozen=True)
class AllanCurve:
    taus: np.ndarray
    sigmas: np.ndarray
    n_samples: np.ndarray

    def at(self, tau):
        """Log-log interpolation of the curve."""
        return float(np.exp(np.interp(np.log(tau), np.log(self.taus), np.log(np.maximum(self.sigmas, 1e-300)))))


def octave_taus(n: int, dt: float, max_fraction: float = 1.0 / 3.0):
    """Octave-spaced averaging times up to ``max_fraction`` of the record."""
    m_max = max(1, int(n * max_fraction))
    ms = 2 ** np.arange(int(math.log2(m_max)) + 1)
    return ms * dt


def allan_deviation(series, dt: float, taus=None) -> AllanCurve:
    """Overlapping Allan deviation of fractional-frequency samples spaced ``dt``.

    With phase ``x_k = dt * sum(y[:k])`` and ``m = tau/dt``::

        sigma^2(tau) = sum_i (x_{i+2m} - 2 x_{i+m} + x_i)^2 / (2 tau^2 (N - 2m))

    Averaging times longer than a third of the record are dropped with a warning.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 3:
        raise DomainError("need a 1-D series of at least 3 samples")
    if not dt > 0:
        raise DomainError("dt must be positive")
    if taus is None:
        taus = octave_taus(y.size, dt)
    x = np.concatenate([[0.0], np.cumsum(y - y[0])]) * dt
    N = x.size
    out_t, out_s, out_n = [], [], []
    dropped = []
    for tau in np.atleast_1d(np.asarray(taus, dtype=float)):
        m = int(round(tau / dt))
        if m < 1 or 3 * m > y.size:
            dropped.append(float(tau))
            continue
        d = x[2 * m:] - 2.0 * x[m:-m] + x[: N - 2 * m]
        t = m * dt
        out_t.append(t)
        out_s.append(math.sqrt(float(np.dot(d, d)) / (2.0 * t * t * d.size)))
        out_n.append(d.size)
    if dropped:
        warnings.warn(f"averaging times {dropped} are too long for the series and were omitted", stacklevel=2)
    return AllanCurve(np.array(out_t), np.array(out_s), np.array(out_n, dtype=int))


@dataclass(frozen=True)
class PsnParams:
    """Readout parameters of one target.

    ``N_green=None`` means a balanced detector with equal red and green photon
    numbers.  ``t_B`` and ``N_green`` may be ``inf``.
    """

    f: float
    tau: float
    C: float
    T2: float
    p: float = 1.0
    G: float = 1e4
    V0: float = 0.07
    t_A: float = 0.5e-6
    t_B: float = 1.5e-6
    N_green: float | None = None
    t_cycle: float = 2e-3
    t: float = 1.0

    def __post_init__(self):
        for name in ("f", "tau", "T2", "p", "G", "V0", "t_A", "t_B", "t_cycle", "t"):
            v = getattr(self, name)
            if not v > 0:
                raise DomainError(f"{name} must be positive, got {v}")
        if not 0 < self.C <= 2:
            raise DomainError("contrast C must lie in (0, 2]")
        if self.N_green is not None and not self.N_green > 0:
            raise DomainError("N_green must be positive")

    @property
    def N_red(self):
        return self.V0 * self.t_A / (self.G * E_CHARGE)

    @property
    def n_green(self):
        return self.N_red if self.N_green is None else self.N_green

    def with_(self, **kw):
        return replace(self, **kw)


def psn_factors(p: PsnParams) -> dict[str, float]:
    """The six multiplicative factors of the fractional shot-noise limit."""
    return {
        "phase": 1.0 / (2.0 * math.pi * p.f * p.tau),
        "contrast": 1.0 / (0.5 * p.C * math.exp(-((p.tau / p.T2) ** p.p))),
        "counts": 1.0 / math.sqrt(p.N_red),
        "window": math.sqrt(1.0 + p.t_A / p.t_B),
        "balanced": math.sqrt(1.0 + p.N_red / p.n_green),
        "averaging": math.sqrt(p.t_cycle / p.t),
    }


def psn_fractional(p: PsnParams) -> float:
    return math.prod(psn_factors(p).values())


def psn_composite(psn_D: float, psn_Q: float, c: SpinConstants) -> float:
    a = c.lambda_D / (c.lambda_D - c.lambda_Q)
    return math.hypot(psn_Q * a, psn_D * (1.0 - a))


def psn_monte_carlo(p: PsnParams, n_trials: int = 10_000, seed: int = 0, stream: int = 7):
    """Photon-counting simulation of a single windowed balanced readout.

    Each window collects Poisson red counts (state dependent in the front
    window) and Poisson green counts; the balanced detector subtracts the
    scaled green current and the known offset is restored in the denominator.
    The readout sits at the mid-fringe operating point, and each trial is
    converted to a frequency by the local fringe slope.  Returns
    ``(std of fractional frequency scaled to averaging time t, standard error)``.
    """
    rng = make_rng(seed, stream)
    red_rate = p.N_red / p.t_A
    green_rate = p.n_green / p.t_A
    amp = 0.5 * p.C * math.exp(-((p.tau / p.T2) ** p.p))
    # mid-fringe: m = amp * cos(pi/2 + 2 pi df tau) with df = 0
    m = amp * math.cos(0.5 * math.pi)

    def window(t, mod):
        red = rng.poisson(red_rate * t * (1.0 + mod), n_trials)
        green = rng.poisson(green_rate * t, n_trials) if math.isfinite(green_rate) else None
        if green is None:
            return red.astype(float)
        return red - (red_rate / green_rate) * green + red_rate * t

    XA = window(p.t_A, m)
    if math.isfinite(p.t_B):
        XB = window(p.t_B, 0.0)
        S = (XA / p.t_A) / (XB / p.t_B) - 1.0
    else:
        S = XA / (red_rate * p.t_A) - 1.0
    slope = -amp * 2.0 * math.pi * p.tau  # dS/d(df) at the operating point
    df = (S - m) / slope
    sigma = float(np.std(df / p.f, ddof=1)) * math.sqrt(p.t_cycle / p.t)
    se = sigma / math.sqrt(2.0 * (n_trials - 1))
    return sigma, se


def fringe_model(tau, S0, S1, T2, p, f, phi):
    tau = np.asarray(tau, dtype=float)
    return S0 + S1 * np.exp(-((tau / T2) ** p)) * np.cos(2.0 * np.pi * f * tau + phi)


@dataclass(frozen=True)
class FringeFit:
    S0: float
    S1: float
    T2: float
    p: float
    f: float
    phi: float
    residual_norm: float = 0.0
    stderr: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "S0": self.S0, "S1": self.S1, "T2": self.T2, "p": self.p, "f": self.f, "phi": self.phi,
            "residual_norm": self.residual_norm,
            **{f"stderr_{k}": v for k, v in self.stderr.items()},
        }


_P_BOUNDS = (0.5 + 1e-9, 3.0)
_NAMES = ("S0", "S1", "T2", "p", "f", "phi")


def _peak_frequency(tau, y):
    dt = tau[1] - tau[0]
    n = 16 * y.size
    w = np.hanning(y.size)
    spec = np.abs(np.fft.rfft((y - y.mean()) * w, n=n))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    if 0 < k < spec.size - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        den = a - 2 * b + c
        k = k + (0.5 * (a - c) / den if den != 0 else 0.0)
    return k / (n * dt)


def _envelope_guess(tau, y):
    """(S1, T2, p) from a log fit of the analytic-signal envelope."""
    env = np.abs(hilbert(y - y.mean()))
    n = env.size
    k = max(3, n // 50)
    env = np.convolve(env, np.ones(k) / k, mode="same")
    lo, hi = k, n - k
    S1 = float(env[lo:lo + k].mean()) if hi > lo else float(env.max())
    T2, p = (tau[-1] - tau[0]) / 2.0, 1.0
    if S1 > 0 and hi - lo > 4:
        r = env[lo:hi] / S1
        sel = (r > 0.1) & (r < 0.9) & (tau[lo:hi] > 0)
        if np.count_nonzero(sel) >= 4:
            xs = np.log(tau[lo:hi][sel])
            ys = np.log(-np.log(r[sel]))
            slope, icpt = np.polyfit(xs, ys, 1)
            if np.isfinite(slope) and slope > 0:
                p = float(np.clip(slope, 0.6, 2.9))
                T2 = float(np.exp(-icpt / slope))
    return S1, T2, p


def fit_fringe(scan, f_prior: float | None = None, p_starts=(1.0, 1.5, 2.0)) -> FringeFit:
    """Least-squares fit of ``S0 + S1 exp(-(tau/T2)^p) cos(2 pi f tau + phi)``.

    ``scan`` is a :class:`~nvclock.pulse_engine.FringeScan` or a ``(taus,
    signals)`` pair on a uniform grid.  The frequency is initialised from the
    spectral peak (or ``f_prior``), the decay from the envelope.  ``S1`` is
    reported positive and ``phi`` wrapped to (-pi, pi].
    """
    tau, y = (scan.taus, scan.signals) if hasattr(scan, "taus") else scan
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if tau.size < 8 or tau.shape != y.shape:
        raise DomainError("need at least 8 matching samples")
    if not np.all(np.isfinite(y)):
        raise DomainError("signals must be finite")
    if np.ptp(y) == 0:
        raise DomainError("signal is constant; there is no fringe to fit")
    span = tau[-1] - tau[0]
    f0 = float(f_prior) if f_prior is not None else _peak_frequency(tau, y)
    if f_prior is None and abs(f0) * span < 8:
        raise DomainError(f"only {abs(f0) * span:.2g} periods sampled; need 8 or an explicit frequency prior")
    S1g, T2g, pg = _envelope_guess(tau, y)
    scale = float(np.std(y)) or 1.0
    init = {"f": f0, "S1": S1g, "T2": T2g, "p": pg}

    def residual(x):
        S0, S1, lT2, p, f, phi = x
        return (fringe_model(tau, S0, S1, math.exp(lT2), p, f, phi) - y) / scale

    best = None
    starts = [pg] + [p for p in p_starts if abs(p - pg) > 0.05]
    for p_init in starts:
        env = np.exp(-((tau / T2g) ** p_init))
        A = np.column_stack([np.ones_like(tau), env * np.cos(2 * np.pi * f0 * tau), -env * np.sin(2 * np.pi * f0 * tau)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        S1i = math.hypot(coef[1], coef[2]) or S1g or scale
        phii = math.atan2(coef[2], coef[1])
        x0 = [coef[0], S1i, math.log(T2g), float(np.clip(p_init, *_P_BOUNDS)), f0, phii]
        df = 0.5 / span
        lb = [-np.inf, 0.0, math.log(T2g) - 10, _P_BOUNDS[0], f0 - df, -np.inf]
        ub = [np.inf, np.inf, math.log(T2g) + 10, _P_BOUNDS[1], f0 + df, np.inf]
        try:
            res = least_squares(residual, x0, bounds=(lb, ub), method="trf", x_scale="jac", max_nfev=4000)
        except (ValueError, FloatingPointError):
            continue
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise ConvergenceError("fringe fit did not converge", {"initial": init})
    S0, S1, lT2, p, f, phi = best.x
    if S1 < 0:
        S1, phi = -S1, phi + math.pi
    phi = math.pi - (math.pi - phi) % (2 * math.pi)
    T2 = math.exp(lT2)
    stderr = {}
    try:
        J = best.jac * scale
        dof = max(1, y.size - 6)
        s2 = float(np.sum((best.fun * scale) ** 2)) / dof
        cov = np.linalg.inv(J.T @ J) * s2
        se = np.sqrt(np.abs(np.diag(cov)))
        stderr = dict(zip(_NAMES, se))
        stderr["T2"] = T2 * stderr["T2"]
    except np.linalg.LinAlgError:
        pass
    if not (T2 > 0 and np.isfinite(T2)):
        raise ConvergenceError("fringe fit produced a non-physical T2", {"initial": init, "x": best.x.tolist()})
    return FringeFit(
        float(S0), float(S1), float(T2), float(p), float(f), float(phi),
        residual_norm=float(np.linalg.norm(best.fun * scale)),
        stderr=stderr,
        initial=init,
    )
