"""Three-level dynamics of the two-tone pi/2 - 2pi - pi/2 (TTZFS) sequence.

The three levels are ordered ``(|1>, |0>, |-1>)``: ``|1>`` is coupled to ``|0>``
by the pump tone (frequency ``freq_p``, f+ or f1), ``|-1>`` by the Stokes tone
(``freq_s``, f- or f2).  The system starts in ``|0>``.

Pulses are instantaneous rotations described by their area; pulse phases and
detunings enter only through the diagonal free-evolution operators between
pulses.  ``freq_p``/``freq_s`` are the frequencies at which the two coherences
accumulate phase during free evolution: small detunings in the rotating frame,
or the full transition frequencies for a time-translated tau scan.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
from scipy.linalg import expm

from .errors import DomainError

__all__ = [
    "PulseSpec",
    "PhaseRow",
    "PhaseCycleScheme",
    "TTZFS8",
    "SINGLE",
    "TTZFSSequence",
    "FringeScan",
    "Spectrum",
    "propagator_pulse",
    "propagator_numeric",
    "free_evolution",
    "is_unitary",
    "ttzfs_signal",
    "ttzfs8_signal",
    "ensemble_average",
    "gaussian_nodes",
    "scan_signal",
    "scan_and_spectrum",
    "amplitude_spectrum",
    "unwanted_frequencies",
    "suppression_db",
    "PHASE_TERMS",
    "phase_term_oracle",
    "sequence_angle_function",
]

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi
IDEAL_AREAS = (HALF_PI, TWO_PI, HALF_PI)
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def propagator_pulse(area: float) -> np.ndarray:
    """Closed-form propagator of a resonant two-tone pulse with equal Rabi frequencies.

    ``area`` is the bright-state area ``sqrt(2) * Omega0 * T``.
    """
    if not np.isfinite(area):
        raise DomainError(f"pulse area must be finite, got {area}")
    c = math.cos(0.5 * area)
    s = -1j * math.sin(0.5 * area) / math.sqrt(2.0)
    return np.array(
        [
            [0.5 * (c + 1.0), s, 0.5 * (c - 1.0)],
            [s, c, s],
            [0.5 * (c - 1.0), s, 0.5 * (c + 1.0)],
        ],
        dtype=complex,
    )


def propagator_numeric(
    omega_p: float,
    omega_s: float,
    duration: float,
    detuning_single: float = 0.0,
    detuning_two_photon: float = 0.0,
) -> np.ndarray:
    """Propagator of a rectangular two-tone pulse by matrix exponentiation.

    Rabi frequencies and detunings are angular (rad/s).  Covers the cases the
    closed form does not: unequal tones and detuned pulses.
    """
    H = 0.5 * np.array(
        [
            [0.0, omega_p, 0.0],
            [omega_p, 2.0 * detuning_single, omega_s],
            [0.0, omega_s, 2.0 * detuning_two_photon],
        ],
        dtype=complex,
    )
    return expm(-1j * H * duration)


def free_evolution(phi_p: float, phi_s: float) -> np.ndarray:
    """Diagonal free-evolution operator ``diag(1, e^{-i phi_p}, e^{-i (phi_p - phi_s)})``."""
    return np.diag([1.0, np.exp(-1j * phi_p), np.exp(-1j * (phi_p - phi_s))])


def is_unitary(U: np.ndarray, tol: float = 1e-12) -> bool:
    U = np.asarray(U)
    return float(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0])))) <= tol


@dataclass(frozen=True)
class PulseSpec:
    """One two-tone pulse.

    ``rabi`` (Hz, pump-tone Rabi frequency) and ``rabi_ratio`` (Stokes/pump) are
    only used when the numeric propagator is needed, i.e. for detuned pulses
    or unequal tones.  Detunings are in Hz.
    """

    area: float
    phase_p: float = 0.0
    phase_s: float = 0.0
    detuning_single: float = 0.0
    detuning_two_photon: float = 0.0
    rabi: float | None = None
    rabi_ratio: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.area):
            raise DomainError("pulse area must be finite")

    @property
    def needs_numeric(self):
        return self.detuning_single != 0.0 or self.detuning_two_photon != 0.0 or self.rabi_ratio != 1.0

    def propagator(self, scale: float = 1.0) -> np.ndarray:
        area = self.area * scale
        if not self.needs_numeric:
            return propagator_pulse(area)
        if not self.rabi:
            raise DomainError("detuned or unequal-tone pulses need an explicit rabi frequency")
        omega = TWO_PI * self.rabi * scale
        duration = self.area / (math.sqrt(2.0) * TWO_PI * self.rabi)
        return propagator_numeric(
            omega,
            omega * self.rabi_ratio,
            duration,
            TWO_PI * self.detuning_single,
            TWO_PI * self.detuning_two_photon,
        )


@dataclass(frozen=True)
class PhaseRow:
    phase_p2: float
    phase_s2: float
    phase_p3: float
    phase_s3: float
    weight: float


@dataclass(frozen=True)
class PhaseCycleScheme:
    rows: tuple[PhaseRow, ...]
    name: str = "custom"

    def __post_init__(self):
        if not self.rows:
            raise DomainError("phase-cycle scheme needs at least one row")

    @property
    def weight_sum(self):
        return math.fsum(r.weight for r in self.rows)

    def shifted(self, echo: float, final: float, name: str | None = None) -> "PhaseCycleScheme":
        """Add ``echo`` to both tones of the 2pi pulse and ``final`` to both tones of the last pulse."""
        rows = tuple(
            PhaseRow(r.phase_p2 + echo, r.phase_s2 + echo, r.phase_p3 + final, r.phase_s3 + final, r.weight)
            for r in self.rows
        )
        return PhaseCycleScheme(rows, name or f"{self.name}+shift")

    def quadrature(self) -> "PhaseCycleScheme":
        """Variant whose fringe is shifted by 90 degrees (cos -> sin)."""
        return self.shifted(0.25 * math.pi, HALF_PI, f"{self.name}-y")

    def scaled(self, factor: float) -> "PhaseCycleScheme":
        rows = tuple(replace(r, weight=r.weight * factor) for r in self.rows)
        return PhaseCycleScheme(rows, self.name)

    def to_list(self):
        return [[r.phase_p2, r.phase_s2, r.phase_p3, r.phase_s3, r.weight] for r in self.rows]

    @classmethod
    def from_list(cls, rows, name="custom"):
        try:
            return cls(tuple(PhaseRow(*map(float, r)) for r in rows), name)
        except (TypeError, ValueError) as exc:
            raise DomainError(f"bad phase-cycle row: {exc}") from exc


_P = math.pi
TTZFS8 = PhaseCycleScheme(
    (
        PhaseRow(0.0, 0.0, 0.0, 0.0, 1 / 8),
        PhaseRow(0.0, _P, 0.0, 0.0, -1 / 8),
        PhaseRow(_P, 0.0, 0.0, 0.0, -1 / 8),
        PhaseRow(_P, _P, 0.0, 0.0, 1 / 8),
        PhaseRow(_P / 2, _P / 2, _P, _P, -1 / 8),
        PhaseRow(_P / 2, -_P / 2, _P, _P, 1 / 8),
        PhaseRow(-_P / 2, _P / 2, _P, _P, 1 / 8),
        PhaseRow(-_P / 2, -_P / 2, _P, _P, -1 / 8),
    ),
    "ttzfs8",
)
SINGLE = PhaseCycleScheme((PhaseRow(0.0, 0.0, 0.0, 0.0, 1.0),), "single")


@dataclass(frozen=True)
class TTZFSSequence:
    """A pi/2 - 2pi - pi/2 two-tone sequence and its readout map.

    ``pulses`` hold areas and phases of the three pulses.  The measured signal
    is ``offset + contrast * P0`` where ``P0`` is the final ``|0>`` population,
    averaged over the initial-state mixture ``prep_fidelity |0><0| +
    (1 - prep_fidelity) |1><1|``.
    """

    freq_p: float
    freq_s: float
    pulses: tuple[PulseSpec, PulseSpec, PulseSpec] = field(
        default_factory=lambda: tuple(PulseSpec(a) for a in IDEAL_AREAS)
    )
    prep_fidelity: float = 1.0
    contrast: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if len(self.pulses) != 3:
            raise DomainError("a TTZFS sequence has exactly three pulses")
        if not 0.0 <= self.prep_fidelity <= 1.0:
            raise DomainError("prep_fidelity must lie in [0, 1]")

    @classmethod
    def from_areas(cls, freq_p, freq_s, areas=IDEAL_AREAS, **kw):
        return cls(freq_p, freq_s, tuple(PulseSpec(float(a)) for a in areas), **kw)

    @property
    def areas(self):
        return tuple(p.area for p in self.pulses)

    @property
    def wanted_frequency(self):
        return 0.5 * (self.freq_p + self.freq_s)

    def with_areas(self, areas):
        return replace(self, pulses=tuple(replace(p, area=float(a)) for p, a in zip(self.pulses, areas)))

    def with_phases(self, p2, s2, p3, s3):
        p1, pu2, pu3 = self.pulses
        return replace(
            self,
            pulses=(p1, replace(pu2, phase_p=p2, phase_s=s2), replace(pu3, phase_p=p3, phase_s=s3)),
        )


def _diag_phases(phi_p, phi_s):
    phi_p = np.asarray(phi_p, dtype=float)
    phi_s = np.asarray(phi_s, dtype=float)
    one = np.ones(np.broadcast(phi_p, phi_s).shape)
    return np.stack([one, np.exp(-1j * phi_p) * one, np.exp(-1j * (phi_p - phi_s)) * one], axis=-1)


def _final_populations(Us, phi_p12, phi_s12, phi_p23, phi_s23, init):
    """Populations after U3 . D2 . U2 . D1 . U1 acting on ``init`` (broadcast over phases)."""
    U1, U2, U3 = Us
    psi = U1 @ init
    psi = psi * _diag_phases(phi_p12, phi_s12)
    psi = psi @ U2.T
    psi = psi * _diag_phases(phi_p23, phi_s23)
    psi = psi @ U3.T
    return np.abs(psi) ** 2


_KET0 = np.array([0.0, 1.0, 0.0], dtype=complex)
_KET1 = np.array([1.0, 0.0, 0.0], dtype=complex)


def _p0_from_angles(seq, a, b, p2, s2, p3, s3, scale=1.0, Us=None):
    """|0> population with free-evolution angles ``a = w_p tau/2``, ``b = w_s tau/2``."""
    if Us is None:
        Us = tuple(p.propagator(scale) for p in seq.pulses)
    p1 = seq.pulses[0]
    phi_p12 = a + p1.phase_p - p2
    phi_s12 = b + p1.phase_s - s2
    phi_p23 = a + p2 - p3
    phi_s23 = b + s2 - s3
    pop = _final_populations(Us, phi_p12, phi_s12, phi_p23, phi_s23, _KET0)[..., 1]
    if seq.prep_fidelity < 1.0:
        pop1 = _final_populations(Us, phi_p12, phi_s12, phi_p23, phi_s23, _KET1)[..., 1]
        pop = seq.prep_fidelity * pop + (1.0 - seq.prep_fidelity) * pop1
    return pop


def ttzfs_signal(seq: TTZFSSequence, tau, scale: float = 1.0):
    """Readout signal of one TTZFS sequence at total free-evolution time(s) ``tau`` (s).

    ``scale`` multiplies every pulse area (Rabi-frequency inhomogeneity).
    """
    tau = np.asarray(tau, dtype=float)
    a = math.pi * seq.freq_p * tau
    b = math.pi * seq.freq_s * tau
    _, pu2, pu3 = seq.pulses
    p0 = _p0_from_angles(seq, a, b, pu2.phase_p, pu2.phase_s, pu3.phase_p, pu3.phase_s, scale)
    return seq.offset + seq.contrast * p0


def ttzfs8_signal(seq: TTZFSSequence, tau, scheme: PhaseCycleScheme = TTZFS8, scale: float = 1.0):
    """Weighted sum of the sequence run with every phase configuration of ``scheme``.

    Row phases are added to the phases already carried by ``seq``.
    """
    tau = np.asarray(tau, dtype=float)
    a = math.pi * seq.freq_p * tau
    b = math.pi * seq.freq_s * tau
    Us = tuple(p.propagator(scale) for p in seq.pulses)
    _, pu2, pu3 = seq.pulses
    total = np.zeros(np.shape(tau))
    for r in scheme.rows:
        p0 = _p0_from_angles(
            seq,
            a,
            b,
            pu2.phase_p + r.phase_p2,
            pu2.phase_s + r.phase_s2,
            pu3.phase_p + r.phase_p3,
            pu3.phase_s + r.phase_s3,
            Us=Us,
        )
        total = total + r.weight * (seq.offset + seq.contrast * p0)
    return total


def gaussian_nodes(fwhm: float, n_nodes: int = 64, center: float = 1.0):
    """Gauss-Hermite nodes and weights for a Gaussian of given FWHM about ``center``.

    Returns ``(values, weights)`` with weights summing to one.
    """
    if n_nodes < 1:
        raise DomainError("n_nodes must be >= 1")
    if fwhm < 0:
        raise DomainError("fwhm must be >= 0")
    if fwhm == 0.0:
        return np.array([center]), np.array([1.0])
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    sigma = fwhm * _FWHM_TO_SIGMA
    return center + math.sqrt(2.0) * sigma * x, w / math.sqrt(math.pi)


def ensemble_average(signal_fn, fwhm: float, n_nodes: int = 64, center: float = 1.0, workers: int | None = None):
    """Average ``signal_fn(scale)`` over a Gaussian distribution of Rabi scale factors.

    Deterministic quadrature: nodes may be evaluated concurrently but are summed
    in node order, so the result does not depend on ``workers``.
    """
    values, weights = gaussian_nodes(fwhm, n_nodes, center)
    if fwhm == 0.0:
        return np.asarray(signal_fn(center), dtype=float)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(signal_fn, values))
    else:
        results = [signal_fn(v) for v in values]
    total = weights[0] * np.asarray(results[0], dtype=float)
    for w, r in zip(weights[1:], results[1:]):
        total = total + w * np.asarray(r, dtype=float)
    return total


_GRID = 5  # signals are trigonometric polynomials of degree <= 2 in each angle


def _ab_coefficients(seq, scheme, scale):
    """Fourier coefficients ``c[ka, kb]`` of the (cycled) signal in the angles a, b."""
    g = TWO_PI * np.arange(_GRID) / _GRID
    a, b = np.meshgrid(g, g, indexing="ij")
    _, pu2, pu3 = seq.pulses
    Us = tuple(p.propagator(scale) for p in seq.pulses)
    vals = np.zeros(a.shape)
    for r in scheme.rows:
        p0 = _p0_from_angles(
            seq, a, b,
            pu2.phase_p + r.phase_p2, pu2.phase_s + r.phase_s2,
            pu3.phase_p + r.phase_p3, pu3.phase_s + r.phase_s3,
            Us=Us,
        )
        vals += r.weight * (seq.offset + seq.contrast * p0)
    return np.fft.fft2(vals) / vals.size


def scan_signal(
    seq: TTZFSSequence,
    taus,
    scheme: PhaseCycleScheme = SINGLE,
    fwhm: float = 0.0,
    n_nodes: int = 64,
    perfect_echo: bool = False,
    workers: int | None = None,
):
    """Signal of a tau scan, optionally phase-cycled and averaged over Rabi inhomogeneity.

    The signal is a degree-2 trigonometric polynomial in ``pi*freq_p*tau`` and
    ``pi*freq_s*tau``; its 25 coefficients are averaged over the distribution
    and then synthesised on the tau grid.  ``perfect_echo`` keeps the middle
    pulse at exactly its nominal area while the outer pulses are scaled.
    """
    taus = np.asarray(taus, dtype=float)

    def coeffs(scale):
        s = seq
        if perfect_echo:
            p1, p2, p3 = seq.pulses
            s = replace(seq, pulses=(replace(p1, area=p1.area * scale), p2, replace(p3, area=p3.area * scale)))
            scale = 1.0
        c = _ab_coefficients(s, scheme, scale)
        return np.concatenate([c.real.ravel(), c.imag.ravel()])

    flat = ensemble_average(coeffs, fwhm, n_nodes, workers=workers)
    n = _GRID * _GRID
    c = (flat[:n] + 1j * flat[n:]).reshape(_GRID, _GRID)
    k = np.fft.fftfreq(_GRID, d=1.0 / _GRID).astype(int)
    out = np.zeros(taus.shape)
    for i, ka in enumerate(k):
        for j, kb in enumerate(k):
            if abs(c[i, j]) == 0.0:
                continue
            nu = 0.5 * (ka * seq.freq_p + kb * seq.freq_s)
            out += (c[i, j] * np.exp(1j * TWO_PI * nu * taus)).real
    return out


@dataclass(frozen=True)
class FringeScan:
    """A tau scan: strictly increasing ``taus`` (s) with matching ``signals``."""

    taus: np.ndarray
    signals: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        sig = np.asarray(self.signals, dtype=float)
        if taus.shape != sig.shape or taus.ndim != 1:
            raise DomainError("taus and signals must be 1-D arrays of equal length")
        if taus.size > 1 and not np.all(np.diff(taus) > 0):
            raise DomainError("taus must be strictly increasing")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "signals", sig)


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    amplitude: np.ndarray

    @property
    def resolution(self):
        return float(self.freqs[1] - self.freqs[0])

    def peak(self, freq: float, halfwidth_bins: int = 2) -> float:
        """Largest amplitude within ``halfwidth_bins`` of ``freq``."""
        i = int(round(freq / self.resolution))
        lo = max(i - halfwidth_bins, 0)
        hi = min(i + halfwidth_bins + 1, self.freqs.size)
        if lo >= hi:
            raise DomainError(f"{freq} Hz lies outside the spectrum")
        return float(np.max(self.amplitude[lo:hi]))


def amplitude_spectrum(taus, signal, window: str = "hann", zero_pad: int = 1) -> Spectrum:
    """Single-sided amplitude spectrum of the mean-removed signal on a uniform tau grid.

    Normalised so an on-bin sinusoid of amplitude A produces a peak of A.
    """
    taus = np.asarray(taus, dtype=float)
    x = np.asarray(signal, dtype=float)
    if taus.ndim != 1 or taus.size < 4 or taus.shape != x.shape:
        raise DomainError("need matching 1-D tau and signal arrays with >= 4 points")
    steps = np.diff(taus)
    dt = steps.mean()
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise DomainError("tau grid must be uniform")
    if window == "hann":
        w = np.hanning(x.size)
    elif window in ("rect", "rectangular", "none"):
        w = np.ones(x.size)
    else:
        raise DomainError(f"unknown window {window!r}")
    if zero_pad < 1:
        raise DomainError("zero_pad must be >= 1")
    n = x.size * int(zero_pad)
    X = np.fft.rfft((x - x.mean()) * w, n=n)
    amp = np.abs(X) / w.sum()
    amp[1:] *= 2.0
    if n % 2 == 0:
        amp[-1] *= 0.5
    return Spectrum(np.fft.rfftfreq(n, d=dt), amp)


def scan_and_spectrum(scan: FringeScan, window: str = "hann", zero_pad: int = 1) -> Spectrum:
    return amplitude_spectrum(scan.taus, scan.signals, window, zero_pad)


def unwanted_frequencies(freq_p: float, freq_s: float) -> dict[str, float]:
    """The eight extra tau-frequencies produced by pulse-area errors."""
    fp, fs = freq_p, freq_s
    return {
        "fp/2": 0.5 * fp,
        "fs/2": 0.5 * fs,
        "fp": fp,
        "fs": fs,
        "(fp-fs)/2": 0.5 * abs(fp - fs),
        "fs-fp/2": abs(fs - 0.5 * fp),
        "fp-fs/2": abs(fp - 0.5 * fs),
        "fp-fs": abs(fp - fs),
    }


def suppression_db(spectrum: Spectrum, wanted: float, unwanted: dict[str, float], halfwidth_bins: int = 2):
    """Peak level at each unwanted frequency relative to the wanted peak, in dB."""
    ref = spectrum.peak(wanted, halfwidth_bins)
    tiny = np.finfo(float).tiny
    return {k: 20.0 * math.log10(max(spectrum.peak(f, halfwidth_bins), tiny) / ref) for k, f in unwanted.items()}


# Phase combinations as integer coefficients over
# (w_p tau/2, w_s tau/2, phi_p2, phi_s2, phi_p3, phi_s3).
PHASE_TERMS = {
    "alpha1": (1, 1, -1, 1, 0, -1),
    "alpha2": (1, 1, 1, -1, -1, 0),
    "alpha3": (0, 0, -2, 2, 1, -1),
    "alpha4": (1, 0, -1, 0, 0, 0),
    "alpha5": (1, 0, 1, 0, -1, 0),
    "alpha6": (0, 1, 0, -1, 0, 0),
    "alpha7": (0, 1, 0, 1, 0, -1),
    "alpha8": (2, 0, 0, 0, -1, 0),
    "alpha9": (0, 0, -2, 0, 1, 0),
    "alpha10": (1, -1, -1, 1, 0, 0),
    "alpha11": (1, -1, -1, -1, 0, 1),
    "alpha12": (1, -1, 1, 1, -1, 0),
    "alpha13": (1, -1, 1, -1, -1, 1),
    "alpha14": (0, 2, 0, 0, 0, -1),
    "alpha15": (0, 0, 0, -2, 0, 1),
    "alpha16": (0, 1, 2, -1, -1, 0),
    "alpha17": (-1, 2, 1, 0, 0, -1),
    "alpha18": (-1, 2, -1, 0, 1, -1),
    "alpha19": (2, -1, 0, 1, -1, 0),
    "alpha20": (2, -1, 0, -1, -1, 1),
    "alpha21": (0, 1, -2, 1, 1, -1),
    "alpha22": (1, 0, -1, 2, 0, -1),
    "alpha23": (1, 0, 1, -2, -1, 1),
    "alpha24": (2, -2, 0, 0, -1, 1),
}
IDEAL_TERMS = ("alpha1", "alpha2", "alpha3")


def _canonical(k):
    k = tuple(int(v) for v in k)
    neg = tuple(-v for v in k)
    return max(k, neg)


_TERM_LOOKUP = {_canonical(v): name for name, v in PHASE_TERMS.items()}


def sequence_angle_function(seq: TTZFSSequence, scheme: PhaseCycleScheme | None = None, scale: float = 1.0):
    """Signal as a function of the six angles used by :func:`phase_term_oracle`.

    With a ``scheme`` the row phases are added to the supplied base phases and
    the rows are summed with their weights.
    """
    Us = tuple(p.propagator(scale) for p in seq.pulses)
    rows = scheme.rows if scheme is not None else (PhaseRow(0.0, 0.0, 0.0, 0.0, 1.0),)

    def fn(a, b, p2, s2, p3, s3):
        total = 0.0
        for r in rows:
            p0 = _p0_from_angles(
                seq, a, b, p2 + r.phase_p2, s2 + r.phase_s2, p3 + r.phase_p3, s3 + r.phase_s3, Us=Us
            )
            total = total + r.weight * (seq.offset + seq.contrast * p0)
        return total

    return fn


@dataclass(frozen=True)
class DetectedTerm:
    name: str
    vector: tuple[int, ...]
    amplitude: float
    level_db: float


@dataclass(frozen=True)
class OracleResult:
    terms: tuple[DetectedTerm, ...]
    dc: float
    residual: float
    inconclusive: bool

    @property
    def names(self):
        return {t.name for t in self.terms}

    def level(self, name):
        for t in self.terms:
            if t.name == name:
                return t.level_db
        return -math.inf


def phase_term_oracle(fn, threshold_db: float = -120.0, grid: int = 5, residual_tol: float = 1e-9, seed: int = 0):
    """Decompose ``fn(a, b, p2, s2, p3, s3)`` into terms ``A_j cos(alpha_j)``.

    The six angles are sampled on a ``grid**6`` lattice and Fourier transformed;
    the result is exact for trigonometric polynomials of degree < grid/2.  Terms
    whose amplitude is above ``threshold_db`` relative to the strongest
    non-constant term are reported, named after the matching row of
    :data:`PHASE_TERMS` or ``"unlisted"``.  A reconstruction check at random
    off-lattice points sets ``inconclusive`` when the residual exceeds
    ``residual_tol``.
    """
    g = TWO_PI * np.arange(grid) / grid
    mesh = np.meshgrid(*([g] * 6), indexing="ij")
    vals = np.asarray(fn(*mesh), dtype=float)
    F = np.fft.fftn(vals) / vals.size
    kk = np.fft.fftfreq(grid, d=1.0 / grid).astype(int)

    coeffs = {}
    for idx in product(range(grid), repeat=6):
        c = F[idx]
        if c == 0:
            continue
        k = tuple(int(kk[i]) for i in idx)
        coeffs[k] = c
    dc = float(coeffs.pop((0,) * 6, 0.0).real)
    merged = {}
    for k, c in coeffs.items():
        ck = _canonical(k)
        if ck == k:
            merged[ck] = merged.get(ck, 0.0) + 2.0 * abs(c)
    amps = {k: a for k, a in merged.items()}
    ref = max(amps.values(), default=0.0)
    terms = []
    if ref > 0.0:
        for k, a in sorted(amps.items(), key=lambda kv: -kv[1]):
            level = 20.0 * math.log10(a / ref) if a > 0 else -math.inf
            if level < threshold_db:
                continue
            terms.append(DetectedTerm(_TERM_LOOKUP.get(k, "unlisted"), k, a, level))

    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, TWO_PI, size=(6, 64))
    direct = np.asarray(fn(*pts), dtype=float)
    recon = np.full(pts.shape[1], dc, dtype=complex)
    for k, c in coeffs.items():
        recon += c * np.exp(1j * np.tensordot(np.array(k, dtype=float), pts, axes=1))
    scale = max(np.max(np.abs(direct)), 1.0)
    residual = float(np.max(np.abs(recon.real - direct)) / scale)
    return OracleResult(tuple(terms), dc, residual, residual > residual_tol)
