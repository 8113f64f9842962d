"""NV ground-state spin Hamiltonian, transition frequencies and temperature model.

Units are Hz for frequencies, gauss for fields and kelvin for temperature.
Basis ordering of the 9x9 Hamiltonian is ``|m_s, m_I>`` with ``m_s`` in
(+1, 0, -1) as the outer index and ``m_I`` in (+1, 0, -1) as the inner index,
so ``index = 3*(1 - m_s) + (1 - m_I)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, DomainError, NearGSLACError

__all__ = [
    "SpinConstants",
    "FrequencyQuartet",
    "ApproxFrequencies",
    "build_hamiltonian",
    "transition_frequencies",
    "approx_frequencies",
    "temperature_model",
    "fractional_shifts",
    "basis_index",
]

FIELD_LIMIT_G = 2000.0
T_RANGE_K = (70.0, 400.0)
# Labels are trusted only when the assigned eigenvector keeps this much weight
# on its bare state.
MIN_LABEL_OVERLAP = 0.9


@dataclass(frozen=True)
class SpinConstants:
    """Physical parameters of the NV/14N ground-state Hamiltonian.

    Frequencies in Hz, gyromagnetic ratios in Hz/G, ``lambda_*`` are fractional
    temperature coefficients in 1/K and ``lambda_*2`` second derivatives in
    1/K^2 (both normalised by the value at ``T0``).
    """

    D0: float = 2870.3e6
    Q0: float = -4945.9e3
    gamma_e: float = 2.8024e6
    gamma_n: float = 0.3077e3
    A_par: float = -2.16e6
    A_perp: float = -2.70e6
    T0: float = 297.0
    lambda_D: float = -25.3e-6
    lambda_Q: float = -7.17e-6
    # lambda_D2/lambda_D - lambda_Q2/lambda_Q = -800 ppm/K
    lambda_D2: float = 2.024e-8
    lambda_Q2: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ConfigError(f"constant {f.name} must be finite, got {v!r}")
        if self.D0 <= 0:
            raise ConfigError("D0 must be positive")
        if self.Q0 >= 0:
            raise ConfigError("Q0 must be negative (sign convention Q = -4945.9 kHz)")
        if self.lambda_D == self.lambda_Q:
            raise ConfigError("lambda_D == lambda_Q: no temperature-insensitive combination exists")

    @property
    def second_order_combination(self):
        """``lambda_D2/lambda_D - lambda_Q2/lambda_Q`` in 1/K."""
        return self.lambda_D2 / self.lambda_D - self.lambda_Q2 / self.lambda_Q

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown constants: {sorted(unknown)}")
        try:
            return cls(**{k: float(v) for k, v in data.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad constants block: {exc}") from exc

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class FrequencyQuartet:
    """Electron (f_plus, f_minus) and nuclear (f1, f2) transition frequencies in Hz."""

    f_plus: float
    f_minus: float
    f1: float
    f2: float

    @property
    def d_half_sum(self):
        return 0.5 * (self.f_plus + self.f_minus)

    @property
    def q_half_sum(self):
        return 0.5 * (self.f1 + self.f2)


@dataclass(frozen=True)
class ApproxFrequencies(FrequencyQuartet):
    """Perturbative frequencies plus the published closed-form half-sums.

    ``d_half_sum_closed`` and ``q_half_sum_closed`` are the closed forms for the
    half-sums; the ``d_half_sum``/``q_half_sum`` properties inherited from
    :class:`FrequencyQuartet` average the individual perturbative lines.
    """

    q_half_sum_closed: float = 0.0
    d_half_sum_closed: float = 0.0


def _check_domain(Bz, T):
    if not np.isfinite(Bz) or abs(Bz) >= FIELD_LIMIT_G:
        raise DomainError(f"|Bz| must be < {FIELD_LIMIT_G} G, got {Bz}")
    lo, hi = T_RANGE_K
    if not np.isfinite(T) or not lo <= T <= hi:
        raise DomainError(f"T must lie in [{lo}, {hi}] K, got {T}")


def fractional_shifts(c: SpinConstants, T):
    """Return ``((D(T)-D0)/D0, (Q(T)-Q0)/Q0)`` without forming ``D - D0``.

    Evaluating the polynomial directly avoids the cancellation that limits
    ``(D - D0)/D0`` to about 1e-16 absolute.  ``T`` may be a scalar or an array.
    """
    lo, hi = T_RANGE_K
    Ta = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(Ta)) or np.any(Ta < lo) or np.any(Ta > hi):
        raise DomainError(f"T must lie in [{lo}, {hi}] K")
    dT = (Ta - c.T0) if Ta.ndim else float(Ta) - c.T0
    return c.lambda_D * dT + 0.5 * c.lambda_D2 * dT * dT, c.lambda_Q * dT + 0.5 * c.lambda_Q2 * dT * dT


def temperature_model(c: SpinConstants, T: float) -> tuple[float, float]:
    """Return ``(D(T), Q(T))`` from the quadratic fractional temperature model.

    ``T`` may be a scalar or an array.
    """
    fD, fQ = fractional_shifts(c, T)
    return c.D0 * (1.0 + fD), c.Q0 * (1.0 + fQ)


_SZ = np.diag([1.0, 0.0, -1.0])
_SP = np.sqrt(2.0) * np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
_SM = _SP.T
_I3 = np.eye(3)
_M_VALUES = (1, 0, -1)


def basis_index(m_s: int, m_I: int) -> int:
    """Position of ``|m_s, m_I>`` in the 9-dimensional basis."""
    if m_s not in _M_VALUES or m_I not in _M_VALUES:
        raise ValueError(f"invalid quantum numbers ({m_s}, {m_I})")
    return 3 * (1 - m_s) + (1 - m_I)


def build_hamiltonian(c: SpinConstants, Bz: float, T: float) -> np.ndarray:
    """Ground-state Hamiltonian (Hz) for an axial field ``Bz`` at temperature ``T``."""
    _check_domain(Bz, T)
    D, Q = temperature_model(c, T)
    H = (
        D * np.kron(_SZ @ _SZ, _I3)
        + Q * np.kron(_I3, _SZ @ _SZ)
        + c.gamma_e * Bz * np.kron(_SZ, _I3)
        - c.gamma_n * Bz * np.kron(_I3, _SZ)
        + c.A_par * np.kron(_SZ, _SZ)
        + 0.5 * c.A_perp * (np.kron(_SP, _SM) + np.kron(_SM, _SP))
    )
    return H


def _labelled_energies(c, Bz, T):
    """Eigenvalues of H keyed by bare-state label ``(m_s, m_I)`` plus label overlaps.

    H conserves m_s + m_I, so each block is diagonalised separately and its
    eigenvectors are matched to bare states by maximum overlap.  Exact ties
    (the |+1,-1>/|-1,+1> pair at zero field) are broken by the bare-energy
    ordering in the limit Bz -> 0+.
    """
    H = build_hamiltonian(c, Bz, T)
    labels = [(ms, mi) for ms in _M_VALUES for mi in _M_VALUES]
    B_order = Bz if Bz != 0.0 else 1e-6
    H_order = build_hamiltonian(c, B_order, T)
    energies, overlaps = {}, {}
    for M in (2, 1, 0, -1, -2):
        block = [lab for lab in labels if lab[0] + lab[1] == M]
        idx = [basis_index(*lab) for lab in block]
        w, v = np.linalg.eigh(H[np.ix_(idx, idx)])
        ov = np.abs(v) ** 2  # ov[bare, eigen]
        bare_rank = np.argsort(np.argsort(np.diag(H_order)[idx]))
        eig_rank = np.arange(len(idx))
        cost = -ov + 1e-6 * np.abs(bare_rank[:, None] - eig_rank[None, :])
        rows, cols = linear_sum_assignment(cost)
        for r, k in zip(rows, cols):
            energies[block[r]] = w[k]
            overlaps[block[r]] = ov[r, k]
    return energies, overlaps


def _zero_field_tie(c, Bz):
    # Below this field the |+1,-1>/|-1,+1> splitting is comparable to their
    # second-order hyperfine coupling through |0,0>.
    return abs(c.gamma_e * Bz) < 100.0 * c.A_perp**2 / c.D0


def transition_frequencies(c: SpinConstants, Bz: float, T: float) -> FrequencyQuartet:
    """Exact transition frequencies from diagonalising :func:`build_hamiltonian`.

    f+ = E|+1,+1> - E|0,+1>, f- = |E|0,+1> - E|-1,+1>|,
    f1 = |E|0,0> - E|0,+1>|, f2 = |E|0,-1> - E|0,0>|.
    Raises :class:`NearGSLACError` when any of the involved states cannot be
    labelled unambiguously.
    """
    E, ov = _labelled_energies(c, Bz, T)
    needed = [(1, 1), (0, 1), (-1, 1), (0, 0), (0, -1)]
    tie = _zero_field_tie(c, Bz)
    for lab in needed:
        if tie and lab == (-1, 1):
            continue
        if ov[lab] < MIN_LABEL_OVERLAP:
            raise NearGSLACError(
                f"state |{lab[0]:+d},{lab[1]:+d}> has overlap {ov[lab]:.3f} with its bare "
                f"label at Bz={Bz} G; too close to a level anticrossing"
            )
    return FrequencyQuartet(
        f_plus=abs(E[(1, 1)] - E[(0, 1)]),
        f_minus=abs(E[(0, 1)] - E[(-1, 1)]),
        f1=abs(E[(0, 0)] - E[(0, 1)]),
        f2=abs(E[(0, -1)] - E[(0, 0)]),
    )


def approx_frequencies(c: SpinConstants, Bz: float, T: float) -> ApproxFrequencies:
    """First-order perturbative frequencies in ``A_perp/(D +- gamma_e*B)``.

    Rejects fields within ``10*|A_perp|`` of the anticrossing where the
    expansion breaks down.
    """
    _check_domain(Bz, T)
    D, Q = temperature_model(c, T)
    gB = c.gamma_e * Bz
    nB = c.gamma_n * Bz
    A2 = c.A_perp**2
    if abs(D - abs(gB)) < 10.0 * abs(c.A_perp):
        raise NearGSLACError(
            f"D - gamma_e|B| = {D - abs(gB):.4g} Hz is within 10*|A_perp| of the anticrossing"
        )
    f1 = abs(Q) + nB - A2 / (D - gB)
    f2 = abs(Q) - nB - A2 / (D + gB)
    f_plus = D + gB + c.A_par + A2 / (D + gB)
    f_minus = D - gB - c.A_par + A2 / (D - gB) + A2 / (D + gB)
    denom = D * D - gB * gB
    return ApproxFrequencies(
        f_plus=f_plus,
        f_minus=f_minus,
        f1=f1,
        f2=f2,
        q_half_sum_closed=abs(Q) - A2 * D / denom,
        d_half_sum_closed=D + A2 * (1.5 * D + 0.5 * gB) / denom,
    )
