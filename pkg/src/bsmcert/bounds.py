"""Certified fidelity bounds for Bell state measurements.

All functions are closed-form maps from observed statistics (CHSH values,
outcome probabilities, the source Bell value delta) to lower bounds on
fidelities. Functions that may clamp or leave their valid regime accept an
optional ``flags`` set and add a :class:`Flag` to it when that happens.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.optimize import bisect

from .linalg import TOL
from .scenario import TSIRELSON, ExperimentStatistics

SQRT2 = math.sqrt(2)


@dataclass(frozen=True)
class BoundConstants:
    beta_star: float = 2 * (8 + 7 * SQRT2) / 17
    # smallest admissible value of the source threshold, i.e. the weakest claim
    delta_star: float = 0.744
    s: float = (4 + 5 * SQRT2) / 16
    mu: float = -(1 + 2 * SQRT2) / 4


CONSTANTS = BoundConstants()
BETA_STAR = CONSTANTS.beta_star
DELTA_STAR = CONSTANTS.delta_star


class Flag(str, enum.Enum):
    NON_CERTIFYING = "non_certifying"
    REGIME_VIOLATED = "regime_violated"
    CLAMPED = "clamped"


class Mode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    INDEPENDENT_SOURCES = "independent_sources"
    PARTIAL = "partial"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


class InputError(ValueError):
    """Statistics are missing or inconsistent for the requested bound."""


def _flag(flags: set | None, flag: Flag) -> None:
    if flags is not None:
        flags.add(flag)


def _unit_interval(x: float, flags: set | None) -> float:
    if x < -TOL.positivity or x > 1 + TOL.positivity:
        _flag(flags, Flag.CLAMPED)
    return min(1.0, max(0.0, x))


def f_o_from_chsh(beta: float, flags: set | None = None) -> float:
    """Fidelity of the extracted heralded state with its Bell state, from one CHSH value."""
    if abs(beta) > TSIRELSON + TOL.positivity:
        raise ValueError(f"CHSH value {beta} outside [-2sqrt2, 2sqrt2]")
    radicand = 1 - 0.5 * (TSIRELSON - beta) / (TSIRELSON - BETA_STAR)
    if radicand < 0:
        _flag(flags, Flag.CLAMPED)
        _flag(flags, Flag.NON_CERTIFYING)
        return 0.0
    value = min(1.0, math.sqrt(radicand))
    if value <= 1 / SQRT2:
        _flag(flags, Flag.NON_CERTIFYING)
    return value


def f_o_squared_linear(beta: float) -> float:
    """The equivalent affine form s*beta + mu of the squared extracted fidelity."""
    return CONSTANTS.s * beta + CONSTANTS.mu


def f_o_combined(p: Sequence[float], f_o_k: Sequence[float]) -> float:
    """Certificate for the labelled output state: sum_k sqrt(p_k / 4) F_k."""
    if len(p) != len(f_o_k):
        raise ValueError("p and f_o_k must have the same length")
    if any(x < 0 for x in p) or sum(p) > 1 + TOL.positivity:
        raise ValueError(f"invalid probabilities {tuple(p)}")
    return sum(math.sqrt(pk / 4) * fk for pk, fk in zip(p, f_o_k))


def f_i_from_delta(delta: float, flags: set | None = None) -> float:
    """Source fidelity certified by the four-party Bell value delta."""
    if not -TOL.positivity <= delta <= 1 + TOL.positivity:
        raise ValueError(f"delta {delta} outside [0, 1]")
    radicand = 0.25 * (1 + 3 * (delta - DELTA_STAR) / (1 - DELTA_STAR))
    if radicand < 0:
        _flag(flags, Flag.CLAMPED)
        return 0.0
    return min(1.0, math.sqrt(radicand))


def bsm_fidelity_bound(f_o: float, f_i: float, flags: set | None = None) -> float:
    """cos(arccos F_o + arccos F_i); 0 and non_certifying once the angles pass pi/2."""
    angle = math.acos(_unit_interval(f_o, flags)) + math.acos(_unit_interval(f_i, flags))
    if angle > math.pi / 2:
        _flag(flags, Flag.NON_CERTIFYING)
        return 0.0
    return math.cos(angle)


def bsm_fidelity_independent_sources(
    p: Sequence[float], f_o_k: Sequence[float], flags: set | None = None
) -> float:
    """BSM fidelity from heralded-state data alone; valid for product sources."""
    f_o = f_o_combined(p, f_o_k)
    mean_sq = sum(pk * fk**2 for pk, fk in zip(p, f_o_k))
    return bsm_fidelity_bound(f_o, mean_sq**2, flags)


def conditional_fidelity_bound(f_o_0: float, f_i: float, p_0: float, flags: set | None = None) -> float:
    """Quality of a single heralding branch, conditioned on its success."""
    if not 0 < p_0 <= 1 + TOL.positivity:
        raise ValueError(f"p_0 = {p_0} must lie in (0, 1]")
    if f_i**2 + p_0 < 1:
        _flag(flags, Flag.REGIME_VIOLATED)
        return 0.0
    inner = math.sqrt(max(0.0, (p_0 + f_i**2 - 1) / p_0))
    return bsm_fidelity_bound(f_o_0, inner, flags)


def conditional_fidelity_intermediate(f_i: float, p_0: float, zeta_0: float) -> float:
    """(F_i - sqrt((1-p_0)(1-zeta_0/4))) / sqrt(p_0 zeta_0/4), before minimizing over zeta_0."""
    c = zeta_0 / 4
    return (f_i - math.sqrt((1 - p_0) * (1 - c))) / math.sqrt(p_0 * c)


def zeta_lower_bound(f_i: float, p_0: float, flags: set | None = None, cap: bool = True) -> float:
    """Lower bound on the success factor zeta_0 of the heralding branch.

    Outside the regime F_i^2 + p_0 > 1 the data are compatible with zeta_0 = 0.
    """
    if not 0 < p_0 <= 1 + TOL.positivity:
        raise ValueError(f"p_0 = {p_0} must lie in (0, 1]")
    gap = math.sqrt(p_0 * f_i**2) - math.sqrt(max(0.0, (1 - p_0) * (1 - f_i**2)))
    if gap <= 0:
        _flag(flags, Flag.REGIME_VIOLATED)
        return 0.0
    value = 4 * gap**2
    if cap and value > 1:
        _flag(flags, Flag.CLAMPED)
        return 1.0
    return value


def lemma1_rhs(f: float, p_0: float, q_0: float) -> float:
    """Lower bound on F(rho_0, sigma_0) after a probabilistic channel; may be negative."""
    if p_0 * q_0 == 0:
        raise ValueError("p_0 and q_0 must be nonzero")
    return (f - math.sqrt((1 - p_0) * (1 - q_0))) / math.sqrt(q_0 * p_0)


def independent_sources_curve(beta: float) -> float:
    """Independent-source bound for equiprobable outcomes with equal CHSH values."""
    f = f_o_from_chsh(beta)
    return bsm_fidelity_independent_sources([0.25] * 4, [f] * 4)


def independent_sources_threshold(target: float = 1 / SQRT2, xtol: float = 1e-6) -> float:
    """CHSH value at which the independent-source bound reaches ``target``."""
    return bisect(lambda b: independent_sources_curve(b) - target, BETA_STAR, TSIRELSON, xtol=xtol)


@dataclass(frozen=True)
class CertificateReport:
    mode: Mode
    f_o_k: tuple[float | None, ...] = (None, None, None, None)
    f_o: float | None = None
    f_i: float | None = None
    f_bsm: float | None = None
    f_bsm_independent_sources: float | None = None
    f_cond: float | None = None
    zeta_0: float | None = None
    flags: frozenset = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "f_o_k": list(self.f_o_k),
            "f_o": self.f_o,
            "f_i": self.f_i,
            "f_bsm": self.f_bsm,
            "f_bsm_independent_sources": self.f_bsm_independent_sources,
            "f_cond": self.f_cond,
            "zeta_0": self.zeta_0,
            "flags": sorted(f.value for f in self.flags),
        }


def _complete(stats: ExperimentStatistics) -> None:
    if len(stats.beta) != 4 or len(stats.p) != 4 or any(b is None for b in stats.beta):
        raise InputError("this mode needs all four CHSH values and outcome probabilities")
    # the combined certificate is only used for complete measurements
    if abs(sum(stats.p) - 1) > 1e-6:
        raise InputError(f"outcome probabilities sum to {sum(stats.p)}, expected 1")


def certify(stats: ExperimentStatistics, mode: "Mode | str" = Mode.DETERMINISTIC) -> CertificateReport:
    """Compute the certificate for ``stats`` in the requested mode."""
    mode = Mode.parse(mode)
    flags: set = set()
    if mode is Mode.PARTIAL:
        if not stats.beta or stats.beta[0] is None or not stats.p:
            raise InputError("partial mode needs beta_0 and p_0")
        if stats.delta is None:
            raise InputError("partial mode needs delta")
        if stats.p[0] <= 0:
            raise InputError("partial mode needs p_0 > 0")
        f_o_0 = f_o_from_chsh(stats.beta[0], flags)
        f_i = f_i_from_delta(stats.delta, flags)
        return CertificateReport(
            mode=mode,
            f_o_k=(f_o_0,) + (None,) * (len(stats.beta) - 1),
            f_i=f_i,
            f_cond=conditional_fidelity_bound(f_o_0, f_i, stats.p[0], flags),
            zeta_0=zeta_lower_bound(f_i, stats.p[0], flags),
            flags=frozenset(flags),
        )

    _complete(stats)
    f_o_k = tuple(f_o_from_chsh(b, flags) for b in stats.beta)
    f_o = f_o_combined(stats.p, f_o_k)
    if mode is Mode.INDEPENDENT_SOURCES:
        return CertificateReport(
            mode=mode,
            f_o_k=f_o_k,
            f_o=f_o,
            f_bsm_independent_sources=bsm_fidelity_independent_sources(stats.p, f_o_k, flags),
            flags=frozenset(flags),
        )
    if stats.delta is None:
        raise InputError("deterministic mode needs delta")
    f_i = f_i_from_delta(stats.delta, flags)
    return CertificateReport(
        mode=mode,
        f_o_k=f_o_k,
        f_o=f_o,
        f_i=f_i,
        f_bsm=bsm_fidelity_bound(f_o, f_i, flags),
        flags=frozenset(flags),
    )
