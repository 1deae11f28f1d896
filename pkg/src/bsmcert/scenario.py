"""Simulated two-source entanglement-swapping experiment.

Two sources each emit a two-qubit state on (A_i, B_i). The joint measurement
under test acts on A1 A2; parties B1 and B2 run a CHSH test on the heralded
state. Global subsystem order is A1, A2, B1, B2.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import (
    I2,
    SX,
    SZ,
    TOL,
    QuantumState,
    bell_projector,
    is_hermitian,
    kron,
    permute_subsystems,
)

TSIRELSON = 2 * math.sqrt(2)
MIN_PROBABILITY = 1e-12


class Relabeling(enum.Enum):
    """Classical post-processing of CHSH data.

    T_A flips the outputs of the first party's setting 0; T_B swaps the second
    party's two settings.
    """

    NONE = "none"
    T_A = "T_A"
    T_B = "T_B"
    T_AB = "T_A*T_B"

    @property
    def flips_a0(self) -> bool:
        return self in (Relabeling.T_A, Relabeling.T_AB)

    @property
    def swaps_b(self) -> bool:
        return self in (Relabeling.T_B, Relabeling.T_AB)


# outcome k = 2j + l heralds Z^j (x) X^l |phi_00>
RELABELING_FOR_OUTCOME = {
    0: Relabeling.NONE,
    1: Relabeling.T_B,
    2: Relabeling.T_A,
    3: Relabeling.T_AB,
}


class DeltaModel(enum.Enum):
    EXPLICIT = "explicit"
    CHSH_SCALED = "chsh_scaled"

    @classmethod
    def parse(cls, value: "str | DeltaModel") -> "DeltaModel":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


@dataclass(frozen=True)
class BinaryObservableSetting:
    observable: np.ndarray
    party: str
    setting_index: int

    def __post_init__(self) -> None:
        obs = np.array(self.observable, dtype=complex)
        if not is_hermitian(obs, TOL.positivity):
            raise ValueError(f"observable for {self.party}[{self.setting_index}] is not Hermitian")
        if np.max(np.abs(obs @ obs - np.eye(obs.shape[0]))) > TOL.positivity:
            raise ValueError(f"observable for {self.party}[{self.setting_index}] is not +-1 valued")
        if self.setting_index not in (0, 1):
            raise ValueError("setting_index must be 0 or 1")
        obs.setflags(write=False)
        object.__setattr__(self, "observable", obs)

    def projector(self, outcome: int) -> np.ndarray:
        """Projector for output bit ``outcome`` (0 <-> eigenvalue +1)."""
        sign = 1 if outcome == 0 else -1
        return 0.5 * (np.eye(self.observable.shape[0]) + sign * self.observable)


def xz_observable(angle: float) -> np.ndarray:
    return math.cos(angle) * SX + math.sin(angle) * SZ


def default_settings(misalignment: float = 0.0) -> tuple[tuple[BinaryObservableSetting, ...], ...]:
    """Optimal CHSH boxes: B1 measures {X, Z}, B2 measures {(X+Z)/sqrt2, (X-Z)/sqrt2}.

    ``misalignment`` rotates both of B2's observables in the XZ plane.
    """
    b1 = (
        BinaryObservableSetting(SX, "B1", 0),
        BinaryObservableSetting(SZ, "B1", 1),
    )
    b2 = (
        BinaryObservableSetting(xz_observable(math.pi / 4 + misalignment), "B2", 0),
        BinaryObservableSetting(xz_observable(-math.pi / 4 + misalignment), "B2", 1),
    )
    return b1, b2


@dataclass(frozen=True)
class MeasurementInstrument:
    """Outcome-labelled CP maps in Kraus form, acting on the measured side only.

    Each Kraus operator maps the measured system to a one-dimensional output,
    so a branch applied to a bipartite state traces the measured side out.
    """

    outcomes: tuple[tuple[int, tuple[np.ndarray, ...]], ...]
    input_dims: tuple[int, ...] = (2, 2)

    def __post_init__(self) -> None:
        d = int(np.prod(self.input_dims))
        total = np.zeros((d, d), dtype=complex)
        for _, ops in self.outcomes:
            for k in ops:
                if k.shape[1] != d:
                    raise ValueError(f"Kraus operator shape {k.shape} does not act on dimension {d}")
                total += k.conj().T @ k
        if np.max(np.abs(total - np.eye(d))) > TOL.positivity:
            raise ValueError("instrument is not trace preserving")

    @property
    def labels(self) -> list[int]:
        return [label for label, _ in self.outcomes]

    def povm(self, label: int) -> np.ndarray:
        ops = dict(self.outcomes)[label]
        return sum(k.conj().T @ k for k in ops)

    def branch(self, label: int, rho: np.ndarray, rest_dim: int) -> np.ndarray:
        """M_k[rho] = Tr_A((E_k (x) 1) rho), unnormalized, on the unmeasured side."""
        eye = np.eye(rest_dim)
        out = np.zeros((rest_dim, rest_dim), dtype=complex)
        for k in dict(self.outcomes)[label]:
            big = np.kron(k, eye)
            out += big @ rho @ big.conj().T
        return out


def instrument_from_povm(povm: Sequence[np.ndarray], input_dims: Sequence[int] = (2, 2)) -> MeasurementInstrument:
    outcomes = []
    for label, e in enumerate(povm):
        w, v = np.linalg.eigh(0.5 * (e + e.conj().T))
        ops = tuple(
            math.sqrt(x) * v[:, i].conj()[None, :]
            for i, x in enumerate(w)
            if x > TOL.positivity
        )
        outcomes.append((label, ops))
    return MeasurementInstrument(tuple(outcomes), tuple(input_dims))


def ideal_bsm() -> MeasurementInstrument:
    return instrument_from_povm([bell_projector(k) for k in range(4)])


def noisy_bsm(w: "float | NoiseModel") -> MeasurementInstrument:
    """POVM elements (1 - w)|phi_k><phi_k| + w 1/4."""
    if isinstance(w, NoiseModel):
        w = w.bsm_depolarization
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"BSM depolarization {w} outside [0, 1]")
    return instrument_from_povm([(1 - w) * bell_projector(k) + w * np.eye(4) / 4 for k in range(4)])


def werner_source(v: float) -> QuantumState:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v} outside [0, 1]")
    return QuantumState(v * bell_projector(0) + (1 - v) * np.eye(4) / 4, (2, 2))


@dataclass(frozen=True)
class NoiseModel:
    source_visibility: tuple[float, float] = (1.0, 1.0)
    bsm_depolarization: float = 0.0
    setting_misalignment: float = 0.0

    def __post_init__(self) -> None:
        vis = self.source_visibility
        if isinstance(vis, (int, float)):
            vis = (float(vis), float(vis))
        vis = tuple(float(v) for v in vis)
        if len(vis) != 2 or not all(0.0 <= v <= 1.0 for v in vis):
            raise ValueError(f"source visibilities {vis} must be two values in [0, 1]")
        if not 0.0 <= self.bsm_depolarization <= 1.0:
            raise ValueError(f"BSM depolarization {self.bsm_depolarization} outside [0, 1]")
        object.__setattr__(self, "source_visibility", vis)


def chsh_operator(
    a_settings: Sequence[BinaryObservableSetting],
    b_settings: Sequence[BinaryObservableSetting],
    relabeling: Relabeling = Relabeling.NONE,
) -> np.ndarray:
    """sum_{y1,y2} (-1)^{y1 y2} A_{y1} (x) B_{y2} after the given relabeling."""
    a = [s.observable for s in a_settings]
    b = [s.observable for s in b_settings]
    if relabeling.flips_a0:
        a = [-a[0], a[1]]
    if relabeling.swaps_b:
        b = [b[1], b[0]]
    return sum((-1) ** (y1 * y2) * np.kron(a[y1], b[y2]) for y1 in (0, 1) for y2 in (0, 1))


def chsh_value(
    state: QuantumState | np.ndarray,
    a_settings: Sequence[BinaryObservableSetting],
    b_settings: Sequence[BinaryObservableSetting],
    relabeling: Relabeling = Relabeling.NONE,
) -> float:
    rho = state.rho if isinstance(state, QuantumState) else np.asarray(state)
    return float(np.trace(rho @ chsh_operator(a_settings, b_settings, relabeling)).real)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to generate statistics for one experimental configuration."""

    source1: QuantumState
    source2: QuantumState
    bsm: MeasurementInstrument
    settings: tuple[tuple[BinaryObservableSetting, ...], tuple[BinaryObservableSetting, ...]]
    delta_model: DeltaModel = DeltaModel.CHSH_SCALED
    delta: float | None = None

    @classmethod
    def from_noise(
        cls,
        noise: NoiseModel,
        delta_model: "DeltaModel | str" = DeltaModel.CHSH_SCALED,
        delta: float | None = None,
    ) -> "Scenario":
        v1, v2 = noise.source_visibility
        return cls(
            werner_source(v1),
            werner_source(v2),
            noisy_bsm(noise.bsm_depolarization),
            default_settings(noise.setting_misalignment),
            DeltaModel.parse(delta_model),
            delta,
        )

    def global_state(self) -> np.ndarray:
        rho = np.kron(self.source1.rho, self.source2.rho)  # A1 B1 A2 B2
        return permute_subsystems(rho, [2, 2, 2, 2], [0, 2, 1, 3])


@dataclass(frozen=True)
class ExperimentStatistics:
    """Observed protocol data. ``None`` marks a CHSH value of an unseen outcome."""

    beta: tuple[float | None, ...]
    p: tuple[float, ...]
    delta: float | None = None
    delta_model: DeltaModel = DeltaModel.EXPLICIT
    beta_stderr: tuple[float | None, ...] | None = None
    p_stderr: tuple[float, ...] | None = None
    shots: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta_model", DeltaModel.parse(self.delta_model))
        for b in self.beta:
            if b is not None and abs(b) > TSIRELSON + TOL.positivity:
                raise ValueError(f"CHSH value {b} outside the quantum range")
        if any(p < 0 for p in self.p) or sum(self.p) > 1 + TOL.positivity:
            raise ValueError(f"invalid outcome probabilities {self.p}")
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta {self.delta} outside [0, 1]")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta_model"] = self.delta_model.value
        for key in ("beta", "p", "beta_stderr", "p_stderr"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentStatistics":
        known = {"beta", "p", "delta", "delta_model", "beta_stderr", "p_stderr", "shots"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown statistics keys: {sorted(unknown)}")
        if "beta" not in data or "p" not in data:
            raise ValueError("statistics need 'beta' and 'p'")
        kw = dict(data)
        for key in ("beta", "p", "beta_stderr", "p_stderr"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        kw.setdefault("delta_model", DeltaModel.EXPLICIT.value)
        return cls(**kw)


def scaled_delta(beta: Sequence[float | None], p: Sequence[float]) -> float:
    """delta = mean CHSH value / 2sqrt2, with the mean weighted by p_k; clipped to [0, 1]."""
    pairs = [(pk, bk) for pk, bk in zip(p, beta) if bk is not None and pk > 0]
    weight = sum(pk for pk, _ in pairs)
    if weight == 0:
        return 0.0
    mean = sum(pk * bk for pk, bk in pairs) / weight
    return min(1.0, max(0.0, mean / TSIRELSON))


def _resolve_delta(model: DeltaModel, delta: float | None, beta, p) -> float | None:
    if model is DeltaModel.CHSH_SCALED:
        return scaled_delta(beta, p)
    return delta


def protocol_branches(scenario: Scenario) -> tuple[list[float], list[QuantumState | None]]:
    """Outcome probabilities p_k and heralded B1 B2 states (``None`` when p_k ~ 0)."""
    rho = scenario.global_state()
    probs, states = [], []
    for k in scenario.bsm.labels:
        out = scenario.bsm.branch(k, rho, 4)
        pk = float(np.trace(out).real)
        probs.append(pk)
        states.append(QuantumState(out / pk, (2, 2)) if pk > MIN_PROBABILITY else None)
    return probs, states


def run_protocol(
    source1: QuantumState,
    source2: QuantumState,
    bsm: MeasurementInstrument,
    settings=None,
    delta_model: "DeltaModel | str" = DeltaModel.CHSH_SCALED,
    delta: float | None = None,
) -> ExperimentStatistics:
    settings = default_settings() if settings is None else settings
    scenario = Scenario(source1, source2, bsm, settings, DeltaModel.parse(delta_model), delta)
    return analytic_statistics(scenario)


def analytic_statistics(scenario: Scenario) -> ExperimentStatistics:
    probs, states = protocol_branches(scenario)
    a_set, b_set = scenario.settings
    beta = []
    for k, st in zip(scenario.bsm.labels, states):
        if st is None:
            beta.append(None)
        else:
            beta.append(chsh_value(st, a_set, b_set, RELABELING_FOR_OUTCOME[k]))
    return ExperimentStatistics(
        beta=tuple(beta),
        p=tuple(probs),
        delta=_resolve_delta(scenario.delta_model, scenario.delta, beta, probs),
        delta_model=scenario.delta_model,
    )


def joint_distribution(scenario: Scenario) -> np.ndarray:
    """p(k, b1, b2 | y1, y2) as an array indexed [k, y1, y2, b1, b2]."""
    rho = scenario.global_state()
    a_set, b_set = scenario.settings
    out = np.zeros((4, 2, 2, 2, 2))
    for k in scenario.bsm.labels:
        e_k = scenario.bsm.povm(k)
        for y1, y2, b1, b2 in np.ndindex(2, 2, 2, 2):
            op = kron(e_k, a_set[y1].projector(b1), b_set[y2].projector(b2))
            out[k, y1, y2, b1, b2] = np.trace(op @ rho).real
    return np.clip(out, 0.0, None)


def _estimate(counts: np.ndarray) -> tuple[list, list, list, list]:
    """CHSH values and standard errors from counts indexed [k, y1, y2, b1, b2]."""
    total = counts.sum()
    p = (counts.sum(axis=(1, 2, 3, 4)) / total).tolist()
    p_err = [math.sqrt(pk * (1 - pk) / total) for pk in p]
    parity = np.array([[1, -1], [-1, 1]])
    beta, beta_err = [], []
    for k in range(counts.shape[0]):
        relabel = RELABELING_FOR_OUTCOME[k]
        value, var, defined = 0.0, 0.0, True
        for y1, y2 in np.ndindex(2, 2):
            c = counts[k, y1, y2]
            n = c.sum()
            if n == 0:
                defined = False
                break
            corr = float((parity * c).sum() / n)
            if relabel.flips_a0 and y1 == 0:
                corr = -corr
            # T_B: physical setting y2 plays the role of logical setting 1 - y2
            yb = 1 - y2 if relabel.swaps_b else y2
            value += (-1) ** (y1 * yb) * corr
            var += (1 - corr**2) / n
        beta.append(value if defined else None)
        beta_err.append(math.sqrt(var) if defined else None)
    return beta, beta_err, p, p_err


def sample_statistics(scenario: Scenario, shots: int, seed: int) -> ExperimentStatistics:
    """Finite-statistics run: settings drawn uniformly, one multinomial over all cells."""
    if shots < 1:
        raise ValueError("shots must be positive")
    probs = joint_distribution(scenario) / 4.0  # uniform (y1, y2)
    flat = probs.ravel()
    flat = flat / flat.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, flat).reshape(probs.shape)
    beta, beta_err, p, p_err = _estimate(counts)
    beta = [None if b is None else max(-TSIRELSON, min(TSIRELSON, b)) for b in beta]
    return ExperimentStatistics(
        beta=tuple(beta),
        p=tuple(p),
        delta=_resolve_delta(scenario.delta_model, scenario.delta, beta, p),
        delta_model=scenario.delta_model,
        beta_stderr=tuple(beta_err),
        p_stderr=tuple(p_err),
        shots=shots,
    )


def statistics_from_distribution(scenario: Scenario) -> ExperimentStatistics:
    """Infinite-shot estimate computed from the exact joint distribution."""
    dist = joint_distribution(scenario)
    beta, _, _, _ = _estimate(dist)
    # each (y1, y2) slice sums to p_k
    p = [float(dist[k].sum(axis=(2, 3)).mean()) for k in range(4)]
    beta = [b if pk > MIN_PROBABILITY else None for b, pk in zip(beta, p)]
    return ExperimentStatistics(
        beta=tuple(beta),
        p=tuple(p),
        delta=_resolve_delta(scenario.delta_model, scenario.delta, beta, p),
        delta_model=scenario.delta_model,
    )


CONFIG_KEYS = {
    "visibility",
    "bsm_depolarization",
    "misalignment",
    "shots",
    "seed",
    "delta_model",
    "delta",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario file schema (JSON object).

    visibility: float or [v1, v2]; bsm_depolarization: float; misalignment:
    radians; shots: int or null; seed: int (required with shots);
    delta_model: "explicit" | "chsh_scaled"; delta: float (explicit model).
    """

    visibility: tuple[float, float] = (1.0, 1.0)
    bsm_depolarization: float = 0.0
    misalignment: float = 0.0
    shots: int | None = None
    seed: int | None = None
    delta_model: DeltaModel = DeltaModel.CHSH_SCALED
    delta: float | None = None

    def __post_init__(self) -> None:
        vis = self.visibility
        if isinstance(vis, (int, float)):
            vis = (float(vis), float(vis))
        object.__setattr__(self, "visibility", tuple(float(v) for v in vis))
        object.__setattr__(self, "delta_model", DeltaModel.parse(self.delta_model))
        if self.shots is not None and self.seed is None:
            raise ValueError("a seed is required when shots is finite")
        if self.delta_model is DeltaModel.EXPLICIT and self.delta is None:
            raise ValueError("the explicit delta model needs a delta value")
        # validates ranges
        self.noise()

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def noise(self) -> NoiseModel:
        return NoiseModel(self.visibility, self.bsm_depolarization, self.misalignment)

    def scenario(self) -> Scenario:
        return Scenario.from_noise(self.noise(), self.delta_model, self.delta)

    def statistics(self) -> ExperimentStatistics:
        if self.shots is None:
            return analytic_statistics(self.scenario())
        return sample_statistics(self.scenario(), self.shots, self.seed)
