"""Dense complex linear algebra for small multi-qubit systems.

Matrices are plain complex ``numpy`` arrays. Subsystem ordering follows the
Kronecker convention: the left factor is the first subsystem.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Tolerances",
    "TOL",
    "I2",
    "SX",
    "SY",
    "SZ",
    "QuantumState",
    "kron",
    "ket",
    "projector",
    "bell_ket",
    "bell_projector",
    "partial_trace",
    "partial_transpose",
    "permute_subsystems",
    "psd_sqrt",
    "uhlmann_fidelity",
    "fidelity_psd",
    "trace_norm",
    "negativity",
    "min_eigenvalue",
    "is_hermitian",
    "random_density_matrix",
    "random_pure_state",
    "random_unitary",
    "random_kraus",
    "apply_kraus",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every property check."""

    positivity: float = 1e-9
    trace: float = 1e-10
    hermiticity: float = 1e-10

    @classmethod
    def from_env(cls) -> "Tolerances":
        # BSMCERT_POSITIVITY_TOL, BSMCERT_TRACE_TOL, BSMCERT_HERMITICITY_TOL
        kwargs = {}
        for name in ("positivity", "trace", "hermiticity"):
            raw = os.environ.get(f"BSMCERT_{name.upper()}_TOL")
            if raw:
                kwargs[name] = float(raw)
        return cls(**kwargs)


TOL = Tolerances.from_env()

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators or kets, left to right."""
    out = np.array([[1.0 + 0j]]) if ops[0].ndim == 2 else np.array([1.0 + 0j])
    for op in ops:
        out = np.kron(out, op)
    return out


def ket(amplitudes: Iterable[complex], tol: float | None = None) -> np.ndarray:
    vec = np.asarray(list(amplitudes), dtype=complex)
    tol = TOL.trace if tol is None else tol
    if abs(np.vdot(vec, vec).real - 1.0) > tol:
        raise ValueError("ket is not normalized")
    return vec


def projector(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def bell_ket(j: int, l: int) -> np.ndarray:
    """|phi_jl> = (Z^j (x) X^l)|phi_00>, with |phi_00> = (|00> + |11>)/sqrt(2)."""
    phi00 = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    op = kron(np.linalg.matrix_power(SZ, j), np.linalg.matrix_power(SX, l))
    return op @ phi00


def bell_projector(k: int) -> np.ndarray:
    """Projector onto the Bell state with binary label ``k = 2*j + l``."""
    return projector(bell_ket(k >> 1, k & 1))


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    tol = TOL.hermiticity if tol is None else tol
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True)
class QuantumState:
    """Density operator with a declared tensor factorization.

    The matrix is copied and made read-only on construction.
    """

    rho: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        dims = tuple(int(d) for d in self.dims) or (rho.shape[0],)
        if int(np.prod(dims)) != rho.shape[0]:
            raise ValueError(f"factor dims {dims} do not match dimension {rho.shape[0]}")
        if abs(np.trace(rho).real - 1.0) > TOL.trace:
            raise ValueError(f"trace is {np.trace(rho).real!r}, expected 1")
        if not is_hermitian(rho):
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -TOL.positivity:
            raise ValueError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_ket(cls, vec: np.ndarray, dims: Sequence[int] = ()) -> "QuantumState":
        return cls(projector(ket(vec)), tuple(dims))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def _matrix(x: QuantumState | np.ndarray) -> np.ndarray:
    return x.rho if isinstance(x, QuantumState) else np.asarray(x, dtype=complex)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator; ``order[i]`` is the old index of new factor i."""
    dims = list(dims)
    n = len(dims)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} subsystems")
    t = m.reshape(dims + dims)
    t = t.transpose(list(order) + [n + i for i in order])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def _partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    for i in keep:
        if not 0 <= i < n:
            raise IndexError(f"subsystem index {i} out of range for {n} subsystems")
    drop = [i for i in range(n) if i not in keep]
    t = m.reshape(dims + dims)
    t = t.transpose(keep + drop + [n + i for i in keep] + [n + i for i in drop])
    dk = int(np.prod([dims[i] for i in keep]))
    dd = int(np.prod([dims[i] for i in drop])) if drop else 1
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def partial_trace(
    state: QuantumState | np.ndarray,
    keep: Sequence[int],
    dims: Sequence[int] | None = None,
) -> QuantumState | np.ndarray:
    """Reduced operator on the subsystems listed in ``keep``.

    A ``QuantumState`` in gives a ``QuantumState`` out; a raw array (which may be
    unnormalized) needs ``dims`` and gives a raw array back.
    """
    if isinstance(state, QuantumState):
        dims = state.dims if dims is None else dims
        reduced = _partial_trace_matrix(state.rho, dims, keep)
        kept = tuple(dims[i] for i in sorted(set(keep)))
        return QuantumState(reduced, kept)
    if dims is None:
        raise ValueError("dims are required for a raw matrix")
    return _partial_trace_matrix(np.asarray(state, dtype=complex), dims, keep)


def partial_transpose(m: np.ndarray, dims: Sequence[int], transpose: Sequence[int]) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    axes = list(range(2 * n))
    for i in transpose:
        if not 0 <= i < n:
            raise IndexError(f"subsystem index {i} out of range for {n} subsystems")
        axes[i], axes[n + i] = axes[n + i], axes[i]
    d = int(np.prod(dims))
    return _matrix(m).reshape(dims + dims).transpose(axes).reshape(d, d)


def psd_sqrt(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Square root of a positive semidefinite matrix by Hermitian eigendecomposition.

    Eigenvalues in [-tol, 0) are set to zero; anything more negative raises.
    """
    tol = TOL.positivity if tol is None else tol
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    if w.min() < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_psd(a: np.ndarray, b: np.ndarray) -> float:
    """Tr sqrt(sqrt(a) b sqrt(a)) for PSD operators of any trace.

    Computed as the trace norm of sqrt(a) sqrt(b), which has the same value.
    """
    a = _matrix(a)
    b = _matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.svd(psd_sqrt(a) @ psd_sqrt(b), compute_uv=False).sum())


def uhlmann_fidelity(rho: QuantumState | np.ndarray, sigma: QuantumState | np.ndarray) -> float:
    """Uhlmann fidelity F = Tr sqrt(sqrt(rho) sigma sqrt(rho)), in [0, 1].

    Not squared: for pure states F = |<psi|phi>|.
    """
    a = _matrix(rho)
    b = _matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return min(1.0, fidelity_psd(a, b))


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(_matrix(m), compute_uv=False).sum())


def negativity(
    state: QuantumState | np.ndarray,
    cut: Sequence[int] = (1,),
    dims: Sequence[int] | None = None,
) -> float:
    """(||rho^T_B||_1 - 1) / 2, transposing the subsystems in ``cut``."""
    if dims is None:
        dims = state.dims if isinstance(state, QuantumState) else (2, 2)
    dims = tuple(dims)
    if len(dims) < 2 or not cut or len(set(cut)) == len(dims):
        raise ValueError(f"cut {tuple(cut)} is not a bipartition of {dims}")
    pt = partial_transpose(_matrix(state), dims, cut)
    return max(0.0, 0.5 * (trace_norm(pt) - 1.0))


def min_eigenvalue(m: np.ndarray, tol: float | None = None) -> float:
    m = _matrix(m)
    if not is_hermitian(m, tol if tol is not None else 10 * TOL.positivity):
        raise ValueError("min_eigenvalue needs a Hermitian matrix")
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def apply_kraus(
    kraus: Sequence[np.ndarray],
    rho: np.ndarray,
    dims: Sequence[int] | None = None,
    targets: Sequence[int] | None = None,
) -> np.ndarray:
    """Apply a Kraus map to ``rho``, optionally on a subset of its subsystems.

    With ``targets`` the map must be square (same input and output dimension).
    """
    rho = _matrix(rho)
    if targets is None:
        return sum(k @ rho @ k.conj().T for k in kraus)
    dims = list(dims)
    n = len(dims)
    rest = [i for i in range(n) if i not in targets]
    order = list(targets) + rest
    r = permute_subsystems(rho, dims, order)
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    eye = np.eye(d_rest)
    out = sum(np.kron(k, eye) @ r @ np.kron(k, eye).conj().T for k in kraus)
    new_dims = [dims[i] for i in order]
    inverse = [order.index(i) for i in range(n)]
    return permute_subsystems(out, new_dims, inverse)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-ensemble density matrix of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_kraus(d_in: int, d_out: int, n_ops: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map, cut from a random isometry."""
    z = rng.standard_normal((n_ops * d_out, d_in)) + 1j * rng.standard_normal((n_ops * d_out, d_in))
    v, _ = np.linalg.qr(z)
    return [v[i * d_out:(i + 1) * d_out, :] for i in range(n_ops)]
