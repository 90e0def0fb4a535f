"""Truncated Fock-space linear algebra.

Multimode indices are row-major with mode 0 slowest, i.e. the flat index of
occupation ``(n_0, n_1, ...)`` is ``np.ravel_multi_index(n, cutoffs)``.
All containers are immutable; arrays are stored read-only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.linalg

TAIL_WARN = 1e-8
TAIL_FAIL = 1e-4


class TruncationError(ValueError):
    """Raised when a state puts too much weight on the top Fock levels."""


class TruncationWarning(UserWarning):
    pass


def _as_cutoffs(cutoffs) -> tuple[int, ...]:
    if np.isscalar(cutoffs):
        cutoffs = (int(cutoffs),)
    cutoffs = tuple(int(c) for c in cutoffs)
    if not cutoffs or any(c < 2 for c in cutoffs):
        raise ValueError(f"cutoffs must be integers >= 2, got {cutoffs}")
    return cutoffs


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def total_occupation(cutoffs: Sequence[int]) -> np.ndarray:
    """Total occupation number of every flat basis index."""
    grids = np.indices(tuple(cutoffs)).reshape(len(cutoffs), -1)
    return grids.sum(axis=0)


def tail_mask(cutoffs: Sequence[int]) -> np.ndarray:
    """Basis states where any mode sits in its top ceil(10%) levels."""
    grids = np.indices(tuple(cutoffs)).reshape(len(cutoffs), -1)
    mask = np.zeros(grids.shape[1], dtype=bool)
    for k, c in enumerate(cutoffs):
        mask |= grids[k] >= c - math.ceil(0.1 * c)
    return mask


@dataclass(frozen=True)
class FockVector:
    cutoffs: tuple[int, ...]
    amplitudes: np.ndarray
    tail_mass: float = field(init=False)

    def __post_init__(self):
        cutoffs = _as_cutoffs(self.cutoffs)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != math.prod(cutoffs):
            raise ValueError(f"{amps.size} amplitudes do not match cutoffs {cutoffs}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "cutoffs", cutoffs)
        object.__setattr__(self, "amplitudes", amps)
        tail = float(np.sum(np.abs(amps[tail_mask(cutoffs)]) ** 2))
        object.__setattr__(self, "tail_mass", tail)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockVector":
        nrm = self.norm
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return FockVector(self.cutoffs, self.amplitudes / nrm)

    def inner(self, other: "FockVector") -> complex:
        _check_same(self.cutoffs, other.cutoffs)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __add__(self, other: "FockVector") -> "FockVector":
        _check_same(self.cutoffs, other.cutoffs)
        return FockVector(self.cutoffs, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _check_same(self.cutoffs, other.cutoffs)
        return FockVector(self.cutoffs, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar) -> "FockVector":
        return FockVector(self.cutoffs, self.amplitudes * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FockOperator:
    cutoffs: tuple[int, ...]
    matrix: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        cutoffs = _as_cutoffs(self.cutoffs)
        mat = _frozen(self.matrix)
        d = math.prod(cutoffs)
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match cutoffs {cutoffs}")
        object.__setattr__(self, "cutoffs", cutoffs)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> "FockOperator":
        return FockOperator(self.cutoffs, self.matrix.conj().T, self.unitary)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            _check_same(self.cutoffs, other.cutoffs)
            return FockOperator(self.cutoffs, self.matrix @ other.matrix,
                                self.unitary and other.unitary)
        if isinstance(other, FockVector):
            _check_same(self.cutoffs, other.cutoffs)
            return FockVector(self.cutoffs, self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "FockOperator") -> "FockOperator":
        _check_same(self.cutoffs, other.cutoffs)
        return FockOperator(self.cutoffs, self.matrix + other.matrix)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        _check_same(self.cutoffs, other.cutoffs)
        return FockOperator(self.cutoffs, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.cutoffs, self.matrix * scalar)

    __rmul__ = __mul__

    def expect(self, state: FockVector) -> complex:
        _check_same(self.cutoffs, state.cutoffs)
        return complex(np.vdot(state.amplitudes, self.matrix @ state.amplitudes))

    def unitarity_defect(self, boundary: int = 0) -> float:
        """``max|U^dag U - I|`` on levels excluding the top ``boundary`` of each mode."""
        keep = lower_block_mask(self.cutoffs, boundary)
        g = self.matrix.conj().T @ self.matrix - np.eye(self.dim)
        return float(np.abs(g[np.ix_(keep, keep)]).max(initial=0.0))


@dataclass(frozen=True)
class DensityOperator:
    cutoffs: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        cutoffs = _as_cutoffs(self.cutoffs)
        mat = _frozen(self.matrix)
        d = math.prod(cutoffs)
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match cutoffs {cutoffs}")
        if np.abs(mat - mat.conj().T).max() > 1e-12:
            raise ValueError("density operator must be Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1) > 1e-10:
            raise ValueError(f"density operator trace {tr} is not 1")
        if np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValueError("density operator is not positive semidefinite")
        object.__setattr__(self, "cutoffs", cutoffs)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_state(cls, state: FockVector) -> "DensityOperator":
        return cls(state.cutoffs, state.normalized().projector())

    def fidelity_with(self, state: FockVector) -> float:
        """Overlap ``<psi|rho|psi>`` with a pure state."""
        psi = state.normalized().amplitudes
        return float(np.vdot(psi, self.matrix @ psi).real)


def _check_same(a, b):
    if tuple(a) != tuple(b):
        raise ValueError(f"cutoff mismatch: {tuple(a)} vs {tuple(b)}")


def lower_block_mask(cutoffs: Sequence[int], boundary: int) -> np.ndarray:
    """Flat mask of basis states with every mode below ``cutoff - boundary``."""
    grids = np.indices(tuple(cutoffs)).reshape(len(cutoffs), -1)
    keep = np.ones(grids.shape[1], dtype=bool)
    for k, c in enumerate(cutoffs):
        keep &= grids[k] < c - boundary
    return keep


def _check_tail(vec: FockVector, what: str) -> FockVector:
    if vec.tail_mass > TAIL_FAIL:
        raise TruncationError(
            f"{what}: tail mass {vec.tail_mass:.3e} exceeds {TAIL_FAIL:g}; raise the cutoff")
    if vec.tail_mass > TAIL_WARN:
        warnings.warn(f"{what}: tail mass {vec.tail_mass:.3e} exceeds {TAIL_WARN:g}",
                      TruncationWarning, stacklevel=3)
    return vec


# ---------------------------------------------------------------- states

def fock_basis_state(n, cutoffs) -> FockVector:
    """Indicator vector of occupation ``n`` (an int or one entry per mode)."""
    cutoffs = _as_cutoffs(cutoffs)
    n = (int(n),) if np.isscalar(n) else tuple(int(k) for k in n)
    if len(n) != len(cutoffs):
        raise ValueError("occupation list and cutoffs differ in length")
    for k, c in zip(n, cutoffs):
        if not 0 <= k < c:
            raise IndexError(f"occupation {k} out of range for cutoff {c}")
    amps = np.zeros(math.prod(cutoffs), dtype=complex)
    amps[np.ravel_multi_index(n, cutoffs)] = 1.0
    return FockVector(cutoffs, amps)


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Untruncated-normalization coherent amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)``."""
    amps = np.empty(cutoff, dtype=complex)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps


def coherent_state(alpha: complex, cutoff: int) -> FockVector:
    cutoff = int(cutoff)
    vec = FockVector((cutoff,), coherent_amplitudes(alpha, cutoff))
    _check_tail(vec, f"coherent_state(alpha={alpha})")
    return vec.normalized()


def phase_state(phi: float, cutoff: int) -> FockVector:
    """Truncated phase state, equal weights ``e^{i phi n} / sqrt(cutoff)``."""
    n = np.arange(int(cutoff))
    return FockVector((int(cutoff),), np.exp(1j * phi * n) / math.sqrt(cutoff))


# ------------------------------------------------------------- operators

def _single_mode_matrix(kind: str, cutoff: int, param) -> np.ndarray:
    n = np.arange(cutoff)
    if kind == "lower":
        return np.diag(np.sqrt(n[1:]), 1).astype(complex)
    if kind == "raise":
        return np.diag(np.sqrt(n[1:]), -1).astype(complex)
    if kind == "number":
        return np.diag(n).astype(complex)
    if kind == "position":
        a = np.diag(np.sqrt(n[1:]), 1)
        return ((a + a.T) / math.sqrt(2)).astype(complex)
    if kind == "momentum":
        a = np.diag(np.sqrt(n[1:]), 1)
        return (a - a.T) / (1j * math.sqrt(2))
    if kind == "rotation":
        return np.diag(np.exp(1j * float(param) * n))
    if kind == "cooling":
        if param is None or float(param) < 0:
            raise ValueError("cooling needs beta >= 0")
        return np.diag(np.exp(-float(param) * n)).astype(complex)
    if kind == "phasor":
        ell = int(param)
        if ell != param:
            raise ValueError("phasor shift must be an integer")
        return np.eye(cutoff, k=-ell, dtype=complex)
    raise ValueError(f"unknown operator kind {kind!r}")


def embed(single: np.ndarray, cutoffs: Sequence[int], mode: int) -> np.ndarray:
    """Place a single-mode matrix on ``mode`` of a multimode space."""
    out = np.ones((1, 1), dtype=complex)
    for k, c in enumerate(cutoffs):
        out = np.kron(out, single if k == mode else np.eye(c))
    return out


def standard_operator(kind: str, cutoffs, mode: int = 0, param=None) -> FockOperator:
    """Canonical single-mode operators, optionally embedded in a multimode space.

    ``kind`` is one of lower, raise, number, position, momentum, rotation
    (``param`` = angle), cooling (``param`` = beta) or phasor (``param`` = integer
    shift, ``E_l |n> = |n+l>``).
    """
    cutoffs = _as_cutoffs(cutoffs)
    if not 0 <= mode < len(cutoffs):
        raise IndexError(f"mode {mode} out of range")
    single = _single_mode_matrix(kind, cutoffs[mode], param)
    unitary = kind == "rotation"
    return FockOperator(cutoffs, embed(single, cutoffs, mode), unitary)


def identity(cutoffs) -> FockOperator:
    cutoffs = _as_cutoffs(cutoffs)
    return FockOperator(cutoffs, np.eye(math.prod(cutoffs)), True)


def displacement(qx: float, qp: float, cutoff: int) -> FockOperator:
    """``exp(alpha a^dag - alpha^* a)`` with ``alpha = (qx + i qp)/sqrt(2)``.

    Shifts position by ``qx`` and momentum by ``qp``; ``displacement(q, 0)`` is
    ``exp(-i q p)`` and ``displacement(0, q)`` is ``exp(i q x)``.
    """
    cutoff = int(cutoff)
    alpha = (qx + 1j * qp) / math.sqrt(2)
    if abs(alpha) ** 2 > cutoff / 4:
        raise ValueError(f"|alpha|^2 = {abs(alpha) ** 2:.3g} too large for cutoff {cutoff}")
    a = _single_mode_matrix("lower", cutoff, None)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockOperator((cutoff,), scipy.linalg.expm(gen), True)


def tensor_product(a, b):
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        return FockVector(a.cutoffs + b.cutoffs, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, FockOperator) and isinstance(b, FockOperator):
        return FockOperator(a.cutoffs + b.cutoffs, np.kron(a.matrix, b.matrix),
                            a.unitary and b.unitary)
    raise TypeError("tensor_product needs two FockVectors or two FockOperators")


# ------------------------------------------------------------ diagnostics

def hermite_functions(nmax: int, x) -> np.ndarray:
    """Orthonormal Hermite functions ``psi_0..psi_{nmax-1}`` at ``x``, shape (nmax, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((nmax, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    if nmax > 1:
        out[1] = math.sqrt(2) * x * out[0]
    for n in range(1, nmax - 1):
        out[n + 1] = x * math.sqrt(2 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def position_wavefunction(state: FockVector, x) -> np.ndarray:
    if len(state.cutoffs) != 1:
        raise ValueError("position_wavefunction is single-mode only")
    return state.amplitudes @ hermite_functions(state.dim, x)


def moment(state: FockVector, ell: int) -> float:
    """``<n^ell>`` of the total occupation number."""
    if ell < 1:
        raise ValueError("moment order must be >= 1")
    n = total_occupation(state.cutoffs).astype(float)
    return float(np.sum(n ** ell * np.abs(state.amplitudes) ** 2))


def phase_bin_centers(bins: int) -> np.ndarray:
    return 2 * np.pi * np.arange(bins) / bins


def phase_distribution(state: FockVector, bins: int) -> np.ndarray:
    """Normalized ``|<phi_j|psi>|^2`` over truncated phase states at the bin centers."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if len(state.cutoffs) != 1:
        raise ValueError("phase_distribution is single-mode only")
    n = np.arange(state.dim)
    phis = phase_bin_centers(bins)
    overlaps = np.exp(-1j * np.outer(phis, n)) @ state.amplitudes
    prob = np.abs(overlaps) ** 2
    return prob / prob.sum()


def canonical_commutator(cutoff: int) -> np.ndarray:
    x = standard_operator("position", cutoff).matrix
    p = standard_operator("momentum", cutoff).matrix
    return x @ p - p @ x


def exact_commutator_trace(cutoff: int):
    """``Tr([x, p])`` in exact arithmetic on the truncated space (a sympy number).

    Uses ``[x, p] = i (a a^dag - a^dag a)``, which holds for the truncated
    ladder matrix as an algebraic identity.
    """
    import sympy

    a = sympy.SparseMatrix(cutoff, cutoff, {(i, i + 1): sympy.sqrt(i + 1) for i in range(cutoff - 1)})
    return sympy.simplify(sympy.I * (a * a.T - a.T * a).trace())


def phasor_completeness(cutoff: int, ell_max: int) -> np.ndarray:
    """Completeness tensor ``T[m, n, m', n']`` of rotated phasors.

    The angular integral is replaced by an exact discrete Fourier sum on
    ``2 * cutoff`` nodes, which integrates ``e^{i phi (n - n')}`` exactly for
    all index differences inside the space.
    """
    k = 2 * cutoff
    phis = 2 * np.pi * np.arange(k) / k
    rot = np.exp(1j * np.outer(phis, np.arange(cutoff)))  # (k, cutoff) diagonals
    tensor = np.zeros((cutoff,) * 4, dtype=complex)
    for ell in range(-ell_max, ell_max + 1):
        e = _single_mode_matrix("phasor", cutoff, ell)
        # A_phi[m, n] = <m| E_l e^{i phi n} |n>
        a_phi = e[None, :, :] * rot[:, None, :]
        tensor += np.einsum("kmn,kpq->mnpq", a_phi, a_phi.conj()) / k
    return tensor
