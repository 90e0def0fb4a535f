"""Fock-space code constructors, Chebyshev-style search and footprint counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .fock_core import (
    FockOperator,
    FockVector,
    TruncationError,
    _check_tail,
    coherent_amplitudes,
    fock_basis_state,
    hermite_functions,
    total_occupation,
)

FAMILIES = ("binomial", "cat", "number_phase", "gkp_approx", "dual_rail",
            "cly2", "cly3", "trivial", "custom")


@dataclass(frozen=True)
class BosonicCode:
    """A code given by an orthonormal list of logical codewords.

    ``raw_gram`` keeps the overlaps of the codewords as first constructed,
    before symmetric orthonormalization (nonzero only for approximate codes).
    """

    family: str
    params: dict
    codewords: tuple[FockVector, ...]
    raw_gram: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown code family {self.family!r}")
        words = tuple(self.codewords)
        if len(words) < 1:
            raise ValueError("a code needs at least one codeword")
        cut = words[0].cutoffs
        if any(w.cutoffs != cut for w in words):
            raise ValueError("codewords must share cutoffs")
        v = np.stack([w.amplitudes for w in words], axis=1)
        gram = v.conj().T @ v
        if np.abs(gram - np.eye(len(words))).max() > 1e-10:
            raise ValueError("codewords are not orthonormal")
        object.__setattr__(self, "codewords", words)
        if self.raw_gram is None:
            object.__setattr__(self, "raw_gram", gram)

    @property
    def logical_dim(self) -> int:
        return len(self.codewords)

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return self.codewords[0].cutoffs

    @property
    def dim(self) -> int:
        return self.codewords[0].dim

    @property
    def isometry(self) -> np.ndarray:
        """Encoding isometry with codewords as columns, shape (dim, logical_dim)."""
        return np.stack([w.amplitudes for w in self.codewords], axis=1)

    @property
    def projector(self) -> np.ndarray:
        v = self.isometry
        return v @ v.conj().T

    def dual_words(self) -> tuple[FockVector, FockVector]:
        """Qubit ``|+>, |->`` words, ``(|0> +- |1>)/sqrt(2)``."""
        if self.logical_dim != 2:
            raise ValueError("dual words are defined for qubit codes")
        w0, w1 = self.codewords
        return ((w0 + w1) * (1 / math.sqrt(2)), (w0 - w1) * (1 / math.sqrt(2)))


def lowdin(vectors: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalization of the columns of ``vectors``."""
    gram = vectors.conj().T @ vectors
    w, u = np.linalg.eigh(gram)
    return vectors @ (u @ np.diag(w ** -0.5) @ u.conj().T)


def _make(family, params, cutoffs, columns, orthonormalize=False) -> BosonicCode:
    columns = np.asarray(columns, dtype=complex)
    raw = columns.conj().T @ columns
    if orthonormalize:
        columns = lowdin(columns)
    words = tuple(FockVector(cutoffs, columns[:, k]) for k in range(columns.shape[1]))
    return BosonicCode(family, dict(params), words, raw)


def _from_pm(family, params, cutoff, plus, minus) -> BosonicCode:
    plus = plus / np.linalg.norm(plus)
    minus = minus / np.linalg.norm(minus)
    w0 = (plus + minus) / math.sqrt(2)
    w1 = (plus - minus) / math.sqrt(2)
    return _make(family, params, (cutoff,), np.stack([w0, w1], axis=1))


# ----------------------------------------------------------- constructors

def binomial_code(N: int, D: int, cutoff: int) -> BosonicCode:
    """Binomial code with Fock spacing ``N`` and dephasing order ``D``."""
    if N < 1 or D < 0:
        raise ValueError("binomial code needs N >= 1, D >= 0")
    if N * (D + 1) >= cutoff:
        raise ValueError(f"cutoff {cutoff} too small for N={N}, D={D}")
    words = np.zeros((cutoff, 2), dtype=complex)
    for m in range(D + 2):
        words[N * m, m % 2] = math.sqrt(math.comb(D + 1, m) / 2 ** D)
    return _make("binomial", {"N": N, "D": D}, (cutoff,), words)


def cat_code(N: int, alpha: float, cutoff: int) -> BosonicCode:
    """``2N``-component cat code built by modular projection of ``|alpha>``.

    ``|+>`` keeps Fock classes ``n = 0 mod 2N`` and ``|->`` keeps ``n = N mod 2N``.
    """
    if N < 1 or alpha <= 0:
        raise ValueError("cat code needs N >= 1 and alpha > 0")
    amps = coherent_amplitudes(alpha, int(cutoff))
    _check_tail(FockVector((cutoff,), amps), f"cat_code(alpha={alpha})")
    n = np.arange(cutoff)
    plus = np.where(n % (2 * N) == 0, amps, 0)
    minus = np.where(n % (2 * N) == N, amps, 0)
    return _from_pm("cat", {"N": N, "alpha": alpha}, cutoff, plus, minus)


def number_phase_code(N: int, cutoff: int) -> BosonicCode:
    """Truncated number-phase code: equal-weight Fock combs in the dual basis."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if cutoff < 4 * N:
        raise ValueError(f"cutoff must be at least {4 * N}")
    n = np.arange(cutoff)
    plus = (n % (2 * N) == 0).astype(complex)
    minus = (n % (2 * N) == N).astype(complex)
    return _from_pm("number_phase", {"N": N}, cutoff, plus, minus)


def gkp_comb_amplitudes(nodes: np.ndarray, delta: float, cutoff: int) -> np.ndarray:
    """Fock amplitudes of ``exp(-delta^2 n)`` applied to a comb of position states."""
    psi = hermite_functions(cutoff, nodes)
    return np.exp(-delta ** 2 * np.arange(cutoff)) * psi.sum(axis=1)


def _comb_range(delta: float, spacing: float, cutoff: int) -> int:
    reach = max(6 / delta, math.sqrt(2 * cutoff + 1) + 12)
    return max(math.ceil(6 / (math.sqrt(2 * math.pi) * delta)), math.ceil(reach / spacing))


def gkp_approx_code(Delta: float, cutoff: int, variant: str = "square_qubit") -> BosonicCode:
    """Cooled GKP states in Fock space.

    ``canonical_state`` gives the single comb at multiples of ``sqrt(2 pi)``
    (a one-word code); ``square_qubit`` gives the two alternating combs at
    even and odd multiples of ``sqrt(pi)``.
    """
    if not 0 < Delta < 1:
        raise ValueError("Delta must lie in (0, 1)")
    if cutoff < 4 / Delta ** 2:
        raise ValueError(f"cutoff must be at least 4/Delta^2 = {4 / Delta ** 2:.1f}")
    params = {"Delta": Delta, "variant": variant}
    if variant == "canonical_state":
        s = math.sqrt(2 * math.pi)
        L = _comb_range(Delta, s, cutoff)
        columns = [gkp_comb_amplitudes(s * np.arange(-L, L + 1), Delta, cutoff)]
    elif variant == "square_qubit":
        s = math.sqrt(math.pi)
        L = _comb_range(Delta, 2 * s, cutoff)
        ell = np.arange(-L, L + 1)
        columns = [gkp_comb_amplitudes(2 * ell * s, Delta, cutoff),
                   gkp_comb_amplitudes((2 * ell + 1) * s, Delta, cutoff)]
    else:
        raise ValueError(f"unknown GKP variant {variant!r}")
    columns = [c / np.linalg.norm(c) for c in columns]
    for c in columns:
        _check_tail(FockVector((cutoff,), c), f"gkp_approx_code(Delta={Delta})")
    return _make("gkp_approx", params, (cutoff,), np.stack(columns, axis=1), orthonormalize=True)


def _multimode(family, cutoffs, words) -> BosonicCode:
    columns = []
    for terms in words:
        vec = sum(fock_basis_state(occ, cutoffs).amplitudes for occ in terms)
        columns.append(vec / np.linalg.norm(vec))
    return _make(family, {}, cutoffs, np.stack(columns, axis=1))


def dual_rail_code() -> BosonicCode:
    return _multimode("dual_rail", (3, 3), [[(1, 0)], [(0, 1)]])


def cly_code(variant: str = "two_mode") -> BosonicCode:
    if variant == "two_mode":
        return _multimode("cly2", (6, 6), [[(0, 4), (4, 0)], [(2, 2)]])
    if variant == "three_mode":
        return _multimode("cly3", (5, 5, 5), [[(3, 0, 0), (0, 3, 0), (0, 0, 3)], [(1, 1, 1)]])
    raise ValueError(f"unknown CLY variant {variant!r}")


def trivial_code(cutoff: int) -> BosonicCode:
    return _make("trivial", {}, (cutoff,), np.eye(cutoff, 2))


def custom_code(codewords: Sequence[FockVector], params: dict | None = None,
                orthonormalize: bool = False) -> BosonicCode:
    cutoffs = codewords[0].cutoffs
    columns = np.stack([w.amplitudes for w in codewords], axis=1)
    return _make("custom", params or {}, cutoffs, columns, orthonormalize)


# ------------------------------------------------------ chebyshev search

@dataclass(frozen=True)
class ChebyshevResult:
    code: BosonicCode
    objective: float
    residual: float


def moment_gap(code: BosonicCode, ell: int) -> float:
    """``<0|n^ell|0> - <1|n^ell|1>``."""
    n = total_occupation(code.cutoffs).astype(float)
    w0, w1 = code.codewords[:2]
    return float(np.sum(n ** ell * (np.abs(w0.amplitudes) ** 2 - np.abs(w1.amplitudes) ** 2)))


def chebyshev_search(D: int, support: Sequence[int], cutoff: int, seed: int = 0) -> ChebyshevResult:
    """Qubit code on ``support`` with equal moments up to ``D`` and maximal ``n^(D+1)`` gap.

    With ``w = |c_0|^2 - |c_1|^2`` the moment constraints are linear in ``w``
    and ``sum |w| <= 2``; the optimum of that linear program is attained by
    codewords with disjoint supports, which are automatically orthogonal, so
    solving it gives the global maximum of the original problem. ``seed`` is
    accepted for reproducibility records only; the solver is deterministic.
    """
    support = np.array(sorted(set(int(s) for s in support)))
    if support.size < D + 2:
        raise ValueError(f"support needs at least D+2 = {D + 2} levels")
    if support.max() >= cutoff:
        raise ValueError("support exceeds cutoff")
    scale = float(support.max())
    x = support / scale
    k = support.size
    powers = np.vstack([x ** ell for ell in range(D + 1)])
    # variables: w_plus (k), w_minus (k)
    a_eq = np.hstack([powers, -powers])
    a_eq = np.vstack([a_eq, np.hstack([np.ones(k), np.zeros(k)])])
    b_eq = np.concatenate([np.zeros(D + 1), [1.0]])
    target = x ** (D + 1)
    res = scipy.optimize.linprog(-np.concatenate([target, -target]), A_eq=a_eq, b_eq=b_eq,
                                 bounds=[(0, None)] * (2 * k), method="highs")
    if res.status != 0 or -res.fun < 1e-9:
        raise ValueError(f"no code with a nonzero order-{D + 1} gap on support {support.tolist()}")
    p = np.clip(res.x[:k], 0, None)
    q = np.clip(res.x[k:], 0, None)
    overlap = np.minimum(p, q)
    p, q = p - overlap, q - overlap
    p, q = p / p.sum(), q / q.sum()
    words = np.zeros((cutoff, 2), dtype=complex)
    words[support, 0] = np.sqrt(p)
    words[support, 1] = np.sqrt(q)
    code = _make("custom", {"D": D, "support": support.tolist(), "kind": "chebyshev", "seed": seed},
                 (cutoff,), words)
    resid = max(abs(moment_gap(code, ell)) / scale ** ell for ell in range(1, D + 1)) if D else 0.0
    if resid > 1e-8:
        raise ValueError(f"constraint residual {resid:.2e} above 1e-8")
    return ChebyshevResult(code, abs(moment_gap(code, D + 1)), resid)


# -------------------------------------------------------------- footprint

@dataclass(frozen=True)
class CodeFootprint:
    fock_support_count: int
    error_space_count: int
    modes: int


def _orthonormal_range(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if m.size == 0 or np.abs(m).max() < tol:
        return np.zeros((m.shape[0], 0), dtype=complex)
    return scipy.linalg.orth(m, rcond=tol)


def code_footprint(code: BosonicCode, error_set: Sequence[FockOperator] | None = None) -> CodeFootprint:
    """Fock support of the codespace and its error images, and how many
    mutually orthogonal error spaces the errors produce.

    Error spaces ``span(E V)`` that overlap are merged; the count is the
    number of merged groups. ``error_set`` defaults to the identity alone.
    """
    v = code.isometry
    images = [v] if not error_set else [e.matrix @ v for e in error_set]
    support = np.zeros(code.dim, dtype=bool)
    spaces = []
    for img in images:
        support |= np.any(np.abs(img) > 1e-12, axis=1)
        q = _orthonormal_range(img)
        if q.shape[1]:
            spaces.append(q)
    parent = list(range(len(spaces)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(spaces)):
        for j in range(i + 1, len(spaces)):
            if np.abs(spaces[i].conj().T @ spaces[j]).max() > 1e-10:
                parent[find(i)] = find(j)
    groups = len({find(i) for i in range(len(spaces))})
    return CodeFootprint(int(support.sum()), groups, len(code.cutoffs))
