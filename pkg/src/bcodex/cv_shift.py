"""Exact phase-space engine for displacement errors.

Quadrature vectors are ordered ``(x_1, p_1, ..., x_n, p_n)``. A displacement
``exp(i v . r)`` commutes with the quadrature combination ``g . r`` iff the
symplectic product ``g^T Omega v`` vanishes, so all detectability questions
reduce to real linear algebra here; no Fock truncation is involved.

Monte Carlo draws come from a Philox generator keyed by the seed whose counter
is set by the block index, so results do not depend on how blocks are spread
over worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
import scipy.linalg
from scipy import special

SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2 * math.pi)
BLOCK = 1 << 16


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_product(u, v, n_modes: int | None = None):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = n_modes or u.shape[-1] // 2
    return u @ symplectic_form(n) @ v


@dataclass(frozen=True)
class SymplecticOp:
    n_modes: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (2 * self.n_modes, 2 * self.n_modes):
            raise ValueError("matrix shape does not match mode count")
        om = symplectic_form(self.n_modes)
        if np.abs(m.T @ om @ m - om).max() > 1e-12:
            raise ValueError("matrix is not symplectic")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "SymplecticOp") -> "SymplecticOp":
        return SymplecticOp(self.n_modes, self.matrix @ other.matrix)

    def inverse(self) -> "SymplecticOp":
        # S^{-1} = -Omega S^T Omega
        om = symplectic_form(self.n_modes)
        return SymplecticOp(self.n_modes, -om @ self.matrix.T @ om)


def csum() -> SymplecticOp:
    """``x_2 -> x_2 + x_1``, ``p_1 -> p_1 - p_2``, other quadratures fixed."""
    return SymplecticOp(2, np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]))


def conjugated_noise_transform(S: SymplecticOp, shifts) -> np.ndarray:
    """Net quadrature shifts after ``S -> shift -> S^{-1}`` (``S^{-1}`` applied to the shifts)."""
    shifts = np.asarray(shifts, dtype=float)
    if shifts.shape[-1] != 2 * S.n_modes:
        raise ValueError("shift vector length does not match mode count")
    return shifts @ S.inverse().matrix.T


def ml_estimate(x_obs):
    """Most likely ``dx_1`` given ``x_obs = dx_2 - dx_1`` for iid Gaussian shifts."""
    return -np.asarray(x_obs) / 2 if np.ndim(x_obs) else -float(x_obs) / 2


# ------------------------------------------------------------ Monte Carlo

@dataclass(frozen=True)
class ShiftMcResult:
    sigma: float
    n_samples: int
    seed: int
    sums: dict                      # raw moment sums, enough to recompute everything
    residual_var_x: float = math.nan
    residual_var_x_stderr: float = math.nan
    residual_var_p: float = math.nan
    residual_var_p_stderr: float = math.nan
    wrap_rate: float = math.nan
    logical_flip_rate: float = math.nan
    logical_flip_stderr: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(block)]))


def _run_blocks(fn, n_samples: int, seed: int, threads: int):
    nblocks = -(-n_samples // BLOCK)
    jobs = [(b, min(BLOCK, n_samples - b * BLOCK)) for b in range(nblocks)]

    def work(job):
        b, size = job
        return fn(_block_rng(seed, b), size)

    if threads <= 1:
        parts = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    total = {}
    for part in parts:  # fixed block order keeps the reduction deterministic
        for k, val in part.items():
            total[k] = total.get(k, 0.0) + val
    return total


def _var_and_stderr(s1, s2, s4, n):
    m1, m2, m4 = s1 / n, s2 / n, s4 / n
    return m2 - m1 ** 2, math.sqrt(max(m4 - m2 ** 2, 0.0) / n)


def gkp_repetition_trial(shifts: np.ndarray) -> dict:
    """Run the GKP-repetition protocol on shift rows ``(dx1, dp1, dx2, dp2)``.

    Returns the net shifts after the CSUM conjugation, the syndromes and the
    residual shifts on the data mode after correction.
    """
    net = conjugated_noise_transform(csum(), shifts)
    x_obs = net[..., 2]
    p_obs = net[..., 3]
    res_x = net[..., 0] - ml_estimate(x_obs)
    res_p = net[..., 1] - p_obs
    return {"net": net, "x_obs": x_obs, "p_obs": p_obs, "residual_x": res_x, "residual_p": res_p}


def gkp_repetition_mc(sigma: float, n_samples: int, seed: int, threads: int = 1) -> ShiftMcResult:
    """Monte Carlo of the CSUM-conjugated GKP-repetition code under iid Gaussian shifts.

    Syndromes are taken unwrapped; ``wrap_rate`` is the fraction of trials
    where either syndrome leaves ``(-sqrt(2 pi)/2, sqrt(2 pi)/2)``.
    """
    if sigma <= 0 or n_samples < 2:
        raise ValueError("need sigma > 0 and at least two samples")

    def block(rng, size):
        trial = gkp_repetition_trial(rng.normal(0.0, sigma, size=(size, 4)))
        rx, rp = trial["residual_x"], trial["residual_p"]
        wrap = (np.abs(trial["x_obs"]) > SQRT_2PI / 2) | (np.abs(trial["p_obs"]) > SQRT_2PI / 2)
        return {"x1": rx.sum(), "x2": (rx ** 2).sum(), "x4": (rx ** 4).sum(),
                "p1": rp.sum(), "p2": (rp ** 2).sum(), "p4": (rp ** 4).sum(),
                "wrap": float(wrap.sum())}

    s = _run_blocks(block, n_samples, seed, threads)
    vx, ex = _var_and_stderr(s["x1"], s["x2"], s["x4"], n_samples)
    vp, ep = _var_and_stderr(s["p1"], s["p2"], s["p4"], n_samples)
    return ShiftMcResult(float(sigma), int(n_samples), int(seed), s, vx, ex, vp, ep,
                         s["wrap"] / n_samples)


def bin_decode(u):
    """Square-GKP decoding of a position shift ``u``.

    Returns ``(syndrome, k, flip)``: the syndrome is ``u`` reduced to
    ``[-sqrt(pi)/2, sqrt(pi)/2)``, correcting by it leaves a shift of
    ``k sqrt(pi)``, and the logical state flips iff ``k`` is odd.
    """
    u = np.asarray(u, dtype=float)
    k = np.floor(u / SQRT_PI + 0.5)
    syndrome = u - k * SQRT_PI
    return syndrome, k.astype(np.int64), (k.astype(np.int64) % 2) == 1


def gkp_flip_probability(sigma: float, tol: float = 1e-16) -> float:
    """``sum_{k odd} P((k - 1/2) sqrt(pi) <= u < (k + 1/2) sqrt(pi))`` for ``u ~ N(0, sigma^2)``."""
    total, k = 0.0, 1
    while True:
        lo = (k - 0.5) * SQRT_PI / (sigma * math.sqrt(2))
        hi = (k + 0.5) * SQRT_PI / (sigma * math.sqrt(2))
        term = special.erfc(lo) - special.erfc(hi)  # two-sided: +k and -k intervals
        total += term
        if special.erfc(hi) < tol:
            return float(total)
        k += 2


def gkp_bin_decoder(sigma: float, n_samples: int, seed: int, threads: int = 1) -> ShiftMcResult:
    """Monte Carlo logical flip rate of the square-GKP binning decoder."""
    if sigma <= 0 or n_samples < 1:
        raise ValueError("need sigma > 0 and at least one sample")

    def block(rng, size):
        u = rng.normal(0.0, sigma, size=size)
        _, _, flip = bin_decode(u)
        return {"flips": float(flip.sum())}

    s = _run_blocks(block, n_samples, seed, threads)
    rate = s["flips"] / n_samples
    return ShiftMcResult(float(sigma), int(n_samples), int(seed), s,
                         logical_flip_rate=rate,
                         logical_flip_stderr=math.sqrt(max(rate * (1 - rate), 0.0) / n_samples))


# -------------------------------------------------------- analog stabilizers

@dataclass(frozen=True)
class NullifierSet:
    n_modes: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2 * self.n_modes:
            raise ValueError("rows must be quadrature coefficient vectors")
        gram = rows @ symplectic_form(self.n_modes) @ rows.T
        if np.abs(gram).max() > 1e-12:
            raise ValueError("nullifiers do not commute")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def logical_basis(self) -> np.ndarray:
        """Directions commuting with every nullifier but outside their span."""
        om = symplectic_form(self.n_modes)
        centralizer = scipy.linalg.null_space(self.rows @ om)  # columns
        # drop the nullifier span from the centralizer
        q_rows = scipy.linalg.orth(self.rows.T)
        proj = centralizer - q_rows @ (q_rows.T @ centralizer)
        return scipy.linalg.orth(proj, rcond=1e-10).T


def four_mode_nullifiers() -> NullifierSet:
    """``x1 - x2``, ``x3 - x4`` and ``p1 + p2 - p3 - p4``."""
    return NullifierSet(4, np.array([
        [1, 0, -1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, -1, 0],
        [0, 1, 0, 1, 0, -1, 0, -1],
    ], dtype=float))


def quadrature_vector(n_modes: int, **coeffs) -> np.ndarray:
    """Build a coefficient vector from keywords like ``x1=1, p2=-1`` (modes 1-based)."""
    v = np.zeros(2 * n_modes)
    for name, c in coeffs.items():
        mode = int(name[1:]) - 1
        v[2 * mode + (name[0] == "p")] = c
    return v


def displacement_detectability(nullifiers: NullifierSet, error, tol: float = 1e-12):
    """Syndrome (symplectic products with every nullifier) of the displacement
    generated by ``error``; detectable iff any entry is nonzero."""
    error = np.asarray(error, dtype=float)
    syndrome = nullifiers.rows @ symplectic_form(nullifiers.n_modes) @ error
    return bool(np.abs(syndrome).max() > tol), syndrome


def logical_action(nullifiers: NullifierSet, error) -> np.ndarray:
    """Symplectic products of ``error`` with the logical directions."""
    return nullifiers.logical_basis() @ symplectic_form(nullifiers.n_modes) @ np.asarray(error, float)


def single_mode_detection_ranks(nullifiers: NullifierSet) -> list[int]:
    """Rank of the syndrome map restricted to each mode's ``(x, p)`` plane.

    Rank 2 means every nonzero displacement on that mode is detected.
    """
    om = symplectic_form(nullifiers.n_modes)
    full = nullifiers.rows @ om
    return [int(np.linalg.matrix_rank(full[:, 2 * m:2 * m + 2], tol=1e-12))
            for m in range(nullifiers.n_modes)]


def undetectable_weight2_directions(nullifiers: NullifierSet, coeffs=(-1.0, 1.0)):
    """Two-quadrature directions with zero syndrome and nonzero logical action."""
    n = 2 * nullifiers.n_modes
    found = []
    for i in range(n):
        for j in range(i + 1, n):
            if i // 2 == j // 2:
                continue
            for ci in coeffs:
                for cj in coeffs:
                    v = np.zeros(n)
                    v[i], v[j] = ci, cj
                    det, _ = displacement_detectability(nullifiers, v)
                    if not det and np.abs(logical_action(nullifiers, v)).max() > 1e-12:
                        found.append(v)
    return found


@dataclass(frozen=True)
class TransversalRecord:
    q: float
    direction: np.ndarray
    syndrome: np.ndarray
    logical_action: np.ndarray
    passes: bool


def transversal_logical_displacement(q: float) -> TransversalRecord:
    """Check ``exp(-i q (p1 + p2))`` on the four-mode code: zero syndrome, logical shift."""
    nul = four_mode_nullifiers()
    v = -q * quadrature_vector(4, p1=1, p2=1)
    det, syn = displacement_detectability(nul, v)
    act = logical_action(nul, v)
    ok = (not det) and (q == 0 or np.abs(act).max() > 1e-12)
    return TransversalRecord(float(q), v, syn, act, bool(ok))


# --------------------------------------------------------------- GKP lattice

@dataclass(frozen=True)
class GkpLattice:
    n_modes: int
    generators: np.ndarray          # rows are displacement vectors
    logical: np.ndarray             # rows: generator / N

    def __post_init__(self):
        gens = np.array(self.generators, dtype=float)
        prods = gens @ symplectic_form(self.n_modes) @ gens.T / (2 * math.pi)
        if np.abs(prods - np.round(prods)).max() > 1e-10:
            raise ValueError("lattice generators do not commute")
        gens.setflags(write=False)
        object.__setattr__(self, "generators", gens)

    def commutation_phases(self) -> np.ndarray:
        return self.generators @ symplectic_form(self.n_modes) @ self.generators.T


def gkp_lattice(N: int = 1, aspect: float = 1.0) -> GkpLattice:
    """Single-mode GKP lattice with ``sqrt(2 pi N)`` spacings, optionally
    rectangular (``aspect`` stretches position and shrinks momentum)."""
    if N < 1 or aspect <= 0:
        raise ValueError("need N >= 1 and aspect > 0")
    s = math.sqrt(2 * math.pi * N)
    gens = np.array([[s * aspect, 0.0], [0.0, s / aspect]])
    return GkpLattice(1, gens, gens / N)
