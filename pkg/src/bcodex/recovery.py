"""Syndrome projectors, projective recovery, process fidelity and noise sweeps."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import KrausChannel, channel_from_spec
from .codes import BosonicCode, trivial_code
from .fock_core import FockOperator, _as_cutoffs, total_occupation
from .kl import DEFAULT_TOL, kl_matrix

ZERO_INFIDELITY = 1e-14


class RecoveryError(ValueError):
    pass


def modular_number_projectors(N: int, cutoffs) -> list[np.ndarray]:
    """Diagonal projectors onto total occupation ``= j mod N``, ``j = 0..N-1``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = total_occupation(_as_cutoffs(cutoffs))
    return [np.diag((n % N == j).astype(float)) for j in range(N)]


def syndrome_probabilities(state_amps: np.ndarray, N: int, cutoffs) -> np.ndarray:
    n = total_occupation(_as_cutoffs(cutoffs))
    w = np.abs(state_amps) ** 2
    return np.array([w[n % N == j].sum() for j in range(N)]) / w.sum()


@dataclass(frozen=True)
class RecoveryMap:
    kraus: np.ndarray                  # (k, d, d)
    built_from: tuple[str, ...]        # one label per Kraus element
    completeness_defect: float

    @property
    def failure_weight_labels(self) -> int:
        return sum(lab == "failure" for lab in self.built_from)

    def as_channel(self, cutoffs) -> KrausChannel:
        return KrausChannel(cutoffs, self.kraus, "recovery")


def build_projective_recovery(code: BosonicCode, errors: Sequence[FockOperator],
                              labels: Sequence[str] | None = None,
                              tol: float = DEFAULT_TOL) -> RecoveryMap:
    """Projective recovery for a KL-correctable error set.

    The error set is diagonalized through its KL matrix; each resulting error
    space is mapped back to the codespace by its own isometry, and everything
    outside the error spaces is sent to ``|0_L>`` and labeled ``failure``.
    """
    report = kl_matrix(code, errors, labels, tol)
    if not report.correctable:
        raise RecoveryError(f"error set is not correctable: KL defect {report.defect:.3e} >= {tol:g}")
    v = code.isometry
    d = code.logical_dim
    evals, u = np.linalg.eigh(report.lam)
    blocks, block_labels = [], []
    for k in range(len(evals)):
        if evals[k] <= tol:
            continue
        f = sum(u[i, k] * errors[i].matrix for i in range(len(errors)))
        blocks.append(f @ v / math.sqrt(evals[k]))
        block_labels.append(f"space{len(blocks) - 1}")
    w = np.concatenate(blocks, axis=1)
    # symmetric orthonormalization absorbs residual non-orthogonality of approximate codes
    s_vals, s_vecs = np.linalg.eigh(w.conj().T @ w)
    w = w @ (s_vecs @ np.diag(s_vals ** -0.5) @ s_vecs.conj().T)
    kraus, built = [], []
    for b, lab in enumerate(block_labels):
        wb = w[:, b * d:(b + 1) * d]
        kraus.append(v @ wb.conj().T)
        built.append(lab)
    rest = np.eye(code.dim) - w @ w.conj().T
    r_vals, r_vecs = np.linalg.eigh(rest)
    for k in np.nonzero(r_vals > 0.5)[0]:
        kraus.append(np.outer(v[:, 0], r_vecs[:, k].conj()))
        built.append("failure")
    kraus = np.array(kraus)
    total = np.einsum("kji,kjl->il", kraus.conj(), kraus)
    defect = float(np.abs(total - np.eye(code.dim)).max())
    if defect > 1e-8:
        raise RecoveryError(f"recovery completeness defect {defect:.2e}")
    return RecoveryMap(kraus, tuple(built), defect)


def logical_kraus(code: BosonicCode, channel: KrausChannel,
                  recovery: RecoveryMap | None = None) -> np.ndarray:
    """Kraus operators ``V^dag R_r K_k V`` of the decoded logical channel."""
    v = code.isometry
    if channel.cutoffs != code.cutoffs:
        raise ValueError("channel and code cutoffs differ")
    noisy = np.einsum("kij,jb->kib", channel.kraus, v)
    if recovery is None:
        return np.einsum("ia,kib->kab", v.conj(), noisy)
    dec = np.einsum("ia,rij->raj", v.conj(), recovery.kraus)
    return np.einsum("raj,kjb->rkab", dec, noisy).reshape(-1, code.logical_dim, code.logical_dim)


def process_fidelity(code: BosonicCode, channel: KrausChannel,
                     recovery: RecoveryMap | None = None) -> float:
    """Entanglement fidelity ``sum |Tr A|^2 / d^2`` of the logical channel."""
    ops = logical_kraus(code, channel, recovery)
    d = code.logical_dim
    f = float(np.sum(np.abs(np.trace(ops, axis1=1, axis2=2)) ** 2) / d ** 2)
    return min(max(f, 0.0), 1.0)


def choi_matrix(code: BosonicCode, channel: KrausChannel,
                recovery: RecoveryMap | None = None) -> np.ndarray:
    """Normalized Choi matrix of the logical channel (trace one when trace preserving)."""
    ops = logical_kraus(code, channel, recovery)
    d = code.logical_dim
    vecs = ops.transpose(0, 2, 1).reshape(len(ops), -1) / math.sqrt(d)  # |A> = sum_i |i> A|i>
    return np.einsum("ka,kb->ab", vecs, vecs.conj())


def entanglement_fidelity_from_choi(choi: np.ndarray, d: int) -> float:
    phi = np.eye(d).reshape(-1) / math.sqrt(d)
    return float(np.vdot(phi, choi @ phi).real)


@dataclass(frozen=True)
class SweepRow:
    chi: float
    p_logical: float
    p_physical: float
    gain: float


def _infidelity(f: float) -> float:
    p = 1.0 - f
    return 0.0 if p < ZERO_INFIDELITY else p


def _make_row(chi, p_log, p_phys) -> SweepRow:
    gain = p_phys / p_log if p_log > 0 else math.nan
    return SweepRow(float(chi), p_log, p_phys, gain)


def default_threads() -> int:
    env = os.environ.get("BCODEX_THREADS")
    return max(1, int(env)) if env else 1


def noise_sweep(code: BosonicCode, channel_kind: str, chi_grid: Sequence[float],
                recovery_errors: Sequence[FockOperator] | None = None,
                channel_options: dict | None = None, threads: int | None = None,
                tol: float = DEFAULT_TOL) -> list[SweepRow]:
    """Logical versus unencoded infidelity along a noise-strength grid.

    ``p_physical`` is the infidelity of the trivial ``{|0>, |1>}`` encoding
    under the same channel without recovery; ``recovery_errors`` selects the
    projective recovery for the code (None decodes by compression only).
    """
    chi_grid = [float(c) for c in chi_grid]
    if any(b < a for a, b in zip(chi_grid, chi_grid[1:])):
        raise ValueError("chi grid must be sorted")
    if len(code.cutoffs) != 1:
        raise ValueError("noise sweeps use single-mode codes")
    cutoff = code.cutoffs[0]
    recovery = build_projective_recovery(code, recovery_errors, tol=tol) if recovery_errors else None
    reference = trivial_code(cutoff)
    opts = dict(channel_options or {})

    def row(chi: float) -> SweepRow:
        spec = {"kind": channel_kind, **opts}
        spec["sigma" if channel_kind == "displacement" else "chi"] = chi
        ch = channel_from_spec(spec, cutoff)
        p_log = _infidelity(process_fidelity(code, ch, recovery))
        p_phys = _infidelity(process_fidelity(reference, ch, None))
        return _make_row(chi, p_log, p_phys)

    workers = threads or default_threads()
    if workers == 1:
        return [row(c) for c in chi_grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(row, chi_grid))
