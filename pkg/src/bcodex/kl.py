"""Knill-Laflamme conditions, detectability tables and cat-code dephasing terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.optimize

from .codes import BosonicCode, cat_code
from .fock_core import FockOperator, standard_operator, total_occupation

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class KLReport:
    labels: tuple[str, ...]
    lam: np.ndarray               # (m, m) Hermitian
    pair_defects: np.ndarray      # (m, m)
    detect_defects: np.ndarray    # (m,) defect of P E P against c P
    tol: float

    @property
    def defect(self) -> float:
        return float(self.pair_defects.max(initial=0.0))

    @property
    def correctable(self) -> bool:
        return self.defect < self.tol

    @property
    def detectable(self) -> dict[str, bool]:
        return {lab: bool(d < self.tol) for lab, d in zip(self.labels, self.detect_defects)}

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "lambda_re": self.lam.real.tolist(),
            "lambda_im": self.lam.imag.tolist(),
            "pair_defects": self.pair_defects.tolist(),
            "detect_defects": self.detect_defects.tolist(),
            "defect": self.defect,
            "tol": self.tol,
            "correctable": self.correctable,
            "detectable": self.detectable,
        }


def _proportionality_defect(v: np.ndarray, block: np.ndarray) -> tuple[complex, float]:
    """Scalar ``c = Tr(block)/d`` and ``max|V (block - c I) V^dag|`` in the full space."""
    d = block.shape[0]
    c = np.trace(block) / d
    resid = v @ (block - c * np.eye(d)) @ v.conj().T
    return c, float(np.abs(resid).max())


def kl_matrix(code: BosonicCode, errors: Sequence[FockOperator],
              labels: Sequence[str] | None = None, tol: float = DEFAULT_TOL) -> KLReport:
    """Evaluate ``P E_i^dag E_j P = lambda_ij P`` over all error pairs.

    Defects are max-norms of the full-space residual operator, so they do not
    depend on the choice of codeword basis.
    """
    v = code.isometry
    labels = tuple(labels) if labels is not None else tuple(f"E{k}" for k in range(len(errors)))
    if len(labels) != len(errors):
        raise ValueError("one label per error required")
    for e in errors:
        if e.cutoffs != code.cutoffs:
            raise ValueError("error and code cutoffs differ")
    images = [e.matrix @ v for e in errors]
    m = len(errors)
    lam = np.zeros((m, m), dtype=complex)
    pair = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            c, dft = _proportionality_defect(v, images[i].conj().T @ images[j])
            lam[i, j], lam[j, i] = c, np.conj(c)
            pair[i, j] = pair[j, i] = dft
    detect = np.array([_proportionality_defect(v, v.conj().T @ img)[1] for img in images])
    return KLReport(labels, lam, pair, detect, tol)


def _mode_ops(kind: str, cutoffs, order: int):
    ops = []
    for mode in range(len(cutoffs)):
        base = standard_operator(kind, cutoffs, mode).matrix
        power = np.linalg.matrix_power(base, order)
        suffix = f"[{mode}]" if len(cutoffs) > 1 else ""
        ops.append((f"{kind}^{order}{suffix}", FockOperator(cutoffs, power)))
    return ops


def error_family(family: str, cutoffs, max_order: int = 1, grid: Sequence[float] = ()):
    """Labeled error operators for the named family.

    ``loss_powers``/``gain_powers``/``dephasing_powers`` give ``a^k``, ``a^dag^k``,
    ``n^k`` on every mode for ``k = 1..max_order``; ``phasor_shifts`` gives
    ``E_l`` for ``0 < |l| <= max_order`` and ``rotations`` gives ``e^{i theta n}``
    for each ``theta`` in ``grid``.
    """
    cutoffs = tuple(cutoffs)
    kinds = {"loss_powers": "lower", "gain_powers": "raise", "dephasing_powers": "number"}
    out = []
    if family in kinds:
        for k in range(1, max_order + 1):
            out += _mode_ops(kinds[family], cutoffs, k)
    elif family == "phasor_shifts":
        for ell in range(1, max_order + 1):
            for s in (ell, -ell):
                for mode in range(len(cutoffs)):
                    op = standard_operator("phasor", cutoffs, mode, s)
                    suffix = f"[{mode}]" if len(cutoffs) > 1 else ""
                    out.append((f"E_{s}{suffix}", op))
    elif family == "rotations":
        for theta in grid:
            out.append((f"R({theta:.6g})", _total_rotation(cutoffs, theta)))
    else:
        raise ValueError(f"unknown error family {family!r}")
    return out


def _total_rotation(cutoffs, theta: float) -> FockOperator:
    n = total_occupation(cutoffs)
    return FockOperator(cutoffs, np.diag(np.exp(1j * theta * n)), True)


@dataclass(frozen=True)
class DetectabilityRow:
    label: str
    detectable: bool
    defect: float


def detectability_report(code: BosonicCode, family: str, max_order: int = 1,
                         grid: Sequence[float] = (), tol: float = DEFAULT_TOL):
    """Per-error detection verdicts plus the KL report for ``{I} + family``."""
    labeled = error_family(family, code.cutoffs, max_order, grid)
    ident = FockOperator(code.cutoffs, np.eye(code.dim))
    report = kl_matrix(code, [ident] + [op for _, op in labeled],
                       ["I"] + [lab for lab, _ in labeled], tol)
    rows = [DetectabilityRow(lab, bool(d < tol), float(d))
            for lab, d in zip(report.labels[1:], report.detect_defects[1:])]
    return rows, report


# ------------------------------------------------------------ cat dephasing

def cat_zterm(N: int, alpha: float, cutoff: int, ell: int = 1) -> float:
    """``(<+|n^ell|+> - <-|n^ell|->)/2`` for the cat code, ``|+>`` the ``0 mod 2N`` class."""
    plus, minus = cat_code(N, alpha, cutoff).dual_words()
    n = np.arange(cutoff, dtype=float) ** ell
    return 0.5 * float(np.sum(n * (np.abs(plus.amplitudes) ** 2 - np.abs(minus.amplitudes) ** 2)))


def cat_diagonal_term(N: int, alpha: float, cutoff: int, ell: int = 1) -> float:
    """Average ``(<+|n^ell|+> + <-|n^ell|->)/2``, the coefficient of ``P``."""
    plus, minus = cat_code(N, alpha, cutoff).dual_words()
    n = np.arange(cutoff, dtype=float) ** ell
    return 0.5 * float(np.sum(n * (np.abs(plus.amplitudes) ** 2 + np.abs(minus.amplitudes) ** 2)))


def cat_sweet_spot(N: int, ell: int, bracket: tuple[float, float], cutoff: int,
                   xtol: float = 1e-14) -> float | None:
    """Root of ``cat_zterm`` in ``bracket``, or None without a sign change."""
    lo, hi = bracket
    f_lo, f_hi = cat_zterm(N, lo, cutoff, ell), cat_zterm(N, hi, cutoff, ell)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if math.copysign(1, f_lo) == math.copysign(1, f_hi):
        return None
    return scipy.optimize.brentq(lambda a: cat_zterm(N, a, cutoff, ell), lo, hi,
                                 xtol=xtol, rtol=4 * np.finfo(float).eps)


def scan_sweet_spots(N: int, ell: int, alphas: Sequence[float], cutoff: int) -> list[float]:
    """Refine every sign change of ``cat_zterm`` along a dense ``alphas`` grid."""
    vals = [cat_zterm(N, a, cutoff, ell) for a in alphas]
    roots = []
    for a0, a1, v0, v1 in zip(alphas[:-1], alphas[1:], vals[:-1], vals[1:]):
        if v0 * v1 < 0:
            roots.append(cat_sweet_spot(N, ell, (a0, a1), cutoff))
    return roots
