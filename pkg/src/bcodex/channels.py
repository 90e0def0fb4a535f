"""Kraus-operator noise channels: loss, dephasing, displacement noise, amplification.

Loss uses transmissivity ``exp(-chi)``. Every channel is certified on
construction against the per-level completeness identity
``sum_l K_l^dag K_l = I`` on the levels below ``cutoff - ell_max``; a defect
above the family's tolerance raises :class:`CompletenessError` and nothing is
renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .fock_core import (
    DensityOperator,
    FockOperator,
    _as_cutoffs,
    displacement,
    lower_block_mask,
)

TAIL = 1e-12
PRUNE = 1e-14


class CompletenessError(ValueError):
    pass


@dataclass(frozen=True)
class KrausChannel:
    cutoffs: tuple[int, ...]
    kraus: np.ndarray  # (k, d, d)
    kind: str = "custom"
    chi: float = 0.0
    safe_levels: int | None = None
    completeness_defect: float = field(init=False)

    def __post_init__(self):
        cutoffs = _as_cutoffs(self.cutoffs)
        ks = np.array(self.kraus, dtype=complex, copy=True)
        if ks.ndim == 2:
            ks = ks[None]
        d = math.prod(cutoffs)
        if ks.shape[1:] != (d, d):
            raise ValueError(f"Kraus shape {ks.shape[1:]} does not match cutoffs {cutoffs}")
        ks.setflags(write=False)
        object.__setattr__(self, "cutoffs", cutoffs)
        object.__setattr__(self, "kraus", ks)
        safe = min(cutoffs) if self.safe_levels is None else int(self.safe_levels)
        object.__setattr__(self, "safe_levels", safe)
        object.__setattr__(self, "completeness_defect", completeness_defect(ks, cutoffs, safe))

    @classmethod
    def from_operators(cls, ops: Sequence[FockOperator], kind="custom", chi=0.0, safe_levels=None):
        return cls(ops[0].cutoffs, np.stack([o.matrix for o in ops]), kind, chi, safe_levels)

    @property
    def operators(self) -> list[FockOperator]:
        return [FockOperator(self.cutoffs, k) for k in self.kraus]

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("kij,jl,kml->im", self.kraus, rho, self.kraus.conj(), optimize=True)


def completeness_defect(kraus: np.ndarray, cutoffs, safe_levels: int) -> float:
    """``max|sum K^dag K - I|`` on basis states with every mode below ``safe_levels``."""
    s = np.einsum("kji,kjl->il", kraus.conj(), kraus)
    keep = lower_block_mask(cutoffs, max(min(cutoffs) - safe_levels, 0))
    if not keep.any():
        return 0.0
    s = s[np.ix_(keep, keep)]
    return float(np.abs(s - np.eye(s.shape[0])).max())


def _self_consistent_ell_max(cutoff: int, tail) -> int:
    """Smallest ``l`` with ``tail(n, l) < TAIL`` for all ``n < cutoff - l``."""
    for ell in range(cutoff):
        ns = np.arange(cutoff - ell)
        if ns.size == 0 or np.max(tail(ns, ell)) < TAIL:
            return ell
    return cutoff - 1


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1)


def _certified(kraus, cutoff, kind, chi, ell_max, tol) -> KrausChannel:
    ch = KrausChannel((cutoff,), kraus, kind, chi, cutoff - ell_max)
    if ch.completeness_defect > tol:
        raise CompletenessError(
            f"{kind} channel: completeness defect {ch.completeness_defect:.2e} > {tol:g} "
            f"on levels < {cutoff - ell_max}")
    return ch


def loss_channel(chi: float, cutoff: int, ell_max: int | None = None) -> KrausChannel:
    """Pure loss, ``K_l = sqrt((1-e^-chi)^l / l!) e^{-chi n/2} a^l``."""
    if chi < 0:
        raise ValueError("chi must be >= 0")
    gamma = -math.expm1(-chi)
    if ell_max is None:
        ell_max = 0 if chi == 0 else _self_consistent_ell_max(
            cutoff, lambda n, ell: stats.binom.sf(ell, n, gamma))
    n = np.arange(cutoff)
    damp = np.diag(np.exp(-chi * n / 2))
    a = _ladder(cutoff)
    ks, a_pow = [], np.eye(cutoff)
    for ell in range(ell_max + 1):
        coef = math.sqrt(gamma ** ell / math.factorial(ell))
        ks.append(coef * damp @ a_pow)
        a_pow = a_pow @ a
    return _certified(np.array(ks), cutoff, "loss", chi, ell_max, 1e-8)


def dephasing_channel(chi: float, cutoff: int, ell_max: int | None = None) -> KrausChannel:
    """Dephasing, ``K_l = sqrt(chi^l / l!) e^{-chi n^2/2} n^l``."""
    if chi < 0:
        raise ValueError("chi must be >= 0")
    if ell_max is None:
        ell_max = 0 if chi == 0 else _self_consistent_ell_max(
            cutoff, lambda n, ell: stats.poisson.sf(ell, chi * n.astype(float) ** 2))
    n = np.arange(cutoff, dtype=float)
    ks = []
    with np.errstate(divide="ignore"):
        log_rate = np.log(chi * n ** 2) if chi > 0 else np.full(cutoff, -np.inf)
    for ell in range(ell_max + 1):
        if ell == 0:
            diag = np.exp(-0.5 * chi * n ** 2)
        else:
            diag = np.exp(0.5 * (ell * log_rate - math.lgamma(ell + 1) - chi * n ** 2))
        ks.append(np.diag(diag))
    return _certified(np.array(ks), cutoff, "dephasing", chi, ell_max, 1e-8)


def amplification_channel(chi: float, cutoff: int, ell_max: int | None = None) -> KrausChannel:
    """Quantum-limited amplifier with gain ``G = e^chi``.

    ``K_l = sqrt((1 - 1/G)^l / l!) G^{-1/2} a^dag^l G^{-n/2}``; the per-level
    identity is the negative-binomial sum.
    """
    if chi < 0:
        raise ValueError("chi must be >= 0")
    x = -math.expm1(-chi)  # 1 - 1/G
    if ell_max is None:
        ell_max = 0 if chi == 0 else _self_consistent_ell_max(
            cutoff, lambda n, ell: stats.nbinom.sf(ell, n + 1, 1 - x))
    n = np.arange(cutoff)
    damp = np.diag(np.exp(-chi * (n + 1) / 2))
    ad = _ladder(cutoff).T
    ks, ad_pow = [], np.eye(cutoff)
    for ell in range(ell_max + 1):
        ks.append(math.sqrt(x ** ell / math.factorial(ell)) * ad_pow @ damp)
        ad_pow = ad @ ad_pow
    return _certified(np.array(ks), cutoff, "amplification", chi, ell_max, 1e-6)


def displacement_noise_channel(sigma: float, cutoff: int, quadrature_nodes: int = 9) -> KrausChannel:
    """Isotropic Gaussian displacement noise with per-quadrature variance ``sigma^2``.

    The shift distribution is discretized by a tensor Gauss-Hermite rule, so
    the Kraus set ``sqrt(w_i w_j) D(q_i, q_j)`` is deterministic.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return KrausChannel((cutoff,), np.eye(cutoff)[None], "displacement", 0.0)
    nodes, weights = np.polynomial.hermite_e.hermegauss(quadrature_nodes)
    weights = weights / weights.sum()
    ks = []
    for q1, w1 in zip(nodes, weights):
        for q2, w2 in zip(nodes, weights):
            ks.append(math.sqrt(w1 * w2) * displacement(sigma * q1, sigma * q2, cutoff).matrix)
    ch = KrausChannel((cutoff,), np.array(ks), "displacement", sigma)
    if ch.completeness_defect > 1e-6:
        raise CompletenessError(f"displacement channel defect {ch.completeness_defect:.2e} > 1e-6")
    return ch


def apply_channel(channel: KrausChannel, rho: DensityOperator) -> DensityOperator:
    if tuple(rho.cutoffs) != channel.cutoffs:
        raise ValueError("channel and state cutoffs differ")
    out = channel.apply_matrix(rho.matrix)
    return _density_unchecked(rho.cutoffs, 0.5 * (out + out.conj().T))


def _density_unchecked(cutoffs, matrix) -> DensityOperator:
    # channel outputs may lose trace to truncation; validation tolerances do not apply
    obj = object.__new__(DensityOperator)
    m = np.array(matrix, dtype=complex)
    m.setflags(write=False)
    object.__setattr__(obj, "cutoffs", tuple(cutoffs))
    object.__setattr__(obj, "matrix", m)
    return obj


def compose(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Channel ``a o b`` (``b`` acts first)."""
    if a.cutoffs != b.cutoffs:
        raise ValueError("cutoffs differ")
    prods = np.einsum("aij,bjk->abik", a.kraus, b.kraus).reshape(-1, a.dim, a.dim)
    weight = np.einsum("kij,kij->k", prods.conj(), prods).real
    prods = prods[weight > PRUNE]
    return KrausChannel(a.cutoffs, prods, f"{a.kind}*{b.kind}", a.chi + b.chi,
                        min(a.safe_levels, b.safe_levels))


def identity_channel(cutoffs) -> KrausChannel:
    cutoffs = _as_cutoffs(cutoffs)
    return KrausChannel(cutoffs, np.eye(math.prod(cutoffs))[None], "identity", 0.0)


CHANNEL_KINDS = {
    "loss": loss_channel,
    "dephasing": dephasing_channel,
    "amplification": amplification_channel,
}


def channel_from_spec(spec: dict, cutoff: int) -> KrausChannel:
    """Build a channel from ``{"kind": "loss", "chi": 0.01, "ell_max": 4}``-style specs."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "displacement":
        sigma = spec.pop("sigma", spec.pop("chi", None))
        nodes = spec.pop("quadrature_nodes", 9)
        if spec or sigma is None:
            raise ValueError(f"bad displacement channel spec keys {sorted(spec)}")
        return displacement_noise_channel(float(sigma), cutoff, int(nodes))
    if kind == "identity":
        if spec:
            raise ValueError(f"identity channel takes no keys, got {sorted(spec)}")
        return identity_channel((cutoff,))
    if kind not in CHANNEL_KINDS:
        raise ValueError(f"unknown channel kind {kind!r}")
    chi = spec.pop("chi", None)
    ell_max = spec.pop("ell_max", None)
    if spec or chi is None:
        raise ValueError(f"bad {kind} channel spec, unknown keys {sorted(spec)}")
    return CHANNEL_KINDS[kind](float(chi), cutoff, None if ell_max is None else int(ell_max))
