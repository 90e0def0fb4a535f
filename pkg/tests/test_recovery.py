import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcodex.channels import KrausChannel, identity_channel, loss_channel
from bcodex.codes import binomial_code, cat_code, custom_code, dual_rail_code, trivial_code
from bcodex.fock_core import FockVector, identity, standard_operator
from bcodex.recovery import (
    RecoveryError,
    build_projective_recovery,
    choi_matrix,
    entanglement_fidelity_from_choi,
    modular_number_projectors,
    noise_sweep,
    process_fidelity,
    syndrome_probabilities,
)


def test_modular_projectors_partition():
    assert np.array_equal(modular_number_projectors(1, 5)[0], np.eye(5))
    projs = modular_number_projectors(3, (4, 4))
    assert np.array_equal(sum(projs), np.eye(16))
    for p in projs:
        assert np.array_equal(p @ p, p)


def test_binomial_syndromes():
    code = binomial_code(2, 1, 10)
    for w in code.codewords:
        assert np.allclose(syndrome_probabilities(w.amplitudes, 2, 10), [1, 0])
    hit = standard_operator("lower", 10).matrix @ code.codewords[0].amplitudes
    assert np.allclose(syndrome_probabilities(hit, 2, 10), [0, 1])


def _apply(kraus, rho):
    return np.einsum("kij,jl,kml->im", kraus, rho, kraus.conj())


@pytest.mark.parametrize("code", [binomial_code(2, 1, 12), cat_code(2, 2.0, 40), trivial_code(4)])
def test_recovery_idempotent_on_codespace(code):
    rec = build_projective_recovery(code, [identity(code.cutoffs)])
    assert rec.completeness_defect < 1e-8
    v = code.isometry
    rng = np.random.default_rng(1)
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi /= np.linalg.norm(psi)
    rho = np.outer(v @ psi, (v @ psi).conj())
    assert np.abs(_apply(rec.kraus, rho) - rho).max() < 1e-9


def test_binomial_single_loss_is_undone():
    code = binomial_code(2, 1, 20)
    rec = build_projective_recovery(code, [identity(20), standard_operator("lower", 20)])
    v = code.isometry
    a = standard_operator("lower", 20).matrix
    for psi in ([1, 0], [0, 1], [1 / math.sqrt(2), 1j / math.sqrt(2)], [0.6, 0.8]):
        psi = np.asarray(psi, dtype=complex)
        hit = a @ v @ psi
        hit /= np.linalg.norm(hit)
        out = _apply(rec.kraus, np.outer(hit, hit.conj()))
        target = v @ psi
        assert abs(np.vdot(target, out @ target).real - 1) < 1e-9


def test_recovery_labels_and_failure_elements():
    code = binomial_code(2, 1, 12)
    rec = build_projective_recovery(code, [identity(12), standard_operator("lower", 12)])
    assert rec.built_from[:2] == ("space0", "space1")
    assert rec.failure_weight_labels == 12 - 4


def test_dual_rail_single_mode_loss_refused():
    code = dual_rail_code()
    with pytest.raises(RecoveryError):
        build_projective_recovery(code, [identity((3, 3)), standard_operator("lower", (3, 3), 1)])


def test_identity_channel_fidelity():
    code = cat_code(1, 2.0, 40)
    assert 1 - process_fidelity(code, identity_channel(40)) < 1e-10


def test_depolarizing_logical_channel():
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    ch = KrausChannel((2,), np.array(paulis) / 2)
    f = process_fidelity(trivial_code(2), ch)
    assert f == pytest.approx(1 / 4, abs=1e-15)


def test_choi_overlap_matches_trace_formula():
    code = binomial_code(2, 1, 20)
    ch = loss_channel(0.05, 20)
    rec = build_projective_recovery(code, [identity(20), standard_operator("lower", 20)])
    choi = choi_matrix(code, ch, rec)
    assert np.trace(choi).real == pytest.approx(1.0, abs=1e-8)
    assert entanglement_fidelity_from_choi(choi, 2) == pytest.approx(process_fidelity(code, ch, rec), abs=1e-12)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
@settings(max_examples=15, deadline=None)
def test_fidelity_invariant_under_logical_rotation(a, b, c):
    code = binomial_code(2, 1, 16)
    u = np.array([[np.cos(a), -np.exp(1j * c) * np.sin(a)],
                  [np.exp(1j * b) * np.sin(a), np.exp(1j * (b + c)) * np.cos(a)]])
    rotated = custom_code([FockVector((16,), col) for col in (code.isometry @ u).T])
    ch = loss_channel(0.1, 16)
    f0 = process_fidelity(code, ch)
    f1 = process_fidelity(rotated, ch)
    assert abs(f0 - f1) < 1e-10


# ------------------------------------------------------------------ sweeps

def test_sweep_zero_row_is_nan_gain():
    rows = noise_sweep(binomial_code(2, 1, 20), "loss", [0.0, 0.01])
    assert rows[0].p_logical == 0 and rows[0].p_physical == 0
    assert math.isnan(rows[0].gain)
    assert rows[1].gain == pytest.approx(rows[1].p_physical / rows[1].p_logical)


def test_binomial_beats_break_even_under_small_loss():
    code = binomial_code(2, 1, 20)
    errs = [identity(20), standard_operator("lower", 20)]
    grid = [1e-3, 3e-3, 1e-2, 3e-2]
    rows = noise_sweep(code, "loss", grid, errs)
    assert all(r.gain > 1 for r in rows)
    p = [r.p_logical for r in rows]
    assert all(b > a for a, b in zip(p, p[1:]))


def test_sweep_monotone_spot_check_with_more_kraus():
    # spot-check three points against a channel built with extra Kraus terms
    code = binomial_code(2, 1, 20)
    errs = [identity(20), standard_operator("lower", 20)]
    rec = build_projective_recovery(code, errs)
    grid = [2e-3, 5e-3, 2e-2]
    rows = noise_sweep(code, "loss", grid, errs)
    for chi, row in zip(grid, rows):
        ref = loss_channel(chi, 20, ell_max=12)
        assert 1 - process_fidelity(code, ref, rec) == pytest.approx(row.p_logical, rel=1e-6, abs=1e-15)


def test_sweep_thread_count_does_not_change_rows():
    code = cat_code(1, 1.5, 30)
    grid = [0.01, 0.02, 0.05, 0.1]
    assert noise_sweep(code, "dephasing", grid, threads=1) == noise_sweep(code, "dephasing", grid, threads=3)


def test_sweep_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        noise_sweep(trivial_code(4), "loss", [0.2, 0.1])


def test_sweep_displacement_channel():
    rows = noise_sweep(trivial_code(30), "displacement", [0.05, 0.1])
    assert rows[0].p_logical == pytest.approx(rows[0].p_physical)
    assert rows[1].p_physical > rows[0].p_physical
