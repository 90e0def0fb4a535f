"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (with wall time) straight to
the terminal, so ``pytest tests/test_acceptance.py`` doubles as a report.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import integrate

from bcodex.channels import completeness_defect, dephasing_channel, loss_channel
from bcodex.cli import main
from bcodex.codes import binomial_code, code_footprint, number_phase_code
from bcodex.cv_shift import (
    SQRT_PI,
    bin_decode,
    displacement_detectability,
    four_mode_nullifiers,
    gkp_bin_decoder,
    gkp_repetition_mc,
    gkp_repetition_trial,
    logical_action,
    ml_estimate,
    quadrature_vector,
    single_mode_detection_ranks,
    transversal_logical_displacement,
)
from bcodex.fock_core import (
    canonical_commutator,
    exact_commutator_trace,
    identity,
    moment,
    phasor_completeness,
    standard_operator,
)
from bcodex.kl import cat_zterm, detectability_report, kl_matrix
from bcodex.recovery import noise_sweep


@contextmanager
def criterion(request, number, title, budget):
    """Run a criterion body, time it against ``budget`` seconds and print the verdict."""
    capman = request.config.pluginmanager.getplugin("capturemanager")
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        in_time = budget is None or elapsed < budget
        verdict = "PASS" if ok and in_time else "FAIL"
        limit = "free" if budget is None else f"< {budget:g} s"
        with capman.global_and_fixture_disabled():
            print(f"\n[{verdict}] criterion {number:2d}: {title} ({elapsed:.3f} s, budget {limit})")
    assert in_time, f"criterion {number} took {elapsed:.3f} s, budget {budget} s"


def test_c01_repetition_variance_halving(request):
    with criterion(request, 1, "GKP repetition residual variances", 5):
        r = gkp_repetition_mc(0.1, 100_000, seed=2024)
        assert abs(r.residual_var_x - 0.005) < 3 * r.residual_var_x_stderr
        assert abs(r.residual_var_p - 0.01) < 3 * r.residual_var_p_stderr
        shifts = np.random.default_rng(5).normal(0, 0.1, size=(1000, 4))
        t = gkp_repetition_trial(shifts)
        # the engine subtracts the estimate from the shifted quadratures, so the
        # identities hold to a few ulps of the 0.1-sized shifts
        assert np.abs(t["residual_x"] - (shifts[:, 0] + shifts[:, 2]) / 2).max() < 1e-16
        assert np.abs(t["residual_p"] - shifts[:, 1]).max() < 1e-16


def test_c02_ml_estimator(request):
    with criterion(request, 2, "ML shift estimate against grid argmin", 1):
        grid = np.arange(-3.0, 3.0, 1e-4)
        for x_obs in np.random.default_rng(17).uniform(-2, 2, size=20):
            # shifts (d1, x_obs + d1) with equal Gaussian weights
            brute = grid[np.argmin(grid ** 2 + (x_obs + grid) ** 2)]
            assert abs(brute - ml_estimate(x_obs)) <= 1e-4


def test_c03_binomial_kl_exact(request):
    with criterion(request, 3, "binomial(2,1) corrects single loss", 1):
        code = binomial_code(2, 1, 20)
        rep = kl_matrix(code, [identity(20), standard_operator("lower", 20)], ["I", "a"])
        assert rep.defect < 1e-10
        for w in code.codewords:
            # 2 up to float rounding of 0*|.|^2 + 4*|.|^2 sums
            assert moment(w, 1) == pytest.approx(2.0, abs=4e-15)


def test_c04_second_order_protection(request):
    with criterion(request, 4, "log-log infidelity slope under loss", 30):
        code = binomial_code(2, 1, 20)
        grid = list(np.geomspace(1e-3, 1e-2, 5))
        rows = noise_sweep(code, "loss", grid, [identity(20), standard_operator("lower", 20)])
        slope = np.polyfit(np.log(grid), np.log([r.p_logical for r in rows]), 1)[0]
        assert 1.9 <= slope <= 2.3, slope


def test_c05_kraus_completeness(request):
    with criterion(request, 5, "loss and dephasing Kraus completeness", 5):
        cutoff = 40
        n = np.arange(cutoff)
        for chi in (0.01, 0.1, 1.0):
            eta = math.exp(-chi)
            loss = loss_channel(chi, cutoff)
            deph = dephasing_channel(chi, cutoff)
            for ch in (loss, deph):
                assert completeness_defect(ch.kraus, (cutoff,), ch.safe_levels) < 1e-8
            # per-level oracles on the safe block
            for level in range(loss.safe_levels):
                rho = np.zeros((cutoff, cutoff))
                rho[level, level] = 1
                out = np.diag(loss.apply_matrix(rho)).real
                k = np.arange(level + 1)
                ref = np.array([math.comb(level, j) for j in k]) * eta ** k * (1 - eta) ** (level - k)
                assert np.abs(out[:level + 1] - ref).max() < 1e-8
            for level in range(deph.safe_levels):
                rho = np.zeros((cutoff, cutoff))
                rho[level, level] = 1
                assert np.abs(deph.apply_matrix(rho) - rho).max() < 1e-8
            assert np.all(n[: deph.safe_levels] < cutoff)


def test_c06_cat_dephasing_suppression(request):
    with criterion(request, 6, "cat Z-term decays exponentially in alpha^2", 5):
        alphas = np.linspace(1.0, 2.5, 16)
        logc = np.log([abs(cat_zterm(1, a, 60)) for a in alphas])
        slope, icpt = np.polyfit(alphas ** 2, logc, 1)
        pred = slope * alphas ** 2 + icpt
        r2 = 1 - np.sum((logc - pred) ** 2) / np.sum((logc - logc.mean()) ** 2)
        assert slope < 0 and r2 > 0.99, (slope, r2)


def test_c07_number_phase_detection_range(request):
    with criterion(request, 7, "number-phase N=3 detects kicks 1 and 2 only", 1):
        rows, _ = detectability_report(number_phase_code(3, 36), "phasor_shifts", max_order=3)
        verdict = {r.label: r for r in rows}
        for lab in ("E_1", "E_2"):
            assert verdict[lab].detectable and verdict[lab].defect < 1e-12
        assert not verdict["E_3"].detectable and verdict["E_3"].defect > 0.1


def test_c08_four_mode_distance(request):
    with criterion(request, 8, "four-mode analog code has distance two", 1):
        nul = four_mode_nullifiers()
        assert single_mode_detection_ranks(nul) == [2, 2, 2, 2]
        for mode in range(1, 5):
            for quad in "xp":
                assert displacement_detectability(nul, quadrature_vector(4, **{f"{quad}{mode}": 1.0}))[0]
        v = quadrature_vector(4, p1=1, p2=1)
        det, syn = displacement_detectability(nul, v)
        assert not det and np.all(syn == 0)
        assert np.abs(logical_action(nul, v)).max() > 0
        for q in np.random.default_rng(8).uniform(-3, 3, size=10):
            assert transversal_logical_displacement(float(q)).passes


def _series_flip_probability(sigma):
    dens = lambda u: math.exp(-u * u / (2 * sigma ** 2)) / (sigma * math.sqrt(2 * math.pi))  # noqa: E731
    total = 0.0
    for k in range(1, 41, 2):
        lo, hi = (k - 0.5) * SQRT_PI, (k + 0.5) * SQRT_PI
        total += 2 * integrate.quad(dens, lo, hi, epsabs=1e-14, epsrel=1e-12)[0]
    return total


def test_c09_binning_decoder(request):
    with criterion(request, 9, "GKP binning flip rate against the Gaussian series", 10):
        for sigma, n in ((0.2, 4_000_000), (0.4, 400_000)):
            r = gkp_bin_decoder(sigma, n, seed=99)
            ref = _series_flip_probability(sigma)
            assert r.logical_flip_stderr > 0
            assert abs(r.logical_flip_rate - ref) < 3 * r.logical_flip_stderr, (sigma, r.logical_flip_rate, ref)
        grid = np.linspace(-SQRT_PI / 2, SQRT_PI / 2, 100_001)[1:-1]
        syndrome, k, flip = bin_decode(grid)
        assert np.all(k == 0) and not flip.any() and np.array_equal(syndrome, grid)


def test_c10_finite_dimension_obstruction(request):
    with criterion(request, 10, "trace of [x, p] vanishes in finite dimension", 1):
        for cutoff in (8, 32, 128):
            assert exact_commutator_trace(cutoff) == 0
            defect = canonical_commutator(cutoff) - 1j * np.eye(cutoff)
            outside = np.ones((cutoff, cutoff), dtype=bool)
            outside[-2:, -2:] = False
            assert np.abs(defect[outside]).max() < 1e-10


def test_c11_footprint(request):
    with criterion(request, 11, "binomial(2,1) footprint: 5 Fock states, 3 error spaces", 1):
        fp = code_footprint(binomial_code(2, 1, 12), [identity(12), standard_operator("lower", 12),
                                                      standard_operator("number", 12) - 2 * identity(12)])
        assert fp.fock_support_count == 5
        assert fp.error_space_count == 3


def test_c12_phasor_algebra(request):
    with criterion(request, 12, "phasor commutator and completeness", 5):
        cutoff = 24
        for phi in (0.1, 1.3):
            rot = standard_operator("rotation", cutoff, param=phi).matrix
            for ell in range(-10, 11):
                e = standard_operator("phasor", cutoff, param=ell).matrix
                assert np.abs(rot @ e - np.exp(1j * phi * ell) * e @ rot).max() < 1e-13
        c, ell_max = 12, 10
        t = phasor_completeness(c, ell_max)
        safe = ell_max + 1  # every index difference inside is covered by some kick
        eye = np.eye(safe)
        block = t[:safe, :safe, :safe, :safe]
        assert np.abs(block - np.einsum("mp,nq->mnpq", eye, eye)).max() < 1e-10


MC_RUNS = [
    ["gkp-rep", "--sigma", "0.1", "--samples", "100000", "--seed", "2024"],
    ["gkp-bin", "--sigma", "0.4", "--samples", "400000", "--seed", "99"],
]


def test_c13_determinism(request, tmp_path):
    with criterion(request, 13, "MC outputs are byte-identical on rerun", None):
        for i, argv in enumerate(MC_RUNS):
            first, second, threaded = (tmp_path / f"{i}_{tag}.csv" for tag in "abc")
            assert main([*argv, "--out", str(first)]) == 0
            assert main([*argv, "--out", str(second)]) == 0
            assert main([*argv, "--threads", "4", "--out", str(threaded)]) == 0
            assert first.read_bytes() == second.read_bytes() == threaded.read_bytes()
