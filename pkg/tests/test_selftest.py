import math

import numpy as np
import pytest

from bsmcert import selftest
from bsmcert.linalg import (
    I2,
    SX,
    SZ,
    QuantumState,
    bell_ket,
    bell_projector,
    kron,
    projector,
    random_density_matrix,
    uhlmann_fidelity,
)
from bsmcert.scenario import NoiseModel, Relabeling, Scenario, default_settings, xz_observable
from bsmcert.selftest import ExtractionChannel, g_weight

SQRT2 = math.sqrt(2)


class TestExtractionChannel:
    def test_weight_endpoints(self):
        assert abs(g_weight(0.0)) < 1e-15
        assert math.isclose(g_weight(math.pi / 4), 1.0, abs_tol=1e-15)
        assert abs(g_weight(math.pi / 2)) < 1e-15

    def test_printed_sign_invalid(self):
        ch = ExtractionChannel(0.0, printed_sign=True)
        assert math.isclose(ch.g, 2 * (1 + SQRT2), abs_tol=1e-12)
        assert not ch.is_valid()
        with pytest.raises(ValueError):
            ch.kraus_ops

    def test_sigma_branch(self):
        assert np.array_equal(ExtractionChannel(math.pi / 4).sigma, SX)
        assert np.array_equal(ExtractionChannel(math.pi / 4 + 1e-9).sigma, SZ)

    def test_kraus_matches_affine_form(self):
        rng = np.random.default_rng(0)
        rho = random_density_matrix(2, rng)
        ch = ExtractionChannel(0.3)
        via_kraus = sum(k @ rho @ k.conj().T for k in ch.kraus_ops)
        assert np.allclose(via_kraus, ch(rho), atol=1e-15)

    def test_validity_report(self):
        report = selftest.verify_extraction_channels(101)
        assert report["passed"]
        assert report["g_range"][0] >= 0 and report["g_range"][1] <= 1


class TestOperatorInequality:
    def test_optimal_angle(self):
        m = selftest.operator_inequality_matrix(math.pi / 4, math.pi / 4)
        assert np.linalg.eigvalsh(m).min() >= -1e-9

    def test_coarse_grid(self):
        report = selftest.verify_operator_inequality(21)
        assert report.passed
        assert report.min_eigenvalue >= -1e-9

    def test_negative_control_fails(self):
        report = selftest.verify_operator_inequality(11, printed_sign=True)
        assert not report.passed
        assert not report.channels_valid

    def test_fidelity_squared_bound(self):
        assert selftest.verify_fidelity_squared_bound(200)["passed"]

    def test_reference_state_reaches_tsirelson(self):
        psi = projector(selftest.PSI_REF)
        w = selftest.chsh_operator(math.pi / 4, math.pi / 4)
        assert math.isclose(np.trace(psi @ w).real, 2 * SQRT2, abs_tol=1e-12)


class TestRelabeling:
    def test_report(self):
        report = selftest.verify_relabeling_covariance(11)
        assert report["passed"]
        assert max(report["max_deviation"].values()) <= 1e-10

    def test_u_conjugation(self):
        u = selftest.U_REF
        assert np.allclose(u.conj().T @ selftest.U_A @ u, SZ, atol=1e-12)

    def test_identity_relabeling(self):
        w = selftest.chsh_operator(0.4, 1.1)
        assert np.array_equal(w, selftest.chsh_operator(0.4, 1.1, Relabeling.NONE))

    def test_psi_11(self):
        u = kron(selftest.U_REF, I2)
        psi11 = u @ bell_ket(1, 1)
        w = selftest.chsh_operator(math.pi / 4, math.pi / 4, Relabeling.T_AB)
        assert math.isclose(np.vdot(psi11, w @ psi11).real, 2 * SQRT2, abs_tol=1e-12)


class TestJordanFrame:
    @pytest.mark.parametrize("angles", [(0.0, math.pi / 2), (0.3, 1.4), (math.pi / 4, -math.pi / 4)])
    def test_aligns_xz_pairs(self, angles):
        o0, o1 = xz_observable(angles[0]), xz_observable(angles[1])
        a, v = selftest.jordan_frame(o0, o1)
        a0, a1 = selftest.jordan_observables(a)
        assert np.allclose(v @ o0 @ v.conj().T, a0, atol=1e-12)
        assert np.allclose(v @ o1 @ v.conj().T, a1, atol=1e-12)

    def test_random_pair(self):
        rng = np.random.default_rng(1)
        n0, n1 = rng.normal(size=3), rng.normal(size=3)
        n0, n1 = n0 / np.linalg.norm(n0), n1 / np.linalg.norm(n1)
        paulis = (SX, np.array([[0, -1j], [1j, 0]]), SZ)
        o0 = sum(c * s for c, s in zip(n0, paulis))
        o1 = sum(c * s for c, s in zip(n1, paulis))
        a, v = selftest.jordan_frame(o0, o1)
        assert 0 <= a <= math.pi / 2

    def test_rejects_identity(self):
        with pytest.raises(ValueError):
            selftest.jordan_frame(I2, SX)

    def test_extraction_recovers_bell_states(self):
        k1, k2 = selftest.extraction_kraus(default_settings())
        for k in range(4):
            out = selftest.extract(bell_projector(k), k1, k2)
            assert uhlmann_fidelity(out, bell_projector(k)) > 1 - 1e-9


class TestTeleportInjection:
    def test_averaging_identity(self):
        xx = np.kron(SX, SX)
        for q in (0.1, 0.37, 0.5, 0.9):
            src = selftest.schmidt_source(q)
            choi = selftest.teleport_injection_map(src).choi()
            assert np.allclose(choi, 0.5 * (src.rho + xx @ src.rho @ xx), atol=1e-10)

    def test_trace_preserving(self):
        rng = np.random.default_rng(2)
        inj = selftest.teleport_injection_map(QuantumState(random_density_matrix(4, rng), (2, 2)))
        total = sum(k.conj().T @ k for k in inj.kraus)
        assert np.allclose(total, np.eye(2), atol=1e-10)

    def test_maximally_entangled_source(self):
        inj = selftest.teleport_injection_map(selftest.schmidt_source(0.5))
        assert math.isclose(uhlmann_fidelity(inj.choi(), selftest.schmidt_source(0.5).rho), 1.0, abs_tol=1e-8)

    # achieved fidelity is sqrt(1/2 + 2q(1-q)); the formula 1/2 + sqrt(q(1-q))
    # agrees only at q = 1/2 and is a strict lower bound elsewhere
    @pytest.mark.parametrize("q, expected", [(1.0, math.sqrt(0.5)), (0.8, math.sqrt(0.82))])
    def test_closed_form(self, q, expected):
        src = selftest.schmidt_source(q)
        f = uhlmann_fidelity(selftest.teleport_injection_map(src).choi(), src.rho)
        assert math.isclose(f, expected, abs_tol=1e-8)
        assert f >= selftest.teleport_fidelity_printed(q) - 1e-9

    @pytest.mark.parametrize("q", [0.0, 0.2, 0.8, 1.0])
    def test_formula_is_overlap_with_phi00(self, q):
        choi = selftest.teleport_injection_map(selftest.schmidt_source(q)).choi()
        overlap = np.trace(bell_projector(0) @ choi).real
        assert math.isclose(overlap, selftest.teleport_fidelity_printed(q), abs_tol=1e-10)

    def test_schmidt_weight(self):
        inj = selftest.teleport_injection_map(selftest.schmidt_source(0.3))
        assert math.isclose(inj.q, 0.7, abs_tol=1e-12)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            selftest.teleport_injection_map(np.eye(6) / 6, (2, 3))

    def test_report(self):
        report = selftest.verify_teleport(20)
        assert report["passed"]
        assert report["max_averaging_identity_error"] <= 1e-10


def test_lemma1_report():
    assert selftest.verify_lemma1(100)["passed"]


def test_negativity_report():
    assert selftest.verify_negativity_bound(200)["passed"]


class TestOracle:
    def test_ideal(self):
        truth = selftest.oracle_values(Scenario.from_noise(NoiseModel()))
        assert all(math.isclose(f, 1.0, abs_tol=1e-9) for f in truth.f_o_k)
        assert math.isclose(truth.f_bsm, 1.0, abs_tol=1e-9)
        assert math.isclose(truth.zeta_0, 1.0, abs_tol=1e-9)

    def test_werner_point(self):
        point = selftest.soundness_point(NoiseModel(0.98))
        bound, truth = point.comparisons["f_o_0"]
        assert bound <= truth + 1e-9

    def test_depolarized_bsm_conditional(self):
        point = selftest.soundness_point(NoiseModel(bsm_depolarization=0.05))
        bound, truth = point.comparisons["f_cond"]
        assert bound <= truth + 1e-9

    def test_default_grid_size(self):
        grid = selftest.default_noise_grid()
        assert len(grid) >= 50


def test_run_verification_rejects_unknown_suite():
    with pytest.raises(ValueError):
        selftest.run_verification("bogus")


def test_run_verification_includes_notice():
    report = selftest.run_verification("relabeling")
    assert report["passed"]
    assert "sin x + cos x - 1" in report["notice"]
