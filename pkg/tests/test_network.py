import numpy as np
import pytest

from cvqnet import (
    NetworkParams,
    UserLink,
    attach_trusted_detector,
    build_channel_output_cm,
    check_physicality,
    classical_outcome_cov,
    measured_outcome_model,
    outcome_variance,
)
from cvqnet.errors import ValidationError

from conftest import random_params
from oracles import brute_force_network_cm, epr_cm


def single_user(eta=1.0, eps=0.0, eta_d=1.0, nu=0.0, v_mod=5.0, **kw):
    return NetworkParams(
        modulation_variance=v_mod,
        users=(UserLink(transmittance=eta, excess_noise=eps, trusted_noise=nu),),
        detector_efficiency=eta_d,
        **kw,
    )


class TestBuilder:
    def test_lossless_single_user_is_epr(self):
        gamma = build_channel_output_cm(single_user())
        assert np.allclose(gamma.matrix, epr_cm(6.0), atol=1e-12)
        assert gamma.mode_labels == ("A", "B1")

    def test_two_user_cross_block(self):
        params = NetworkParams(
            modulation_variance=5.0,
            users=(
                UserLink(transmittance=0.5, excess_noise=0.0),
                UserLink(transmittance=0.5, excess_noise=0.0),
            ),
        )
        gamma = build_channel_output_cm(params)
        assert np.allclose(gamma.block(["B1"], ["B2"]), 2.5 * np.eye(2), atol=1e-12)

    def test_table1_is_physical(self, table1):
        gamma = build_channel_output_cm(table1)
        assert gamma.matrix.shape == (10, 10)
        assert check_physicality(gamma).physical

    def test_excess_noise_moves_only_own_diagonal(self, table1):
        bumped = table1.with_links(
            [
                (u.transmittance, u.excess_noise + (0.005 if k == 1 else 0.0))
                for k, u in enumerate(table1.users)
            ]
        )
        base = build_channel_output_cm(table1).matrix
        moved = build_channel_output_cm(bumped).matrix
        diff = moved - base
        expected = np.zeros_like(diff)
        expected[4, 4] = expected[5, 5] = 0.005
        assert np.allclose(diff, expected, atol=1e-12)

    def test_splitter_budget_enforced(self):
        with pytest.raises(ValidationError):
            NetworkParams(
                modulation_variance=5.0,
                users=(
                    UserLink(transmittance=0.7, excess_noise=0.0),
                    UserLink(transmittance=0.6, excess_noise=0.0),
                ),
            )
        NetworkParams(  # same network allowed with the budget check off
            modulation_variance=5.0,
            users=(
                UserLink(transmittance=0.7, excess_noise=0.0),
                UserLink(transmittance=0.6, excess_noise=0.0),
            ),
            enforce_splitter_budget=False,
        )

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_brute_force_composition_equivalence(self, m):
        rng = np.random.default_rng(100 + m)
        for _ in range(25):
            eta_fiber = float(rng.uniform(0.3, 1.0))
            fractions = rng.uniform(0.1, 1.0, m)
            fractions /= fractions.sum()
            eta_last = rng.uniform(0.3, 1.0, m)
            excess = rng.uniform(0.0, 0.02, m)
            v_mod = float(rng.uniform(2.0, 8.0))
            params = NetworkParams(
                modulation_variance=v_mod,
                users=tuple(
                    UserLink(
                        transmittance=float(eta_fiber * fractions[k] * eta_last[k]),
                        excess_noise=float(excess[k]),
                    )
                    for k in range(m)
                ),
            )
            closed = build_channel_output_cm(params).matrix
            brute = brute_force_network_cm(v_mod, eta_fiber, fractions, eta_last, excess)
            assert np.max(np.abs(closed - brute)) <= 1e-10


class TestTrustedDetector:
    def test_identity_detector_leaves_state_alone(self):
        gamma = build_channel_output_cm(single_user())
        extended, mode_map = attach_trusted_detector(gamma, "B1", 1.0, 0.0)
        assert extended.mode_labels == ("A", "B1", "D1_B1", "D2_B1")
        assert np.allclose(extended.block(["A", "B1"], ["A", "B1"]), gamma.matrix, atol=1e-12)
        assert np.allclose(extended.block(["A", "B1"], ["D1_B1", "D2_B1"]), 0.0, atol=1e-12)
        assert np.allclose(extended.block(["D1_B1"], ["D1_B1"]), np.eye(2))
        assert mode_map.detector_ancillae == (("B1", "D1_B1", "D2_B1"),)

    def test_detected_variance_on_vacuum(self):
        vacuum = build_channel_output_cm(single_user(v_mod=1e-12)).reduce(["B1"])
        extended, _ = attach_trusted_detector(vacuum, "B1", 0.68, 0.06)
        detected = extended.block(["B1"], ["B1"])
        assert detected[0, 0] == pytest.approx(1.06, abs=1e-9)
        assert detected[1, 1] == pytest.approx(1.06, abs=1e-9)

    def test_detected_variance_general(self, table1):
        gamma = build_channel_output_cm(table1)
        for k, user in enumerate(table1.users):
            label = f"B{k + 1}"
            extended, _ = attach_trusted_detector(
                gamma, label, table1.detector_efficiency, table1.trusted_noise(k)
            )
            w = user.transmittance * table1.modulation_variance + 1.0 + user.excess_noise
            expected = (
                table1.detector_efficiency * w
                + (1.0 - table1.detector_efficiency)
                + table1.trusted_noise(k)
            )
            assert extended.block([label], [label])[0, 0] == pytest.approx(expected, rel=1e-12)
            assert check_physicality(extended).physical

    def test_unit_efficiency_with_noise_detunes(self):
        gamma = build_channel_output_cm(single_user())
        extended, mode_map = attach_trusted_detector(gamma, "B1", 1.0, 0.05)
        assert mode_map.notes  # detuning documented
        assert check_physicality(extended).physical
        # detected variance still reproduces the calibrated receiver to ~delta
        assert extended.block(["B1"], ["B1"])[0, 0] == pytest.approx(6.0 + 0.05, rel=2e-4)

    def test_double_attach_rejected(self):
        gamma = build_channel_output_cm(single_user())
        extended, _ = attach_trusted_detector(gamma, "B1", 0.9, 0.01)
        with pytest.raises(ValidationError):
            attach_trusted_detector(extended, "B1", 0.9, 0.01)


class TestOutcomeModel:
    def test_clean_channel_values(self):
        params = single_user()
        model = measured_outcome_model(params, 0)
        assert model.gain == pytest.approx(np.sqrt(0.5))
        assert model.gain * params.modulation_variance == pytest.approx(5.0 / np.sqrt(2.0))
        assert outcome_variance(params, 0) == pytest.approx(3.5)
        assert model.noise_variance == pytest.approx(1.0)

    def test_vanishing_transmittance(self):
        params = single_user(eta=1e-12, eta_d=0.8, nu=0.04)
        model = measured_outcome_model(params, 0)
        assert model.gain == pytest.approx(0.0, abs=1e-6)
        assert model.noise_variance == pytest.approx((2.0 + 0.04) / 2.0, abs=1e-9)

    def test_classical_cov_consistent_with_outcome_model(self, table1):
        cov = classical_outcome_cov(table1)
        assert cov[0, 0] == table1.modulation_variance
        for k in range(table1.n_users):
            model = measured_outcome_model(table1, k)
            assert cov[k + 1, k + 1] == pytest.approx(outcome_variance(table1, k), rel=1e-12)
            assert cov[0, k + 1] == pytest.approx(model.gain * table1.modulation_variance)

    def test_outcomes_conditionally_independent_given_symbol(self, table1):
        # inter-user outcome covariance equals the product of gains times V_mod:
        # all shared randomness is the symbol itself
        cov = classical_outcome_cov(table1)
        for k in range(table1.n_users):
            for j in range(k):
                gk = measured_outcome_model(table1, k).gain
                gj = measured_outcome_model(table1, j).gain
                assert cov[j + 1, k + 1] == pytest.approx(
                    gj * gk * table1.modulation_variance, rel=1e-12
                )

    def test_classical_cov_positive_definite_random(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            cov = classical_outcome_cov(random_params(rng))
            assert np.linalg.eigvalsh(cov)[0] > 0
