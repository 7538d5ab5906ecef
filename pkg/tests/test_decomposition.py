import itertools

import numpy as np
import pytest

from cvqnet import (
    NetworkParams,
    TrustModel,
    UserLink,
    all_orderings,
    chain_mutual_information_term,
    decompose,
    joint_key_rate,
    joint_mutual_information,
    key_rate,
    mutual_information,
    sample_orderings,
    telescopic_holevo_term,
)
from cvqnet.errors import GuardRefusalError, ValidationError

from conftest import random_params


class TestChainRule:
    def test_first_position_is_plain_mi(self, table1):
        order = (2, 0, 3, 1)
        assert chain_mutual_information_term(table1, order, 0) == mutual_information(table1, 2)

    def test_chain_sums_to_joint_mi(self, table1):
        rng = np.random.default_rng(41)
        cases = [table1] + [random_params(rng) for _ in range(10)]
        for params in cases:
            m = params.n_users
            for order in itertools.islice(itertools.permutations(range(m)), 3):
                total = sum(
                    chain_mutual_information_term(params, order, pos) for pos in range(m)
                )
                assert total == pytest.approx(joint_mutual_information(params), abs=1e-10)

    def test_decoupled_user_contributes_nothing(self, table1):
        extended = NetworkParams(
            modulation_variance=table1.modulation_variance,
            users=table1.users + (UserLink(transmittance=1e-15, excess_noise=0.0),),
            detector_efficiency=table1.detector_efficiency,
            beta=table1.beta,
            block_size=table1.block_size,
        )
        order = (4, 0, 1, 2, 3)
        for pos in range(1, 5):
            with_dec = chain_mutual_information_term(extended, order, pos)
            plain = chain_mutual_information_term(table1, (0, 1, 2, 3), pos - 1)
            assert with_dec == pytest.approx(plain, abs=1e-10)


class TestTelescope:
    def test_single_user_term_is_holevo_numerator(self):
        params = NetworkParams(
            modulation_variance=5.0,
            users=(UserLink(transmittance=0.4, excess_noise=0.01, trusted_noise=0.05),),
            detector_efficiency=0.7,
        )
        from cvqnet import holevo_untrusted

        term = telescopic_holevo_term(params, (0,), 0)
        assert term == pytest.approx(holevo_untrusted(params, 0), abs=1e-12)

    def test_terms_sum_to_endpoints(self, table1):
        # each term computed in its own fresh chain; the sum must still
        # telescope to S(sigma_0) - S(sigma_M)
        order = (1, 3, 0, 2)
        total = sum(telescopic_holevo_term(table1, order, pos) for pos in range(4))
        jr = joint_key_rate(table1)
        assert total == pytest.approx(jr.holevo, abs=1e-10)

    def test_terms_non_negative(self, table1):
        rng = np.random.default_rng(42)
        cases = [table1] + [random_params(rng) for _ in range(8)]
        for params in cases:
            m = params.n_users
            order = tuple(rng.permutation(m))
            for pos in range(m):
                assert telescopic_holevo_term(params, order, pos) >= -1e-9


class TestDecompose:
    def test_row_sums_match_joint(self, table1):
        jr = joint_key_rate(table1)
        for order in itertools.permutations(range(4)):
            row = decompose(table1, order)
            assert row.row_sum == pytest.approx(jr.rate, abs=1e-9)

    def test_first_position_rule(self, table1):
        for order in itertools.permutations(range(4)):
            row = decompose(table1, order)
            trusted = key_rate(table1, TrustModel.TRUSTED, order[0], mode="finite")
            raw = trusted.rate if not trusted.non_positive else (
                table1.beta * trusted.mutual_information - trusted.holevo - trusted.delta
            )
            assert row.contributions[0] == pytest.approx(raw, abs=1e-9)

    def test_asymptotic_mode_drops_delta(self, table1):
        fin = decompose(table1, (0, 1, 2, 3), mode="finite")
        asym = decompose(table1, (0, 1, 2, 3), mode="asymptotic")
        from cvqnet import delta_fs

        per_user = delta_fs(table1.block_size)
        for a, b in zip(fin.contributions, asym.contributions):
            assert a == pytest.approx(b - per_user, abs=1e-12)

    def test_invalid_order_rejected(self, table1):
        with pytest.raises(ValidationError):
            decompose(table1, (0, 1, 2))
        with pytest.raises(ValidationError):
            decompose(table1, (0, 1, 2, 2))


class TestAllOrderings:
    def test_four_users_gives_24_rows(self, table1):
        table = all_orderings(table1)
        assert len(table.rows) == 24
        assert table.max_row_spread <= 1e-9

    def test_single_user_table(self):
        params = NetworkParams(
            modulation_variance=5.0,
            users=(UserLink(transmittance=0.3, excess_noise=0.005, trusted_noise=0.06),),
            detector_efficiency=0.68,
        )
        table = all_orderings(params)
        assert len(table.rows) == 1
        trusted = key_rate(params, TrustModel.TRUSTED, 0)
        assert table.rows[0].contributions[0] == pytest.approx(trusted.rate, abs=1e-12)

    def test_guard_above_cap(self):
        users = tuple(
            UserLink(transmittance=0.1, excess_noise=0.001, trusted_noise=0.05)
            for _ in range(9)
        )
        params = NetworkParams(modulation_variance=5.0, users=users)
        with pytest.raises(GuardRefusalError):
            all_orderings(params)

    def test_sampled_orderings_deterministic(self, table1):
        a = sample_orderings(table1, 5, seed=7)
        b = sample_orderings(table1, 5, seed=7)
        assert [r.order for r in a.rows] == [r.order for r in b.rows]
        assert a.rows[0].contributions == b.rows[0].contributions

    def test_permutation_symmetry_identical_users(self):
        users = tuple(
            UserLink(transmittance=0.2, excess_noise=0.004, trusted_noise=0.05)
            for _ in range(3)
        )
        params = NetworkParams(modulation_variance=5.0, users=users)
        table = all_orderings(params)
        by_position = list(zip(*(row.contributions for row in table.rows)))
        for position_values in by_position:
            assert max(position_values) - min(position_values) <= 1e-9


class TestJointRate:
    def test_direct_equals_decomposition_sum(self, table1):
        jr = joint_key_rate(table1)
        assert jr.rate == pytest.approx(jr.rate_via_decomposition, abs=1e-9)

    def test_single_user_equals_trusted(self):
        params = NetworkParams(
            modulation_variance=5.0,
            users=(UserLink(transmittance=0.3, excess_noise=0.005, trusted_noise=0.06),),
            detector_efficiency=0.68,
        )
        jr = joint_key_rate(params)
        trusted = key_rate(params, TrustModel.TRUSTED, 0)
        assert jr.rate == pytest.approx(trusted.rate, abs=1e-12)

    def test_joint_at_least_best_trusted_user_on_grid(self, table1):
        # Holds when every user's decomposed contribution is non-negative, as
        # on the bundled config and its neighbourhood.  A network containing a
        # sufficiently noisy user can push the joint rate below the best
        # single-user trusted rate, so this is a regime property, not a theorem.
        cases = [table1]
        for eta_scale in (0.8, 1.0, 1.2):
            for eps_scale in (0.0, 1.0, 2.0):
                cases.append(
                    table1.with_links(
                        [
                            (u.transmittance * eta_scale, u.excess_noise * eps_scale)
                            for u in table1.users
                        ]
                    )
                )
        for params in cases:
            jr = joint_key_rate(params, mode="asymptotic")
            best = max(
                key_rate(params, TrustModel.TRUSTED, k, mode="asymptotic").rate
                for k in range(params.n_users)
            )
            assert jr.rate >= best - 1e-9

    def test_double_counting_guard(self, table1):
        # summing per-user trusted rates overcounts shared correlations
        jr = joint_key_rate(table1)
        trusted_sum = sum(
            key_rate(table1, TrustModel.TRUSTED, k).rate for k in range(table1.n_users)
        )
        assert jr.rate < trusted_sum

    def test_delta_accounting(self, table1):
        from cvqnet import delta_fs

        fin = joint_key_rate(table1, mode="finite")
        asym = joint_key_rate(table1, mode="asymptotic")
        assert fin.delta_total == pytest.approx(4 * delta_fs(table1.block_size), rel=1e-12)
        assert asym.rate - fin.rate == pytest.approx(fin.delta_total, abs=1e-12)
