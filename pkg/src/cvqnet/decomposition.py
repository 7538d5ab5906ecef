"""Joint network key rate and its exact chain-rule split into per-user parts.

The joint rate beta * I(A : B1..BM) - chi(B1..BM : E) - M * Delta(N) is
decomposed along an ordering of the users: user at position k contributes

    K_k = beta * I(A : B_k | y_first..y_(k-1))
          - [S(sigma_(k-1)) - S(sigma_k)] - Delta(N)

where sigma_k is the retained system (Alice, the not-yet-measured users and
the trusted-receiver ancillae of the measured ones) conditioned on the first
k outcomes.  The mutual-information chain and the entropy telescope both
collapse exactly, so every ordering sums to the same joint rate; the first
user's contribution coincides with that user's trusted-protocol rate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import GuardRefusalError, ValidationError
from .gaussian import CovarianceMatrix, von_neumann_entropy
from .keyrates import delta_fs, measure_reference_user, mutual_information
from .network import NetworkParams, build_channel_output_cm, classical_outcome_cov, user_label

MAX_ENUMERATED_USERS = 8


def _check_ordering(params: NetworkParams, order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(params.n_users)):
        raise ValidationError(
            f"ordering must be a permutation of 0..{params.n_users - 1}, got {order}"
        )
    return order


def _conditional_entropies(params: NetworkParams, order: Sequence[int]) -> list[float]:
    """Entropies S(sigma_0), ..., S(sigma_M) along a conditioning order."""
    cm = build_channel_output_cm(params)
    entropies = [von_neumann_entropy(cm)]
    for k in order:
        cm = measure_reference_user(
            cm, user_label(k), params.detector_efficiency, params.trusted_noise(k)
        )
        entropies.append(von_neumann_entropy(cm))
    return entropies


def chain_mutual_information_term(
    params: NetworkParams, order: Sequence[int], position: int
) -> float:
    """I(A : B_{order[position]} | earlier users in the order), bits/use."""
    order = _check_ordering(params, order)
    if not 0 <= position < len(order):
        raise ValidationError(f"position {position} out of range")
    return mutual_information(params, order[position], order[:position])


def telescopic_holevo_term(params: NetworkParams, order: Sequence[int], position: int) -> float:
    """S(sigma_(position)) - S(sigma_(position+1)) along the given order."""
    order = _check_ordering(params, order)
    if not 0 <= position < len(order):
        raise ValidationError(f"position {position} out of range")
    entropies = _conditional_entropies(params, order[: position + 1])
    return entropies[position] - entropies[position + 1]


@dataclass(frozen=True)
class DecompositionRow:
    order: tuple[int, ...]  # 0-based user indices
    contributions: tuple[float, ...]  # K at each position of `order`
    row_sum: float

    def contribution_of_user(self, k: int) -> float:
        return self.contributions[self.order.index(k)]


def decompose(params: NetworkParams, order: Sequence[int], mode: str = "finite") -> DecompositionRow:
    """Per-user contributions along one conditioning order.

    In finite mode one Delta(N) share is charged per user so the row sums to
    the joint finite-size rate, which carries M * Delta(N).
    """
    order = _check_ordering(params, order)
    if mode not in ("finite", "asymptotic"):
        raise ValidationError(f"mode must be 'finite' or 'asymptotic', got {mode!r}")
    delta = delta_fs(params.block_size) if mode == "finite" else 0.0
    entropies = _conditional_entropies(params, order)
    contributions = []
    for pos, k in enumerate(order):
        info = mutual_information(params, k, order[:pos])
        holevo_step = entropies[pos] - entropies[pos + 1]
        contributions.append(params.beta * info - holevo_step - delta)
    return DecompositionRow(order, tuple(contributions), float(sum(contributions)))


@dataclass(frozen=True)
class DecompositionTable:
    rows: tuple[DecompositionRow, ...]
    joint_rate: float
    max_row_spread: float  # max |row_sum - joint_rate| over rows


def all_orderings(params: NetworkParams, mode: str = "finite") -> DecompositionTable:
    """Decomposition rows for every permutation (lexicographic order).

    Refuses above MAX_ENUMERATED_USERS users (factorial blow-up); sample
    orderings with `sample_orderings` instead.
    """
    m = params.n_users
    if m > MAX_ENUMERATED_USERS:
        raise GuardRefusalError(
            f"{m}! orderings is too many to enumerate (cap {MAX_ENUMERATED_USERS}); "
            "use sample_orderings(params, count, seed) instead"
        )
    rows = tuple(
        decompose(params, order, mode) for order in itertools.permutations(range(m))
    )
    joint = joint_key_rate(params, mode).rate
    spread = max(abs(r.row_sum - joint) for r in rows)
    return DecompositionTable(rows, joint, spread)


def sample_orderings(
    params: NetworkParams, count: int, seed: int = 0, mode: str = "finite"
) -> DecompositionTable:
    """Decomposition over `count` random orderings (fixed-seed sampling)."""
    if count < 1:
        raise ValidationError("need at least one sampled ordering")
    rng = np.random.default_rng(seed)
    m = params.n_users
    rows = tuple(
        decompose(params, tuple(rng.permutation(m)), mode) for _ in range(count)
    )
    joint = joint_key_rate(params, mode).rate
    spread = max(abs(r.row_sum - joint) for r in rows)
    return DecompositionTable(rows, joint, spread)


def joint_mutual_information(params: NetworkParams) -> float:
    """I(A : y_1, ..., y_M) in bits per channel use, from the determinant form."""
    cov = classical_outcome_cov(params)
    m = params.n_users
    syy = cov[1:, 1:]
    sys_ = cov[1:, :1]
    conditional = syy - sys_ @ sys_.T / cov[0, 0]
    sign1, logdet1 = np.linalg.slogdet(syy)
    sign2, logdet2 = np.linalg.slogdet(conditional)
    if sign1 <= 0 or sign2 <= 0:
        raise ValidationError("degenerate joint outcome covariance")
    return float((logdet1 - logdet2) / np.log(2.0))


@dataclass(frozen=True)
class JointKeyRate:
    rate: float
    mutual_information: float
    holevo: float
    delta_total: float
    rate_via_decomposition: float  # identity-order row sum, for cross-checking


def joint_key_rate(params: NetworkParams, mode: str = "finite") -> JointKeyRate:
    """Joint rate beta * I(A:all) - chi(all:E) - M * Delta(N), evaluated directly.

    chi is computed in one shot: S(global) minus the entropy of Alice plus
    all trusted-receiver ancillae after jointly conditioning on every user's
    measurement.  The decomposition-sum variant is returned alongside; the
    telescoped and direct evaluations agree because sequential and joint
    Gaussian conditioning coincide.
    """
    if mode not in ("finite", "asymptotic"):
        raise ValidationError(f"mode must be 'finite' or 'asymptotic', got {mode!r}")
    m = params.n_users
    cm = build_channel_output_cm(params)
    s_global = von_neumann_entropy(cm)

    from .network import attach_trusted_detector
    from .gaussian import condition_on_heterodyne

    extended = cm
    for k in range(m):
        extended, _ = attach_trusted_detector(
            extended, user_label(k), params.detector_efficiency, params.trusted_noise(k)
        )
    conditioned = condition_on_heterodyne(extended, [user_label(k) for k in range(m)])
    chi = s_global - von_neumann_entropy(conditioned)

    info = joint_mutual_information(params)
    delta_total = m * delta_fs(params.block_size) if mode == "finite" else 0.0
    rate = params.beta * info - chi - delta_total
    via_rows = decompose(params, tuple(range(m)), mode).row_sum
    return JointKeyRate(float(rate), info, float(chi), delta_total, via_rows)
