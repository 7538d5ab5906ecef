"""Per-user mutual information, Holevo bounds and secret key rates.

Three post-processing interpretations of the same broadcast data are
supported.  For a reference user k:

  untrusted     other users belong to the eavesdropper; everything is
                evaluated on the reduced two-party state (A, Bk).
  trusted       other users are honest and excluded from the eavesdropper's
                purification; the Holevo bound uses the global state.
  collaborative other users publicly disclose their noisy outcomes; both
                quantities are evaluated on the state conditioned on those
                outcomes (no trust placed on the assisting receivers).

Reverse reconciliation throughout: Holevo bounds are conditioned on the
reference user's own measurement, whose receiver loss and electronic noise
are trusted (purified) in every interpretation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ModelError, ValidationError
from .gaussian import CovarianceMatrix, condition_on_heterodyne, von_neumann_entropy
from .network import (
    ALICE_LABEL,
    NetworkParams,
    attach_trusted_detector,
    build_channel_output_cm,
    classical_outcome_cov,
    user_label,
)


class TrustModel(Enum):
    UNTRUSTED = "untrusted"
    COLLABORATIVE = "collaborative"
    TRUSTED = "trusted"


def delta_fs(block_size: float) -> float:
    """Finite-size penalty 7 * sqrt(log2(2e10) / N) in bits per use.

    The prefactor is (2d + 3) with binary raw-key dimension d = 2; the
    2e10 encodes 2 / eps_bar at smoothing parameter 1e-10.  The privacy
    amplification term is negligible at the block sizes considered and
    is omitted.
    """
    if block_size < 1:
        raise ValidationError(f"block size must be >= 1, got {block_size}")
    return 7.0 * math.sqrt(math.log2(2e10) / block_size)


def mutual_information(
    params: NetworkParams, k: int, conditioned_on: Iterable[int] = ()
) -> float:
    """I(A : y_k | y_cond) in bits per channel use (both quadratures).

    Built from the joint classical outcome covariance; conditioning is a
    classical Schur complement.  The two quadratures contribute identical
    halves, so the result is log2 of one variance ratio.
    """
    cond = sorted(set(int(j) for j in conditioned_on))
    if k in cond:
        raise ValidationError(f"user {k} cannot condition on itself")
    for j in cond + [k]:
        if not 0 <= j < params.n_users:
            raise ValidationError(f"user index {j} out of range")
    cov = classical_outcome_cov(params)
    keep = [0, k + 1]
    if cond:
        cidx = [j + 1 for j in cond]
        a = cov[np.ix_(keep, keep)]
        b = cov[np.ix_(cidx, cidx)]
        x = cov[np.ix_(keep, cidx)]
        joint = a - x @ np.linalg.solve(b, x.T)
    else:
        joint = cov[np.ix_(keep, keep)]
    var_s, var_y = joint[0, 0], joint[1, 1]
    if var_y <= 0 or var_s <= 0:
        raise ModelError("degenerate outcome variance in mutual information")
    var_y_given_s = var_y - joint[0, 1] ** 2 / var_s
    if var_y_given_s <= 0:
        raise ModelError("non-positive conditional variance in mutual information")
    return float(np.log2(var_y / var_y_given_s))


def measure_reference_user(
    cm: CovarianceMatrix, label: str, detector_efficiency: float, electronic_noise: float
) -> CovarianceMatrix:
    """State of everything retained after the reference user's measurement.

    Attaches the trusted-receiver purification to `label`, heterodynes the
    detected mode, and keeps all other modes plus the two ancillae.
    """
    extended, _ = attach_trusted_detector(cm, label, detector_efficiency, electronic_noise)
    return condition_on_heterodyne(extended, [label])


def apply_assisting_detector(
    cm: CovarianceMatrix, label: str, detector_efficiency: float, electronic_noise: float
) -> CovarianceMatrix:
    """Fold an untrusted receiver onto `label` in place (no ancillae).

    Loss eta_d plus added classical noise; heterodyning the transformed
    mode then reproduces the assisting user's disclosed outcome statistics
    without granting their noise purification to anyone.
    """
    if not 0.0 < detector_efficiency <= 1.0:
        raise ValidationError("detector efficiency must be in (0, 1]")
    if electronic_noise < 0.0:
        raise ValidationError("electronic noise must be >= 0")
    idx = cm.mode_index(label)
    n = cm.dim_modes
    scale = np.eye(2 * n)
    scale[2 * idx : 2 * idx + 2, 2 * idx : 2 * idx + 2] = np.sqrt(detector_efficiency) * np.eye(2)
    out = scale @ cm.matrix @ scale.T
    added = (1.0 - detector_efficiency) + electronic_noise
    out[2 * idx, 2 * idx] += added
    out[2 * idx + 1, 2 * idx + 1] += added
    return CovarianceMatrix(out, cm.mode_labels)


def holevo_untrusted(params: NetworkParams, k: int) -> float:
    """Holevo bound with all other users assigned to the eavesdropper."""
    cm = build_channel_output_cm(params)
    reduced = cm.reduce([ALICE_LABEL, user_label(k)])
    s_before = von_neumann_entropy(reduced)
    conditional = measure_reference_user(
        reduced, user_label(k), params.detector_efficiency, params.trusted_noise(k)
    )
    return s_before - von_neumann_entropy(conditional)


def holevo_trusted(params: NetworkParams, k: int) -> float:
    """Holevo bound with all other users excluded from the eavesdropper."""
    cm = build_channel_output_cm(params)
    s_before = von_neumann_entropy(cm)
    conditional = measure_reference_user(
        cm, user_label(k), params.detector_efficiency, params.trusted_noise(k)
    )
    return s_before - von_neumann_entropy(conditional)


def holevo_collaborative(params: NetworkParams, k: int) -> float:
    """Holevo bound after conditioning on all other users' disclosed outcomes.

    Assisting receivers are applied as untrusted maps (their eta_d and
    nu_el degrade the disclosed data but nothing is purified for them),
    then the state is conditioned jointly on their heterodyne outcomes.
    The reference user's own receiver stays trusted.
    """
    if params.n_users == 1:
        return holevo_untrusted(params, k)
    cm = build_channel_output_cm(params)
    others = [j for j in range(params.n_users) if j != k]
    for j in others:
        cm = apply_assisting_detector(
            cm, user_label(j), params.detector_efficiency, params.trusted_noise(j)
        )
    conditional_ab = condition_on_heterodyne(cm, [user_label(j) for j in others])
    s_before = von_neumann_entropy(conditional_ab)
    conditional = measure_reference_user(
        conditional_ab, user_label(k), params.detector_efficiency, params.trusted_noise(k)
    )
    return s_before - von_neumann_entropy(conditional)


_HOLEVO = {
    TrustModel.UNTRUSTED: holevo_untrusted,
    TrustModel.TRUSTED: holevo_trusted,
    TrustModel.COLLABORATIVE: holevo_collaborative,
}


@dataclass(frozen=True)
class KeyRateReport:
    """Everything that went into one per-user secret key rate."""

    user: int  # 0-based
    trust: TrustModel
    mutual_information: float
    holevo: float
    delta: float
    rate: float
    non_positive: bool
    params_used: tuple[tuple[float, float], ...]  # per-user (eta, eps) actually evaluated
    params_source: str  # "as-given" | "interval-corner" | "ml-asymptotic"


def key_rate(
    params: NetworkParams,
    trust: TrustModel,
    k: int,
    mode: str = "finite",
    worst_case: NetworkParams | None = None,
    beta: float | None = None,
) -> KeyRateReport:
    """Secret key rate K = max(0, beta * I - chi - Delta(N)) for user k.

    mode "finite": applies the Delta(N) penalty; parameters are taken from
    `worst_case` when a confidence-region corner is supplied, otherwise the
    given params are evaluated as-is (point-valued inputs are treated as the
    already-chosen security evaluation point).  mode "asymptotic": Delta = 0
    and the given params are used directly (maximum-likelihood reading).
    """
    if mode not in ("finite", "asymptotic"):
        raise ValidationError(f"mode must be 'finite' or 'asymptotic', got {mode!r}")
    if not 0 <= k < params.n_users:
        raise ValidationError(f"user index {k} out of range")
    if mode == "asymptotic":
        eval_params = params
        source = "ml-asymptotic"
        delta = 0.0
    else:
        if worst_case is not None:
            if worst_case.n_users != params.n_users:
                raise ValidationError("worst-case params must describe the same users")
            eval_params = worst_case
            source = "interval-corner"
        else:
            eval_params = params
            source = "as-given"
        delta = delta_fs(params.block_size)

    if trust is TrustModel.COLLABORATIVE:
        conditioned = [j for j in range(eval_params.n_users) if j != k]
    else:
        conditioned = []
    info = mutual_information(eval_params, k, conditioned)
    chi = _HOLEVO[trust](eval_params, k)
    b = params.beta if beta is None else beta
    raw = b * info - chi - delta
    return KeyRateReport(
        user=k,
        trust=trust,
        mutual_information=info,
        holevo=chi,
        delta=delta,
        rate=max(0.0, raw),
        non_positive=raw <= 0.0,
        params_used=tuple((u.transmittance, u.excess_noise) for u in eval_params.users),
        params_source=source,
    )


def derive_worst_case(params: NetworkParams, n: float | None = None) -> NetworkParams:
    """Model-implied confidence-region corner (eta_min, eps_max per user).

    Treats the given parameters as maximum-likelihood estimates from a block
    of `n` symbols (default: the params' block size) and maps the
    estimation-theory corner back through the outcome model.  Used when no
    measured confidence region is available.
    """
    from .network import measured_outcome_model
    from .simulate import confidence_region  # deferred: simulate imports network too

    n_eff = float(params.block_size if n is None else n)
    links = []
    for k in range(params.n_users):
        model = measured_outcome_model(params, k)
        region = confidence_region(
            model.gain,
            model.noise_variance,
            n_eff,
            params.modulation_variance,
            params.eps_pe,
            detector_efficiency=params.detector_efficiency,
            electronic_noise=params.trusted_noise(k),
        )
        links.append((region.eta_min, region.eps_max))
    return params.with_links(links)


def rate_table(
    params: NetworkParams,
    trusts: Sequence[TrustModel] = tuple(TrustModel),
    users: Sequence[int] | None = None,
    mode: str = "finite",
    worst_case: NetworkParams | None = None,
) -> list[KeyRateReport]:
    """Key-rate reports over a (user x trust-model) grid, row-major by user."""
    users = list(range(params.n_users)) if users is None else list(users)
    return [
        key_rate(params, trust, k, mode=mode, worst_case=worst_case)
        for k in users
        for trust in trusts
    ]
