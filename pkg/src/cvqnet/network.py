"""Covariance model of a one-to-M broadcast network with trusted receivers.

The entanglement-based picture is used throughout: Alice holds one arm of a
two-mode squeezed vacuum of variance V = V_mod + 1, the other arm is split
among M users, each link adding loss and excess noise.  Receiver loss and
electronic noise are trusted and modelled by an EPR ancilla pair coupled
through a beamsplitter in front of an ideal heterodyne detector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ModelError, ValidationError
from .gaussian import CovarianceMatrix, check_physicality

I2 = np.eye(2)
SIGMA_Z = np.diag([1.0, -1.0])

ALICE_LABEL = "A"

# Beamsplitter detuning used when a unit-efficiency detector still carries
# electronic noise; the EPR-purification variance diverges at eta_d = 1.
# 1e-4 keeps the ancilla variance small enough that the conditioned state's
# symplectic eigenvalues stay inside the 1e-9 physicality band in float64,
# while distorting the receiver variance by under 1e-4 relative.
UNIT_EFFICIENCY_DETUNING = 1e-4

SPLITTER_BUDGET_SLACK = 1e-6


@dataclass(frozen=True)
class UserLink:
    """One downstream link: channel transmittance, output-referred excess
    noise, and the receiver's trusted electronic noise (all SNU)."""

    transmittance: float
    excess_noise: float
    trusted_noise: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.transmittance <= 1.0:
            raise ValidationError(f"transmittance must be in (0, 1], got {self.transmittance}")
        if self.excess_noise < 0.0:
            raise ValidationError(f"excess noise must be >= 0, got {self.excess_noise}")
        if self.trusted_noise is not None and self.trusted_noise < 0.0:
            raise ValidationError(f"trusted noise must be >= 0, got {self.trusted_noise}")


@dataclass(frozen=True)
class NetworkParams:
    """Physical inputs for the whole network evaluation."""

    modulation_variance: float
    users: tuple[UserLink, ...]
    detector_efficiency: float = 0.68
    electronic_noise: float = 0.0
    beta: float = 0.95
    block_size: int = 1_250_000_000
    eps_pe: float = 1e-10
    enforce_splitter_budget: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        if self.modulation_variance <= 0:
            raise ValidationError("modulation variance must be positive")
        if not self.users:
            raise ValidationError("need at least one user")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValidationError("detector efficiency must be in (0, 1]")
        if self.electronic_noise < 0.0:
            raise ValidationError("electronic noise must be >= 0")
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError("reconciliation efficiency must be in (0, 1]")
        if self.block_size < 1:
            raise ValidationError("block size must be >= 1")
        if not 0.0 < self.eps_pe < 0.5:
            raise ValidationError("eps_pe must be in (0, 0.5)")
        total = sum(u.transmittance for u in self.users)
        if self.enforce_splitter_budget and total > 1.0 + SPLITTER_BUDGET_SLACK:
            raise ValidationError(
                f"total transmittance {total:.6f} exceeds the passive splitter budget; "
                "set enforce_splitter_budget=False for non-broadcast what-if scans"
            )

    @property
    def n_users(self) -> int:
        return len(self.users)

    def trusted_noise(self, k: int) -> float:
        """Electronic noise of user k (0-based), falling back to the shared value."""
        nu = self.users[k].trusted_noise
        return self.electronic_noise if nu is None else nu

    def with_links(self, links: Sequence[tuple[float, float]]) -> "NetworkParams":
        """Copy with per-user (transmittance, excess_noise) replaced."""
        if len(links) != self.n_users:
            raise ValidationError("need one (eta, eps) pair per user")
        users = tuple(
            replace(u, transmittance=eta, excess_noise=eps)
            for u, (eta, eps) in zip(self.users, links)
        )
        return replace(self, users=users)


def user_label(k: int) -> str:
    """Mode label of user k's channel output (k is 0-based, label 1-based)."""
    return f"B{k + 1}"


@dataclass(frozen=True)
class ModeMap:
    """Role bookkeeping for matrices produced by this module."""

    alice: str = ALICE_LABEL
    channel_outputs: tuple[str, ...] = ()
    detector_ancillae: tuple[tuple[str, str, str], ...] = ()  # (detected, D1, D2)
    notes: tuple[str, ...] = ()

    def with_detector(self, detected: str, d1: str, d2: str, note: str | None = None) -> "ModeMap":
        notes = self.notes + (note,) if note else self.notes
        return ModeMap(
            self.alice,
            self.channel_outputs,
            self.detector_ancillae + ((detected, d1, d2),),
            notes,
        )


def build_channel_output_cm(params: NetworkParams) -> CovarianceMatrix:
    """Joint covariance of Alice and all channel outputs B1..BM.

    With V = V_mod + 1:
      Alice block          V * I
      Alice-Bk block       sqrt(eta_k (V^2 - 1)) * diag(1, -1)
      Bk block             (eta_k V_mod + 1 + eps_k) * I
      Bj-Bk cross block    sqrt(eta_j eta_k) * V_mod * I
    The cross block follows from the splitter's orthonormal vacuum mixing:
    branches share the full signal mode (variance V) but vacuum contributions
    between distinct outputs cancel one unit, leaving V - 1 = V_mod.
    """
    v_mod = params.modulation_variance
    v = v_mod + 1.0
    m = params.n_users
    gamma = np.zeros((2 * (m + 1), 2 * (m + 1)))
    gamma[0:2, 0:2] = v * I2
    for k, user in enumerate(params.users):
        eta = user.transmittance
        i = 2 * (k + 1)
        gamma[i : i + 2, i : i + 2] = (eta * v_mod + 1.0 + user.excess_noise) * I2
        cross = np.sqrt(eta * (v * v - 1.0)) * SIGMA_Z
        gamma[0:2, i : i + 2] = cross
        gamma[i : i + 2, 0:2] = cross
        for j in range(k):
            jj = 2 * (j + 1)
            shared = np.sqrt(params.users[j].transmittance * eta) * v_mod * I2
            gamma[i : i + 2, jj : jj + 2] = shared
            gamma[jj : jj + 2, i : i + 2] = shared
    labels = (ALICE_LABEL,) + tuple(user_label(k) for k in range(m))
    cm = CovarianceMatrix(gamma, labels)
    report = check_physicality(cm)
    if not report:
        raise ModelError(
            f"network covariance unphysical (min nu = {report.min_symplectic_eigenvalue}); "
            f"params: V_mod={v_mod}, users={params.users}"
        )
    return cm


def attach_trusted_detector(
    cm: CovarianceMatrix,
    mode: str,
    detector_efficiency: float,
    electronic_noise: float,
    mode_map: ModeMap | None = None,
) -> tuple[CovarianceMatrix, ModeMap]:
    """Couple `mode` to a trusted-receiver purification.

    Appends an EPR pair (D1, D2) of variance v_d = 1 + nu_el / (1 - eta_d)
    and applies a beamsplitter of transmittance eta_d between `mode` and D1.
    The transformed mode (kept under its original label) then has variance
    eta_d W + (1 - eta_d) + nu_el, i.e. the calibrated receiver variance,
    while the noise purification stays out of the eavesdropper's hands.
    """
    if not 0.0 < detector_efficiency <= 1.0:
        raise ValidationError("detector efficiency must be in (0, 1]")
    if electronic_noise < 0.0:
        raise ValidationError("electronic noise must be >= 0")
    note = None
    eta_d = detector_efficiency
    if electronic_noise == 0.0:
        v_d = 1.0
    elif eta_d == 1.0:
        eta_d = 1.0 - UNIT_EFFICIENCY_DETUNING
        v_d = 1.0 + electronic_noise / (1.0 - eta_d)
        note = (
            f"detector on {mode}: unit efficiency with nonzero electronic noise, "
            f"beamsplitter detuned to {eta_d}"
        )
    else:
        v_d = 1.0 + electronic_noise / (1.0 - eta_d)

    idx = cm.mode_index(mode)
    n = cm.dim_modes
    d1 = f"D1_{mode}"
    d2 = f"D2_{mode}"
    if d1 in cm.mode_labels or d2 in cm.mode_labels:
        raise ValidationError(f"detector already attached to {mode}")

    ext = np.zeros((2 * (n + 2), 2 * (n + 2)))
    ext[: 2 * n, : 2 * n] = cm.matrix
    i1, i2 = 2 * n, 2 * n + 2
    ext[i1 : i1 + 2, i1 : i1 + 2] = v_d * I2
    ext[i2 : i2 + 2, i2 : i2 + 2] = v_d * I2
    epr_cross = np.sqrt(v_d * v_d - 1.0) * SIGMA_Z
    ext[i1 : i1 + 2, i2 : i2 + 2] = epr_cross
    ext[i2 : i2 + 2, i1 : i1 + 2] = epr_cross

    s = np.eye(2 * (n + 2))
    t, r = np.sqrt(eta_d), np.sqrt(1.0 - eta_d)
    mm = 2 * idx
    s[mm : mm + 2, mm : mm + 2] = t * I2
    s[mm : mm + 2, i1 : i1 + 2] = r * I2
    s[i1 : i1 + 2, mm : mm + 2] = -r * I2
    s[i1 : i1 + 2, i1 : i1 + 2] = t * I2

    out = CovarianceMatrix(s @ ext @ s.T, cm.mode_labels + (d1, d2))
    mode_map = mode_map or ModeMap(channel_outputs=tuple(l for l in cm.mode_labels if l != ALICE_LABEL))
    return out, mode_map.with_detector(mode, d1, d2, note)


class OutcomeModel(NamedTuple):
    """Classical per-quadrature model y = gain * s + n of one user's data."""

    gain: float
    noise_variance: float


def measured_outcome_model(params: NetworkParams, k: int) -> OutcomeModel:
    """Heterodyne outcome statistics for user k, per quadrature.

    y_q = gain * s_q + n with gain = sqrt(eta_k eta_d / 2) and
    Var(y_q) = (eta_d W_k + (1 - eta_d) + nu_el + 1) / 2, where
    W_k = eta_k V_mod + 1 + eps_k is the channel-output variance.  The 1/2
    and the +1 vacuum unit are the heterodyne conventions.
    """
    if not 0 <= k < params.n_users:
        raise ValidationError(f"user index {k} out of range for {params.n_users} users")
    user = params.users[k]
    eta_d = params.detector_efficiency
    nu = params.trusted_noise(k)
    gain = np.sqrt(user.transmittance * eta_d / 2.0)
    noise = (eta_d * (1.0 + user.excess_noise) + (1.0 - eta_d) + nu + 1.0) / 2.0
    return OutcomeModel(float(gain), float(noise))


def outcome_variance(params: NetworkParams, k: int) -> float:
    """Total per-quadrature variance of user k's heterodyne outcome."""
    model = measured_outcome_model(params, k)
    return model.gain**2 * params.modulation_variance + model.noise_variance


def classical_outcome_cov(params: NetworkParams) -> np.ndarray:
    """Joint classical covariance of (s, y_1, ..., y_M) for one quadrature.

    Row/column 0 is Alice's symbol (variance V_mod).  Off-diagonal user
    entries carry the shared-signal correlation eta_d sqrt(eta_j eta_k)
    V_mod / 2; given s the outcomes are independent because the splitter
    vacua anti-correlate exactly with the shared signal shot noise.
    Both quadratures have the same classical covariance.
    """
    m = params.n_users
    v_mod = params.modulation_variance
    eta_d = params.detector_efficiency
    cov = np.zeros((m + 1, m + 1))
    cov[0, 0] = v_mod
    gains = []
    for k in range(m):
        model = measured_outcome_model(params, k)
        gains.append(model.gain)
        cov[k + 1, k + 1] = model.gain**2 * v_mod + model.noise_variance
        cov[0, k + 1] = cov[k + 1, 0] = model.gain * v_mod
    for k in range(m):
        eta_k = params.users[k].transmittance
        for j in range(k):
            eta_j = params.users[j].transmittance
            shared = eta_d * np.sqrt(eta_j * eta_k) * v_mod / 2.0
            cov[j + 1, k + 1] = cov[k + 1, j + 1] = shared
    return cov
