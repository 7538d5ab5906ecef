"""Symplectic linear algebra over quadrature covariance matrices.

All matrices are in shot-noise units (vacuum variance = 1) with the
interleaved quadrature ordering (x1, p1, x2, p2, ...).  Modes are always
addressed by label, never by raw index, so that conditioning chains cannot
silently shift mode positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    NumericalError,
    UnphysicalStateError,
    ValidationError,
)

SYMMETRY_RTOL = 1e-12
PHYSICALITY_TOL = 1e-9


def _as_label_tuple(labels: Iterable[str]) -> tuple[str, ...]:
    out = tuple(str(x) for x in labels)
    if len(set(out)) != len(out):
        raise ValidationError(f"mode labels must be unique, got {out}")
    return out


@dataclass(frozen=True)
class CovarianceMatrix:
    """Real symmetric 2n x 2n covariance matrix with labelled modes."""

    matrix: np.ndarray
    mode_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        labels = _as_label_tuple(self.mode_labels)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValidationError(f"covariance matrix must be square 2n x 2n, got {m.shape}")
        n = m.shape[0] // 2
        if len(labels) != n:
            raise ValidationError(
                f"{len(labels)} labels for {n} modes: {labels}"
            )
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
            raise ValidationError("covariance matrix is not symmetric within tolerance")
        m = (m + m.T) / 2.0
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "mode_labels", labels)

    @property
    def dim_modes(self) -> int:
        return len(self.mode_labels)

    def mode_index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown mode label {label!r}; have {self.mode_labels}") from None

    def _rows(self, labels: Sequence[str]) -> np.ndarray:
        idx = []
        for lab in labels:
            i = self.mode_index(lab)
            idx += [2 * i, 2 * i + 1]
        return np.asarray(idx, dtype=int)

    def block(self, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
        """Sub-block (copy) selected by row/column mode labels."""
        return self.matrix[np.ix_(self._rows(rows), self._rows(cols))].copy()

    def reduce(self, labels: Sequence[str]) -> "CovarianceMatrix":
        """Reduced state on the given modes (partial trace of the rest)."""
        labels = list(labels)
        return CovarianceMatrix(self.block(labels, labels), tuple(labels))


def symplectic_form(n: int) -> np.ndarray:
    """Symplectic form for n modes in interleaved ordering.

    Block-diagonal with 2x2 blocks [[0, 1], [-1, 0]]; satisfies
    Omega^2 = -I and Omega Omega^T = I.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"mode count must be a positive integer, got {n!r}")
    omega = np.zeros((2 * n, 2 * n))
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    for i in range(n):
        omega[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block
    return omega


@dataclass(frozen=True)
class SymplecticSpectrum:
    """Symplectic eigenvalues, one per mode, sorted descending."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValidationError("symplectic eigenvalues must be non-negative")
        if list(vals) != sorted(vals, reverse=True):
            raise ValidationError("symplectic eigenvalues must be sorted descending")
        object.__setattr__(self, "values", vals)

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def min(self) -> float:
        return self.values[-1]


def symplectic_eigenvalues(cm: CovarianceMatrix) -> SymplecticSpectrum:
    """Symplectic spectrum of a positive-definite covariance matrix.

    Uses the real eigenproblem of Omega @ Gamma, whose eigenvalues come in
    pairs +/- i*nu_j; the spectrum is the absolute imaginary parts, one per
    pair.  This avoids complex Hermitian machinery for the small matrices
    this package deals with.
    """
    gamma = cm.matrix
    eigs_sym = np.linalg.eigvalsh(gamma)
    if eigs_sym[0] <= 0:
        raise ValidationError(
            f"covariance matrix must be positive definite (min eigenvalue {eigs_sym[0]:.3e})"
        )
    omega = symplectic_form(cm.dim_modes)
    try:
        ev = np.linalg.eigvals(omega @ gamma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver failed on {2 * cm.dim_modes}x{2 * cm.dim_modes} matrix:\n{gamma}"
        ) from exc
    nus = np.sort(np.abs(ev.imag))[::-1][::2]
    return SymplecticSpectrum(tuple(float(v) for v in nus))


def g_function(x: float) -> float:
    """Bosonic entropy g(x) = (x+1) log2(x+1) - x log2 x in bits.

    g(0) = 0 by the convention 0 * log2(0) = 0.
    """
    if x < 0:
        raise ValidationError(f"g is defined for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def von_neumann_entropy(cm: CovarianceMatrix) -> float:
    """Entropy S = sum_j g((nu_j - 1)/2) in bits.

    Eigenvalues within PHYSICALITY_TOL below 1 are clamped to 1 (numerical
    drift from long conditioning chains); anything lower raises.
    """
    total = 0.0
    for nu in symplectic_eigenvalues(cm):
        if nu < 1.0 - PHYSICALITY_TOL:
            raise UnphysicalStateError(
                f"symplectic eigenvalue {nu!r} below 1 beyond tolerance; state is unphysical"
            )
        total += g_function((max(nu, 1.0) - 1.0) / 2.0)
    return total


def condition_on_heterodyne(cm: CovarianceMatrix, measured: Iterable[str]) -> CovarianceMatrix:
    """Conditional covariance of retained modes after heterodyning `measured`.

    Gaussian heterodyne conditioning: Gamma_R - Sigma (Gamma_M + I)^-1 Sigma^T,
    the identity adding one vacuum unit per measured quadrature.  The result
    does not depend on the measurement outcomes.
    """
    measured = _as_label_tuple(measured)
    if not measured:
        raise ValidationError("must measure at least one mode")
    for lab in measured:
        cm.mode_index(lab)
    retained = [lab for lab in cm.mode_labels if lab not in measured]
    if not retained:
        raise ValidationError("cannot heterodyne every mode: nothing would remain")
    gamma_r = cm.block(retained, retained)
    gamma_m = cm.block(measured, measured)
    sigma = cm.block(retained, measured)
    try:
        correction = sigma @ np.linalg.solve(gamma_m + np.eye(gamma_m.shape[0]), sigma.T)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            f"(Gamma_M + I) singular while conditioning on {measured}"
        ) from exc
    cond = gamma_r - correction
    cond = (cond + cond.T) / 2.0
    return CovarianceMatrix(cond, tuple(retained))


@dataclass(frozen=True)
class PhysicalityReport:
    physical: bool
    min_symplectic_eigenvalue: float

    def __bool__(self) -> bool:
        return self.physical


def check_physicality(cm: CovarianceMatrix) -> PhysicalityReport:
    """Check the uncertainty relation Gamma + i Omega >= 0 via min(nu) >= 1."""
    nu_min = symplectic_eigenvalues(cm).min
    return PhysicalityReport(nu_min >= 1.0 - PHYSICALITY_TOL, nu_min)
