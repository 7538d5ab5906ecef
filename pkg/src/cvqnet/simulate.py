"""Monte-Carlo emulation of the quantum phase and parameter estimation.

The simulator works entirely at the classical-outcome level: the physics of
modulation, broadcast, loss, excess noise and noisy heterodyne detection is
captured exactly by the joint outcome covariance, including the inter-user
correlations carried by the shared signal.  That is sufficient (and exact)
for validating estimators and the key-rate pipeline, and it is fast.

Generation is chunked; chunk s draws from a generator seeded with seed XOR s,
so any sharding across workers that respects chunk boundaries reproduces the
same block bit for bit.
"""

from __future__ import annotations

import csv
import statistics
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptInputError, ModelError, ValidationError
from .network import NetworkParams, classical_outcome_cov

MAGIC = b"CVNB"
FORMAT_VERSION = 1
CHUNK = 1 << 19

# One-sided standard-normal quantile at 5e-11, i.e. the per-parameter
# confidence level for eps_pe = 1e-10 split over two tails.  Frozen from a
# high-precision evaluation; the test suite holds a regression check.
Z_EPS_PE_1E10 = 6.46695108724051617
_Z_CACHE: dict[float, float] = {1e-10: Z_EPS_PE_1E10}


def one_sided_quantile(eps_pe: float) -> float:
    """z with P(Z > z) = eps_pe / 2 for a standard normal.

    Evaluated on the lower tail (-inv_cdf(eps/2)) so the tiny tail
    probability is never formed as 1 - p, which would shed ~8 digits.
    """
    if not 0.0 < eps_pe < 0.5:
        raise ValidationError(f"eps_pe must be in (0, 0.5), got {eps_pe}")
    if eps_pe not in _Z_CACHE:
        _Z_CACHE[eps_pe] = -statistics.NormalDist().inv_cdf(eps_pe / 2.0)
    return _Z_CACHE[eps_pe]


@dataclass(frozen=True)
class SymbolBlock:
    """One simulated block of Alice symbols and user outcomes (per quadrature)."""

    n: int
    alice_x: np.ndarray
    alice_p: np.ndarray
    y_x: np.ndarray  # shape (n, M)
    y_p: np.ndarray  # shape (n, M)
    seed: int
    params_truth: NetworkParams | None = None

    def __post_init__(self) -> None:
        for arr in (self.alice_x, self.alice_p):
            if arr.shape != (self.n,):
                raise ValidationError("Alice symbol arrays must have length n")
        if self.y_x.shape != self.y_p.shape or self.y_x.shape[0] != self.n:
            raise ValidationError("outcome arrays must be (n, M)")

    @property
    def n_users(self) -> int:
        return self.y_x.shape[1]


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng((int(seed) ^ chunk_index) & 0xFFFFFFFFFFFFFFFF)


def simulate(params: NetworkParams, n: int, seed: int) -> SymbolBlock:
    """Draw n symbols through the network's exact joint outcome model."""
    if n < 1:
        raise ValidationError("need at least one symbol")
    cov = classical_outcome_cov(params)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ModelError("classical outcome covariance is not positive definite") from exc
    m = params.n_users
    data_x = np.empty((n, m + 1))
    data_p = np.empty((n, m + 1))
    start = 0
    chunk_index = 0
    while start < n:
        size = min(CHUNK, n - start)
        rng = _chunk_rng(seed, chunk_index)
        # draw order fixed: x block first, then p block
        data_x[start : start + size] = rng.standard_normal((size, m + 1)) @ chol.T
        data_p[start : start + size] = rng.standard_normal((size, m + 1)) @ chol.T
        start += size
        chunk_index += 1
    return SymbolBlock(
        n=n,
        alice_x=data_x[:, 0].copy(),
        alice_p=data_p[:, 0].copy(),
        y_x=data_x[:, 1:].copy(),
        y_p=data_p[:, 1:].copy(),
        seed=int(seed),
        params_truth=params,
    )


MIN_ESTIMATION_SYMBOLS = 1000


def estimate(
    block: SymbolBlock, k: int, params: NetworkParams | None = None
) -> tuple[float, float, float]:
    """(t_hat, sigma2_hat, eps_hat) for user k from a symbol block.

    t_hat pools both quadratures: sum(s y) / sum(s^2).  sigma2_hat is the
    pooled residual variance.  eps_hat inverts the outcome-model noise using
    the calibrated detector efficiency and electronic noise, which the
    receiver is assumed to know.
    """
    p = params or block.params_truth
    if p is None:
        raise ValidationError("no network params available for estimation")
    if not 0 <= k < block.n_users:
        raise ValidationError(f"user index {k} out of range")
    if block.n < MIN_ESTIMATION_SYMBOLS:
        raise ValidationError(
            f"need at least {MIN_ESTIMATION_SYMBOLS} symbols for stable estimates, got {block.n}"
        )
    sx, sp = block.alice_x, block.alice_p
    yx, yp = block.y_x[:, k], block.y_p[:, k]
    denom = float(sx @ sx + sp @ sp)
    if denom <= 0.0:
        raise ValidationError("Alice symbols have zero empirical variance")
    t_hat = float((sx @ yx + sp @ yp) / denom)
    rx = yx - t_hat * sx
    rp = yp - t_hat * sp
    sigma2_hat = float((rx @ rx + rp @ rp) / (2 * block.n))
    eps_hat = invert_excess_noise(
        sigma2_hat, p.detector_efficiency, p.trusted_noise(k)
    )
    return t_hat, sigma2_hat, eps_hat


def invert_excess_noise(sigma2: float, detector_efficiency: float, electronic_noise: float) -> float:
    """Excess noise at channel output from the residual outcome variance."""
    eta_d = detector_efficiency
    return (2.0 * sigma2 - (1.0 - eta_d) - electronic_noise - 1.0) / eta_d - 1.0


def transmittance_from_gain(t: float, detector_efficiency: float) -> float:
    """Channel transmittance from the outcome-model amplitude gain."""
    return 2.0 * t * t / detector_efficiency


@dataclass(frozen=True)
class ConfidenceRegion:
    """Per-user confidence intervals and the key-rate-minimizing corner."""

    t_hat: float
    sigma2_hat: float
    delta_t: float
    delta_sigma2: float
    eta_hat: float
    eps_hat: float
    eta_min: float
    eps_max: float
    z: float
    n: float
    eps_pe: float


def confidence_region(
    t_hat: float,
    sigma2_hat: float,
    n: float,
    modulation_variance: float,
    eps_pe: float,
    *,
    detector_efficiency: float,
    electronic_noise: float,
) -> ConfidenceRegion:
    """Gaussian confidence region for (t, sigma^2) and its worst-case corner.

    Half-widths: delta_t = z sqrt(sigma2 / (n V_mod)) and
    delta_sigma2 = z sigma2 sqrt(2 / n), with z the one-sided normal
    quantile at eps_pe / 2 per parameter.  The corner (t - delta_t,
    sigma2 + delta_sigma2) maps back to (eta_min, eps_max), the least
    favorable channel within the region.
    """
    if n < 2:
        raise ValidationError("need n >= 2 for a confidence region")
    if sigma2_hat <= 0:
        raise ValidationError("residual variance must be positive")
    z = one_sided_quantile(eps_pe)
    delta_t = z * np.sqrt(sigma2_hat / (n * modulation_variance))
    delta_sigma2 = z * sigma2_hat * np.sqrt(2.0 / n)
    t_low = max(t_hat - delta_t, 0.0)
    sigma2_high = sigma2_hat + delta_sigma2
    return ConfidenceRegion(
        t_hat=float(t_hat),
        sigma2_hat=float(sigma2_hat),
        delta_t=float(delta_t),
        delta_sigma2=float(delta_sigma2),
        eta_hat=transmittance_from_gain(t_hat, detector_efficiency),
        eps_hat=invert_excess_noise(sigma2_hat, detector_efficiency, electronic_noise),
        eta_min=transmittance_from_gain(t_low, detector_efficiency),
        eps_max=invert_excess_noise(sigma2_high, detector_efficiency, electronic_noise),
        z=float(z),
        n=float(n),
        eps_pe=float(eps_pe),
    )


@dataclass(frozen=True)
class UserEstimate:
    user: int
    t_hat: float
    sigma2_hat: float
    eta_hat: float
    eps_hat: float
    delta_t: float
    delta_sigma2: float
    eta_min: float
    eps_max: float
    negative_excess_flagged: bool


@dataclass(frozen=True)
class EstimateReport:
    n: int
    eps_pe: float
    users: tuple[UserEstimate, ...]


def estimate_report(block: SymbolBlock, params: NetworkParams | None = None) -> EstimateReport:
    """Estimates, intervals and worst-case corners for every user of a block."""
    p = params or block.params_truth
    if p is None:
        raise ValidationError("no network params available for estimation")
    users = []
    for k in range(block.n_users):
        t_hat, sigma2_hat, eps_hat = estimate(block, k, p)
        region = confidence_region(
            t_hat,
            sigma2_hat,
            block.n,
            p.modulation_variance,
            p.eps_pe,
            detector_efficiency=p.detector_efficiency,
            electronic_noise=p.trusted_noise(k),
        )
        # a mildly negative estimate is ordinary estimator noise; flag only
        flagged = eps_hat < -3.0 * (region.eps_max - eps_hat)
        users.append(
            UserEstimate(
                user=k,
                t_hat=t_hat,
                sigma2_hat=sigma2_hat,
                eta_hat=region.eta_hat,
                eps_hat=eps_hat,
                delta_t=region.delta_t,
                delta_sigma2=region.delta_sigma2,
                eta_min=region.eta_min,
                eps_max=region.eps_max,
                negative_excess_flagged=bool(flagged or eps_hat < 0),
            )
        )
    return EstimateReport(n=block.n, eps_pe=p.eps_pe, users=tuple(users))


def worst_case_params(params: NetworkParams, report: EstimateReport) -> NetworkParams:
    """NetworkParams at the estimated confidence-region corner."""
    links = [(u.eta_min, max(u.eps_max, 0.0)) for u in report.users]
    return params.with_links(links)


# ---------------------------------------------------------------------------
# Columnar binary + CSV export.  Layout: header, then little-endian float64
# columns in declared order: alice_x, alice_p, y_x per user, y_p per user.

_HEADER = struct.Struct("<4sHQHQ")


def write_block(block: SymbolBlock, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, block.n, block.n_users, block.seed))
        for col in _columns(block):
            fh.write(np.ascontiguousarray(col, dtype="<f8").tobytes())


def _columns(block: SymbolBlock):
    yield block.alice_x
    yield block.alice_p
    for k in range(block.n_users):
        yield block.y_x[:, k]
    for k in range(block.n_users):
        yield block.y_p[:, k]


def read_block(path: str) -> SymbolBlock:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise CorruptInputError(f"{path}: truncated header")
        magic, version, n, m, seed = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise CorruptInputError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise CorruptInputError(f"{path}: unsupported version {version}")
        want = (2 + 2 * m) * n * 8
        body = fh.read(want + 1)
        if len(body) != want:
            raise CorruptInputError(
                f"{path}: expected {want} payload bytes for n={n}, M={m}, got {len(body)}"
            )
    flat = np.frombuffer(body, dtype="<f8")
    cols = flat.reshape(2 + 2 * m, n)
    return SymbolBlock(
        n=int(n),
        alice_x=cols[0].copy(),
        alice_p=cols[1].copy(),
        y_x=cols[2 : 2 + m].T.copy(),
        y_p=cols[2 + m :].T.copy(),
        seed=int(seed),
        params_truth=None,
    )


def write_block_csv(block: SymbolBlock, path: str) -> None:
    header = ["alice_x", "alice_p"]
    header += [f"y_x_{k + 1}" for k in range(block.n_users)]
    header += [f"y_p_{k + 1}" for k in range(block.n_users)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        cols = list(_columns(block))
        for i in range(block.n):
            writer.writerow([f"{col[i]:.17g}" for col in cols])
