import logging
import math
from typing import Literal, Union

import numpy as np
from scipy.spatial.distance import cdist

from app.models.channel_model import (
    GAMMA_DPRIME,
    SPEED_OF_LIGHT,
    CellConfig,
    JointShadowing,
    LinkBudget,
    MsPlacement,
)
from app.models.dataset_model import Dataset
from app.utils.exceptions import NonPsdCovarianceError, OutOfRangeError
from app.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

Band = Literal["c", "m"]
ArrayLike = Union[float, np.ndarray]

MIN_DISTANCE = 1.0  # m, reference distance of the free-space term
JITTER_STEPS = (0.0, 1e-10, 1e-8, 1e-6)  # relative to the largest shadowing variance


def _band(band: Band, cfg: CellConfig):
    if band == "c":
        return cfg.f_c, cfg.w_c, cfg.p_tx_c
    if band == "m":
        return cfg.f_m, cfg.w_m, cfg.p_tx_m
    raise ValueError(f"unknown band {band!r}")


def _scalar_or_array(x: np.ndarray, like) -> ArrayLike:
    return float(x) if np.ndim(like) == 0 else x


def path_loss(d: ArrayLike, f: float, cfg: CellConfig) -> ArrayLike:
    """Two-slope path loss in dB: free space (exponent 2) up to d_break, exponent eps beyond."""
    dist = np.asarray(d, dtype=np.float64)
    if np.any(dist < MIN_DISTANCE):
        raise OutOfRangeError(f"distance must be >= {MIN_DISTANCE} m, got {np.min(dist):g}")
    fspl_1m = 20 * math.log10(4 * math.pi * f / SPEED_OF_LIGHT)
    near = fspl_1m + 20 * np.log10(np.minimum(dist, cfg.d_break))
    far = 10 * cfg.eps * np.log10(np.maximum(dist, cfg.d_break) / cfg.d_break)
    return _scalar_or_array(near + far, d)


def noise_power(w: float, cfg: CellConfig) -> float:
    return cfg.noise_psd + 10 * math.log10(w)


def gamma_prime(band: Band, d: ArrayLike, cfg: CellConfig) -> ArrayLike:
    f, w, p_tx = _band(band, cfg)
    return 10.0 ** ((p_tx - path_loss(d, f, cfg) - noise_power(w, cfg)) * 0.1)


def link_budget(d: float, cfg: CellConfig) -> LinkBudget:
    return LinkBudget(gamma_prime_c=gamma_prime("c", d, cfg), gamma_prime_m=gamma_prime("m", d, cfg))


def snr_db(band: Band, d: ArrayLike, shadowing_db: ArrayLike, cfg: CellConfig) -> ArrayLike:
    f, w, p_tx = _band(band, cfg)
    return p_tx - path_loss(d, f, cfg) - noise_power(w, cfg) + shadowing_db


def rate(band: Band, lb: LinkBudget, shadowing_db: ArrayLike, cfg: CellConfig) -> ArrayLike:
    """Shannon rate in nats/s (natural log)."""
    gp = lb.gamma_prime_c if band == "c" else lb.gamma_prime_m
    w = _band(band, cfg)[1]
    r = w * np.log1p(gp * 10.0 ** (GAMMA_DPRIME * np.asarray(shadowing_db, dtype=np.float64)))
    return _scalar_or_array(r, shadowing_db)


def _rates_from_snr(snr: np.ndarray, w: float) -> np.ndarray:
    return w * np.log1p(10.0 ** (0.1 * snr))


def place_ms(cfg: CellConfig, rng: np.random.Generator) -> MsPlacement:
    half = cfg.cell_side / 2
    xy = rng.uniform(-half, half, size=(cfg.n_points, 2))
    return MsPlacement(x=xy[:, 0], y=xy[:, 1], cell_side=cfg.cell_side)


def joint_shadowing_covariance(placement: MsPlacement, cfg: CellConfig) -> np.ndarray:
    """Covariance of (S^c_1..S^c_N, S^m_1..S^m_N): exponential spatial decay per band,
    cross-band decay over the geometric mean of the decorrelation distances."""
    dist = cdist(placement.positions, placement.positions)
    c_cc = cfg.sigma_c ** 2 * np.exp(-dist / cfg.d_dcor_c)
    c_mm = cfg.sigma_m ** 2 * np.exp(-dist / cfg.d_dcor_m)
    c_cm = cfg.rho * cfg.sigma_c * cfg.sigma_m * np.exp(-dist / math.sqrt(cfg.d_dcor_c * cfg.d_dcor_m))
    return np.block([[c_cc, c_cm], [c_cm.T, c_mm]])


def _factorize(cov: np.ndarray, variance_scale: float) -> np.ndarray:
    eye = np.eye(cov.shape[0])
    jitter = 0.0
    for step in JITTER_STEPS:
        jitter = step * variance_scale
        try:
            factor = np.linalg.cholesky(cov + jitter * eye if jitter else cov)
        except np.linalg.LinAlgError:
            continue
        if jitter:
            logger.warning("covariance factorized only after diagonal jitter %g", jitter)
        return factor
    raise NonPsdCovarianceError(jitter)


def sample_joint_shadowing_draws(placement: MsPlacement, cfg: CellConfig, seed: int, n_draws: int) -> np.ndarray:
    """`n_draws` independent joint draws, shape (n_draws, 2N); columns [:N] are band c, [N:] band m."""
    cov = joint_shadowing_covariance(placement, cfg)
    factor = _factorize(cov, max(cfg.sigma_c, cfg.sigma_m) ** 2)
    z = make_rng(seed).standard_normal((cov.shape[0], n_draws))
    return (factor @ z).T


def sample_joint_shadowing(placement: MsPlacement, cfg: CellConfig, seed: int) -> JointShadowing:
    draw = sample_joint_shadowing_draws(placement, cfg, seed, 1)[0]
    return JointShadowing(s_c=draw[: placement.n], s_m=draw[placement.n:])


def generate_cell(cfg: CellConfig, seed: int) -> Dataset:
    """One cell realization: uniform MSs, correlated two-band shadowing, features (d, theta, SNR^c), rate labels."""
    placement = place_ms(cfg, make_rng(derive_seed(seed, "positions")))
    shadowing = sample_joint_shadowing(placement, cfg, derive_seed(seed, "shadowing"))
    d = np.maximum(placement.d, MIN_DISTANCE)
    snr_c = snr_db("c", d, shadowing.s_c, cfg)
    snr_m = snr_db("m", d, shadowing.s_m, cfg)
    labels = (_rates_from_snr(snr_m, cfg.w_m) > _rates_from_snr(snr_c, cfg.w_c)).astype(np.int8)
    values = np.column_stack([d, placement.theta, snr_c])
    return Dataset(features=("d", "theta", "cm_power"), values=values, labels=labels)
