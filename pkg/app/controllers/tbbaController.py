import logging
import math
from typing import Union

import numpy as np
from scipy.special import erfc, ndtri

from app.controllers.channelController import gamma_prime, link_budget
from app.controllers.learnerController import error_metric
from app.models.channel_model import GAMMA_DPRIME, CellConfig, LinkBudget
from app.models.dataset_model import Dataset, FeatureVector
from app.models.tbba_model import DEFAULT_GAMMA_T, ConditionalMoments, TbbaConfig, VPair
from app.utils.exceptions import DomainError, InsufficientFeatureError, UnsupportedConfigurationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def q(x: ArrayLike) -> ArrayLike:
    """Gaussian upper-tail probability Q(x) = P(Z > x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=np.float64) / _SQRT2)
    return float(out) if np.ndim(x) == 0 else out


def q_inv(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"q_inv is defined on (0, 1), got {p!r}")
    x = -float(ndtri(p))
    # one safeguarded Newton step on Q(x) - p; Q'(x) = -phi(x)
    phi = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
    if phi > 0:
        polished = x + (q(x) - p) / phi
        if math.isfinite(polished) and abs(q(polished) - p) <= abs(q(x) - p):
            x = polished
    return x


def _v_values(r_c: ArrayLike, w: float, gamma_prime: ArrayLike) -> ArrayLike:
    # inverse of r = w * ln(1 + g' * 10^(g'' * v)) for v
    with np.errstate(divide="ignore"):
        return np.log10(np.expm1(np.asarray(r_c) / w) / gamma_prime) / GAMMA_DPRIME


def v_pair(r_c: float, cfg: TbbaConfig) -> VPair:
    if not r_c > 0:
        raise DomainError(f"observed cmWave rate must be > 0, got {r_c!r}")
    if cfg.lb.gamma_prime_c <= 0 or cfg.lb.gamma_prime_m <= 0:
        raise DomainError("both bands need a positive link budget")
    return VPair(v0=float(_v_values(r_c, cfg.w_c, cfg.lb.gamma_prime_c)),
                 v1=float(_v_values(r_c, cfg.w_m, cfg.lb.gamma_prime_m)))


def conditional_moments(v0: float, cfg: TbbaConfig) -> ConditionalMoments:
    return ConditionalMoments(mu=cfg.rho * cfg.sigma_m / cfg.sigma_c * v0,
                              sigma2=max(0.0, (1.0 - cfg.rho ** 2) * cfg.sigma_m ** 2))


def mmwave_probability(r_c: float, cfg: TbbaConfig) -> float:
    """P(S^m >= v1 | S^c = v0): probability that the mmWave rate beats the observed cmWave rate."""
    vp = v_pair(r_c, cfg)
    moments = conditional_moments(vp.v0, cfg)
    if moments.sigma2 == 0:
        return 1.0 if moments.mu >= vp.v1 else 0.0
    return q((vp.v1 - moments.mu) / moments.sigma)


def _q_inv_or_edge(gamma_t: float) -> float:
    if gamma_t <= 0:
        return math.inf
    if gamma_t >= 1:
        return -math.inf
    return q_inv(gamma_t)


def shadowing_threshold(r_c: float, cfg: TbbaConfig) -> float:
    """cmWave shadowing (dB) at or above which the MS goes to mmWave. Requires rho > 0."""
    if cfg.rho <= 0:
        raise UnsupportedConfigurationError(
            f"closed-form threshold assumes positive correlation, got rho={cfg.rho:g}")
    vp = v_pair(r_c, cfg)
    sigma_cond = conditional_moments(vp.v0, cfg).sigma
    return cfg.sigma_c / (cfg.rho * cfg.sigma_m) * (vp.v1 - _q_inv_or_edge(cfg.gamma_t) * sigma_cond)


def decide_from_observation(s_c: float, r_c: float, cfg: TbbaConfig) -> int:
    """Ties go to mmWave (the rule uses >=)."""
    if cfg.rho > 0:
        return int(s_c >= shadowing_threshold(r_c, cfg))
    return int(mmwave_probability(r_c, cfg) >= cfg.gamma_t)


def perturb_link_budget(lb: LinkBudget, offset_db: float) -> LinkBudget:
    """Link budget as believed by a BS whose path-loss estimate is off by `offset_db` in both bands."""
    factor = 10.0 ** (-0.1 * offset_db)
    return LinkBudget(gamma_prime_c=lb.gamma_prime_c * factor, gamma_prime_m=lb.gamma_prime_m * factor)


def tbba_config_for(d: float, cell_cfg: CellConfig, gamma_t: float = DEFAULT_GAMMA_T,
                    pathloss_offset_db: float = 0.0) -> TbbaConfig:
    lb = link_budget(d, cell_cfg)
    if pathloss_offset_db:
        lb = perturb_link_budget(lb, pathloss_offset_db)
    return TbbaConfig(gamma_t=gamma_t, sigma_c=cell_cfg.sigma_c, sigma_m=cell_cfg.sigma_m, rho=cell_cfg.rho,
                      w_c=cell_cfg.w_c, w_m=cell_cfg.w_m, lb=lb)


def tbba_decide(features: FeatureVector, cell_cfg: CellConfig, gamma_t: float = DEFAULT_GAMMA_T,
                pathloss_offset_db: float = 0.0) -> int:
    """Band decision for one MS from its distance and observed cmWave SNR (dB)."""
    if features.d is None or features.cm_power is None:
        raise InsufficientFeatureError("TBBA needs the distance and the cmWave observation")
    cfg = tbba_config_for(features.d, cell_cfg, gamma_t, pathloss_offset_db)
    # invert SNR = P_tx - PL - N0 + S with the believed link budget
    s_c = features.cm_power - 10 * math.log10(cfg.lb.gamma_prime_c)
    r_c = cfg.w_c * math.log1p(cfg.lb.gamma_prime_c * 10 ** (GAMMA_DPRIME * s_c))
    return decide_from_observation(s_c, r_c, cfg)


def tbba_decide_batch(ds: Dataset, cell_cfg: CellConfig, gamma_t: float = DEFAULT_GAMMA_T,
                      pathloss_offset_db: float = 0.0) -> np.ndarray:
    """Vectorized tbba_decide over every example of `ds` (raw, not standardized)."""
    if ds.standardized or not (ds.has_feature("d") and ds.has_feature("cm_power")):
        raise InsufficientFeatureError("TBBA needs raw distance and cmWave observation columns")
    d = ds.column("d")
    snr = ds.column("cm_power")
    if np.any(np.isnan(d)) or np.any(np.isnan(snr)):
        raise InsufficientFeatureError("TBBA needs the distance and the cmWave observation for every example")
    factor = 10.0 ** (-0.1 * pathloss_offset_db)
    gp_c = gamma_prime("c", d, cell_cfg) * factor
    gp_m = gamma_prime("m", d, cell_cfg) * factor
    s_c = snr - 10 * np.log10(gp_c)
    r_c = cell_cfg.w_c * np.log1p(gp_c * 10.0 ** (GAMMA_DPRIME * s_c))
    v0 = _v_values(r_c, cell_cfg.w_c, gp_c)
    v1 = _v_values(r_c, cell_cfg.w_m, gp_m)
    rho, sc, sm = cell_cfg.rho, cell_cfg.sigma_c, cell_cfg.sigma_m
    sigma_cond = math.sqrt(max(0.0, (1 - rho ** 2) * sm ** 2))
    if rho > 0:
        threshold = sc / (rho * sm) * (v1 - _q_inv_or_edge(gamma_t) * sigma_cond)
        decisions = s_c >= threshold
    else:
        mu = rho * sm / sc * v0
        with np.errstate(divide="ignore", invalid="ignore"):
            prob = q((v1 - mu) / sigma_cond) if sigma_cond > 0 else (mu >= v1).astype(float)
        decisions = prob >= gamma_t
    return decisions.astype(np.int8)


def tbba_error(ds: Dataset, cell_cfg: CellConfig, gamma_t: float = DEFAULT_GAMMA_T,
               pathloss_offset_db: float = 0.0) -> float:
    return error_metric(ds.labels, tbba_decide_batch(ds, cell_cfg, gamma_t, pathloss_offset_db))
