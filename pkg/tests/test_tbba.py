import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.controllers.channelController import link_budget
from app.controllers.tbbaController import (
    conditional_moments,
    decide_from_observation,
    mmwave_probability,
    perturb_link_budget,
    q,
    q_inv,
    shadowing_threshold,
    tbba_config_for,
    tbba_decide,
    tbba_decide_batch,
    tbba_error,
    v_pair,
)
from app.models.channel_model import CellConfig, LinkBudget
from app.models.dataset_model import FeatureVector
from app.models.tbba_model import TbbaConfig
from app.utils.exceptions import DomainError, InsufficientFeatureError, UnsupportedConfigurationError


def _cfg(rng, gamma_t=None) -> TbbaConfig:
    return TbbaConfig(
        gamma_t=rng.uniform(0.05, 0.95) if gamma_t is None else gamma_t,
        sigma_c=rng.uniform(2.0, 8.0),
        sigma_m=rng.uniform(2.0, 10.0),
        rho=rng.uniform(0.05, 0.95),
        w_c=10e6,
        w_m=100e6,
        lb=LinkBudget(gamma_prime_c=10 ** rng.uniform(0, 8), gamma_prime_m=10 ** rng.uniform(0, 8)),
    )


def _rate_c(s_c: float, cfg: TbbaConfig) -> float:
    return cfg.w_c * math.log1p(cfg.lb.gamma_prime_c * 10 ** (0.1 * s_c))


def test_q_known_values():
    assert q(0.0) == 0.5
    assert q(1.0) == pytest.approx(0.15865525393145707, rel=1e-12)
    np.testing.assert_allclose(q(np.array([-1.0, 1.0])).sum(), 1.0)


def test_q_inv_round_trip():
    for x in np.linspace(0.0, 6.0, 61):
        assert abs(q_inv(q(x)) - x) < 1e-9
    for p in q(np.linspace(-6.0, 6.0, 121)):
        if 0 < p < 1:
            assert abs(q(q_inv(p)) - p) < 1e-9


def test_q_inv_domain():
    assert q_inv(0.5) == pytest.approx(0.0, abs=1e-15)
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            q_inv(p)


def test_tbba_config_rejects_zero_correlation():
    with pytest.raises(ValidationError):
        TbbaConfig(sigma_c=5, sigma_m=7, rho=0.0, w_c=1, w_m=1, lb=LinkBudget(gamma_prime_c=1, gamma_prime_m=1))


def test_v_pair_inverts_rate():
    cfg = _cfg(np.random.default_rng(0))
    vp = v_pair(_rate_c(3.0, cfg), cfg)
    assert vp.v0 == pytest.approx(3.0, abs=1e-9)


def test_v_pair_needs_positive_rate():
    cfg = _cfg(np.random.default_rng(0))
    with pytest.raises(DomainError):
        v_pair(0.0, cfg)


def test_conditional_moments():
    cfg = TbbaConfig(sigma_c=5, sigma_m=7, rho=0.75, w_c=1, w_m=1, lb=LinkBudget(gamma_prime_c=1, gamma_prime_m=1))
    m = conditional_moments(2.0, cfg)
    assert m.mu == pytest.approx(0.75 * 7 / 5 * 2.0)
    assert m.sigma2 == pytest.approx((1 - 0.75 ** 2) * 49)


def test_threshold_tie_goes_to_mmwave():
    cfg = _cfg(np.random.default_rng(1))
    r_c = _rate_c(0.0, cfg)
    assert decide_from_observation(shadowing_threshold(r_c, cfg), r_c, cfg) == 1


def test_threshold_requires_positive_correlation():
    cfg = TbbaConfig.model_construct(gamma_t=0.5, sigma_c=5.0, sigma_m=7.0, rho=-0.5, w_c=10e6, w_m=100e6,
                                     lb=LinkBudget(gamma_prime_c=1e4, gamma_prime_m=1e3))
    with pytest.raises(UnsupportedConfigurationError):
        shadowing_threshold(1e7, cfg)
    # the probability rule still decides
    assert decide_from_observation(0.0, 1e7, cfg) in (0, 1)


def test_threshold_matches_probability_rule():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(2000):
        cfg = _cfg(rng)
        s_c = rng.uniform(-15.0, 15.0)
        r_c = _rate_c(s_c, cfg)
        p = mmwave_probability(r_c, cfg)
        if abs(p - cfg.gamma_t) <= 1e-9:
            continue
        v0 = v_pair(r_c, cfg).v0
        assert decide_from_observation(v0, r_c, cfg) == int(p >= cfg.gamma_t)
        checked += 1
    assert checked > 1900


def _monte_carlo_check(n_instances: int, n_draws: int, seed: int, half_width: float = 0.05) -> None:
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        cfg = _cfg(rng)
        s_c = rng.uniform(-5.0, 5.0)
        r_c = _rate_c(s_c, cfg)
        p = mmwave_probability(r_c, cfg)
        cross = cfg.rho * cfg.sigma_c * cfg.sigma_m
        cov = [[cfg.sigma_c ** 2, cross], [cross, cfg.sigma_m ** 2]]
        draws = rng.multivariate_normal([0.0, 0.0], cov, size=n_draws)
        # joint draws whose cmWave shadowing lands next to the observed one
        s_m = draws[np.abs(draws[:, 0] - s_c) <= half_width, 1]
        assert s_m.size >= 100
        r_m = cfg.w_m * np.log1p(cfg.lb.gamma_prime_m * 10 ** (0.1 * s_m))
        estimate = float(np.mean(r_m >= r_c))
        se = math.sqrt(max(p * (1 - p), 1e-12) / s_m.size)
        assert abs(estimate - p) <= 3 * se


def test_probability_matches_monte_carlo():
    _monte_carlo_check(n_instances=5, n_draws=400_000, seed=3)


@pytest.mark.slow
def test_probability_matches_monte_carlo_full():
    _monte_carlo_check(n_instances=50, n_draws=1_000_000, seed=4)


def test_perturb_link_budget():
    lb = LinkBudget(gamma_prime_c=100.0, gamma_prime_m=10.0)
    assert perturb_link_budget(lb, 0.0) == lb
    shifted = perturb_link_budget(lb, 10.0)
    assert shifted.gamma_prime_c == pytest.approx(10.0)
    assert shifted.gamma_prime_m == pytest.approx(1.0)


def test_tbba_config_for_uses_cell_statistics():
    cell = CellConfig()
    cfg = tbba_config_for(80.0, cell, gamma_t=0.3)
    assert cfg.lb == link_budget(80.0, cell)
    assert (cfg.rho, cfg.sigma_c, cfg.sigma_m, cfg.gamma_t) == (0.75, 5.0, 7.0, 0.3)


def test_tbba_decide_needs_distance_and_power():
    with pytest.raises(InsufficientFeatureError):
        tbba_decide(FeatureVector(d=10.0), CellConfig())


def test_batch_matches_single_decisions(small_cell, small_cfg):
    batch = tbba_decide_batch(small_cell, small_cfg)
    single = [tbba_decide(ex.features, small_cfg) for ex in small_cell.examples]
    assert batch.tolist() == single


def test_extreme_thresholds(small_cell, small_cfg):
    assert tbba_decide_batch(small_cell, small_cfg, gamma_t=0.0).all()
    assert not tbba_decide_batch(small_cell, small_cfg, gamma_t=1.0).any()


def test_tbba_error_in_unit_interval(small_cell, small_cfg):
    e = tbba_error(small_cell, small_cfg)
    assert 0.0 <= e <= 1.0


@pytest.mark.slow
def test_tbba_benchmark_error():
    from app.controllers.experimentController import run_tbba_study

    report = run_tbba_study(CellConfig(), n_cells=200, seed=7)
    assert report.row("tbba", "all").mean == pytest.approx(0.192, abs=0.015)
