import numpy as np
import pytest

from app.controllers.channelController import generate_cell
from app.models.channel_model import SPEED_OF_LIGHT, CellConfig
from app.models.dataset_model import Dataset
from app.models.learner_model import TrainConfig

TINY_CONFIG = """\
# small enough for the default test run
n_points=40
layouts=3
alphas=0.1
acceptance_layout=3
acceptance_alpha=0.1
acceptance_cells=2
cv_repeats=1
max_epochs=5
n_cells=2
group_size=3
group_train=1
group_validation=1
group_test=1
n_groups=2
"""


@pytest.fixture
def small_cfg() -> CellConfig:
    return CellConfig(n_points=60)


@pytest.fixture
def small_cell(small_cfg) -> Dataset:
    return generate_cell(small_cfg, seed=11)


@pytest.fixture
def fast_train() -> TrainConfig:
    return TrainConfig(max_epochs=20, learning_rate=0.1, batch_size=32, patience=5)


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path


def planted_dataset(n: int = 400, seed: int = 0, rule: str = "power") -> Dataset:
    """All five features; label 1 iff cm_power > 15 dB ("power") or d < 200 m ("distance"),
    with a 2-unit margin around the boundary. Delay is geometry consistent (d / c)."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    while len(rows) < n:
        d = rng.uniform(10.0, 390.0)
        theta = rng.uniform(-np.pi, np.pi)
        power = rng.uniform(-10.0, 40.0)
        if rule == "power":
            if abs(power - 15.0) < 2.0:
                continue
            label = int(power > 15.0)
        else:
            if abs(d - 200.0) < 5.0:
                continue
            label = int(d < 200.0)
        mpc = rng.uniform(-100.0, -60.0)
        rows.append([d, theta, power, d / SPEED_OF_LIGHT, mpc])
        labels.append(label)
    return Dataset(features=("d", "theta", "cm_power", "delay", "mpc_power"), values=rows, labels=labels)


@pytest.fixture
def planted():
    return planted_dataset()


def xor_dataset(n_per_quadrant: int = 100, seed: int = 0) -> Dataset:
    """theta and cm_power around the four quadrant centres; label 1 iff both share a sign."""
    rng = np.random.default_rng(seed)
    values, labels = [], []
    for sign_theta, sign_power in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
        theta = sign_theta * 1.0 + 0.1 * rng.standard_normal(n_per_quadrant)
        power = sign_power * 10.0 + rng.standard_normal(n_per_quadrant)
        values.append(np.column_stack([theta, power]))
        labels += [int(sign_theta == sign_power)] * n_per_quadrant
    return Dataset(features=("theta", "cm_power"), values=np.vstack(values), labels=labels)
