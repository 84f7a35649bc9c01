import math

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

SPEED_OF_LIGHT = 299_792_458.0  # m/s
GAMMA_DPRIME = 0.1


class CellConfig(BaseModel):
    """Stochastic cell parameters; defaults are the benchmark configuration."""

    f_c: float = Field(2.5e9, gt=0)  # Hz
    f_m: float = Field(28e9, gt=0)
    w_c: float = Field(10e6, gt=0)  # Hz
    w_m: float = Field(100e6, gt=0)
    p_tx_c: float = 15.0  # dBm
    p_tx_m: float = 22.0  # dBm; -inf disables the mmWave band
    eps: float = Field(4.0, ge=2)
    d_break: float = Field(50.0, gt=0)  # m
    d_dcor_c: float = Field(25.0, gt=0)  # m
    d_dcor_m: float = Field(24.0, gt=0)
    sigma_c: float = Field(5.0, gt=0)  # dB
    sigma_m: float = Field(7.0, gt=0)
    rho: float = Field(0.75, gt=-1, lt=1)
    noise_psd: float = -174.0  # dBm/Hz
    cell_side: float = Field(500.0, gt=0)  # m
    n_points: int = Field(2000, ge=1)

    class Config:
        frozen = True

    @field_validator("p_tx_c", "p_tx_m")
    def no_nan_power(cls, v):
        if math.isnan(v) or v == math.inf:
            raise ValueError("transmit power must be finite or -inf")
        return v


class LinkBudget(BaseModel):
    gamma_prime_c: float = Field(ge=0)
    gamma_prime_m: float = Field(ge=0)
    gamma_dprime: float = GAMMA_DPRIME

    class Config:
        frozen = True

    @field_validator("gamma_dprime")
    def fixed_exponent(cls, v):
        if v != GAMMA_DPRIME:
            raise ValueError("gamma'' is fixed at 0.1")
        return v


class MsPlacement(BaseModel):
    """MS positions relative to the BS at the origin; polar coordinates derived on construction."""

    x: np.ndarray
    y: np.ndarray
    cell_side: float = Field(gt=0)

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("x", "y", mode="before")
    def as_vector(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def inside_cell(self):
        if self.x.shape != self.y.shape or self.x.size < 1:
            raise ValueError("x and y must be non-empty and equally long")
        half = self.cell_side / 2
        if np.any(np.abs(self.x) > half) or np.any(np.abs(self.y) > half):
            raise ValueError("positions must lie inside the square cell")
        return self

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def d(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    @property
    def theta(self) -> np.ndarray:
        return np.arctan2(self.y, self.x)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


class JointShadowing(BaseModel):
    s_c: np.ndarray  # dB
    s_m: np.ndarray  # dB

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("s_c", "s_m", mode="before")
    def as_vector(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("shadowing values must be finite")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def same_length(self):
        if self.s_c.shape != self.s_m.shape:
            raise ValueError("both bands need one shadowing value per position")
        return self
