import math

from pydantic import BaseModel, Field, field_validator

from app.models.channel_model import LinkBudget

DEFAULT_GAMMA_T = 0.5


class TbbaConfig(BaseModel):
    """Everything the threshold rule needs for one MS: channel statistics plus its link budget."""

    gamma_t: float = Field(DEFAULT_GAMMA_T, ge=0, le=1)
    sigma_c: float = Field(gt=0)
    sigma_m: float = Field(gt=0)
    rho: float = Field(gt=-1, lt=1)
    w_c: float = Field(gt=0)
    w_m: float = Field(gt=0)
    lb: LinkBudget

    class Config:
        frozen = True

    @field_validator("rho")
    def correlated(cls, v):
        if v == 0:
            raise ValueError("rho must be non-zero: the rule conditions on the correlated band")
        return v


class VPair(BaseModel):
    v0: float  # dB
    v1: float  # dB

    class Config:
        frozen = True

    @field_validator("v0", "v1")
    def finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("v values must be finite")
        return v


class ConditionalMoments(BaseModel):
    mu: float  # dB
    sigma2: float = Field(ge=0)  # dB^2

    class Config:
        frozen = True

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)
