"""Experiment configuration files.

A config is a UTF-8 JSON object; every key is optional and unknown keys are
rejected. Defaults reproduce the reference setup (16 x 8 ULAs at half
wavelength, 4 streams, true angle 45 deg, obfuscated angle 75 deg,
K-factor 0 dB, 20 NLOS paths)::

    {
      "channel": {"n_t": 16, "n_r": 8, "wavelength_lambda": 0.001,
                  "spacing_d": 0.0005, "true_angle_phi": 45.0,
                  "rician_k_db": 0.0, "n_paths_L": 20},
      "design": {"n_streams": 4, "phi_hat": 75.0, "power_p": 1.0,
                 "boundary_tol_eps": 1e-6},
      "snr_db_list": [10.0],
      "gamma_th_list": [2.0],
      "strategy": "os",
      "q": 10,
      "q_list": [1, 10],
      "trials": 200,
      "master_seed": 0,
      "grid_step": 0.25,
      "workers": 1
    }

``gamma_th_list`` entries are numbers or the token ``"gamma_max"``, which
resolves per channel draw to that draw's largest attainable DAOR. SNR is
``P / N0`` in dB; ``N0`` is derived from it and ``power_p``.
"""

import json
from pathlib import Path
from typing import List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import ArrayGeometry, ChannelConfig, db_to_linear
from .design import DesignConfig
from .errors import InvalidConfig

SCHEMA_VERSION = 1
GAMMA_MAX = "gamma_max"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelSection(_Strict):
    n_t: int = Field(16, ge=1)
    n_r: int = Field(8, ge=1)
    wavelength_lambda: float = Field(1e-3, gt=0)
    spacing_d: float = Field(5e-4, gt=0)
    true_angle_phi: float = Field(45.0, gt=0, lt=180)
    rician_k_db: float = 0.0
    n_paths_L: int = Field(20, ge=1)


class DesignSection(_Strict):
    n_streams: int = Field(4, ge=1)
    phi_hat: float = Field(75.0, ge=0, le=180)
    power_p: float = Field(1.0, gt=0)
    boundary_tol_eps: float = Field(1e-6, ge=0)


class ExperimentConfig(_Strict):
    channel: ChannelSection = ChannelSection()
    design: DesignSection = DesignSection()
    snr_db_list: List[float] = Field(default_factory=lambda: [10.0], min_length=1)
    gamma_th_list: List[Union[float, Literal["gamma_max"]]] = Field(
        default_factory=lambda: [2.0], min_length=1)
    strategy: Literal["os", "ss"] = "os"
    q: int = Field(10, ge=1)
    q_list: List[int] = Field(default_factory=lambda: [1, 10], min_length=1)
    trials: int = Field(200, ge=1)
    master_seed: int = Field(0, ge=0, lt=2 ** 64)
    grid_step: float = Field(0.25, gt=0, le=5)
    workers: int = Field(1, ge=1)

    @field_validator("gamma_th_list")
    @classmethod
    def _non_negative(cls, values):
        for v in values:
            if v != GAMMA_MAX and not v >= 0:
                raise ValueError(f"gamma_th values must be >= 0 or 'gamma_max', got {v}")
        return values

    @field_validator("q_list")
    @classmethod
    def _positive_q(cls, values):
        if any(v < 1 for v in values):
            raise ValueError("q_list entries must be >= 1")
        return values

    @model_validator(mode="after")
    def _consistent(self):
        ch, de = self.channel, self.design
        if de.n_streams > min(ch.n_t, ch.n_r):
            raise ValueError(
                f"design.n_streams={de.n_streams} exceeds min(N_T, N_R) = {min(ch.n_t, ch.n_r)}")
        if abs(de.phi_hat - ch.true_angle_phi) < 0.5:
            raise ValueError("design.phi_hat must differ from channel.true_angle_phi by >= 0.5 deg")
        return self

    # conversions to the library's domain types

    def channel_config(self) -> ChannelConfig:
        ch = self.channel
        geom = dict(spacing_d=ch.spacing_d, wavelength_lambda=ch.wavelength_lambda)
        return ChannelConfig(
            tx_geometry=ArrayGeometry(ch.n_t, **geom),
            rx_geometry=ArrayGeometry(ch.n_r, **geom),
            true_angle_phi=ch.true_angle_phi,
            rician_k_linear=db_to_linear(ch.rician_k_db),
            n_paths_L=ch.n_paths_L,
        )

    def noise_n0(self, snr_db):
        return self.design.power_p / db_to_linear(snr_db)

    def design_config(self, snr_db, gamma_th, q=None) -> DesignConfig:
        de = self.design
        return DesignConfig(
            gamma_th=float(gamma_th),
            power_p=de.power_p,
            noise_n0=self.noise_n0(snr_db),
            n_streams=de.n_streams,
            phi=self.channel.true_angle_phi,
            phi_hat=de.phi_hat,
            boundary_tol_eps=de.boundary_tol_eps,
            ss_shortlist_q=self.q if q is None else q,
        )

    def echo(self):
        """Fully resolved config as plain JSON data.

        ``workers`` is left out: it never changes results, and keeping it
        would make records differ between runs with different pool sizes.
        """
        out = self.model_dump(mode="json", exclude={"workers"})
        out["channel"]["rician_k_linear"] = db_to_linear(self.channel.rician_k_db)
        return out


def parse_config(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{loc}: {err['msg']}")
        raise InvalidConfig("invalid configuration:\n  " + "\n  ".join(lines)) from None


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: top level must be a JSON object")
    return parse_config(data)
