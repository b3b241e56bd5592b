"""Schema-validated scenario and experiment configuration (YAML or JSON)."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .adversary import canonical_kind
from .core import ParameterError, SystemParams
from .netsim import check_ge


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsCfg(_Strict):
    n: int = Field(ge=1)
    R: int = Field(ge=1)
    rep: int = Field(default=0, ge=0)
    k: int | None = None

    def build(self) -> SystemParams:
        return SystemParams(n=self.n, R=self.R, rep=self.rep, k=self.k)


class CryptoCfg(_Strict):
    backend: Literal["sim", "ecdsa-p256"] = "sim"


class NetCfg(_Strict):
    model: Literal["bernoulli", "gilbert-elliot"] = "bernoulli"
    p_loss: float = Field(default=0.0, ge=0.0, le=1.0)
    alpha: float = 0.5
    beta: float = 0.5
    bursty: bool = True
    start_bad: bool = False

    @model_validator(mode="after")
    def _ge(self):
        if self.model == "gilbert-elliot":
            check_ge(self.alpha, self.beta, self.bursty)
        return self


class SimCfg(_Strict):
    seed: int = 0
    rounds: int | None = Field(default=None, ge=1)


class AdversaryCfg(_Strict):
    count: int = Field(default=0, ge=0)
    kind: str = "withhold"
    targets: Union[Literal["first-k", "last-k"], list[int]] = "last-k"
    cross_forward: bool = False

    @field_validator("kind")
    @classmethod
    def _kind(cls, v: str) -> str:
        return canonical_kind(v)


class Timed(_Strict):
    node: int = Field(ge=0)
    round: int = Field(ge=0)


class MembershipCfg(_Strict):
    detect: bool = False
    joiners: list[int] = []
    joins: list[Timed] = []
    leaves: list[Timed] = []
    kills: list[Timed] = []


class BroadcastCfg(_Strict):
    sender: int = Field(ge=0)
    round: int = Field(ge=0)
    value: str = ""
    size_bits: int | None = Field(default=None, ge=8)

    def payload(self) -> bytes:
        if self.size_bits is not None:
            return (self.value.encode() * (self.size_bits // 8 + 1) or b"\x01" * (self.size_bits // 8))[: self.size_bits // 8]
        return self.value.encode()


class ScenarioConfig(_Strict):
    params: ParamsCfg
    crypto: CryptoCfg = CryptoCfg()
    net: NetCfg = NetCfg()
    sim: SimCfg = SimCfg()
    adversary: AdversaryCfg = AdversaryCfg()
    membership: MembershipCfg = MembershipCfg()
    broadcasts: list[BroadcastCfg] = []

    @model_validator(mode="after")
    def _consistent(self):
        params = self.params.build()
        joiners = set(self.membership.joiners)
        everyone = set(range(params.n)) | joiners
        if joiners & set(range(params.n)):
            raise ParameterError("joiner ids must not overlap the initial ids 0..n-1")
        for b in self.broadcasts:
            if b.sender not in everyone:
                raise ParameterError(f"broadcast sender {b.sender} is not a process")
        for t in (*self.membership.joins, *self.membership.leaves, *self.membership.kills):
            if t.node not in everyone:
                raise ParameterError(f"membership action names unknown node {t.node}")
        if self.adversary.count > params.f:
            raise ParameterError(f"adversary.count={self.adversary.count} exceeds f={params.f}")
        return self


class ReliabilityCfg(_Strict):
    sizes: list[int]
    R: list[int]
    model: Literal["bernoulli", "gilbert-elliot"] = "bernoulli"
    p_loss: list[float] = []
    ge: list[tuple[float, float]] = []
    bursty: bool = True

    @model_validator(mode="after")
    def _ge(self):
        for a, b in self.ge:
            check_ge(a, b, self.bursty)
        return self


class ShutdownCfg(_Strict):
    p_crash: list[float]
    f: list[int] = [1]


class WindowCfg(_Strict):
    sizes: list[int]
    p_loss: float = 0.9
    reps: int | None = None


class LatencyCfg(_Strict):
    sizes: list[int]
    p_loss: list[float] = [0.0]
    R: int | None = None
    backend: Literal["sim", "ecdsa-p256"] = "ecdsa-p256"


class BandwidthCfg(_Strict):
    sizes: list[int]
    p_loss: list[float] = [0.0]
    payload_bits: list[int] = [128]
    R: int = 6


class ExperimentSpec(_Strict):
    seed: int = 0
    reps: int = 10_000
    reliability: ReliabilityCfg | None = None
    shutdown: ShutdownCfg | None = None
    window: WindowCfg | None = None
    latency: LatencyCfg | None = None
    bandwidth: BandwidthCfg | None = None


def _read(path: str | Path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: top level must be a mapping")
    return data


def load_scenario(path: str | Path) -> ScenarioConfig:
    return ScenarioConfig.model_validate(_read(path))


def load_experiment(path: str | Path) -> ExperimentSpec:
    return ExperimentSpec.model_validate(_read(path))
