"""Run configuration: strict JSON schema for the command-line front end."""
from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .baselines import BaselineSpec
from .model import BuConvention, FrequencyParams, build_frequency_model

PositiveFloat = Annotated[float, Field(gt=0)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlantConfig(_Strict):
    M: PositiveFloat = 2.0
    D: Annotated[float, Field(ge=0)] = 0.6
    rho: PositiveFloat = 0.05
    k: Annotated[float, Field(ge=0)] = 5.0
    w_max: PositiveFloat = 0.1
    u_max: PositiveFloat = 0.05
    bu_convention: BuConvention = BuConvention.PAPER_LITERAL

    def params(self) -> FrequencyParams:
        return FrequencyParams(self.M, self.D, self.rho, self.k, self.w_max, self.u_max)

    def model(self):
        return build_frequency_model(self.params(), self.bu_convention)


class FeedbackMode(str, Enum):
    FULL_STATE = "full_state"
    OUTPUT = "output"


class SynthesisConfig(_Strict):
    u_max: PositiveFloat | None = Field(None, description="actuator limit in p.u.; defaults to plant.u_max")
    deltas: list[Annotated[float, Field(ge=1)]] = [10.0, 100.0]
    alpha_lo: PositiveFloat = 1e-3
    alpha_hi: PositiveFloat = 1e3
    alpha_grid: Annotated[int, Field(ge=3)] = 60
    feedback: FeedbackMode = FeedbackMode.FULL_STATE
    augmented: bool | None = Field(None, description="impose open-loop invariance on Q; defaults on for output mode")
    observer_delta: Annotated[float, Field(ge=1)] = 10.0
    compare_delta: Annotated[float, Field(ge=1)] = 10.0

    @model_validator(mode="after")
    def _bracket(self):
        if not self.alpha_lo < self.alpha_hi:
            raise ValueError("alpha_lo must be below alpha_hi")
        return self

    @property
    def use_augmented(self) -> bool:
        if self.augmented is None:
            return self.feedback is FeedbackMode.OUTPUT
        return self.augmented


class LqrBaseline(_Strict):
    kind: Literal["lqr"]
    name: str = "lqr"
    Q_weight: list[list[float]]
    R_weight: list[list[float]]

    def spec(self) -> BaselineSpec:
        return BaselineSpec.lqr(self.Q_weight, self.R_weight, self.name)


class PolePlaceBaseline(_Strict):
    kind: Literal["pole_place"]
    name: str = "pole_place"
    poles: list[Union[float, tuple[float, float]]] = Field(description="real poles or [re, im] pairs")

    def spec(self) -> BaselineSpec:
        return BaselineSpec.pole_place([complex(*p) if isinstance(p, tuple) else p for p in self.poles], self.name)


class LiteralBaseline(_Strict):
    kind: Literal["literal"]
    name: str = "literal"
    K: list[float]
    units: Literal["physical", "model"] = "physical"

    def spec(self, u_scale: float = 1.0) -> BaselineSpec:
        scale = 1.0 / u_scale if self.units == "physical" else 1.0
        return BaselineSpec.literal([k * scale for k in self.K], self.name)


Baseline = Annotated[Union[LqrBaseline, PolePlaceBaseline, LiteralBaseline], Field(discriminator="kind")]


class SimulationConfig(_Strict):
    dt_s: PositiveFloat = 1e-3
    horizon_s: PositiveFloat = 60.0
    dwell_s: PositiveFloat = 5.0
    seeds: list[Annotated[int, Field(ge=0)]] = [0]
    probe_seeds: Annotated[int, Field(ge=0)] = 20
    compare_seeds: Annotated[int, Field(ge=1)] = 5

    @model_validator(mode="after")
    def _step(self):
        if self.dt_s > self.dwell_s / 10:
            raise ValueError("dt_s must be at most dwell_s / 10")
        return self


class OutputConfig(_Strict):
    directory: str = "out"
    formats: list[Literal["json", "csv"]] = ["json", "csv"]


class RunConfig(_Strict):
    plant: PlantConfig = PlantConfig()
    synthesis: SynthesisConfig = SynthesisConfig()
    baselines: list[Baseline] = []
    simulation: SimulationConfig = SimulationConfig()
    output: OutputConfig = OutputConfig()

    @field_validator("baselines")
    @classmethod
    def _unique_names(cls, v):
        names = [b.name for b in v]
        if len(set(names)) != len(names):
            raise ValueError("baseline names must be unique")
        return v

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def scenario_config() -> RunConfig:
    """Defaults for the single-area frequency scenario, with the two literal comparison gains."""
    return RunConfig(baselines=[
        LiteralBaseline(kind="literal", name="lqr_literal", K=[0.138, 0.0045]),
        LiteralBaseline(kind="literal", name="pole_place_literal", K=[1.70, 0.480]),
    ])


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text: str) -> RunConfig:
    return RunConfig.model_validate(json.loads(text))
