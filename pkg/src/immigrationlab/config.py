"""Experiment configuration: JSON schema, built-in presets and object construction."""

from __future__ import annotations

import copy
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import arrivals as arr
from . import responses as resp
from .errors import ConfigurationError
from .shotnoise import Scenario, check_standing_assumption


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioConfig(_Strict):
    arrival: dict
    response: dict
    c: float | None = None
    rho: float | None = None
    grid: list[float]
    t: float
    replicates: int = 1000


class CovarianceCheck(_Strict):
    type: Literal["covariance"]
    entries: Literal["all"] | list[tuple[int, int]] = "all"


class KsCheck(_Strict):
    type: Literal["ks"]
    directions: list[Union[Literal["e1", "en", "ones"], list[float]]] = ["e1", "en", "ones"]
    seeds: int = 1
    min_pass_fraction: float = 1.0


class ScaleTrendCheck(_Strict):
    type: Literal["scale_trend"]
    scales: list[float]
    entry: tuple[int, int] = (0, 0)


class WeakLawCheck(_Strict):
    type: Literal["weak_law"]
    arrival: dict
    c: float
    rho: float
    T: float = 1.0
    scales: list[float]
    replicates: int = 200


class IncrementsCheck(_Strict):
    type: Literal["increments"]
    arrival: dict
    rho: float
    scales: list[float]
    replicates: int = 1000


class LindebergCheck(_Strict):
    type: Literal["lindeberg"]
    response: dict
    rho: float = 1.0
    y: float = 1.0
    scales: list[float]
    replicates: int = 100000


class LimitRatioCheck(_Strict):
    type: Literal["limit_ratio"]
    response: dict
    w: float = 1.0
    a: float = 0.5
    b: float = 2.0
    scales: list[float]


class RenewalRateCheck(_Strict):
    type: Literal["renewal_rate"]
    arrival: dict
    rate: float
    scales: list[float]
    tolerances: list[float]
    replicates: int = 1000


class ClosedFormsCheck(_Strict):
    type: Literal["closed_forms"]


CheckConfig = Annotated[
    Union[CovarianceCheck, KsCheck, ScaleTrendCheck, WeakLawCheck, IncrementsCheck,
          LindebergCheck, LimitRatioCheck, RenewalRateCheck, ClosedFormsCheck],
    Field(discriminator="type"),
]


class Tolerances(_Strict):
    quad_tol: float = 1e-8
    z_max: float = 4.0
    ks_alpha: float = 0.01


class ExperimentConfig(_Strict):
    scenario: ScenarioConfig | None = None
    checks: list[CheckConfig] = []
    output_directory: str | None = None
    seed: int = Field(default=20261017, ge=0, le=2 ** 64 - 1)
    tolerances: Tolerances = Tolerances()


def parse_config(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid configuration:\n{exc}") from None
    if cfg.scenario is None and any(isinstance(c, (CovarianceCheck, KsCheck, ScaleTrendCheck)) for c in cfg.checks):
        raise ConfigurationError("covariance, ks and scale_trend checks need a scenario")
    return cfg


def build_scenario(sc: ScenarioConfig, t: float | None = None) -> Scenario:
    response = sc.response
    # standing assumption first, so its message is the one reported
    if sc.rho is not None:
        if response.get("kind") == "centered_poisson":
            beta = float(response.get("rho0", 1.0))
        else:
            beta = float(response.get("beta", 0.0))
        check_standing_assumption(beta, sc.rho)
    arrival = arr.arrival_from_dict(sc.arrival)
    response = resp.response_from_dict(sc.response)
    c, rho = arrival.normalization()
    c = c if sc.c is None else sc.c
    rho = rho if sc.rho is None else sc.rho
    return Scenario(arrival, response, c, rho, tuple(sc.grid), sc.t if t is None else t, sc.replicates)


_A1 = {
    "scenario": {
        "arrival": {"kind": "renewal", "step": {"law": "exponential", "rate": 1}},
        "response": {"kind": "scaled_variable", "beta": 0, "innovation": {"law": "normal"}},
        "c": 1, "rho": 1, "grid": [0.5, 1, 2], "t": 400, "replicates": 20000,
    },
    "checks": [
        {"type": "covariance"},
        {"type": "ks", "directions": ["e1", "ones"], "seeds": 20, "min_pass_fraction": 0.9},
    ],
}

_A2 = {"checks": [{"type": "closed_forms"}]}

_A3 = {
    "scenario": {
        "arrival": {"kind": "perturbed_walk", "step": {"law": "exponential", "rate": 1},
                    "perturbation": {"law": "pareto_tail", "beta": -0.5}},
        "response": {"kind": "survival_indicator", "beta": -0.5},
        "c": 1, "rho": 1, "grid": [1, 2], "t": 800, "replicates": 20000,
    },
    "checks": [
        {"type": "covariance", "entries": [[0, 0]]},
        {"type": "scale_trend", "scales": [200, 800], "entry": [0, 0]},
    ],
}

_A4 = {
    "scenario": {
        "arrival": {"kind": "renewal", "step": {"law": "exponential", "rate": 1}},
        "response": {"kind": "ou_modulated", "beta": -0.5},
        "c": 1, "rho": 1, "grid": [1, 2], "t": 800, "replicates": 20000,
    },
    "checks": [{"type": "covariance"}],
}

_A5 = {
    "scenario": {
        "arrival": {"kind": "poisson_nh", "c0": 1, "rho0": 1},
        "response": {"kind": "centered_poisson", "c0": 1, "rho0": 1},
        "c": 1, "rho": 1, "grid": [0.5, 1, 2], "t": 400, "replicates": 10000,
    },
    "checks": [{"type": "covariance"}],
}

_EXP1 = {"law": "exponential", "rate": 1}
_ONE = {"law": "deterministic", "value": 1}
_PERTURBED = {"kind": "perturbed_walk", "step": _EXP1, "perturbation": {"law": "pareto_tail", "beta": -0.5}}

_A6 = {
    "checks": [
        {"type": "weak_law", "arrival": {"kind": "renewal", "step": _EXP1},
         "c": 1, "rho": 1, "scales": [50, 200, 800, 3200]},
        {"type": "weak_law", "arrival": _PERTURBED, "c": 1, "rho": 1, "scales": [50, 200, 800, 3200]},
        {"type": "weak_law", "arrival": {"kind": "poisson_nh", "c0": 1, "rho0": 2},
         "c": 1, "rho": 2, "scales": [10, 20, 40, 80]},
        {"type": "weak_law", "arrival": {"kind": "brw_generation", "step": _ONE, "generation": 2},
         "c": 0.5, "rho": 2, "scales": [20, 40, 80]},
        {"type": "increments", "arrival": {"kind": "renewal", "step": _EXP1}, "rho": 1, "scales": [5, 20, 80, 320]},
        {"type": "increments", "arrival": _PERTURBED, "rho": 1, "scales": [5, 20, 80, 320]},
        {"type": "increments", "arrival": {"kind": "poisson_nh", "c0": 1, "rho0": 2}, "rho": 2,
         "scales": [5, 10, 20, 40]},
        {"type": "increments", "arrival": {"kind": "brw_generation", "step": _EXP1, "generation": 2},
         "rho": 2, "scales": [5, 10, 20, 40]},
        {"type": "lindeberg", "response": {"kind": "survival_indicator", "beta": -0.5},
         "scales": [1, 4, 16, 64, 256]},
        {"type": "lindeberg", "response": {"kind": "scaled_variable", "beta": 0}, "scales": [1, 4, 16, 64, 256]},
        {"type": "lindeberg", "response": {"kind": "ou_modulated", "beta": -0.5}, "scales": [1, 4, 16, 64, 256]},
        {"type": "limit_ratio", "response": {"kind": "survival_indicator", "beta": -0.5},
         "scales": [1e2, 1e3, 1e4, 1e5, 1e6]},
        {"type": "limit_ratio", "response": {"kind": "scaled_variable", "beta": 0.5},
         "scales": [1e1, 1e2, 1e3, 1e4]},
        {"type": "limit_ratio", "response": {"kind": "time_changed_bm", "beta": 1.5}, "scales": [1e1, 1e2, 1e3]},
        {"type": "limit_ratio", "response": {"kind": "centered_poisson", "c0": 1, "rho0": 2},
         "scales": [1e1, 1e2, 1e3]},
        {"type": "limit_ratio", "response": {"kind": "ou_modulated", "beta": -0.5}, "scales": [1, 2, 4, 8, 16]},
    ]
}

_A7 = {
    "checks": [
        {"type": "renewal_rate",
         "arrival": {"kind": "perturbed_walk", "step": _EXP1, "perturbation": {"law": "lognormal", "mu": 0, "sigma": 1}},
         "rate": 1, "scales": [1e2, 1e3, 1e4], "tolerances": [0.15, 0.05, 0.02], "replicates": 1000},
    ]
}

PRESETS = {
    "renewal-scaledvar": _A1,
    "limit-closed-forms": _A2,
    "heavy-tail-survival": _A3,
    "fictitious-ou": _A4,
    "poisson-response": _A5,
    "hypothesis-checkers": _A6,
    "lemma1-rate": _A7,
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
