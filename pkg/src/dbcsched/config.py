"""Experiment configuration files (YAML, schema ``dbcsched/v1``).

Example::

    schema: dbcsched/v1
    channel:
      bsc_cascade:
        eps: [0.1, 0.05]
        prefixes: [[[0.9, 0.1], [0.1, 0.9]]]
    coding: {M: [2, 2], p_e: [0.001, 0.001], rho: 1.0}
    K: 3
    policy:
      explicit: {"1,0": 0.25, "0,3": 0.5, "1,2": 0.25}
    arrivals: {load: 0.8}
    simulation: {horizon: 1000000, seed: 1}

Schedules are written as comma-separated counts; message classes as
``"j:s1,s2"``. Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .channel import DegradedBroadcastChannel, build_bsc_cascade
from .errors import DBCError, ParseError, ValidationError
from .exponents import ExponentTable, exponent_table
from .scheduling import CodingConfig, Schedule, ScheduleTable, build_schedule_table
from .simulator import ArrivalSpec, SimConfig
from .stability import (
    ClassKey,
    Policy,
    SplittingMatrix,
    service_rates,
    splitting,
    splitting_for_class_means,
    synthesize_policy,
)

SCHEMA = "dbcsched/v1"
TOP_KEYS = {"schema", "channel", "coding", "K", "policy", "arrivals", "simulation", "region", "verify"}
REQUIRED = ("schema", "channel", "coding", "K")


def parse_schedule(text: str, field: str) -> Schedule:
    try:
        s = tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise ValidationError(field, f"cannot parse schedule {text!r}") from None
    if any(x < 0 for x in s):
        raise ValidationError(field, f"negative count in schedule {text!r}")
    return s


def parse_class(text: str, field: str) -> ClassKey:
    head, _, tail = str(text).partition(":")
    if not tail:
        raise ValidationError(field, f"class key {text!r} is not of the form 'j:s1,...'")
    try:
        j = int(head)
    except ValueError:
        raise ValidationError(field, f"bad receiver index in {text!r}") from None
    return j, parse_schedule(tail, field)


def format_schedule(s: Schedule) -> str:
    return ",".join(str(x) for x in s)


def _keys(d: Any, field: str, allowed: set[str], required: tuple[str, ...] = ()) -> dict:
    if not isinstance(d, dict):
        raise ValidationError(field, "expected a mapping")
    for k in d:
        if k not in allowed:
            raise ValidationError(f"{field}.{k}" if field else str(k), "unknown key")
    for k in required:
        if k not in d:
            raise ValidationError(f"{field}.{k}" if field else k, "missing required key")
    return d


def _wrap(field: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ValidationError:
        raise
    except (DBCError, ValueError, TypeError) as exc:
        raise ValidationError(field, str(exc)) from None


@dataclass
class ExperimentConfig:
    raw: dict
    channel: DegradedBroadcastChannel
    coding: CodingConfig
    K: int

    @property
    def J(self) -> int:
        return self.coding.J

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def exponent_table(self, rho: float | None = None) -> ExponentTable:
        return exponent_table(self.channel, self.coding.rho if rho is None else rho, active=range(1, self.J + 1))

    def schedule_table(self, tab: ExponentTable | None = None) -> ScheduleTable:
        return build_schedule_table(self.K, self.coding, tab or self.exponent_table())

    def policy(self, tbl: ScheduleTable) -> Policy:
        spec = self.raw.get("policy")
        if spec is None:
            raise ValidationError("policy", "this subcommand needs a policy")
        if "explicit" in spec:
            return Policy({parse_schedule(k, "policy"): v for k, v in spec["explicit"].items()})
        return synthesize_policy(spec["auto"]["target"], tbl)

    def arrival_means(self, pol: Policy, tbl: ScheduleTable) -> tuple[list[ArrivalSpec], SplittingMatrix]:
        spec = self.raw.get("arrivals")
        if spec is None:
            raise ValidationError("arrivals", "this subcommand needs arrivals")
        if isinstance(spec, list):
            specs = [
                ArrivalSpec(tuple(a["pmf"])) if "pmf" in a else ArrivalSpec.with_mean(a["mean"]) for a in spec
            ]
            EA = [a.mean for a in specs]
            return specs, splitting(pol, tbl, EA)
        if "load" in spec:
            EA = spec["load"] * service_rates(pol, tbl)
            return [ArrivalSpec.with_mean(m) for m in EA], splitting(pol, tbl, EA)
        targets = {parse_class(k, "arrivals.class_means"): float(v) for k, v in spec["class_means"].items()}
        EA, split = splitting_for_class_means(targets, self.J)
        return [ArrivalSpec.with_mean(m) for m in EA], split

    def sim_config(self, tbl: ScheduleTable, pol: Policy | None = None, seed=None, horizon=None) -> SimConfig:
        pol = pol or self.policy(tbl)
        arrivals, split = self.arrival_means(pol, tbl)
        sim = self.raw.get("simulation", {})
        init = {parse_class(k, "simulation.initial_fresh"): int(v) for k, v in sim.get("initial_fresh", {}).items()}
        return SimConfig(
            policy=pol,
            split=split,
            table=tbl,
            arrivals=arrivals,
            horizon=int(sim.get("horizon", 100_000) if horizon is None else horizon),
            seed=int(sim.get("seed", 0) if seed is None else seed),
            stride=int(sim.get("stride", 1)),
            W=float(sim.get("W", 1.0)),
            initial_fresh=init,
        )


def _channel(spec: dict) -> DegradedBroadcastChannel:
    _keys(spec, "channel", {"bsc_cascade", "explicit"})
    if len(spec) != 1:
        raise ValidationError("channel", "give exactly one of bsc_cascade or explicit")
    if "bsc_cascade" in spec:
        b = _keys(spec["bsc_cascade"], "channel.bsc_cascade", {"eps", "prefixes", "top_input"}, ("eps",))
        return _wrap("channel.bsc_cascade", build_bsc_cascade, b["eps"], b.get("prefixes"), b.get("top_input"))
    e = _keys(
        spec["explicit"], "channel.explicit", {"top_input", "prefixes", "base", "degraders"}, ("top_input", "base")
    )
    return _wrap(
        "channel.explicit",
        DegradedBroadcastChannel,
        e["top_input"],
        tuple(e.get("prefixes", [])),
        e["base"],
        tuple(e.get("degraders", [])),
    )


def validate(raw: dict) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    _keys(raw, "", TOP_KEYS, REQUIRED)
    if raw["schema"] != SCHEMA:
        raise ValidationError("schema", f"expected {SCHEMA!r}, got {raw['schema']!r}")
    ch = _channel(raw["channel"])
    c = _keys(raw["coding"], "coding", {"M", "p_e", "rho"}, ("M", "p_e"))
    coding = _wrap("coding", CodingConfig, tuple(c["M"]), tuple(c["p_e"]), float(c.get("rho", 1.0)))
    if coding.J != ch.J:
        raise ValidationError("coding", f"channel has {ch.J} receivers but coding lists {coding.J}")
    K = raw["K"]
    if not isinstance(K, int) or isinstance(K, bool) or K < 1:
        raise ValidationError("K", "must be a positive integer")
    J = ch.J

    if "policy" in raw:
        pol = _keys(raw["policy"], "policy", {"explicit", "auto"})
        if len(pol) != 1:
            raise ValidationError("policy", "give exactly one of explicit or auto")
        if "explicit" in pol:
            probs = _keys(pol["explicit"], "policy.explicit", set(map(str, pol["explicit"])))
            for key, p in probs.items():
                s = parse_schedule(key, f"policy.explicit.{key}")
                if len(s) != J:
                    raise ValidationError(f"policy.explicit.{key}", f"schedule needs {J} entries")
                if sum(s) > K:
                    raise ValidationError(f"policy.explicit.{key}", f"schedule total {sum(s)} exceeds K={K}")
                if not isinstance(p, (int, float)) or p < 0:
                    raise ValidationError(f"policy.explicit.{key}", "probability must be a nonnegative number")
            total = math.fsum(probs.values())
            if abs(total - 1.0) > 1e-12:
                raise ValidationError("policy", f"probabilities sum to {total!r}, not 1")
        else:
            auto = _keys(pol["auto"], "policy.auto", {"target"}, ("target",))
            if len(auto["target"]) != J or any(x < 0 for x in auto["target"]):
                raise ValidationError("policy.auto.target", f"need {J} nonnegative arrival means")

    if "arrivals" in raw:
        arr = raw["arrivals"]
        if isinstance(arr, list):
            if len(arr) != J:
                raise ValidationError("arrivals", f"need {J} per-receiver entries")
            for i, a in enumerate(arr):
                _keys(a, f"arrivals[{i}]", {"pmf", "mean"})
                if len(a) != 1:
                    raise ValidationError(f"arrivals[{i}]", "give exactly one of pmf or mean")
                if "pmf" in a:
                    _wrap(f"arrivals[{i}]", ArrivalSpec, tuple(a["pmf"]))
                else:
                    _wrap(f"arrivals[{i}]", ArrivalSpec.with_mean, a["mean"])
        else:
            _keys(arr, "arrivals", {"load", "class_means"})
            if len(arr) != 1:
                raise ValidationError("arrivals", "give exactly one of load or class_means")
            if "load" in arr and (not isinstance(arr["load"], (int, float)) or arr["load"] < 0):
                raise ValidationError("arrivals.load", "must be a nonnegative number")
            for k, v in arr.get("class_means", {}).items():
                j, s = parse_class(k, f"arrivals.class_means.{k}")
                if not 1 <= j <= J or len(s) != J or s[j - 1] == 0 or sum(s) > K:
                    raise ValidationError(f"arrivals.class_means.{k}", "not a valid message class")
                if v < 0:
                    raise ValidationError(f"arrivals.class_means.{k}", "mean must be nonnegative")

    sim = _keys(raw.get("simulation", {}), "simulation", {"horizon", "seed", "stride", "W", "initial_fresh"})
    for key, lo in (("horizon", 0), ("seed", 0), ("stride", 1)):
        if key in sim and (not isinstance(sim[key], int) or sim[key] < lo):
            raise ValidationError(f"simulation.{key}", f"must be an integer >= {lo}")
    for k, v in sim.get("initial_fresh", {}).items():
        j, s = parse_class(k, f"simulation.initial_fresh.{k}")
        if not 1 <= j <= J or len(s) != J or s[j - 1] == 0 or sum(s) > K:
            raise ValidationError(f"simulation.initial_fresh.{k}", "not a valid message class")
        if not isinstance(v, int) or v < 0:
            raise ValidationError(f"simulation.initial_fresh.{k}", "must be a nonnegative integer")

    region = _keys(raw.get("region", {}), "region", {"queries"})
    for i, q in enumerate(region.get("queries", [])):
        if len(q) != J or any(x < 0 for x in q):
            raise ValidationError(f"region.queries[{i}]", f"need {J} nonnegative rates")

    ver = _keys(raw.get("verify", {}), "verify", {"region_samples", "seed", "saturation_horizon"})
    for key in ver:
        if not isinstance(ver[key], int) or ver[key] < 0:
            raise ValidationError(f"verify.{key}", "must be a nonnegative integer")

    return ExperimentConfig(raw=raw, channel=ch, coding=coding, K=K)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return validate(raw)


HEADER_KEY = "# config: "


def config_from_header(path: str | Path) -> ExperimentConfig:
    """Recover the embedded config from a CSV written by the CLI."""
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith(HEADER_KEY):
                return validate(json.loads(line[len(HEADER_KEY) :]))
    raise ParseError(f"{path}: no embedded config header")
