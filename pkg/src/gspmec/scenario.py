"""Experiment description: servers, UEs, applications, channel and auction knobs.

A :class:`Scenario` is immutable once built. Scenario files are TOML; the
schema is documented in ``docs/scenario_format.md``. Compute rates are in
MB/s throughout, task sizes in MB, prices in $/VM-hour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ParseError, ValidationError

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

import tomli_w

DEFAULT_KAPPA = 1e-24
AREA_M = 250.0

STRATEGY_TAGS = ("RBB", "BB", "AB", "CB", "Truthful")


@dataclass(frozen=True)
class StrategyKind:
    tag: str = "RBB"
    ab_margin: float = 0.05
    # None means "use the auction epsilon"
    cb_margin: float | None = None

    def __post_init__(self):
        if self.tag not in STRATEGY_TAGS:
            raise ValidationError("strategy.tag", f"unknown strategy {self.tag!r}")
        if not 0.0 < self.ab_margin < 1.0:
            raise ValidationError("strategy.ab_margin", "must lie in (0, 1)")
        if self.cb_margin is not None and not self.cb_margin > 0:
            raise ValidationError("strategy.cb_margin", "must be positive")


@dataclass(frozen=True)
class ServerSpec:
    """One MEC server. Per-application fields are tuples indexed by app."""

    id: int
    vm_count: tuple[int, ...]
    vcpus: tuple[int, ...]
    cpu_freq_ghz: tuple[float, ...]
    compute_rate: tuple[float, ...]
    price_scale: float
    switched_capacitance: float = DEFAULT_KAPPA
    valuation_scale: float = 1.0
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class UeSpec:
    id: int
    tx_power_dbm: float
    avg_task_size_mb: tuple[float, ...]
    budget: float
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class AppSpec:
    id: int
    deadline_ms: float
    min_cpu_freq_ghz: float
    capacity_req: float = 1.0


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_mhz: float = 80.0
    noise_dbm: float = -100.0
    carrier_ghz: float = 5.8
    mu_d: float = 2.12
    mu_0: float = 29.2
    mu_f: float = 2.11


@dataclass(frozen=True)
class AuctionParams:
    slot_seconds: float = 60.0
    epsilon: float = 0.001
    gamma_min: float = 0.01
    gamma_max: float = 0.90
    qoe_latency_weight: float = 0.5
    qoe_cost_weight: float = 0.5
    convergence_tol: float = 1e-4
    replications: int = 1
    rng_seed: int = 0
    # queue positions per app; None means one position per UE
    queue_capacity: int | None = None
    # "size_over_deadline" (d/tau) or "rate_weighted" (rate-weighted expression)
    priority_rule: str = "size_over_deadline"
    # GSP price floor at the winner's own bid (see gsp.run_gsp_round)
    price_floor: bool = True


@dataclass(frozen=True)
class TaskModel:
    """``kind`` is "static" (every task ``size_mb``) or "poisson"."""

    kind: str = "poisson"
    size_mb: float | None = None


@dataclass(frozen=True)
class Scenario:
    servers: tuple[ServerSpec, ...]
    ues: tuple[UeSpec, ...]
    apps: tuple[AppSpec, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)
    auction: AuctionParams = field(default_factory=AuctionParams)
    task_model: TaskModel = field(default_factory=TaskModel)
    strategies: Mapping[int, StrategyKind] = field(default_factory=dict)
    area_m: float = AREA_M
    name: str = "custom"

    @property
    def n_apps(self) -> int:
        return len(self.apps)

    def queue_capacity(self) -> int:
        cap = self.auction.queue_capacity
        return len(self.ues) if cap is None else cap

    def server(self, server_id: int) -> ServerSpec:
        for s in self.servers:
            if s.id == server_id:
                return s
        raise KeyError(server_id)

    def with_auction(self, **changes) -> "Scenario":
        return replace(self, auction=replace(self.auction, **changes))


def _fail(path: str, message: str):
    raise ValidationError(path, message)


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate(s: Scenario) -> Scenario:
    """Check every documented invariant; raise :class:`ValidationError` on the first failure."""
    if not s.servers:
        _fail("servers", "at least one server is required")
    if not s.ues:
        _fail("ues", "at least one UE is required")
    if not s.apps:
        _fail("apps", "at least one application is required")
    n = len(s.apps)
    for a in s.apps:
        p = f"apps[{a.id}]"
        if not (_finite(a.deadline_ms) and a.deadline_ms > 0):
            _fail(f"{p}.deadline_ms", "must be > 0")
        if not (_finite(a.min_cpu_freq_ghz) and a.min_cpu_freq_ghz > 0):
            _fail(f"{p}.min_cpu_freq_ghz", "must be > 0")
    seen = set()
    for sv in s.servers:
        p = f"servers[{sv.id}]"
        if sv.id in seen:
            _fail(f"{p}.id", "duplicate server id")
        seen.add(sv.id)
        for name in ("vm_count", "vcpus", "cpu_freq_ghz", "compute_rate"):
            if len(getattr(sv, name)) != n:
                _fail(f"{p}.{name}", f"expected {n} per-application values")
        if any(int(c) != c or c < 0 for c in sv.vm_count):
            _fail(f"{p}.vm_count", "must be a non-negative integer")
        if any(w <= 0 for w in sv.vcpus):
            _fail(f"{p}.vcpus", "must be positive")
        if any(not (_finite(f) and f > 0) for f in sv.cpu_freq_ghz):
            _fail(f"{p}.cpu_freq_ghz", "must be > 0")
        if any(not (_finite(c) and c > 0) for c in sv.compute_rate):
            _fail(f"{p}.compute_rate", "must be > 0")
        if not (_finite(sv.price_scale) and sv.price_scale > 0):
            _fail(f"{p}.price_scale", "must be > 0")
        if not (_finite(sv.switched_capacitance) and sv.switched_capacitance >= 0):
            _fail(f"{p}.switched_capacitance", "must be >= 0")
        if not (_finite(sv.valuation_scale) and sv.valuation_scale > 0):
            _fail(f"{p}.valuation_scale", "must be > 0")
        if sv.id not in s.strategies:
            _fail(f"servers[{sv.id}].strategy", f"no bidding strategy for server {sv.id}")
    for ue in s.ues:
        p = f"ues[{ue.id}]"
        if not _finite(ue.tx_power_dbm):
            _fail(f"{p}.tx_power_dbm", "must be finite")
        if len(ue.avg_task_size_mb) != n:
            _fail(f"{p}.avg_task_size_mb", f"expected {n} per-application values")
        if any(not (_finite(d) and d > 0) for d in ue.avg_task_size_mb):
            _fail(f"{p}.avg_task_size_mb", "must be > 0")
        if not (_finite(ue.budget) and ue.budget > 0):
            _fail(f"{p}.budget", "must be > 0")
    c = s.channel
    if not (_finite(c.bandwidth_mhz) and c.bandwidth_mhz > 0):
        _fail("channel.bandwidth_mhz", "must be > 0")
    if not (_finite(c.mu_d) and c.mu_d > 0):
        _fail("channel.mu_d", "must be > 0")
    if not (_finite(c.carrier_ghz) and c.carrier_ghz > 0):
        _fail("channel.carrier_ghz", "must be > 0")
    a = s.auction
    if not (0 <= a.gamma_min < a.gamma_max):
        _fail("auction.gamma_min", "thresholds must satisfy 0 <= gamma_min < gamma_max")
    for name in ("qoe_latency_weight", "qoe_cost_weight"):
        if not 0.0 <= getattr(a, name) <= 1.0:
            _fail(f"auction.{name}", "must lie in [0, 1]")
    if not a.epsilon > 0:
        _fail("auction.epsilon", "must be > 0")
    if not a.slot_seconds > 0:
        _fail("auction.slot_seconds", "must be > 0")
    if int(a.replications) != a.replications or a.replications < 1:
        _fail("auction.replications", "must be an integer >= 1")
    if a.convergence_tol < 0:
        _fail("auction.convergence_tol", "must be >= 0")
    if a.queue_capacity is not None and a.queue_capacity < 1:
        _fail("auction.queue_capacity", "must be >= 1")
    if a.priority_rule not in ("size_over_deadline", "rate_weighted"):
        _fail("auction.priority_rule", "must be 'size_over_deadline' or 'rate_weighted'")
    tm = s.task_model
    if tm.kind not in ("static", "poisson"):
        _fail("task_model.kind", "must be 'static' or 'poisson'")
    if tm.kind == "static" and not (tm.size_mb is not None and tm.size_mb > 0):
        _fail("task_model.size_mb", "static tasks need a positive size")
    return s


# --- construction helpers -------------------------------------------------


def uniform_positions(count: int, rng: np.random.Generator, area_m: float = AREA_M):
    xy = rng.uniform(0.0, area_m, size=(count, 2))
    return [(float(x), float(y)) for x, y in xy]


def make_ues(
    count: int,
    *,
    rng: np.random.Generator,
    d_avg_range: tuple[float, float] = (10.0, 40.0),
    n_apps: int = 1,
    tx_power_dbm: float = 20.0,
    budget: float = 20.0,
    place: bool = False,
    area_m: float = AREA_M,
) -> tuple[UeSpec, ...]:
    """UEs with per-app average task sizes drawn uniformly from ``d_avg_range``."""
    lo, hi = d_avg_range
    sizes = rng.uniform(lo, hi, size=(count, n_apps))
    pos = uniform_positions(count, rng, area_m) if place else [None] * count
    return tuple(
        UeSpec(
            id=j,
            tx_power_dbm=tx_power_dbm,
            avg_task_size_mb=tuple(float(x) for x in sizes[j]),
            budget=budget,
            position=pos[j],
        )
        for j in range(count)
    )


# --- TOML round trip ------------------------------------------------------


def _tuple(v, cast=float):
    if isinstance(v, (list, tuple)):
        return tuple(cast(x) for x in v)
    return (cast(v),)


def _pos(v):
    if v is None:
        return None
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ValidationError("position", "expected [x, y]")
    return (float(v[0]), float(v[1]))


def _build(cls, table: Mapping[str, Any], path: str, **overrides):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names - set(overrides)
    if unknown:
        raise ValidationError(path, f"unknown keys {sorted(unknown)}")
    kwargs = {k: v for k, v in table.items() if k in names}
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(path, str(exc)) from None


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    """Build and validate a scenario from a parsed TOML document."""
    try:
        auction = _build(AuctionParams, doc.get("auction", {}), "auction")
        channel = _build(ChannelParams, doc.get("channel", {}), "channel")
        task_model = _build(TaskModel, doc.get("task_model", {}), "task_model")
        apps = tuple(
            _build(AppSpec, a, f"apps[{i}]", id=int(a.get("id", i)))
            for i, a in enumerate(doc.get("apps", []))
        )
        n_apps = max(len(apps), 1)
        rng = np.random.default_rng(auction.rng_seed)
        area = float(doc.get("area_m", AREA_M))

        servers, strategies = [], {}
        for i, t in enumerate(doc.get("servers", [])):
            t = dict(t)
            sid = int(t.pop("id", i))
            strat = t.pop("strategy", None)
            ab = t.pop("ab_margin", None)
            cb = t.pop("cb_margin", None)
            if strat is not None:
                kw = {"tag": strat}
                if ab is not None:
                    kw["ab_margin"] = float(ab)
                if cb is not None:
                    kw["cb_margin"] = float(cb)
                strategies[sid] = StrategyKind(**kw)
            pos = _pos(t.pop("position", None))
            if pos is None:
                pos = uniform_positions(1, rng, area)[0]
            servers.append(
                _build(
                    ServerSpec,
                    t,
                    f"servers[{sid}]",
                    id=sid,
                    vm_count=_tuple(t.get("vm_count", ()), int),
                    vcpus=_tuple(t.get("vcpus", ()), int),
                    cpu_freq_ghz=_tuple(t.get("cpu_freq_ghz", ())),
                    compute_rate=_tuple(t.get("compute_rate", ())),
                    position=pos,
                )
            )

        if "ues" in doc:
            ues = tuple(
                _build(
                    UeSpec,
                    u,
                    f"ues[{i}]",
                    id=int(u.get("id", i)),
                    avg_task_size_mb=_tuple(u.get("avg_task_size_mb", ())),
                    position=_pos(u.get("position")),
                )
                for i, u in enumerate(doc["ues"])
            )
        elif "ue_population" in doc:
            pop = dict(doc["ue_population"])
            count = int(pop.pop("count"))
            d_range = tuple(pop.pop("avg_task_size_range", (10.0, 40.0)))
            ues = make_ues(
                count,
                rng=rng,
                d_avg_range=(float(d_range[0]), float(d_range[1])),
                n_apps=n_apps,
                tx_power_dbm=float(pop.pop("tx_power_dbm", 20.0)),
                budget=float(pop.pop("budget", 20.0)),
                place=bool(pop.pop("place", False)),
                area_m=area,
            )
            if pop:
                raise ValidationError("ue_population", f"unknown keys {sorted(pop)}")
        else:
            ues = ()
        scen = Scenario(
            servers=tuple(servers),
            ues=ues,
            apps=apps,
            channel=channel,
            auction=auction,
            task_model=task_model,
            strategies=strategies,
            area_m=area,
            name=str(doc.get("name", "custom")),
        )
    except ValidationError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError("scenario", str(exc)) from None
    return validate(scen)


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a TOML scenario file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def scenario_to_dict(s: Scenario) -> dict:
    servers = []
    for sv in s.servers:
        t = _drop_none(
            {
                "id": sv.id,
                "vm_count": list(sv.vm_count),
                "vcpus": list(sv.vcpus),
                "cpu_freq_ghz": list(sv.cpu_freq_ghz),
                "compute_rate": list(sv.compute_rate),
                "price_scale": sv.price_scale,
                "switched_capacitance": sv.switched_capacitance,
                "valuation_scale": sv.valuation_scale,
                "position": list(sv.position) if sv.position else None,
            }
        )
        st = s.strategies.get(sv.id)
        if st is not None:
            t["strategy"] = st.tag
            t["ab_margin"] = st.ab_margin
            if st.cb_margin is not None:
                t["cb_margin"] = st.cb_margin
        servers.append(t)
    ues = [
        _drop_none(
            {
                "id": u.id,
                "tx_power_dbm": u.tx_power_dbm,
                "avg_task_size_mb": list(u.avg_task_size_mb),
                "budget": u.budget,
                "position": list(u.position) if u.position else None,
            }
        )
        for u in s.ues
    ]
    return {
        "name": s.name,
        "area_m": s.area_m,
        "channel": _drop_none(vars(s.channel).copy()),
        "auction": _drop_none(vars(s.auction).copy()),
        "task_model": _drop_none(vars(s.task_model).copy()),
        "apps": [vars(a).copy() for a in s.apps],
        "servers": servers,
        "ues": ues,
    }


def write_scenario(s: Scenario, path: str | Path) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(scenario_to_dict(s), fh)
