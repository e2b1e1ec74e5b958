"""Built-in experiment scenarios and the small worked example.

Hardware rows follow the five-server VM table (vCPUs, clock, compute rate,
price scale). Where an experiment states seller valuations, the servers'
calibration multipliers pin the power-cost valuation to those values.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .errors import UnknownPreset
from .gsp import TaskQueue, build_queue
from .scenario import (
    AppSpec,
    AuctionParams,
    ChannelParams,
    Scenario,
    ServerSpec,
    StrategyKind,
    TaskModel,
    UeSpec,
    load_scenario,
    make_ues,
    uniform_positions,
    validate,
)
from .workload import VmState, calibration_for

# (vcpus, GHz, compute rate MB/s, price scale $/VM-hour)
HARDWARE = (
    (2, 3.3, 32.0, 0.0452),
    (2, 3.5, 24.0, 0.0435),
    (2, 3.2, 24.0, 0.0385),
    (1, 3.2, 16.0, 0.0186),
    (1, 3.3, 16.0, 0.0175),
)
STATED_VALUATIONS = (0.0354, 0.0366)
DEADLINE_MS = 200.0
MIN_FREQ_GHZ = 3.2
D_AVG_RANGE = (10.0, 40.0)
# fixed task length of the static scenarios; keeps a VM's one-slot load below gamma_min
STATIC_SIZE_MB = 15.0
DEFAULT_REPLICATIONS = 20

PRESET_NAMES = (
    "example1",
    "fig5_case1",
    "fig5_case2",
    "fig5_case3",
    "fig6a",
    "fig6b",
    "fig7",
    "fig9",
    "fig10",
    "table3_table4",
)


def server_from_row(
    sid: int,
    row: int,
    vm_count: int,
    valuation: float | None = None,
    rng: np.random.Generator | None = None,
    area_m: float = 250.0,
) -> ServerSpec:
    """Server ``sid`` with hardware row ``row`` (0-based); ``valuation`` pins its value."""
    w, f, c, rho = HARDWARE[row]
    spec = ServerSpec(
        id=sid,
        vm_count=(vm_count,),
        vcpus=(w,),
        cpu_freq_ghz=(f,),
        compute_rate=(c,),
        price_scale=rho,
        position=uniform_positions(1, rng, area_m)[0] if rng is not None else None,
    )
    if valuation is not None:
        spec = replace(spec, valuation_scale=calibration_for(spec, valuation))
    return spec


def _app() -> tuple[AppSpec, ...]:
    return (AppSpec(id=0, deadline_ms=DEADLINE_MS, min_cpu_freq_ghz=MIN_FREQ_GHZ),)


def _strategies(servers, tag="RBB") -> dict[int, StrategyKind]:
    return {s.id: StrategyKind(tag) for s in servers}


def two_server_market(
    vm_counts: tuple[int, int],
    n_ues: int,
    *,
    static: bool,
    seed: int = 7,
    name: str = "two_server",
    strategy: str = "RBB",
    valuations: tuple[float, float] = STATED_VALUATIONS,
) -> Scenario:
    """Two identically equipped servers that differ only in valuation.

    UE average sizes (and so priorities) are drawn either way; with
    ``static`` every submitted task has the fixed length instead of a
    Poisson draw around that average.
    """
    rng = np.random.default_rng(seed)
    servers = tuple(
        server_from_row(i + 1, 0, r, v, rng) for i, (r, v) in enumerate(zip(vm_counts, valuations))
    )
    ues = make_ues(n_ues, rng=rng, d_avg_range=D_AVG_RANGE)
    tasks = TaskModel("static", STATIC_SIZE_MB) if static else TaskModel("poisson")
    return validate(
        Scenario(
            servers=servers,
            ues=ues,
            apps=_app(),
            channel=ChannelParams(),
            auction=AuctionParams(rng_seed=seed, replications=DEFAULT_REPLICATIONS),
            task_model=tasks,
            strategies=_strategies(servers, strategy),
            name=name,
        )
    )


def multi_server_market(
    n_servers: int,
    vm_per_server: int,
    n_ues: int,
    *,
    queue_capacity: int | None = None,
    d_avg_range: tuple[float, float] = D_AVG_RANGE,
    seed: int = 7,
    name: str = "multi_server",
) -> Scenario:
    """``n_servers`` servers taken in order from the hardware table.

    Valuations spread evenly from the lower to the upper stated seller
    valuation, so server 1 is the cheapest.
    """
    if not 1 <= n_servers <= len(HARDWARE):
        raise ValueError(f"n_servers must be in 1..{len(HARDWARE)}")
    rng = np.random.default_rng(seed)
    lo, hi = STATED_VALUATIONS
    vals = np.linspace(lo, hi, n_servers) if n_servers > 1 else np.array([lo])
    servers = tuple(
        server_from_row(i + 1, i, vm_per_server, float(vals[i]), rng) for i in range(n_servers)
    )
    ues = make_ues(n_ues, rng=rng, d_avg_range=d_avg_range)
    return validate(
        Scenario(
            servers=servers,
            ues=ues,
            apps=_app(),
            auction=AuctionParams(
                rng_seed=seed, replications=DEFAULT_REPLICATIONS, queue_capacity=queue_capacity
            ),
            task_model=TaskModel("poisson"),
            strategies=_strategies(servers),
            name=name,
        )
    )


def with_ue_count(scenario: Scenario, n_ues: int, d_avg_range=D_AVG_RANGE) -> Scenario:
    """Same scenario with a fresh UE population of size ``n_ues``."""
    rng = np.random.default_rng(scenario.auction.rng_seed + n_ues)
    ues = make_ues(n_ues, rng=rng, d_avg_range=d_avg_range)
    return validate(replace(scenario, ues=ues, name=f"{scenario.name}_J{n_ues}"))


def with_strategy(scenario: Scenario, tag: str) -> Scenario:
    return validate(replace(scenario, strategies=_strategies(scenario.servers, tag), name=f"{scenario.name}_{tag}"))


# --- worked example ---------------------------------------------------------

EXAMPLE1_PRIORITIES = (
    (0.31, 0.20, 0.15, 0.09),
    (0.13, 0.23, 0.14, 0.38),
    (0.26, 0.11, 0.24, 0.20),
)
# per queue: (server, vm index, quality, bid). Queue 1 reproduces the stated
# top adjustment rate 1.238 and next-ranked bid 0.22; the rest is illustrative.
EXAMPLE1_VMS = (
    ((1, 1, 2.476, 0.20), (2, 2, 2.0, 0.22), (2, 3, 1.9, 0.25), (2, 1, 1.8, 0.30)),
    ((1, 1, 2.2, 0.21), (2, 1, 2.0, 0.23), (2, 2, 1.6, 0.24), (2, 3, 1.5, 0.26)),
    ((2, 1, 2.4, 0.19), (1, 1, 2.1, 0.20), (2, 3, 2.0, 0.24), (2, 2, 1.7, 0.27)),
)
EXAMPLE1_STATED_PRICE = 0.285


@dataclass(frozen=True)
class ExampleFixture:
    queues: tuple[TaskQueue, ...]
    vms: tuple[tuple[VmState, ...], ...]


def example1_fixture(vms=EXAMPLE1_VMS, priorities=EXAMPLE1_PRIORITIES) -> ExampleFixture:
    """Three queues of four tasks and the VMs bidding for each."""
    queues = tuple(
        build_queue(n, np.arange(1, len(lam) + 1), np.full(len(lam), 10.0), np.array(lam))
        for n, lam in enumerate(priorities)
    )
    pools = tuple(
        tuple(
            VmState(
                server_id=srv,
                vm_index=m,
                app_id=n,
                valuation=0.5 * bid,
                vcpus=1,
                cpu_freq_ghz=MIN_FREQ_GHZ,
                compute_rate=32.0,
                quality=th,
                current_bid=bid,
            )
            for srv, m, th, bid in group
        )
        for n, group in enumerate(vms)
    )
    return ExampleFixture(queues, pools)


def _example1_scenario() -> Scenario:
    apps = tuple(AppSpec(id=n, deadline_ms=100.0, min_cpu_freq_ghz=MIN_FREQ_GHZ) for n in range(3))
    lam = np.array(EXAMPLE1_PRIORITIES).T
    ues = tuple(
        UeSpec(id=j, tx_power_dbm=20.0, avg_task_size_mb=tuple(float(x) for x in 100.0 * lam[j]), budget=20.0)
        for j in range(lam.shape[0])
    )
    servers = (
        ServerSpec(1, (1, 1, 1), (2, 2, 2), (3.3,) * 3, (32.0,) * 3, 0.0452, position=(60.0, 60.0)),
        ServerSpec(2, (3, 3, 3), (2, 2, 2), (3.5,) * 3, (24.0,) * 3, 0.0435, position=(190.0, 190.0)),
    )
    return validate(
        Scenario(
            servers=servers,
            ues=ues,
            apps=apps,
            auction=AuctionParams(rng_seed=1),
            task_model=TaskModel("poisson"),
            strategies=_strategies(servers),
            name="example1",
        )
    )


def bundled_scenario_path(name: str = "table3_table4.toml"):
    return resources.files("gspmec") / "presets" / name


def builtin_preset(name: str) -> Scenario:
    """Scenario for a named experiment; raises :class:`UnknownPreset` otherwise."""
    if name == "example1":
        return _example1_scenario()
    if name == "fig5_case1":
        return two_server_market((150, 1), 150, static=True, name=name)
    if name == "fig5_case2":
        return two_server_market((1, 150), 150, static=True, name=name)
    if name == "fig5_case3":
        return two_server_market((80, 80), 150, static=True, name=name)
    if name == "fig6a":
        return two_server_market((250, 250), 250, static=False, name=name)
    if name == "fig6b":
        return multi_server_market(2, 60, 120, name=name)
    if name == "fig7":
        return two_server_market((80, 80), 150, static=True, name=name)
    if name == "fig9":
        return multi_server_market(3, 100, 300, queue_capacity=300, name=name)
    if name == "fig10":
        return multi_server_market(3, 150, 400, queue_capacity=400, name=name)
    if name == "table3_table4":
        with resources.as_file(bundled_scenario_path()) as p:
            return load_scenario(p)
    raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
