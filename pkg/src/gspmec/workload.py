"""Per-VM backlog bookkeeping and the quality score derived from it."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import DomainError
from .scenario import AppSpec, ServerSpec


@dataclass
class VmState:
    server_id: int
    vm_index: int
    app_id: int
    valuation: float
    vcpus: int
    cpu_freq_ghz: float
    compute_rate: float
    workload_mb: float = 0.0
    # MB assigned in the most recent slot; the carry-over term only drains this
    last_assigned_mb: float = 0.0
    load_per_capacity: float = 0.0
    utilization: float = 1.0
    quality: float = 0.0
    current_bid: float = 0.0
    last_won_position: Optional[int] = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.server_id, self.vm_index)


def vm_valuation(spec: ServerSpec, app: int = 0) -> float:
    """Cost of running one VM for an hour, from its CPU power draw.

    ``rho * kappa * W * f**2`` with ``f`` in Hz, times the server's
    calibration multiplier.
    """
    f_hz = spec.cpu_freq_ghz[app] * 1e9
    raw = spec.price_scale * spec.switched_capacitance * spec.vcpus[app] * f_hz**2
    return raw * spec.valuation_scale


def calibration_for(spec: ServerSpec, target: float, app: int = 0) -> float:
    """Multiplier that makes :func:`vm_valuation` return ``target``."""
    base = vm_valuation(spec, app) / spec.valuation_scale
    if base <= 0:
        raise DomainError("cannot calibrate a zero valuation")
    return target / base


def advance_workload(
    last_assigned_mb: float, assigned_mb: float, slot_seconds: float, compute_rate: float
) -> float:
    """Backlog after a slot: undrained part of last slot's assignment plus the new one."""
    if assigned_mb < 0:
        raise DomainError("assigned_mb must be >= 0")
    return max(last_assigned_mb - compute_rate * slot_seconds, 0.0) + assigned_mb


def load_per_capacity(workload_mb: float, slot_seconds: float, compute_rate: float) -> float:
    cap = compute_rate * slot_seconds
    if cap <= 0:
        raise DomainError("compute_rate * slot_seconds must be > 0")
    return workload_mb / cap


def utilization(gamma: float, gamma_min: float, gamma_max: float) -> float:
    """Piecewise utilization score in [0, 1]; 1 when underloaded, 0 when overloaded."""
    if gamma >= gamma_max:
        return 0.0
    if gamma >= gamma_min:
        return abs(gamma - gamma_max) / gamma_max
    return 1.0


def quality_score(vcpus: float, cpu_freq_ghz: float, min_cpu_freq_ghz: float, phi: float) -> float:
    if min_cpu_freq_ghz <= 0:
        raise DomainError("min_cpu_freq_ghz must be > 0")
    return vcpus * cpu_freq_ghz / min_cpu_freq_ghz * phi


def refresh(vm: VmState, app: AppSpec, slot_seconds: float, gamma_min: float, gamma_max: float) -> None:
    """Recompute Gamma, phi and theta of ``vm`` from its current backlog."""
    vm.load_per_capacity = load_per_capacity(vm.workload_mb, slot_seconds, vm.compute_rate)
    vm.utilization = utilization(vm.load_per_capacity, gamma_min, gamma_max)
    vm.quality = quality_score(vm.vcpus, vm.cpu_freq_ghz, app.min_cpu_freq_ghz, vm.utilization)


def apply_assignment(vm: VmState, assigned_mb: float, slot_seconds: float) -> None:
    vm.workload_mb = advance_workload(vm.last_assigned_mb, assigned_mb, slot_seconds, vm.compute_rate)
    vm.last_assigned_mb = assigned_mb
