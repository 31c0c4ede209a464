"""Hybrid resource pool: instance catalog, machine leases and quantum billing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace


class CloudError(RuntimeError):
    pass


class UnknownInstanceType(CloudError, KeyError):
    def __str__(self) -> str:
        return f"unknown instance type: {self.args[0]}"


class CapacityExhausted(CloudError):
    pass


class LeaseError(CloudError):
    pass


class Venue(str, enum.Enum):
    PRIVATE = "private"
    PUBLIC = "public"


@dataclass(frozen=True)
class InstanceType:
    name: str
    venue: Venue
    cores: int
    speed_factor: float
    price_per_quantum: float = 0.0
    capacity_limit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "venue", Venue(self.venue))
        if self.cores < 1:
            raise ValueError(f"{self.name}: cores must be positive")
        if not self.speed_factor > 0:
            raise ValueError(f"{self.name}: speed_factor must be positive")
        if self.price_per_quantum < 0:
            raise ValueError(f"{self.name}: price_per_quantum must be non-negative")
        if self.venue is Venue.PRIVATE and self.price_per_quantum != 0:
            raise ValueError(f"{self.name}: private instance types are not billed")
        if self.capacity_limit is not None and self.capacity_limit < 1:
            raise ValueError(f"{self.name}: capacity_limit must be positive")

    @property
    def is_public(self) -> bool:
        return self.venue is Venue.PUBLIC


@dataclass(frozen=True)
class PricingPolicy:
    quantum_seconds: int = 3600
    min_quanta: int = 1

    def __post_init__(self):
        if self.quantum_seconds <= 0:
            raise ValueError("quantum_seconds must be positive")
        if self.min_quanta < 1:
            raise ValueError("min_quanta must be positive")

    def quanta(self, duration: float) -> int:
        """Billed quanta for a lease of ``duration`` seconds."""
        return max(self.min_quanta, math.ceil(duration / self.quantum_seconds))

    def slot_end(self, duration: float) -> float:
        """``duration`` rounded up to the next quantum boundary."""
        return math.ceil(duration / self.quantum_seconds) * self.quantum_seconds


def billed_cost(itype: InstanceType, duration: float, policy: PricingPolicy) -> float:
    if not itype.is_public:
        return 0.0
    return itype.price_per_quantum * policy.quanta(duration)


@dataclass(frozen=True)
class Machine:
    id: int
    type: InstanceType
    lease_start: float
    lease_end: float | None = None

    def __post_init__(self):
        if self.lease_end is not None and self.lease_end < self.lease_start:
            raise LeaseError(f"machine {self.id}: lease ends before it starts")

    @property
    def duration(self) -> float | None:
        return None if self.lease_end is None else self.lease_end - self.lease_start


def lease_cost(machine: Machine, policy: PricingPolicy) -> float:
    if machine.lease_end is None:
        raise LeaseError(f"machine {machine.id} has an open lease")
    return billed_cost(machine.type, machine.lease_end - machine.lease_start, policy)


@dataclass
class ResourcePool:
    """Leased machines of one simulation run. Mutated only by that run's loop."""

    catalog: list[InstanceType]
    active: dict[int, Machine] = field(default_factory=dict)
    released: list[Machine] = field(default_factory=list)
    _next_id: int = 0

    def __post_init__(self):
        names = [t.name for t in self.catalog]
        if len(set(names)) != len(names):
            raise ValueError("duplicate instance type names in catalog")

    def instance_type(self, name: str) -> InstanceType:
        for itype in self.catalog:
            if itype.name == name:
                return itype
        raise UnknownInstanceType(name)

    def active_count(self, type_name: str) -> int:
        return sum(1 for m in self.active.values() if m.type.name == type_name)

    def counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for m in sorted(self.active.values(), key=lambda m: m.id):
            counts[m.type.name] = counts.get(m.type.name, 0) + 1
        return dict(sorted(counts.items()))

    def provision(self, type_name: str, now: float) -> Machine:
        itype = self.instance_type(type_name)
        if itype.capacity_limit is not None and self.active_count(type_name) >= itype.capacity_limit:
            raise CapacityExhausted(f"{type_name}: capacity limit {itype.capacity_limit} reached")
        machine = Machine(self._next_id, itype, now)
        self._next_id += 1
        self.active[machine.id] = machine
        return machine

    def release(self, machine_id: int, now: float) -> Machine:
        machine = self.active.pop(machine_id, None)
        if machine is None:
            raise LeaseError(f"machine {machine_id} is not active")
        if now < machine.lease_start:
            self.active[machine_id] = machine
            raise LeaseError(f"machine {machine_id} released before its lease start")
        closed = replace(machine, lease_end=now)
        self.released.append(closed)
        return closed

    def release_all(self, now: float) -> None:
        for machine_id in sorted(self.active):
            self.release(machine_id, now)

    def machines(self) -> list[Machine]:
        """Every machine ever leased, ordered by id."""
        return sorted([*self.active.values(), *self.released], key=lambda m: m.id)

    def cost(self, policy: PricingPolicy, now: float | None = None) -> float:
        """Billed total. Active leases are costed as if closed at ``now``."""
        total = sum(lease_cost(m, policy) for m in sorted(self.released, key=lambda m: m.id))
        if self.active:
            if now is None:
                raise LeaseError("pool has open leases")
            for m in sorted(self.active.values(), key=lambda m: m.id):
                total += lease_cost(replace(m, lease_end=max(now, m.lease_start)), policy)
        return total


def provision(pool: ResourcePool, type_name: str, now: float) -> Machine:
    return pool.provision(type_name, now)


def release(pool: ResourcePool, machine_id: int, now: float) -> ResourcePool:
    pool.release(machine_id, now)
    return pool


def default_catalog() -> list[InstanceType]:
    """Catalog mirroring the hybrid testbed: 48 private VMs and 25 large public instances.

    Speeds and prices are configuration defaults, not measured values. The
    public-small type exists so public instances have a downgrade target.
    """
    return [
        InstanceType("private-2core", Venue.PRIVATE, 2, 1.0, 0.0, 24),
        InstanceType("private-4core", Venue.PRIVATE, 4, 1.0, 0.0, 24),
        InstanceType("public-large", Venue.PUBLIC, 2, 2.0, 0.34, 25),
        InstanceType("public-small", Venue.PUBLIC, 2, 1.0, 0.17, 25),
    ]
