"""Beacon resource dimensioning and assignment with spatial reuse.

Dimensioning is exact integer arithmetic over the occasion grid.  The
allocator hosts every beaconing entity (an individual UE or a group) on one
(BeRB, root, shift) sequence pair drawn from a zone-local pool, so resources
stay orthogonal within an area larger than the beacon reach.  Entities
sharing a pair time-share its occasions, except that entities farther apart
than the reuse distance may transmit simultaneously (spatial reuse).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .radio import SequenceId


class AllocationError(ValueError):
    """Raised for unknown entities or malformed grids."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, int(math.isqrt(n)) + 1))


@dataclass
class DimensioningParams:
    system_bandwidth_hz: float = 100e6
    seq_subcarrier_spacing_hz: float = 240e3
    n_berb: int = 53
    n_roots: int = 6
    n_shifts: int = 2
    t_scp_ns: int = 350
    n_scp: int = 86
    t_seq_ns: int = 4170
    n_seq: int = 1024
    t_sgt_ns: int = 220
    n_sgt: int = 54
    occasions_per_second: int = 5
    max_beacon_rate_hz: float = 5.0
    sequence_length: int = 7

    @classmethod
    def from_config(cls, dim, sequence_length: int) -> "DimensioningParams":
        return cls(
            system_bandwidth_hz=dim.system_bandwidth_hz,
            seq_subcarrier_spacing_hz=dim.seq_subcarrier_spacing_hz,
            n_berb=dim.n_berb,
            n_roots=dim.n_roots,
            n_shifts=dim.n_shifts,
            t_scp_ns=round(dim.t_scp_us * 1000),
            n_scp=dim.n_scp,
            t_seq_ns=round(dim.t_seq_us * 1000),
            n_seq=dim.n_seq,
            t_sgt_ns=round(dim.t_sgt_us * 1000),
            n_sgt=dim.n_sgt,
            occasions_per_second=dim.occasions_per_second,
            max_beacon_rate_hz=dim.max_beacon_rate_hz,
            sequence_length=sequence_length,
        )


@dataclass(frozen=True)
class BeaconResource:
    occasion_phase: int
    berb: int
    seq: SequenceId


@dataclass
class Assignment:
    entity: int
    pair: int
    berb: int
    seq: SequenceId
    rate_hz: float      # fair-floor rate of the pair share; actual granted
    zone: int           # rate can exceed this through spatial reuse


@dataclass
class ResourceGrid:
    params: DimensioningParams
    m_seq: int
    m_sys: int
    t_be_ns: int
    n_be: int

    @property
    def occasions_per_second(self) -> int:
        return self.params.occasions_per_second

    @property
    def t_be_us(self) -> float:
        return self.t_be_ns / 1000.0

    @property
    def seq_bandwidth_hz(self) -> float:
        return self.params.sequence_length * self.params.seq_subcarrier_spacing_hz

    def pair_tuple(self, pair: int) -> tuple[int, int, int]:
        """(berb, root, shift) of a sequence-pair index."""
        if not 0 <= pair < self.m_sys:
            raise AllocationError(f"pair index {pair} out of range")
        berb, sidx = divmod(pair, self.m_seq)
        root, shift = divmod(sidx, self.params.n_shifts)
        return berb, root, shift

    def resource(self, phase: int, pair: int) -> BeaconResource:
        berb, root, shift = self.pair_tuple(pair)
        return BeaconResource(phase, berb, SequenceId(root, shift))

    def enumerate_occasion(self, phase: int = 0) -> list[BeaconResource]:
        return [self.resource(phase, p) for p in range(self.m_sys)]


def dimension(params: DimensioningParams) -> ResourceGrid:
    """Exact dimensioning arithmetic over the occasion grid.

    Rejects sample counts inconsistent with the stated durations (the three
    implied sample rates must agree within 2%).
    """
    if params.n_roots < 1 or params.n_shifts < 1 or params.n_berb < 1:
        raise AllocationError("dimensioning counts must be >= 1")
    n_z = params.sequence_length
    if _is_prime(n_z) and params.n_roots > n_z - 1:
        raise AllocationError(
            f"{params.n_roots} roots requested but a prime length-{n_z} "
            f"sequence family has only {n_z - 1}"
        )
    rates = []
    for n, t in ((params.n_scp, params.t_scp_ns), (params.n_seq, params.t_seq_ns),
                 (params.n_sgt, params.t_sgt_ns)):
        if n < 1 or t <= 0:
            raise AllocationError("sample counts and durations must be positive")
        rates.append(n / t)
    if max(rates) / min(rates) > 1.02:
        raise AllocationError(
            "sample counts inconsistent with durations: implied sample rates "
            f"{[f'{r * 1e3:.1f} MHz' for r in rates]}"
        )
    m_seq = params.n_roots * params.n_shifts
    return ResourceGrid(
        params=params,
        m_seq=m_seq,
        m_sys=params.n_berb * m_seq,
        t_be_ns=params.t_scp_ns + params.t_seq_ns + params.t_sgt_ns,
        n_be=params.n_scp + params.n_seq + params.n_sgt,
    )


def apportion(populations: dict[int, int], total: int) -> dict[int, int]:
    """Largest-remainder split of ``total`` pool slots over populated zones,
    at least one per populated zone."""
    zones = sorted(z for z, p in populations.items() if p > 0)
    if not zones:
        return {}
    if len(zones) > total:
        raise AllocationError("more populated zones than sequence pairs")
    n = sum(populations[z] for z in zones)
    quotas = {z: total * populations[z] / n for z in zones}
    pools = {z: max(1, int(quotas[z])) for z in zones}
    remaining = total - sum(pools.values())
    by_fraction = sorted(zones, key=lambda z: (-(quotas[z] - int(quotas[z])), z))
    i = 0
    while remaining > 0:
        pools[by_fraction[i % len(by_fraction)]] += 1
        remaining -= 1
        i += 1
    while remaining < 0:
        # min-1 floors can overshoot when many zones hold tiny populations
        for z in sorted(zones, key=lambda z: (pools[z] - quotas[z], z), reverse=True):
            if pools[z] > 1:
                pools[z] -= 1
                remaining += 1
                break
        else:
            raise AllocationError("cannot apportion pools")
    return pools


class Allocator:
    """Single-replication owner of beacon-resource assignments.

    ``allocate`` re-zones entities once per scheduling period;
    ``schedule_occasion`` picks each pair's transmit set per beacon occasion
    with deficit-fair time sharing and optional spatial reuse.  Two entities
    closer than the reuse distance never share a (phase, BeRB, sequence)
    slot; with reuse disabled a slot is never shared at all, making the
    aggregate capacity exactly m_sys * occasions_per_second.
    """

    def __init__(self, grid: ResourceGrid, world_w: float, world_h: float,
                 reuse_enabled: bool = True, reuse_distance_m: float = 20.0,
                 zone_size_m: float = 28.8, occasions_per_period: int = 5,
                 max_rate_hz: float = 5.0, period_s: float = 1.0):
        self.grid = grid
        self.world_w = world_w
        self.world_h = world_h
        self.reuse_enabled = reuse_enabled
        self.reuse_distance = reuse_distance_m
        self.zone_size = zone_size_m
        self.occasions_per_period = occasions_per_period
        self.max_slots_per_period = max(1, round(max_rate_hz * period_s))
        self.period_s = period_s

        # the zone grid never outnumbers the sequence pairs, so every
        # populated zone can hold at least one pair
        self.zones_per_side = max(1, min(round(world_w / zone_size_m),
                                         math.isqrt(grid.m_sys)))
        # BeRB-interleaved pair enumeration: consecutive pool slots hop
        # across BeRBs, so entities sharing a zone occupy different BeRBs
        # and co-channel interferers come from distant zones
        n_berb = grid.params.n_berb
        self._pair_order = [(k % n_berb) * grid.m_seq + (k // n_berb)
                            for k in range(grid.m_sys)]

        self.pair_users: dict[int, list[int]] = {}
        self.entity_pair: dict[int, int] = {}
        self.entity_zone: dict[int, int] = {}
        self.zone_pools: dict[int, list[int]] = {}
        self.granted_total: dict[int, int] = {}
        self.per_period: dict[int, int] = {}
        self.positions: dict[int, tuple[float, float]] = {}

    # -- zoning ------------------------------------------------------------

    def _zone_of(self, pos: tuple[float, float]) -> int:
        zps = self.zones_per_side
        zx = int(pos[0] / (self.world_w / zps)) % zps
        zy = int(pos[1] / (self.world_h / zps)) % zps
        return zx * zps + zy

    def torus_distance(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        dx = abs(a[0] - b[0])
        dx = min(dx, self.world_w - dx)
        dy = abs(a[1] - b[1])
        dy = min(dy, self.world_h - dy)
        return math.hypot(dx, dy)

    # -- period-level allocation --------------------------------------------

    def allocate(self, entities: list[tuple[int, tuple[float, float]]]) -> dict[int, Assignment]:
        """Re-zone all entities and rebuild pair membership for one period."""
        self.pair_users.clear()
        self.entity_pair.clear()
        self.entity_zone.clear()
        self.positions = {e: (float(p[0]), float(p[1])) for e, p in entities}
        self.per_period = {e: 0 for e, _ in entities}
        for e, _ in entities:
            self.granted_total.setdefault(e, 0)

        populations: dict[int, int] = {}
        zone_members: dict[int, list[int]] = {}
        for e, pos in entities:
            z = self._zone_of(pos)
            self.entity_zone[e] = z
            populations[z] = populations.get(z, 0) + 1
            zone_members.setdefault(z, []).append(e)

        pools = apportion(populations, self.grid.m_sys)
        self.zone_pools = {}
        start = 0
        for z in sorted(pools):
            self.zone_pools[z] = self._pair_order[start:start + pools[z]]
            start += pools[z]

        out: dict[int, Assignment] = {}
        for z in sorted(zone_members):
            pool = self.zone_pools[z]
            for i, e in enumerate(sorted(zone_members[z])):
                pair = pool[i % len(pool)]
                self.entity_pair[e] = pair
                self.pair_users.setdefault(pair, []).append(e)
        for e in self.entity_pair:
            out[e] = self._assignment(e)
        return out

    def _assignment(self, entity: int) -> Assignment:
        pair = self.entity_pair[entity]
        berb, root, shift = self.grid.pair_tuple(pair)
        share = self.occasions_per_period / len(self.pair_users[pair]) / self.period_s
        rate = min(self.max_slots_per_period / self.period_s, share)
        return Assignment(entity=entity, pair=pair, berb=berb,
                          seq=SequenceId(root, shift), rate_hz=rate,
                          zone=self.entity_zone[entity])

    # -- occasion-level scheduling -------------------------------------------

    def schedule_occasion(self, positions: dict[int, tuple[float, float]] | None = None
                          ) -> list[tuple[int, int]]:
        """Pick this occasion's transmit set: per pair, the most underserved
        feasible entities.  Returns (entity, pair) tuples."""
        if positions:
            self.positions.update(positions)
        chosen_all: list[tuple[int, int]] = []
        for pair in sorted(self.pair_users):
            users = [u for u in self.pair_users[pair]
                     if self.per_period.get(u, 0) < self.max_slots_per_period]
            if not users:
                continue
            users.sort(key=lambda u: (self.granted_total[u], u))
            chosen = [users[0]]
            if self.reuse_enabled:
                for u in users[1:]:
                    pu = self.positions[u]
                    if all(self.torus_distance(pu, self.positions[c])
                           >= self.reuse_distance for c in chosen):
                        chosen.append(u)
            for c in chosen:
                self.per_period[c] = self.per_period.get(c, 0) + 1
                self.granted_total[c] += 1
                chosen_all.append((c, pair))
        return chosen_all

    def check_reuse_invariant(self, scheduled: list[tuple[int, int]]) -> None:
        """Exhaustive pairwise scan: co-slot entities are >= reuse distance apart."""
        by_pair: dict[int, list[int]] = {}
        for e, pair in scheduled:
            by_pair.setdefault(pair, []).append(e)
        for pair, ents in by_pair.items():
            if not self.reuse_enabled and len(ents) > 1:
                raise AllocationError(f"pair {pair} shared with reuse disabled")
            for i in range(len(ents)):
                for j in range(i + 1, len(ents)):
                    d = self.torus_distance(self.positions[ents[i]],
                                            self.positions[ents[j]])
                    if d < self.reuse_distance:
                        raise AllocationError(
                            f"entities {ents[i]}/{ents[j]} share pair {pair} "
                            f"at {d:.2f} m < reuse distance"
                        )

    # -- event-driven release / reassign --------------------------------------

    def release(self, entity: int) -> None:
        if entity not in self.entity_pair:
            raise AllocationError(f"entity {entity} has no assignment")
        pair = self.entity_pair.pop(entity)
        self.pair_users[pair].remove(entity)
        if not self.pair_users[pair]:
            del self.pair_users[pair]
        self.entity_zone.pop(entity, None)
        self.per_period.pop(entity, None)

    def reassign(self, entity: int, position: tuple[float, float]) -> Assignment:
        """Give an entity a resource immediately: the most lightly loaded pair
        of its zone's pool (time-sharing it if the pool is exhausted)."""
        if entity in self.entity_pair:
            raise AllocationError(f"entity {entity} already has an assignment")
        self.positions[entity] = (float(position[0]), float(position[1]))
        zone = self._zone_of(position)
        pool = self.zone_pools.get(zone)
        if not pool:
            if not self.zone_pools:
                self.zone_pools[zone] = list(self._pair_order)
            else:
                # zone had no population at period start: borrow the nearest
                # zone's pool (deterministic by zone index)
                zone = min(self.zone_pools)
            pool = self.zone_pools[zone]
        load = {p: len(self.pair_users.get(p, [])) for p in pool}
        pair = min(pool, key=lambda p: (load[p], p))
        if load[pair] > 0:
            # zone pool exhausted mid-period: borrow any globally free pair
            # before falling back to time-sharing the lightest one
            for cand in self._pair_order:
                if not self.pair_users.get(cand):
                    pair = cand
                    break
        self.entity_pair[entity] = pair
        self.entity_zone[entity] = zone
        self.pair_users.setdefault(pair, []).append(entity)
        self.per_period.setdefault(entity, 0)
        if entity not in self.granted_total:
            totals = list(self.granted_total.values())
            self.granted_total[entity] = int(np.mean(totals)) if totals else 0
        return self._assignment(entity)

    @property
    def live_assignments(self) -> int:
        return len(self.entity_pair)
