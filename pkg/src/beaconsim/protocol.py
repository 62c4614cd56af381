"""Group lifecycle state machine: identification of co-moving UEs, group
configuration, membership monitoring, leave handling, transmitter rotation,
and gNB context handover.

The functions here mutate protocol state and emit event records; resource
(re)assignment side effects are wired by the caller so the state machine
stays unit-testable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .mobility import World, torus_delta

MODE_INDIVIDUAL = 0
MODE_MEMBER = 1
MODE_TRANSMITTER = 2

STATE_FORMING = "forming"
STATE_ACTIVE = "active"
STATE_DISSOLVING = "dissolving"

EVENT_FIELDS = ("tick", "event", "group", "ue", "gnb_from", "gnb_to")


class ProtocolError(ValueError):
    """Raised on state-machine misuse (wrong member, wrong owner, ...)."""


@dataclass
class Group:
    id: int
    members: list[int]              # sorted UE ids
    transmitter: int
    state: str = STATE_ACTIVE
    miss_counts: dict[int, int] = field(default_factory=dict)
    last_rotation_s: float = 0.0

    def validate(self) -> None:
        if self.state == STATE_ACTIVE:
            if len(self.members) < 2:
                raise ProtocolError(f"group {self.id} active with <2 members")
            if self.transmitter not in self.members:
                raise ProtocolError(f"group {self.id} transmitter not a member")


@dataclass
class GroupContext:
    group_id: int
    members: tuple[int, ...]
    pair: int           # beacon resource configuration (sequence-pair index)
    owner_gnb: int


@dataclass
class TrackRecord:
    """Sliding window of once-per-period position estimates."""

    window: int
    periods: list[int] = field(default_factory=list)
    estimates: list[tuple[float, float]] = field(default_factory=list)

    def add(self, period: int, estimate: tuple[float, float]) -> None:
        if self.periods and period <= self.periods[-1]:
            raise ProtocolError("track observations must advance in time")
        self.periods.append(period)
        self.estimates.append(estimate)
        if len(self.periods) > self.window:
            del self.periods[0]
            del self.estimates[0]

    def complete_through(self, period: int) -> bool:
        """True when the last `window` periods are all present, ending now."""
        if len(self.periods) < self.window:
            return False
        expect = range(period - self.window + 1, period + 1)
        return self.periods[-self.window:] == list(expect)


def estimate_position(detections: list[tuple[int, float]], trp_xy: np.ndarray,
                      world: World) -> tuple[float, float] | None:
    """Power-weighted torus centroid of detecting TRPs; None when nothing
    detected this occasion (tracking continues on the next one)."""
    if not detections:
        return None
    best = max(detections, key=lambda d: d[1])
    anchor = trp_xy[best[0]]
    total_w = sum(w for _, w in detections)
    acc = np.zeros(2)
    for trp, w in detections:
        acc += w * np.array([
            torus_delta(anchor[0], trp_xy[trp][0], world.width),
            torus_delta(anchor[1], trp_xy[trp][1], world.height),
        ])
    est = anchor + acc / total_w
    return (float(est[0] % world.width), float(est[1] % world.height))


def _torus_d(a: tuple[float, float], b: tuple[float, float],
             w: float, h: float) -> float:
    dx = abs(a[0] - b[0])
    if dx > w - dx:
        dx = w - dx
    dy = abs(a[1] - b[1])
    if dy > h - dy:
        dy = h - dy
    return math.hypot(dx, dy)


def records_co_located(a: TrackRecord, b: TrackRecord, window: int,
                       radius_threshold: float, world: World) -> bool:
    """True when the two tracks stayed pairwise within the threshold over
    all of the last `window` observations."""
    for k in range(1, window + 1):
        if _torus_d(a.estimates[-k], b.estimates[-k],
                    world.width, world.height) > radius_threshold:
            return False
    return True


def identify_groups(records: dict[int, TrackRecord], period: int,
                    radius_threshold: float, window: int,
                    world: World) -> list[list[int]]:
    """Candidate co-moving sets: greedy maximal sets (ascending id) whose
    pairwise estimated distances stayed within the threshold for all of the
    last `window` observations."""
    ready = sorted(
        e for e, r in records.items()
        if r.window >= window and r.complete_through(period)
    )

    def co_located(a: int, b: int) -> bool:
        return records_co_located(records[a], records[b], window,
                                  radius_threshold, world)

    out: list[list[int]] = []
    unassigned = set(ready)
    for e in ready:
        if e not in unassigned:
            continue
        group = [e]
        for f in ready:
            if f in unassigned and f != e and all(co_located(f, g) for g in group):
                group.append(f)
        if len(group) >= 2:
            out.append(sorted(group))
            unassigned -= set(group)
    return out


class ProtocolState:
    """Network-side grouping state for one replication."""

    def __init__(self, n_users: int, miss_limit: int = 3,
                 handover_hysteresis: int = 2):
        self.n_users = n_users
        self.miss_limit = miss_limit
        self.handover_hysteresis = handover_hysteresis
        self.groups: dict[int, Group] = {}
        self.contexts: dict[int, GroupContext] = {}
        self.ue_mode = np.full(n_users, MODE_INDIVIDUAL, dtype=np.int64)
        self.ue_group = np.full(n_users, -1, dtype=np.int64)
        self.events: list[dict] = []
        self._next_group_entity = n_users
        self._ho_candidate: dict[int, tuple[int, int]] = {}  # gid -> (gnb, streak)

    # -- bookkeeping -----------------------------------------------------

    def new_group_id(self) -> int:
        gid = self._next_group_entity
        self._next_group_entity += 1
        return gid

    def log(self, tick: int, event: str, group: int | None = None,
            ue: int | None = None, gnb_from: int | None = None,
            gnb_to: int | None = None) -> None:
        self.events.append({
            "tick": tick, "event": event, "group": group, "ue": ue,
            "gnb_from": gnb_from, "gnb_to": gnb_to,
        })

    # -- lifecycle ---------------------------------------------------------

    def form_group(self, members: Iterable[int], pair: int, owner_gnb: int,
                   tick: int) -> Group:
        members = sorted(members)
        if len(members) < 2:
            raise ProtocolError("a group needs at least 2 members")
        for u in members:
            if self.ue_group[u] != -1:
                raise ProtocolError(f"UE {u} already belongs to a group")
        gid = self.new_group_id()
        group = Group(id=gid, members=members, transmitter=members[0],
                      miss_counts={u: 0 for u in members})
        group.validate()
        self.groups[gid] = group
        self.contexts[gid] = GroupContext(gid, tuple(members), pair, owner_gnb)
        for u in members:
            self.ue_group[u] = gid
            self.ue_mode[u] = MODE_TRANSMITTER if u == group.transmitter else MODE_MEMBER
        self.log(tick, "group_formed", group=gid, ue=group.transmitter)
        return group

    def add_member(self, group: Group, ue: int, tick: int) -> None:
        if self.ue_group[ue] != -1:
            raise ProtocolError(f"UE {ue} already belongs to a group")
        if group.state != STATE_ACTIVE:
            raise ProtocolError("can only join an active group")
        group.members = sorted(group.members + [ue])
        group.miss_counts[ue] = 0
        self.ue_group[ue] = group.id
        self.ue_mode[ue] = MODE_MEMBER
        ctx = self.contexts[group.id]
        ctx.members = tuple(group.members)
        self.log(tick, "member_joined", group=group.id, ue=ue)

    def monitor_membership(self, group: Group, outcomes: dict[int, bool],
                           tick: int) -> list[int]:
        """Update consecutive-miss counters from this occasion's group-beacon
        reception outcomes; return members whose counter hit the limit."""
        if group.state != STATE_ACTIVE:
            return []
        leavers: list[int] = []
        for u, received in outcomes.items():
            if u == group.transmitter or u not in group.members:
                continue
            if received:
                group.miss_counts[u] = 0
            else:
                group.miss_counts[u] += 1
                if group.miss_counts[u] >= self.miss_limit:
                    leavers.append(u)
        for u in leavers:
            self.log(tick, "member_leave", group=group.id, ue=u)
        return leavers

    def handle_member_leave(self, group: Group, ue: int, tick: int) -> bool:
        """Remove a member; returns True when the group dissolves (size < 2)."""
        if ue not in group.members:
            raise ProtocolError(f"UE {ue} not in group {group.id}")
        if ue == group.transmitter:
            self.handle_transmitter_leave(group, tick)
            return True
        group.members.remove(ue)
        group.miss_counts.pop(ue, None)
        self.ue_group[ue] = -1
        self.ue_mode[ue] = MODE_INDIVIDUAL
        if len(group.members) < 2:
            self._dissolve(group, tick)
            return True
        self.contexts[group.id].members = tuple(group.members)
        group.validate()
        return False

    def handle_transmitter_leave(self, group: Group, tick: int) -> None:
        """Safest option on transmitter departure: dissolve, configure every
        member individually, observe correlation again before re-grouping."""
        if group.state == STATE_DISSOLVING:
            return
        self._dissolve(group, tick)

    def _dissolve(self, group: Group, tick: int) -> None:
        group.state = STATE_DISSOLVING
        for u in group.members:
            self.ue_group[u] = -1
            self.ue_mode[u] = MODE_INDIVIDUAL
        self.log(tick, "group_dissolved", group=group.id)
        self.groups.pop(group.id, None)
        self.contexts.pop(group.id, None)
        self._ho_candidate.pop(group.id, None)

    def rotate_transmitter(self, group: Group, tick: int) -> int:
        """Round-robin the transmitter role by member id; resource retained."""
        if group.state != STATE_ACTIVE:
            raise ProtocolError("cannot rotate a non-active group")
        idx = group.members.index(group.transmitter)
        old = group.transmitter
        group.transmitter = group.members[(idx + 1) % len(group.members)]
        self.ue_mode[old] = MODE_MEMBER
        self.ue_mode[group.transmitter] = MODE_TRANSMITTER
        group.miss_counts[old] = 0
        group.validate()
        if group.transmitter != old:
            self.log(tick, "transmitter_rotated", group=group.id, ue=group.transmitter)
        return group.transmitter

    # -- context / handover ----------------------------------------------

    def handover_context(self, gid: int, from_gnb: int, to_gnb: int,
                         tick: int) -> GroupContext:
        ctx = self.contexts.get(gid)
        if ctx is None:
            raise ProtocolError(f"no context for group {gid}")
        if ctx.owner_gnb != from_gnb:
            raise ProtocolError(
                f"gNB {from_gnb} does not own group {gid} (owner {ctx.owner_gnb})"
            )
        ctx.owner_gnb = to_gnb
        self._ho_candidate.pop(gid, None)
        self.log(tick, "handover", group=gid, gnb_from=from_gnb, gnb_to=to_gnb)
        return ctx

    def update_serving(self, gid: int, candidate_gnb: int, deep_inside: bool,
                       tick: int) -> None:
        """Hysteresis rule on the tracked position: hand the context over once
        the estimate sits firmly inside a different gNB's territory for
        `handover_hysteresis` consecutive observations.

        ``deep_inside`` is the caller's deadband verdict (estimate farther
        than the margin from the candidate territory's border); shallow or
        owner-side estimates reset the streak, which keeps static groups from
        flapping on estimate noise.
        """
        ctx = self.contexts.get(gid)
        if ctx is None:
            return
        if candidate_gnb == ctx.owner_gnb or not deep_inside:
            self._ho_candidate.pop(gid, None)
            return
        prev, streak = self._ho_candidate.get(gid, (candidate_gnb, 0))
        streak = streak + 1 if prev == candidate_gnb else 1
        if streak >= self.handover_hysteresis:
            self.handover_context(gid, ctx.owner_gnb, candidate_gnb, tick)
        else:
            self._ho_candidate[gid] = (candidate_gnb, streak)

    # -- invariants --------------------------------------------------------

    def check_invariants(self) -> None:
        owners: dict[int, int] = {}
        for gid, group in self.groups.items():
            group.validate()
            ctx = self.contexts.get(gid)
            if ctx is None:
                raise ProtocolError(f"group {gid} has no context")
            if gid in owners:
                raise ProtocolError(f"group {gid} context owned twice")
            owners[gid] = ctx.owner_gnb
            for u in group.members:
                if self.ue_group[u] != gid:
                    raise ProtocolError(f"UE {u} mode inconsistent with group {gid}")
                expect = MODE_TRANSMITTER if u == group.transmitter else MODE_MEMBER
                if self.ue_mode[u] != expect:
                    raise ProtocolError(f"UE {u} mode flag inconsistent")
        grouped = np.where(self.ue_group >= 0)[0]
        for u in grouped:
            if int(self.ue_group[u]) not in self.groups:
                raise ProtocolError(f"UE {u} points at a dead group")
