"""Deterministic tick-driven simulation binding mobility, resources, radio,
and the grouping protocol, plus the wrong-cell reachability study.

One tick = one beacon occasion.  Each replication owns its world, allocator,
protocol state, and RNG stream; replications never share mutable state, and
aggregation over replications is a pure reduction, so results are a pure
function of (scenario, seed).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .config import Scenario
from .mobility import World, Population, deploy, step, torus_delta, torus_distance_matrix
from .protocol import (EVENT_FIELDS, MODE_INDIVIDUAL, ProtocolState, TrackRecord,
                       identify_groups, records_co_located)
from .radio import (ChannelParams, DetectionParams, LOS_ALWAYS, calibrate_threshold,
                    dbm_to_watts, thermal_noise_dbm)
from .resources import Allocator, DimensioningParams, dimension


class InvariantViolation(AssertionError):
    """A simulation-wide invariant failed; the replication is not trustworthy."""


@dataclass
class ReplicationResult:
    n_users: int
    measure_s: float
    mean_rate_hz: float
    p_md: float
    n_transmissions: int
    n_missed: int
    n_handovers: int
    n_leaves: int
    n_formed: int
    peak_entities: int = 0
    events: list[dict] = field(default_factory=list)


@dataclass
class MetricsRecord:
    n_replications: int
    mean_rate_hz: float
    rate_ci95: float
    p_md: float
    p_md_ci95: float
    rate_values: tuple[float, ...]
    p_md_values: tuple[float, ...]


def ci95(values) -> float:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(1.96 * v.std(ddof=1) / math.sqrt(len(v)))


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(rep,))))


class Simulation:
    """One replication of the beacon-tracking system."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator,
                 sinr_probe: Callable[[dict], None] | None = None):
        scenario.validate()
        self.sc = scenario
        self.rng = rng
        self.sinr_probe = sinr_probe

        self.world, self.pop = deploy(scenario, rng)
        dim = DimensioningParams.from_config(scenario.dimensioning,
                                             scenario.detection.sequence_length)
        self.grid = dimension(dim)

        det = scenario.detection
        lam = det.threshold if det.threshold is not None else calibrate_threshold(
            det.target_false_alarm, det.n_antennas, det.search_window)
        if det.noise_mode == "derived":
            noise_dbm = thermal_noise_dbm(self.grid.seq_bandwidth_hz,
                                          det.noise_figure_db, det.temperature_k)
        else:
            noise_dbm = det.noise_power_dbm
        self.det = DetectionParams(
            n_antennas=det.n_antennas, search_window=det.search_window,
            threshold=lam, sequence_length=det.sequence_length,
            beacon_range_m=det.beacon_range_m, noise_power_dbm=noise_dbm)

        ch = scenario.channel
        self.channel = ChannelParams(
            carrier_frequency_hz=ch.carrier_frequency_hz,
            sigma_sf_los_db=ch.sigma_sf_los_db, sigma_sf_nlos_db=ch.sigma_sf_nlos_db,
            trp_height_m=ch.trp_height_m, ue_height_m=ch.ue_height_m,
            los_model=ch.los_model, path_loss_model=ch.path_loss_model,
            log_distance_ref_db=ch.log_distance_ref_db,
            log_distance_exponent=ch.log_distance_exponent)
        self.power_w = dbm_to_watts(ch.tx_power_dbm)

        occ = scenario.dimensioning.occasions_per_second
        self.tick_s = 1.0 / occ
        self.occasions_per_period = max(1, round(scenario.allocator.realloc_period_s * occ))
        self.allocator = Allocator(
            self.grid, self.world.width, self.world.height,
            reuse_enabled=scenario.allocator.reuse_enabled,
            reuse_distance_m=scenario.allocator.reuse_distance_m,
            zone_size_m=scenario.allocator.zone_scale * scenario.deployment.isd_m,
            occasions_per_period=self.occasions_per_period,
            max_rate_hz=scenario.dimensioning.max_beacon_rate_hz,
            period_s=scenario.allocator.realloc_period_s)

        self.proto = ProtocolState(self.pop.n_users,
                                   miss_limit=scenario.protocol.miss_limit,
                                   handover_hysteresis=scenario.protocol.handover_hysteresis)

        # drop-fixed UE->TRP link states, drawn from initial geometry
        pos0 = self.pop.positions(self.world)
        d0 = torus_distance_matrix(pos0, self.world.trp_xy, self.world)
        self.los_ut = self._draw_los(d0)
        sigma = np.where(self.los_ut, ch.sigma_sf_los_db, ch.sigma_sf_nlos_db)
        self.shadow_ut = rng.normal(0.0, 1.0, d0.shape) * sigma
        self.los_uu: np.ndarray | None = None
        self.shadow_uu: np.ndarray | None = None

        # gNBs: square blocks of the TRP grid
        tps = self.world.trps_per_side
        block = scenario.protocol.trps_per_gnb_side
        self._gnbs_per_side = tps // block
        self._gnb_block_m = block * self.world.isd
        ix = np.arange(self.world.n_trps) // tps
        iy = np.arange(self.world.n_trps) % tps
        self.gnb_of_trp = (ix // block) * self._gnbs_per_side + (iy // block)
        self.n_gnbs = self._gnbs_per_side ** 2
        self._handover_margin_m = 0.25 * self.world.isd

        self.records: dict[int, TrackRecord] = {}
        # per-period estimate accumulator: entity -> [anchor_x, anchor_y,
        # sum_dx, sum_dy, count]; the period's track point is the torus mean
        self._est_acc: dict[int, list[float]] = {}
        self._listener_cache: dict[int, np.ndarray] = {}
        self.warmup_ticks = round(scenario.run.warmup_s * occ)

        # metrics
        self.coverage = np.zeros(self.pop.n_users, dtype=np.int64)
        self.n_tx = 0
        self.n_missed = 0
        self.n_handovers = 0
        self.n_leaves = 0
        self.n_formed = 0
        self.peak_entities = 0

        if scenario.deployment.grouped:
            self._ensure_ue_links()
            for c in range(self.pop.n_clusters):
                members = self.pop.cluster_members[c]
                if len(members) >= 2:
                    gnb = self._nearest_gnb(pos0[members[0]])
                    self.proto.form_group(members.tolist(), pair=-1,
                                          owner_gnb=gnb, tick=0)

    # -- helpers -----------------------------------------------------------

    def _draw_los(self, d2d: np.ndarray) -> np.ndarray:
        if self.sc.channel.los_model == LOS_ALWAYS:
            return np.ones(d2d.shape, dtype=bool)
        d = np.maximum(d2d, 1e-9)
        p = np.minimum(18.0 / d, 1.0) * (1.0 - np.exp(-d / 36.0)) + np.exp(-d / 36.0)
        return self.rng.random(d2d.shape) < p

    def _ensure_ue_links(self) -> None:
        """Drop-fixed UE<->UE link states for group-beacon reception."""
        if self.los_uu is not None:
            return
        pos0 = self.pop.positions(self.world)
        d0 = torus_distance_matrix(pos0, pos0, self.world)
        los = self._draw_los(d0)
        los = np.triu(los, 1)
        los = los | los.T
        ch = self.sc.channel
        sigma = np.where(los, ch.sigma_sf_los_db, ch.sigma_sf_nlos_db)
        z = self.rng.normal(0.0, 1.0, d0.shape)
        z = np.triu(z, 1)
        shadow = (z + z.T) * sigma
        self.los_uu = los
        self.shadow_uu = shadow

    def _nearest_gnb(self, pos: np.ndarray) -> int:
        d = torus_distance_matrix(pos[None, :], self.world.trp_xy, self.world)[0]
        return int(self.gnb_of_trp[int(np.argmin(d))])

    def _gnb_territory(self, est: tuple[float, float]) -> tuple[int, float]:
        """gNB block containing a position and the depth inside its borders."""
        b = self._gnb_block_m
        gps = self._gnbs_per_side
        gx = min(int(est[0] / b), gps - 1)
        gy = min(int(est[1] / b), gps - 1)
        depth = min(est[0] - gx * b, (gx + 1) * b - est[0],
                    est[1] - gy * b, (gy + 1) * b - est[1])
        return gx * gps + gy, depth

    def _tx_ue_of_entity(self, entity: int) -> int:
        if entity < self.pop.n_users:
            return entity
        return self.proto.groups[entity].transmitter

    def _listeners(self, gid: int) -> np.ndarray:
        arr = self._listener_cache.get(gid)
        if arr is None:
            g = self.proto.groups[gid]
            arr = np.array([u for u in g.members if u != g.transmitter], dtype=np.int64)
            self._listener_cache[gid] = arr
        return arr

    def _entity_list(self, pos: np.ndarray) -> list[tuple[int, tuple[float, float]]]:
        ents: list[tuple[int, tuple[float, float]]] = []
        for u in np.where(self.proto.ue_mode == MODE_INDIVIDUAL)[0]:
            ents.append((int(u), (float(pos[u, 0]), float(pos[u, 1]))))
        for gid in sorted(self.proto.groups):
            tx = self.proto.groups[gid].transmitter
            ents.append((gid, (float(pos[tx, 0]), float(pos[tx, 1]))))
        return ents

    # -- main loop -----------------------------------------------------------

    def run(self) -> ReplicationResult:
        occ = self.sc.dimensioning.occasions_per_second
        n_ticks = round(self.sc.run.duration_s * occ)
        for t in range(n_ticks):
            self.tick(t)
        measure_s = self.sc.run.duration_s - self.sc.run.warmup_s
        mean_rate = float(self.coverage.sum()) / self.pop.n_users / measure_s
        p_md = self.n_missed / self.n_tx if self.n_tx else 0.0
        return ReplicationResult(
            n_users=self.pop.n_users, measure_s=measure_s,
            mean_rate_hz=mean_rate, p_md=p_md,
            n_transmissions=self.n_tx, n_missed=self.n_missed,
            n_handovers=self.n_handovers, n_leaves=self.n_leaves,
            n_formed=self.n_formed, peak_entities=self.peak_entities,
            events=self.proto.events)

    def tick(self, t: int) -> None:
        if t > 0:
            step(self.pop, self.world, self.tick_s, self.rng)
        pos = self.pop.positions(self.world)
        phase = t % self.occasions_per_period
        if phase == 0:
            self._period_tasks(t, pos)
        scheduled = self.allocator.schedule_occasion()
        self.allocator.check_reuse_invariant(scheduled)
        if scheduled:
            self._transmit(t, scheduled, pos)
        self._check_invariants()

    def _period_estimates(self) -> dict[int, tuple[float, float]]:
        out = {}
        for entity, (ax, ay, sdx, sdy, n) in self._est_acc.items():
            out[entity] = (float((ax + sdx / n) % self.world.width),
                           float((ay + sdy / n) % self.world.height))
        return out

    def _period_tasks(self, t: int, pos: np.ndarray) -> None:
        period = t // self.occasions_per_period
        time_s = t * self.tick_s
        estimates = self._period_estimates()
        self._est_acc.clear()
        # serving-gNB decisions from the previous period's tracked positions
        before = len(self.proto.events)
        for gid in sorted(self.proto.groups):
            est = estimates.get(gid)
            if est is not None:
                candidate, depth = self._gnb_territory(est)
                self.proto.update_serving(
                    gid, candidate, depth >= self._handover_margin_m, t)
        self.n_handovers += sum(1 for e in self.proto.events[before:]
                                if e["event"] == "handover")
        # flush the previous period's mean estimates into track records
        if period > 0:
            for entity, est in estimates.items():
                if entity >= self.pop.n_users:
                    if entity not in self.proto.groups:
                        continue
                elif self.proto.ue_mode[entity] != MODE_INDIVIDUAL:
                    continue
                rec = self.records.get(entity)
                if rec is None:
                    rec = TrackRecord(window=self.sc.protocol.track_window)
                    self.records[entity] = rec
                rec.add(period - 1, est)
            if self.sc.protocol.identification:
                self._identify(period - 1, t)
        for gid in sorted(self.proto.groups):
            g = self.proto.groups[gid]
            if time_s - g.last_rotation_s >= self.sc.protocol.rotation_period_s:
                self.proto.rotate_transmitter(g, t)
                g.last_rotation_s = time_s
                self._listener_cache.pop(gid, None)
        assignments = self.allocator.allocate(self._entity_list(pos))
        for gid, ctx in self.proto.contexts.items():
            ctx.pair = assignments[gid].pair

    def _identify(self, through_period: int, t: int) -> None:
        window = self.sc.protocol.track_window
        radius = self.sc.protocol.identify_radius_m
        n = self.pop.n_users
        individuals = {
            e: r for e, r in self.records.items()
            if e < n and self.proto.ue_mode[e] == MODE_INDIVIDUAL
            and r.complete_through(through_period)
        }
        if not individuals:
            return
        group_records = {
            e: r for e, r in self.records.items()
            if e >= n and e in self.proto.groups
            and r.complete_through(through_period)
        }
        pos = self.pop.positions(self.world)
        # a UE whose track follows an existing group's track joins that group
        joined: set[int] = set()
        for u in sorted(individuals):
            for gid in sorted(group_records):
                if records_co_located(individuals[u], group_records[gid],
                                      window, radius, self.world):
                    self.proto.add_member(self.proto.groups[gid], u, t)
                    self._listener_cache.pop(gid, None)
                    self.records.pop(u, None)
                    joined.add(u)
                    break
        remaining = {u: r for u, r in individuals.items() if u not in joined}
        for cand in identify_groups(remaining, through_period, radius, window,
                                    self.world):
            gnb = self._nearest_gnb(pos[cand[0]])
            group = self.proto.form_group(cand, pair=-1, owner_gnb=gnb, tick=t)
            self.n_formed += 1
            for u in cand:
                self.records.pop(u, None)
            self.records.pop(group.id, None)

    def _transmit(self, t: int, scheduled: list[tuple[int, int]], pos: np.ndarray) -> None:
        m_seq = self.grid.m_seq
        n_shifts = self.grid.params.n_shifts
        ent = np.array([e for e, _ in scheduled], dtype=np.int64)
        pair = np.array([p for _, p in scheduled], dtype=np.int64)
        order = np.lexsort((ent, pair))
        ent, pair = ent[order], pair[order]
        berb = pair // m_seq
        sidx = pair % m_seq
        root = sidx // n_shifts
        shift = sidx % n_shifts
        tx_ue = np.array([self._tx_ue_of_entity(int(e)) for e in ent], dtype=np.int64)
        counts = np.bincount(berb, minlength=self.grid.params.n_berb)
        offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

        ch = self.sc.channel
        power = np.full(len(ent), self.power_w)
        h2 = self.rng.exponential(1.0, (len(ent), self.world.n_trps))
        d2d, rx_w, sinr, pmd = kernels.occasion_stats(
            pos[tx_ue, 0], pos[tx_ue, 1], power, root, shift, offsets,
            self.world.trp_xy[:, 0], self.world.trp_xy[:, 1],
            self.los_ut[tx_ue], self.shadow_ut[tx_ue], h2,
            self.channel.model_code, ch.carrier_frequency_hz / 1e9,
            ch.ue_height_m, ch.trp_height_m,
            ch.log_distance_ref_db, ch.log_distance_exponent,
            self.det.noise_w, self.det.sequence_length, self.det.threshold,
            self.det.n_antennas, self.det.search_window, self.det.beacon_range_m,
            self.world.width, self.world.height)
        if self.sinr_probe is not None:
            self.sinr_probe({
                "tick": t, "entity": ent, "tx_ue": tx_ue, "berb": berb,
                "root": root, "shift": shift, "offsets": offsets,
                "tx_pos": pos[tx_ue].copy(), "power_w": power,
                "los": self.los_ut[tx_ue].copy(), "shadow_db": self.shadow_ut[tx_ue].copy(),
                "h2": h2, "noise_w": self.det.noise_w,
                "d2d": d2d, "rx_w": rx_w, "sinr": sinr, "pmd": pmd,
            })
        detected = self.rng.random(pmd.shape) < (1.0 - pmd)

        measured = t >= self.warmup_ticks
        if measured:
            self.n_tx += len(ent)
            self.n_missed += int((~detected.any(axis=1)).sum())
            individual_rows = ent < self.pop.n_users
            if individual_rows.any():
                np.add.at(self.coverage, tx_ue[individual_rows], 1)
            covered = [self._group_member_array(int(e))
                       for e in ent[~individual_rows]]
            if covered:
                np.add.at(self.coverage, np.concatenate(covered), 1)

        self._estimate_positions(ent, detected, rx_w)
        group_rows = np.where(ent >= self.pop.n_users)[0]
        if len(group_rows):
            self._member_monitoring(t, ent, pair, berb, root, shift, offsets,
                                    tx_ue, pos, group_rows, power)

    def _group_member_array(self, gid: int) -> np.ndarray:
        return np.asarray(self.proto.groups[gid].members, dtype=np.int64)

    def _estimate_positions(self, ent: np.ndarray, detected: np.ndarray,
                            rx_w: np.ndarray) -> None:
        w = np.where(detected, rx_w, 0.0)
        got = detected.any(axis=1)
        if not got.any():
            return
        anchor_idx = np.argmax(w, axis=1)
        anchor = self.world.trp_xy[anchor_idx]
        delta_x = torus_delta(anchor[:, 0:1], self.world.trp_xy[:, 0], self.world.width)
        delta_y = torus_delta(anchor[:, 1:2], self.world.trp_xy[:, 1], self.world.height)
        total = w.sum(axis=1)
        total[total == 0.0] = 1.0
        est_x = (anchor[:, 0] + (w * delta_x).sum(axis=1) / total) % self.world.width
        est_y = (anchor[:, 1] + (w * delta_y).sum(axis=1) / total) % self.world.height
        for i in np.where(got)[0]:
            e = int(ent[i])
            x, y = float(est_x[i]), float(est_y[i])
            acc = self._est_acc.get(e)
            if acc is None:
                self._est_acc[e] = [x, y, 0.0, 0.0, 1]
            else:
                acc[2] += float(torus_delta(acc[0], x, self.world.width))
                acc[3] += float(torus_delta(acc[1], y, self.world.height))
                acc[4] += 1

    def _member_monitoring(self, t: int, ent, pair, berb, root, shift, offsets,
                           tx_ue, pos, group_rows, power) -> None:
        self._ensure_ue_links()
        listeners: list[np.ndarray] = []
        own_rows: list[np.ndarray] = []
        for row in group_rows:
            gid = int(ent[row])
            mem = self._listeners(gid)
            if len(mem) == 0:
                continue
            listeners.append(mem)
            own_rows.append(np.full(len(mem), row, dtype=np.int64))
        if not listeners:
            return
        mem_ue = np.concatenate(listeners)
        own = np.concatenate(own_rows)
        lo = offsets[berb[own]]
        hi = offsets[berb[own] + 1]
        sizes = hi - lo
        listen_offsets = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
        h2_flat = self.rng.exponential(1.0, int(listen_offsets[-1]))
        ch = self.sc.channel
        own_d, sinr, pmd = kernels.member_reception(
            pos[mem_ue, 0], pos[mem_ue, 1], mem_ue, own, listen_offsets,
            pos[tx_ue, 0], pos[tx_ue, 1], power, root, shift, lo, hi, tx_ue,
            self.los_uu, self.shadow_uu, h2_flat,
            self.channel.model_code, ch.carrier_frequency_hz / 1e9,
            ch.ue_height_m, ch.log_distance_ref_db, ch.log_distance_exponent,
            self.det.noise_w, self.det.sequence_length, self.det.threshold,
            self.det.n_antennas, self.det.search_window, self.det.beacon_range_m,
            self.world.width, self.world.height)
        received = self.rng.random(len(mem_ue)) < (1.0 - pmd)

        # route outcomes through the protocol state machine per group
        idx = 0
        for row_arr, mem_arr in zip(own_rows, listeners):
            gid = int(ent[row_arr[0]])
            outcomes = {int(mem_arr[k]): bool(received[idx + k])
                        for k in range(len(mem_arr))}
            idx += len(mem_arr)
            group = self.proto.groups.get(gid)
            if group is None:
                continue
            leavers = self.proto.monitor_membership(group, outcomes, t)
            for u in leavers:
                self._process_leave(gid, u, t, pos)

    def _process_leave(self, gid: int, ue: int, t: int, pos: np.ndarray) -> None:
        group = self.proto.groups.get(gid)
        if group is None or ue not in group.members:
            return
        members_before = list(group.members)
        dissolved = self.proto.handle_member_leave(group, ue, t)
        self.n_leaves += 1
        self._listener_cache.pop(gid, None)
        if dissolved:
            self.allocator.release(gid)
            self.records.pop(gid, None)
            for u in members_before:
                self.allocator.reassign(u, (float(pos[u, 0]), float(pos[u, 1])))
        else:
            self.allocator.reassign(ue, (float(pos[ue, 0]), float(pos[ue, 1])))

    def _check_invariants(self) -> None:
        n_individual = int((self.proto.ue_mode == MODE_INDIVIDUAL).sum())
        expected = n_individual + len(self.proto.groups)
        self.peak_entities = max(self.peak_entities, expected)
        if self.allocator.live_assignments != expected:
            raise InvariantViolation(
                f"assignments {self.allocator.live_assignments} != "
                f"individuals {n_individual} + groups {len(self.proto.groups)}"
            )
        self.proto.check_invariants()


# ---------------------------------------------------------------------------
# replication management
# ---------------------------------------------------------------------------

def run_replication(scenario: Scenario, rep: int = 0,
                    sinr_probe: Callable[[dict], None] | None = None
                    ) -> ReplicationResult:
    rng = replication_rng(scenario.run.seed, rep)
    return Simulation(scenario, rng, sinr_probe=sinr_probe).run()


def replicate(scenario: Scenario) -> MetricsRecord:
    """Independent replications with derived seeds; mean and 95% CI."""
    results = [run_replication(scenario, rep)
               for rep in range(scenario.run.replications)]
    rates = tuple(r.mean_rate_hz for r in results)
    pmds = tuple(r.p_md for r in results)
    return MetricsRecord(
        n_replications=len(results),
        mean_rate_hz=float(np.mean(rates)), rate_ci95=ci95(rates),
        p_md=float(np.mean(pmds)), p_md_ci95=ci95(pmds),
        rate_values=rates, p_md_values=pmds)


# ---------------------------------------------------------------------------
# wrong-cell reachability study
# ---------------------------------------------------------------------------

def _blended_pl_sigma(d2d: np.ndarray, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """LoS-probability-blended path loss and shadow sigma (vectorised)."""
    ch = scenario.channel
    if ch.los_model == LOS_ALWAYS:
        p = np.ones_like(d2d)
    else:
        d = np.maximum(d2d, 1e-9)
        p = np.minimum(18.0 / d, 1.0) * (1.0 - np.exp(-d / 36.0)) + np.exp(-d / 36.0)
    model = kernels.PL_MODEL_LOG_DISTANCE if ch.path_loss_model == "log_distance" \
        else kernels.PL_MODEL_UMI
    args = (model, ch.carrier_frequency_hz / 1e9, ch.ue_height_m, ch.trp_height_m,
            ch.log_distance_ref_db, ch.log_distance_exponent)
    pl_los = kernels.path_loss_db_np(d2d, np.ones(d2d.shape, dtype=bool), *args)
    pl_nlos = kernels.path_loss_db_np(d2d, np.zeros(d2d.shape, dtype=bool), *args)
    pl = p * pl_los + (1.0 - p) * pl_nlos
    sigma = p * ch.sigma_sf_los_db + (1.0 - p) * ch.sigma_sf_nlos_db
    return pl, sigma


@dataclass
class WrongCellRow:
    group_radius_m: float
    p_wrong_cell: float
    p_wrong_ci95: float
    mean_delta_pl_db: float
    delta_ci95: float


def wrong_cell_experiment(scenario: Scenario, radii: list[float],
                          n_drops: int = 4000) -> list[WrongCellRow]:
    """For each group radius: the probability that a member's lowest-path-loss
    cell differs from the transmitter's, and the mean path-loss penalty (dB)
    of reaching such a member through the transmitter's cell.

    Uses the deterministic LoS-probability-blended loss plus shadow fading
    whose correlation decays with the member offset, so a zero radius gives
    exactly identical links (probability and penalty both 0).
    """
    scenario.validate()
    from .mobility import make_world
    world = make_world(scenario.deployment.isd_m, scenario.deployment.trps_per_side)
    members_per_drop = max(1, scenario.deployment.group_size - 1)
    d_cor = scenario.channel.shadow_correlation_m
    rows = []
    for radius in radii:
        p_reps, d_reps = [], []
        for rep in range(scenario.run.replications):
            rng = replication_rng(scenario.run.seed, rep)
            n = n_drops * members_per_drop
            tx = rng.uniform(0.0, [world.width, world.height], (n_drops, 2))
            tx = np.repeat(tx, members_per_drop, axis=0)
            ang = rng.uniform(0.0, 2.0 * np.pi, n)
            rad = radius * np.sqrt(rng.random(n))
            mem = tx + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
            mem[:, 0] %= world.width
            mem[:, 1] %= world.height

            pl_tx, sig_tx = _blended_pl_sigma(
                torus_distance_matrix(tx, world.trp_xy, world), scenario)
            pl_m, sig_m = _blended_pl_sigma(
                torus_distance_matrix(mem, world.trp_xy, world), scenario)
            z_tx = rng.normal(0.0, 1.0, pl_tx.shape)
            z_new = rng.normal(0.0, 1.0, pl_tx.shape)
            rho = np.exp(-rad / d_cor)[:, None] if d_cor > 0 else np.zeros((n, 1))
            z_m = rho * z_tx + np.sqrt(1.0 - rho ** 2) * z_new
            tot_tx = pl_tx + sig_tx * z_tx
            tot_m = pl_m + sig_m * z_m

            best_tx = np.argmin(tot_tx, axis=1)
            best_m = np.argmin(tot_m, axis=1)
            wrong = best_tx != best_m
            idx = np.arange(n)
            penalty = tot_m[idx, best_tx] - tot_m[idx, best_m]
            p_reps.append(float(wrong.mean()))
            d_reps.append(float(penalty[wrong].mean()) if wrong.any() else 0.0)
        rows.append(WrongCellRow(
            group_radius_m=float(radius),
            p_wrong_cell=float(np.mean(p_reps)), p_wrong_ci95=ci95(p_reps),
            mean_delta_pl_db=float(np.mean(d_reps)), delta_ci95=ci95(d_reps)))
    return rows


# ---------------------------------------------------------------------------
# event log output
# ---------------------------------------------------------------------------

def write_event_log(path: str, events: list[dict], tick_s: float) -> None:
    """CSV event log: one line per protocol event."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("tick", "time_s") + EVENT_FIELDS[1:])
        for ev in events:
            writer.writerow([
                ev["tick"], repr(ev["tick"] * tick_s), ev["event"],
                _blank(ev["group"]), _blank(ev["ue"]),
                _blank(ev["gnb_from"]), _blank(ev["gnb_to"]),
            ])
    os.replace(tmp, path)


def _blank(v) -> str:
    return "" if v is None else str(v)
