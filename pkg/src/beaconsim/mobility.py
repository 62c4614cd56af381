"""Deployment geometry and random-direction mobility on a torus world.

Users deploy as rigid co-moving clusters (size 1 in the individual scheme).
Cluster anchors move at constant speed along headings redrawn at
exponentially distributed epochs; direction changes take effect at tick
boundaries so every tick's displacement is exactly speed*dt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Scenario


@dataclass
class World:
    width: float
    height: float
    isd: float
    trps_per_side: int
    trp_xy: np.ndarray  # (n_trp, 2)

    @property
    def n_trps(self) -> int:
        return len(self.trp_xy)


def make_world(isd_m: float, trps_per_side: int) -> World:
    side = isd_m * trps_per_side
    coords = (np.arange(trps_per_side) + 0.5) * isd_m
    xy = np.array([(x, y) for x in coords for y in coords])
    return World(width=side, height=side, isd=isd_m,
                 trps_per_side=trps_per_side, trp_xy=xy)


def torus_delta(a: np.ndarray, b: np.ndarray, span: float) -> np.ndarray:
    """Signed shortest displacement b - a per axis on a torus."""
    d = (b - a) % span
    return np.where(d > span / 2.0, d - span, d)


def torus_distance(a, b, world: World) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dx = abs(a[0] - b[0])
    dx = min(dx, world.width - dx)
    dy = abs(a[1] - b[1])
    dy = min(dy, world.height - dy)
    return float(np.hypot(dx, dy))


def torus_distance_matrix(a: np.ndarray, b: np.ndarray, world: World) -> np.ndarray:
    dx = np.abs(a[:, None, 0] - b[None, :, 0])
    dx = np.minimum(dx, world.width - dx)
    dy = np.abs(a[:, None, 1] - b[None, :, 1])
    dy = np.minimum(dy, world.height - dy)
    return np.hypot(dx, dy)


@dataclass
class Population:
    n_users: int
    cluster_of: np.ndarray      # (n_users,) int
    offsets: np.ndarray         # (n_users, 2) rigid offset from cluster anchor
    anchors: np.ndarray         # (n_clusters, 2)
    headings: np.ndarray        # (n_clusters,)
    turn_countdown: np.ndarray  # (n_clusters,) seconds to next heading redraw
    speed_mps: float
    turn_mean_s: float
    cluster_members: list[np.ndarray]

    @property
    def n_clusters(self) -> int:
        return len(self.anchors)

    def positions(self, world: World) -> np.ndarray:
        pos = self.anchors[self.cluster_of] + self.offsets
        pos[:, 0] %= world.width
        pos[:, 1] %= world.height
        return pos


def deploy(scenario: Scenario, rng: np.random.Generator) -> tuple[World, Population]:
    """TRPs on a square grid, users uniform; grouped mode drops co-moving
    clusters whose members sit in a disc around the cluster head."""
    dep = scenario.deployment
    world = make_world(dep.isd_m, dep.trps_per_side)
    n = dep.n_users
    if dep.grouped:
        if n % dep.group_size != 0:
            raise ValueError("group size must divide the population")
        n_clusters = n // dep.group_size
        anchors = rng.uniform(0.0, [world.width, world.height], (n_clusters, 2))
        cluster_of = np.repeat(np.arange(n_clusters), dep.group_size)
        offsets = np.zeros((n, 2))
        for c in range(n_clusters):
            members = np.arange(c * dep.group_size, (c + 1) * dep.group_size)
            # member 0 is the cluster head (disc centre, initial transmitter)
            for u in members[1:]:
                ang = rng.uniform(0.0, 2.0 * np.pi)
                rad = dep.group_radius_m * np.sqrt(rng.random())
                offsets[u] = (rad * np.cos(ang), rad * np.sin(ang))
    else:
        n_clusters = n
        anchors = rng.uniform(0.0, [world.width, world.height], (n, 2))
        cluster_of = np.arange(n)
        offsets = np.zeros((n, 2))
    headings = rng.uniform(0.0, 2.0 * np.pi, n_clusters)
    countdown = rng.exponential(dep.direction_change_mean_s, n_clusters)
    members = [np.where(cluster_of == c)[0] for c in range(n_clusters)]
    pop = Population(
        n_users=n, cluster_of=cluster_of, offsets=offsets, anchors=anchors,
        headings=headings, turn_countdown=countdown, speed_mps=dep.speed_mps,
        turn_mean_s=dep.direction_change_mean_s, cluster_members=members,
    )
    return world, pop


def step(pop: Population, world: World, dt: float, rng: np.random.Generator) -> None:
    """Advance every cluster anchor speed*dt along its heading, then redraw
    headings whose exponential holding time has elapsed."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    d = pop.speed_mps * dt
    pop.anchors[:, 0] = (pop.anchors[:, 0] + d * np.cos(pop.headings)) % world.width
    pop.anchors[:, 1] = (pop.anchors[:, 1] + d * np.sin(pop.headings)) % world.height
    pop.turn_countdown -= dt
    due = np.where(pop.turn_countdown <= 0.0)[0]
    for c in due:
        pop.headings[c] = rng.uniform(0.0, 2.0 * np.pi)
        while pop.turn_countdown[c] <= 0.0:
            pop.turn_countdown[c] += rng.exponential(pop.turn_mean_s)
