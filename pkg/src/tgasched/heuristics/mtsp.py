"""Two-phase mTSP heuristics: cluster the cities, then build one tour per cluster."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..env.core import ScheduledTask, Solution, tour_length
from ..env.instances import MtspInstance


class InsertionRule(str, Enum):
    NEAREST = "nearest"
    FARTHEST = "farthest"
    RANDOM = "random"
    NEAREST_NEIGHBOR = "nearest-neighbor"


def _kmeans_pp(points, k, rng):
    centers = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total == 0:
            centers.append(points[rng.integers(len(points))])
        else:
            centers.append(points[rng.choice(len(points), p=d2 / total)])
    return np.array(centers)


def _repair_empty(points, labels, centers, k):
    """Give every empty cluster the point of the largest cluster farthest from its centre."""
    for c in range(k):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=k)
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(np.linalg.norm(points[members] - centers[big], axis=1))]
        labels[far] = c
        centers[c] = points[far]
    return labels


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns a label per point.

    Every cluster is non-empty on return.
    """
    points = np.asarray(points, dtype=float)
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(points):
        raise ValueError(f"cannot form {k} clusters from {len(points)} points")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(points, k, rng)
    labels = None
    for _ in range(max_iter):
        d = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
        new = _repair_empty(points, np.argmin(d, axis=1), centers, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([points[labels == c].mean(axis=0) for c in range(k)])
    return labels


def _cheapest_position(d, tour, city):
    """Index to insert ``city`` into the closed ``tour`` at least extra length."""
    a = np.array(tour)
    b = np.roll(a, -1)
    cost = d[a, city] + d[city, b] - d[a, b]
    return int(np.argmin(cost)) + 1


def insertion_tour(dist, depot: int, cities, rule="nearest", seed: int = 0) -> list:
    """Closed tour over ``cities`` starting at ``depot``; returns the city order (depot excluded).

    ``dist`` is a full distance matrix indexed by point id.
    """
    rule = InsertionRule(rule)
    left = list(cities)
    if not left:
        return []
    d = np.asarray(dist)
    if rule is InsertionRule.NEAREST_NEIGHBOR:
        tour, cur = [], depot
        while left:
            nxt = min(left, key=lambda c: (d[cur, c], c))
            tour.append(nxt)
            left.remove(nxt)
            cur = nxt
        return tour
    rng = np.random.default_rng(seed)
    tour = [depot]
    while left:
        if rule is InsertionRule.RANDOM:
            city = left[int(rng.integers(len(left)))]
        else:
            gap = d[np.ix_(left, tour)].min(axis=1)
            pick = np.argmin(gap) if rule is InsertionRule.NEAREST else np.argmax(gap)
            city = left[int(pick)]
        tour.insert(_cheapest_position(d, tour, city), city)
        left.remove(city)
    return tour[1:]


def tours_to_solution(instance: MtspInstance, tours) -> Solution:
    """Timed solution for fixed per-agent city orders at unit speed."""
    d, depot = instance.dist, instance.num_cities
    seqs = []
    for tour in tours:
        clock, prev, seq = 0.0, depot, []
        for c in tour:
            leg = float(d[prev, c])
            seq.append(ScheduledTask(int(c), clock, clock + leg))
            clock += leg
            prev = c
        seqs.append(seq)
    return Solution(seqs, max(tour_length(instance, t) for t in tours))


def two_phase_solve(instance: MtspInstance, rule="nearest", seed: int = 0) -> Solution:
    """K-means with ``K = m`` (capped at the city count), then one tour per cluster."""
    n, m = instance.num_cities, instance.num_agents
    k = min(m, n)
    labels = kmeans(instance.cities, k, seed)
    tours = [insertion_tour(instance.dist, n, np.flatnonzero(labels == c).tolist(), rule, seed + c)
             for c in range(k)]
    tours += [[] for _ in range(m - k)]
    return tours_to_solution(instance, tours)
