"""Content-delivery policies.

* ``optimal``: schedules each delivery at the instant the best cached
  copy comes closest to the requester, re-evaluating whenever a new
  potential provider appears, and falls back to the infrastructure at
  the deadline.
* ``benchmark``: transmits from the closest in-range cached copy as
  soon as one exists (so typically near the maximum D2D range).
* ``cellular``: every non-repeated request is served by the nearest
  base station immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .scenario import (ContentRequest, World, PENDING, SCHEDULED)


def optimal_encounter(x0: float, v: float, phi: float) -> tuple[float, float]:
    """Earliest minimizer of |x0 + v t| over t in [0, phi] and the
    minimum value (longitudinal distance)."""
    if phi < 0.0:
        raise ValueError("phi must be >= 0")
    if v != 0.0:
        t_cross = -x0 / v
        if 0.0 <= t_cross <= phi:
            return t_cross, 0.0
    d0 = abs(x0)
    d_end = abs(x0 + v * phi)
    if d_end < d0:
        return phi, d_end
    return 0.0, d0


@dataclass
class D2dIntent:
    request: ContentRequest
    provider_id: int


class BasePolicy:
    name = "base"
    uses_cache = True

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.pending: dict[int, ContentRequest] = {}
        self.by_content: dict[int, set[int]] = {}

    # -- request lifecycle ------------------------------------------------

    def admit(self, req: ContentRequest) -> None:
        self.pending[req.id] = req
        self.by_content.setdefault(req.content_id, set()).add(req.id)

    def retire(self, req: ContentRequest) -> None:
        self.pending.pop(req.id, None)
        reqs = self.by_content.get(req.content_id)
        if reqs is not None:
            reqs.discard(req.id)

    def handle_new(self, requests: list[ContentRequest], world: World, t: float) -> None:
        for req in requests:
            self.admit(req)

    def cache_event(self, vid: int, z: int, world: World, t: float) -> None:
        pass

    def d2d_intents(self, world: World, t: float) -> list[D2dIntent]:
        return []

    def i2d_due(self, t: float) -> list[ContentRequest]:
        """Unserved requests whose infrastructure fallback is due."""
        return [r for rid, r in sorted(self.pending.items())
                if not r.served and t >= r.deadline - 1e-9]

    # -- helpers ------------------------------------------------------------

    def _candidate_eval(self, req: ContentRequest, world: World, t: float,
                        cand_ids: list[int]):
        """Vectorized point-of-closest-approach evaluation for a set of
        cached-copy holders; returns (ids, t*, lane-adjusted distance)."""
        cfg = self.cfg
        z = req.content_id
        k = world.idx_of[req.requester_id]
        xk, vk, lane_k = world.xs[k], world.vs[k], world.lanes[k]
        exit_k = world.exits[k]
        idx = np.array([world.idx_of[c] for c in cand_ids], dtype=np.int64)
        ids = np.array(cand_ids, dtype=np.int64)
        x0 = world.xs[idx] - xk
        v = world.vs[idx] - vk
        expiry = np.array([world.vehicles[c].cache.get(z, -math.inf) for c in cand_ids])
        phi = np.minimum.reduce([np.full(ids.shape, req.deadline),
                                 expiry, world.exits[idx],
                                 np.full(ids.shape, exit_k)]) - t
        ok = phi >= 0.0
        phi = np.clip(phi, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cross = np.where(v != 0.0, -x0 / v, np.inf)
        crossing = (t_cross >= 0.0) & (t_cross <= phi)
        d0 = np.abs(x0)
        d_end = np.abs(x0 + v * phi)
        long_dist = np.where(crossing, 0.0, np.minimum(d0, d_end))
        t_star = np.where(crossing, t_cross, np.where(d_end < d0, phi, 0.0))
        same_lane = world.lanes[idx] == lane_k
        delta = np.where(same_lane, long_dist,
                         np.hypot(long_dist, cfg.lane_offset))
        delta = np.where(ok, delta, np.inf)
        return ids, t_star, delta

    def _holders_of(self, world: World, req: ContentRequest) -> list[int]:
        hs = world.holders.get(req.content_id)
        if not hs:
            return []
        return sorted(v for v in hs
                      if v != req.requester_id and v in world.idx_of)


class OptimalPolicy(BasePolicy):
    name = "optimal"

    def _region_halfwidth(self, speed: float) -> float:
        cfg = self.cfg
        return cfg.d2d_max_range + (cfg.speed_max - abs(speed)) * cfg.content_timeout

    def _planned_tick(self, req: ContentRequest, t: float, t_star: float) -> float:
        T = self.cfg.control_interval
        planned = t + round(t_star / T) * T
        # the deadline tick itself is still usable (the infrastructure
        # fallback yields to a transmission scheduled for that tick)
        return min(max(planned, t), req.deadline)

    def _schedule_best(self, req: ContentRequest, world: World, t: float) -> None:
        cand = self._holders_of(world, req)
        req.provider_id = None
        req.planned_tick = None
        req.delta_hat = math.inf
        req.state = PENDING
        if not cand:
            return
        k = world.idx_of[req.requester_id]
        xk, vk = world.xs[k], world.vs[k]
        xlim = self._region_halfwidth(vk)
        cand = [c for c in cand if abs(world.xs[world.idx_of[c]] - xk) <= xlim]
        if not cand:
            return
        ids, t_star, delta = self._candidate_eval(req, world, t, cand)
        feasible = delta <= self.cfg.d2d_max_range
        if not np.any(feasible):
            return
        ids, t_star, delta = ids[feasible], t_star[feasible], delta[feasible]
        # argmin distance; ties by earlier encounter, then lower id
        best = np.lexsort((ids, t_star, delta))[0]
        req.provider_id = int(ids[best])
        req.delta_hat = float(delta[best])
        req.planned_tick = self._planned_tick(req, t, float(t_star[best]))
        req.state = SCHEDULED

    def handle_new(self, requests, world, t):
        for req in requests:
            self.admit(req)
            self._schedule_best(req, world, t)

    def cache_event(self, vid, z, world, t):
        """A vehicle just received content z: it may now beat the
        currently scheduled provider of any pending request for z."""
        req_ids = self.by_content.get(z)
        if not req_ids:
            return
        for rid in sorted(req_ids):
            req = self.pending.get(rid)
            if req is None or req.served or t > req.deadline + 1e-9:
                continue
            if vid == req.requester_id or vid not in world.idx_of:
                continue
            k = world.idx_of[req.requester_id]
            if abs(world.xs[world.idx_of[vid]] - world.xs[k]) > \
                    self._region_halfwidth(world.vs[k]):
                continue
            ids, t_star, delta = self._candidate_eval(req, world, t, [vid])
            if delta[0] < req.delta_hat and delta[0] <= self.cfg.d2d_max_range:
                req.provider_id = vid
                req.delta_hat = float(delta[0])
                req.planned_tick = self._planned_tick(req, t, float(t_star[0]))
                req.state = SCHEDULED

    def d2d_intents(self, world, t):
        out = []
        for rid, req in sorted(self.pending.items()):
            if req.served or req.state != SCHEDULED:
                continue
            if req.planned_tick is None or req.planned_tick > t + 1e-9:
                continue
            if t > req.deadline + 1e-9:
                continue  # past the deadline: infrastructure takes over
            q = req.provider_id
            valid = (q in world.idx_of
                     and world.vehicles[q].cache.get(req.content_id, -math.inf) > t)
            if not valid:
                self._schedule_best(req, world, t)
                q = req.provider_id
                if q is None or req.planned_tick > t + 1e-9:
                    continue
            if req.requester_id not in world.idx_of:
                continue
            dist = world.distance(req.requester_id, q, t)
            if dist <= self.cfg.d2d_max_range:
                out.append(D2dIntent(request=req, provider_id=q))
        return out


class BenchmarkPolicy(BasePolicy):
    """Transmit from the closest cached copy as soon as one is in range."""

    name = "benchmark"

    def d2d_intents(self, world, t):
        out = []
        for rid, req in sorted(self.pending.items()):
            if req.served or t > req.deadline + 1e-9:
                continue
            if req.requester_id not in world.idx_of:
                continue
            cand = self._holders_of(world, req)
            if not cand:
                continue
            k = world.idx_of[req.requester_id]
            idx = np.array([world.idx_of[c] for c in cand], dtype=np.int64)
            same = world.lanes[idx] == world.lanes[k]
            dx = np.abs(world.xs[idx] - world.xs[k])
            dist = np.where(same, dx, np.hypot(dx, self.cfg.lane_offset))
            in_range = dist <= self.cfg.d2d_max_range
            if not np.any(in_range):
                continue
            ids = np.array(cand, dtype=np.int64)
            best = np.lexsort((ids[in_range], dist[in_range]))[0]
            req.provider_id = int(ids[in_range][best])
            req.delta_hat = float(dist[in_range][best])
            out.append(D2dIntent(request=req, provider_id=req.provider_id))
        return out


class CellularPolicy(BasePolicy):
    """No D2D and no device caching: the infrastructure serves every
    request (repeats included) right away."""

    name = "cellular"
    uses_cache = False

    def i2d_due(self, t):
        return [r for rid, r in sorted(self.pending.items())
                if not r.served and t >= r.t0 - 1e-9]


POLICIES = {
    OptimalPolicy.name: OptimalPolicy,
    BenchmarkPolicy.name: BenchmarkPolicy,
    CellularPolicy.name: CellularPolicy,
}


def make_policy(name: str, cfg: ScenarioConfig) -> BasePolicy:
    try:
        return POLICIES[name](cfg)
    except KeyError:
        raise ValueError(f"unknown policy '{name}'")
