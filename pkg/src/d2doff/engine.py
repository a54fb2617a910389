"""Per-control-interval simulation loop and metric accumulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import phy, rrrm
from .config import Config
from .policies import make_policy
from .scenario import (World, DELIVERED_D2D, DELIVERED_I2D, DROPPED, REPEATED)


@dataclass
class MetricsAccumulator:
    deliveries_d2d: int = 0
    deliveries_i2d: int = 0
    repeated: int = 0
    dropped: int = 0
    requests_nonrepeated: int = 0
    energy_d2d: float = 0.0
    energy_i2d: float = 0.0
    failed_attempts: int = 0
    pruned_links: int = 0
    occupancy_samples: list = field(default_factory=list)
    d2d_distances: list = field(default_factory=list)

    @property
    def deliveries(self) -> int:
        return self.deliveries_d2d + self.deliveries_i2d

    @property
    def offloading_efficiency(self) -> float:
        return self.deliveries_d2d / self.deliveries if self.deliveries else 0.0

    @property
    def energy_total_per_delivery(self) -> float:
        return (self.energy_d2d + self.energy_i2d) / self.deliveries \
            if self.deliveries else 0.0

    @property
    def energy_d2d_per_delivery(self) -> float:
        return self.energy_d2d / self.deliveries_d2d if self.deliveries_d2d else 0.0

    @property
    def mean_occupancy(self) -> float:
        return float(np.mean(self.occupancy_samples)) if self.occupancy_samples else 0.0

    def summary(self) -> dict:
        return {
            "offloading_efficiency": self.offloading_efficiency,
            "energy_total_per_delivery": self.energy_total_per_delivery,
            "energy_d2d_per_delivery": self.energy_d2d_per_delivery,
            "mean_occupancy": self.mean_occupancy,
            "deliveries_d2d": float(self.deliveries_d2d),
            "deliveries_i2d": float(self.deliveries_i2d),
            "repeated": float(self.repeated),
            "dropped": float(self.dropped),
        }


class Engine:
    """One simulation run: deterministic given (config, policy, seed)."""

    def __init__(self, cfg: Config, policy_name: str, seed: int):
        cfg.validate()
        self.cfg = cfg
        sc = cfg.scenario
        self.rng = np.random.default_rng(seed)
        self.world = World(sc, self.rng)
        self.policy = make_policy(policy_name, sc)
        self.channel = phy.ChannelModel(cfg.phy)
        self.shadow = phy.ShadowingField(sc.street_length, cfg.phy, self.rng)
        self.n_prbs = phy.prbs_required(cfg.phy)
        self.slots = int(round(sc.control_interval / cfg.phy.prb_duration))
        self.capacity = cfg.phy.freq_blocks * self.slots
        self.metrics = MetricsAccumulator()
        # exclusive-spectrum-use region: the first three cells
        n_region = min(3, len(sc.enb_positions))
        self.region_enbs = set(range(n_region))
        if len(sc.enb_positions) > n_region:
            self.region_x_max = 0.5 * (sc.enb_positions[n_region - 1]
                                       + sc.enb_positions[n_region])
        else:
            self.region_x_max = sc.street_length
        self._cache_events: list[tuple[int, int]] = []
        self.alloc_trace: list[tuple] = []
        self.channel_trace: list[tuple] = []
        self.dump_alloc = False
        self.dump_channel = False

    # -- link construction --------------------------------------------------

    def _vehicle_xy(self, vid: int, t: float) -> tuple[float, float]:
        veh = self.world.vehicles[vid]
        return veh.position(t), self.world.lane_y(veh.lane)

    def _d2d_link(self, link_id: int, intent, t: float) -> rrrm.LinkIntent:
        req = intent.request
        tx_x, tx_y = self._vehicle_xy(intent.provider_id, t)
        rx_x, rx_y = self._vehicle_xy(req.requester_id, t)
        dist = self.world.distance(req.requester_id, intent.provider_id, t)
        T = self.cfg.scenario.control_interval
        return rrrm.LinkIntent(
            link_id=link_id, kind=phy.D2D, tx_id=intent.provider_id,
            rx_id=req.requester_id, tx_x=tx_x, tx_y=tx_y, rx_x=rx_x, rx_y=rx_y,
            distance=dist, deadline_interval=int(round(req.deadline / T)),
            age=int(round((t - req.t0) / T)), request_ref=req)

    def _i2d_link(self, link_id: int, req, t: float) -> rrrm.LinkIntent:
        rx_x, rx_y = self._vehicle_xy(req.requester_id, t)
        enb_id, dist = self.world.nearest_enb(rx_x)
        T = self.cfg.scenario.control_interval
        return rrrm.LinkIntent(
            link_id=link_id, kind=phy.I2D, tx_id=enb_id, rx_id=req.requester_id,
            tx_x=self.cfg.scenario.enb_positions[enb_id],
            tx_y=self.cfg.scenario.enb_antenna_height,
            rx_x=rx_x, rx_y=rx_y, distance=dist,
            deadline_interval=int(round(req.deadline / T)),
            age=int(round((t - req.t0) / T)), enb_id=enb_id, request_ref=req)

    def _in_region(self, link: rrrm.LinkIntent) -> bool:
        if link.is_i2d:
            return link.enb_id in self.region_enbs
        return link.tx_x <= self.region_x_max

    # -- one interval ---------------------------------------------------------

    def tick(self, t: float, measuring: bool) -> None:
        sc = self.cfg.scenario
        world = self.world

        removed = set(world.remove_exited(t))
        if removed:
            for req in list(self.policy.pending.values()):
                if req.requester_id in removed and not req.served:
                    req.state = DROPPED
                    self.policy.retire(req)
                    if measuring:
                        self.metrics.dropped += 1
        world.spawn_vehicles(t, t + sc.control_interval)
        world.evict_expired(t)
        world.refresh_arrays(t)

        new_requests = []
        for req in world.spawn_requests(t):
            if self.policy.uses_cache:
                holder = world.vehicles[req.requester_id]
                if req.content_id in holder.cache:
                    req.state = REPEATED
                    if measuring:
                        self.metrics.repeated += 1
                    continue
            if measuring:
                self.metrics.requests_nonrepeated += 1
            new_requests.append(req)
        self.policy.handle_new(new_requests, world, t)

        events, self._cache_events = self._cache_events, []
        for vid, z in events:
            self.policy.cache_event(vid, z, world, t)

        # D2D intents first: a transmission scheduled for the deadline
        # tick pre-empts the infrastructure fallback for that request
        intents = self.policy.d2d_intents(world, t)
        intent_reqs = {intent.request.id for intent in intents}
        links = []
        for req in self.policy.i2d_due(t):
            if req.id in intent_reqs:
                continue
            if req.requester_id in world.idx_of:
                links.append(self._i2d_link(len(links), req, t))
        for intent in intents:
            links.append(self._d2d_link(len(links), intent, t))

        if not links:
            if measuring:
                self.metrics.occupancy_samples.append(0.0)
            return

        gains = rrrm.interference_matrix(links, self.cfg.phy)
        sets = rrrm.partition_rrr_sets(links, gains, self.cfg.phy, self.cfg.rrrm)
        allocations, pruned = rrrm.allocate_prbs(sets, links, self.capacity, self.n_prbs)
        if measuring:
            self.metrics.pruned_links += len(pruned)
            self.metrics.occupancy_samples.append(
                rrrm.spectrum_occupancy(allocations, self.capacity, self._in_region))

        by_set: dict[int, list[rrrm.Allocation]] = {}
        for alloc in allocations:
            by_set.setdefault(alloc.set_id, []).append(alloc)

        for alloc in sorted(allocations,
                            key=lambda a: (a.set_id, a.prb_start, a.link.link_id)):
            self._transmit(alloc, by_set[alloc.set_id], t, measuring)
        if self.dump_alloc:
            for alloc in allocations:
                self.alloc_trace.append((t, alloc.link.link_id, alloc.set_id,
                                         alloc.prb_start, alloc.prb_stop,
                                         alloc.link.kind))

    def _transmit(self, alloc: rrrm.Allocation, peers: list[rrrm.Allocation],
                  t: float, measuring: bool) -> None:
        cfg = self.cfg
        link = alloc.link
        req = link.request_ref
        own_power = phy.tx_power_for_link(link.kind, link.distance, cfg.phy)
        shadow_db = self.shadow.link_shadow_db(link.tx_x, link.rx_x)

        interferers = []
        for other in peers:
            if other.link.link_id == link.link_id:
                continue
            lo, hi = rrrm.overlap(alloc, other)
            if hi <= lo:
                continue
            d_cross = math.hypot(other.link.tx_x - link.rx_x,
                                 other.link.tx_y - link.rx_y)
            p_other = phy.tx_power_for_link(other.link.kind,
                                            other.link.distance, cfg.phy)
            s_db = self.shadow.link_shadow_db(other.link.tx_x, link.rx_x)
            chan = self.channel.realize(other.link.kind, d_cross, s_db, self.rng)
            interferers.append((p_other, chan, lo, hi))

        # HARQ: retransmissions happen within the control interval (their
        # round-trip is milliseconds), so a fading dip costs energy but
        # does not move the transmission to a later, farther tick
        energy = float(phy.transmission_energy(link.kind,
                                               np.array([link.distance]), cfg.phy)[0])
        success = False
        for _ in range(cfg.phy.harq_attempts):
            own = self.channel.realize(link.kind, link.distance, shadow_db, self.rng)
            info = phy.achievable_information(
                own_power, own, interferers,
                (alloc.prb_start, alloc.prb_stop), cfg.phy)
            success = phy.transmission_success(info, cfg.phy)
            if self.dump_channel:
                self.channel_trace.append((t, link.link_id, link.kind, link.distance,
                                           shadow_db, float(np.mean(own.gains))))
            if measuring:
                if link.kind == phy.D2D:
                    self.metrics.energy_d2d += energy
                else:
                    self.metrics.energy_i2d += energy
            if success:
                break
            req.attempts += 1
            if measuring:
                self.metrics.failed_attempts += 1
        if not success:
            return

        if link.kind == phy.D2D:
            req.state = DELIVERED_D2D
            if measuring:
                self.metrics.deliveries_d2d += 1
                self.metrics.d2d_distances.append(link.distance)
        else:
            req.state = DELIVERED_I2D
            if measuring:
                self.metrics.deliveries_i2d += 1
        self.policy.retire(req)
        if self.policy.uses_cache:
            # receiver caches what it received; new copies can serve others
            expiry = t + cfg.scenario.sharing_timeout
            self.world.add_cache(link.rx_id, req.content_id, expiry)
            self._cache_events.append((link.rx_id, req.content_id))

    # -- full run ----------------------------------------------------------------

    def run(self, duration: float, warmup: float) -> MetricsAccumulator:
        if duration <= 0:
            raise ValueError("duration must be > 0")
        sc = self.cfg.scenario
        T = sc.control_interval
        self.world.init_stationary(0.0)
        n_ticks = int(round((warmup + duration) / T))
        warm_ticks = int(round(warmup / T))
        for k in range(n_ticks):
            self.tick(k * T, k >= warm_ticks)
        return self.metrics


def run(cfg: Config, policy_name: str, duration: float, warmup: float,
        seed: int, dump_alloc: bool = False, dump_channel: bool = False) -> Engine:
    eng = Engine(cfg, policy_name, seed)
    eng.dump_alloc = dump_alloc
    eng.dump_channel = dump_channel
    eng.run(duration, warmup)
    return eng


@dataclass
class ReplicationSummary:
    metric_names: list[str]
    means: dict
    ci_low: dict
    ci_high: dict
    runs: list[MetricsAccumulator]

    def row(self, name: str) -> tuple[float, float, float]:
        return self.means[name], self.ci_low[name], self.ci_high[name]


def replicate(cfg: Config, policy_name: str, duration: float, warmup: float,
              n_runs: int, base_seed: int) -> ReplicationSummary:
    """Independent runs with seeds base_seed + i and Student-t 95% CIs."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    runs = [run(cfg, policy_name, duration, warmup, base_seed + i).metrics
            for i in range(n_runs)]
    names = list(runs[0].summary().keys())
    means, lo, hi = {}, {}, {}
    for name in names:
        vals = np.array([r.summary()[name] for r in runs])
        m = float(vals.mean())
        means[name] = m
        if n_runs > 1:
            sem = vals.std(ddof=1) / math.sqrt(n_runs)
            q = stats.t.ppf(0.975, n_runs - 1)
            lo[name], hi[name] = m - q * sem, m + q * sem
        else:
            lo[name] = hi[name] = m
    return ReplicationSummary(metric_names=names, means=means,
                              ci_low=lo, ci_high=hi, runs=runs)


def sample_distance_pdf(distances, bin_width: float = 2.0,
                        r_max: float | None = None):
    """Normalized histogram of delivery distances (bin centers, density)."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise ValueError("no distances recorded")
    top = r_max if r_max is not None else float(d.max()) + bin_width
    edges = np.arange(0.0, top + bin_width, bin_width)
    hist, edges = np.histogram(d, bins=edges, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return centers, hist
