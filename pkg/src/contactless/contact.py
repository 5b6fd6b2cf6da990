"""Store-day simulation of close contacts, and its effect on the contact ratio.

Customers arrive as a Poisson stream, walk the workflow net to get their
route (entering, then purchasing, payment and the optional delivery and
service zones for completed purchases), and dwell a random time in each
zone.  Two customers in the same zone for at least ``contact_threshold``
minutes make one contact event.

With resilience on, an entrance gate holds the store at ``capacity`` and
per-zone caps stop crowding; a customer whose next zone is full stays where
they are until a place frees up.  Waiting outside is distanced (customers
are told to wait) so the pre-entry queue does not produce contacts unless
``queue_contacts`` is set.  With resilience off both limits are ignored.

The same seed gives the same arrivals, routes and dwell times whether
resilience is on or off, so paired runs differ only in the gating.
"""

from __future__ import annotations

import csv
import heapq
import io
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import sir
from .petri import LabeledNet
from .store import CSP, DP, EP, PAP, PUP, CustomerPolicy, run_customer

QUEUE = "queue"
ZONES = (QUEUE, "entering", "purchasing", "payment", "delivery", "service")
IN_STORE = ZONES[1:]
_ZONE_OF = {EP: "entering", PUP: "purchasing", PAP: "payment", DP: "delivery", CSP: "service"}
# optional procedures only occupy their zone when the customer asked for them
_OPT_IN = {"delivery": 32, "service": 37}

DEFAULT_DWELL = {
    "entering": (1.0, 4.0),
    "purchasing": (15.0, 45.0),
    "payment": (2.0, 8.0),
    "delivery": (3.0, 10.0),
    "service": (2.0, 8.0),
}
DEFAULT_ZONE_CAPS = {"purchasing": 8, "payment": 3, "delivery": 2, "service": 2}


@dataclass(frozen=True)
class StoreConfig:
    """Store-day settings; times are in minutes.

    ``dwell`` maps each in-store zone to a ``(low, high)`` uniform range.
    """

    arrival_rate: float = 0.3
    capacity: int = 12
    duration: float = 480.0
    contact_threshold: float = 15.0
    dwell: dict = field(default_factory=lambda: dict(DEFAULT_DWELL))
    zone_caps: dict = field(default_factory=lambda: dict(DEFAULT_ZONE_CAPS))
    queue_contacts: bool = False

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not self.contact_threshold > 0:
            raise ValueError("contact_threshold must be > 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")
        for z in IN_STORE:
            if z not in self.dwell:
                raise ValueError(f"missing dwell range for zone {z!r}")
        for z, (lo, hi) in self.dwell.items():
            if z not in IN_STORE:
                raise ValueError(f"unknown zone {z!r}")
            if not 0 < lo <= hi:
                raise ValueError(f"dwell range for {z} must satisfy 0 < low <= high")
        for z, c in self.zone_caps.items():
            if z not in IN_STORE:
                raise ValueError(f"unknown zone {z!r}")
            if c < 1:
                raise ValueError(f"zone cap for {z} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "arrival_rate": self.arrival_rate,
            "capacity": self.capacity,
            "duration": self.duration,
            "contact_threshold": self.contact_threshold,
            "dwell": {z: list(self.dwell[z]) for z in IN_STORE},
            "zone_caps": {z: self.zone_caps[z] for z in IN_STORE if z in self.zone_caps},
            "queue_contacts": self.queue_contacts,
        }


@dataclass(frozen=True, order=True)
class ContactEvent:
    customer_a: int
    customer_b: int
    zone: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class ContactReport:
    seed: int
    resilience: bool
    customers: int
    served: int
    denied_temperature: int
    denied_mask: int
    total_contacts: int
    per_zone: dict
    max_occupancy: int
    max_zone_occupancy: dict
    events: list = field(default_factory=list, repr=False)
    visits: list = field(default_factory=list, repr=False)

    @property
    def denied(self) -> int:
        return self.denied_temperature + self.denied_mask

    @property
    def mean_contacts_per_customer(self) -> float:
        # every event involves two customers
        return 2 * self.total_contacts / self.customers if self.customers else 0.0

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "resilience": self.resilience,
            "customers": self.customers,
            "served": self.served,
            "denied": self.denied,
            "denied_temperature": self.denied_temperature,
            "denied_mask": self.denied_mask,
            "total_contacts": self.total_contacts,
            "per_zone": dict(self.per_zone),
            "mean_contacts_per_customer": self.mean_contacts_per_customer,
            "max_occupancy": self.max_occupancy,
            "max_zone_occupancy": dict(self.max_zone_occupancy),
        }

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["customer_a", "customer_b", "zone", "t_start", "t_end"])
        for e in self.events:
            w.writerow([e.customer_a, e.customer_b, e.zone, repr(e.t_start), repr(e.t_end)])
        return buf.getvalue()


def _customer_seed(seed: int, k: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(1, k))
    return int(ss.generate_state(1, np.uint64)[0])


def _route(trace) -> list[str]:
    tids = set(trace.transitions)
    route = []
    for proc in trace.procedures():
        zone = _ZONE_OF[proc]
        if zone in _OPT_IN and _OPT_IN[zone] not in tids:
            continue
        route.append(zone)
    return route


def _plan_customers(net, config, policy, seed):
    arrivals_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    times = []
    t = 0.0
    if config.arrival_rate > 0:
        while True:
            t += arrivals_rng.exponential(1 / config.arrival_rate)
            if t >= config.duration:
                break
            times.append(t)
    # the real capacity gate replaces the policy's store-full draws
    route_policy = replace(policy, p_store_full=0.0)
    plans = []
    for k, t_arr in enumerate(times):
        trace = run_customer(net, route_policy, _customer_seed(seed, k))
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, k)))
        # one draw per zone in a fixed order keeps streams aligned across configs
        dwell = {z: rng.uniform(*config.dwell[z]) for z in IN_STORE}
        plans.append((t_arr, trace.terminal, _route(trace), dwell))
    return plans


class _Day:
    def __init__(self, config, plans, resilience):
        self.cfg = config
        self.plans = plans
        self.on = resilience
        self.heap = []
        self.seq = 0
        self.occ = {z: set() for z in ZONES}
        self.max_zone = Counter()
        self.in_store = 0
        self.max_store = 0
        self.queue = deque()
        self.blocked = {z: deque() for z in IN_STORE}
        self.where = {}   # cid -> (zone, since, route index)
        self.visits = []  # (cid, zone, start, end)

    def push(self, t, kind, cid):
        heapq.heappush(self.heap, (t, self.seq, kind, cid))
        self.seq += 1

    def run(self):
        for cid, (t_arr, *_rest) in enumerate(self.plans):
            self.push(t_arr, "arrive", cid)
        while self.heap:
            t, _, kind, cid = heapq.heappop(self.heap)
            if kind == "arrive":
                self.arrive(cid, t)
            else:
                self.done(cid, t)
        return self

    def cap(self, zone):
        return self.cfg.zone_caps.get(zone) if self.on else None

    def _leave(self, cid, t):
        zone, since, idx = self.where.pop(cid)
        self.occ[zone].discard(cid)
        self.visits.append((cid, zone, since, t))
        return zone, idx

    def _enter(self, cid, zone, idx, t, schedule=True):
        self.where[cid] = (zone, t, idx)
        self.occ[zone].add(cid)
        self.max_zone[zone] = max(self.max_zone[zone], len(self.occ[zone]))
        if schedule:
            self.push(t + self.plans[cid][3][zone], "done", cid)

    def arrive(self, cid, t):
        if self.on and (self.queue or self.in_store >= self.cfg.capacity):
            self.queue.append(cid)
            self._enter(cid, QUEUE, -1, t, schedule=False)
        else:
            self.admit(cid, t)

    def admit(self, cid, t):
        if cid in self.where:
            self._leave(cid, t)
        self.in_store += 1
        self.max_store = max(self.max_store, self.in_store)
        self.move_to(cid, 0, t)

    def move_to(self, cid, idx, t):
        """Put ``cid`` into step ``idx`` of its route, or out of the store."""
        route = self.plans[cid][2]
        freed = None
        if cid in self.where:
            freed, _ = self._leave(cid, t)
        if idx >= len(route):
            self.in_store -= 1
        else:
            self._enter(cid, route[idx], idx, t)
        if freed is not None:
            self.release(freed, t)
        self.admit_waiting(t)

    def done(self, cid, t):
        zone, since, idx = self.where[cid]
        route = self.plans[cid][2]
        if idx + 1 < len(route):
            nxt = route[idx + 1]
            cap = self.cap(nxt)
            if cap is not None and len(self.occ[nxt]) >= cap:
                self.blocked[nxt].append(cid)
                return
        self.move_to(cid, idx + 1, t)

    def release(self, zone, t):
        if zone == QUEUE:
            return
        cap = self.cap(zone)
        waiting = self.blocked[zone]
        if waiting and (cap is None or len(self.occ[zone]) < cap):
            cid = waiting.popleft()
            _, _, idx = self.where[cid]
            self.move_to(cid, idx + 1, t)

    def admit_waiting(self, t):
        while self.queue and self.in_store < self.cfg.capacity:
            self.admit(self.queue.popleft(), t)


def find_contacts(visits, threshold: float, zones=IN_STORE) -> list[ContactEvent]:
    """Pairwise same-zone overlaps lasting at least ``threshold``."""
    by_zone = {}
    for cid, zone, start, end in visits:
        if zone in zones:
            by_zone.setdefault(zone, []).append((start, end, cid))
    events = []
    for zone, spans in by_zone.items():
        spans.sort()
        for k, (s1, e1, a) in enumerate(spans):
            for s2, e2, b in spans[k + 1:]:
                if s2 >= e1:
                    break
                lo, hi = max(s1, s2), min(e1, e2)
                if hi - lo >= threshold:
                    events.append(ContactEvent(min(a, b), max(a, b), zone, lo, hi))
    return sorted(events)


def run_store_day(
    workflow: LabeledNet,
    config: StoreConfig,
    policy: CustomerPolicy,
    resilience: bool,
    seed: int,
) -> ContactReport:
    plans = _plan_customers(workflow, config, policy, seed)
    return _simulate(config, plans, resilience, seed)


def _simulate(config, plans, resilience, seed):
    day = _Day(config, plans, resilience).run()
    zones = ZONES if config.queue_contacts else IN_STORE
    events = find_contacts(day.visits, config.contact_threshold, zones)
    per_zone = Counter(e.zone for e in events)
    outcomes = Counter(p[1] for p in plans)
    return ContactReport(
        seed=seed,
        resilience=resilience,
        customers=len(plans),
        served=outcomes["O3"],
        denied_temperature=outcomes["O1"],
        denied_mask=outcomes["O2"],
        total_contacts=len(events),
        per_zone={z: per_zone[z] for z in ZONES},
        max_occupancy=day.max_store,
        max_zone_occupancy={z: day.max_zone[z] for z in ZONES},
        events=events,
        visits=sorted(day.visits),
    )


def _paired(args):
    net, config, policy, seed = args
    # routes and dwell times do not depend on the gating, so plan once
    plans = _plan_customers(net, config, policy, seed)
    return (_simulate(config, plans, True, seed), _simulate(config, plans, False, seed))


def paired_runs(net, config, policy, seeds, workers: int | None = None):
    """Resilience on/off reports for each seed, in seed order."""
    jobs = [(net, config, policy, s) for s in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_paired, jobs))
    return [_paired(j) for j in jobs]


# -- coupling to the epidemic model ----------------------------------------


class ZeroBaselineContacts(UserWarning):
    pass


def effective_q(q_base: float, report_on: ContactReport, report_off: ContactReport) -> float:
    """Scale ``q_base`` by the ratio of mean contacts per customer.

    With no baseline contacts there is nothing to scale and ``q_base`` is
    returned unchanged (a :class:`ZeroBaselineContacts` warning is issued).
    """
    base = report_off.mean_contacts_per_customer
    if base <= 0:
        import warnings
        warnings.warn("baseline run has no contacts; q_eff = q_base",
                      ZeroBaselineContacts, stacklevel=2)
        return q_base
    q = q_base * report_on.mean_contacts_per_customer / base
    return min(max(q, 0.0), q_base)


@dataclass(frozen=True)
class ComparisonReport:
    q_base: float
    q_eff: float
    i_max_base: float
    i_max_eff: float
    r_end_base: float
    r_end_eff: float
    epidemic_averted: bool

    @property
    def i_max_reduction(self) -> float:
        return self.i_max_base - self.i_max_eff

    @property
    def r_end_reduction(self) -> float:
        return self.r_end_base - self.r_end_eff

    @property
    def i_max_relative_reduction(self) -> float:
        return self.i_max_reduction / self.i_max_base if self.i_max_base else 0.0

    @property
    def r_end_relative_reduction(self) -> float:
        return self.r_end_reduction / self.r_end_base if self.r_end_base else 0.0

    def to_json(self) -> dict:
        return {
            "q_base": self.q_base,
            "q_eff": self.q_eff,
            "i_max_base": self.i_max_base,
            "i_max_eff": self.i_max_eff,
            "i_max_reduction": self.i_max_reduction,
            "i_max_relative_reduction": self.i_max_relative_reduction,
            "r_end_base": self.r_end_base,
            "r_end_eff": self.r_end_eff,
            "r_end_reduction": self.r_end_reduction,
            "r_end_relative_reduction": self.r_end_relative_reduction,
            "epidemic_averted": self.epidemic_averted,
        }


def compare_outbreaks(params: sir.SirParams, init: sir.SirState,
                      q_base: float, q_eff: float) -> ComparisonReport:
    """Peak and final size at the baseline and the reduced contact ratio.

    The removal rate is held at ``params.alpha``; transmission is
    recomputed as ``q * alpha`` for each ratio.  ``q_eff = 0`` (no contacts
    left) is allowed and gives no new infections.
    """
    if not (q_base > 0 and q_eff >= 0):
        raise ValueError("q_base must be positive and q_eff non-negative")
    base = sir.SirParams.from_ratio(q_base, params.alpha)
    eff = sir.SirParams.from_ratio(q_eff, params.alpha)
    return ComparisonReport(
        q_base=q_base,
        q_eff=q_eff,
        i_max_base=sir.i_max(base, init),
        i_max_eff=sir.i_max(eff, init),
        r_end_base=sir.final_size(base, init).r_end,
        r_end_eff=sir.final_size(eff, init).r_end,
        epidemic_averted=q_eff * init.s <= 1,
    )
