import csv
import io
import warnings
from dataclasses import replace

import numpy as np
import pytest

from contactless import sir
from contactless.config import ConfigError, parse_scenario
from contactless.contact import (
    IN_STORE,
    ZONES,
    ContactReport,
    StoreConfig,
    ZeroBaselineContacts,
    compare_outbreaks,
    effective_q,
    find_contacts,
    paired_runs,
    run_store_day,
)
from contactless.store import CustomerPolicy

POLICY = CustomerPolicy(p_temp_fail=0.02, p_mask_refuse=0.03, p_delivery=0.2, p_service=0.1)
BENCH = sir.SirParams(0.5, 0.2)
INIT = sir.SirState(0.99, 0.01)


def report(customers, contacts):
    return ContactReport(seed=0, resilience=False, customers=customers, served=customers,
                         denied_temperature=0, denied_mask=0, total_contacts=contacts,
                         per_zone={}, max_occupancy=0, max_zone_occupancy={})


def occupancy_peaks(visits, zones):
    """Largest number of customers present at once, counted from the visit log."""
    spans = {}
    for cid, zone, start, end in visits:
        if zone in zones:
            lo, hi = spans.get(cid, (start, end))
            spans[cid] = (min(lo, start), max(hi, end))
    stamps = sorted({t for _, _, a, b in visits for t in (a, b)})
    return max((sum(lo <= t < hi for lo, hi in spans.values()) for t in stamps), default=0)


def brute_force_contacts(visits, threshold, zones):
    out = []
    for k, (a, za, sa, ea) in enumerate(visits):
        for b, zb, sb, eb in visits[k + 1:]:
            if za == zb and za in zones and a != b:
                lo, hi = max(sa, sb), min(ea, eb)
                if hi - lo >= threshold:
                    out.append((min(a, b), max(a, b), za, lo, hi))
    return sorted(out)


# -- configuration ----------------------------------------------------------


@pytest.mark.parametrize("kw", [
    {"capacity": 0},
    {"contact_threshold": 0},
    {"duration": -1},
    {"arrival_rate": -0.1},
    {"zone_caps": {"garden": 1}},
    {"zone_caps": {"payment": 0}},
    {"dwell": {"entering": (1, 2)}},
])
def test_invalid_store_config(kw):
    with pytest.raises(ValueError):
        StoreConfig(**kw)


def test_scenario_parsing():
    sc = parse_scenario("""
[store]
arrival_rate = 0.5
capacity = 6
dwell.purchasing = 10, 20
zone_cap.payment = none
zone_cap.service = 1
queue_contacts = yes
[policy]
p_delivery = 0.4
[epi]
gamma = 0.3
""")
    assert sc.store.arrival_rate == 0.5 and sc.store.capacity == 6
    assert sc.store.dwell["purchasing"] == (10.0, 20.0)
    assert "payment" not in sc.store.zone_caps
    assert sc.store.zone_caps["service"] == 1
    assert sc.store.queue_contacts is True
    assert sc.policy.p_delivery == 0.4
    assert sc.epi["gamma"] == 0.3 and sc.epi["alpha"] == 0.2


@pytest.mark.parametrize("text", [
    "[shop]\nx = 1\n",
    "[store]\nvolume = 11\n",
    "[store]\ndwell.garden = 1, 2\n",
    "[store]\ndwell.payment = 1\n",
    "[store]\ncapacity = 0\n",
    "[store]\nqueue_contacts = maybe\n",
    "[policy]\np_service = 2\n",
    "[epi]\nbeta = 1\n",
])
def test_bad_scenarios_raise_config_errors(text):
    with pytest.raises(ConfigError):
        parse_scenario(text)


# -- simulation -------------------------------------------------------------


def test_lone_customers_make_no_contacts(store_net):
    cfg = StoreConfig(arrival_rate=0.005)
    lone = 0
    for seed in range(40):
        rep = run_store_day(store_net, cfg, POLICY, False, seed)
        if rep.max_occupancy <= 1:
            lone += rep.customers > 0
            assert rep.total_contacts == 0
    assert lone >= 5


def test_capacity_one_prevents_in_store_contacts(store_net):
    cfg = StoreConfig(arrival_rate=2.0, capacity=1)
    rep = run_store_day(store_net, cfg, POLICY, True, 3)
    assert rep.customers > 500
    assert rep.total_contacts == 0
    assert rep.max_occupancy == 1
    crowded = run_store_day(store_net, replace(cfg, queue_contacts=True), POLICY, True, 3)
    assert crowded.total_contacts == crowded.per_zone["queue"] > 0


def test_same_seed_same_report(store_net):
    a = run_store_day(store_net, StoreConfig(), POLICY, True, 9)
    b = run_store_day(store_net, StoreConfig(), POLICY, True, 9)
    assert a == b
    assert a.events_csv() == b.events_csv()
    c = run_store_day(store_net, StoreConfig(), POLICY, True, 10)
    assert c.to_json() != a.to_json()


@pytest.mark.parametrize("seed", range(5))
def test_capacity_and_zone_caps_hold(store_net, seed):
    cfg = StoreConfig(arrival_rate=0.6)
    rep = run_store_day(store_net, cfg, POLICY, True, seed)
    assert occupancy_peaks(rep.visits, IN_STORE) <= cfg.capacity
    assert rep.max_occupancy <= cfg.capacity
    for zone, cap in cfg.zone_caps.items():
        assert occupancy_peaks(rep.visits, (zone,)) <= cap
        assert rep.max_zone_occupancy[zone] <= cap
    off = run_store_day(store_net, cfg, POLICY, False, seed)
    assert off.max_occupancy > cfg.capacity


@pytest.mark.parametrize("resilience", [True, False])
def test_contacts_match_brute_force_pairs(store_net, resilience):
    rep = run_store_day(store_net, StoreConfig(), POLICY, resilience, 4)
    got = [(e.customer_a, e.customer_b, e.zone, e.t_start, e.t_end) for e in rep.events]
    assert got == brute_force_contacts(rep.visits, 15.0, IN_STORE)
    assert len(set((a, b, z) for a, b, z, *_ in got)) == len(got)
    assert all(e.duration >= 15.0 and e.customer_a < e.customer_b for e in rep.events)
    assert rep.total_contacts == len(rep.events) == sum(rep.per_zone.values())


def test_find_contacts_threshold_is_inclusive():
    visits = [(0, "payment", 0.0, 20.0), (1, "payment", 5.0, 30.0), (2, "payment", 6.0, 9.0)]
    events = find_contacts(visits, 15.0)
    assert [(e.customer_a, e.customer_b, e.t_start, e.t_end) for e in events] == [(0, 1, 5.0, 20.0)]


def test_outcome_counts_add_up(store_net):
    rep = run_store_day(store_net, StoreConfig(), POLICY, True, 1)
    assert rep.served + rep.denied == rep.customers
    assert set(rep.per_zone) == set(ZONES)


def test_events_csv_header(store_net):
    rep = run_store_day(store_net, StoreConfig(), POLICY, False, 2)
    rows = list(csv.DictReader(io.StringIO(rep.events_csv())))
    assert list(rows[0]) == ["customer_a", "customer_b", "zone", "t_start", "t_end"]
    assert len(rows) == rep.total_contacts


def test_no_arrivals_gives_empty_report(store_net):
    rep = run_store_day(store_net, StoreConfig(arrival_rate=0), POLICY, True, 0)
    assert rep.customers == 0 and rep.total_contacts == 0
    assert rep.mean_contacts_per_customer == 0


def test_paired_runs_share_arrivals(store_net):
    pairs = paired_runs(store_net, StoreConfig(), POLICY, range(10))
    for seed, (on, off) in zip(range(10), pairs):
        assert on.resilience and not off.resilience
        assert on.customers == off.customers
        assert on.served == off.served
        assert on.total_contacts <= off.total_contacts
        assert (on, off) == (run_store_day(store_net, StoreConfig(), POLICY, True, seed),
                             run_store_day(store_net, StoreConfig(), POLICY, False, seed))


def test_parallel_paired_runs_match_serial(store_net):
    serial = paired_runs(store_net, StoreConfig(), POLICY, range(4))
    parallel = paired_runs(store_net, StoreConfig(), POLICY, range(4), workers=2)
    assert serial == parallel


# -- coupling ---------------------------------------------------------------


def test_effective_q_identical_reports():
    assert effective_q(2.5, report(10, 7), report(10, 7)) == 2.5


def test_effective_q_no_contacts_with_resilience():
    assert effective_q(2.5, report(10, 0), report(10, 7)) == 0


def test_effective_q_ratio():
    assert effective_q(2.5, report(10, 2), report(10, 5)) == pytest.approx(1.0)


def test_effective_q_is_clamped():
    assert effective_q(2.5, report(10, 9), report(10, 3)) == 2.5


def test_effective_q_zero_baseline_warns():
    with pytest.warns(ZeroBaselineContacts):
        assert effective_q(2.5, report(10, 0), report(10, 0)) == 2.5


def test_equal_ratios_give_zero_reduction():
    cmp = compare_outbreaks(BENCH, INIT, 2.5, 2.5)
    assert cmp.i_max_reduction == 0 and cmp.r_end_reduction == 0
    assert not cmp.epidemic_averted


def test_reduced_ratio_averts_the_epidemic():
    cmp = compare_outbreaks(BENCH, INIT, 2.5, 1.0)
    assert cmp.i_max_base == pytest.approx(0.2375, abs=1e-4)
    assert cmp.i_max_eff == INIT.i
    assert cmp.epidemic_averted
    assert cmp.r_end_eff < cmp.r_end_base
    tr = sir.integrate(sir.SirParams.from_ratio(1.0, 0.2), INIT, 1000, 0.05)
    assert np.all(np.diff(tr.i) <= 0)
    assert tr.final().r == pytest.approx(cmp.r_end_eff, abs=1e-3)


def test_comparison_is_bit_identical_to_direct_calls():
    cmp = compare_outbreaks(BENCH, INIT, 2.5, 1.7)
    for q, imax, rend in ((2.5, cmp.i_max_base, cmp.r_end_base),
                          (1.7, cmp.i_max_eff, cmp.r_end_eff)):
        params = sir.SirParams(q * BENCH.alpha, BENCH.alpha)
        assert imax == sir.i_max(params, INIT)
        assert rend == sir.final_size(params, INIT).r_end


def test_comparison_ratio_checks():
    with pytest.raises(ValueError):
        compare_outbreaks(BENCH, INIT, 0, 1.0)
    with pytest.raises(ValueError):
        compare_outbreaks(BENCH, INIT, 2.5, -0.1)


def test_no_contacts_left_means_no_new_infections():
    cmp = compare_outbreaks(BENCH, INIT, 2.5, 0.0)
    assert cmp.i_max_eff == INIT.i
    assert cmp.r_end_eff == INIT.i
    assert cmp.epidemic_averted


def test_no_warning_with_contacts():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        effective_q(2.5, report(10, 1), report(10, 2))
