import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from contactless.petri import (
    FiringError,
    Message,
    NetError,
    SafenessError,
    Transition,
    TransitionKind,
    build_net,
    enabled,
    enumerate_paths,
    fire,
    is_enabled,
    is_workflow_net,
    pool_counter,
    reachability,
    replay,
)
from contactless.store import ACCESS, GOALS

IN, OUT, INNER = TransitionKind.IN, TransitionKind.OUT, TransitionKind.INNER
N_CAP = Message("N_Cap", "B", "C")


def chain(kind=INNER, message=None, marked=("p1",), pool=()):
    """p1 -> t1 -> p2"""
    t = Transition(1, kind, "step", message)
    return build_net(["p1", "p2"], [t], [("p1", 1), (1, "p2")], marked, pool)


# -- construction -----------------------------------------------------------


def test_degenerate_net_has_one_state_and_a_deadlock():
    net = build_net(["p"], [], [], ["p"], require_connected=False)
    graph, rep = reachability(net)
    assert (rep["nodes"], rep["edges"]) == (1, 0)
    assert len(rep["deadlocks"]) == 1
    assert rep["deadlocks"][0]["state"]["marking"] == ["p"]


def test_inner_transition_with_message_is_rejected():
    with pytest.raises(NetError, match="Inner"):
        Transition(1, INNER, "x", N_CAP)


@pytest.mark.parametrize("kind", [IN, OUT])
def test_message_transition_needs_a_message(kind):
    with pytest.raises(NetError):
        Transition(1, kind, "x")


def test_message_sender_and_receiver_differ():
    with pytest.raises(NetError):
        Message("Cap", "B", "B")


@pytest.mark.parametrize("places, arcs, match", [
    (["a", "a"], [], "duplicate"),
    (["a", "b"], [("a", 1), (1, "zz")], "zz"),
    (["a", "b"], [("a", 9), (1, "b")], "9"),
    (["a", "b"], [("a", "b")], "place"),
])
def test_bad_structure_is_rejected(places, arcs, match):
    t = Transition(1, INNER, "x")
    with pytest.raises(NetError, match=match):
        build_net(places, [t], arcs, ["a"])


def test_duplicate_transition_ids_rejected():
    ts = [Transition(1, INNER, "x"), Transition(1, INNER, "y")]
    with pytest.raises(NetError):
        build_net(["a", "b"], ts, [("a", 1), (1, "b")], ["a"])


def test_store_net_shape(store_net):
    assert store_net.source_places() == ["i"]
    assert sorted(store_net.sink_places()) == list(GOALS)


# -- enabling and firing ----------------------------------------------------


def test_inner_enabled_when_inputs_marked():
    net = chain()
    assert enabled(net, net.initial_state()) == [1]


def test_in_without_its_message_is_not_enabled():
    net = chain(IN, N_CAP)
    assert not is_enabled(net, net.initial_state(), 1)
    assert enabled(net, net.initial_state()) == []


def test_in_with_a_different_message_is_not_enabled():
    net = chain(IN, N_CAP, pool=[Message("Y_Cap", "B", "C")])
    assert enabled(net, net.initial_state()) == []


def test_store_source_state_enables_only_access(store_net):
    s0 = store_net.initial_state()
    assert s0.marking == {"i"}
    assert pool_counter(s0.pool) == Counter({ACCESS: 1})
    assert enabled(store_net, s0) == [1]


def test_fire_inner_moves_the_token():
    net = chain()
    s1 = fire(net, net.initial_state(), 1)
    assert s1.marking == {"p2"}
    assert s1.pool == net.initial_state().pool
    assert [(e.step, e.transition, e.message) for e in s1.log] == [(0, 1, None)]


def test_fire_out_adds_message():
    net = chain(OUT, N_CAP)
    s1 = fire(net, net.initial_state(), 1)
    assert pool_counter(s1.pool) == Counter({N_CAP: 1})


def test_fire_in_consumes_message():
    net = chain(IN, N_CAP, pool=[N_CAP, N_CAP])
    s1 = fire(net, net.initial_state(), 1)
    assert pool_counter(s1.pool) == Counter({N_CAP: 1})


def test_firing_disabled_transition_raises():
    net = chain(marked=())
    with pytest.raises(FiringError):
        fire(net, net.initial_state(), 1)
    with pytest.raises(FiringError):
        fire(net, net.initial_state(), 99)


def test_second_token_is_a_safeness_error():
    net = chain(marked=("p1", "p2"))
    with pytest.raises(SafenessError, match="p2"):
        fire(net, net.initial_state(), 1)


def test_self_loop_is_safe():
    t = Transition(1, INNER, "spin")
    net = build_net(["p"], [t], [("p", 1), (1, "p")], ["p"])
    assert fire(net, net.initial_state(), 1).marking == {"p"}


def test_fire_is_pure(store_net):
    s0 = store_net.initial_state()
    a, b = fire(store_net, s0, 1), fire(store_net, s0, 1)
    assert a == b
    assert s0 == store_net.initial_state()


# -- random firing properties -----------------------------------------------

KINDS = [INNER, IN, OUT]
ALPHABET = [Message("a", "X", "Y"), Message("b", "Y", "X")]


@st.composite
def random_nets(draw):
    n_p = draw(st.integers(2, 6))
    places = [f"p{k}" for k in range(n_p)]
    n_t = draw(st.integers(1, 6))
    transitions, arcs = [], []
    for tid in range(1, n_t + 1):
        kind = draw(st.sampled_from(KINDS))
        msg = None if kind is INNER else draw(st.sampled_from(ALPHABET))
        transitions.append(Transition(tid, kind, f"t{tid}", msg))
        pre = draw(st.sets(st.sampled_from(places), max_size=2))
        post = draw(st.sets(st.sampled_from(places), max_size=2))
        arcs += [(p, tid) for p in sorted(pre)] + [(tid, p) for p in sorted(post)]
    marked = draw(st.sets(st.sampled_from(places), min_size=1))
    msgs = draw(st.lists(st.sampled_from(ALPHABET), max_size=3))
    return build_net(places, transitions, arcs, marked, msgs, require_connected=False)


def check_step(net, before, tid, after):
    pre, post = net.preset(tid), net.postset(tid)
    # token count change equals outputs minus inputs, minus self-loop places
    assert len(after.marking) - len(before.marking) == len(post - pre) - len(pre - post)
    # locality: nothing outside the pre/post sets changes
    touched = pre | post
    assert before.marking - touched == after.marking - touched
    delta = pool_counter(after.pool)
    delta.subtract(pool_counter(before.pool))
    changed = {m: c for m, c in delta.items() if c}
    t = net.transition(tid)
    expected = {IN: {t.message: -1}, OUT: {t.message: 1}, INNER: {}}[t.kind]
    assert changed == expected
    assert len(after.log) == len(before.log) + 1


@settings(max_examples=60, deadline=None)
@given(net=random_nets(), seed=st.integers(0, 2**32 - 1))
def test_random_firings_respect_arc_counts_and_conserve_messages(net, seed):
    rng = random.Random(seed)
    state = net.initial_state()
    outs, ins = Counter(), Counter()
    for _ in range(40):
        ready = enabled(net, state)
        if not ready:
            break
        tid = rng.choice(ready)
        try:
            nxt = fire(net, state, tid)
        except SafenessError:
            assert (state.marking - net.preset(tid)) & net.postset(tid)
            break
        check_step(net, state, tid, nxt)
        t = net.transition(tid)
        if t.kind is OUT:
            outs[t.message] += 1
        elif t.kind is IN:
            ins[t.message] += 1
        state = nxt
    expected = pool_counter(net.initial_messages) + outs
    expected.subtract(ins)
    assert all(c >= 0 for c in expected.values())
    assert pool_counter(state.pool) == +expected


def test_thousand_random_firings_on_store_net(store_net):
    rng = random.Random(2024)
    state, fired = store_net.initial_state(), 0
    while fired < 1000:
        ready = enabled(store_net, state)
        if not ready:
            state = store_net.initial_state()
            continue
        tid = rng.choice(ready)
        nxt = fire(store_net, state, tid)
        check_step(store_net, state, tid, nxt)
        state, fired = nxt, fired + 1


# -- reachability -----------------------------------------------------------


def test_store_net_goals_reachable_with_replayable_witnesses(store_net):
    _, rep = reachability(store_net)
    assert not rep["deadlocks"]
    assert rep["terminal_exclusive"]
    assert not rep["partial"] and not rep["pool_overflow"]
    for g in GOALS:
        info = rep["goals"][g]
        assert info["reachable"]
        end = replay(store_net, info["witness"])
        assert end.marking & set(GOALS) == {g}


def test_o1_witness_is_shortest(store_net):
    _, rep = reachability(store_net)
    assert rep["goals"]["O1"]["witness"] == [1, 2, 3, 7, 8, 9, 10, 11, 12]


def test_witness_prefers_smaller_ids_among_equal_lengths():
    ts = [Transition(k, INNER, f"t{k}") for k in (1, 2)]
    arcs = [("s", 2), (2, "g"), ("s", 1), (1, "g")]
    net = build_net(["s", "g"], ts, arcs, ["s"])
    _, rep = reachability(net)
    assert rep["goals"]["g"]["witness"] == [1]


def test_unbounded_out_loop_reports_pool_overflow():
    ts = [Transition(1, OUT, "spam", N_CAP), Transition(2, INNER, "stop")]
    net = build_net(["p", "q"], ts, [("p", 1), (1, "p"), ("p", 2), (2, "q")], ["p"])
    _, rep = reachability(net, pool_limit=3)
    assert rep["pool_overflow"]
    assert rep["nodes"] == 4 + 4  # pool sizes 0..3 at p and at q


def test_node_cap_marks_report_partial():
    ts = [Transition(1, OUT, "spam", N_CAP)]
    net = build_net(["p"], ts, [("p", 1), (1, "p")], ["p"])
    _, rep = reachability(net, max_nodes=3, pool_limit=100)
    assert rep["partial"] and rep["nodes"] == 3


def test_step_bound_truncates(store_net):
    _, rep = reachability(store_net, bound=5)
    assert rep["bound_truncated"]
    assert not any(g["reachable"] for g in rep["goals"].values())


def test_enumerate_paths_simple_diamond():
    ts = [Transition(k, INNER, f"t{k}") for k in (1, 2, 3, 4)]
    arcs = [("s", 1), (1, "a"), ("s", 2), (2, "b"), ("a", 3), (3, "g"), ("b", 4), (4, "g")]
    net = build_net(["s", "a", "b", "g"], ts, arcs, ["s"])
    assert enumerate_paths(net) == [(1, 3), (2, 4)]


# -- workflow-net checks ----------------------------------------------------


def test_store_net_is_a_sound_workflow_net(store_net):
    rep = is_workflow_net(store_net)
    assert rep["structural_pass"]
    assert rep["sound"]


def test_source_with_incoming_arc_fails_source_condition():
    ts = [Transition(1, INNER, "go"), Transition(2, INNER, "back")]
    arcs = [("i", 1), (1, "o"), ("x", 2), (2, "i")]
    net = build_net(["i", "o", "x"], ts, arcs, ["i"])
    rep = is_workflow_net(net)
    assert not rep["single_source"]["pass"]
    assert "i" not in rep["single_source"]["sources"]


def test_unreachable_transition_is_named_dead():
    # t2 waits for a message that no transition ever sends
    ts = [Transition(1, INNER, "go"), Transition(2, IN, "never", N_CAP)]
    arcs = [("i", 1), (1, "o"), ("i", 2), (2, "o")]
    net = build_net(["i", "o"], ts, arcs, ["i"])
    rep = is_workflow_net(net)
    assert rep["structural_pass"]
    assert rep["no_dead_transitions"]["dead"] == ["t2"]
    assert not rep["sound"]
