"""Labeled Petri nets with message-passing transitions.

A net is a set of places, typed transitions (In / Out / Inner) and arcs.
The state of a net is a safe marking together with a multiset of
in-flight messages (the pool).  In transitions need their message to be
present in the pool and consume it; Out transitions add their message to
the pool; Inner transitions leave the pool alone.

Everything here is immutable.  ``enabled`` and ``fire`` are pure, so a
state graph can be explored without worrying about shared state.
"""

from __future__ import annotations

import enum
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence


class NetError(ValueError):
    """Raised when a net description violates a structural rule."""


class FiringError(RuntimeError):
    """Raised when a transition cannot be fired from a state."""


class SafenessError(FiringError):
    """Raised when firing would put a second token on a place."""


class TransitionKind(enum.Enum):
    IN = "In"
    OUT = "Out"
    INNER = "Inner"

    @classmethod
    def parse(cls, text: str) -> "TransitionKind":
        for kind in cls:
            if kind.value.lower() == text.strip().lower():
                return kind
        raise NetError(f"unknown transition kind {text!r}")


@dataclass(frozen=True, order=True)
class Message:
    """An exchanged message ``(msg, sender, receiver)``."""

    msg: str
    sender: str
    receiver: str

    def __post_init__(self):
        if not self.msg:
            raise NetError("message name must be non-empty")
        if str(self.sender) == str(self.receiver):
            raise NetError(f"message {self.msg!r} has sender == receiver")
        # normalise str-valued enums to plain strings so equality is exact
        object.__setattr__(self, "sender", str(self.sender))
        object.__setattr__(self, "receiver", str(self.receiver))

    def __str__(self):
        return f"({self.msg}, {self.sender}, {self.receiver})"


@dataclass(frozen=True)
class Place:
    index: int
    name: str


@dataclass(frozen=True)
class Transition:
    id: int
    kind: TransitionKind
    label: str
    message: Message | None = None
    weight: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind is TransitionKind.INNER and self.message is not None:
            raise NetError(f"Inner transition t{self.id} must not carry a message")
        if self.kind is not TransitionKind.INNER and self.message is None:
            raise NetError(f"{self.kind.value} transition t{self.id} needs a message")
        if self.weight < 0:
            raise NetError(f"transition t{self.id} has negative weight")


@dataclass(frozen=True)
class Arc:
    """Directed arc; exactly one of the endpoints is a place name."""

    src: str | int
    dst: str | int

    @property
    def place_to_transition(self) -> bool:
        return isinstance(self.src, str)


Marking = frozenset  # set of marked place names; safe nets only need 0/1
Pool = tuple  # sorted tuple of (Message, count) pairs


def make_pool(messages: Iterable[Message] | Mapping[Message, int]) -> Pool:
    counts = Counter(messages)
    return tuple(sorted((m, c) for m, c in counts.items() if c > 0))


def pool_counter(pool: Pool) -> Counter:
    return Counter(dict(pool))


@dataclass(frozen=True)
class LogEntry:
    step: int
    transition: int
    message: Message | None


@dataclass(frozen=True)
class NetState:
    marking: frozenset
    pool: Pool = ()
    log: tuple = ()

    @property
    def key(self) -> tuple:
        """Identity of the state for graph purposes (the log is history)."""
        return (tuple(sorted(self.marking)), self.pool)

    def pool_size(self) -> int:
        return sum(c for _, c in self.pool)


@dataclass(frozen=True)
class LabeledNet:
    places: tuple
    transitions: tuple
    arcs: frozenset
    initial_marking: frozenset
    initial_messages: Pool = ()
    # derived lookup tables, filled in by build_net
    _pre: Mapping = field(default=None, repr=False, compare=False)
    _post: Mapping = field(default=None, repr=False, compare=False)
    _by_id: Mapping = field(default=None, repr=False, compare=False)
    _consumers: Mapping = field(default=None, repr=False, compare=False)

    @property
    def place_names(self) -> list[str]:
        return [p.name for p in self.places]

    def transition(self, tid: int) -> Transition:
        try:
            return self._by_id[tid]
        except KeyError:
            raise FiringError(f"no transition t{tid}") from None

    def preset(self, tid: int) -> frozenset:
        return self._pre[tid]

    def postset(self, tid: int) -> frozenset:
        return self._post[tid]

    def initial_state(self) -> NetState:
        return NetState(self.initial_marking, self.initial_messages, ())

    def source_places(self) -> list[str]:
        fed = {a.dst for a in self.arcs if not a.place_to_transition}
        return [p for p in self.place_names if p not in fed]

    def sink_places(self) -> list[str]:
        """Places with incoming arcs but no outgoing ones."""
        fed = {a.dst for a in self.arcs if not a.place_to_transition}
        drained = {a.src for a in self.arcs if a.place_to_transition}
        return [p for p in self.place_names if p in fed and p not in drained]


def build_net(
    places: Sequence[str],
    transitions: Sequence[Transition],
    arcs: Iterable[tuple],
    initial_marking: Iterable[str],
    initial_messages: Iterable[Message] = (),
    *,
    require_messages: bool = False,
    require_connected: bool = True,
) -> LabeledNet:
    """Validate a net description and return a :class:`LabeledNet`.

    ``arcs`` are ``(src, dst)`` pairs where a place is given by name and a
    transition by integer id.  With ``require_messages`` the initial message
    set must be non-empty, as for a net that interacts with partners.
    """
    names = list(places)
    if len(set(names)) != len(names):
        dup = sorted(n for n, c in Counter(names).items() if c > 1)
        raise NetError(f"duplicate place names: {dup}")
    for n in names:
        if not isinstance(n, str) or not n:
            raise NetError(f"bad place name {n!r}")

    ts = list(transitions)
    ids = [t.id for t in ts]
    if len(set(ids)) != len(ids):
        dup = sorted(i for i, c in Counter(ids).items() if c > 1)
        raise NetError(f"duplicate transition ids: {dup}")

    place_set, tid_set = set(names), set(ids)
    arc_set = set()
    for src, dst in arcs:
        if isinstance(src, str) and isinstance(dst, int) and not isinstance(dst, bool):
            if src not in place_set:
                raise NetError(f"arc {src} -> t{dst}: unknown place {src!r}")
            if dst not in tid_set:
                raise NetError(f"arc {src} -> t{dst}: unknown transition t{dst}")
        elif isinstance(src, int) and isinstance(dst, str):
            if src not in tid_set:
                raise NetError(f"arc t{src} -> {dst}: unknown transition t{src}")
            if dst not in place_set:
                raise NetError(f"arc t{src} -> {dst}: unknown place {dst!r}")
        else:
            raise NetError(f"arc {src!r} -> {dst!r} must join a place and a transition")
        arc_set.add(Arc(src, dst))

    marking = frozenset(initial_marking)
    missing = marking - place_set
    if missing:
        raise NetError(f"initial marking names unknown places {sorted(missing)}")
    messages = list(initial_messages)
    if require_messages and not messages:
        raise NetError("initial message set must be non-empty")

    pre = {t: set() for t in ids}
    post = {t: set() for t in ids}
    for a in arc_set:
        if a.place_to_transition:
            pre[a.dst].add(a.src)
        else:
            post[a.src].add(a.dst)

    if require_connected and len(names) + len(ids) > 1:
        _check_connected(names, ids, arc_set)

    ordered = tuple(sorted(ts, key=lambda t: t.id))
    return LabeledNet(
        places=tuple(Place(k, n) for k, n in enumerate(names)),
        transitions=ordered,
        arcs=frozenset(arc_set),
        initial_marking=marking,
        initial_messages=make_pool(messages),
        _pre={t: frozenset(s) for t, s in pre.items()},
        _post={t: frozenset(s) for t, s in post.items()},
        _by_id={t.id: t for t in ordered},
        _consumers=_consumer_index(names, pre),
    )


def _consumer_index(names, pre):
    """place -> ids of transitions that need it; ``None`` -> empty presets."""
    index = {n: [] for n in names}
    index[None] = []
    for tid in sorted(pre):
        for p in pre[tid] or [None]:
            index[p].append(tid)
    return {k: tuple(v) for k, v in index.items()}


def _check_connected(names, ids, arcs):
    nodes = [("p", n) for n in names] + [("t", i) for i in ids]
    adj = {n: set() for n in nodes}
    for a in arcs:
        u = ("p", a.src) if a.place_to_transition else ("t", a.src)
        v = ("t", a.dst) if a.place_to_transition else ("p", a.dst)
        adj[u].add(v)
        adj[v].add(u)
    seen = {nodes[0]}
    todo = [nodes[0]]
    while todo:
        for v in adj[todo.pop()]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    if len(seen) != len(nodes):
        lost = sorted(f"{k}:{v}" for k, v in set(nodes) - seen)
        raise NetError(f"net is not connected; isolated from the rest: {lost}")


# -- firing semantics ------------------------------------------------------


def is_enabled(net: LabeledNet, state: NetState, tid: int) -> bool:
    t = net.transition(tid)
    if not net.preset(tid) <= state.marking:
        return False
    if t.kind is TransitionKind.IN:
        return any(m == t.message for m, _ in state.pool)
    return True


def enabled(net: LabeledNet, state: NetState) -> list[int]:
    """Ids of the transitions enabled in ``state``, in ascending order."""
    cands = set(net._consumers[None])
    for p in state.marking:
        cands.update(net._consumers[p])
    return [tid for tid in sorted(cands) if is_enabled(net, state, tid)]


def fire(net: LabeledNet, state: NetState, tid: int) -> NetState:
    """Fire transition ``tid`` and return the successor state."""
    if not is_enabled(net, state, tid):
        raise FiringError(f"t{tid} is not enabled")
    t = net.transition(tid)
    pre, post = net.preset(tid), net.postset(tid)
    kept = state.marking - pre
    clash = kept & post
    if clash:
        raise SafenessError(
            f"firing t{tid} would put a second token on {sorted(clash)}"
        )
    pool = state.pool
    if t.kind is TransitionKind.IN:
        counts = pool_counter(pool)
        counts[t.message] -= 1
        pool = make_pool(counts)
    elif t.kind is TransitionKind.OUT:
        counts = pool_counter(pool)
        counts[t.message] += 1
        pool = make_pool(counts)
    entry = LogEntry(len(state.log), tid, t.message)
    return NetState(kept | post, pool, state.log + (entry,))


def replay(net: LabeledNet, tids: Iterable[int], state: NetState | None = None) -> NetState:
    state = net.initial_state() if state is None else state
    for tid in tids:
        state = fire(net, state, tid)
    return state


# -- state-space exploration -----------------------------------------------


@dataclass
class StateGraph:
    nodes: list  # node index -> state key
    edges: list  # (src index, transition id, dst index)
    terminal: dict  # node index -> marked terminal place names
    index: dict = field(default_factory=dict)  # state key -> node index

    def successors(self, n: int) -> list[tuple[int, int]]:
        return [(t, d) for s, t, d in self.edges if s == n]


def _state_json(key) -> dict:
    marking, pool = key
    return {
        "marking": list(marking),
        "pool": [[m.msg, m.sender, m.receiver, c] for m, c in pool],
    }


def reachability(
    net: LabeledNet,
    *,
    terminals: Sequence[str] | None = None,
    bound: int | None = None,
    max_nodes: int = 100_000,
    pool_limit: int = 4,
) -> tuple[StateGraph, dict]:
    """Explore every state reachable from the initial state.

    Breadth-first, with successors taken in ascending transition id, so the
    first path to reach a node is the shortest one and, among equally short
    ones, the lexicographically smallest.  That path is the witness.

    Parameters
    ----------
    terminals : place names that count as goals. Defaults to the sink places.
    bound : optional cap on path length (firing steps) from the initial state.
    max_nodes : exploration stops, flagged as partial, past this many nodes.
    pool_limit : per-message multiplicity cap. A successor whose pool would
        exceed it is not explored; the overflow is reported instead.

    Returns
    -------
    (StateGraph, report) where report is a JSON-ready dict.
    """
    goals = list(net.sink_places() if terminals is None else terminals)
    init = net.initial_state()
    graph = StateGraph(nodes=[init.key], edges=[], terminal={}, index={init.key: 0})
    witness = {0: ()}
    states = {0: init}
    queue = deque([0])
    overflow, unsafe = [], []
    partial = False
    truncated = False
    deadlocks = []

    while queue:
        n = queue.popleft()
        st = states[n]
        marked_goals = sorted(g for g in goals if g in st.marking)
        if marked_goals:
            graph.terminal[n] = marked_goals
        ready = enabled(net, st)
        if not ready and not marked_goals:
            deadlocks.append(n)
        if bound is not None and len(witness[n]) >= bound:
            truncated = truncated or bool(ready)
            continue
        for tid in ready:
            try:
                nxt = fire(net, st, tid)
            except SafenessError as exc:
                unsafe.append({"state": _state_json(st.key), "transition": tid,
                               "error": str(exc)})
                continue
            if any(c > pool_limit for _, c in nxt.pool):
                overflow.append({"state": _state_json(st.key), "transition": tid})
                continue
            k = nxt.key
            d = graph.index.get(k)
            if d is None:
                if len(graph.nodes) >= max_nodes:
                    partial = True
                    continue
                d = len(graph.nodes)
                graph.nodes.append(k)
                graph.index[k] = d
                witness[d] = witness[n] + (tid,)
                states[d] = NetState(nxt.marking, nxt.pool, ())
                queue.append(d)
            graph.edges.append((n, tid, d))
        # drop the full state once expanded; the key is all the graph keeps
        states[n] = None

    goal_report = {}
    for g in goals:
        hits = sorted((n for n, gs in graph.terminal.items() if g in gs),
                      key=lambda n: (len(witness[n]), witness[n]))
        goal_report[g] = {
            "reachable": bool(hits),
            "terminal_states": len(hits),
            "witness": list(witness[hits[0]]) if hits else None,
        }
    multi = [n for n, gs in graph.terminal.items() if len(gs) > 1]
    fired = {t for _, t, _ in graph.edges}
    report = {
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "goals": goal_report,
        "deadlocks": [
            {"state": _state_json(graph.nodes[n]), "witness": list(witness[n])}
            for n in deadlocks
        ],
        "terminal_exclusive": not multi,
        "pool_overflow": overflow,
        "safeness_violations": unsafe,
        "partial": partial,
        "bound_truncated": truncated,
        "never_fired": sorted(t.id for t in net.transitions if t.id not in fired),
        "pool_limit": pool_limit,
        "max_nodes": max_nodes,
    }
    return graph, report


def enumerate_paths(
    net: LabeledNet,
    *,
    terminals: Sequence[str] | None = None,
    max_visits: int = 1,
) -> list[tuple[int, ...]]:
    """All firing sequences from the initial state to a terminal state.

    Depth-first; a path may visit the same state at most ``max_visits``
    times, which keeps the search finite on cyclic nets.
    """
    goals = set(net.sink_places() if terminals is None else terminals)
    out = []
    visits = Counter()

    def walk(state, path):
        k = state.key
        visits[k] += 1
        try:
            if goals & state.marking:
                out.append(tuple(path))
                return
            for tid in enabled(net, state):
                nxt = fire(net, state, tid)
                if visits[nxt.key] >= max_visits:
                    continue
                path.append(tid)
                walk(nxt, path)
                path.pop()
        finally:
            visits[k] -= 1

    walk(net.initial_state(), [])
    return sorted(out)


# -- workflow-net checks ---------------------------------------------------


def is_workflow_net(
    net: LabeledNet,
    *,
    max_nodes: int = 100_000,
    pool_limit: int = 4,
) -> dict:
    """Structural workflow-net conditions plus classical soundness checks.

    Returns a JSON-ready report; every condition carries ``pass`` and the
    offending elements when it fails.
    """
    sources = net.source_places()
    sinks = net.sink_places()
    report = {}

    ok_source = len(sources) == 1 and sources[0] in net.initial_marking
    report["single_source"] = {
        "pass": ok_source,
        "sources": sources,
        "initially_marked": [s for s in sources if s in net.initial_marking],
    }
    # a place with an incoming arc can never be the source, whatever else holds
    report["sinks"] = {"pass": bool(sinks), "sinks": sinks}

    fwd, bwd = _graph_reach(net, sources, sinks)
    every = [("p", p) for p in net.place_names] + [("t", t.id) for t in net.transitions]
    off_path = [_node_name(n) for n in every if n not in fwd or n not in bwd]
    report["on_source_sink_path"] = {"pass": not off_path and bool(sources) and bool(sinks),
                                     "off_path": off_path}

    graph, reach = reachability(net, terminals=sinks, max_nodes=max_nodes,
                                pool_limit=pool_limit)
    # option to complete: every reachable node can reach a terminal node
    rev = {}
    for s, _, d in graph.edges:
        rev.setdefault(d, set()).add(s)
    good = set(graph.terminal)
    todo = list(good)
    while todo:
        for s in rev.get(todo.pop(), ()):
            if s not in good:
                good.add(s)
                todo.append(s)
    stuck = [n for n in range(len(graph.nodes)) if n not in good]
    report["option_to_complete"] = {
        "pass": not stuck and not reach["partial"] and not reach["pool_overflow"],
        "stuck_states": [_state_json(graph.nodes[n]) for n in stuck],
    }
    improper = []
    for n in graph.terminal:
        marking, pool = graph.nodes[n]
        if len(marking) != 1:
            improper.append(_state_json(graph.nodes[n]))
    report["proper_completion"] = {"pass": not improper, "improper_states": improper}
    report["no_dead_transitions"] = {
        "pass": not reach["never_fired"],
        "dead": [f"t{t}" for t in reach["never_fired"]],
    }
    report["safe"] = {"pass": not reach["safeness_violations"],
                      "violations": reach["safeness_violations"]}
    structural = ("single_source", "sinks", "on_source_sink_path")
    report["structural_pass"] = all(report[k]["pass"] for k in structural)
    report["sound"] = report["structural_pass"] and all(
        report[k]["pass"] for k in ("option_to_complete", "proper_completion",
                                    "no_dead_transitions", "safe"))
    return report


def _node_name(node):
    kind, v = node
    return f"t{v}" if kind == "t" else v


def _graph_reach(net, sources, sinks):
    succ, pred = {}, {}
    for a in net.arcs:
        u = ("p", a.src) if a.place_to_transition else ("t", a.src)
        v = ("t", a.dst) if a.place_to_transition else ("p", a.dst)
        succ.setdefault(u, set()).add(v)
        pred.setdefault(v, set()).add(u)

    def closure(start, adj):
        seen = set(start)
        todo = list(start)
        while todo:
            for v in adj.get(todo.pop(), ()):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    return (closure([("p", s) for s in sources], succ),
            closure([("p", s) for s in sinks], pred))
