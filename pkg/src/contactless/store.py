"""The contactless-purchasing workflow net and customer runs over it.

Each message exchange between two role players is an Out transition in the
sender's part of the net followed by the matching In transition in the
receiver's part.  The first request, ``(Access, C, B)``, is already in the
initial pool.  See ``docs/store_net.md`` for the place-by-place layout.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from configparser import ConfigParser
from dataclasses import asdict, dataclass, fields

import numpy as np

from .petri import (
    LabeledNet,
    Message,
    Transition,
    TransitionKind,
    build_net,
    enabled,
    enumerate_paths,
    fire,
)


class RolePlayer(str, enum.Enum):
    C = "C"    # customer
    B = "B"    # business / store entrance
    SC = "SC"  # sensor checking system
    PM = "PM"  # purchasing monitoring system
    PA = "PA"  # payment assistant system
    DA = "DA"  # delivery assistant system
    CS = "CS"  # customer service system

    def __str__(self):
        return self.value


C, B, SC, PM, PA, DA, CS = RolePlayer

_CATALOG = (
    ("Access", C, B),
    ("Cap", B, C),
    ("Temp", SC, C),
    ("Mask", SC, C),
    ("N_Cap", B, C),
    ("Y_Cap", B, C),
    ("N_Tem", SC, C),
    ("Y_Tem", SC, C),
    ("N_Mas", SC, C),
    ("Y_Mas", SC, C),
    ("Pur", C, PM),
    ("Pur", PM, C),
    ("Pay", C, PA),
    ("Pay", PA, C),
    ("N_Deli", C, DA),
    ("Y_Deli", C, DA),
    ("N_Ser", C, CS),
    ("Y_Ser", C, CS),
)


def message_catalog() -> list[Message]:
    """The 18 messages exchanged between the customer and the store systems."""
    return [Message(m, s, r) for m, s, r in _CATALOG]


SOURCE = "i"
GOALS = ("O1", "O2", "O3")
ACCESS = Message("Access", C, B)

# Procedures: entering, purchasing, payment, delivery, customer service.
EP, PUP, PAP, DP, CSP = "EP", "PuP", "PaP", "DP", "CSP"

OUT, IN, INNER = TransitionKind.OUT, TransitionKind.IN, TransitionKind.INNER

# (id, kind, message, label, procedure, src place, dst place)
_WIRING = (
    (1, IN, ("Access", C, B), "receive access request", EP, "i", "P1"),
    (2, OUT, ("Cap", B, C), "send capacity check", EP, "P1", "P2"),
    (3, IN, ("Cap", B, C), "receive capacity check", EP, "P2", "P3"),
    (4, OUT, ("Y_Cap", B, C), "announce store full", EP, "P3", "P4"),
    (5, IN, ("Y_Cap", B, C), "receive store full", EP, "P4", "P5"),
    (6, INNER, None, "wait for a customer to leave", EP, "P5", "P1"),
    (7, OUT, ("N_Cap", B, C), "announce store not full", EP, "P3", "P6"),
    (8, IN, ("N_Cap", B, C), "receive store not full", EP, "P6", "P7"),
    (9, OUT, ("Temp", SC, C), "send temperature check", EP, "P7", "P8"),
    (10, IN, ("Temp", SC, C), "receive temperature check", EP, "P8", "P9"),
    (11, OUT, ("N_Tem", SC, C), "announce temperature fail", EP, "P9", "P10"),
    (12, IN, ("N_Tem", SC, C), "receive temperature fail", EP, "P10", "O1"),
    (13, OUT, ("Y_Tem", SC, C), "announce temperature pass", EP, "P9", "P11"),
    (14, IN, ("Y_Tem", SC, C), "receive temperature pass", EP, "P11", "P12"),
    (15, OUT, ("Mask", SC, C), "send mask check", EP, "P12", "P13"),
    (16, IN, ("Mask", SC, C), "receive mask check", EP, "P13", "P14"),
    (17, OUT, ("N_Mas", SC, C), "announce no mask", EP, "P14", "P15"),
    (18, IN, ("N_Mas", SC, C), "receive no mask", EP, "P15", "O2"),
    (19, OUT, ("Y_Mas", SC, C), "announce mask worn", EP, "P14", "P16"),
    (20, IN, ("Y_Mas", SC, C), "receive mask worn", EP, "P16", "P17"),
    (21, INNER, None, "voluntary measures (sanitize, clean cart, gloves)", EP, "P17", "P18"),
    (22, OUT, ("Pur", C, PM), "start purchasing", PUP, "P18", "P19"),
    (23, IN, ("Pur", C, PM), "monitor receives purchasing", PUP, "P19", "P20"),
    (24, INNER, None, "shop under crowd and direction monitoring", PUP, "P20", "P21"),
    (25, OUT, ("Pur", PM, C), "send purchasing guidance", PUP, "P21", "P22"),
    (26, IN, ("Pur", PM, C), "receive purchasing guidance", PUP, "P22", "P23"),
    (27, OUT, ("Pay", C, PA), "request self payment", PAP, "P23", "P24"),
    (28, IN, ("Pay", C, PA), "payment assistant receives request", PAP, "P24", "P25"),
    (29, INNER, None, "scan and pay (cash, card or app)", PAP, "P25", "P26"),
    (30, OUT, ("Pay", PA, C), "send payment receipt", PAP, "P26", "P27"),
    (31, IN, ("Pay", PA, C), "receive payment receipt", PAP, "P27", "P28"),
    (32, OUT, ("Y_Deli", C, DA), "request delivery", DP, "P28", "P29"),
    (33, IN, ("Y_Deli", C, DA), "delivery assistant receives request", DP, "P29", "P30"),
    (34, INNER, None, "process self delivery", DP, "P30", "P32"),
    (35, OUT, ("N_Deli", C, DA), "decline delivery", DP, "P28", "P31"),
    (36, IN, ("N_Deli", C, DA), "delivery assistant receives decline", DP, "P31", "P32"),
    (37, OUT, ("Y_Ser", C, CS), "request customer service", CSP, "P32", "P33"),
    (38, IN, ("Y_Ser", C, CS), "service system receives request", CSP, "P33", "P34"),
    (39, INNER, None, "contactless service (voice, virtual, app)", CSP, "P34", "O3"),
    (40, OUT, ("N_Ser", C, CS), "decline customer service", CSP, "P32", "P35"),
    (41, IN, ("N_Ser", C, CS), "service system receives decline", CSP, "P35", "O3"),
)

PROCEDURE = {row[0]: row[4] for row in _WIRING}

# Branch points: the place where the choice is made, and the transition taken
# when the policy's Bernoulli draw comes up true / false.
BRANCHES = {
    "capacity": ("P3", 4, 7),
    "temperature": ("P9", 11, 13),
    "mask": ("P14", 17, 19),
    "delivery": ("P28", 32, 35),
    "service": ("P32", 37, 40),
}
_BRANCH_AT = {place: name for name, (place, _, _) in BRANCHES.items()}
WAIT_TRANSITION = 4  # Out (Y_Cap, B, C): one traversal of the capacity-wait loop


def build_store_net() -> LabeledNet:
    places = [SOURCE] + [f"P{k}" for k in range(1, 36)] + list(GOALS)
    transitions, arcs = [], []
    for tid, kind, msg, label, _, src, dst in _WIRING:
        message = Message(*msg) if msg else None
        transitions.append(Transition(tid, kind, label, message))
        arcs += [(src, tid), (tid, dst)]
    return build_net(places, transitions, arcs, [SOURCE], [ACCESS],
                     require_messages=True)


# -- customer policies -----------------------------------------------------


@dataclass(frozen=True)
class CustomerPolicy:
    p_store_full: float = 0.0
    p_temp_fail: float = 0.0
    p_mask_refuse: float = 0.0
    p_delivery: float = 0.0
    p_service: float = 0.0
    max_wait_loops: int = 3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "max_wait_loops":
                if int(v) != v or v < 0:
                    raise ValueError(f"max_wait_loops must be a non-negative integer, got {v!r}")
                object.__setattr__(self, f.name, int(v))
            elif not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1], got {v!r}")

    def probability(self, branch: str) -> float:
        try:
            return getattr(self, _POLICY_FIELD[branch])
        except KeyError:
            raise ValueError(f"unknown branch point {branch!r}") from None

    def to_dict(self) -> dict:
        return asdict(self)


_POLICY_FIELD = {
    "capacity": "p_store_full",
    "temperature": "p_temp_fail",
    "mask": "p_mask_refuse",
    "delivery": "p_delivery",
    "service": "p_service",
}


def parse_policy(text: str) -> CustomerPolicy:
    """Read a ``key = value`` policy file (``#`` comments allowed)."""
    cp = ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[policy]\n" + text)
    return policy_from_mapping(cp["policy"])


def policy_from_mapping(section) -> CustomerPolicy:
    known = {f.name: f.type for f in fields(CustomerPolicy)}
    kw = {}
    for key, raw in section.items():
        if key not in known:
            raise ValueError(f"unknown policy key {key!r}")
        kw[key] = int(raw) if key == "max_wait_loops" else float(raw)
    return CustomerPolicy(**kw)


def format_policy(policy: CustomerPolicy) -> str:
    return "".join(f"{k} = {v}\n" for k, v in policy.to_dict().items())


def resolve_choice(policy: CustomerPolicy, branch: str, rng: np.random.Generator) -> bool:
    """Bernoulli draw for one branch point; True means the named event happens.

    Exactly one uniform is consumed per call, so coupled runs that share a
    generator stay aligned whatever the probabilities are.
    """
    p = policy.probability(branch)
    return bool(rng.random() < p)


def branch_streams(seed: int) -> dict[str, np.random.Generator]:
    """One independent generator per branch point, all derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(BRANCHES))
    return {name: np.random.default_rng(ss) for name, ss in zip(BRANCHES, children)}


# -- traces ----------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    seed: int | None
    firings: tuple  # ((transition id, Message | None), ...)
    terminal: str
    wait_loops: int

    @property
    def transitions(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.firings)

    def procedures(self) -> list[str]:
        seen = []
        for t in self.transitions:
            p = PROCEDURE.get(t)
            if p and p not in seen:
                seen.append(p)
        return seen

    def to_rows(self) -> list[dict]:
        rows = []
        for step, (tid, m) in enumerate(self.firings):
            rows.append({
                "step": step,
                "transition": tid,
                "msg": m.msg if m else "",
                "sender": m.sender if m else "",
                "receiver": m.receiver if m else "",
            })
        return rows

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "terminal": self.terminal,
            "wait_loops": self.wait_loops,
            "firings": [[r["transition"], r["msg"], r["sender"], r["receiver"]]
                        for r in self.to_rows()],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Trace":
        firings = tuple((t, Message(m, s, r) if m else None) for t, m, s, r in d["firings"])
        return cls(d["seed"], firings, d["terminal"], d["wait_loops"])


def _make_trace(net, tids, seed):
    firings = tuple((t, net.transition(t).message) for t in tids)
    goal = next(iter(net.postset(tids[-1]) & set(GOALS)))
    waits = sum(1 for t in tids if t == WAIT_TRANSITION)
    return Trace(seed, firings, goal, waits)


def run_customer(net: LabeledNet, policy: CustomerPolicy, seed: int) -> Trace:
    """Walk one customer from ``i`` to a goal, resolving choices by policy.

    After ``max_wait_loops`` store-full draws the store is deemed not full,
    so every run terminates.
    """
    streams = branch_streams(seed)
    state = net.initial_state()
    waits = 0
    while not (state.marking & set(GOALS)):
        ready = enabled(net, state)
        if len(ready) == 1:
            tid = ready[0]
        else:
            (place,) = [p for p in state.marking if p in _BRANCH_AT]
            name = _BRANCH_AT[place]
            _, yes, no = BRANCHES[name]
            if name == "capacity" and waits >= policy.max_wait_loops:
                tid = no
            else:
                tid = yes if resolve_choice(policy, name, streams[name]) else no
            if tid == WAIT_TRANSITION:
                waits += 1
        state = fire(net, state, tid)
    return _make_trace(net, [e.transition for e in state.log], seed)


def enumerate_traces(net: LabeledNet, loop_bound: int) -> list[Trace]:
    """Every distinct source-to-goal firing sequence with at most
    ``loop_bound`` traversals of the capacity-wait loop."""
    if loop_bound < 0:
        raise ValueError("loop_bound must be >= 0")
    paths = enumerate_paths(net, terminals=GOALS, max_visits=loop_bound + 1)
    traces = [_make_trace(net, p, None) for p in paths]
    traces = [t for t in traces if t.wait_loops <= loop_bound]
    return sorted(set(traces), key=lambda t: (t.terminal, t.transitions))


def traces_csv(traces: list[Trace]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["trace", "step", "transition", "msg", "sender", "receiver"],
                       lineterminator="\n")
    w.writeheader()
    for k, tr in enumerate(traces):
        for row in tr.to_rows():
            w.writerow({"trace": k, **row})
    return buf.getvalue()


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["step", "transition", "msg", "sender", "receiver"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(trace.to_rows())
    return buf.getvalue()


def traces_bundle(traces: list[Trace]) -> str:
    return json.dumps({"traces": [t.to_json() for t in traces]}, indent=2, sort_keys=True) + "\n"
