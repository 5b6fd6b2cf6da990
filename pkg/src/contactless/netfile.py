"""Plain-text net descriptions.

Grammar (one item per line, ``#`` starts a comment, blank lines ignored)::

    PLACES:
    <name> [<name> ...]                      # not of the form t<digits>, no ':'
    TRANSITIONS:
    <id> Inner | <label> [| <weight>]
    <id> In  <msg> <sender> <receiver> | <label> [| <weight>]
    <id> Out <msg> <sender> <receiver> | <label> [| <weight>]
    ARCS:
    <place> -> t<id>
    t<id> -> <place>
    INIT:
    mark <place>
    msg <msg> <sender> <receiver>

A section header is a single word followed by a colon.  Sections may
appear in any order but each at most once; unknown headers are rejected.  Weights are rationals such as ``1`` or ``3/2``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .petri import (
    LabeledNet,
    Message,
    NetError,
    Transition,
    TransitionKind,
    build_net,
)

SECTIONS = ("PLACES", "TRANSITIONS", "ARCS", "INIT")
_TID = re.compile(r"^t(\d+)$")


def _node(tok: str, lineno: int):
    m = _TID.match(tok)
    if m:
        return int(m.group(1))
    if not tok:
        raise NetError(f"line {lineno}: empty arc endpoint")
    return tok


def parse_net(text: str, *, require_messages: bool = False) -> LabeledNet:
    section = None
    seen = set()
    places, transitions, arcs, marked, messages = [], [], [], [], []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.endswith(":") and " " not in line:
            name = line[:-1]
            if name not in SECTIONS:
                raise NetError(f"line {lineno}: unknown section {name!r}")
            if name in seen:
                raise NetError(f"line {lineno}: section {name} repeated")
            seen.add(name)
            section = name
            continue
        if section is None:
            raise NetError(f"line {lineno}: content before any section header")

        if section == "PLACES":
            for name in line.split():
                if _TID.match(name) or ":" in name:
                    raise NetError(f"line {lineno}: place name {name!r} is reserved (t<digits> or contains ':')")
                places.append(name)
        elif section == "TRANSITIONS":
            transitions.append(_parse_transition(line, lineno))
        elif section == "ARCS":
            parts = [p.strip() for p in line.split("->")]
            if len(parts) != 2:
                raise NetError(f"line {lineno}: expected '<src> -> <dst>'")
            arcs.append((_node(parts[0], lineno), _node(parts[1], lineno)))
        elif section == "INIT":
            head, *rest = line.split()
            if head == "mark" and len(rest) == 1:
                marked.append(rest[0])
            elif head == "msg" and len(rest) == 3:
                messages.append(Message(*rest))
            else:
                raise NetError(f"line {lineno}: expected 'mark <place>' or 'msg <m> <s> <r>'")

    return build_net(places, transitions, arcs, marked, messages,
                     require_messages=require_messages)


def _parse_transition(line: str, lineno: int) -> Transition:
    head, *tail = [p.strip() for p in line.split("|")]
    if not tail or not tail[0]:
        raise NetError(f"line {lineno}: transition needs '| <label>'")
    label = tail[0]
    weight = Fraction(1)
    if len(tail) > 1:
        try:
            weight = Fraction(tail[1])
        except (ValueError, ZeroDivisionError):
            raise NetError(f"line {lineno}: bad weight {tail[1]!r}") from None
    if len(tail) > 2:
        raise NetError(f"line {lineno}: too many '|' fields")
    toks = head.split()
    if len(toks) < 2:
        raise NetError(f"line {lineno}: expected '<id> <kind> ...'")
    try:
        tid = int(toks[0].lstrip("t"))
    except ValueError:
        raise NetError(f"line {lineno}: bad transition id {toks[0]!r}") from None
    kind = TransitionKind.parse(toks[1])
    msg_toks = toks[2:]
    if msg_toks and len(msg_toks) != 3:
        raise NetError(f"line {lineno}: message must be '<msg> <sender> <receiver>'")
    try:
        message = Message(*msg_toks) if msg_toks else None
        return Transition(tid, kind, label, message, weight)
    except NetError as exc:
        raise NetError(f"line {lineno}: {exc}") from None


def format_net(net: LabeledNet) -> str:
    """Inverse of :func:`parse_net` (up to ordering and comments)."""
    out = ["PLACES:"]
    out += net.place_names
    out.append("TRANSITIONS:")
    for t in net.transitions:
        msg = f" {t.message.msg} {t.message.sender} {t.message.receiver}" if t.message else ""
        w = "" if t.weight == 1 else f" | {t.weight}"
        out.append(f"{t.id} {t.kind.value}{msg} | {t.label}{w}")
    out.append("ARCS:")
    order = {n: k for k, n in enumerate(net.place_names)}

    def arc_key(a):
        if a.place_to_transition:
            return (a.dst, 0, order[a.src])
        return (a.src, 1, order[a.dst])

    for a in sorted(net.arcs, key=arc_key):
        if a.place_to_transition:
            out.append(f"{a.src} -> t{a.dst}")
        else:
            out.append(f"t{a.src} -> {a.dst}")
    out.append("INIT:")
    out += [f"mark {p}" for p in net.place_names if p in net.initial_marking]
    for m, c in net.initial_messages:
        out += [f"msg {m.msg} {m.sender} {m.receiver}"] * c
    return "\n".join(out) + "\n"


def load_net(path, **kw) -> LabeledNet:
    with open(path, encoding="utf-8") as fh:
        return parse_net(fh.read(), **kw)
