"""Command-line driver.

Every run writes its outputs plus a ``manifest.json`` into ``--out``.  The
manifest holds the fully resolved inputs, so ``contactless rerun`` can
reproduce the outputs byte for byte without the original files.

Exit codes: 0 success, 1 invalid input or failed verification, 2 internal
error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import tempfile

from . import __version__, contact, sir
from .config import EPI_DEFAULTS, ConfigError, Scenario, parse_scenario, store_from_dict
from .netfile import parse_net
from .petri import NetError, is_workflow_net, reachability
from .store import (
    GOALS,
    CustomerPolicy,
    build_store_net,
    enumerate_traces,
    parse_policy,
    traces_bundle,
    traces_csv,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- per-subcommand work: resolved config in, {filename: text} out ----------


def run_verify(cfg: dict) -> tuple[dict, bool]:
    net = parse_net(cfg["net"]) if cfg["net"] is not None else build_store_net()
    wf = is_workflow_net(net, max_nodes=cfg["max_nodes"], pool_limit=cfg["pool_limit"])
    _, reach = reachability(net, max_nodes=cfg["max_nodes"], pool_limit=cfg["pool_limit"])
    ok = (wf["sound"] and not reach["deadlocks"] and reach["terminal_exclusive"]
          and all(g["reachable"] for g in reach["goals"].values()))
    report = {"ok": ok, "workflow_net": wf, "reachability": reach}
    return {"report.json": dumps(report)}, ok


def run_traces(cfg: dict) -> tuple[dict, bool]:
    traces = enumerate_traces(build_store_net(), cfg["loop_bound"])
    counts = {g: sum(t.terminal == g for t in traces) for g in GOALS}
    summary = {"loop_bound": cfg["loop_bound"], "total": len(traces), "per_goal": counts}
    return {"traces.csv": traces_csv(traces), "traces.json": traces_bundle(traces),
            "summary.json": dumps(summary)}, True


def run_epi(cfg: dict) -> tuple[dict, bool]:
    params = sir.SirParams(cfg["gamma"], cfg["alpha"])
    init = sir.SirState(cfg["s0"], cfg["i0"])
    traj = sir.integrate(params, init, cfg["t_end"], cfg["dt"])
    out = sir.analytics(params, init)
    fin = traj.final()
    total0 = init.total
    out["trajectory"] = {
        "samples": len(traj.t),
        "peak_i": traj.peak_i,
        "peak_t": traj.peak_t,
        "s_final": fin.s,
        "i_final": fin.i,
        "r_final": fin.r,
        "max_conservation_drift": float(abs(traj.total - total0).max()),
    }
    return {"trajectory.csv": traj.to_csv(cfg["every"]), "analytics.json": dumps(out)}, True


def _scenario_parts(cfg):
    return store_from_dict(cfg["store"]), CustomerPolicy(**cfg["policy"])


def run_store(cfg: dict) -> tuple[dict, bool]:
    store_cfg, policy = _scenario_parts(cfg)
    rep = contact.run_store_day(build_store_net(), store_cfg, policy,
                                cfg["resilience"], cfg["seed"])
    return {"contact_report.json": dumps(rep.to_json()),
            "contacts.csv": rep.events_csv()}, True


def run_couple(cfg: dict) -> tuple[dict, bool]:
    store_cfg, policy = _scenario_parts(cfg)
    (on, off), = contact.paired_runs(build_store_net(), store_cfg, policy, [cfg["seed"]])
    epi = cfg["epi"]
    params = sir.SirParams(epi["gamma"], epi["alpha"])
    init = sir.SirState(epi["s0"], epi["i0"])
    q_base = sir.contact_ratio(params)
    zero_base = off.mean_contacts_per_customer <= 0
    if zero_base:
        q_eff = q_base
    else:
        q_eff = contact.effective_q(q_base, on, off)
    cmp = contact.compare_outbreaks(params, init, q_base, q_eff)
    result = cmp.to_json()
    result["zero_baseline_contacts"] = zero_base
    result["mean_contacts_on"] = on.mean_contacts_per_customer
    result["mean_contacts_off"] = off.mean_contacts_per_customer
    return {
        "report_on.json": dumps(on.to_json()),
        "report_off.json": dumps(off.to_json()),
        "contacts_on.csv": on.events_csv(),
        "contacts_off.csv": off.events_csv(),
        "comparison.json": dumps(result),
    }, True


RUNNERS = {
    "verify": run_verify,
    "traces": run_traces,
    "epi": run_epi,
    "store": run_store,
    "couple": run_couple,
}


# -- argument handling -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contactless", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def out(sp):
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")

    v = sub.add_parser("verify", help="workflow-net checks and reachability report")
    v.add_argument("--net", help="net description file (default: built-in store net)")
    v.add_argument("--max-nodes", type=int, default=100_000)
    v.add_argument("--pool-limit", type=int, default=4)
    out(v)

    t = sub.add_parser("traces", help="enumerate source-to-goal traces of the store net")
    t.add_argument("--loop-bound", type=int, default=0)
    out(t)

    e = sub.add_parser("epi", help="integrate the SIR model and report analytic quantities")
    e.add_argument("--config", help="scenario file; its [epi] section supplies defaults")
    for key in ("gamma", "alpha", "s0", "i0", "t_end", "dt"):
        e.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    e.add_argument("--every", type=int, default=1, help="write every Nth sample")
    out(e)

    for name, helptext in (("store", "simulate one store day"),
                           ("couple", "store day with and without resilience, then SIR")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--seed", type=int)
        s.add_argument("--config", help="scenario file with [store]/[policy]/[epi] sections")
        s.add_argument("--policy", help="policy file (key = value); replaces [policy]")
        s.add_argument("--arrival-rate", type=float)
        s.add_argument("--capacity", type=int)
        s.add_argument("--duration", type=float)
        s.add_argument("--contact-threshold", type=float)
        if name == "store":
            s.add_argument("--resilience", choices=("on", "off"), default="on")
        out(s)

    r = sub.add_parser("rerun", help="reproduce a previous run from its manifest")
    r.add_argument("manifest")
    out(r)
    return p


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _override(base: dict, key: str, flag_value, notes: list, section: str):
    if flag_value is None:
        return
    old = base.get(key)
    if old is not None and old != flag_value:
        notes.append(f"--{key.replace('_', '-')}={flag_value} overrides [{section}] {key} = {old}")
    base[key] = flag_value


def resolve(args) -> tuple[dict, list]:
    notes = []
    cmd = args.command
    if cmd == "verify":
        text = _read(args.net) if args.net else None
        return {"net": text, "max_nodes": args.max_nodes, "pool_limit": args.pool_limit}, notes
    if cmd == "traces":
        if args.loop_bound < 0:
            raise UsageError("--loop-bound must be >= 0")
        return {"loop_bound": args.loop_bound}, notes
    if cmd == "epi":
        sc = parse_scenario(_read(args.config)) if args.config else Scenario()
        cfg = dict(EPI_DEFAULTS)
        cfg.update(sc.epi)
        for key in ("gamma", "alpha", "s0", "i0", "t_end", "dt"):
            _override(cfg, key, getattr(args, key), notes if args.config else [], "epi")
        if args.every < 1:
            raise UsageError("--every must be >= 1")
        cfg["every"] = args.every
        return cfg, notes
    # store / couple
    if args.seed is None:
        raise UsageError(f"{cmd} needs --seed (all randomness comes from it)")
    sc = parse_scenario(_read(args.config)) if args.config else Scenario()
    store_d = sc.store.to_dict()
    for key in ("arrival_rate", "capacity", "duration", "contact_threshold"):
        _override(store_d, key, getattr(args, key), notes if args.config else [], "store")
    policy = sc.policy
    if args.policy:
        if args.config:
            notes.append(f"--policy {args.policy} replaces the [policy] section of the config")
        try:
            policy = parse_policy(_read(args.policy))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    store_from_dict(store_d)  # validate
    cfg = {"seed": args.seed, "store": store_d, "policy": policy.to_dict()}
    if cmd == "store":
        cfg["resilience"] = args.resilience == "on"
    else:
        cfg["epi"] = dict(sc.epi)
    return cfg, notes


def execute(command: str, cfg: dict, out_dir: str, notes=()) -> tuple[dict, bool]:
    files, ok = RUNNERS[command](cfg)
    for name, text in files.items():
        write_atomic(os.path.join(out_dir, name), text)
    manifest = {
        "tool": "contactless",
        "version": __version__,
        "subcommand": command,
        "config": cfg,
        "seed": cfg.get("seed"),
        "outputs": sorted(files),
        "notes": list(notes),
    }
    write_atomic(os.path.join(out_dir, "manifest.json"), dumps(manifest))
    return files, ok


_ECHO = {"epi": "analytics.json", "couple": "comparison.json", "traces": "summary.json"}


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "rerun":
            manifest = json.loads(_read(args.manifest))
            command, cfg = manifest["subcommand"], manifest["config"]
            if command not in RUNNERS:
                raise UsageError(f"manifest names unknown subcommand {command!r}")
            notes = manifest.get("notes", [])
        else:
            cfg, notes = resolve(args)
            command = args.command
        for n in notes:
            print(f"note: {n}", file=sys.stderr)
        files, ok = execute(command, cfg, args.out, notes)
        if command in _ECHO:
            sys.stdout.write(files[_ECHO[command]])
        print(f"{command}: wrote outputs to {args.out}" + ("" if ok else " (checks FAILED)"))
        return 0 if ok else 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ConfigError, NetError, ValueError, KeyError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
