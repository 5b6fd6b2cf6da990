"""Scenario files: ``key = value`` lines grouped in ``[store]``, ``[policy]``
and ``[epi]`` sections.

Store keys are the :class:`~contactless.contact.StoreConfig` fields, with
dwell ranges and zone caps written per zone::

    [store]
    arrival_rate = 0.3
    capacity = 12
    dwell.purchasing = 15, 45
    zone_cap.purchasing = 8
    zone_cap.payment = none      # drop a default cap

Missing keys keep their defaults.  Unknown sections or keys are errors.
"""

from __future__ import annotations

from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field

from .contact import DEFAULT_DWELL, DEFAULT_ZONE_CAPS, IN_STORE, StoreConfig
from .store import CustomerPolicy, policy_from_mapping

EPI_KEYS = ("gamma", "alpha", "s0", "i0", "t_end", "dt")
EPI_DEFAULTS = {"gamma": 0.5, "alpha": 0.2, "s0": 0.99, "i0": 0.01, "t_end": 200.0, "dt": 1e-3}


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    store: StoreConfig = field(default_factory=StoreConfig)
    policy: CustomerPolicy = field(default_factory=CustomerPolicy)
    epi: dict = field(default_factory=lambda: dict(EPI_DEFAULTS))

    def to_dict(self) -> dict:
        return {"store": self.store.to_dict(), "policy": self.policy.to_dict(),
                "epi": dict(self.epi)}


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def store_from_mapping(section) -> StoreConfig:
    kw = {}
    dwell = dict(DEFAULT_DWELL)
    caps = dict(DEFAULT_ZONE_CAPS)
    for key, raw in section.items():
        if key.startswith("dwell."):
            zone = key[len("dwell."):]
            if zone not in IN_STORE:
                raise ConfigError(f"unknown zone in {key!r}")
            parts = [float(x) for x in str(raw).replace(",", " ").split()]
            if len(parts) != 2:
                raise ConfigError(f"{key} needs 'low, high'")
            dwell[zone] = tuple(parts)
        elif key.startswith("zone_cap."):
            zone = key[len("zone_cap."):]
            if zone not in IN_STORE:
                raise ConfigError(f"unknown zone in {key!r}")
            if str(raw).strip().lower() == "none":
                caps.pop(zone, None)
            else:
                caps[zone] = int(raw)
        elif key in ("arrival_rate", "duration", "contact_threshold"):
            kw[key] = float(raw)
        elif key == "capacity":
            kw[key] = int(raw)
        elif key == "queue_contacts":
            kw[key] = _bool(str(raw))
        else:
            raise ConfigError(f"unknown [store] key {key!r}")
    try:
        return StoreConfig(dwell=dwell, zone_caps=caps, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def store_from_dict(d: dict) -> StoreConfig:
    """Rebuild a StoreConfig from :meth:`StoreConfig.to_dict` output."""
    return StoreConfig(
        arrival_rate=d["arrival_rate"],
        capacity=d["capacity"],
        duration=d["duration"],
        contact_threshold=d["contact_threshold"],
        dwell={z: tuple(v) for z, v in d["dwell"].items()},
        zone_caps=dict(d["zone_caps"]),
        queue_contacts=d["queue_contacts"],
    )


def parse_scenario(text: str) -> Scenario:
    cp = ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except ConfigParserError as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - {"store", "policy", "epi"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    sc = Scenario()
    if cp.has_section("store"):
        sc.store = store_from_mapping(cp["store"])
    if cp.has_section("policy"):
        try:
            sc.policy = policy_from_mapping(cp["policy"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if cp.has_section("epi"):
        for key, raw in cp["epi"].items():
            if key not in EPI_KEYS:
                raise ConfigError(f"unknown [epi] key {key!r}")
            sc.epi[key] = float(raw)
    return sc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
