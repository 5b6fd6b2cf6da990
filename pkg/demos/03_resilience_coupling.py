"""Does the resilient store actually cut contacts, and what does that buy?

The same customers (same seed) shop twice: once with the entrance gate and
zone caps, once without.  The ratio of contacts per customer scales the
contact ratio q, and the SIR formulas turn that into a smaller outbreak.
"""
from pathlib import Path

import numpy as np

from contactless.config import load_scenario
from contactless.contact import compare_outbreaks, effective_q, paired_runs
from contactless.sir import SirParams, SirState, contact_ratio
from contactless.store import build_store_net

scenario = load_scenario(Path(__file__).with_name("demo.cfg"))
net = build_store_net()

pairs = paired_runs(net, scenario.store, scenario.policy, seeds=range(30))
on = np.array([a.total_contacts for a, _ in pairs])
off = np.array([b.total_contacts for _, b in pairs])
print(f"contacts per day: {off.mean():.0f} without resilience, {on.mean():.0f} with")
print(f"every day better or equal: {bool(np.all(on <= off))}")

# %% Where the contacts happen.
a, b = pairs[0]
print("by zone (off):", {z: n for z, n in b.per_zone.items() if n})
print("by zone (on): ", {z: n for z, n in a.per_zone.items() if n})
print("largest crowd in the store:", b.max_occupancy, "->", a.max_occupancy)

# %% Feed the reduction into the epidemic model.
epi = scenario.epi
params = SirParams(epi["gamma"], epi["alpha"])
init = SirState(epi["s0"], epi["i0"])
q_base = contact_ratio(params)
q_eff = np.mean([effective_q(q_base, a, b) for a, b in pairs])
cmp = compare_outbreaks(params, init, q_base, q_eff)
print(f"\nq {q_base:.2f} -> {q_eff:.2f}")
print(f"peak infectious {cmp.i_max_base:.3f} -> {cmp.i_max_eff:.3f}")
print(f"ever infected   {cmp.r_end_base:.3f} -> {cmp.r_end_eff:.3f}")
