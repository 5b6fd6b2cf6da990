"""Walking customers through the contactless store.

The store is a labeled Petri net: every exchange between the customer and a
store system is one Out transition (the sender) followed by one In
transition (the receiver).  Run with ``python demos/01_store_workflow.py``.
"""
from collections import Counter

from contactless.petri import enabled, reachability, is_workflow_net
from contactless.store import CustomerPolicy, build_store_net, enumerate_traces, run_customer

net = build_store_net()
print(f"{len(net.places)} places, {len(net.transitions)} transitions")
print("source:", net.source_places(), " goals:", net.sink_places())

# %% The only thing a fresh customer can do is have their access request received.
s0 = net.initial_state()
print("enabled at the door:", enabled(net, s0))

# %% Soundness: every state can still finish, and nothing is dead.
wf = is_workflow_net(net)
print("sound workflow net:", wf["sound"])

graph, rep = reachability(net)
for goal, info in rep["goals"].items():
    print(f"  {goal}: shortest witness {info['witness']}")

# %% Ignoring the capacity wait there are six ways through the store.
for tr in enumerate_traces(net, loop_bound=0):
    msgs = [m.msg for _, m in tr.firings if m]
    print(f"  {tr.terminal}  {' > '.join(dict.fromkeys(msgs))}")

# %% A busy afternoon: a few customers without masks, some wanting delivery.
policy = CustomerPolicy(p_store_full=0.3, p_temp_fail=0.02, p_mask_refuse=0.05,
                        p_delivery=0.25, p_service=0.1)
outcomes = Counter(run_customer(net, policy, seed).terminal for seed in range(2000))
print("2000 customers:", dict(sorted(outcomes.items())))
waits = Counter(run_customer(net, policy, seed).wait_loops for seed in range(2000))
print("times told the store is full:", dict(sorted(waits.items())))
