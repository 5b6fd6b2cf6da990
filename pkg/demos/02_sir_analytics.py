"""Peak and final size of an outbreak, with and without integrating.

Along every SIR trajectory ``i + s - ln(s)/q`` stays fixed, so the peak
and the final size follow from the starting point alone.  Here the closed
forms are set beside a fourth-order Runge-Kutta run.
"""
import numpy as np

from contactless.sir import (SirParams, SirState, analytics, epidemic_threshold,
                             final_size, i_max, integrate)

params = SirParams(gamma=0.5, alpha=0.2)   # q = 2.5
init = SirState(s=0.99, i=0.01)

tr = integrate(params, init, t_end=200, dt=1e-3)
print(f"peak from the formula  {i_max(params, init):.8f}")
print(f"peak from integration  {tr.peak_i:.8f} at t = {tr.peak_t:.2f}")
fs = final_size(params, init)
print(f"never infected         {fs.s_end:.8f} (integrated {tr.final().s:.8f})")
print(f"s+i+r drift            {np.abs(tr.total - 1).max():.1e}")

# %% How peak and final size fall as the contact ratio drops.
print("\n   q   threshold  epidemic   i_max    r_end")
for q in (4.0, 3.0, 2.5, 2.0, 1.5, 1.2, 1.0, 0.8):
    p = SirParams.from_ratio(q, 0.2)
    th = epidemic_threshold(p, init.s)
    print(f"{q:5.1f}  {th.value:8.3f}  {str(th.epidemic):>8}  {i_max(p, init):.4f}  "
          f"{final_size(p, init).r_end:.4f}")

# %% Everything the CLI's epi command reports, in one dict.
for k, v in analytics(params, init).items():
    print(f"  {k:32s} {v}")
