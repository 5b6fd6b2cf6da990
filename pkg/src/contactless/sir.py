"""SIR dynamics and the closed-form quantities derived from them.

    ds/dt = -gamma * i * s
    di/dt =  gamma * i * s - alpha * i
    dr/dt =  alpha * i

with contact ratio ``q = gamma / alpha``.  Along any trajectory
``i + s - ln(s) / q`` is conserved, which gives the peak prevalence and
the final epidemic size without integrating.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass

import numpy as np


class IntegrationError(ArithmeticError):
    pass


class BracketError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SirParams:
    gamma: float
    alpha: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")

    @classmethod
    def from_ratio(cls, q: float, alpha: float) -> "SirParams":
        return cls(gamma=q * alpha, alpha=alpha)


@dataclass(frozen=True)
class SirState:
    s: float
    i: float
    r: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        for name in ("s", "i", "r"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v!r}")

    @property
    def total(self) -> float:
        return self.s + self.i + self.r


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    params: SirParams
    dt: float

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.i))

    @property
    def peak_i(self) -> float:
        return float(self.i[self.peak_index])

    @property
    def peak_t(self) -> float:
        return float(self.t[self.peak_index])

    @property
    def total(self) -> np.ndarray:
        return self.s + self.i + self.r

    def final(self) -> SirState:
        return SirState(float(self.s[-1]), float(self.i[-1]), float(self.r[-1]),
                        float(self.t[-1]))

    def to_csv(self, every: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "s", "i", "r"])
        idx = list(range(0, len(self.t), every))
        if idx[-1] != len(self.t) - 1:
            idx.append(len(self.t) - 1)
        for k in idx:
            w.writerow([repr(float(self.t[k])), repr(float(self.s[k])),
                        repr(float(self.i[k])), repr(float(self.r[k]))])
        return buf.getvalue()


def derivatives(state: SirState, params: SirParams) -> tuple[float, float, float]:
    flow_in = params.gamma * state.i * state.s
    flow_out = params.alpha * state.i
    return -flow_in, flow_in - flow_out, flow_out


def integrate(params: SirParams, init: SirState, t_end: float, dt: float) -> Trajectory:
    """Classical fourth-order Runge-Kutta with a fixed step.

    Samples are taken at ``init.t + k*dt``; when ``t_end`` is not a whole
    number of steps away the last step is shortened to land on it.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < init.t:
        raise ValueError("t_end must not precede the initial time")
    span = t_end - init.t
    n = math.ceil(span / dt - 1e-9) if span > 0 else 0

    g, a = params.gamma, params.alpha
    s, i, r = init.s, init.i, init.r
    S = [s]
    I = [i]
    R = [r]
    h = dt
    h2 = dt / 2
    h6 = dt / 6
    for k in range(n):
        if k == n - 1:
            h = span - (n - 1) * dt
            h2, h6 = h / 2, h / 6
        f1 = g * i * s
        a1 = -f1
        b1 = f1 - a * i
        c1 = a * i
        s2, i2 = s + h2 * a1, i + h2 * b1
        f2 = g * i2 * s2
        a2 = -f2
        b2 = f2 - a * i2
        c2 = a * i2
        s3, i3 = s + h2 * a2, i + h2 * b2
        f3 = g * i3 * s3
        a3 = -f3
        b3 = f3 - a * i3
        c3 = a * i3
        s4, i4 = s + h * a3, i + h * b3
        f4 = g * i4 * s4
        s += h6 * (a1 + 2 * a2 + 2 * a3 - f4)
        i += h6 * (b1 + 2 * b2 + 2 * b3 + f4 - a * i4)
        r += h6 * (c1 + 2 * c2 + 2 * c3 + a * i4)
        if not (math.isfinite(s) and math.isfinite(i) and math.isfinite(r)):
            raise IntegrationError(f"non-finite state at step {k + 1}")
        S.append(s)
        I.append(i)
        R.append(r)

    t = init.t + dt * np.arange(n + 1, dtype=float)
    if n:
        t[-1] = t_end
    return Trajectory(t, np.array(S), np.array(I), np.array(R), params, dt)


def contact_ratio(params: SirParams) -> float:
    return params.gamma / params.alpha


@dataclass(frozen=True)
class Threshold:
    value: float          # gamma * s0 / alpha
    epidemic: bool        # value > 1, strictly
    literal_ratio: float  # alpha / gamma as written in the model assumptions; inf when gamma == 0


def epidemic_threshold(params: SirParams, s0: float) -> Threshold:
    """Initial growth test: infections rise at t=0 iff ``gamma*s0/alpha > 1``.

    ``literal_ratio`` is ``alpha/gamma``, reported as-is for reference; it
    only matches the growth test when ``s0`` is close to 1.
    """
    if s0 < 0:
        raise ValueError("s0 must be >= 0")
    value = params.gamma * s0 / params.alpha
    literal = math.inf if params.gamma == 0 else params.alpha / params.gamma
    return Threshold(value, value > 1, literal)


def first_integral(state: SirState, q: float) -> float:
    if state.s <= 0:
        raise ValueError("first integral needs s > 0")
    if q <= 0:
        raise ValueError("q must be positive")
    return state.i + state.s - math.log(state.s) / q


def i_max(params: SirParams, init: SirState) -> float:
    """Peak number of infectious.

    When ``s0 <= 1/q`` (or nobody is infectious) infections only decline
    and the peak is the initial value.
    """
    q = contact_ratio(params)
    s0, i0 = init.s, init.i
    if i0 <= 0 or q <= 0 or q * s0 <= 1:
        return i0
    return i0 + s0 - (1 + math.log(q * s0)) / q


@dataclass(frozen=True)
class FinalSize:
    s_end: float
    r_end: float
    residual: float
    iterations: int


def final_size(params: SirParams, init: SirState) -> FinalSize:
    """Susceptible and removed mass left once the outbreak dies out.

    Solves ``S - ln(S)/q = i0 + s0 - ln(s0)/q`` by bisection on
    ``(0, min(s0, 1/q)]``, where the left side is strictly decreasing.
    ``r_end`` counts everyone removed by the end, including ``init.r``.
    Without transmission (``q == 0``) nobody new is infected and
    ``s_end = s0`` exactly.
    """
    q = contact_ratio(params)
    s0, i0 = init.s, init.i
    if not i0 > 0:
        raise ValueError("final size needs i0 > 0")
    if q == 0:
        return FinalSize(s0, i0 + init.r, 0.0, 0)
    if not s0 > 0:
        return FinalSize(0.0, init.total, 0.0, 0)

    target = i0 + s0 - math.log(s0) / q

    def f(x):
        return x - math.log(x) / q - target

    hi = min(s0, 1 / q)
    tiny = sys.float_info.min
    lo = hi * sys.float_info.epsilon
    f_hi, f_lo = f(hi), f(lo)
    while f_lo <= 0 and lo > tiny:
        lo = max(lo * 1e-16, tiny)
        f_lo = f(lo)
    if not (f_lo > 0 > f_hi):
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}")

    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        it += 1
        if fm == 0:
            lo = hi = mid
            break
        if fm > 0:
            lo = mid
        else:
            hi = mid
    root = lo if abs(f(lo)) <= abs(f(hi)) else hi
    s_end = root
    r_end = i0 + s0 - s_end + init.r
    return FinalSize(s_end, r_end, abs(f(root)), it)


def analytics(params: SirParams, init: SirState) -> dict:
    """Every closed-form quantity for one parameter set, JSON-ready."""
    q = contact_ratio(params)
    th = epidemic_threshold(params, init.s)
    out = {
        "gamma": params.gamma,
        "alpha": params.alpha,
        "s0": init.s,
        "i0": init.i,
        "r0_initial": init.r,
        "q": q,
        "threshold": th.value,
        "epidemic": th.epidemic,
        "literal_ratio_alpha_over_gamma": None if math.isinf(th.literal_ratio) else th.literal_ratio,
        "i_max": i_max(params, init),
    }
    if init.i > 0:
        fs = final_size(params, init)
        out.update(s_end=fs.s_end, r_end=fs.r_end, final_size_residual=fs.residual)
    if init.s > 0 and q > 0:
        out["first_integral"] = first_integral(init, q)
    return out
