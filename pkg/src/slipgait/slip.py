"""Hybrid spring-loaded-inverted-pendulum dynamics.

A point mass on a massless spring leg alternates between ballistic flight and
spring-leg stance.  Flight is advanced in closed form, stance with classical
RK4, and the phase transitions (touchdown, liftoff, apex) are localized by
bisection on the sign change of the corresponding event function.

Conventions used throughout the package:

* the touchdown angle ``alpha`` is measured from the vertical and the foot is
  placed ahead of the CoM, ``foot_x = x + r0*sin(alpha)``;
* a gait cycle starts at an apex (``vz = 0``) and runs
  flight -> touchdown -> stance -> liftoff -> flight -> next apex;
* with ``n_stance_legs`` identical legs in simultaneous contact the effective
  stance stiffness is ``n_stance_legs * k`` (parallel springs add).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .presets import GRAVITY, RobotPreset

# Bisection bracket width for event localization [s]; well below the 1e-9
# contract so that liftoff satisfies |r - r0| <= 1e-9 even at high leg speed.
EVENT_TIME_TOL = 1e-12
# Leg compressed to r <= BOTTOM_OUT_FRACTION*r0 aborts the cycle.
BOTTOM_OUT_FRACTION = 0.2
MAX_STANCE_TIME = 5.0
MAX_FLIGHT_TIME = 10.0


class Phase(Enum):
    FLIGHT = "flight"
    STANCE = "stance"


class EventKind(Enum):
    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"
    APEX = "apex"
    FALL = "fall"


class ParameterError(ValueError):
    """A template-model parameter is outside its domain."""


class PhaseError(ValueError):
    """A state was used in an operation that requires the other hybrid phase."""


class CycleFailed(RuntimeError):
    """A gait cycle could not be completed.

    ``reason`` is one of ``fall``, ``bottom_out``, ``no_liftoff``, ``grazing``,
    ``no_apex``; ``time``/``state`` locate the failure when available.
    """

    def __init__(self, reason: str, time: float | None = None, state=None):
        super().__init__(f"SLIP cycle failed: {reason}"
                         + (f" at t={time:.6f}" if time is not None else ""))
        self.reason = reason
        self.time = time
        self.state = state


@dataclass(frozen=True)
class SlipParams:
    """Template model parameters; ``k`` and ``k_rel`` are kept consistent."""

    m: float                # mass [kg]
    r0: float               # rest leg length / hip height [m]
    k: float                # spring stiffness of one leg [N/m]
    k_rel: float            # dimensionless spring constant
    n_stance_legs: int      # legs in simultaneous ground contact
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("m", "r0", "k", "k_rel", "g"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_stance_legs not in (1, 2):
            raise ParameterError(f"n_stance_legs must be 1 or 2, got {self.n_stance_legs}")
        k_expected = self.k_rel * self.m * self.g / self.r0
        if abs(self.k - k_expected) > 1e-12 * k_expected:
            raise ParameterError(
                f"inconsistent stiffness: k={self.k} but k_rel*m*g/r0={k_expected}")

    @property
    def k_eff(self) -> float:
        """Effective stance stiffness of the equivalent single leg."""
        return self.n_stance_legs * self.k


def slip_params_from_robot(m: float, r0: float, k_rel: float,
                           n_stance_legs: int, g: float = GRAVITY) -> SlipParams:
    """Build SLIP parameters from robot mass, hip height and relative stiffness."""
    if m <= 0 or r0 <= 0 or k_rel <= 0 or g <= 0:
        raise ParameterError("mass, hip height, relative stiffness and gravity must be positive")
    if n_stance_legs not in (1, 2):
        raise ParameterError(f"n_stance_legs must be 1 or 2, got {n_stance_legs}")
    return SlipParams(m=m, r0=r0, k=k_rel * m * g / r0, k_rel=k_rel,
                      n_stance_legs=n_stance_legs, g=g)


def slip_params_for(preset: RobotPreset) -> SlipParams:
    return slip_params_from_robot(preset.mass, preset.hip_height, preset.k_rel,
                                  preset.n_stance_legs)


@dataclass(frozen=True)
class SlipState:
    """Planar CoM state with hybrid phase tag; ``foot_x`` only in stance."""

    x: float
    z: float
    vx: float
    vz: float
    phase: Phase
    foot_x: float | None = None

    def leg_length(self) -> float:
        if self.phase is not Phase.STANCE or self.foot_x is None:
            raise PhaseError("leg length is only defined in stance")
        return math.hypot(self.x - self.foot_x, self.z)


@dataclass(frozen=True)
class SlipEvent:
    kind: EventKind
    time: float
    state: SlipState


def slip_energy(s: SlipState, p: SlipParams) -> float:
    """Total mechanical energy: kinetic + gravitational + spring potential."""
    e = 0.5 * p.m * (s.vx * s.vx + s.vz * s.vz) + p.m * p.g * s.z
    if s.phase is Phase.STANCE and s.foot_x is not None:
        r = s.leg_length()
        if r < p.r0:
            e += 0.5 * p.k_eff * (p.r0 - r) ** 2
    return e


# ---------------------------------------------------------------------------
# flight (closed form)
# ---------------------------------------------------------------------------

def flight_step(s: SlipState, dt: float, g: float = GRAVITY) -> SlipState:
    """Advance a flight state by ``dt`` using the exact ballistic solution."""
    if s.phase is not Phase.FLIGHT:
        raise PhaseError("flight_step requires a flight state")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return SlipState(
        x=s.x + s.vx * dt,
        z=s.z + s.vz * dt - 0.5 * g * dt * dt,
        vx=s.vx,
        vz=s.vz - g * dt,
        phase=Phase.FLIGHT,
    )


# ---------------------------------------------------------------------------
# stance dynamics
# ---------------------------------------------------------------------------

def stance_derivative(s: SlipState, p: SlipParams) -> np.ndarray:
    """Time derivative ``[dx, dz, dvx, dvz]`` of a stance state."""
    if s.phase is not Phase.STANCE or s.foot_x is None:
        raise PhaseError("stance_derivative requires a stance state with a foot position")
    dx = s.x - s.foot_x
    r = math.hypot(dx, s.z)
    if r > p.r0 * (1.0 + 1e-9):
        raise PhaseError(f"leg length {r} exceeds rest length {p.r0}: not in stance")
    a = p.k_eff * (p.r0 - r) / (p.m * r)
    return np.array([s.vx, s.vz, a * dx, a * s.z - p.g])


def grf(s: SlipState, p: SlipParams) -> np.ndarray:
    """Ground reaction force vector [N]; zero outside stance."""
    if s.phase is not Phase.STANCE or s.foot_x is None:
        return np.zeros(2)
    dx = s.x - s.foot_x
    r = math.hypot(dx, s.z)
    f = p.k_eff * (p.r0 - r)
    return np.array([f * dx / r, f * s.z / r])


@njit(cache=True)
def _stance_deriv(x, z, vx, vz, fx, keff, r0, inv_m, g):
    dx = x - fx
    r = math.sqrt(dx * dx + z * z)
    a = keff * (r0 - r) * inv_m / r
    return vx, vz, a * dx, a * z - g


@njit(cache=True)
def _stance_rk4(x, z, vx, vz, h, fx, keff, r0, inv_m, g):
    a1, b1, c1, d1 = _stance_deriv(x, z, vx, vz, fx, keff, r0, inv_m, g)
    h2 = 0.5 * h
    a2, b2, c2, d2 = _stance_deriv(x + h2 * a1, z + h2 * b1, vx + h2 * c1, vz + h2 * d1,
                                   fx, keff, r0, inv_m, g)
    a3, b3, c3, d3 = _stance_deriv(x + h2 * a2, z + h2 * b2, vx + h2 * c2, vz + h2 * d2,
                                   fx, keff, r0, inv_m, g)
    a4, b4, c4, d4 = _stance_deriv(x + h * a3, z + h * b3, vx + h * c3, vz + h * d3,
                                   fx, keff, r0, inv_m, g)
    s = h / 6.0
    return (x + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            z + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            vx + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
            vz + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4))


@njit(cache=True)
def _stance_scan(t_td, x, z, vx, vz, fx, keff, r0, inv_m, g, dt, j0,
                 store_stride, max_steps, min_r, tol_t):
    """Integrate stance on the global dt grid until liftoff or failure.

    Returns (status, n, ts, ys, t_end, y_end) where status is
    0=liftoff, 1=fall, 2=bottom_out, 3=no_liftoff, 4=grazing.
    Samples are stored at grid times (j0+k)*dt every ``store_stride`` steps.
    """
    cap = max_steps // store_stride + 4
    ts = np.empty(cap)
    ys = np.empty((cap, 4))
    n = 0
    y_end = np.empty(4)
    armed = False
    t_prev = t_td
    k = 0
    while k <= max_steps:
        tt = (j0 + k) * dt
        h = tt - t_prev
        if h > 1e-15:
            xn, zn, vxn, vzn = _stance_rk4(x, z, vx, vz, h, fx, keff, r0, inv_m, g)
        else:
            xn, zn, vxn, vzn = x, z, vx, vz
        dxn = xn - fx
        rn = math.sqrt(dxn * dxn + zn * zn)

        if zn <= 0.0 or vxn < 0.0:
            y_end[0], y_end[1], y_end[2], y_end[3] = xn, zn, vxn, vzn
            return 1, n, ts, ys, tt, y_end
        if rn <= min_r:
            y_end[0], y_end[1], y_end[2], y_end[3] = xn, zn, vxn, vzn
            return 2, n, ts, ys, tt, y_end

        if armed and rn >= r0:
            # liftoff inside (t_prev, tt]: bisect the substep length
            lo = 0.0
            hi = h
            bx, bz, bvx, bvz = xn, zn, vxn, vzn
            it = 0
            while hi - lo > tol_t and it < 200:
                mid = 0.5 * (lo + hi)
                mx, mz, mvx, mvz = _stance_rk4(x, z, vx, vz, mid, fx, keff, r0, inv_m, g)
                mdx = mx - fx
                if math.sqrt(mdx * mdx + mz * mz) >= r0:
                    hi = mid
                    bx, bz, bvx, bvz = mx, mz, mvx, mvz
                else:
                    lo = mid
                it += 1
            y_end[0], y_end[1], y_end[2], y_end[3] = bx, bz, bvx, bvz
            return 0, n, ts, ys, t_prev + hi, y_end

        if not armed:
            if rn < r0 - 1e-9:
                armed = True
            elif k >= 5:
                y_end[0], y_end[1], y_end[2], y_end[3] = xn, zn, vxn, vzn
                return 4, n, ts, ys, tt, y_end

        if k % store_stride == 0:
            ts[n] = tt
            ys[n, 0], ys[n, 1], ys[n, 2], ys[n, 3] = xn, zn, vxn, vzn
            n += 1
        x, z, vx, vz = xn, zn, vxn, vzn
        t_prev = tt
        k += 1
    y_end[0], y_end[1], y_end[2], y_end[3] = x, z, vx, vz
    return 3, n, ts, ys, t_prev, y_end


# ---------------------------------------------------------------------------
# full cycle
# ---------------------------------------------------------------------------

@dataclass
class _CycleData:
    """Raw arrays for one apex-to-apex cycle; internal fast path."""

    ts: np.ndarray          # sample times, apex at t=0
    ys: np.ndarray          # (n, 4) rows [x, z, vx, vz]
    stance: np.ndarray      # bool mask per sample
    foot_x: float
    t_td: float
    y_td: np.ndarray
    t_lo: float
    y_lo: np.ndarray
    t_apex: float
    y_apex: np.ndarray


def _bisect_touchdown(z0: float, h_td: float, g: float, t_hi: float) -> float:
    """Largest-t root of z0 - g t^2/2 = h_td on [0, t_hi], landed on the low side."""
    lo, hi = 0.0, t_hi
    for _ in range(200):
        if hi - lo <= EVENT_TIME_TOL:
            break
        mid = 0.5 * (lo + hi)
        if z0 - 0.5 * g * mid * mid <= h_td:
            hi = mid
        else:
            lo = mid
    return hi


def _run_cycle(x0: float, z0: float, vx0: float, alpha: float, p: SlipParams,
               dt: float, store_stride: int = 1) -> _CycleData:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (0.0 <= alpha < 0.5 * math.pi):
        raise ParameterError(f"touchdown angle must lie in [0, pi/2), got {alpha}")
    h_td = p.r0 * math.cos(alpha)
    if z0 < h_td - 1e-12:
        raise ParameterError(f"apex height {z0} below touchdown height {h_td}")

    g = p.g
    drop = max(z0 - h_td, 0.0)
    t_td = _bisect_touchdown(z0, h_td, g, math.sqrt(2.0 * drop / g) + dt)
    x_td = x0 + vx0 * t_td
    z_td = z0 - 0.5 * g * t_td * t_td
    vz_td = -g * t_td
    foot_x = x_td + p.r0 * math.sin(alpha)

    # descending flight samples on the grid (t = j*dt), apex included at t=0
    n_desc = int(math.floor((t_td - 1e-12) / dt))
    t_desc = np.arange(0, n_desc + 1, store_stride, dtype=np.float64) * dt
    y_desc = np.empty((t_desc.size, 4))
    y_desc[:, 0] = x0 + vx0 * t_desc
    y_desc[:, 1] = z0 - 0.5 * g * t_desc * t_desc
    y_desc[:, 2] = vx0
    y_desc[:, 3] = -g * t_desc

    j0 = int(math.floor(t_td / dt)) + 1
    max_steps = int(MAX_STANCE_TIME / dt) + 1
    status, n_st, ts_st, ys_st, t_end, y_end = _stance_scan(
        t_td, x_td, z_td, vx0, vz_td, foot_x, p.k_eff, p.r0, 1.0 / p.m, g,
        dt, j0, store_stride, max_steps, BOTTOM_OUT_FRACTION * p.r0, EVENT_TIME_TOL)
    if status != 0:
        reason = {1: "fall", 2: "bottom_out", 3: "no_liftoff", 4: "grazing"}[status]
        st = SlipState(y_end[0], y_end[1], y_end[2], y_end[3], Phase.STANCE, foot_x)
        raise CycleFailed(reason, t_end, st)
    t_lo = t_end
    y_lo = y_end.copy()

    vz_lo = y_lo[3]
    if vz_lo <= 1e-12:
        raise CycleFailed("no_apex", t_lo,
                          SlipState(y_lo[0], y_lo[1], y_lo[2], y_lo[3], Phase.STANCE, foot_x))
    t_apex = t_lo + vz_lo / g
    y_apex = np.array([y_lo[0] + y_lo[2] * (t_apex - t_lo),
                       y_lo[1] + 0.5 * vz_lo * vz_lo / g,
                       y_lo[2],
                       0.0])

    # ascending flight samples
    j_lo = int(math.floor(t_lo / dt)) + 1
    j_ap = int(math.floor((t_apex - 1e-12) / dt))
    if j_ap >= j_lo:
        t_asc = np.arange(j_lo, j_ap + 1, store_stride, dtype=np.float64) * dt
    else:
        t_asc = np.empty(0)
    rel = t_asc - t_lo
    y_asc = np.empty((t_asc.size, 4))
    y_asc[:, 0] = y_lo[0] + y_lo[2] * rel
    y_asc[:, 1] = y_lo[1] + vz_lo * rel - 0.5 * g * rel * rel
    y_asc[:, 2] = y_lo[2]
    y_asc[:, 3] = vz_lo - g * rel

    # assemble: descent, touchdown, stance grid, liftoff, ascent, apex
    y_td_arr = np.array([x_td, z_td, vx0, vz_td])
    ts = np.concatenate([t_desc, [t_td], ts_st[:n_st], [t_lo], t_asc, [t_apex]])
    ys = np.vstack([y_desc, y_td_arr[None, :], ys_st[:n_st], y_lo[None, :], y_asc,
                    y_apex[None, :]])
    stance = np.zeros(ts.size, dtype=bool)
    i_td = t_desc.size
    i_lo = i_td + 1 + n_st
    stance[i_td:i_lo + 1] = True

    # drop grid samples that coincide with an inserted event time
    keep = np.ones(ts.size, dtype=bool)
    dup = np.flatnonzero(np.diff(ts) <= 1e-12)
    keep[dup] = False
    return _CycleData(ts[keep], ys[keep], stance[keep], foot_x,
                      t_td, y_td_arr, t_lo, y_lo, t_apex, y_apex)


def _require_apex(apex: SlipState, p: SlipParams, alpha: float):
    if apex.phase is not Phase.FLIGHT:
        raise PhaseError("cycle must start from a flight (apex) state")
    if abs(apex.vz) > 1e-6:
        raise PhaseError(f"apex must have vz = 0, got {apex.vz}")
    if apex.z < p.r0 * math.cos(alpha) - 1e-12:
        raise ParameterError("apex below touchdown height")


def integrate_cycle(apex: SlipState, alpha: float, p: SlipParams, dt: float
                    ) -> tuple[list[tuple[float, SlipState]], list[SlipEvent]]:
    """Integrate one full gait cycle from an apex state.

    Returns the trajectory sampled at multiples of ``dt`` with the exact
    touchdown/liftoff/apex states inserted, plus the event list in order.
    Raises :class:`CycleFailed` when the cycle cannot be completed.
    """
    _require_apex(apex, p, alpha)
    data = _run_cycle(apex.x, apex.z, apex.vx, alpha, p, dt)

    samples: list[tuple[float, SlipState]] = []
    for t, row, in_stance in zip(data.ts, data.ys, data.stance):
        phase = Phase.STANCE if in_stance else Phase.FLIGHT
        foot = data.foot_x if in_stance else None
        samples.append((float(t), SlipState(row[0], row[1], row[2], row[3], phase, foot)))

    def _st(y, phase, foot=None):
        return SlipState(y[0], y[1], y[2], y[3], phase, foot)

    events = [
        SlipEvent(EventKind.TOUCHDOWN, data.t_td, _st(data.y_td, Phase.STANCE, data.foot_x)),
        SlipEvent(EventKind.LIFTOFF, data.t_lo, _st(data.y_lo, Phase.STANCE, data.foot_x)),
        SlipEvent(EventKind.APEX, data.t_apex, _st(data.y_apex, Phase.FLIGHT)),
    ]
    return samples, events


def apex_return_map(apex_z: float, apex_vx: float, alpha: float, p: SlipParams,
                    dt: float = 1e-4) -> tuple[float, float]:
    """Map one apex state to the next through a full cycle.

    Raises :class:`CycleFailed` on cycle failure and :class:`ParameterError`
    for touchdown angles outside (0, pi/2).
    """
    if not (0.0 < alpha < 0.5 * math.pi - 1e-9):
        raise ParameterError(f"touchdown angle must lie in (0, pi/2), got {alpha}")
    data = _run_cycle(0.0, apex_z, apex_vx, alpha, p, dt, store_stride=1_000_000)
    return float(data.y_apex[1]), float(data.y_apex[2])
