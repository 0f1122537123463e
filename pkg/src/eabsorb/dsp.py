"""Discrete-time controller realization and closed-loop time simulation.

The two control filters are discretized at a fixed sample rate, factored
into cascaded biquad sections for numerical robustness, and run against an
RK4 integration of the continuous two-state plant (membrane velocity and
displacement) with a configurable controller latency.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import DiscretizationError, DivergenceError, InvalidParameterError
from .model import DriverModel
from .rational import RationalTransfer

#: state norm (relative to the running input scale) that triggers the
#: divergence error in closed-loop simulation
DIVERGENCE_FACTOR = 1e9


class BiquadSection:
    """One direct-form-II-transposed second-order section.

    Coefficients follow H(z) = (b0 + b1 z^-1 + b2 z^-2) /
    (1 + a1 z^-1 + a2 z^-2); the two state variables persist across
    `process` calls.
    """

    __slots__ = ("b0", "b1", "b2", "a1", "a2", "_s1", "_s2")

    def __init__(self, b0: float, b1: float, b2: float, a1: float, a2: float):
        self.b0 = float(b0)
        self.b1 = float(b1)
        self.b2 = float(b2)
        self.a1 = float(a1)
        self.a2 = float(a2)
        self._s1 = 0.0
        self._s2 = 0.0

    def reset(self) -> None:
        self._s1 = 0.0
        self._s2 = 0.0

    @property
    def is_stable(self) -> bool:
        # Jury criterion for 1 + a1 z^-1 + a2 z^-2
        return abs(self.a2) < 1.0 and abs(self.a1) < 1.0 + self.a2

    def response(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zi = 1.0 / z
        num = self.b0 + self.b1 * zi + self.b2 * zi**2
        den = 1.0 + self.a1 * zi + self.a2 * zi**2
        return num / den

    def process(self, x: np.ndarray) -> np.ndarray:
        y = np.empty(len(x))
        b0, b1, b2, a1, a2 = self.b0, self.b1, self.b2, self.a1, self.a2
        s1, s2 = self._s1, self._s2
        for n, xn in enumerate(x):
            yn = b0 * xn + s1
            s1 = b1 * xn - a1 * yn + s2
            s2 = b2 * xn - a2 * yn
            y[n] = yn
        self._s1, self._s2 = s1, s2
        return y

    def step(self, x: float) -> float:
        y = self.b0 * x + self._s1
        self._s1 = self.b1 * x - self.a1 * y + self._s2
        self._s2 = self.b2 * x - self.a2 * y
        return y

    def coeffs(self) -> dict:
        return {"b0": self.b0, "b1": self.b1, "b2": self.b2, "a1": self.a1, "a2": self.a2}


class SosCascade:
    """Chain of biquad sections with a scalar gain at its input.

    The frequency response is gain times the product of the section
    responses.  Processing is streaming: internal states persist across
    blocks, so splitting a signal into blocks does not change the output.
    """

    def __init__(self, sections: list[BiquadSection], gain: float, fs: float):
        if fs <= 0:
            raise InvalidParameterError("sample rate must be strictly positive")
        self.sections = list(sections)
        self.gain = float(gain)
        self.fs = float(fs)

    @classmethod
    def zero(cls, fs: float) -> "SosCascade":
        """The all-zero filter (used when the cavity-pressure path is off)."""
        return cls([BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0)], 0.0, fs)

    def reset(self) -> None:
        for sec in self.sections:
            sec.reset()

    @property
    def is_stable(self) -> bool:
        return all(sec.is_stable for sec in self.sections)

    def process(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) * self.gain
        for sec in self.sections:
            y = sec.process(y)
        return y

    def step(self, x: float) -> float:
        y = x * self.gain
        for sec in self.sections:
            y = sec.step(y)
        return y

    def response(self, freqs_hz) -> np.ndarray:
        """Frequency response at physical frequencies (Hz)."""
        freqs = np.asarray(freqs_hz, dtype=float)
        z = np.exp(2j * np.pi * freqs / self.fs)
        h = np.full(z.shape, self.gain, dtype=complex)
        for sec in self.sections:
            h = h * sec.response(z)
        return h

    def response_z(self, z) -> np.ndarray:
        h = np.full(np.shape(z), self.gain, dtype=complex)
        for sec in self.sections:
            h = h * sec.response(z)
        return h

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "fs_hz": self.fs,
                "gain": self.gain,
                "sections": [sec.coeffs() for sec in self.sections],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SosCascade":
        d = json.loads(text)
        sections = [
            BiquadSection(s["b0"], s["b1"], s["b2"], s["a1"], s["a2"])
            for s in d["sections"]
        ]
        return cls(sections, float(d["gain"]), float(d["fs_hz"]))


# -- discretization -----------------------------------------------------------


def sos_partition(zeros, poles, gain: float, fs: float) -> SosCascade:
    """Factor a z-domain pole/zero/gain triple into a biquad cascade.

    Conjugate pole pairs are matched with the nearest zeros in the z plane;
    sections are ordered by ascending pole radius (the section closest to
    the unit circle runs last) and missing zeros in a section are zeros at
    the origin.  The scalar gain stays at the cascade input.
    """
    zeros = np.asarray(zeros, dtype=complex)
    poles = np.asarray(poles, dtype=complex)
    if zeros.size > poles.size:
        raise DiscretizationError("more zeros than poles: filter is not causal")
    if poles.size == 0:
        return SosCascade([BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0)], gain, fs)

    try:
        sos = scipy.signal.zpk2sos(zeros, poles, 1.0, pairing="nearest")
    except ValueError as exc:
        raise DiscretizationError(f"zero/pole pairing failed: {exc}") from exc

    sections = []
    for row in sos:
        b0, b1, b2, a0, a1, a2 = (float(x) for x in row)
        radius = np.max(np.abs(np.roots([a0, a1, a2]))) if (a1 or a2) else 0.0
        sections.append((radius, BiquadSection(b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0)))
    sections.sort(key=lambda t: t[0])
    return SosCascade([sec for _, sec in sections], gain, fs)


def _sk_refine(b: np.ndarray, a: np.ndarray, ct: RationalTransfer, fs: float):
    """Iterative weighted least-squares polish of a z-domain fit.

    Keeps the polynomial degrees of the seed, constrains the DC value to
    the exact continuous value, and reweights by the previous denominator
    (Sanathanan-Koerner style) so the effective error norm approaches the
    true relative response error.  Returns the seed unchanged if the polish
    ever produces an unstable denominator.
    """
    nb, na = len(b) - 1, len(a) - 1
    if na == 0:
        return b, a
    freqs = np.concatenate(
        [np.linspace(1.0, 1300.0, 400), np.geomspace(1300.0, 0.4 * fs, 121)[1:]]
    )
    weight = np.where(freqs <= 1300.0, 100.0, 1.0)
    h = ct(2j * np.pi * freqs)
    h0 = complex(ct(0.0))
    if not np.isfinite(h0) or abs(h0.imag) > 1e-9 * (abs(h0.real) + 1.0):
        return b, a  # no finite real DC value to pin
    h0 = h0.real
    zi = np.exp(-2j * np.pi * freqs / fs)
    zpow_b = np.stack([zi**k for k in range(1, nb + 1)], axis=1)
    zpow_a = np.stack([zi**k for k in range(1, na + 1)], axis=1)

    best_b, best_a = b, a
    a_cur = a.copy()
    for _ in range(30):
        a_val = np.polyval(a_cur[::-1], zi)  # A(z^-1), ascending coeffs
        w = weight / np.maximum(np.abs(a_val), 1e-12)
        # unknowns: b1..bnb, a1..ana, with b0 = h0*(1+sum a) - sum b
        cols_b = zpow_b - 1.0
        cols_a = h0 - h[:, None] * zpow_a
        mat = np.concatenate([cols_b, cols_a], axis=1) * w[:, None]
        rhs = (h - h0) * w
        mat_ri = np.concatenate([mat.real, mat.imag])
        rhs_ri = np.concatenate([rhs.real, rhs.imag])
        sol, _, _, _ = np.linalg.lstsq(mat_ri, rhs_ri, rcond=None)
        b_tail = sol[:nb]
        a_tail = sol[nb:]
        a_new = np.concatenate([[1.0], a_tail])
        if np.any(np.abs(np.roots(a_new)) >= 1.0):
            break
        b0 = h0 * (1.0 + a_tail.sum()) - b_tail.sum()
        b_new = np.concatenate([[b0], b_tail])
        best_b, best_a = b_new, a_new
        a_cur = a_new
    return best_b, best_a


def bilinear_discretize(ct: RationalTransfer, fs: float, refine: bool = True) -> SosCascade:
    """Map a continuous transfer to a biquad cascade at sample rate `fs`.

    The core substitution is s = 2*fs*(z-1)/(z+1) without frequency
    prewarping; with `refine` (the default) the coefficients are then
    polished by a DC-pinned weighted least-squares fit against the exact
    continuous response, which removes the transform's residual in-band
    magnitude and phase bias while keeping the degrees and the exact DC
    value.  The result is factored through `sos_partition`.
    """
    if fs <= 0:
        raise InvalidParameterError("sample rate must be strictly positive")
    if not ct.is_proper:
        raise DiscretizationError("cannot discretize an improper transfer")
    if ct.is_zero:
        return SosCascade.zero(fs)
    if ct.den_degree == 0:
        # constant gain: single passthrough section
        g = float(ct.num[0] / ct.den[0]) if ct.num_degree == 0 else None
        if g is not None:
            return SosCascade([BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0)], g, fs)

    bz, az = scipy.signal.bilinear(ct.num, ct.den, fs)
    bz = np.atleast_1d(np.asarray(bz, dtype=float))
    az = np.atleast_1d(np.asarray(az, dtype=float))
    bz = bz / az[0]
    az = az / az[0]
    if refine:
        bz, az = _sk_refine(bz, az, ct, fs)

    poles = np.roots(az) if len(az) > 1 else np.array([], dtype=complex)
    nz = np.trim_zeros(bz, "f")
    if nz.size == 0:
        return SosCascade.zero(fs)
    lead = nz[0]
    zeros = np.roots(nz / lead) if len(nz) > 1 else np.array([], dtype=complex)
    cascade = sos_partition(zeros, poles, float(lead), fs)
    # exact leading numerator zeros are pure sample delays; the partitioner
    # pads missing zeros at the origin (an advance), so cancel each with an
    # explicit one-sample-delay section
    for _ in range(len(bz) - len(nz)):
        cascade.sections.append(BiquadSection(0.0, 1.0, 0.0, 0.0, 0.0))
    return cascade


# -- two-input streaming controller ------------------------------------------


class TwoInputController:
    """Streaming controller i = H1{p_f} + H2{p_b} with output latency.

    The latency is a pure integer-sample delay on the computed current,
    modeling the input-to-output delay of a real-time implementation.
    """

    def __init__(self, h1: SosCascade, h2: SosCascade, latency: int = 0):
        if h1.fs != h2.fs:
            raise InvalidParameterError("both cascades must share one sample rate")
        if latency < 0:
            raise InvalidParameterError("latency must be nonnegative")
        self.h1 = h1
        self.h2 = h2
        self.latency = int(latency)
        self._delay = np.zeros(self.latency)

    @property
    def fs(self) -> float:
        return self.h1.fs

    def reset(self) -> None:
        self.h1.reset()
        self.h2.reset()
        self._delay = np.zeros(self.latency)

    def process(self, pf_block, pb_block) -> np.ndarray:
        pf_block = np.asarray(pf_block, dtype=float)
        pb_block = np.asarray(pb_block, dtype=float)
        if pf_block.shape != pb_block.shape:
            raise InvalidParameterError("pressure blocks must have equal length")
        y = self.h1.process(pf_block) + self.h2.process(pb_block)
        if self.latency == 0:
            return y
        buf = np.concatenate([self._delay, y])
        self._delay = buf[len(y):]
        return buf[: len(y)]

    def step(self, pf: float, pb: float) -> float:
        y = self.h1.step(pf) + self.h2.step(pb)
        if self.latency == 0:
            return y
        out = self._delay[0]
        self._delay[:-1] = self._delay[1:]
        self._delay[-1] = y
        return float(out)


def process_block(cascades, pf_block, pb_block, latency: int = 0) -> np.ndarray:
    """One-shot block form of the two-input control law.

    `cascades` is either a TwoInputController (whose configured latency is
    used and whose state persists) or an (H1, H2) tuple, in which case the
    cascades' own states persist and `latency` applies a zero-history
    delay for this block only.
    """
    if isinstance(cascades, TwoInputController):
        return cascades.process(pf_block, pb_block)
    h1, h2 = cascades
    y = h1.process(np.asarray(pf_block, dtype=float)) + h2.process(
        np.asarray(pb_block, dtype=float)
    )
    if latency:
        y = np.concatenate([np.zeros(latency), y])[: len(y)]
    return y


# -- closed-loop simulation ---------------------------------------------------


@dataclass(frozen=True)
class LoopConfig:
    """Sample-rate, latency and integration settings of the simulated loop.

    hold selects how the sampled control current is applied to the
    continuous plant: "centered" holds each command on the sample-period
    window centered on its nominal application instant (no spurious
    half-sample delay), "causal" is a plain zero-order hold over the
    following period.
    """

    fs: float = 50_000.0
    latency: int = 1
    hold: str = "centered"
    duration: float = 1.0
    transient: float = 0.5

    def __post_init__(self):
        if self.fs <= 0:
            raise InvalidParameterError("fs must be strictly positive")
        if self.latency < 0:
            raise InvalidParameterError("latency must be nonnegative")
        if self.hold not in ("centered", "causal"):
            raise InvalidParameterError("hold must be 'centered' or 'causal'")
        if not (0.0 <= self.transient < self.duration):
            raise InvalidParameterError("need 0 <= transient < duration")


@dataclass(frozen=True)
class SimulationResult:
    """Sampled closed-loop trajectories (one row per controller tick)."""

    t: np.ndarray
    pf: np.ndarray  # front excitation pressure (Pa)
    pb: np.ndarray  # cavity pressure (Pa)
    v: np.ndarray  # membrane velocity (m/s)
    xi: np.ndarray  # membrane displacement (m)
    i: np.ndarray  # applied control current (A)
    transient: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_s", "pf_pa", "pb_pa", "i_a", "v_m_per_s"])
            for row in zip(self.t, self.pf, self.pb, self.i, self.v):
                writer.writerow([repr(float(x)) for x in row])

    def measured_impedance(self, f_hz: float) -> complex:
        """Steady-state impedance p_f/v at the excitation frequency.

        Both signals are least-squares projected onto in-phase and
        quadrature components after discarding the transient.
        """
        keep = self.t >= self.transient
        t = self.t[keep]
        w = 2.0 * math.pi * f_hz
        basis = np.stack([np.cos(w * t), np.sin(w * t)], axis=1)
        cf, _, _, _ = np.linalg.lstsq(basis, self.pf[keep], rcond=None)
        cv, _, _, _ = np.linalg.lstsq(basis, self.v[keep], rcond=None)
        x_pf = cf[0] - 1j * cf[1]
        x_v = cv[0] - 1j * cv[1]
        return complex(x_pf / x_v)


def sine_excitation(f_hz: float, amplitude: float = 1.0):
    """Front-pressure excitation p_f(t) = amplitude * sin(2*pi*f*t)."""
    w = 2.0 * math.pi * f_hz

    def signal(t):
        return amplitude * np.sin(w * np.asarray(t, dtype=float))

    return signal


def _plant_derivs(model: DriverModel, v, xi, pf, current):
    dv = (pf - model.rss * v - model.ksc * xi - model.pressure_factor * current) / model.mss
    return dv, v


def _rk4_step(model: DriverModel, v, xi, t, dt, pf_fun, current):
    """One RK4 step of the two-state plant with the current held constant."""
    pf_a = pf_fun(t)
    pf_b = pf_fun(t + 0.5 * dt)
    pf_c = pf_fun(t + dt)
    k1v, k1x = _plant_derivs(model, v, xi, pf_a, current)
    k2v, k2x = _plant_derivs(model, v + 0.5 * dt * k1v, xi + 0.5 * dt * k1x, pf_b, current)
    k3v, k3x = _plant_derivs(model, v + 0.5 * dt * k2v, xi + 0.5 * dt * k2x, pf_b, current)
    k4v, k4x = _plant_derivs(model, v + dt * k3v, xi + dt * k3x, pf_c, current)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    xi_new = xi + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    return v_new, xi_new


def closed_loop_sim(
    model: DriverModel,
    cascades,
    loop: LoopConfig,
    excitation,
) -> SimulationResult:
    """Sample-accurate simulation of the controlled absorber.

    The plant runs in continuous time (RK4 between controller ticks); the
    controller sees sampled front and cavity pressures and its output is
    delayed by the configured latency.  Raises a divergence error, stamped
    with the simulation time, if the state grows beyond any physical
    scale.
    """
    if isinstance(cascades, TwoInputController):
        ctrl = cascades
        if ctrl.latency != loop.latency:
            ctrl = TwoInputController(ctrl.h1, ctrl.h2, loop.latency)
    else:
        h1, h2 = cascades
        ctrl = TwoInputController(h1, h2, loop.latency)
    ctrl.reset()
    if ctrl.fs != loop.fs:
        raise InvalidParameterError("cascade sample rate must match the loop sample rate")

    dt = 1.0 / loop.fs
    n = int(round(loop.duration * loop.fs))
    t_grid = np.arange(n) * dt
    pf_all = np.asarray(excitation(t_grid), dtype=float)

    def pf_fun(t):
        return float(excitation(t))

    v = 0.0
    xi = 0.0
    vs = np.zeros(n)
    xis = np.zeros(n)
    pbs = np.zeros(n)
    cur = np.zeros(n)
    pf_scale = max(np.max(np.abs(pf_all)), 1e-30)
    v_limit = DIVERGENCE_FACTOR * pf_scale / model.rss

    centered = loop.hold == "centered"
    # command queue: u[n] is the current applied around tick n
    if centered and loop.latency == 0:
        u_next = ctrl.step(pf_all[0], 0.0)

    for k in range(n):
        t = t_grid[k]
        pb = xi / model.csb
        vs[k], xis[k], pbs[k] = v, xi, pb

        if centered and loop.latency == 0:
            u_now = u_next
        else:
            u_now = ctrl.step(pf_all[k], pb)
        cur[k] = u_now

        if not math.isfinite(v) or abs(v) > v_limit:
            raise DivergenceError("closed loop diverged", time_s=t)

        if k == n - 1:
            break

        if not centered:
            # plain causal hold: u_now applied over [t, t+dt)
            v, xi = _rk4_step(model, v, xi, t, dt, pf_fun, u_now)
        elif loop.latency == 0:
            # predict state at t+dt to evaluate the next command, then
            # integrate with the hold window centered on each tick
            v_p, xi_p = _rk4_step(model, v, xi, t, dt, pf_fun, u_now)
            u_next = ctrl.step(pf_all[k + 1], xi_p / model.csb)
            v, xi = _rk4_step(model, v, xi, t, 0.5 * dt, pf_fun, u_now)
            v, xi = _rk4_step(model, v, xi, t + 0.5 * dt, 0.5 * dt, pf_fun, u_next)
        else:
            # latency >= 1: the command for the second half-window is the
            # one the delay line will release at the next tick -- already
            # known, so the centered hold stays causal
            u_mid = ctrl._delay[0] if ctrl.latency > 0 else u_now
            v, xi = _rk4_step(model, v, xi, t, 0.5 * dt, pf_fun, u_now)
            v, xi = _rk4_step(model, v, xi, t + 0.5 * dt, 0.5 * dt, pf_fun, u_mid)

    return SimulationResult(
        t=t_grid, pf=pf_all, pb=pbs, v=vs, xi=xis, i=cur, transient=loop.transient
    )


def measure_impedance(
    model: DriverModel,
    cascades,
    loop: LoopConfig,
    f_hz: float,
    amplitude: float = 1.0,
) -> complex:
    """Run a steady-state sine experiment and return the measured p_f/v."""
    result = closed_loop_sim(model, cascades, loop, sine_excitation(f_hz, amplitude))
    return result.measured_impedance(f_hz)
