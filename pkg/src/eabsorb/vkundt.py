"""Virtual impedance tube: two-microphone measurement and its inversion.

Coordinate convention (documented, fixed by the round-trip identity): let
xi be the distance from the sample plane toward the source.  The plane-wave
field is p(xi) = e^{-j*k*xi} + Gamma * e^{j*k*xi}; microphone 1 sits at
xi = x1 and microphone 2 at xi = x1 + delta_x (one spacing further from the
sample).  With H12 = p2/p1 the inversion

    Gamma = (H12 - e^{-j*k*dx}) / (e^{j*k*dx} - H12) * e^{-2*j*k*x1}

recovers the termination reflection coefficient exactly in the noiseless
case.  The duct is lossless and restricted to the plane-wave regime.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import AirProperties

#: first circular-duct cut-on: f = 1.8412 * c0 / (pi * diameter)
FIRST_MODE_BESSEL_ROOT = 1.8412

#: |e^{jk dx} - H12| below this is flagged as a singular inversion frequency
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class WaveguideGeometry:
    """Impedance-tube dimensions in meters."""

    delta_x: float  # microphone spacing
    x1: float  # distance from sample plane to the nearer microphone
    length: float
    diameter: float

    def __post_init__(self):
        for name in ("delta_x", "x1", "length", "diameter"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive")
        if self.delta_x >= self.x1:
            raise InvalidParameterError("delta_x must be smaller than x1")

    def plane_wave_limit_hz(self, air: AirProperties) -> float:
        return FIRST_MODE_BESSEL_ROOT * air.c0 / (math.pi * self.diameter)

    def to_json(self) -> str:
        return json.dumps(
            {
                "delta_x_m": self.delta_x,
                "x1_m": self.x1,
                "length_m": self.length,
                "diameter_m": self.diameter,
            },
            indent=2,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "WaveguideGeometry":
        return cls(
            delta_x=float(d["delta_x_m"]),
            x1=float(d["x1_m"]),
            length=float(d["length_m"]),
            diameter=float(d["diameter_m"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "WaveguideGeometry":
        return cls.from_dict(json.loads(text))


#: the reference tube of the experimental setup
REFERENCE_GEOMETRY = WaveguideGeometry(delta_x=0.100, x1=0.420, length=0.970, diameter=0.072)


@dataclass(frozen=True)
class TwoMicMeasurement:
    """Inter-microphone transfer function H12 = p2/p1 per frequency."""

    freqs_hz: np.ndarray
    h12: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=float)
        h12 = np.asarray(self.h12, dtype=complex)
        if freqs.size != h12.size:
            raise InvalidParameterError("frequency and H12 arrays must match")
        if np.any(freqs <= 0):
            raise InvalidParameterError("frequencies must be positive")
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "h12", h12)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["freq_hz", "re_h12", "im_h12"])
            for f, h in zip(self.freqs_hz, self.h12):
                writer.writerow([repr(float(f)), repr(float(h.real)), repr(float(h.imag))])

    @classmethod
    def from_csv(cls, path) -> "TwoMicMeasurement":
        freqs, hs = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                freqs.append(float(row[0]))
                hs.append(complex(float(row[1]), float(row[2])))
        return cls(np.asarray(freqs), np.asarray(hs))


def simulate_two_mic(
    freqs_hz, z_term, geom: WaveguideGeometry, air: AirProperties
) -> TwoMicMeasurement:
    """Forward standing-wave model of the two-microphone measurement.

    `z_term` is the complex specific impedance of the termination, sampled
    on `freqs_hz`.  H12 is an amplitude ratio, so the incident level never
    enters.  Frequencies above the plane-wave cut-on are rejected.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    z_term = np.asarray(z_term, dtype=complex)
    limit = geom.plane_wave_limit_hz(air)
    if np.any(freqs >= limit):
        raise InvalidParameterError(
            f"frequencies above the plane-wave limit ({limit:.0f} Hz) are not supported"
        )
    rc = air.characteristic_impedance
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = (z_term - rc) / (z_term + rc)
    k = 2.0 * np.pi * freqs / air.c0
    xi1 = geom.x1
    xi2 = geom.x1 + geom.delta_x
    p1 = np.exp(-1j * k * xi1) + gamma * np.exp(1j * k * xi1)
    p2 = np.exp(-1j * k * xi2) + gamma * np.exp(1j * k * xi2)
    return TwoMicMeasurement(freqs, p2 / p1)


def add_measurement_noise(
    meas: TwoMicMeasurement, rel_std: float, seed: int
) -> TwoMicMeasurement:
    """Additive complex Gaussian noise of relative size rel_std on H12."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, rel_std, meas.h12.size) + 1j * rng.normal(
        0.0, rel_std, meas.h12.size
    )
    return TwoMicMeasurement(meas.freqs_hz, meas.h12 * (1.0 + noise))


@dataclass(frozen=True)
class ReflectionResult:
    freqs_hz: np.ndarray
    gamma: np.ndarray
    z: np.ndarray  # recovered specific impedance
    singular: np.ndarray  # bool mask of flagged frequencies


def recover_reflection(
    meas: TwoMicMeasurement, geom: WaveguideGeometry, air: AirProperties
) -> ReflectionResult:
    """Invert H12 into the termination reflection coefficient and impedance.

    Frequencies where the inversion denominator collapses (including
    half-wavelength microphone spacing, k*dx = m*pi) are flagged, not
    raised.
    """
    k = 2.0 * np.pi * meas.freqs_hz / air.c0
    e_plus = np.exp(1j * k * geom.delta_x)
    e_minus = np.exp(-1j * k * geom.delta_x)
    den = e_plus - meas.h12
    spacing_resonance = np.abs(np.sin(k * geom.delta_x)) <= SINGULAR_TOL
    singular = (np.abs(den) <= SINGULAR_TOL) | spacing_resonance
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = (meas.h12 - e_minus) / den * np.exp(-2j * k * geom.x1)
        z = air.characteristic_impedance * (1.0 + gamma) / (1.0 - gamma)
    return ReflectionResult(freqs_hz=meas.freqs_hz, gamma=gamma, z=z, singular=singular)


def conditioning_report(
    geom: WaveguideGeometry, air: AirProperties, freqs_hz, gamma=0.0
) -> np.ndarray:
    """First-order noise amplification |dGamma/dH12| on the noiseless manifold.

    For a termination of reflection coefficient `gamma` the closed form is
    |e^{-j*k*x1} + gamma*e^{j*k*x1}|^2 / (2*|sin(k*dx)|), which grows like
    1/sin(k*dx) toward DC and is smallest near quarter-wavelength spacing.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    k = 2.0 * np.pi * freqs / air.c0
    gamma = np.asarray(gamma, dtype=complex)
    p1 = np.exp(-1j * k * geom.x1) + gamma * np.exp(1j * k * geom.x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs(p1) ** 2 / (2.0 * np.abs(np.sin(k * geom.delta_x)))
