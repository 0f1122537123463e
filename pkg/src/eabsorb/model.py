"""Lumped transducer/enclosure model and current-source circuit algebra.

The absorber plant is a current-driven loudspeaker closed by a sealed
cabinet.  Everything is expressed in specific-acoustic units (Pa.s/m for
impedances) referred to a single fixed cross-section, so the piston area
never appears outside of the raw-parameter conversion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidParameterError, SingularDesignError
from .rational import RationalTransfer


@dataclass(frozen=True)
class AirProperties:
    """Ambient air: mass density (kg/m^3) and speed of sound (m/s)."""

    rho0: float = 1.2
    c0: float = 343.0

    def __post_init__(self):
        if self.rho0 <= 0 or self.c0 <= 0:
            raise InvalidParameterError("air properties must be strictly positive")

    @property
    def characteristic_impedance(self) -> float:
        """rho0*c0, the matched specific impedance (Pa.s/m)."""
        return self.rho0 * self.c0


DEFAULT_AIR = AirProperties()


@dataclass(frozen=True)
class RawDriverParams:
    """Raw Thiele-Small data of a driver mounted on a sealed box."""

    mms: float  # moving mass (kg)
    cms: float  # mechanical compliance (m/N)
    rms: float  # mechanical resistance (N.s/m)
    bl: float  # force factor (T.m)
    sd: float  # effective piston area (m^2)
    vb: float  # enclosure volume (m^3)

    def __post_init__(self):
        for name in ("mms", "cms", "rms", "bl", "sd", "vb"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class DriverModel:
    """Specific-unit plant description: the five controller parameters.

    rss:             specific mechanical resistance (Pa.s/m)
    omega0:          natural angular frequency of the boxed driver (rad/s)
    qms:             passive mechanical quality factor
    pressure_factor: Bl/Sd, drive pressure per ampere (Pa/A)
    csb:             box specific compliance (m/Pa)
    """

    rss: float
    omega0: float
    qms: float
    pressure_factor: float
    csb: float
    air: AirProperties = DEFAULT_AIR

    def __post_init__(self):
        for name in ("rss", "omega0", "qms", "pressure_factor", "csb"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive")

    @property
    def f0_hz(self) -> float:
        return self.omega0 / (2.0 * math.pi)

    @property
    def mss(self) -> float:
        """Specific moving mass (kg/m^2), Rss*Qms/omega0."""
        return self.rss * self.qms / self.omega0

    @property
    def ksc(self) -> float:
        """Specific combined stiffness (Pa/m), Mss*omega0^2."""
        return self.mss * self.omega0**2

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_dict(self) -> dict:
        return {
            "rss": self.rss,
            "f0_hz": self.f0_hz,
            "qms": self.qms,
            "f_pa_per_a": self.pressure_factor,
            "csb_m_per_pa": self.csb,
            "rho0": self.air.rho0,
            "c0": self.air.c0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriverModel":
        return cls(
            rss=float(d["rss"]),
            omega0=2.0 * math.pi * float(d["f0_hz"]),
            qms=float(d["qms"]),
            pressure_factor=float(d["f_pa_per_a"]),
            csb=float(d["csb_m_per_pa"]),
            air=AirProperties(float(d["rho0"]), float(d["c0"])),
        )

    @classmethod
    def from_json(cls, text: str) -> "DriverModel":
        return cls.from_dict(json.loads(text))


def table_reference_model(air: AirProperties = DEFAULT_AIR) -> DriverModel:
    """Measured parameters of the reference absorber prototype."""
    return DriverModel(
        rss=0.6734 * air.characteristic_impedance,
        omega0=2.0 * math.pi * 205.5,
        qms=5.466,
        pressure_factor=1.084e3,  # 1.084 Pa/mA
        csb=1.808e-6,
        air=air,
    )


def derive_specific_model(raw: RawDriverParams, air: AirProperties = DEFAULT_AIR) -> DriverModel:
    """Convert raw driver/box data into the specific-unit plant model."""
    csb = raw.vb / (air.rho0 * air.c0**2 * raw.sd)
    # combined compliance: suspension in parallel (force-wise) with the box
    inv_cmc = 1.0 / raw.cms + raw.sd / csb
    cmc = 1.0 / inv_cmc
    omega0 = 1.0 / math.sqrt(raw.mms * cmc)
    qms = math.sqrt(raw.mms / cmc) / raw.rms
    return DriverModel(
        rss=raw.rms / raw.sd,
        omega0=omega0,
        qms=qms,
        pressure_factor=raw.bl / raw.sd,
        csb=csb,
        air=air,
    )


def passive_impedance(model: DriverModel) -> RationalTransfer:
    """Specific impedance of the uncontrolled boxed driver.

    Rss * (s^2 + s*w0/Q + w0^2) / (s*w0/Q); purely resistive (= Rss) at w0.
    """
    w0, q = model.omega0, model.qms
    num = [model.rss, model.rss * w0 / q, model.rss * w0**2]
    den = [w0 / q, 0.0]
    return RationalTransfer.from_coeffs(num, den)


def rear_pressure_gain(model: DriverModel) -> RationalTransfer:
    """Cavity pressure per unit membrane velocity: 1/(s*Csb)."""
    return RationalTransfer.from_coeffs([1.0], [model.csb, 0.0])


# -- voltage-controlled current source (drive electronics) -------------------


@dataclass(frozen=True)
class CurrentSourceDesign:
    """Resistor network of the voltage-controlled current source (ohms)."""

    r1: float
    r2: float
    r3: float
    r4: float
    r5: float
    zl: Optional[complex] = None  # load impedance, if known

    def __post_init__(self):
        for name in ("r1", "r2", "r3", "r4", "r5"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive")


def current_source_gains(design: CurrentSourceDesign) -> tuple[float, float]:
    """(transconductance, output leakage), both in A/V.

    The leakage term multiplies the output voltage; it is exactly zero when
    R1 = R2 and R3 = R4 + R5.
    """
    r1, r2, r3, r4, r5 = design.r1, design.r2, design.r3, design.r4, design.r5
    den = (r1 + r4) * r2 * r5
    transconductance = (r3 * r4 + r2 * (r4 + r5)) / den
    if r1 == r2 and r3 == r4 + r5:
        leakage = 0.0
    else:
        leakage = (r1 * r3 - r2 * (r4 + r5)) / den
    return transconductance, leakage


def opamp_current(design: CurrentSourceDesign, i_out: complex) -> complex:
    """Current the op-amp must deliver for a given output current."""
    r1, r3, r5 = design.r1, design.r3, design.r5
    if r1 + r3 == r5:
        raise SingularDesignError("R1 + R3 = R5 makes the op-amp current singular")
    zl = design.zl if design.zl is not None else 0.0
    factor = (r3 - r5) / r3 * (r1 + r3 + r5) / (r1 + r3 - r5) + 2.0 * zl / (r1 + r3 - r5)
    return i_out * factor


REFERENCE_CURRENT_SOURCE = CurrentSourceDesign(r1=92e3, r2=92e3, r3=1.1e3, r4=1.1e3, r5=1.2)
