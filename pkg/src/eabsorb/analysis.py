"""Robustness analysis: achieved impedance under model mismatch, analytic
sensitivities, absorption coefficients and the Monte-Carlo quartile study."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .model import AirProperties, DriverModel, passive_impedance
from .synthesis import FeedbackSpec, TargetSpec, feedback_filter, target_impedance

#: denominator magnitudes below this fraction of the surrounding scale are
#: flagged as singular evaluation frequencies
SINGULAR_TOL = 1e-300


@dataclass(frozen=True)
class ParameterEstimates:
    """Estimated plant parameters as used inside the controller filters."""

    rss: float
    omega0: float
    qms: float
    pressure_factor: float
    csb: float

    def __post_init__(self):
        for name in ("rss", "omega0", "qms", "pressure_factor", "csb"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive")

    @classmethod
    def from_model(cls, model: DriverModel) -> "ParameterEstimates":
        return cls(model.rss, model.omega0, model.qms, model.pressure_factor, model.csb)

    @classmethod
    def scaled(
        cls,
        model: DriverModel,
        rss: float = 1.0,
        omega0: float = 1.0,
        qms: float = 1.0,
        pressure_factor: float = 1.0,
        csb: float = 1.0,
    ) -> "ParameterEstimates":
        """Estimates equal to the true parameters times per-parameter factors."""
        return cls(
            model.rss * rss,
            model.omega0 * omega0,
            model.qms * qms,
            model.pressure_factor * pressure_factor,
            model.csb * csb,
        )

    def hat_impedance(self, omega) -> np.ndarray:
        """The estimated passive impedance evaluated at s = j*omega."""
        s = 1j * np.asarray(omega, dtype=float)
        w0, q = self.omega0, self.qms
        return self.rss * (s**2 + s * w0 / q + w0**2) / (s * w0 / q)


def achieved_impedance(
    model: DriverModel,
    estimates: ParameterEstimates,
    target: TargetSpec,
    fb: FeedbackSpec,
    omega,
    return_mask: bool = False,
):
    """Impedance actually presented when the controller uses `estimates`.

    Z_sa = Zst * (G*Csb_hat/Csb + Zss*F_hat/F)
               / (G + Zss_hat + Zst*(F_hat/F - 1))

    Singular evaluation frequencies (vanishing denominator) are flagged in
    the optional mask and returned as inf, never raised.
    """
    omega = np.asarray(omega, dtype=float)
    s = 1j * omega
    zst = target_impedance(target)(s)
    g = feedback_filter(model, fb)(s)
    zss = passive_impedance(model)(s)
    zss_hat = estimates.hat_impedance(omega)
    f_ratio = estimates.pressure_factor / model.pressure_factor
    c_ratio = estimates.csb / model.csb

    num = g * c_ratio + zss * f_ratio
    den = g + zss_hat + zst * (f_ratio - 1.0)
    mask = np.abs(den) <= SINGULAR_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        zsa = zst * num / den
    zsa = np.where(mask, np.inf + 0j, zsa)
    if return_mask:
        return zsa, mask
    return zsa


@dataclass(frozen=True)
class SensitivityTriple:
    """Logarithmic sensitivities of the achieved impedance, per frequency."""

    s_zss: np.ndarray
    s_f: np.ndarray
    s_csb: np.ndarray
    singular: np.ndarray


def sensitivities(
    model: DriverModel,
    estimates: ParameterEstimates,
    target: TargetSpec,
    fb: FeedbackSpec,
    omega,
) -> SensitivityTriple:
    """Closed-form sensitivities of Z_sa to the three estimated quantities.

    As the feedback gain grows the triple tends to (0, 0, 1): large G hides
    errors in the passive-impedance and force-factor estimates but passes
    compliance errors straight through.
    """
    omega = np.asarray(omega, dtype=float)
    s = 1j * omega
    zst = target_impedance(target)(s)
    zss = passive_impedance(model)(s)
    g = feedback_filter(model, fb)(s)
    zss_hat = estimates.hat_impedance(omega)
    f_true = model.pressure_factor
    f_hat = estimates.pressure_factor
    c_ratio = estimates.csb / model.csb

    s_zss = -1.0 / (1.0 + (g + (f_hat / f_true - 1.0) * zst) / zss_hat)
    term2 = 1.0 / (1.0 + f_true * (g + zss_hat - zst) / (f_hat * zst))
    if fb.kg == 0.0:
        # G = 0 removes the cavity-pressure path entirely
        s_csb = np.zeros_like(s_zss)
        s_f = 1.0 - term2
    else:
        ratio = c_ratio * f_true * g / (f_hat * zss)
        s_f = 1.0 / (1.0 + ratio) - term2
        s_csb = 1.0 / (1.0 + 1.0 / ratio)
    singular = ~(np.isfinite(s_zss) & np.isfinite(s_f) & np.isfinite(s_csb))
    return SensitivityTriple(s_zss=s_zss, s_f=s_f, s_csb=s_csb, singular=singular)


def reflection_coefficient(z, air: AirProperties):
    """Normal-incidence pressure reflection coefficient of impedance z."""
    z = np.asarray(z, dtype=complex)
    rc = air.characteristic_impedance
    with np.errstate(divide="ignore", invalid="ignore"):
        return (z - rc) / (z + rc)


def absorption_coefficient(z, air: AirProperties):
    """Fraction of incident power absorbed: 1 - |reflection|^2.

    Equals 1 only for z = rho0*c0; negative values mean the surface is
    acoustically active (injects power).
    """
    gamma = reflection_coefficient(z, air)
    return 1.0 - np.abs(gamma) ** 2


def default_frequency_grid() -> np.ndarray:
    """10 Hz to 1 kHz in 2 Hz steps."""
    return np.arange(10.0, 1000.0 + 1e-9, 2.0)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_draws: int
    rel_std: float
    seed: int
    freqs_hz: np.ndarray = field(default_factory=default_frequency_grid)

    def __post_init__(self):
        if self.n_draws < 1:
            raise InvalidParameterError("n_draws must be at least 1")
        if not (0.0 <= self.rel_std < 0.2):
            raise InvalidParameterError("rel_std must be in [0, 0.2)")


@dataclass(frozen=True)
class QuartileBand:
    """Per-frequency first/third quartiles of the achieved absorption."""

    freqs_hz: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    nominal: np.ndarray

    def __post_init__(self):
        if np.any(self.q1 > self.q3 + 1e-15):
            raise InvalidParameterError("q1 must not exceed q3")

    @property
    def width(self) -> np.ndarray:
        return self.q3 - self.q1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["freq_hz", "alpha_q1", "alpha_q3", "alpha_nominal"])
            for f, a, b, n in zip(self.freqs_hz, self.q1, self.q3, self.nominal):
                writer.writerow([repr(float(f)), repr(float(a)), repr(float(b)), repr(float(n))])

    @classmethod
    def from_csv(cls, path) -> "QuartileBand":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                rows.append([float(x) for x in row])
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def draw_parameter_factors(seed: int, index: int, rel_std: float, rng_factory=None) -> np.ndarray:
    """Multiplicative Gaussian factors for draw `index`.

    Each draw uses its own RNG stream keyed by (seed, index), so serial and
    parallel execution produce identical results.  Draws yielding any
    non-positive factor are rejected and redrawn within the same stream.
    """
    if rng_factory is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    else:
        rng = rng_factory(seed, index)
    factors = rng.normal(1.0, rel_std, 5)
    while np.any(factors <= 0.0):
        factors = rng.normal(1.0, rel_std, 5)
    return factors


def monte_carlo_absorption(
    model: DriverModel,
    target: TargetSpec,
    fb: FeedbackSpec,
    cfg: MonteCarloConfig,
    threads: int = 1,
    rng_factory=None,
) -> QuartileBand:
    """Quartile band of achieved absorption under random estimation errors.

    The five estimated parameters (rss, omega0, qms, pressure factor, box
    compliance) are independently perturbed by multiplicative Gaussian
    factors N(1, rel_std^2) in every draw.  Deterministic for a fixed seed,
    regardless of thread count.
    """
    freqs = np.asarray(cfg.freqs_hz, dtype=float)
    omega = 2.0 * np.pi * freqs
    s = 1j * omega
    zst = target_impedance(target)(s)
    zss = passive_impedance(model)(s)
    g = feedback_filter(model, fb)(s)
    rc = model.air.characteristic_impedance

    factors = np.empty((cfg.n_draws, 5))

    def fill(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            factors[i] = draw_parameter_factors(cfg.seed, i, cfg.rel_std, rng_factory)

    if threads > 1:
        chunk = (cfg.n_draws + threads - 1) // threads
        bounds = [(i, min(i + chunk, cfg.n_draws)) for i in range(0, cfg.n_draws, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: fill(*b), bounds))
    else:
        fill(0, cfg.n_draws)

    alpha = np.empty((cfg.n_draws, freqs.size))

    def evaluate(lo: int, hi: int) -> None:
        fac = factors[lo:hi]
        rss_h = model.rss * fac[:, 0:1]
        w0_h = model.omega0 * fac[:, 1:2]
        q_h = model.qms * fac[:, 2:3]
        f_ratio = fac[:, 3:4]
        c_ratio = fac[:, 4:5]
        srow = s[None, :]
        zss_hat = rss_h * (srow**2 + srow * w0_h / q_h + w0_h**2) / (srow * w0_h / q_h)
        num = g[None, :] * c_ratio + zss[None, :] * f_ratio
        den = g[None, :] + zss_hat + zst[None, :] * (f_ratio - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            zsa = zst[None, :] * num / den
            gamma = (zsa - rc) / (zsa + rc)
        alpha[lo:hi] = 1.0 - np.abs(gamma) ** 2

    block = 256
    blocks = [(i, min(i + block, cfg.n_draws)) for i in range(0, cfg.n_draws, block)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: evaluate(*b), blocks))
    else:
        for b in blocks:
            evaluate(*b)

    # Hyndman-Fan type 7 (numpy's default linear interpolation)
    q1 = np.quantile(alpha, 0.25, axis=0, method="linear")
    q3 = np.quantile(alpha, 0.75, axis=0, method="linear")
    nominal = absorption_coefficient(zst, model.air)
    return QuartileBand(freqs_hz=freqs, q1=q1, q3=q3, nominal=nominal)
