"""Photon-counting statistics, detector model and SNR analysis.

Sampling uses numpy's Philox counter-based generator with one substream per
pixel keyed by (seed, pixel index), so results are deterministic and
independent of how pixels are partitioned across threads.  The generator
name is embedded in all stochastic output metadata.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .physics import HC_J_NM
from .spectra import SpectrumTrace

RNG_NAME = "numpy-philox4x64 keyed by (seed, pixel index)"

_MASK64 = (1 << 64) - 1


def pixel_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for one pixel/trial."""
    return np.random.Generator(
        np.random.Philox(key=np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64))
    )


@dataclass(frozen=True)
class DetectorParams:
    """dark_rate in counts/s, quantum_efficiency in (0, 1],
    integration_time in seconds."""

    dark_rate: float
    quantum_efficiency: float = 1.0
    integration_time: float = 1.0

    def __post_init__(self):
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if not (0.0 < self.quantum_efficiency <= 1.0):
            raise ValueError(
                f"quantum_efficiency must be in (0, 1], got {self.quantum_efficiency}"
            )
        if self.integration_time <= 0:
            raise ValueError(f"integration_time must be > 0, got {self.integration_time}")


@dataclass(frozen=True)
class CountRecord:
    """One Poisson photon-counting observation."""

    expected_rate: float
    sampled_counts: int
    seed: int
    integration_time: float

    @classmethod
    def sample(cls, rate: float, det: DetectorParams, seed: int, index: int = 0):
        mean = (rate * det.quantum_efficiency + det.dark_rate) * det.integration_time
        n = int(pixel_rng(seed, index).poisson(mean))
        return cls(expected_rate=rate, sampled_counts=n, seed=seed,
                   integration_time=det.integration_time)


def simulate_counts(
    rate_trace: SpectrumTrace,
    det: DetectorParams,
    seed: int,
    n_threads: int = 1,
) -> SpectrumTrace:
    """Independent Poisson draw per pixel with mean (rate*qe + dark)*t.

    Bit-identical for any n_threads, because every pixel draws from its own
    (seed, index)-keyed substream.
    """
    rates = rate_trace.values
    if np.any(rates < 0):
        raise ValueError("count rates must be >= 0")
    means = (rates * det.quantum_efficiency + det.dark_rate) * det.integration_time

    def draw_block(block):
        lo, hi = block
        return [int(pixel_rng(seed, i).poisson(means[i])) for i in range(lo, hi)]

    n = means.size
    if n_threads <= 1:
        counts = draw_block((0, n))
    else:
        edges = np.linspace(0, n, n_threads + 1, dtype=int)
        blocks = list(zip(edges[:-1], edges[1:]))
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            counts = [c for part in ex.map(draw_block, blocks) for c in part]

    return SpectrumTrace(
        rate_trace.grid,
        np.array(counts, dtype=float),
        freq_kind=rate_trace.freq_kind,
        value_kind="counts",
        meta={
            "generator": "simulate_counts",
            "rng": RNG_NAME,
            "seed": int(seed),
            "integration_time_s": det.integration_time,
            "dark_rate_cps": det.dark_rate,
            "quantum_efficiency": det.quantum_efficiency,
            "input": rate_trace.meta.get("generator"),
        },
    )


def shot_noise_contrast(incident_rate: float, t: float) -> float:
    """Relative rms shot noise 1/sqrt(N) for N = rate * t."""
    if incident_rate <= 0 or t <= 0:
        raise ValueError("incident_rate and t must be positive")
    return 1.0 / math.sqrt(incident_rate * t)


def interference_dip_rate(
    incident_rate: float,
    coherent_molecular_rate: float,
    mode_overlap: float = 1.0,
) -> float:
    """On-resonance dip depth 2*overlap*sqrt(incident*coherent), i.e. the
    interference cross term at the intensity level."""
    if incident_rate < 0 or coherent_molecular_rate < 0:
        raise ValueError("rates must be >= 0")
    if not (0.0 <= mode_overlap <= 1.0):
        raise ValueError(f"mode_overlap must be in [0, 1], got {mode_overlap}")
    return 2.0 * mode_overlap * math.sqrt(incident_rate * coherent_molecular_rate)


def snr_of_detection(
    dip_rate: float, incident_rate: float, det: DetectorParams, t: float
) -> float:
    """SNR = dip*t / sqrt((incident + dark)*t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    noise = math.sqrt((incident_rate + det.dark_rate) * t)
    return dip_rate * t / noise if noise > 0 else math.inf


def photon_rate_to_power(rate: float, lambda_nm: float) -> float:
    """photons/s -> W at the given wavelength, via E = hc/lambda."""
    if rate < 0 or lambda_nm <= 0:
        raise ValueError("rate must be >= 0 and lambda positive")
    return rate * HC_J_NM / lambda_nm


@dataclass(frozen=True)
class PowerCalibration:
    """Linear power <-> saturation map anchored at S(P_at_S1) = 1."""

    p_at_s1: float

    def __post_init__(self):
        if self.p_at_s1 <= 0:
            raise ValueError(f"P at S=1 must be positive, got {self.p_at_s1}")

    def saturation(self, power: float) -> float:
        if power < 0:
            raise ValueError("power must be >= 0")
        return power / self.p_at_s1

    def power(self, s: float) -> float:
        if s < 0:
            raise ValueError("saturation parameter must be >= 0")
        return s * self.p_at_s1


def saturation_power_calibration(p_at_s1: float) -> PowerCalibration:
    return PowerCalibration(p_at_s1)
