"""Synthetic noisy observations built from the forward models; shared by
the CLI simulate/reproduce commands and by Monte Carlo studies."""

from __future__ import annotations

import numpy as np

from .correlation import G2Trace, g2_trace
from .measurement import DetectorParams, RNG_NAME, simulate_counts
from .physics import DriveParams, MoleculeParams
from .spectra import ExtinctionModel, SpectrumTrace, extinction_spectrum


def noisy_extinction_trace(
    model: ExtinctionModel,
    grid,
    incident_rate: float,
    det: DetectorParams,
    seed: int,
    n_threads: int = 1,
) -> SpectrumTrace:
    """Shot-noised normalized transmission: Poisson counts per pixel at
    rate incident*I_d/I_e plus dark counts, dark-subtracted and renormalized."""
    clean = extinction_spectrum(model, grid)
    rate = SpectrumTrace(
        clean.grid,
        clean.values * incident_rate,
        freq_kind=clean.freq_kind,
        value_kind="counts_per_s",
        meta=clean.meta,
    )
    counts = simulate_counts(rate, det, seed, n_threads)
    t = det.integration_time
    norm = (counts.values - det.dark_rate * t) / (incident_rate * det.quantum_efficiency * t)
    return SpectrumTrace(
        grid,
        norm,
        freq_kind="detuning_MHz",
        value_kind="transmission",
        meta={
            "generator": "noisy_extinction_trace",
            "rng": RNG_NAME,
            "seed": int(seed),
            "incident_rate_cps": incident_rate,
            "integration_time_s": t,
            **{k: clean.meta[k] for k in ("A", "B", "psi", "gamma")},
        },
    )


def noisy_g2_trace(
    delays_ns,
    mol: MoleculeParams,
    drive: DriveParams,
    plateau_coincidences: float,
    seed: int,
    n_threads: int = 1,
) -> G2Trace:
    """Coincidence-noised g2: Poisson draws at plateau_coincidences per bin
    on the plateau, renormalized by the plateau mean over the last 20% of
    the delay window."""
    clean = g2_trace(delays_ns, mol, drive)
    rate = SpectrumTrace(
        clean.delays,
        clean.values * plateau_coincidences,
        freq_kind="delay_ns",
        value_kind="counts_per_s",
    )
    det = DetectorParams(dark_rate=0.0, integration_time=1.0)
    counts = simulate_counts(rate, det, seed, n_threads)
    tail = max(3, int(0.2 * counts.values.size))
    plateau = float(np.mean(counts.values[-tail:]))
    if plateau <= 0:
        raise ValueError("plateau region has no coincidences; trace unusable")
    return G2Trace(
        clean.delays,
        counts.values / plateau,
        meta={
            "generator": "noisy_g2_trace",
            "rng": RNG_NAME,
            "seed": int(seed),
            "plateau_coincidences": plateau_coincidences,
            "rabi": drive.rabi,
            "gamma0": mol.gamma0,
            "gamma": mol.gamma,
        },
    )
