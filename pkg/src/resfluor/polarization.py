"""Jones-calculus model of the detection chain (quarter waveplate +
polarizer) and its action on the extinction triple (A, B, psi).

Angle convention: all angles are measured from the lab y-axis (the laser
polarization axis), counterclockwise positive viewed along propagation.
Jones vectors live in the fixed (x, y) lab basis.

The triple (A0, B0, psi0) is intrinsic to the molecule-laser pair: it is
normalized to unit laser-dipole overlap and no detection optics.  For a
given chain, the coherent part transforms through the complex overlap of
the chain-transformed laser and dipole fields; the incoherent fluorescence
(fully polarized along the dipole axis, non-interfering) transforms by
intensity projection, which is why the A-term only changes magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .physics import MoleculeParams, normalize_phase
from .spectra import SpectrumTrace
from . import estimation
from .estimation import (
    FitOptions,
    FitProblem,
    FitResult,
    Parameter,
    RankDeficientError,
    extinction_fit_model,
    minimize,
)


class DegenerateConfigurationError(ValueError):
    """The chain extinguishes the laser field: the detected-intensity
    normalization of the transmission trace is undefined."""


def axis_vector(angle_from_y: float) -> np.ndarray:
    """Real unit Jones vector at the given angle from the y-axis."""
    return np.array([math.sin(angle_from_y), math.cos(angle_from_y)], dtype=complex)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def polarizer_matrix(angle_from_y: float, extinction_ratio: float = 0.0) -> np.ndarray:
    """Projector onto the pass axis, with amplitude leakage
    sqrt(extinction_ratio) along the rejected axis (coherent leakage)."""
    a = axis_vector(angle_from_y)
    b = np.array([a[1], -a[0]], dtype=complex)  # perpendicular axis
    m = np.outer(a, a.conj())
    if extinction_ratio > 0.0:
        m = m + math.sqrt(extinction_ratio) * np.outer(b, b.conj())
    return m


def qwp_matrix(angle_from_y: float) -> np.ndarray:
    """Quarter waveplate, fast axis at the given angle; retardance exactly
    pi/2 (unitary)."""
    a = axis_vector(angle_from_y)
    b = np.array([a[1], -a[0]], dtype=complex)
    return np.outer(a, a.conj()) + 1j * np.outer(b, b.conj())


@dataclass(frozen=True)
class ChainElement:
    kind: str                      # quarter_waveplate | polarizer | rotation
    angle: float = 0.0             # radians from the lab y-axis
    extinction_ratio: float = 0.0  # polarizer intensity leakage

    def matrix(self) -> np.ndarray:
        if self.kind == "quarter_waveplate":
            return qwp_matrix(self.angle)
        if self.kind == "polarizer":
            return polarizer_matrix(self.angle, self.extinction_ratio)
        if self.kind == "rotation":
            return rotation_matrix(self.angle)
        raise ValueError(f"unknown chain element kind {self.kind!r}")


@dataclass(frozen=True)
class PolarizationChain:
    """Ordered Jones elements, input side first.  Empty chain is identity."""

    elements: tuple = ()

    def matrix(self) -> np.ndarray:
        m = np.eye(2, dtype=complex)
        for el in self.elements:
            m = el.matrix() @ m
        return m


def apply_chain(chain: PolarizationChain, v: np.ndarray) -> np.ndarray:
    """Propagate a Jones vector through the chain."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError("Jones vector must be a finite length-2 complex vector")
    return chain.matrix() @ v


def transform_extinction_triple(
    chain: PolarizationChain,
    e_laser: np.ndarray,
    e_dipole_axis: float,
    a0: float,
    b0: float,
    psi0: float,
):
    """(A', B', psi') seen through the chain.

    A' = A0 |U d|^2 / |U e|^2 and B' exp(i psi') = B0 exp(i psi0)
    <U e, U d> / |U e|^2, with U the chain matrix, e the laser Jones vector
    and d the (real, unit) dipole axis vector.
    """
    if a0 < 0 or b0 < 0:
        raise ValueError("A0 and B0 must be non-negative")
    u_l = apply_chain(chain, e_laser)
    u_d = apply_chain(chain, axis_vector(e_dipole_axis))
    n = float(np.vdot(u_l, u_l).real)
    if n < 1e-24 * float(np.vdot(e_laser, e_laser).real):
        raise DegenerateConfigurationError(
            "chain extinguishes the laser field; transmitted-intensity "
            "normalization is undefined"
        )
    a_new = a0 * float(np.vdot(u_d, u_d).real) / n
    overlap = complex(np.vdot(u_l, u_d)) / n
    bc = b0 * np.exp(1j * psi0) * overlap
    return a_new, float(abs(bc)), normalize_phase(float(np.angle(bc)))


@dataclass(frozen=True)
class SeparationGeometry:
    """Fixed optical geometry of the component-separation measurement."""

    dipole_angle: float = math.pi / 4.0          # dipole at 45 deg from laser
    polarizer_angle: float = 80.0 * math.pi / 180.0
    polarizer_extinction_ratio: float = 0.0
    laser: tuple = (0.0, 1.0)                    # along the lab y-axis

    def laser_vector(self) -> np.ndarray:
        return np.array(self.laser, dtype=complex)

    def chain(self, theta_qwp: float) -> PolarizationChain:
        return PolarizationChain(
            (
                ChainElement("quarter_waveplate", theta_qwp),
                ChainElement("polarizer", self.polarizer_angle,
                             self.polarizer_extinction_ratio),
            )
        )


def separate_components(
    spectra: Sequence[tuple],
    geometry: SeparationGeometry,
    opts: Optional[FitOptions] = None,
) -> FitResult:
    """Joint fit of a QWP-angle series of transmission traces.

    spectra: (theta_qwp, SpectrumTrace) pairs sharing one underlying
    molecule/drive state.  Every trace is modeled by the extinction spectrum
    whose per-trace (A', B', psi') derive from the shared intrinsic triple
    via transform_extinction_triple.  Returns the fitted
    (A0, B0, psi0, gamma, center) with standard errors.
    """
    if len(spectra) < 3:
        raise RankDeficientError("need >= 3 spectra at distinct QWP angles")
    thetas = [float(t) for t, _ in spectra]
    if len({round(t, 12) for t in thetas}) < 3:
        raise RankDeficientError("QWP angles are degenerate; need >= 3 distinct angles")
    traces = [tr for _, tr in spectra]
    for tr in traces[1:]:
        traces[0].require_same_units(tr)

    chains = [geometry.chain(t) for t in thetas]
    e_l = geometry.laser_vector()

    # seed gamma/center from the most structured trace
    spans = [float(np.ptp(tr.values)) for tr in traces]
    k = int(np.argmax(spans))
    center0, gamma0, a_lin, b_lin, psi_lin, _ = estimation._init_extinction(traces[k])

    pars = [
        Parameter("A0", max(a_lin, 1e-3), lo=0.0),
        Parameter("B0", max(b_lin, 1e-3), lo=0.0),
        Parameter("psi0", psi_lin),
        Parameter("gamma", gamma0, lo=1e-12),
        Parameter("center", center0),
    ]

    def residual(p):
        a0, b0, psi0, gamma, center = p
        out = []
        for chain, tr in zip(chains, traces):
            ap, bp, psip = transform_extinction_triple(
                chain, e_l, geometry.dipole_angle, a0, b0, psi0
            )
            model = extinction_fit_model(tr.grid, gamma, ap, bp, psip, center, 1.0)
            out.append(model - tr.values)
        return np.concatenate(out)

    res = minimize(FitProblem(residual, pars), opts)
    if res.status == "max_iter":
        raise estimation.NotConvergedError(
            f"component separation did not converge (last cost {res.cost:.3g})", res
        )
    if res.status == "rank_deficient":
        raise RankDeficientError("component separation is rank deficient")
    res.params["psi0"] = normalize_phase(res.params["psi0"])
    return res
