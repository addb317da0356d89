"""Frequency-domain forward models.

Contains the sampled-trace container, the power-broadened Lorentzian, the
extinction (interference) spectrum, the incoherent resonance-fluorescence
spectrum of a resonantly driven two-level system (Mollow triplet), and the
Fabry-Perot instrument response with its convolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .physics import (
    DriveParams,
    MoleculeParams,
    TWO_PI,
    cyclic_to_angular,
    saturation_parameter,
)


# ---------------------------------------------------------------------------
# Trace container and serialization
# ---------------------------------------------------------------------------

@dataclass
class SpectrumTrace:
    """A sampled function of frequency.

    grid:       strictly increasing frequencies (MHz); freq_kind tags whether
                they are laser detunings, analyzer scan frequencies, ...
    values:     finite samples; value_kind tags the physical meaning
    meta:       provenance (generator name, parameters, seed if stochastic)
    """

    grid: np.ndarray
    values: np.ndarray
    freq_kind: str = "detuning_MHz"
    value_kind: str = "dimensionless"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.values.ndim != 1:
            raise ValueError("grid and values must be 1-D arrays")
        if self.grid.size != self.values.size:
            raise ValueError(
                f"grid ({self.grid.size}) and values ({self.values.size}) length mismatch"
            )
        if self.grid.size >= 2 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.grid)) or not np.all(np.isfinite(self.values)):
            raise ValueError("grid and values must be finite")

    def require_same_units(self, other: "SpectrumTrace"):
        if (self.freq_kind, self.value_kind) != (other.freq_kind, other.value_kind):
            raise ValueError(
                f"unit mismatch: ({self.freq_kind}, {self.value_kind}) vs "
                f"({other.freq_kind}, {other.value_kind})"
            )

    # -- JSON (bit-exact round trip) --

    def to_json(self) -> str:
        return json.dumps(
            {
                "grid": [float(x) for x in self.grid],
                "values": [float(x) for x in self.values],
                "freq_kind": self.freq_kind,
                "value_kind": self.value_kind,
                "meta": self.meta,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectrumTrace":
        d = json.loads(text)
        return cls(
            grid=np.array(d["grid"], dtype=float),
            values=np.array(d["values"], dtype=float),
            freq_kind=d["freq_kind"],
            value_kind=d["value_kind"],
            meta=d.get("meta", {}),
        )

    # -- CSV (two columns, '#' meta header) --

    def to_csv(self) -> str:
        lines = [
            f"# freq_kind = {self.freq_kind}",
            f"# value_kind = {self.value_kind}",
            f"# meta = {json.dumps(self.meta)}",
            "frequency_MHz,value",
        ]
        for x, y in zip(self.grid, self.values):
            lines.append(f"{float(x)!r},{float(y)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SpectrumTrace":
        freq_kind, value_kind, meta = "detuning_MHz", "dimensionless", {}
        grid, values = [], []
        header_seen = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("freq_kind ="):
                    freq_kind = body.split("=", 1)[1].strip()
                elif body.startswith("value_kind ="):
                    value_kind = body.split("=", 1)[1].strip()
                elif body.startswith("meta ="):
                    meta = json.loads(body.split("=", 1)[1].strip())
                continue
            if not header_seen:
                header_seen = True  # column-name row
                continue
            a, b = line.split(",")
            grid.append(float(a))
            values.append(float(b))
        if not header_seen:
            raise ValueError("CSV trace is missing its header row")
        return cls(np.array(grid), np.array(values), freq_kind, value_kind, meta)


# ---------------------------------------------------------------------------
# Extinction model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtinctionModel:
    """Coefficients of the simplified transmission spectrum.

    I_d/I_e = 1 + A*L(nu) - B*L(nu)*(Delta*cos(psi) + gamma/2*sin(psi))
    """

    A: float
    B: float
    psi: float
    mol: MoleculeParams
    drive: DriveParams

    def __post_init__(self):
        if self.A < 0 or self.B < 0:
            raise ValueError("A and B must be non-negative")


def lorentzian_profile(delta, mol: MoleculeParams, rabi: float):
    """Power-broadened Lorentzian L = 1/(Delta^2 + gamma^2/4 + Omega^2*gamma/(2*gamma0)).

    Units MHz^-2; FWHM in Delta is gamma*sqrt(1+S) with S the on-resonance
    saturation parameter.
    """
    if rabi < 0:
        raise ValueError(f"rabi must be >= 0, got {rabi}")
    delta = np.asarray(delta, dtype=float)
    den = delta**2 + mol.gamma**2 / 4.0 + rabi**2 * mol.gamma / (2.0 * mol.gamma0)
    return 1.0 / den


def extinction_spectrum(model: ExtinctionModel, grid) -> SpectrumTrace:
    """Evaluate the interference transmission spectrum I_d/I_e on a detuning grid."""
    grid = np.asarray(grid, dtype=float)
    L = lorentzian_profile(grid, model.mol, model.drive.rabi)
    shape = grid * math.cos(model.psi) + model.mol.gamma / 2.0 * math.sin(model.psi)
    vals = 1.0 + model.A * L - model.B * L * shape
    return SpectrumTrace(
        grid,
        vals,
        freq_kind="detuning_MHz",
        value_kind="transmission",
        meta={
            "generator": "extinction_spectrum",
            "A": model.A,
            "B": model.B,
            "psi": model.psi,
            "gamma": model.mol.gamma,
            "rabi": model.drive.rabi,
        },
    )


# ---------------------------------------------------------------------------
# Mollow triplet (resonant drive)
# ---------------------------------------------------------------------------

def _bloch_liouvillian(gamma0_mhz: float, gamma_mhz: float, rabi_mhz: float) -> np.ndarray:
    """Liouvillian of the resonantly driven two-level system, 4x4 on
    column-stacked rho = (rho_gg, rho_eg, rho_ge, rho_ee).

    Angular rates in rad/us: population decay 2*pi*gamma0, total coherence
    decay pi*gamma (pure dephasing makes up the difference).
    """
    g1 = cyclic_to_angular(gamma0_mhz)          # population decay
    g2 = math.pi * gamma_mhz                    # coherence decay
    gphi = g2 - g1 / 2.0                        # pure dephasing (>= 0)
    w = cyclic_to_angular(rabi_mhz)

    sm = np.array([[0, 1], [0, 0]], dtype=complex)   # |g><e|
    sp = sm.T.conj()
    sz = np.array([[-1, 0], [0, 1]], dtype=complex)
    ident = np.eye(2, dtype=complex)
    h = (w / 2.0) * (sp + sm)

    def lindblad(a, rate):
        ada = a.conj().T @ a
        return rate * (
            np.kron(a.conj(), a)
            - 0.5 * (np.kron(ident, ada) + np.kron(ada.T, ident))
        )

    liou = -1j * (np.kron(ident, h) - np.kron(h.T, ident))
    liou += lindblad(sm, g1)
    liou += lindblad(sz, gphi / 2.0)
    return liou


def _steady_state(liou: np.ndarray) -> np.ndarray:
    """Trace-one density matrix in the kernel of the Liouvillian."""
    vals, vecs = np.linalg.eig(liou)
    k = int(np.argmin(np.abs(vals)))
    rho = vecs[:, k].reshape(2, 2, order="F")
    rho = rho / np.trace(rho)
    return rho


def steady_state_expectations(mol: MoleculeParams, drive: DriveParams):
    """(rho_ee, <sigma->) of the driven steady state."""
    if drive.detuning != 0.0:
        raise ValueError("only resonant drive (detuning = 0) is supported")
    liou = _bloch_liouvillian(mol.gamma0, mol.gamma, drive.rabi)
    rho = _steady_state(liou)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    return float(rho[1, 1].real), complex(np.trace(sm @ rho))


def _incoherent_correlation_modes(mol: MoleculeParams, rabi: float):
    """Eigen-expansion of C_inc(tau) = <s+(t+tau) s-(t)> - |<s->|^2.

    Returns (amplitudes beta_k, rates lambda_k) with
    C_inc(tau) = sum_k beta_k exp(lambda_k tau), tau in us.
    """
    liou = _bloch_liouvillian(mol.gamma0, mol.gamma, rabi)
    rho = _steady_state(liou)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    sp = sm.T.conj()

    s_ss = complex(np.trace(sm @ rho))
    x0 = (sm @ rho - s_ss * rho).flatten(order="F")  # coherent part removed
    w_vec = sp.T.flatten(order="F")                  # Tr[sp X] = w_vec . vec(X)

    vals, vecs = np.linalg.eig(liou)
    alpha = np.linalg.solve(vecs, x0)
    beta = (w_vec @ vecs) * alpha
    # stationary mode carries no incoherent weight by construction
    k0 = int(np.argmin(np.abs(vals)))
    beta[k0] = 0.0
    return beta, vals


def mollow_spectrum(
    mol: MoleculeParams,
    drive: DriveParams,
    grid,
    emission_scale: float = 1.0,
) -> SpectrumTrace:
    """Incoherent emission spectral density vs emission detuning (MHz).

    Resonant drive only.  Normalized so the trace integrates to the
    incoherent emitted-intensity factor (S^2/(1+S)^2 for a lifetime-limited
    emitter) times emission_scale.  Exactly even on symmetric grids.
    """
    if drive.detuning != 0.0:
        raise ValueError("mollow_spectrum requires resonant drive (detuning = 0)")
    if drive.rabi < 0 or mol.gamma <= 0:
        raise ValueError("rabi must be >= 0 and gamma > 0")
    grid = np.asarray(grid, dtype=float)
    beta, lam = _incoherent_correlation_modes(mol, drive.rabi)

    # the density is even in the emission detuning: evaluating at |grid|
    # makes that exact (bitwise) on symmetric grids
    omega = TWO_PI * np.abs(grid)  # rad/us
    dens = np.zeros_like(grid)
    for b, l in zip(beta, lam):
        if b == 0.0:
            continue
        t_pos = np.real(b / (1j * omega - l))
        t_neg = np.real(b / (-1j * omega - l))
        dens += t_pos + t_neg
    vals = 2.0 * emission_scale * dens
    s = saturation_parameter(mol, drive)
    return SpectrumTrace(
        grid,
        vals,
        freq_kind="emission_detuning_MHz",
        value_kind="spectral_density_per_MHz",
        meta={
            "generator": "mollow_spectrum",
            "rabi": drive.rabi,
            "gamma0": mol.gamma0,
            "gamma": mol.gamma,
            "saturation": s,
            "emission_scale": emission_scale,
        },
    )


# ---------------------------------------------------------------------------
# Fabry-Perot instrument
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FpcParams:
    """Scanning Fabry-Perot cavity: free spectral range, instrument FWHM,
    peak transmission."""

    fsr: float
    fwhm: float
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not (0 < self.fwhm < self.fsr):
            raise ValueError(f"need 0 < fwhm < fsr, got fwhm={self.fwhm}, fsr={self.fsr}")
        if not (0 < self.peak_transmission <= 1):
            raise ValueError(f"peak_transmission must be in (0, 1], got {self.peak_transmission}")

    @property
    def finesse_coefficient(self) -> float:
        """Airy coefficient fixed by the FWHM."""
        return 1.0 / math.sin(math.pi * self.fwhm / (2.0 * self.fsr)) ** 2


def fpc_transmission(nu, fpc: FpcParams):
    """Airy transmission T_pk / (1 + F_c sin^2(pi nu / FSR)), periodic in FSR."""
    nu = np.asarray(nu, dtype=float)
    out = fpc.peak_transmission / (
        1.0 + fpc.finesse_coefficient * np.sin(math.pi * nu / fpc.fsr) ** 2
    )
    return out if out.ndim else float(out)


def airy_area_per_fsr(fpc: FpcParams) -> float:
    """Integral of the Airy transmission over one free spectral range.

    Closed form: T_pk * FSR / sqrt(1 + F_c).
    """
    return fpc.peak_transmission * fpc.fsr / math.sqrt(1.0 + fpc.finesse_coefficient)


def convolve_instrument(
    emission: SpectrumTrace,
    fpc: FpcParams,
    laser_background_rate: float = 0.0,
    coherent_delta_weight: float = 0.0,
    scan_grid=None,
) -> SpectrumTrace:
    """Detected count rate vs FPC scan frequency.

    The continuous emission density (counts/s per MHz) is convolved with the
    Airy profile by direct summation; the laser background and the coherent
    (elastic) line enter as delta components at zero detuning, each mapped to
    a scaled Airy lineshape.
    """
    if laser_background_rate < 0 or coherent_delta_weight < 0:
        raise ValueError("rates must be >= 0")
    g = emission.grid
    if g.size < 2:
        raise ValueError("emission trace too short to convolve")
    dg = np.diff(g)
    if np.max(dg) > fpc.fwhm / 4.0:
        raise ValueError(
            f"emission grid spacing {np.max(dg):.3g} MHz undersamples the "
            f"instrument (need <= fwhm/4 = {fpc.fwhm / 4.0:.3g} MHz)"
        )
    if g[-1] - g[0] < fpc.fsr:
        raise ValueError("emission grid must span at least one free spectral range")
    if scan_grid is None:
        scan = g
    else:
        scan = np.asarray(scan_grid, dtype=float)

    # trapezoid weights for the continuous part
    wts = np.zeros_like(g)
    wts[:-1] += dg / 2.0
    wts[1:] += dg / 2.0
    kernel = fpc_transmission(scan[:, None] - g[None, :], fpc)
    cont = kernel @ (emission.values * wts)
    line = (laser_background_rate + coherent_delta_weight) * fpc_transmission(scan, fpc)
    vals = cont + line
    return SpectrumTrace(
        scan,
        vals,
        freq_kind="fpc_scan_MHz",
        value_kind="counts_per_s",
        meta={
            "generator": "convolve_instrument",
            "fsr": fpc.fsr,
            "fwhm": fpc.fwhm,
            "peak_transmission": fpc.peak_transmission,
            "laser_background_rate": laser_background_rate,
            "coherent_delta_weight": coherent_delta_weight,
            "input": emission.meta.get("generator"),
        },
    )
