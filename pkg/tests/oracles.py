"""Independent numerical oracles used by the test suite.

Both oracles integrate the optical Bloch equations written out explicitly
as coupled scalar ODEs (quantum regression for two-time quantities), with
tight integrator tolerances.  They deliberately avoid the package's
Liouvillian/eigen machinery so the two computational paths share nothing
but the physical model.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp

TWO_PI = 2.0 * math.pi


def _rates(gamma0_mhz, gamma_mhz, rabi_mhz):
    """Angular rates in rad/us: population decay, coherence decay, Rabi."""
    return TWO_PI * gamma0_mhz, math.pi * gamma_mhz, TWO_PI * rabi_mhz


def g2_ode(tau_ns, gamma0_mhz, gamma_mhz, rabi_mhz, rtol=1e-12, atol=1e-14):
    """g2 via direct integration of (rho_ee, v) from the ground state,
    normalized by the steady-state excited population."""
    g1, g2r, w = _rates(gamma0_mhz, gamma_mhz, rabi_mhz)

    def rhs(t, y):
        ree, v = y
        return [-g1 * ree + 0.5 * w * v, -g2r * v - w * (2.0 * ree - 1.0)]

    a = np.array([[-g1, 0.5 * w], [-2.0 * w, -g2r]])
    ree_ss, _ = np.linalg.solve(a, [0.0, -w])
    tau_us = np.asarray(tau_ns, dtype=float) * 1e-3
    sol = solve_ivp(rhs, (0.0, float(tau_us.max())), [0.0, 0.0],
                    t_eval=tau_us, rtol=rtol, atol=atol, method="DOP853")
    return sol.y[0] / ree_ss


def mollow_ode(freq_mhz, gamma0_mhz, gamma_mhz, rabi_mhz,
               n_decay=45.0, rtol=1e-11, atol=1e-14):
    """Incoherent emission spectral density per MHz via quantum regression.

    Integrates the correlation vector (s, p, z) = (<s->, <s+>, <sz>) evolved
    from M = s- rho_ss, together with one Fourier accumulator per requested
    frequency; the density is 2*Re of the one-sided transform of
    C_inc(tau) = p(tau) - |<s->_ss|^2, rescaled by 2 so the integral equals
    the incoherent emitted-intensity factor (the rate convention counts
    2*rho_ee = S/(1+S), while C_total(0) = rho_ee).
    """
    g1, g2r, w = _rates(gamma0_mhz, gamma_mhz, rabi_mhz)
    freq = np.asarray(freq_mhz, dtype=float)
    omega = TWO_PI * freq

    # steady state of the one-time equations
    sat = w * w / (g1 * g2r)
    z_ss = -1.0 / (1.0 + sat)
    s_ss = 0.5j * w * z_ss / g2r
    ree_ss = 0.5 * (1.0 + z_ss)
    reg_ss = s_ss          # rho_eg
    c_inf = abs(s_ss) ** 2

    # initial correlation vector from M = s- rho_ss
    s0 = 0.0 + 0.0j
    p0 = ree_ss + 0.0j
    z0 = -reg_ss
    m0 = reg_ss            # Tr[M], constant under the evolution

    nf = omega.size

    def rhs(t, y):
        s, p, z = y[0], y[1], y[2]
        ds = 0.5j * w * z - g2r * s
        dp = -0.5j * w * z - g2r * p
        dz = -1j * w * (p - s) - g1 * (z + m0)
        c_inc = p - c_inf
        df = np.exp(-1j * omega * t) * c_inc
        return np.concatenate(([ds, dp, dz], df))

    decay = min(g1, g2r)
    t_end = n_decay / decay
    y0 = np.concatenate(([s0, p0, z0], np.zeros(nf, dtype=complex)))
    sol = solve_ivp(rhs, (0.0, t_end), y0, rtol=rtol, atol=atol, method="DOP853")
    fourier = sol.y[3:, -1]
    return 2.0 * 2.0 * np.real(fourier)
