"""Analytical two-level reduction of the charging dynamics.

For weak coupling the quench connects the initial product state
|0> = (battery ground) x phi_1 mainly to the single resonant state
|1> = (one battery particle promoted to mode n) x phi_0. Projecting the
full Hamiltonian on that pair gives a Rabi problem with

    detuning   delta = omega_C - n omega_B
                      + g_BC [N I01 - (N - 1) I00 - In0]
    coupling   J     = g_BC sqrt(N) |In|
    frequency  Omega = sqrt((2 J)^2 + delta^2)

and stored work W_B(t) = n omega_B (2J/Omega)^2 sin^2(Omega t / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .integrals import fermionic_overlap, overlap_set

_BISECT_TOL = 1e-10
_BRACKET_HALF_WIDTH = 0.5


@dataclass(frozen=True)
class TwoLevelParams:
    """Reduced description of one (n, N_B, g_BC, omega_C) configuration."""

    n: int
    num_particles: int
    g_BC: float
    omega_B: float
    omega_C: float
    delta: float
    coupling: float           # J = g_BC sqrt(N) |In|
    overlap_In: float         # signed
    diag_initial: float       # <0|H1|0>
    diag_charged: float       # <1|H1|1>
    off_diag: float           # <0|H1|1>, signed

    @property
    def rabi_frequency(self):
        return math.hypot(2.0 * self.coupling, self.delta)

    @property
    def transfer_amplitude(self):
        """Peak transfer probability (2J/Omega)^2."""
        omega = self.rabi_frequency
        if omega == 0.0:
            return 0.0
        return (2.0 * self.coupling / omega) ** 2


def tlm_params(n, num_particles, g_BC, omega_C, omega_B=1.0):
    """Projected 2x2 matrix elements for a target excitation n."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if num_particles < 1:
        raise ConfigError("need at least one battery particle")
    ov = overlap_set(n, omega_B, omega_C)
    nb = num_particles
    diag_initial = (0.5 * nb * omega_B + 1.5 * omega_C
                    + nb * g_BC * ov.I01)
    diag_charged = ((0.5 * nb + n) * omega_B + 0.5 * omega_C
                    + g_BC * ((nb - 1) * ov.I00 + ov.In0))
    off_diag = g_BC * math.sqrt(nb) * ov.In
    return TwoLevelParams(
        n=n, num_particles=nb, g_BC=g_BC, omega_B=omega_B, omega_C=omega_C,
        delta=diag_initial - diag_charged,
        coupling=abs(off_diag),
        overlap_In=ov.In,
        diag_initial=diag_initial,
        diag_charged=diag_charged,
        off_diag=off_diag)


_DELTA_BRACKETS = {
    1: lambda w, nb: (w - nb,),
    3: lambda w, nb: (w**3 + (1.5 - nb) * w**2 + (3 - 2 * nb) * w - nb,),
    5: lambda w, nb: (w**5 + (25.0 / 8.0 - nb) * w**4 + (10 - 4 * nb) * w**3
                      + (5 - 6 * nb) * w**2 + (5 - 4 * nb) * w - nb,),
    7: lambda w, nb: (w**7 + (77.0 / 16.0 - nb) * w**6 + (21 - 6 * nb) * w**5
                      + (175.0 / 8.0 - 15 * nb) * w**4 + (35 - 20 * nb) * w**3
                      + (10.5 - 15 * nb) * w**2 + (7 - 6 * nb) * w - nb,),
    9: lambda w, nb: (w**9 + (837.0 / 128.0 - nb) * w**8 + (36 - 8 * nb) * w**7
                      + (57.75 - 28 * nb) * w**6 + (126 - 56 * nb) * w**5
                      + (78.75 - 70 * nb) * w**4 + (84 - 56 * nb) * w**3
                      + (18 - 28 * nb) * w**2 + (9 - 8 * nb) * w - nb,),
}


def delta_poly(n, num_particles, g_BC, omega_C):
    """Closed polynomial form of the detuning at omega_B = 1, odd n <= 9.

    delta = omega_C - n
            + g_BC sqrt(omega_C / pi) P_n(omega_C; N) / (1 + omega_C)^(n + 1/2)
    """
    fn = _DELTA_BRACKETS.get(n)
    if fn is None:
        raise ConfigError(f"no closed detuning polynomial for n={n}")
    w = omega_C
    bracket = fn(w, num_particles)[0]
    return (w - n + g_BC * math.sqrt(w / math.pi) * bracket
            / (1.0 + w) ** (n + 0.5))


def resonance_solve(n, num_particles, g_BC, omega_B=1.0, tol=_BISECT_TOL):
    """Root of delta(omega_C) = 0 near omega_C = n omega_B, by bisection.

    The bracket starts at (n -/+ 0.5) omega_B and widens adaptively if the
    detuning does not change sign across it.
    """
    if n < 1 or n % 2 == 0:
        raise ConfigError("resonant transfer requires odd n >= 1")

    def delta_of(w):
        return tlm_params(n, num_particles, g_BC, w, omega_B=omega_B).delta

    lo = (n - _BRACKET_HALF_WIDTH) * omega_B
    hi = (n + _BRACKET_HALF_WIDTH) * omega_B
    flo, fhi = delta_of(lo), delta_of(hi)
    widen = 0
    while flo * fhi > 0.0 and widen < 8:
        span = hi - lo
        lo = max(lo - span, 1e-6 * omega_B)
        hi = hi + span
        flo, fhi = delta_of(lo), delta_of(hi)
        widen += 1
    if flo * fhi > 0.0:
        raise ConfigError(
            f"no detuning sign change near n={n} for N={num_particles}, "
            f"g_BC={g_BC}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = delta_of(mid)
        if abs(fmid) < tol or (hi - lo) < 1e-14 * omega_B:
            return mid
        if flo * fmid <= 0.0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def wb_tlm(params, t):
    """Stored work n omega_B (2J/Omega)^2 sin^2(Omega t / 2)."""
    t = np.asarray(t, dtype=float)
    omega = params.rabi_frequency
    amp = params.n * params.omega_B * params.transfer_amplitude
    out = amp * np.sin(0.5 * omega * t) ** 2
    return float(out) if out.ndim == 0 else out


def ergotropy_tlm(params, t):
    """Two-level ergotropy: max of the two extraction branches.

    With transfer probability P(t), either the (n-1) quanta above the
    passive state are extractable, or all (n+1)-weighted population minus
    one trapped quantum, whichever is larger:
        max[(n-1) wB P, (n+1) wB P - wB].
    """
    t = np.asarray(t, dtype=float)
    prob = params.transfer_amplitude * np.sin(0.5 * params.rabi_frequency * t) ** 2
    wb = params.omega_B
    n = params.n
    branch_low = (n - 1) * wb * prob
    branch_high = (n + 1) * wb * prob - wb
    out = np.maximum(branch_low, branch_high)
    return float(out) if out.ndim == 0 else out


def qsl_tlm(params):
    """pi / (2 J): the Mandelstam-Tamm time of the reduced model."""
    if params.coupling == 0.0:
        return math.inf
    return math.pi / (2.0 * params.coupling)


def power_tlm(params):
    """Upper charging power bound W_C(0) / tau_QSL with W_C(0) = omega_C."""
    tau = qsl_tlm(params)
    if math.isinf(tau):
        return 0.0
    return params.omega_C / tau


def qsl_fermionic(num_particles, n, g_BC, omega_C, omega_B=1.0):
    """QSL time for a polarized-fermion battery of the same size."""
    overlap = fermionic_overlap(num_particles, n, omega_B, omega_C)
    if overlap == 0.0:
        return math.inf
    return math.pi / (2.0 * g_BC * abs(overlap))
