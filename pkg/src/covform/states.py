"""Reference field configurations: plane waves, vacua, random test states.

All builders return DFStates via prolong(), so the prolongation slots are
always consistent with the primary fields.  Plane-wave wavevectors use
integer mode numbers, k_a = 2 pi n_a / L, so the fields are exactly
periodic on the chart; masses are fixed by the dispersion relation
k.k = m^2 evaluated in the (+,-,-,-) signature.
"""

from __future__ import annotations

import numpy as np

from .connections import (Background, LinearConnection, SpacetimeConnection,
                          SpinorConnection, gamma_matrices, levi_civita)
from .dynamics import DFState, matter_signature, prolong
from .fiber import FiberSignature, Metric
from .grid import Chart, GridField, make_trig_field


def wave_covector(chart: Chart, modes) -> np.ndarray:
    """k_a = 2 pi n_a / L for integer mode numbers n_a."""
    modes = np.asarray(modes, dtype=float)
    if modes.shape != (chart.m,):
        raise ValueError("mode vector length mismatch")
    return 2.0 * np.pi * modes / chart.box


def minkowski_norm(k: np.ndarray) -> float:
    """k.k in the (+,-,-,-) signature."""
    return float(k[0] ** 2 - np.sum(k[1:] ** 2))


def flat_background(chart: Chart, spinor: bool = False) -> Background:
    sp = SpinorConnection(chart) if spinor else None
    return Background(Metric.minkowski(chart), SpacetimeConnection.zero(chart),
                      spinor=sp)


def phase_field(chart: Chart, modes, sign: float = 1.0) -> np.ndarray:
    """exp(sign * i k.x) sampled on the grid."""
    k = wave_covector(chart, modes)
    arg = np.zeros(chart.shape)
    for a in range(chart.m):
        arg = arg + k[a] * chart.coords(a)
    return np.exp(sign * 1j * arg)


def klein_gordon_wave(chart: Chart, modes=(2, 1, 1, 1), amplitude: float = 1.0,
                      order: int = 2) -> DFState:
    """Free scalar plane wave with k.k = m^2: an exact continuum solution."""
    k = wave_covector(chart, modes)
    ksq = minkowski_norm(k)
    if ksq <= 0:
        raise ValueError("need a timelike mode vector")
    mass = np.sqrt(ksq)
    ph = phase_field(chart, modes)
    sig = matter_signature("boson", 1, 1)
    phi = GridField(chart, sig,
                    (amplitude * ph)[..., None, None, None].astype(complex))
    phibar = GridField(chart, sig.dual(), np.conj(phi.data))
    kappa = LinearConnection.zero(chart, 1, dtype=complex)
    return prolong("boson", phi=phi, phibar=phibar, kappa=kappa,
                   background=flat_background(chart), mass=mass, order=order)


def dirac_wave(chart: Chart, modes=(2, 1, 1, 1), order: int = 2) -> DFState:
    """Free Dirac plane wave psi = u exp(-i k.x) with (gamma.k - m) u = 0."""
    k = wave_covector(chart, modes)
    ksq = minkowski_norm(k)
    if ksq <= 0:
        raise ValueError("need a timelike mode vector")
    mass = np.sqrt(ksq)
    gam = gamma_matrices(chart.m)
    op = np.einsum("a,aij->ij", k, gam) - mass * np.eye(4)
    _, sv, vh = np.linalg.svd(op)
    if sv[-1] > 1e-10:
        raise ValueError("dispersion relation violated: no spinor solution")
    u = vh[-1].conj()
    ubar = u.conj() @ gam[0]
    ph = phase_field(chart, modes, sign=-1.0)
    sig = matter_signature("dirac", 1)
    psi = GridField(chart, sig,
                    np.einsum("...,b->...b", ph, u)[..., None, :, None])
    psibar = GridField(chart, sig.dual(),
                       np.einsum("...,b->...b", np.conj(ph), ubar)[..., None, :, None])
    kappa = LinearConnection.zero(chart, 1, dtype=complex)
    return prolong("dirac", phi=psi, phibar=psibar, kappa=kappa,
                   background=flat_background(chart, spinor=True),
                   mass=mass, order=order)


def abelian_vacuum(chart: Chart, field_strength: float = 0.5,
                   order: int = 2) -> DFState:
    """Abelian connection with constant curvature: kappa_1 = -F x^0.

    The profile is linear, hence NOT periodic; derivative checks must be
    restricted to interior points (see grid.interior_mask, axis 0).
    """
    kap = np.zeros(chart.shape + (chart.m, 1, 1))
    kap[..., 1, 0, 0] = -field_strength * np.broadcast_to(
        chart.coords(0), chart.shape)
    kappa = LinearConnection(chart, kap)
    st = prolong("gauge", kappa=kappa, background=flat_background(chart),
                 order=order)
    st.meta["aperiodic_axis"] = 0
    return st


def so3_basis() -> tuple:
    """Real antisymmetric basis of so(3)."""
    j1 = np.array([[0., 0, 0], [0, 0, -1], [0, 1, 0]])
    j2 = np.array([[0., 0, 1], [0, 0, 0], [-1, 0, 0]])
    j3 = np.array([[0., -1, 0], [1, 0, 0], [0, 0, 0]])
    return (j1, j2, j3)


def random_so3_connection(chart: Chart, seed: int, max_wavenumber: int = 1,
                          amplitude: float = 0.5) -> LinearConnection:
    """kappa = sum_k c^k(x) J_k with random trig coefficient fields."""
    basis = so3_basis()
    coefs = [make_trig_field(chart, FiberSignature((), 1, "standard"),
                             seed=seed + 13 * k, max_wavenumber=max_wavenumber,
                             amplitude=amplitude).data
             for k in range(3)]
    kap = np.zeros(chart.shape + (chart.m, 3, 3))
    for c, j in zip(coefs, basis):
        kap = kap + c[..., None, None] * j
    return LinearConnection(chart, kap, basis=basis)


def random_spacetime_connection(chart: Chart, seed: int, amplitude: float = 0.3,
                                n_terms: int = 4,
                                torsion_free: bool = False) -> SpacetimeConnection:
    """Random smooth Gamma: constant coefficient tensors times trig scalars.

    The continuum connection is resolution-independent, so refining the
    chart refines the same smooth field.  torsion_free symmetrizes the
    coefficients in the (derivative, lower) index pair.
    """
    m = chart.m
    rng = np.random.default_rng(seed)
    gam = np.zeros(chart.shape + (m, m, m))
    for k in range(n_terms):
        b = amplitude * rng.uniform(-1.0, 1.0, size=(m, m, m))
        if torsion_free:
            b = 0.5 * (b + b.transpose(2, 1, 0))
        c = make_trig_field(chart, FiberSignature((), 0, "standard"),
                            seed=seed + 71 * k + 1, max_wavenumber=1).data[..., 0]
        gam = gam + c[..., None, None, None] * b
    return SpacetimeConnection(chart, gam)


def random_complementary_field(chart: Chart, seed: int, r: int, n: int = 3,
                               max_wavenumber: int = 1) -> GridField:
    """Random trig internal-vector-valued complementary field with r indices."""
    from .fiber import InternalVector
    sig = FiberSignature((InternalVector(n),), r, "complementary")
    return make_trig_field(chart, sig, seed=seed, max_wavenumber=max_wavenumber)


def random_boson_state(chart: Chart, seed: int, n: int = 3, n_extra: int = 2,
                       mass: float = 0.8, max_wavenumber: int = 1,
                       order: int = 2,
                       kappa: LinearConnection | None = None) -> DFState:
    """Random trig boson state coupled to a (default so(3)) connection."""
    if kappa is None:
        kappa = random_so3_connection(chart, seed + 1000,
                                      max_wavenumber=max_wavenumber)
        n = 3
    sig = matter_signature("boson", n, n_extra)
    phi = make_trig_field(chart, sig, seed=seed, max_wavenumber=max_wavenumber)
    phibar = make_trig_field(chart, sig.dual(), seed=seed + 1,
                             max_wavenumber=max_wavenumber)
    return prolong("boson", phi=phi, phibar=phibar, kappa=kappa,
                   background=flat_background(chart), mass=mass, order=order)


def random_dirac_state(chart: Chart, seed: int, n: int = 3,
                       mass: float = 0.8, max_wavenumber: int = 1,
                       order: int = 2) -> DFState:
    kappa = random_so3_connection(chart, seed + 2000,
                                  max_wavenumber=max_wavenumber)
    sig = matter_signature("dirac", n)
    psi = make_trig_field(chart, sig, seed=seed, max_wavenumber=max_wavenumber)
    psibar = make_trig_field(chart, sig.dual(), seed=seed + 1,
                             max_wavenumber=max_wavenumber)
    return prolong("dirac", phi=psi, phibar=psibar, kappa=kappa,
                   background=flat_background(chart, spinor=True),
                   mass=mass, order=order)


def random_gauge_state(chart: Chart, seed: int, max_wavenumber: int = 1,
                       order: int = 2) -> DFState:
    kappa = random_so3_connection(chart, seed, max_wavenumber=max_wavenumber)
    return prolong("gauge", kappa=kappa, background=flat_background(chart),
                   order=order)


def frw_gravity_state(chart: Chart, eps: float = 0.1, order: int = 2) -> DFState:
    """FRW test metric with its Levi-Civita connection."""
    met = Metric.frw(chart, eps=eps)
    bg = Background(met, levi_civita(met, order))
    return prolong("gravity", background=bg, order=order)


def minkowski_gravity_state(chart: Chart, order: int = 2) -> DFState:
    bg = Background(Metric.minkowski(chart), SpacetimeConnection.zero(chart))
    return prolong("gravity", background=bg, order=order)
