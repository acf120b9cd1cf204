"""Prolongation, field-equation residuals, energy tensors, currents, action.

A DFState bundles the primary fields (phi, phibar, kappa, background) with
the derived prolongation slots z1 = nabla phi and z2 = d_k k, which are
always recomputed from the primaries.  Field equations come in two
independently coded forms: the covariant one (momenta differentiated with
d_kappa through dual/tensor-product connections) and the simplified
coordinate one (explicit index sums); both are returned for cross checks.

Sign conventions tied to the action S = h^m sum(lambda):
    dS/dphi   = + matter residual * h^m
    dS/dkappa = - gauge residual  * h^m
    dS/dGamma = + 2 * Gamma-sector residual * h^m
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .calculus import (VariationPair, connection_action, d_kappa_basic,
                       matvec_deriv, variation_prolong, _deriv_stack,
                       _product_connection)
from .connections import (Background, LinearConnection, SpacetimeConnection,
                          gamma_matrices, levi_civita, riemann_from_gamma,
                          tensor_product_connection, dkk)
from .fiber import (CoSpinor, Endomorphism, FiberSignature, InternalCovector,
                    InternalVector, Metric, Multiplicity, Spinor, commutator,
                    index_combos, n_slots, pack, unpack)
from .grid import Chart, GridField, diff_axis
from .sectors import (FiberPoint, MomentaTriple, dlambda_tilde_dg,
                      lambda_kernel, momenta_analytic, sector_lambda)

MATTER_SECTORS = ("boson", "dirac")


# ---------------------------------------------------------------------------
# state and prolongation

@dataclass
class DFState:
    """A field configuration with its covariant prolongation slots."""

    sector: str
    chart: Chart
    background: Background
    kappa: LinearConnection | None = None
    phi: GridField | None = None          # degree-0 standard field
    phibar: GridField | None = None       # independent dual partner
    mass: float = 0.0
    order: int = 2
    # derived slots, filled by prolong()
    z1: np.ndarray | None = None          # grid + (m,) + fiber
    z1bar: np.ndarray | None = None
    z2: np.ndarray | None = None          # grid + (C(m,2), n, n) = d_k k
    R: np.ndarray | None = None           # gravity curvature slot
    meta: dict = dc_field(default_factory=dict)

    @property
    def metric(self) -> Metric:
        return self.background.metric

    def fiber_point(self, sector: str | None = None) -> FiberPoint:
        sec = sector or self.sector
        kw = {}
        if sec in MATTER_SECTORS:
            kw = dict(y=self.phi.data[..., 0, :, :],
                      ybar=self.phibar.data[..., 0, :, :],
                      z1=self.z1, z1bar=self.z1bar)
        elif sec == "gauge":
            kw = dict(z2=self.z2)
        elif sec == "gravity":
            kw = dict(R=self.R)
        return FiberPoint(self.chart, sec, self.metric, mass=self.mass, **kw)


def matter_signature(sector: str, n: int, n_extra: int = 1) -> FiberSignature:
    """Fiber signature of the matter field of one sector."""
    if sector == "boson":
        return FiberSignature((InternalVector(n), Multiplicity(n_extra)), 0)
    if sector == "dirac":
        return FiberSignature((Spinor(4), InternalVector(n)), 0)
    raise ValueError(f"no matter field in sector {sector!r}")


def prolong(sector: str, phi: GridField | None = None,
            phibar: GridField | None = None,
            kappa: LinearConnection | None = None,
            background: Background | None = None, mass: float = 0.0,
            order: int = 2) -> DFState:
    """Build a DFState with z1, z2 recomputed from the primary fields."""
    if background is None:
        chart = kappa.chart if kappa is not None else phi.chart
        met = Metric.minkowski(chart)
        background = Background(met, SpacetimeConnection.zero(chart))
    chart = background.Gamma.chart
    s = DFState(sector, chart, background, kappa=kappa, phi=phi,
                phibar=phibar, mass=mass, order=order)
    if sector in MATTER_SECTORS:
        if phi is None or phibar is None:
            raise ValueError("matter sectors need phi and phibar")
        s.z1 = _nabla_section(phi, kappa, background, order)
        s.z1bar = _nabla_section(phibar, kappa, background, order)
    if kappa is not None:
        s.z2 = dkk(kappa, order).data
    if sector == "gravity":
        s.R = riemann_from_gamma(background.Gamma, order).data
    return s


def _nabla_section(phi: GridField, kappa, background, order) -> np.ndarray:
    """nabla phi as a raw grid + (m,) + fiber array."""
    from .calculus import covariant_derivative
    nab = covariant_derivative(phi, kappa=kappa, background=background,
                               order=order)
    return nab.data


# ---------------------------------------------------------------------------
# field equations

def _momenta(s: DFState, sector: str | None = None) -> MomentaTriple:
    sec = sector or s.sector
    return momenta_analytic(sec, s.fiber_point(sec))


def _pi1_field(s: DFState, pi1: np.ndarray, barred: bool) -> GridField:
    """Wrap a Pi1 array as a complementary degree-1 grid field."""
    n = s.phi.data.shape[s.chart.m + 1]
    n_extra = s.phi.data.shape[s.chart.m + 2]
    if s.sector == "boson":
        factors = (InternalVector(n), Multiplicity(n_extra)) if barred \
            else (InternalCovector(n), Multiplicity(n_extra))
    else:
        factors = (Spinor(4), InternalVector(n_extra)) if barred \
            else (CoSpinor(4), InternalCovector(n_extra))
    sig = FiberSignature(factors, 1, "complementary")
    return GridField(s.chart, sig, pi1)


def field_eq_residual(sector: str, s: DFState) -> dict:
    """Matter and gauge field-equation residuals, covariant + simplified."""
    if sector != s.sector:
        raise ValueError("sector/state mismatch")
    m = s.chart.m
    out = {}
    if sector in MATTER_SECTORS:
        mom = _momenta(s)
        pi1 = _pi1_field(s, mom.pi1, barred=False)
        pi1bar = _pi1_field(s, mom.pi1bar, barred=True)
        dk = d_kappa_basic(pi1, kappa=s.kappa, background=s.background,
                           order=s.order)
        dkb = d_kappa_basic(pi1bar, kappa=s.kappa, background=s.background,
                            order=s.order)
        out["matter_cov"] = mom.pi0 - dk.data[..., 0, :, :]
        out["matterbar_cov"] = mom.pi0bar - dkb.data[..., 0, :, :]
        out["matter_simp"] = _matter_simplified(s, mom.pi0, mom.pi1,
                                                barred=False)
        out["matterbar_simp"] = _matter_simplified(s, mom.pi0bar, mom.pi1bar,
                                                   barred=True)
    if s.kappa is not None or sector == "gauge":
        out["gauge_cov"], out["gauge_simp"] = _gauge_residual(s)
    return out


def _matter_simplified(s: DFState, pi0: np.ndarray, pi1: np.ndarray,
                       barred: bool) -> np.ndarray:
    """Pi_i - d_a Pi^a_i - (connection terms), written as explicit sums."""
    m = s.chart.m
    h = s.chart.h
    dsum = np.zeros_like(pi1[..., 0, :, :])
    for a in range(m):
        dsum = dsum + diff_axis(pi1[..., a, :, :], a, h, s.order)
    kap = s.kappa.kappa if s.kappa is not None else None
    if s.sector == "boson":
        # d Pi^a = d_a Pi^a_i + kappa[a,h,i] Pi^a_h (dual action);
        # the barred momenta carry the straight action instead
        if kap is not None:
            if not barred:
                dsum = dsum + np.einsum("...ahi,...ahA->...iA", kap, pi1)
            else:
                dsum = dsum - np.einsum("...aih,...ahA->...iA", kap, pi1)
    else:
        sp = s.background.spinor
        if kap is not None:
            if not barred:
                dsum = dsum + np.einsum("...ahi,...abh->...bi", kap, pi1)
            else:
                dsum = dsum - np.einsum("...aih,...abh->...bi", kap, pi1)
        if sp is not None:
            if not barred:
                dsum = dsum + np.einsum("...agb,...agi->...bi", sp.coeff, pi1)
            else:
                dsum = dsum - np.einsum("...abg,...agi->...bi", sp.coeff, pi1)
    return pi0 - dsum


def _gauge_residual(s: DFState):
    """Source minus d_kappa Pi2, plus the simplified index-sum twin."""
    m = s.chart.m
    n = s.kappa.n
    gmom = _momenta(s, "gauge")
    src = np.zeros(s.chart.shape + (m, n, n),
                   dtype=complex if s.sector == "dirac" else float)
    if s.sector == "boson":
        mom = _momenta(s)
        phi = s.phi.data[..., 0, :, :]
        phibar = s.phibar.data[..., 0, :, :]
        src = (np.einsum("...biA,...jA->...bij", mom.pi1, phi)
               - np.einsum("...bjA,...iA->...bij", mom.pi1bar, phibar))
    elif s.sector == "dirac":
        mom = _momenta(s)
        psi = s.phi.data[..., 0, :, :]
        psibar = s.phibar.data[..., 0, :, :]
        src = (np.einsum("...bci,...cj->...bij", mom.pi1, psi)
               - np.einsum("...bcj,...ci->...bij", mom.pi1bar, psibar))
    # covariant: src - d_kappa Pi2 with the endomorphism-dual action
    sig2 = FiberSignature((Endomorphism(n, dual_rep=True),), 2, "complementary")
    pi2_gf = GridField(s.chart, sig2, gmom.pi2.astype(src.dtype, copy=False))
    dk2 = d_kappa_basic(pi2_gf, kappa=s.kappa, order=s.order)
    cov = src - dk2.data
    # simplified: src + 2 (d_a Pi^{ab i}_j - k[a,j,h] Pi^{ab i}_h
    #                                      + k[a,h,i] Pi^{ab h}_j)
    pi2u = unpack(m, 2, gmom.pi2, m)
    h = s.chart.h
    dterm = np.zeros_like(pi2u[..., 0, :, :, :])
    for a in range(m):
        dterm = dterm + diff_axis(pi2u[..., a, :, :, :], a, h, s.order)
    kap = s.kappa.kappa
    kterm = (-np.einsum("...ajh,...abih->...bij", kap, pi2u)
             + np.einsum("...ahi,...abhj->...bij", kap, pi2u))
    simp = src + 2.0 * (dterm + kterm)
    return cov, simp


def dirac_residual(s: DFState):
    """The usual Dirac forms with the torsion-trace term.

    psi:    i g^{ab} gamma_a nabla_b psi - m psi + (i/2) g^{ab} tau_a gamma_b psi
    psibar: -i g^{ab} (nabla_a psibar) gamma_b - m psibar
            - (i/2) g^{ab} tau_a psibar gamma_b
    """
    if s.sector != "dirac":
        raise ValueError("dirac_residual expects a Dirac state")
    gam = gamma_matrices(s.chart.m)
    g = s.metric
    tau = s.background.Gamma.tau
    tau_up = np.einsum("...ab,...a->...b", g.inv, tau)
    psi = s.phi.data[..., 0, :, :]
    psibar = s.phibar.data[..., 0, :, :]
    # gamma^b nabla_b (indices already paired through g^{ab} gamma_a = gamma^b... )
    slash_z = np.einsum("bcd,...bdi->...ci", gam, s.z1)
    slash_zbar = np.einsum("...aci,acd->...di", s.z1bar, gam)
    res_psi = 1j * slash_z - s.mass * psi \
        + 0.5j * np.einsum("...b,bcd,...di->...ci", tau_up, gam, psi)
    res_psibar = -1j * slash_zbar - s.mass * psibar \
        - 0.5j * np.einsum("...b,...ci,bcd->...di", tau_up, psibar, gam)
    return res_psi, res_psibar


def gravity_residuals(s: DFState) -> dict:
    """Metric-affine gravity: the g-sector (Einstein) and Gamma-sector residuals.

    The Gamma-sector residual is the variational one,
        d_a Pi^{ab}_{cd} + Pi^{ab}_{ch} Gamma[a,d,h] - Pi^{ab}_{hd} Gamma[a,h,c],
    equal to half the discrete action gradient dS/dGamma; it vanishes for
    metric-compatible torsion-free connections.  The metricity diagnostic
    nabla_c(g^{bd} sqrt|g|) is returned alongside.
    """
    if s.sector != "gravity":
        raise ValueError("gravity_residuals expects a gravity state")
    m = s.chart.m
    g = s.metric
    gam = s.background.Gamma.gamma
    mom = _momenta(s)
    # g-sector: Einstein-tensor density (= dS/dg)
    g_res = mom.pi0
    einstein = g_res / g.sqrt_abs_det[..., None, None]
    # Gamma-sector
    pi2u = unpack(m, 2, mom.pi2, m)
    h = s.chart.h
    dterm = np.zeros_like(pi2u[..., 0, :, :, :])
    for a in range(m):
        dterm = dterm + diff_axis(pi2u[..., a, :, :, :], a, h, s.order)
    gamma_res = (dterm
                 + np.einsum("...abch,...adh->...bcd", pi2u, gam)
                 - np.einsum("...abhd,...ahc->...bcd", pi2u, gam))
    # metricity diagnostic: nabla_c (g^{bd} sqrt|g|)
    dens = g.inv * g.sqrt_abs_det[..., None, None]
    ddens = _deriv_stack(dens, s.chart, s.order)            # grid + (c, b, d)
    trg = np.einsum("...cee->...c", gam)
    metricity = (ddens
                 + np.einsum("...cbe,...ed->...cbd", gam, dens)
                 + np.einsum("...cde,...be->...cbd", gam, dens)
                 - trg[..., None, None] * dens[..., None, :, :])
    return {"g_res": g_res, "einstein": einstein, "gamma_res": gamma_res,
            "metricity": metricity}


# ---------------------------------------------------------------------------
# energy tensors

def canonical_energy_tensor(sector: str, s: DFState):
    """U^a_b from the generic momentum contraction and the closed form.

    U^a_b = lambda d^a_b - Pi^a_F z1[b,F] - Pibar^a_F z1bar[b,F]
            - 2 Pi^{ac}_{ij} z2[b,c,i,j]
    """
    if sector != s.sector:
        raise ValueError("sector/state mismatch")
    m = s.chart.m
    g = s.metric
    sg = g.sqrt_abs_det
    fp = s.fiber_point(sector)
    lam = sector_lambda(sector, fp)
    mom = momenta_analytic(sector, fp)
    eye = np.eye(m)
    generic = np.einsum("...,ab->...ab", lam, eye)

    def flat(arr):
        return arr.reshape(arr.shape[:m + 1] + (-1,))

    if sector in MATTER_SECTORS:
        generic = generic - np.einsum("...aF,...bF->...ab", flat(mom.pi1),
                                      flat(s.z1))
        generic = generic - np.einsum("...aF,...bF->...ab", flat(mom.pi1bar),
                                      flat(s.z1bar))
    if sector == "gauge":
        pi2u = unpack(m, 2, mom.pi2, m)
        z2u = unpack(m, 2, s.z2, m)
        generic = generic - 2.0 * np.einsum("...acij,...bcij->...ab", pi2u, z2u)
    if sector == "gravity":
        pi2u = unpack(m, 2, mom.pi2, m)
        z2u = -unpack(m, 2, s.R, m)            # z2 = d_Gamma Gamma = -R
        generic = generic - 2.0 * np.einsum("...acij,...bcij->...ab", pi2u, z2u)

    # closed sector forms
    if sector == "boson":
        z1u = np.einsum("...ab,...bF->...aF", g.inv, flat(s.z1))
        z1bu = np.einsum("...ab,...bF->...aF", g.inv, flat(s.z1bar))
        closed = generic * 0
        closed += np.einsum("...,ab->...ab", lam, eye)
        closed -= 0.5 * sg[..., None, None] * (
            np.einsum("...aF,...bF->...ab", z1bu, flat(s.z1))
            + np.einsum("...aF,...bF->...ab", z1u, flat(s.z1bar)))
    elif sector == "gauge":
        z2u = unpack(m, 2, s.z2, m)
        zup = np.einsum("...ac,...bd,...cdij->...abij", g.inv, g.inv, z2u)
        closed = sg[..., None, None] * (
            0.25 * np.einsum("...cdij,...cdji->...", zup, z2u)[..., None, None]
            * eye
            - np.einsum("...acij,...bcji->...ab", zup, z2u))
    elif sector == "dirac":
        psibar = s.phibar.data[..., 0, :, :]
        psi = s.phi.data[..., 0, :, :]
        gam = gamma_matrices(m)
        # closed: lam d^a_b - (i/2) sg (psibar gamma^a z_b - zbar_b gamma^a psi)
        t1 = np.einsum("...ci,acd,...bdi->...ab", psibar, gam, s.z1)
        t2 = np.einsum("...bci,acd,...di->...ab", s.z1bar, gam, psi)
        closed = (np.einsum("...,ab->...ab", lam, eye)
                  - 0.5j * sg[..., None, None] * (t1 - t2))
    elif sector == "gravity":
        Ru = unpack(m, 2, s.R, m)               # R[b,c,cc,d] = R_{bc}{}^{cc}_d
        closed = (np.einsum("...,ab->...ab", lam, eye)
                  + sg[..., None, None] *
                  (np.einsum("...cd,...bcad->...ab", g.inv, Ru)
                   - np.einsum("...ad,...bccd->...ab", g.inv, Ru)))
    else:
        raise ValueError(f"unknown sector {sector!r}")
    return generic, closed


def stress_energy_tensor(sector: str, s: DFState) -> dict:
    """T^{ab} = -(d(lambda/sqrt|g|)/dg_{ab} + (lambda/sqrt|g|)/2 g^{ab}).

    Also returns T_rel^{ab} = -(U^{ab} + U^{ba})/(4 sqrt|g|); the two agree
    for the S-term-free sectors.  Dirac is supported on constant flat
    metrics only, where T is defined through T_rel.
    """
    if sector != s.sector:
        raise ValueError("sector/state mismatch")
    g = s.metric
    sg = g.sqrt_abs_det
    u_gen, _ = canonical_energy_tensor(sector, s)
    u_low = np.einsum("...ca,...cb->...ab", g.g, u_gen)     # U_{ab}
    t_rel_low = -(u_low + np.swapaxes(u_low, -1, -2)) / (4.0 * sg[..., None, None])
    t_rel = np.einsum("...ac,...bd,...cd->...ab", g.inv, g.inv, t_rel_low)
    if sector in ("boson", "gauge"):
        fp = s.fiber_point(sector)
        lam_tilde = sector_lambda(sector, fp) / sg
        t = -(dlambda_tilde_dg(sector, fp)
              + 0.5 * lam_tilde[..., None, None] * g.inv)
        return {"T": t, "T_rel": t_rel}
    if sector == "dirac":
        flat = np.max(np.abs(g.g - g.g.reshape(-1, *g.g.shape[-2:])[0])) < 1e-14
        if not flat:
            raise ValueError("Dirac stress-energy requires a constant flat "
                             "metric (curved-metric S-term not available)")
        return {"T": t_rel.real, "T_rel": t_rel}
    raise ValueError(f"stress-energy not defined for sector {sector!r}")


def total_stress_energy(s: DFState) -> np.ndarray:
    """T of the matter sector plus the gauge sector carried by s.kappa."""
    t = stress_energy_tensor(s.sector, s)["T"]
    if s.kappa is not None and s.sector != "gauge":
        gs = DFState("gauge", s.chart, s.background, kappa=s.kappa,
                     z2=s.z2, order=s.order)
        t = t + stress_energy_tensor("gauge", gs)["T"]
    return t


def divergence_of_T(t: np.ndarray, metric: Metric, order: int = 2,
                    Gamma: SpacetimeConnection | None = None) -> np.ndarray:
    """nabla_a T^{ab} with the Levi-Civita connection of the metric."""
    chart = metric.chart
    m = chart.m
    if Gamma is None:
        Gamma = levi_civita(metric, order)
    gam = Gamma.gamma
    div = np.zeros(t.shape[:-2] + (m,), dtype=t.dtype)
    for a in range(m):
        div = div + diff_axis(t[..., a, :], a, chart.h, order)
    div = div + np.einsum("...aae,...eb->...b", gam, t)
    div = div + np.einsum("...abe,...ae->...b", gam, t)
    return div


# ---------------------------------------------------------------------------
# Noether current

def noether_current(u: np.ndarray | None, w_matter: np.ndarray | None,
                    w_kappa: np.ndarray | None, s: DFState,
                    w_matterbar: np.ndarray | None = None) -> GridField:
    """I^a = u^b U^a_b + Pi^a_F w^F + Pibar^a_F wbar^F + 2 Pi^{ab}_{ij} w_b^i_j."""
    m = s.chart.m
    cur = np.zeros(s.chart.shape + (m,), dtype=complex
                   if s.sector == "dirac" else float)
    if u is not None:
        u_gen, _ = canonical_energy_tensor(s.sector, s)
        cur = cur + np.einsum("...b,...ab->...a", u, u_gen)
        if s.kappa is not None and s.sector != "gauge":
            gs = DFState("gauge", s.chart, s.background, kappa=s.kappa,
                         z2=s.z2, order=s.order)
            ug, _ = canonical_energy_tensor("gauge", gs)
            cur = cur + np.einsum("...b,...ab->...a", u, ug)
    if s.sector in MATTER_SECTORS and (w_matter is not None
                                       or w_matterbar is not None):
        mom = _momenta(s)
        if w_matter is not None:
            cur = cur + np.einsum("...aF,...F->...a",
                                  mom.pi1.reshape(mom.pi1.shape[:m + 1] + (-1,)),
                                  w_matter.reshape(w_matter.shape[:m] + (-1,)))
        if w_matterbar is not None:
            cur = cur + np.einsum("...aF,...F->...a",
                                  mom.pi1bar.reshape(mom.pi1bar.shape[:m + 1]
                                                     + (-1,)),
                                  w_matterbar.reshape(w_matterbar.shape[:m]
                                                      + (-1,)))
    if w_kappa is not None:
        gmom = _momenta(s, "gauge")
        pi2u = unpack(m, 2, gmom.pi2, m)
        cur = cur + 2.0 * np.einsum("...abij,...bij->...a", pi2u, w_kappa)
    if s.sector != "dirac":
        cur = cur.real
    sig = FiberSignature((), 1, "complementary")
    return GridField(s.chart, sig, cur)


# ---------------------------------------------------------------------------
# gauge invariance of lambda (fiber-level algebraic cancellation)

def gauge_delta_lambda(sector: str, s: DFState, gen: np.ndarray) -> np.ndarray:
    """First-order change of lambda under the vertical gauge action.

    The fiber slots transform as dy = l y, dybar = -l^T ybar, dz1 = l z1,
    dz1bar = -l^T z1bar, dz2 = [l, z2]; the result is pure pointwise
    algebra and must vanish for invariant Lagrangians.
    """
    m = s.chart.m
    fp = s.fiber_point(sector)
    mom = momenta_analytic(sector, fp)
    delta = np.zeros(s.chart.shape, dtype=complex)
    if sector in MATTER_SECTORS:
        y, ybar, z1, z1bar = fp.y, fp.ybar, fp.z1, fp.z1bar
        if sector == "boson":
            dy = np.einsum("...ih,...hA->...iA", gen, y)
            dybar = -np.einsum("...hi,...hA->...iA", gen, ybar)
            dz1 = np.einsum("...ih,...ahA->...aiA", gen, z1)
            dz1bar = -np.einsum("...hi,...ahA->...aiA", gen, z1bar)
        else:
            dy = np.einsum("...ih,...ch->...ci", gen, y)
            dybar = -np.einsum("...hi,...ch->...ci", gen, ybar)
            dz1 = np.einsum("...ih,...ach->...aci", gen, z1)
            dz1bar = -np.einsum("...hi,...ach->...aci", gen, z1bar)
        for piece, dv in ((mom.pi0, dy), (mom.pi0bar, dybar)):
            delta = delta + np.einsum("...F,...F->...",
                                      piece.reshape(piece.shape[:m] + (-1,)),
                                      dv.reshape(dv.shape[:m] + (-1,)))
        for piece, dv in ((mom.pi1, dz1), (mom.pi1bar, dz1bar)):
            delta = delta + np.einsum("...aF,...aF->...",
                                      piece.reshape(piece.shape[:m + 1] + (-1,)),
                                      dv.reshape(dv.shape[:m + 1] + (-1,)))
    if sector == "gauge" or (s.kappa is not None and sector in MATTER_SECTORS):
        gfp = s.fiber_point("gauge")
        gmom = momenta_analytic("gauge", gfp)
        z2u = unpack(m, 2, s.z2, m)
        dz2u = (np.einsum("...ih,...bchj->...bcij", gen, z2u)
                - np.einsum("...hj,...bcih->...bcij", gen, z2u))
        pi2u = unpack(m, 2, gmom.pi2, m)
        delta = delta + 2.0 * 0.5 * np.einsum("...bcij,...bcij->...",
                                              pi2u, dz2u)
    return delta


# ---------------------------------------------------------------------------
# discrete action and the single-point variation oracle

PERTURBABLE = ("phi", "phibar", "kappa")


@dataclass
class ActionTools:
    """Discrete action with a stencil-local single-point variation oracle."""

    sector: str
    state: DFState

    def __post_init__(self):
        s = self.state
        if self.sector not in ("boson", "gauge"):
            raise ValueError("action oracle supports the boson and gauge sectors")
        if s.background.spinor is not None \
                or np.max(np.abs(s.background.Gamma.gamma)) != 0:
            raise ValueError("action oracle needs a trivial spacetime connection")

    def lambda_field(self, phi=None, phibar=None, kappa=None) -> np.ndarray:
        """Full-grid lambda of the (optionally replaced) primary fields."""
        s = self.state
        phi = s.phi if phi is None else phi
        phibar = s.phibar if phibar is None else phibar
        kappa = s.kappa if kappa is None else kappa
        if s.sector == "gauge":
            st = prolong("gauge", kappa=kappa, background=s.background,
                         order=s.order)
        else:
            st = prolong(s.sector, phi=phi, phibar=phibar, kappa=kappa,
                         background=s.background, mass=s.mass, order=s.order)
        lam = sector_lambda(s.sector, st.fiber_point())
        if s.sector in MATTER_SECTORS and s.kappa is not None:
            lam = lam + sector_lambda("gauge", st.fiber_point("gauge"))
        return lam

    def action(self, **kw) -> float | complex:
        lam = self.lambda_field(**kw)
        total = lam.sum() * self.state.chart.cell_volume
        return complex(total) if np.iscomplexobj(lam) else float(total)

    # ---- local recompute ---------------------------------------------------

    def affected_points(self, point: tuple) -> list:
        """{x} and {x +- e_a}: where lambda changes under a point perturbation."""
        chart = self.state.chart
        pts = [tuple(point)]
        for a in range(chart.m):
            for sh in (-1, 1):
                q = list(point)
                q[a] = (q[a] + sh) % chart.n
                pts.append(tuple(q))
        return pts

    def lambda_at(self, pts: list, phi=None, phibar=None, kappa=None) -> np.ndarray:
        """lambda at the given points, bit-identical to lambda_field there."""
        s = self.state
        chart = s.chart
        m = chart.m
        phi_a = (s.phi.data if phi is None else phi.data) if s.phi is not None \
            else None
        phibar_a = (s.phibar.data if phibar is None else phibar.data) \
            if s.phibar is not None else None
        kap = (s.kappa.kappa if kappa is None else kappa.kappa) \
            if s.kappa is not None else None
        idx = tuple(np.array([p[i] for p in pts]) for i in range(m))

        def gather(arr, shift_axis=None, shift=0):
            if shift_axis is None:
                return arr[idx]
            jj = list(idx)
            jj[shift_axis] = (jj[shift_axis] + shift) % chart.n
            return arr[tuple(jj)]

        def local_diff(arr, axis):
            # mirrors diff_axis term by term
            from .grid import _STENCILS
            out = np.zeros(gather(arr).shape,
                           dtype=arr.dtype)
            for sh, w in _STENCILS[s.order]:
                out = out + w * (gather(arr, axis, sh) - gather(arr, axis, -sh))
            return out / chart.h

        g = s.metric
        g_pts, ginv_pts, sg_pts = gather(g.g), gather(g.inv), gather(g.sqrt_abs_det)
        kw = {}
        if s.sector in MATTER_SECTORS:
            # z1 = d phi - kappa phi at the gathered points
            for nm, arr, straight in (("z1", phi_a, True),
                                      ("z1bar", phibar_a, False)):
                dx = np.stack([local_diff(arr, a) for a in range(m)], axis=1)
                if kap is not None:
                    kp = gather(kap)
                    if straight:
                        act = np.einsum("kaih,khA->kaiA", kp, arr[idx][:, 0])
                    else:
                        act = -np.einsum("kahi,khA->kaiA", kp, arr[idx][:, 0])
                    nab = dx[:, :, 0] - act
                else:
                    nab = dx[:, :, 0]
                kw[nm] = nab
            kw["y"] = phi_a[idx][:, 0]
            kw["ybar"] = phibar_a[idx][:, 0]
        if kap is not None:
            dk = np.stack([local_diff(kap, e) for e in range(m)], axis=1)
            slots = []
            for a, b in index_combos(m, 2):
                slots.append(dk[:, a, b, :, :] - dk[:, b, a, :, :]
                             - commutator(kap[idx][:, a], kap[idx][:, b]))
            kw["z2"] = np.stack(slots, axis=1)
        lam = lambda_kernel(self.sector if self.sector != "gauge" else "gauge",
                            m, 1, g_pts, ginv_pts, sg_pts,
                            mass=s.mass,
                            **{k: v for k, v in kw.items()
                               if k in (("y", "ybar", "z1", "z1bar")
                                        if self.sector == "boson" else ("z2",))})
        if self.sector in MATTER_SECTORS and kap is not None:
            lam = lam + lambda_kernel("gauge", m, 1, g_pts, ginv_pts, sg_pts,
                                      z2=kw["z2"])
        return lam

    def variation_oracle(self, point: tuple, field: str, comp: tuple,
                         eps: float = 1e-5):
        """Central difference of the action under a single-point perturbation."""
        s = self.state
        if field not in PERTURBABLE:
            raise ValueError(f"field must be one of {PERTURBABLE}")
        pts = self.affected_points(point)

        def perturbed(sign):
            if field == "kappa":
                arr = s.kappa.kappa.copy()
                arr[tuple(point) + comp] += sign * eps
                return {"kappa": LinearConnection(s.chart, arr,
                                                  basis=None)}
            gf = getattr(s, field).copy()
            gf.data[tuple(point) + (0,) + comp] += sign * eps
            return {field: gf}

        lam_p = self.lambda_at(pts, **perturbed(+1))
        lam_m = self.lambda_at(pts, **perturbed(-1))
        ds = (lam_p - lam_m).sum() * s.chart.cell_volume / (2 * eps)
        return float(ds.real) if not np.iscomplexobj(ds) else ds


def action_tools(sector: str, s: DFState) -> ActionTools:
    return ActionTools(sector, s)
