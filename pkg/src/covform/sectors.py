"""Pointwise sector Lagrangians and their covariant momenta.

A FiberPoint is a grid-batched point of the prolongation fiber: matter
value y (with independent dual partner ybar), first prolongation slot z1
(standing for nabla phi), second slot z2 (standing for d_k k = -rho,
packed antisymmetric), the metric, and for gravity the curvature slot R.

Momenta are fiber derivatives of the Lagrangian density:

    Pi0 = dl/dy,   Pi1^a = dl/dz1_a,   Pi2^{ab} = (1/2) dl/dz2_{ab}

where the z2 derivative perturbs the packed a<b component together with
its antisymmetric partner (the pairing 2 Pi^{ab} dz_{ab} double-counts).
Formulas quadratic in a slot make the central-difference oracle exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .connections import gamma_matrices
from .fiber import Metric, index_combos, n_slots, pack, unpack
from .grid import Chart

SECTORS = ("gauge", "boson", "dirac", "gravity")


@dataclass
class FiberPoint:
    """Grid-batched fiber coordinates of the covariant prolongation bundle."""

    chart: Chart
    sector: str
    metric: Metric
    y: np.ndarray | None = None        # grid + fiber
    ybar: np.ndarray | None = None     # grid + fiber (independent dual slot)
    z1: np.ndarray | None = None       # grid + (m,) + fiber
    z1bar: np.ndarray | None = None
    z2: np.ndarray | None = None       # grid + (C(m,2), n, n), packed a<b
    R: np.ndarray | None = None        # grid + (C(m,2), m, m), gravity slot
    mass: float = 0.0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ValueError(f"unknown sector {self.sector!r}")
        m = self.chart.m
        gs = self.chart.shape
        need = {
            "gauge": ("z2",),
            "boson": ("y", "ybar", "z1", "z1bar"),
            "dirac": ("y", "ybar", "z1", "z1bar"),
            "gravity": ("R",),
        }[self.sector]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"sector {self.sector!r} needs slot {name!r}")
        if self.y is not None:
            fs = self.y.shape[m:]
            for nm, extra in (("ybar", ()), ("z1", (m,)), ("z1bar", (m,))):
                arr = getattr(self, nm)
                if arr is not None and arr.shape != gs + extra + fs:
                    raise ValueError(f"slot {nm!r} shape mismatch")
        for nm in ("z2", "R"):
            arr = getattr(self, nm)
            if arr is not None:
                if arr.ndim != m + 3 or arr.shape[:m + 1] != gs + (n_slots(m, 2),) \
                        or arr.shape[-1] != arr.shape[-2]:
                    raise ValueError(f"slot {nm!r} shape mismatch")

    @property
    def fiber_shape(self):
        m = self.chart.m
        return self.y.shape[m:] if self.y is not None else ()

    def copy(self) -> "FiberPoint":
        kw = {}
        for nm in ("y", "ybar", "z1", "z1bar", "z2", "R"):
            arr = getattr(self, nm)
            kw[nm] = None if arr is None else arr.copy()
        return FiberPoint(self.chart, self.sector, self.metric, mass=self.mass,
                          meta=dict(self.meta), **kw)


@dataclass
class MomentaTriple:
    """Covariant momenta (Pi0, Pi1, Pi2) plus the barred duals."""

    pi0: np.ndarray | None = None      # grid + fiber (dual pairing slot)
    pi1: np.ndarray | None = None      # grid + (m,) + fiber
    pi2: np.ndarray | None = None      # grid + (C(m,2), n, n) or (.., m, m)
    pi0bar: np.ndarray | None = None
    pi1bar: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Lagrangians

def lambda_kernel(sector: str, m: int, batch_ndim: int, g: np.ndarray,
                  ginv: np.ndarray, sg: np.ndarray, y=None, ybar=None,
                  z1=None, z1bar=None, z2=None, R=None,
                  mass: float = 0.0) -> np.ndarray:
    """Pointwise Lagrangian on arrays with arbitrary leading batch axes.

    Shared by the grid-batched sector_lambda and the stencil-neighborhood
    recompute of the action oracle, so both produce bit-identical values.
    """
    if sector == "boson":
        # l = 1/2 (g^{ab} zbar_a z_b - m^2 ybar y) sqrt|g|
        kin = np.einsum("...ab,...aF,...bF->...",
                        ginv,
                        z1bar.reshape(z1bar.shape[:batch_ndim + 1] + (-1,)),
                        z1.reshape(z1.shape[:batch_ndim + 1] + (-1,)))
        msq = np.einsum("...F,...F->...",
                        ybar.reshape(ybar.shape[:batch_ndim] + (-1,)),
                        y.reshape(y.shape[:batch_ndim] + (-1,)))
        return 0.5 * (kin - mass ** 2 * msq) * sg
    if sector == "gauge":
        # l = 1/4 g^{ac} g^{bd} z_{ab}^i_j z_{cd}^j_i sqrt|g|
        full = unpack(m, 2, z2, batch_ndim)              # batch + (a,b,i,j)
        return 0.25 * np.einsum("...ac,...bd,...abij,...cdji->...",
                                ginv, ginv, full, full) * sg
    if sector == "dirac":
        # l = (i/2 g^{ab}(ybar gamma_a z_b - zbar_a gamma_b y) - m ybar y) sqrt|g|
        gam = gamma_matrices(m)                          # gamma^b, constant
        gam_low = np.einsum("...ab,bcd->...acd", g, gam)     # gamma_a
        t1 = np.einsum("...ab,...ci,...acd,...bdi->...", ginv, ybar, gam_low, z1)
        t2 = np.einsum("...ab,...aci,...bcd,...di->...", ginv, z1bar, gam_low, y)
        msq = np.einsum("...ci,...ci->...", ybar, y)
        return (0.5j * (t1 - t2) - mass * msq) * sg
    if sector == "gravity":
        # l = g^{ad} R_{ab}^b_d sqrt|g|
        full = unpack(m, 2, R, batch_ndim)
        ric = np.einsum("...abbd->...ad", full)
        return np.einsum("...ad,...ad->...", ginv, ric) * sg
    raise ValueError(f"unknown sector {sector!r}")


def sector_lambda(sector: str, p: FiberPoint) -> np.ndarray:
    """Pointwise Lagrangian density of one sector, as a grid array."""
    if sector != p.sector:
        raise ValueError("sector/state mismatch")
    g = p.metric
    return lambda_kernel(sector, p.chart.m, p.chart.m, g.g, g.inv,
                         g.sqrt_abs_det, y=p.y, ybar=p.ybar, z1=p.z1,
                         z1bar=p.z1bar, z2=p.z2, R=p.R, mass=p.mass)


def _ricci_slot(p: FiberPoint) -> np.ndarray:
    """Ric_{ad} = R_{ab}{}^b_d from the packed gravity curvature slot."""
    m = p.chart.m
    full = unpack(m, 2, p.R, m)                          # grid + (a, b, c, d)
    return np.einsum("...abbd->...ad", full)


# ---------------------------------------------------------------------------
# analytic momenta

def momenta_analytic(sector: str, p: FiberPoint) -> MomentaTriple:
    if sector != p.sector:
        raise ValueError("sector/state mismatch")
    m = p.chart.m
    g = p.metric
    sg = g.sqrt_abs_det
    if sector == "boson":
        pi0 = -0.5 * p.mass ** 2 * _w(sg, p.ybar) * p.ybar
        pi0bar = -0.5 * p.mass ** 2 * _w(sg, p.y) * p.y
        pi1 = 0.5 * _w(sg, p.z1bar) * _raise_first(g, p.z1bar, m)
        pi1bar = 0.5 * _w(sg, p.z1) * _raise_first(g, p.z1, m)
        return MomentaTriple(pi0=pi0, pi1=pi1, pi2=None,
                             pi0bar=pi0bar, pi1bar=pi1bar)
    if sector == "gauge":
        # Pi^{ab i}_j = 1/2 sqrt|g| g^{ac} g^{bd} z_{cd}^j_i
        full = unpack(m, 2, p.z2, m)
        raised = np.einsum("...ac,...bd,...cdji->...abij", g.inv, g.inv, full)
        pi2 = 0.5 * pack(m, 2, raised, m) * sg.reshape(sg.shape + (1, 1, 1))
        return MomentaTriple(pi2=pi2)
    if sector == "dirac":
        gam = gamma_matrices(m)
        gam_low = np.einsum("...ab,bcd->...acd", g.g, gam)
        w = sg.reshape(sg.shape + (1, 1))
        # Pi1^b = (i/2) sqrt|g| g^{ab} (ybar gamma_a),  Pi1bar^a = -(i/2) ... (gamma_b y)
        pi1 = 0.5j * np.einsum("...ab,...ci,...acd->...bdi",
                               g.inv, p.ybar, gam_low) * w[..., None, :, :]
        pi1bar = -0.5j * np.einsum("...ab,...bcd,...di->...aci",
                                   g.inv, gam_low, p.y) * w[..., None, :, :]
        # Pi0 = (-i/2 zbar_a gamma^a - m ybar) sqrt|g|, Pi0bar = (i/2 gamma^a z_a - m y) sqrt|g|
        pi0 = (-0.5j * np.einsum("...ab,...aci,...bcd->...di",
                                 g.inv, p.z1bar, gam_low)
               - p.mass * p.ybar) * w
        pi0bar = (0.5j * np.einsum("...ab,...acd,...bdi->...ci",
                                   g.inv, gam_low, p.z1)
                  - p.mass * p.y) * w
        return MomentaTriple(pi0=pi0, pi1=pi1, pi2=None,
                             pi0bar=pi0bar, pi1bar=pi1bar)
    if sector == "gravity":
        # Pi2^{ab c}_d = 1/2 (g^{bd} d^a_c - g^{ad} d^b_c) sqrt|g|
        eye = np.eye(m)
        full = 0.5 * (np.einsum("...bd,ac->...abcd", g.inv, eye)
                      - np.einsum("...ad,bc->...abcd", g.inv, eye))
        pi2 = pack(m, 2, full, m) * sg.reshape(sg.shape + (1, 1, 1))
        # Pi0^{ef} = dl/dg_{ef} (symmetrized), the Einstein-tensor density
        ric = _ricci_slot(p)
        scal = np.einsum("...ad,...ad->...", g.inv, ric)
        pi0 = (-0.5 * (np.einsum("...ae,...fd,...ad->...ef", g.inv, g.inv, ric)
                       + np.einsum("...af,...ed,...ad->...ef", g.inv, g.inv, ric))
               + 0.5 * g.inv * scal[..., None, None]) \
            * sg[..., None, None]
        return MomentaTriple(pi0=pi0, pi2=pi2)
    raise ValueError(f"unknown sector {sector!r}")


def _w(sg: np.ndarray, like: np.ndarray) -> np.ndarray:
    """sqrt|g| broadcast against the trailing axes of `like`."""
    return sg.reshape(sg.shape + (1,) * (like.ndim - sg.ndim))


def _raise_first(g: Metric, z1: np.ndarray, m: int) -> np.ndarray:
    """Raise the covector slot of z1 (axis m) with the inverse metric."""
    moved = np.moveaxis(z1, m, -1)
    out = np.einsum("...ab,...b->...a", g.inv.reshape(
        g.inv.shape[:m] + (1,) * (moved.ndim - m - 1) + (m, m)), moved)
    return np.moveaxis(out, -1, m)


# ---------------------------------------------------------------------------
# numeric (fiber-derivative) momenta

def momenta_numeric(sector: str, p: FiberPoint, step: float = 1e-5) -> MomentaTriple:
    """Central-difference fiber derivatives of sector_lambda."""
    if step <= 0:
        raise ValueError("step must be > 0")
    if sector != p.sector:
        raise ValueError("sector/state mismatch")
    m = p.chart.m

    def dlam(slot: str, comp: tuple) -> np.ndarray:
        q = p.copy()
        arr = getattr(q, slot)
        idx = (Ellipsis,) + comp
        arr[idx] = arr[idx] + step
        lp = sector_lambda(sector, q)
        arr[idx] = arr[idx] - 2 * step
        lm = sector_lambda(sector, q)
        arr[idx] = arr[idx] + step
        return (lp - lm) / (2 * step)

    out = MomentaTriple()
    if sector in ("boson", "dirac"):
        fs = p.fiber_shape
        out.pi0 = _slot_stack(dlam, "y", fs, p.chart.shape)
        out.pi0bar = _slot_stack(dlam, "ybar", fs, p.chart.shape)
        out.pi1 = _slot_stack(dlam, "z1", (m,) + fs, p.chart.shape)
        out.pi1bar = _slot_stack(dlam, "z1bar", (m,) + fs, p.chart.shape)
    if sector == "gauge":
        comp_shape = p.z2.shape[m:]
        out.pi2 = 0.5 * _slot_stack(dlam, "z2", comp_shape, p.chart.shape)
    if sector == "gravity":
        comp_shape = p.R.shape[m:]
        # momenta pair with z2 = -R, hence the sign flip
        out.pi2 = -0.5 * _slot_stack(dlam, "R", comp_shape, p.chart.shape)
        out.pi0 = _metric_derivative(sector, p, step)
    return out


def _slot_stack(dlam, slot: str, comp_shape: tuple, grid_shape: tuple) -> np.ndarray:
    out = None
    for comp in np.ndindex(comp_shape):
        val = dlam(slot, comp)
        if out is None:
            out = np.zeros(grid_shape + comp_shape, dtype=val.dtype)
        out[(Ellipsis,) + comp] = val
    return out


def _metric_derivative(sector: str, p: FiberPoint, step: float) -> np.ndarray:
    """dl/dg_{ef} under symmetric perturbations of the metric slot."""
    m = p.chart.m
    out = None
    for e in range(m):
        for f in range(e, m):
            dg = np.zeros((m, m))
            dg[e, f] = 1.0
            dg[f, e] = 1.0
            q = p.copy()
            q.metric = Metric(p.chart, p.metric.g + step * dg)
            lp = sector_lambda(sector, q)
            q.metric = Metric(p.chart, p.metric.g - step * dg)
            lm = sector_lambda(sector, q)
            val = (lp - lm) / (2 * step)
            if e != f:
                val = val / 2.0
            if out is None:
                out = np.zeros(p.chart.shape + (m, m), dtype=val.dtype)
            out[..., e, f] = val
            out[..., f, e] = val
    return out


# ---------------------------------------------------------------------------
# stress-energy building blocks (lambda-tilde = lambda / sqrt|g|)

def dlambda_tilde_dg(sector: str, p: FiberPoint) -> np.ndarray:
    """Analytic d(lambda/sqrt|g|)/dg_{ef} for the S-term-free sectors."""
    m = p.chart.m
    g = p.metric
    if sector == "boson":
        z1u = _raise_first(g, p.z1, m)
        z1bu = _raise_first(g, p.z1bar, m)
        zb = p.z1bar.reshape(p.z1bar.shape[:m + 1] + (-1,))
        zbu = z1bu.reshape(z1bu.shape[:m + 1] + (-1,))
        zu = z1u.reshape(z1u.shape[:m + 1] + (-1,))
        sym = np.einsum("...eF,...fF->...ef", zbu, zu)
        return -0.25 * (sym + np.swapaxes(sym, -1, -2))
    if sector == "gauge":
        full = unpack(m, 2, p.z2, m)
        a = np.einsum("...ae,...cf,...bd,...abij,...cdji->...ef",
                      g.inv, g.inv, g.inv, full, full)
        return -0.5 * a
    raise ValueError(f"no analytic metric derivative for sector {sector!r}")


# ---------------------------------------------------------------------------
# random fiber points

def random_fiber_point(sector: str, chart: Chart, seed: int, n: int = 2,
                       n_extra: int = 2, mass: float = 0.7,
                       metric: Metric | None = None,
                       complex_fields: bool = False) -> FiberPoint:
    """Deterministic random FiberPoint (near-Minkowski metric by default)."""
    rng = np.random.default_rng(seed)
    m = chart.m
    if metric is None:
        pert = 0.05 * rng.standard_normal(chart.shape + (m, m))
        pert = 0.5 * (pert + np.swapaxes(pert, -1, -2))
        metric = Metric(chart, Metric.minkowski(chart).g + pert)

    def rnd(shape, cplx):
        a = rng.standard_normal(chart.shape + shape)
        if cplx:
            return a + 1j * rng.standard_normal(chart.shape + shape)
        return a

    if sector == "gauge":
        z2 = rnd((n_slots(m, 2), n, n), complex_fields)
        return FiberPoint(chart, sector, metric, z2=z2, mass=mass)
    if sector == "boson":
        fs = (n, n_extra)
        return FiberPoint(chart, sector, metric,
                          y=rnd(fs, complex_fields), ybar=rnd(fs, complex_fields),
                          z1=rnd((m,) + fs, complex_fields),
                          z1bar=rnd((m,) + fs, complex_fields), mass=mass)
    if sector == "dirac":
        fs = (4, n)
        return FiberPoint(chart, sector, metric,
                          y=rnd(fs, True), ybar=rnd(fs, True),
                          z1=rnd((m,) + fs, True), z1bar=rnd((m,) + fs, True),
                          mass=mass)
    if sector == "gravity":
        r_full = rnd((m, m, m, m), False)
        r_full = 0.5 * (r_full - np.moveaxis(r_full, (m, m + 1), (m + 1, m)))
        return FiberPoint(chart, sector, metric, R=pack(m, 2, r_full, m))
    raise ValueError(f"unknown sector {sector!r}")
