"""Covariant differentials, divergences, variations, gauge transformations.

All operators act on GridFields.  Complementary-representation fields of
degree r (stored contravariant indices) are forms of degree m - r; the
covariant differential there contracts on the LAST stored index:

    d_k xi = r (d_{a_r} xi^{a1..ar i} - act_{a_r}(xi)^{a1..ar i}) dx_{a1..a_{r-1}}

with the factor-wise connection action `act` of connections.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connections import (Background, LinearConnection, ProductConnection,
                          SpacetimeConnection, tensor_product_connection)
from .fiber import (FiberSignature, Endomorphism, commutator, index_combos,
                    n_slots, pack, perm_sign, slot_lookup, t_bar_wedge, unpack,
                    wedge)
from .grid import GridField, diff_axis


# ---------------------------------------------------------------------------
# low-level action plumbing

def matvec_deriv(mat: np.ndarray, data: np.ndarray, axis: int,
                 grid_ndim: int) -> np.ndarray:
    """Pointwise action of a covector of matrices on one axis of `data`.

    mat: grid + (m, p, q); data: grid + rest with data.shape[axis] == q.
    Returns grid + (m,) + rest with the acted axis replaced by p.
    """
    moved = np.moveaxis(data, axis, -1)
    lead = moved.shape[:grid_ndim]
    mid = moved.shape[grid_ndim:-1]
    flat = moved.reshape(lead + (-1, moved.shape[-1]))
    out = np.einsum("...mpq,...rq->...mrp", mat, flat)
    out = out.reshape(lead + (mat.shape[grid_ndim],) + mid + (mat.shape[-2],))
    return np.moveaxis(out, -1, axis + 1)


def connection_action(pc: ProductConnection, arr: np.ndarray,
                      grid_ndim: int) -> np.ndarray:
    """Sum of all factor actions; nabla = d - connection_action."""
    m = pc.chart.m
    nf_axes = sum(len(f.shape) for f in pc.signature.factors)
    pos = arr.ndim - nf_axes
    dtype = arr.dtype
    for a in pc.actions:
        if a is not None and np.iscomplexobj(a[1]):
            dtype = np.result_type(dtype, a[1].dtype)
    out = np.zeros(arr.shape[:grid_ndim] + (m,) + arr.shape[grid_ndim:], dtype=dtype)
    for f, act in zip(pc.signature.factors, pc.actions):
        if act is None:
            pos += len(f.shape)
            continue
        if act[0] == "mat":
            out += matvec_deriv(act[1], arr, pos, grid_ndim)
        elif act[0] == "endo":
            kappa, dual = act[1], act[2]
            if not dual:
                # [kappa_a, M]
                out += matvec_deriv(kappa, arr, pos, grid_ndim)
                out -= matvec_deriv(np.swapaxes(kappa, -1, -2), arr, pos + 1,
                                    grid_ndim)
            else:
                # -[kappa_a^T, M]
                kt = np.swapaxes(kappa, -1, -2)
                out -= matvec_deriv(kt, arr, pos, grid_ndim)
                out += matvec_deriv(kappa, arr, pos + 1, grid_ndim)
        else:
            raise ValueError(f"unknown action kind {act[0]!r}")
        pos += len(f.shape)
    return out


def _deriv_stack(data: np.ndarray, chart, order: int) -> np.ndarray:
    """d_e data, stacked along a new axis right after the grid axes."""
    return np.stack([diff_axis(data, e, chart.h, order) for e in range(chart.m)],
                    axis=chart.m)


def _product_connection(signature: FiberSignature, kappa, background):
    if isinstance(kappa, ProductConnection):
        return kappa
    return tensor_product_connection(signature, kappa, background)


# ---------------------------------------------------------------------------
# covariant differentials

def d_kappa_basic(xi: GridField, kappa=None, background=None,
                  order: int = 2) -> GridField:
    """d_kappa on a complementary-representation field (degree m-r -> m-r+1).

    E-valued inputs use kappa; E*-valued use the dual connection (encoded in
    the fiber signature); endomorphism-dual fibers get -[kappa^T, .].
    """
    m = xi.chart.m
    sig = xi.signature
    if sig.rep != "complementary":
        raise ValueError("d_kappa_basic expects complementary representation")
    r = sig.degree
    if r < 1:
        raise ValueError("r = 0: top dual degree, d_kappa not defined here")
    pc = _product_connection(sig, kappa, background)
    dx = _deriv_stack(xi.data, xi.chart, order)
    act = connection_action(pc, xi.data, m) if sig.factors else \
        np.zeros_like(dx)
    nabla = dx - act                               # grid + (m,) + slots + fiber
    out_sig = sig.with_degree(r - 1)
    out = np.zeros(xi.chart.shape + (n_slots(m, r - 1),) + sig.fiber_shape,
                   dtype=nabla.dtype)
    out_mv = np.moveaxis(out, m, 0)
    for oslot, combo in enumerate(index_combos(m, r - 1)):
        for a in range(m):
            if a in combo:
                continue
            slot, sign = slot_lookup(m, combo + (a,))
            out_mv[oslot] += r * sign * nabla[(Ellipsis,) + (a, slot)
                                              + (slice(None),) * len(sig.fiber_shape)]
    return GridField(xi.chart, out_sig, out)


def d_kappa_std(zeta: GridField, kappa=None, background=None,
                order: int = 2) -> GridField:
    """d_kappa on a standard-representation r-form (degree r -> r+1)."""
    m = zeta.chart.m
    sig = zeta.signature
    if sig.rep != "standard":
        raise ValueError("d_kappa_std expects standard representation")
    r = sig.degree
    if r + 1 > m:
        raise ValueError("degree overflow")
    pc = _product_connection(sig, kappa, background)
    dx = _deriv_stack(zeta.data, zeta.chart, order)
    act = connection_action(pc, zeta.data, m) if sig.factors else \
        np.zeros_like(dx)
    nabla = dx - act
    out_sig = sig.with_degree(r + 1)
    out = np.zeros(zeta.chart.shape + (n_slots(m, r + 1),) + sig.fiber_shape,
                   dtype=nabla.dtype)
    out_mv = np.moveaxis(out, m, 0)
    st = {c: i for i, c in enumerate(index_combos(m, r))}
    for oslot, combo in enumerate(index_combos(m, r + 1)):
        for k, a in enumerate(combo):
            rest = combo[:k] + combo[k + 1:]
            out_mv[oslot] += ((-1) ** k) * nabla[(Ellipsis,) + (a, st[rest])
                                                 + (slice(None),) * len(sig.fiber_shape)]
    return GridField(zeta.chart, out_sig, out)


def connection_as_form(conn: LinearConnection) -> GridField:
    """The connection's coefficient array as an affine-tagged 1-form."""
    sig = FiberSignature((Endomorphism(conn.n),), 1, "standard")
    gf = GridField(conn.chart, sig, conn.kappa.copy())
    gf.meta["affine"] = True
    return gf


def d_kappa_lie(zeta: GridField, conn: LinearConnection, order: int = 2) -> GridField:
    """d_kappa on endomorphism-valued standard forms (commutator action).

    For the affine-tagged input connection_as_form(conn) the commutator is
    counted once, giving the prolongation expression
    d_a k_b - d_b k_a - [k_a, k_b].
    """
    m = zeta.chart.m
    if zeta.meta.get("affine") and zeta.signature.degree == 1:
        dz = _deriv_stack(zeta.data, zeta.chart, order)
        k = conn.kappa
        slots = []
        for a, b in index_combos(m, 2):
            slots.append(dz[..., a, b, :, :] - dz[..., b, a, :, :]
                         - 0.5 * (commutator(k[..., a, :, :], zeta.data[..., b, :, :])
                                  + commutator(zeta.data[..., a, :, :],
                                               k[..., b, :, :])))
        data = np.stack(slots, axis=m)
        return GridField(zeta.chart, zeta.signature.with_degree(2),
                         data)
    return d_kappa_std(zeta, kappa=conn, order=order)


def covariant_derivative(phi: GridField, kappa=None, background=None,
                         order: int = 2) -> GridField:
    """nabla phi = d_{kappa x Gamma} phi on a section (degree-0 field)."""
    m = phi.chart.m
    sig = phi.signature
    if sig.degree != 0:
        raise ValueError("covariant_derivative expects a section (degree 0)")
    pc = _product_connection(sig, kappa, background)
    dx = _deriv_stack(phi.data, phi.chart, order)
    act = connection_action(pc, phi.data, m) if sig.factors else np.zeros_like(dx)
    nabla = dx - act                              # grid + (m,) + (1,) + fiber
    # drop the singleton degree-0 slot axis; the m derivative axis becomes
    # the degree-1 slot axis
    data = np.take(np.moveaxis(nabla, m + 1, -1), 0, axis=-1)
    out_sig = sig.with_degree(1, "standard")
    return GridField(phi.chart, out_sig, data)


# ---------------------------------------------------------------------------
# covariant divergence and the replacement principle

def _nabla_unpacked(xi: GridField, Gamma: SpacetimeConnection, kappa=None,
                    background=None, order: int = 2, density_term: bool = True):
    """Full covariant derivative of a complementary field, unpacked.

    Returns grid + (m,) + (m,)*r + fiber with the derivative axis first.
    The stored contravariant indices receive +Gamma actions; the density
    character of the complementary components contributes -gamma[e,d,d].
    """
    m = xi.chart.m
    sig = xi.signature
    r = sig.degree
    full = unpack(m, r, xi.data, m)
    dx = _deriv_stack(full, xi.chart, order)
    nabla = dx
    for j in range(r):
        nabla = nabla + matvec_deriv(Gamma.gamma, full, m + j, m)
    if density_term:
        tr = Gamma.trace.reshape(xi.chart.shape + (m,) + (1,) * (r + len(sig.fiber_shape)))
        nabla = nabla - tr * full[(Ellipsis,)].reshape(
            xi.chart.shape + (1,) + full.shape[m:])
    if sig.factors:
        pc = _product_connection(sig, kappa, background)
        nabla = nabla - connection_action(pc, full, m)
    return nabla


def covariant_divergence(xi: GridField, Gamma: SpacetimeConnection, kappa=None,
                         background=None, order: int = 2,
                         density_term: bool = True) -> GridField:
    """nabla . xi = r nabla_{a_r} xi^{a1..ar i} dx_{a1..a_{r-1}}."""
    m = xi.chart.m
    sig = xi.signature
    if sig.rep != "complementary":
        raise ValueError("covariant_divergence expects complementary representation")
    r = sig.degree
    if r == 0:
        # nabla . xi vanishes identically for r = 0
        return GridField(xi.chart, sig, np.zeros_like(xi.data))
    nabla = _nabla_unpacked(xi, Gamma, kappa, background, order, density_term)
    # contract the derivative axis with the last stored index axis
    moved = np.moveaxis(nabla, (m, m + r), (0, 1))
    contracted = np.einsum("ee...->...", moved)   # grid + (m,)*(r-1) + fiber
    out = r * pack(m, r - 1, contracted, m)
    return GridField(xi.chart, sig.with_degree(r - 1), out)


def replacement_residual(xi: GridField, Gamma: SpacetimeConnection, kappa=None,
                         background=None, order: int = 2) -> GridField:
    """nabla . xi - (d_k xi - tau wedge xi - 1/2 T barwedge xi)."""
    m = xi.chart.m
    r = xi.signature.degree
    if r < 1:
        raise ValueError("replacement principle needs r >= 1")
    div = covariant_divergence(xi, Gamma, kappa, background, order)
    dk = d_kappa_basic(xi, kappa, background, order)
    tau_form = GridField(xi.chart, FiberSignature((), 1, "standard"),
                         Gamma.tau.copy())
    tw = wedge(tau_form, xi)
    rhs = dk.data - tw.data
    if r >= 2:
        rhs = rhs - 0.5 * t_bar_wedge(Gamma.torsion, xi).data
    return GridField(xi.chart, div.signature, div.data - rhs)


def tilde_divergence_sign_check(xi: GridField, Gamma: SpacetimeConnection,
                                kappa=None, order: int = 2,
                                tol: float = 1e-10):
    """Check nabla-tilde . xi = (-1)^{m(r-1)} nabla . xi-tilde.

    Valid on flat backgrounds with covariantly constant volume form; the
    tilde pairing is the epsilon-dual fixed by eta = dx^0 ^ .. ^ dx^{m-1},
    under which both sides share components and the comparison reduces to
    the divergence with and without the density trace term.
    """
    m = xi.chart.m
    r = xi.signature.degree
    lhs = covariant_divergence(xi, Gamma, kappa, order=order, density_term=True)
    rhs = covariant_divergence(xi, Gamma, kappa, order=order, density_term=False)
    sign = (-1) ** (m * (r - 1))
    dev = float(np.max(np.abs(lhs.data - sign * rhs.data)))
    scale = max(lhs.sup_norm(), 1.0)
    return dev <= tol * scale, dev


# ---------------------------------------------------------------------------
# Lie derivatives and variations

def one_form_action(a: np.ndarray, sigma: GridField) -> GridField:
    """(a interior-wedge sigma): endomorphism-valued 1-form acting on a
    standard E-valued r-form, output degree r+1.

    a: grid + (m, n, n).  Components: Alt over the new index of
    a_{c} . sigma_{rest}.
    """
    m = sigma.chart.m
    sig = sigma.signature
    r = sig.degree
    acted = matvec_deriv(a, sigma.data, sigma.data.ndim - 1, m)
    out = np.zeros(sigma.chart.shape + (n_slots(m, r + 1),) + sig.fiber_shape,
                   dtype=acted.dtype)
    out_mv = np.moveaxis(out, m, 0)
    st = {c: i for i, c in enumerate(index_combos(m, r))}
    nf = len(sig.fiber_shape)
    for oslot, combo in enumerate(index_combos(m, r + 1)):
        for k, c in enumerate(combo):
            rest = combo[:k] + combo[k + 1:]
            out_mv[oslot] += ((-1) ** k) * acted[(Ellipsis,) + (c, st[rest])
                                                 + (slice(None),) * nf]
    return GridField(sigma.chart, sig.with_degree(r + 1), out)


def covariant_lie_derivative(xi: GridField, u: np.ndarray, ref: LinearConnection,
                             order: int = 2) -> GridField:
    """L_{kappa,u} xi = i_u d_kappa xi + d_kappa (i_u xi)."""
    from .fiber import interior_product
    sig = xi.signature
    if sig.rep != "standard":
        raise ValueError("covariant_lie_derivative expects standard representation")
    term1 = interior_product(u, d_kappa_std(xi, kappa=ref, order=order))
    if sig.degree == 0:
        return term1
    term2 = d_kappa_std(interior_product(u, xi), kappa=ref, order=order)
    return term1 + term2


@dataclass
class VariationPair:
    """(delta phi, delta kappa): a vertical variation of the field pair."""

    dphi: GridField                 # same signature as phi, degree 0
    dkappa: np.ndarray              # grid + (m, n, n)


def variation_prolong(v: VariationPair, phi: GridField, conn: LinearConnection,
                      background: Background | None = None,
                      order: int = 2):
    """Induced variations of the prolongation slots.

    Returns (delta nabla phi, delta rho) with
      (delta nabla phi)_a = d_a dphi - act_a(dphi) - dkappa_a . phi
      delta rho = -(d_a dkappa_b - d_b dkappa_a - [k_a, dkappa_b]
                    - [dkappa_a, k_b])    (antisymmetrized, rho = -d_k k).
    """
    m = phi.chart.m
    dnab = covariant_derivative(v.dphi, kappa=conn, background=background,
                                order=order)
    extra = matvec_deriv(v.dkappa, phi.data, phi.data.ndim - len(phi.signature.fiber_shape),
                         m)
    # extra: grid + (m,) + (1,) + fiber -> fold slot axis into the new m axis
    extra = np.take(np.moveaxis(extra, m + 1, -1), 0, axis=-1)
    dnab = GridField(phi.chart, dnab.signature, dnab.data - extra)

    ddk = _deriv_stack(v.dkappa, phi.chart, order)
    k = conn.kappa
    slots = []
    for a, b in index_combos(m, 2):
        slots.append(ddk[..., a, b, :, :] - ddk[..., b, a, :, :]
                     - commutator(k[..., a, :, :], v.dkappa[..., b, :, :])
                     - commutator(v.dkappa[..., a, :, :], k[..., b, :, :]))
    dz2 = np.stack(slots, axis=m)
    sig = FiberSignature((Endomorphism(conn.n),), 2, "standard")
    drho = GridField(phi.chart, sig, -dz2)
    return dnab, drho


def gauge_variation(gen: np.ndarray, phi: GridField, conn: LinearConnection,
                    order: int = 2) -> VariationPair:
    """Infinitesimal gauge transformation: dphi = l(phi), dkappa = d_k l.

    gen: grid + (n, n) endomorphism section (must lie in the declared
    subalgebra when the connection carries one).
    """
    m = phi.chart.m
    if conn.basis is not None:
        bas = np.stack([b.reshape(-1) for b in conn.basis])
        flat = gen.reshape(-1, conn.n * conn.n)
        coef, *_ = np.linalg.lstsq(bas.T, flat.T, rcond=None)
        resid = flat - coef.T @ bas
        if np.max(np.abs(resid)) > 1e-10 * max(np.max(np.abs(flat)), 1.0):
            raise ValueError("gauge generator outside the subalgebra span")
    if phi.signature.fiber_shape != (conn.n,):
        raise NotImplementedError("gauge variation implemented for E-valued sections")
    dphi_data = np.einsum("...pq,...q->...p", gen[..., None, :, :], phi.data)
    dphi = GridField(phi.chart, phi.signature, dphi_data)
    dgen = _deriv_stack(gen, phi.chart, order)
    dkappa = np.empty(phi.chart.shape + (m,) + gen.shape[-2:], dtype=dgen.dtype)
    for a in range(m):
        dkappa[..., a, :, :] = dgen[..., a, :, :] \
            - commutator(conn.kappa[..., a, :, :], gen)
    return VariationPair(dphi, dkappa)
