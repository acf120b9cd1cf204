"""Covariant differentials, divergence, replacement principle, variations."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covform.calculus import (connection_as_form, covariant_derivative,
                              covariant_divergence, covariant_lie_derivative,
                              d_kappa_basic, d_kappa_lie, d_kappa_std,
                              gauge_variation, replacement_residual,
                              tilde_divergence_sign_check, variation_prolong,
                              VariationPair)
from covform.connections import (Background, LinearConnection,
                                 SpacetimeConnection, curvature, dkk,
                                 levi_civita)
from covform.fiber import (FiberSignature, InternalVector, Metric,
                           interior_product)
from covform.grid import Chart, GridField, make_trig_field
from covform.states import (random_complementary_field, random_so3_connection,
                            random_spacetime_connection)

CH = Chart(4, 6, 1.0)


def _flat_bg(ch=CH):
    return Background(Metric.minkowski(ch), SpacetimeConnection.zero(ch))


def test_covariant_derivative_constant_section():
    sig = FiberSignature((InternalVector(3),), 0)
    phi = GridField(CH, sig, np.ones(CH.shape + (1, 3)))
    kap = LinearConnection.zero(CH, 3)
    nab = covariant_derivative(phi, kappa=kap, background=_flat_bg())
    assert nab.signature.degree == 1
    assert nab.sup_norm() < 1e-14
    # with a connection, nabla phi = -kappa phi pointwise
    kap = random_so3_connection(CH, seed=1)
    nab = covariant_derivative(phi, kappa=kap, background=_flat_bg())
    want = -np.einsum("...aij,...j->...ai", kap.kappa, phi.data[..., 0, :])
    assert np.max(np.abs(nab.data - want)) < 1e-14


def test_d_kappa_std_squares_to_curvature():
    # d_k d_k phi = rho . phi up to the discrete Leibniz error, O(h^2)
    errs = []
    for n in (8, 16):
        ch = Chart(4, n, 1.0)
        sig = FiberSignature((InternalVector(3),), 0)
        phi = make_trig_field(ch, sig, seed=2, max_wavenumber=1)
        kap = random_so3_connection(ch, seed=3)
        dphi = covariant_derivative(phi, kappa=kap, background=_flat_bg(ch))
        ddphi = d_kappa_std(dphi, kappa=kap)
        rho = curvature(kap)
        want = np.einsum("...sij,...j->...si", rho.data, phi.data[..., 0, :])
        errs.append(np.max(np.abs(ddphi.data - want)))
    assert 1.7 < np.log2(errs[0] / errs[1]) < 2.3


def test_curvature_equals_lie_differential_of_connection_form():
    kap = random_so3_connection(CH, seed=5)
    rho = curvature(kap)
    lie = d_kappa_lie(connection_as_form(kap), kap)
    assert np.max(np.abs(rho.data + lie.data)) < 1e-13


@settings(max_examples=8, deadline=None)
@given(r=st.integers(1, 3), seed=st.integers(0, 1000))
def test_replacement_principle_exact(r, seed):
    # the discrete divergence satisfies the replacement identity to roundoff
    xi = random_complementary_field(CH, seed=seed, r=r)
    kap = random_so3_connection(CH, seed=seed + 1)
    gam = random_spacetime_connection(CH, seed=seed + 2)
    res = replacement_residual(xi, gam, kappa=kap)
    assert res.sup_norm() < 1e-12 * max(xi.sup_norm(), 1.0)


def test_replacement_torsion_free_reduces():
    xi = random_complementary_field(CH, seed=7, r=2)
    kap = random_so3_connection(CH, seed=8)
    gam = random_spacetime_connection(CH, seed=9, torsion_free=True)
    div = covariant_divergence(xi, gam, kappa=kap)
    dk = d_kappa_basic(xi, kappa=kap)
    assert np.max(np.abs(div.data - dk.data)) < 1e-12


def test_divergence_r0_vanishes():
    sig = FiberSignature((), 0, "complementary")
    xi = make_trig_field(CH, sig, seed=10, max_wavenumber=1)
    gam = random_spacetime_connection(CH, seed=11)
    assert covariant_divergence(xi, gam).sup_norm() == 0.0


def test_tilde_divergence_sign():
    xi = random_complementary_field(CH, seed=12, r=2)
    gam = SpacetimeConnection.zero(CH)
    ok, dev = tilde_divergence_sign_check(xi, gam,
                                          kappa=LinearConnection.zero(CH, 3))
    assert ok, dev


def test_d_kappa_basic_rejects_standard():
    sig = FiberSignature((InternalVector(2),), 1, "standard")
    f = make_trig_field(CH, sig, seed=13, max_wavenumber=1)
    with pytest.raises(ValueError):
        d_kappa_basic(f)


def test_lie_derivative_constant_vector_flat():
    # for constant u and zero kappa, L_u reduces to u^a d_a componentwise
    from covform.grid import diff_axis
    sig = FiberSignature((InternalVector(2),), 1, "standard")
    f = make_trig_field(CH, sig, seed=14, max_wavenumber=1)
    kap = LinearConnection.zero(CH, 2)
    u = np.zeros(CH.shape + (4,))
    u[..., 1] = 1.0
    lie = covariant_lie_derivative(f, u, kap)
    want = diff_axis(f.data, 1, CH.h, 2)
    assert np.max(np.abs(lie.data - want)) < 1e-11


def test_variation_prolong_matches_finite_difference():
    # perturb (phi, kappa) along a variation and compare slot changes
    eps = 1e-6
    sig = FiberSignature((InternalVector(3),), 0)
    phi = make_trig_field(CH, sig, seed=15, max_wavenumber=1)
    kap = random_so3_connection(CH, seed=16)
    dphi = make_trig_field(CH, sig, seed=17, max_wavenumber=1)
    dkap = random_so3_connection(CH, seed=18).kappa
    var = VariationPair(dphi, dkap)
    dnab, drho = variation_prolong(var, phi, kap, background=_flat_bg())

    def slots(kap_arr, phi_f):
        conn = LinearConnection(CH, kap_arr)
        z1 = covariant_derivative(phi_f, kappa=conn, background=_flat_bg())
        return z1.data, -dkk(conn).data
    zp, rp = slots(kap.kappa + eps * dkap,
                   GridField(CH, sig, phi.data + eps * dphi.data))
    zm, rm = slots(kap.kappa - eps * dkap,
                   GridField(CH, sig, phi.data - eps * dphi.data))
    assert np.max(np.abs((zp - zm) / (2 * eps) - dnab.data)) < 1e-8
    assert np.max(np.abs((rp - rm) / (2 * eps) - drho.data)) < 1e-8


def test_gauge_variation_subalgebra_guard():
    sig = FiberSignature((InternalVector(3),), 0)
    phi = make_trig_field(CH, sig, seed=19, max_wavenumber=1)
    kap = random_so3_connection(CH, seed=20)
    bad = np.zeros(CH.shape + (3, 3))
    bad[..., 0, 0] = 1.0                      # not antisymmetric
    with pytest.raises(ValueError):
        gauge_variation(bad, phi, kap)


def test_gauge_variation_flat_constant_generator():
    # constant generator with zero connection: dkappa = 0, dphi = l phi
    sig = FiberSignature((InternalVector(3),), 0)
    phi = make_trig_field(CH, sig, seed=21, max_wavenumber=1)
    kap = LinearConnection.zero(CH, 3)
    from covform.states import so3_basis
    gen = np.broadcast_to(so3_basis()[0], CH.shape + (3, 3)).copy()
    var = gauge_variation(gen, phi, kap)
    assert np.max(np.abs(var.dkappa)) < 1e-12
    want = np.einsum("ij,...j->...i", so3_basis()[0], phi.data[..., 0, :])
    assert np.max(np.abs(var.dphi.data[..., 0, :] - want)) < 1e-14
