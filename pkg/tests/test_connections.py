"""Connections, torsion, gamma matrices, curvature."""

import numpy as np
import pytest

from covform.connections import (Background, LinearConnection,
                                 SpacetimeConnection, SpinorConnection, dkk,
                                 curvature, dual_connection, gamma_matrices,
                                 levi_civita, riemann_from_gamma,
                                 tensor_product_connection)
from covform.fiber import FiberSignature, InternalVector, Metric, Multiplicity
from covform.grid import Chart, diff_axis, interior_mask
from covform.states import (abelian_vacuum, random_so3_connection,
                            random_spacetime_connection, so3_basis)


def test_linear_connection_shape_check():
    ch = Chart(4, 4)
    with pytest.raises(ValueError):
        LinearConnection(ch, np.zeros(ch.shape + (3, 2, 2)))
    LinearConnection.zero(ch, 2)


def test_subalgebra_span_check():
    ch = Chart(4, 4)
    kap = np.zeros(ch.shape + (4, 3, 3))
    kap[..., 0, 0, 1] = 1.0          # symmetric part: not in so(3)
    kap[..., 0, 1, 0] = 1.0
    with pytest.raises(ValueError):
        LinearConnection(ch, kap, basis=so3_basis())
    conn = random_so3_connection(ch, seed=2)
    assert conn.project_to_basis(conn.kappa) < 1e-12


def test_dual_connection_transpose():
    ch = Chart(4, 4)
    conn = random_so3_connection(ch, seed=3)
    dual = dual_connection(conn)
    assert np.allclose(dual.kappa, -np.swapaxes(conn.kappa, -1, -2))


def test_torsion_and_trace():
    ch = Chart(4, 4)
    gam = random_spacetime_connection(ch, seed=5)
    t = gam.torsion
    # T^a_{bc} = gamma[b,a,c] - gamma[c,a,b], antisymmetric in (b, c)
    assert np.allclose(t, -np.swapaxes(t, -1, -2))
    assert np.allclose(gam.tau, np.einsum("...bab->...a", t))
    sym = random_spacetime_connection(ch, seed=5, torsion_free=True)
    assert np.max(np.abs(sym.torsion)) < 1e-12


def test_levi_civita_metric_compatibility():
    # nabla_c g_{ab} = 0 exactly for the discrete Christoffel coefficients
    ch = Chart(4, 8)
    met = Metric.frw(ch, eps=0.1)
    gam = levi_civita(met).gamma
    dg = np.stack([diff_axis(met.g, c, ch.h, 2) for c in range(4)], axis=4)
    nabla_g = (dg - np.einsum("...cea,...eb->...cab", gam, met.g)
               - np.einsum("...ceb,...ae->...cab", gam, met.g))
    assert np.max(np.abs(nabla_g)) < 1e-13


def test_levi_civita_torsion_free():
    ch = Chart(4, 8)
    gam = levi_civita(Metric.frw(ch, eps=0.1))
    assert np.max(np.abs(gam.torsion)) < 1e-12


def test_gamma_matrices_clifford():
    g = gamma_matrices(4)
    eta = np.diag([1.0, -1, -1, -1])
    anti = np.einsum("aij,bjk->abik", g, g) + np.einsum("bij,ajk->abik", g, g)
    want = 2.0 * eta[:, :, None, None] * np.eye(4)
    assert np.max(np.abs(anti - want)) < 1e-14
    ch = Chart(4, 4)
    sp = SpinorConnection(ch)
    assert sp.check_anticommutation(Metric.minkowski(ch)) < 1e-14


def test_curvature_abelian_constant():
    # kappa_1 = -F x^0 gives rho_{01} = F away from the wrap seam
    ch = Chart(4, 8)
    st = abelian_vacuum(ch, field_strength=0.7)
    rho = curvature(st.kappa)
    mask = interior_mask(ch, 0, 2)
    assert np.max(np.abs(rho.data[mask][..., 0, 0, 0] - 0.7)) < 1e-12


def test_curvature_antisymmetry_is_packed():
    ch = Chart(4, 4)
    conn = random_so3_connection(ch, seed=11)
    rho = curvature(conn)
    assert rho.data.shape == ch.shape + (6, 3, 3)
    # curvature of an so(3) connection stays in so(3)
    assert np.max(np.abs(rho.data + np.swapaxes(rho.data, -1, -2))) < 1e-12


def test_dkk_is_minus_curvature():
    ch = Chart(4, 4)
    conn = random_so3_connection(ch, seed=13)
    assert np.array_equal(dkk(conn).data, -curvature(conn).data)


def test_riemann_minkowski_zero():
    ch = Chart(4, 4)
    met = Metric.minkowski(ch)
    gam = levi_civita(met)
    assert np.max(np.abs(riemann_from_gamma(gam).data)) < 1e-13


def test_tensor_product_connection_multiplicity_inert():
    ch = Chart(4, 4)
    conn = random_so3_connection(ch, seed=17)
    sig = FiberSignature((InternalVector(3), Multiplicity(2)), 0)
    bg = Background(Metric.minkowski(ch), SpacetimeConnection.zero(ch))
    pc = tensor_product_connection(sig, conn, bg)
    assert pc.actions[0][0] == "mat"
    assert pc.actions[1] is None
