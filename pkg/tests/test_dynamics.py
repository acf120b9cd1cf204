"""Field equations, energy tensors, currents, gravity, action oracle."""

import math

import numpy as np
import pytest

from covform.dynamics import (action_tools, canonical_energy_tensor,
                              dirac_residual, divergence_of_T,
                              field_eq_residual, gauge_delta_lambda,
                              gravity_residuals, noether_current,
                              stress_energy_tensor, total_stress_energy)
from covform.fiber import FiberSignature
from covform.grid import Chart, interior_mask, make_trig_field
from covform.states import (abelian_vacuum, dirac_wave, frw_gravity_state,
                            klein_gordon_wave, minkowski_gravity_state,
                            random_boson_state, random_dirac_state,
                            random_gauge_state, so3_basis)

CH = Chart(4, 6, 1.0)


def sup(a):
    return float(np.max(np.abs(a)))


def order_of(errs):
    return math.log2(errs[0] / errs[1])


def test_klein_gordon_wave_residual_order():
    errs = []
    for n in (8, 16):
        st = klein_gordon_wave(Chart(4, n, 1.0), modes=(1, 0, 0, 0))
        r = field_eq_residual("boson", st)
        errs.append(sup(r["matterbar_cov"]))
    assert 1.8 < order_of(errs) < 2.2


def test_dirac_wave_residual_order_and_sign_mapping():
    errs = []
    for n in (8, 16):
        st = dirac_wave(Chart(4, n, 1.0), modes=(1, 0, 0, 0))
        r = field_eq_residual("dirac", st)
        rp, rb = dirac_residual(st)
        # the first-order form is literally the divergence form
        assert sup(r["matterbar_cov"] - rp) < 1e-11
        assert sup(r["matter_cov"] - rb) < 1e-11
        errs.append(sup(r["matterbar_cov"]))
    assert 1.8 < order_of(errs) < 2.2


def test_abelian_vacuum_interior_exact():
    ch = Chart(4, 8, 1.0)
    st = abelian_vacuum(ch)
    r = field_eq_residual("gauge", st)
    mask = interior_mask(ch, 0, 2)
    assert sup(r["gauge_cov"][mask]) < 1e-10


@pytest.mark.parametrize("mk,sector", [(random_boson_state, "boson"),
                                       (random_dirac_state, "dirac"),
                                       (random_gauge_state, "gauge")])
def test_covariant_vs_simplified_residual(mk, sector):
    st = mk(CH, seed=7)
    r = field_eq_residual(sector, st)
    for k in [k[:-4] for k in r if k.endswith("_cov")]:
        scale = max(sup(r[k + "_cov"]), 1.0)
        assert sup(r[k + "_cov"] - r[k + "_simp"]) / scale < 1e-11


@pytest.mark.parametrize("mk,sector", [(random_boson_state, "boson"),
                                       (random_gauge_state, "gauge")])
def test_action_oracle_signs(mk, sector):
    # discrete action derivative at a point matches the residual pairing:
    # dS/dphi = +matter_res h^m, dS/dkappa = -gauge_res h^m
    st = mk(CH, seed=11)
    at = action_tools(sector, st)
    hm = CH.cell_volume
    r = field_eq_residual(sector, st)
    pt = (2, 3, 1, 4)
    if sector == "boson":
        comp = (1, 0)
        ds = at.variation_oracle(pt, "phi", comp)
        assert abs(ds - r["matter_cov"][pt + comp] * hm) / abs(ds) < 2e-4
        ds = at.variation_oracle(pt, "phibar", comp)
        assert abs(ds - r["matterbar_cov"][pt + comp] * hm) / abs(ds) < 2e-4
    comp = (1, 0, 2)
    ds = at.variation_oracle(pt, "kappa", comp)
    pred = -r["gauge_cov"][pt + comp] * hm
    assert abs(ds - pred) / max(abs(ds), 1e-30) < 2e-4


def test_action_oracle_local_recompute_bit_identical():
    st = random_gauge_state(CH, seed=11)
    at = action_tools("gauge", st)
    lam_full = at.lambda_field()
    pts = [(1, 2, 3, 4), (0, 0, 0, 0), (5, 1, 2, 3)]
    assert sup(at.lambda_at(pts) - np.array([lam_full[p] for p in pts])) == 0.0


@pytest.mark.parametrize("sector", ["boson", "dirac", "gauge", "gravity"])
def test_energy_tensor_generic_vs_closed(sector):
    if sector == "gravity":
        st = frw_gravity_state(Chart(4, 8, 1.0))
    else:
        mk = {"boson": random_boson_state, "dirac": random_dirac_state,
              "gauge": random_gauge_state}[sector]
        st = mk(CH, seed=5)
    gen, clo = canonical_energy_tensor(sector, st)
    assert sup(gen - clo) / max(sup(gen), 1.0) < 1e-11


@pytest.mark.parametrize("sector", ["boson", "gauge", "dirac"])
def test_stress_energy_relation_and_symmetry(sector):
    # dirac needs a genuine conjugate pair for T to come out real
    if sector == "dirac":
        st = dirac_wave(Chart(4, 8, 1.0), modes=(1, 0, 0, 0))
    else:
        mk = {"boson": random_boson_state, "gauge": random_gauge_state}[sector]
        st = mk(CH, seed=9)
    d = stress_energy_tensor(sector, st)
    scale = max(sup(d["T"]), 1.0)
    assert sup(d["T"] - d["T_rel"]) / scale < 1e-10
    assert sup(d["T"] - np.swapaxes(d["T"], -1, -2)) / scale < 1e-10


def test_divergence_of_T_on_shell_and_off_shell():
    # plane-wave bilinears are constant, so div T vanishes to roundoff
    st = klein_gordon_wave(Chart(4, 8, 1.0), modes=(1, 0, 0, 0))
    t = total_stress_energy(st)
    div = divergence_of_T(t, st.metric, order=st.order,
                          Gamma=st.background.Gamma)
    assert sup(div) < 1e-11
    # a random non-solution state must not conserve
    st = random_boson_state(CH, seed=21)
    t = total_stress_energy(st)
    div = divergence_of_T(t, st.metric, order=st.order,
                          Gamma=st.background.Gamma)
    assert sup(div) > 1e-3


def test_divergence_of_T_standing_wave_order():
    # a real cosine standing wave has a varying T, exposing the O(h^2)
    from covform.connections import LinearConnection
    from covform.dynamics import matter_signature, prolong
    from covform.grid import GridField
    from covform.states import flat_background, wave_covector
    errs = []
    for n in (16, 32):
        ch = Chart(4, n, 1.0)
        k = wave_covector(ch, (1, 0, 0, 0))
        arg = sum(k[a] * ch.coords(a) for a in range(4))
        mass = math.sqrt(float(k[0] ** 2 - np.sum(k[1:] ** 2)))
        sig = matter_signature("boson", 1, 1)
        phi = GridField(ch, sig, np.broadcast_to(
            np.cos(arg)[..., None, None, None], ch.shape + (1, 1, 1)).copy())
        phibar = GridField(ch, sig.dual(), phi.data.copy())
        st = prolong("boson", phi=phi, phibar=phibar,
                     kappa=LinearConnection.zero(ch, 1),
                     background=flat_background(ch), mass=mass)
        t = total_stress_energy(st)
        div = divergence_of_T(t, st.metric, order=st.order,
                              Gamma=st.background.Gamma)
        errs.append(sup(div))
    assert 1.7 < order_of(errs) < 2.3


def test_gravity_minkowski_exact():
    gr = gravity_residuals(minkowski_gravity_state(CH))
    assert sup(gr["g_res"]) < 1e-12
    assert sup(gr["gamma_res"]) < 1e-12


def test_gravity_frw_orders():
    errs_g, errs_m = [], []
    for n in (8, 16):
        gr = gravity_residuals(frw_gravity_state(Chart(4, n, 1.0)))
        errs_g.append(sup(gr["gamma_res"]))
        errs_m.append(sup(gr["metricity"]))
    assert 1.7 < order_of(errs_g) < 2.3
    assert 1.7 < order_of(errs_m) < 2.3


@pytest.mark.parametrize("mk,sector", [(random_boson_state, "boson"),
                                       (random_dirac_state, "dirac"),
                                       (random_gauge_state, "gauge")])
def test_gauge_invariance_of_lambda(mk, sector):
    # an infinitesimal so(3) rotation with varying coefficients leaves the
    # pointwise Lagrangian unchanged
    st = mk(CH, seed=13)
    coefs = [make_trig_field(CH, FiberSignature((), 0, "standard"),
                             seed=40 + k, max_wavenumber=1).data[..., 0]
             for k in range(3)]
    gen = sum(c[..., None, None] * j for c, j in zip(coefs, so3_basis()))
    assert sup(gauge_delta_lambda(sector, st, gen)) < 1e-10


def test_noether_current_zero_w_gives_energy_contraction():
    st = random_gauge_state(CH, seed=17)
    u = np.zeros(CH.shape + (4,))
    u[..., 0] = 1.0
    cur = noether_current(u, None, None, st)
    ugen, _ = canonical_energy_tensor("gauge", st)
    assert sup(cur.data - ugen[..., :, 0]) < 1e-12


def test_gauge_charge_current_conserved_on_wave():
    # a constant internal phase rotation of a complex plane wave yields a
    # spatially constant current, conserved to roundoff
    from covform.grid import diff_axis
    ch = Chart(4, 8, 1.0)
    st = klein_gordon_wave(ch, modes=(1, 0, 0, 0))
    phi = st.phi.data[..., 0, :, :]
    phibar = st.phibar.data[..., 0, :, :]
    w = 1j * phi
    wbar = -1j * phibar
    wk = np.zeros(ch.shape + (4, 1, 1), dtype=complex)
    cur = noether_current(None, w, wk, st, w_matterbar=wbar)
    div = sum(diff_axis(cur.data[..., a], a, ch.h, st.order) for a in range(4))
    assert sup(div) < 1e-11
