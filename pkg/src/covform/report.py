"""Scenario configuration, verification suites, convergence studies, reports.

A Scenario is a JSON-described desk-scale configuration (chart, sector,
metric/connection/field specs, suites, tolerances).  run_suite executes the
named check suites and assembles a deterministic machine-readable report
(schema "covform-report/1"); convergence_study measures one named residual
across a ladder of grid refinements and emits a CSV table.

Each check record carries an `anchor`: the identity or property the check
measures, written as a formula, so reports are self-describing.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .calculus import (connection_as_form, d_kappa_lie, replacement_residual,
                       _deriv_stack)
from .connections import curvature, levi_civita
from .dynamics import (action_tools, canonical_energy_tensor, divergence_of_T,
                       field_eq_residual, gauge_delta_lambda, gravity_residuals,
                       matter_signature, noether_current, prolong,
                       stress_energy_tensor, total_stress_energy)
from .fiber import Metric
from .grid import Chart, GridField, diff_axis, interior_mask
from .sectors import momenta_analytic, momenta_numeric, random_fiber_point
from .states import (abelian_vacuum, dirac_wave, flat_background,
                     frw_gravity_state, klein_gordon_wave,
                     minkowski_gravity_state, random_boson_state,
                     random_complementary_field, random_dirac_state,
                     random_gauge_state, random_so3_connection,
                     random_spacetime_connection, wave_covector)

SCHEMA = "covform-report/1"

SUITE_NAMES = ("identities", "momenta", "field-equations", "energy", "gravity")

STUDY_NAMES = ("replacement", "curvature", "matter-residual", "dirac-residual",
               "gravity-gamma", "stress-divergence")

DEFAULT_TOLERANCES = {
    "exact": 1e-11,          # absolute sup-norm below which a value is "exact"
    "pointwise": 1e-10,      # relative tolerance for algebraic identities
    "order_lo": 1.8,
    "order_hi": 2.2,
    "oracle": 1e-6,          # action variation oracle vs residual density
}


class ConfigError(ValueError):
    """Unreadable or malformed configuration (CLI exit code 2)."""


class ValidationError(ValueError):
    """Well-formed configuration with inadmissible values (CLI exit code 3)."""


# ---------------------------------------------------------------------------
# scenario

_TOP_KEYS = {"chart", "sector", "metric", "connection", "field", "study",
             "suites", "tolerances", "seed", "out"}


@dataclass
class Scenario:
    m: int = 4
    n: int = 8
    box: float = 1.0
    sector: str = "boson"
    metric: dict = dc_field(default_factory=lambda: {"type": "minkowski"})
    connection: dict = dc_field(default_factory=lambda: {"type": "zero"})
    field: dict = dc_field(default_factory=lambda:
                           {"type": "plane-wave", "modes": [1, 0, 0, 0],
                            "amplitude": 1.0})
    study: str | None = None
    suites: tuple = ("all",)
    tolerances: dict = dc_field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 7
    out: dict = dc_field(default_factory=dict)

    def chart(self, n: int | None = None) -> Chart:
        return Chart(self.m, n or self.n, self.box)

    def resolved(self) -> dict:
        return {
            "chart": {"m": self.m, "n": self.n, "box": self.box,
                      "h": self.box / self.n},
            "sector": self.sector,
            "metric": self.metric,
            "connection": self.connection,
            "field": self.field,
            "study": self.study,
            "suites": list(self.suites),
            "tolerances": self.tolerances,
            "seed": self.seed,
            "out": self.out,
        }


def parse_scenario(raw: dict) -> Scenario:
    """Validate a decoded JSON object into a Scenario.

    Unknown keys are parse errors (exit 2 territory); admissible-shape but
    inadmissible-value problems are validation errors (exit 3).
    """
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario key: {sorted(unknown)[0]!r}")
    chart = raw.get("chart", {})
    if not isinstance(chart, dict):
        raise ConfigError("key 'chart' must be an object")
    bad = set(chart) - {"m", "n", "box"}
    if bad:
        raise ConfigError(f"unknown chart key: {sorted(bad)[0]!r}")
    scn = Scenario(
        m=int(chart.get("m", 4)),
        n=int(chart.get("n", 8)),
        box=float(chart.get("box", 1.0)),
        sector=raw.get("sector", "boson"),
        metric=raw.get("metric", {"type": "minkowski"}),
        connection=raw.get("connection", {"type": "zero"}),
        field=raw.get("field", {"type": "plane-wave", "modes": [1, 0, 0, 0],
                                "amplitude": 1.0}),
        study=raw.get("study"),
        suites=tuple(raw.get("suites", ["all"])),
        seed=int(raw.get("seed", 7)),
        out=raw.get("out", {}),
    )
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(raw.get("tolerances", {}))
    scn.tolerances = tol
    _validate(scn)
    return scn


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read scenario {path!r}: {e}") from e
    return parse_scenario(raw)


def _validate(scn: Scenario):
    if scn.m != 4:
        raise ValidationError("only m = 4 charts are supported")
    if scn.n < 4:
        raise ValidationError("chart needs at least 4 points per axis")
    if scn.n % 2:
        raise ValidationError("n must be a multiple of 2 (convergence pairing)")
    if scn.sector not in ("boson", "dirac", "gauge", "gravity"):
        raise ValidationError(f"unknown sector {scn.sector!r}")
    for name in scn.suites:
        if name != "all" and name not in SUITE_NAMES:
            raise ValidationError(f"unknown suite {name!r}")
    if scn.study is not None and scn.study not in STUDY_NAMES:
        raise ValidationError(f"unknown study {scn.study!r}")
    for spec, allowed in ((scn.metric, ("minkowski", "frw")),
                          (scn.connection, ("zero", "abelian-profile",
                                            "random-subalgebra", "levi-civita")),
                          (scn.field, ("constant", "plane-wave", "random-trig"))):
        if not isinstance(spec, dict) or "type" not in spec:
            raise ConfigError("metric/connection/field specs need a 'type' key")
        if spec["type"] not in allowed:
            raise ValidationError(f"unknown spec type {spec['type']!r}")


def build_state(scn: Scenario, n: int | None = None):
    """A DFState realizing the scenario's sector/metric/connection/field."""
    ch = scn.chart(n)
    if scn.sector == "gravity":
        if scn.metric["type"] == "frw":
            return frw_gravity_state(ch, eps=float(scn.metric.get("eps", 0.1)))
        return minkowski_gravity_state(ch)
    if scn.sector == "gauge":
        ctype = scn.connection["type"]
        if ctype == "abelian-profile":
            return abelian_vacuum(ch, field_strength=float(
                scn.connection.get("field_strength", 0.5)))
        return random_gauge_state(ch, seed=int(scn.connection.get("seed",
                                                                  scn.seed)))
    ftype = scn.field["type"]
    if ftype == "plane-wave":
        modes = tuple(scn.field.get("modes", (1, 0, 0, 0)))
        if scn.sector == "boson":
            return klein_gordon_wave(ch, modes=modes,
                                     amplitude=float(scn.field.get("amplitude",
                                                                   1.0)))
        return dirac_wave(ch, modes=modes)
    seed = int(scn.field.get("seed", scn.seed))
    mw = int(scn.field.get("max_wavenumber", 1))
    if scn.sector == "boson":
        return random_boson_state(ch, seed=seed, max_wavenumber=mw)
    return random_dirac_state(ch, seed=seed, max_wavenumber=mw)


# ---------------------------------------------------------------------------
# shared measurement helpers

def _sup(a) -> float:
    return float(np.max(np.abs(a)))


def _order_record(values, tol, scale: float = 1.0):
    """(order, passed) for a residual ladder; 'exact' if all are roundoff."""
    exact = tol["exact"] * max(scale, 1.0)
    if all(v <= exact for v in values):
        return "exact", True
    if any(v <= 0 for v in values):
        return None, False
    orders = [math.log2(values[i] / values[i + 1]) for i in range(len(values) - 1)]
    ok = all(tol["order_lo"] <= o <= tol["order_hi"] for o in orders)
    return (orders[0] if len(orders) == 1 else orders), ok


def textbook_einstein_density(metric: Metric, order: int = 2) -> np.ndarray:
    """sqrt|g| G^{ab} via the Christoffel -> Riemann -> Ricci pipeline.

    Independent of the momentum-based gravity residuals: builds
    R^a_{bcd} = d_c Gam^a_{db} - d_d Gam^a_{cb} + Gam^a_{ce}Gam^e_{db}
              - Gam^a_{de}Gam^e_{cb}
    from scratch and contracts the textbook way.
    """
    chart = metric.chart
    m = chart.m
    dg = _deriv_stack(metric.g, chart, order)                 # grid + (c, a, b)
    # Gam^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc})
    gam = 0.5 * np.einsum("...ad,...bdc->...abc", metric.inv, dg)
    gam = gam + 0.5 * np.einsum("...ad,...cdb->...abc", metric.inv, dg)
    gam = gam - 0.5 * np.einsum("...ad,...dbc->...abc", metric.inv, dg)
    dgam = _deriv_stack(gam, chart, order)                    # grid + (e, a, b, c)
    riem = (np.einsum("...cadb->...abcd", dgam)
            - np.einsum("...dacb->...abcd", dgam)
            + np.einsum("...ace,...edb->...abcd", gam, gam)
            - np.einsum("...ade,...ecb->...abcd", gam, gam))
    ric = np.einsum("...abad->...bd", riem)
    scal = np.einsum("...bd,...bd->...", metric.inv, ric)
    g_low = ric - 0.5 * scal[..., None, None] * metric.g
    g_up = np.einsum("...ac,...bd,...cd->...ab", metric.inv, metric.inv, g_low)
    return g_up * metric.sqrt_abs_det[..., None, None]


# ---------------------------------------------------------------------------
# checks; each takes (scn) and returns a partial record dict

def _check_replacement(scn: Scenario):
    tol = scn.tolerances
    worst = 0.0
    details = []
    for r in (1, 2, 3):
        values, scale = [], 1.0
        for n in (scn.n, 2 * scn.n):
            ch = scn.chart(n)
            xi = random_complementary_field(ch, seed=scn.seed + 10 * r, r=r)
            kap = random_so3_connection(ch, seed=scn.seed + 100 + r)
            gam = random_spacetime_connection(ch, seed=scn.seed + 200 + r)
            res = replacement_residual(xi, gam, kappa=kap)
            values.append(res.sup_norm())
            scale = max(scale, xi.sup_norm())
        order, ok = _order_record(values, tol, scale)
        worst = max(worst, values[-1])
        details.append({"r": r, "values": values, "order": order, "ok": ok})
    passed = all(d["ok"] for d in details)
    return {"anchor": "div(xi) = d_k xi - tau^xi - (1/2) T barwedge xi",
            "value": worst, "details": details, "passed": passed}


def _check_replacement_torsion_free(scn: Scenario):
    tol = scn.tolerances
    values, scale = [], 1.0
    for n in (scn.n, 2 * scn.n):
        ch = scn.chart(n)
        xi = random_complementary_field(ch, seed=scn.seed + 3, r=2)
        kap = random_so3_connection(ch, seed=scn.seed + 103)
        gam = random_spacetime_connection(ch, seed=scn.seed + 203,
                                          torsion_free=True)
        res = replacement_residual(xi, gam, kappa=kap)
        values.append(res.sup_norm())
        scale = max(scale, xi.sup_norm())
    order, ok = _order_record(values, tol, scale)
    return {"anchor": "torsion-free: div(xi) = d_k xi",
            "value": values[-1], "values": values, "order": order, "passed": ok}


def _check_curvature_bracket(scn: Scenario):
    tol = scn.tolerances
    values, scale = [], 1.0
    for n in (scn.n, 2 * scn.n):
        ch = scn.chart(n)
        kap = random_so3_connection(ch, seed=scn.seed + 5)
        rho = curvature(kap)
        lie = d_kappa_lie(connection_as_form(kap), kap)
        values.append(_sup(rho.data + lie.data))
        scale = max(scale, rho.sup_norm())
    order, ok = _order_record(values, tol, scale)
    return {"anchor": "rho = -d_k k (connection bracket form)",
            "value": values[-1], "values": values, "order": order, "passed": ok}


def _check_curvature_affine(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    f = 0.5
    st = abelian_vacuum(ch, field_strength=f)
    rho = curvature(st.kappa)
    mask = interior_mask(ch, 0, 2)
    dev = _sup(rho.data[mask][..., 0, 0, 0] - f)
    return {"anchor": "affine abelian kappa: rho_{01} = F exactly (interior)",
            "value": dev, "passed": dev <= tol["exact"]}


def _check_lc_metricity(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    met = Metric.frw(ch, eps=0.1)
    gam = levi_civita(met).gamma
    dg = _deriv_stack(met.g, ch, 2)
    nabla_g = (dg - np.einsum("...cea,...eb->...cab", gam, met.g)
               - np.einsum("...ceb,...ae->...cab", gam, met.g))
    dev = _sup(nabla_g)
    return {"anchor": "discrete Levi-Civita: nabla_c g_{ab} = 0 exactly",
            "value": dev, "passed": dev <= tol["exact"]}


def _check_momenta(sector):
    def check(scn: Scenario):
        tol = scn.tolerances
        ch = Chart(scn.m, 4, scn.box)
        worst01, worst2 = 0.0, 0.0
        for k in range(2):
            p = random_fiber_point(sector, ch, seed=scn.seed + 17 * k)
            ana = momenta_analytic(sector, p)
            # matter and gauge lambdas are polynomial of degree <= 2 in all
            # perturbed slots, so central differences are step-size exact and
            # a larger step only reduces roundoff; gravity perturbs the
            # metric (non-polynomial) and needs the small step
            step = 1e-5 if sector == "gravity" else 1e-3
            num = momenta_numeric(sector, p, step=step)
            for slot in ("pi0", "pi1", "pi0bar", "pi1bar"):
                a, b = getattr(ana, slot), getattr(num, slot)
                if a is None:
                    continue
                worst01 = max(worst01, _sup(a - b) / max(_sup(a), 1.0))
            if ana.pi2 is not None:
                worst2 = max(worst2, _sup(ana.pi2 - num.pi2)
                             / max(_sup(ana.pi2), 1.0))
        passed = worst01 <= 1e-8 and worst2 <= 1e-10
        return {"anchor": "momenta: Pi = fiber derivative of lambda "
                          "(central-difference oracle)",
                "value": max(worst01, worst2),
                "linear_slots": worst01, "quadratic_slots": worst2,
                "passed": passed}
    return check


def _check_cov_vs_simplified(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    worst = 0.0
    for sector, mk in (("boson", random_boson_state),
                       ("dirac", random_dirac_state),
                       ("gauge", random_gauge_state)):
        st = mk(ch, seed=scn.seed)
        res = field_eq_residual(sector, st)
        for key in [k[:-4] for k in res if k.endswith("_cov")]:
            scale = max(_sup(res[key + "_cov"]), 1.0)
            worst = max(worst, _sup(res[key + "_cov"] - res[key + "_simp"])
                        / scale)
    return {"anchor": "covariant residual = simplified coordinate residual",
            "value": worst, "passed": worst <= tol["pointwise"]}


def _check_plane_wave(sector):
    def check(scn: Scenario):
        tol = scn.tolerances
        values = []
        for n in (scn.n, 2 * scn.n):
            ch = scn.chart(n)
            if sector == "boson":
                st = klein_gordon_wave(ch, modes=(1, 0, 0, 0))
            else:
                st = dirac_wave(ch, modes=(1, 0, 0, 0))
            res = field_eq_residual(sector, st)
            values.append(_sup(res["matterbar_cov"]))
        order, ok = _order_record(values, tol)
        return {"anchor": "free plane wave (k.k = m^2): residual -> 0 at "
                          "order 2",
                "value": values[-1], "values": values, "order": order,
                "passed": ok}
    return check


def _check_abelian_vacuum(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    st = abelian_vacuum(ch)
    res = field_eq_residual("gauge", st)
    mask = interior_mask(ch, 0, 2)
    dev = _sup(res["gauge_cov"][mask])
    return {"anchor": "constant-curvature abelian vacuum: d_a rho^{ab} = 0 "
                      "exactly (interior)",
            "value": dev, "passed": dev <= tol["exact"]}


def _check_action_oracle(sector):
    def check(scn: Scenario):
        tol = scn.tolerances
        ch = scn.chart()
        if sector == "boson":
            st = random_boson_state(ch, seed=scn.seed + 31)
        else:
            st = random_gauge_state(ch, seed=scn.seed + 31)
        at = action_tools(sector, st)
        res = field_eq_residual(sector, st)
        hm = ch.cell_volume
        rng = np.random.default_rng(scn.seed + 97)
        worst = 0.0
        for _ in range(20):
            pt = tuple(int(i) for i in rng.integers(0, ch.n, size=ch.m))
            if sector == "boson" and rng.integers(0, 2):
                comp = (int(rng.integers(0, 3)), int(rng.integers(0, 2)))
                which = "phi" if rng.integers(0, 2) else "phibar"
                key = "matter_cov" if which == "phi" else "matterbar_cov"
                ds = at.variation_oracle(pt, which, comp)
                pred = res[key][pt + comp] * hm
            else:
                comp = (int(rng.integers(0, ch.m)), int(rng.integers(0, 3)),
                        int(rng.integers(0, 3)))
                ds = at.variation_oracle(pt, "kappa", comp)
                pred = -res["gauge_cov"][pt + comp] * hm
            worst = max(worst, abs(ds - pred) / max(abs(pred), hm))
        return {"anchor": "dS under single-point perturbation = residual "
                          "density x h^m",
                "value": worst, "passed": worst <= tol["oracle"]}
    return check


def _check_energy_closed_forms(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    worst = 0.0
    pairs = (("boson", random_boson_state(ch, seed=scn.seed + 5)),
             ("dirac", random_dirac_state(ch, seed=scn.seed + 5)),
             ("gauge", random_gauge_state(ch, seed=scn.seed + 5)),
             ("gravity", frw_gravity_state(ch)))
    for sector, st in pairs:
        gen, clo = canonical_energy_tensor(sector, st)
        worst = max(worst, _sup(gen - clo) / max(_sup(gen), 1.0))
    return {"anchor": "U^a_b = lambda d^a_b - Pi.z1 - 2 Pi.z2 equals the "
                      "closed sector forms",
            "value": worst, "passed": worst <= tol["pointwise"]}


def _check_stress_relation(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    worst, worst_sym = 0.0, 0.0
    for sector, st in (("boson", random_boson_state(ch, seed=scn.seed + 9)),
                       ("gauge", random_gauge_state(ch, seed=scn.seed + 9))):
        d = stress_energy_tensor(sector, st)
        scale = max(_sup(d["T"]), 1.0)
        worst = max(worst, _sup(d["T"] - d["T_rel"]) / scale)
        worst_sym = max(worst_sym,
                        _sup(d["T"] - np.swapaxes(d["T"], -1, -2)) / scale)
    passed = worst <= tol["pointwise"] and worst_sym <= 1e-12
    return {"anchor": "U_{ab} + U_{ba} = -4 T_{ab} sqrt|g|; T symmetric",
            "value": worst, "symmetry": worst_sym, "passed": passed}


def _check_divT_onshell(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    st = klein_gordon_wave(ch, modes=(1, 0, 0, 0))
    t = total_stress_energy(st)
    div = divergence_of_T(t, st.metric, Gamma=st.background.Gamma)
    dev = _sup(div)
    return {"anchor": "on-shell plane wave: nabla_a T^{ab} = 0",
            "value": dev, "passed": dev <= tol["exact"] * max(_sup(t), 1.0)}


def _check_divT_offshell(scn: Scenario):
    ch = scn.chart()
    st = random_boson_state(ch, seed=scn.seed + 21)
    t = total_stress_energy(st)
    div = divergence_of_T(t, st.metric, Gamma=st.background.Gamma)
    dev = _sup(div)
    return {"anchor": "off-shell state: nabla_a T^{ab} generically nonzero "
                      "(anti-test)",
            "value": dev, "passed": dev > 1e-3}


def _check_gauge_invariance(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    from .fiber import FiberSignature
    from .grid import make_trig_field
    from .states import so3_basis
    worst = 0.0
    for sector, mk in (("boson", random_boson_state),
                       ("dirac", random_dirac_state),
                       ("gauge", random_gauge_state)):
        st = mk(ch, seed=scn.seed + 13)
        coefs = [make_trig_field(ch, FiberSignature((), 0, "standard"),
                                 seed=scn.seed + 40 + k,
                                 max_wavenumber=1).data[..., 0]
                 for k in range(3)]
        gen = sum(c[..., None, None] * j for c, j in zip(coefs, so3_basis()))
        dl = gauge_delta_lambda(sector, st, gen)
        worst = max(worst, _sup(dl))
    return {"anchor": "vertical gauge action: d(lambda) = 0 pointwise",
            "value": worst, "passed": worst <= tol["pointwise"]}


def _check_noether_w0(scn: Scenario):
    ch = scn.chart()
    st = random_gauge_state(ch, seed=scn.seed + 17)
    u = np.zeros(ch.shape + (ch.m,))
    u[..., 0] = 1.0
    u[..., 2] = -0.5
    cur = noether_current(u, None, None, st)
    ugen, _ = canonical_energy_tensor("gauge", st)
    dev = _sup(cur.data - np.einsum("...b,...ab->...a", u, ugen))
    return {"anchor": "noether current with w = 0 equals U contracted with u",
            "value": dev, "passed": dev <= 1e-12 * max(_sup(ugen), 1.0)}


def _check_noether_gauge_current(scn: Scenario):
    tol = scn.tolerances
    ch = scn.chart()
    st = klein_gordon_wave(ch, modes=(1, 0, 0, 0))
    phi = st.phi.data[..., 0, :, :]
    phibar = st.phibar.data[..., 0, :, :]
    gen = 1j * np.ones(ch.shape)
    w = gen[..., None, None] * phi
    wbar = -gen[..., None, None] * phibar
    wk = np.zeros(ch.shape + (ch.m, 1, 1), dtype=complex)
    cur = noether_current(None, w, wk, st, w_matterbar=wbar)
    div = sum(diff_axis(cur.data[..., a], a, ch.h, st.order)
              for a in range(ch.m))
    dev = _sup(div)
    scale = max(cur.sup_norm(), 1.0)
    return {"anchor": "on-shell charge current: d_a I^a = 0",
            "value": dev, "passed": dev <= tol["exact"] * scale}


def _check_gravity_minkowski(scn: Scenario):
    tol = scn.tolerances
    st = minkowski_gravity_state(scn.chart())
    gr = gravity_residuals(st)
    dev = max(_sup(gr["g_res"]), _sup(gr["gamma_res"]), _sup(gr["metricity"]))
    return {"anchor": "Minkowski with zero connection: all gravity residuals 0",
            "value": dev, "passed": dev <= tol["exact"]}


def _check_gravity_einstein_oracle(scn: Scenario):
    st = frw_gravity_state(scn.chart())
    gr = gravity_residuals(st)
    oracle = textbook_einstein_density(st.metric, order=st.order)
    dev = _sup(gr["g_res"] - oracle) / max(_sup(oracle), 1.0)
    return {"anchor": "g-sector residual = sqrt|g| G^{ab} "
                      "(independent Ricci pipeline)",
            "value": dev, "passed": dev <= 1e-8}


def _check_gravity_gamma_order(scn: Scenario):
    tol = scn.tolerances
    values = []
    for n in (scn.n, 2 * scn.n):
        gr = gravity_residuals(frw_gravity_state(scn.chart(n)))
        values.append(_sup(gr["gamma_res"]))
    order, ok = _order_record(values, tol)
    return {"anchor": "Levi-Civita input: Gamma-sector residual -> 0 at "
                      "order 2",
            "value": values[-1], "values": values, "order": order,
            "passed": ok}


def _check_gravity_metricity_order(scn: Scenario):
    tol = scn.tolerances
    values = []
    for n in (scn.n, 2 * scn.n):
        gr = gravity_residuals(frw_gravity_state(scn.chart(n)))
        values.append(_sup(gr["metricity"]))
    order, ok = _order_record(values, tol)
    return {"anchor": "nabla_c(g^{bd} sqrt|g|) -> 0 at order 2 for "
                      "Levi-Civita input",
            "value": values[-1], "values": values, "order": order,
            "passed": ok}


SUITES = {
    "identities": (
        ("replacement-principle", _check_replacement),
        ("replacement-torsion-free", _check_replacement_torsion_free),
        ("curvature-vs-bracket", _check_curvature_bracket),
        ("curvature-affine-exact", _check_curvature_affine),
        ("levi-civita-metricity", _check_lc_metricity),
    ),
    "momenta": (
        ("momenta-boson", _check_momenta("boson")),
        ("momenta-dirac", _check_momenta("dirac")),
        ("momenta-gauge", _check_momenta("gauge")),
        ("momenta-gravity", _check_momenta("gravity")),
    ),
    "field-equations": (
        ("covariant-vs-simplified", _check_cov_vs_simplified),
        ("klein-gordon-wave", _check_plane_wave("boson")),
        ("dirac-wave", _check_plane_wave("dirac")),
        ("abelian-vacuum", _check_abelian_vacuum),
        ("action-oracle-boson", _check_action_oracle("boson")),
        ("action-oracle-gauge", _check_action_oracle("gauge")),
    ),
    "energy": (
        ("energy-closed-forms", _check_energy_closed_forms),
        ("stress-relation", _check_stress_relation),
        ("divergence-onshell", _check_divT_onshell),
        ("divergence-offshell-anti", _check_divT_offshell),
        ("gauge-invariance", _check_gauge_invariance),
        ("noether-energy-contraction", _check_noether_w0),
        ("noether-charge-current", _check_noether_gauge_current),
    ),
    "gravity": (
        ("gravity-minkowski", _check_gravity_minkowski),
        ("gravity-einstein-oracle", _check_gravity_einstein_oracle),
        ("gravity-gamma-order", _check_gravity_gamma_order),
        ("gravity-metricity-order", _check_gravity_metricity_order),
    ),
}


# ---------------------------------------------------------------------------
# suite runner

def _n_threads() -> int:
    env = os.environ.get("COVFORM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("COVFORM_THREADS must be an integer")
    return os.cpu_count() or 1


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def run_suite(scn: Scenario, suite: str | None = None,
              seed: int | None = None) -> dict:
    """Run the configured (or overridden) suites and return the report."""
    if seed is not None:
        scn.seed = int(seed)
    names = [suite] if suite else list(scn.suites)
    if "all" in names:
        names = list(SUITE_NAMES)
    for name in names:
        if name not in SUITES:
            raise ValidationError(f"unknown suite {name!r}")
    jobs = []
    for sname in names:
        for cname, fn in SUITES[sname]:
            jobs.append((sname, cname, fn))

    def run_one(job):
        sname, cname, fn = job
        try:
            rec = fn(scn)
            rec["status"] = "pass" if rec["passed"] else "fail"
        except Exception as e:                       # record, never swallow
            rec = {"anchor": "", "value": None, "passed": False,
                   "status": "error", "error": f"{type(e).__name__}: {e}"}
        rec["name"] = cname
        rec["suite"] = sname
        # no timing data in the report: check records must be byte-identical
        # across runs and thread counts for a fixed seed
        return rec

    with ThreadPoolExecutor(max_workers=_n_threads()) as ex:
        records = list(ex.map(run_one, jobs))
    records.sort(key=lambda r: (r["suite"], r["name"]))
    report = {
        "schema": SCHEMA,
        "scenario": scn.resolved(),
        "suites": names,
        "checks": [_jsonable(r) for r in records],
        "n_checks": len(records),
        "n_failed": sum(1 for r in records if not r["passed"]),
        "passed": all(r["passed"] for r in records),
    }
    return report


def write_json_atomic(obj: dict, path: str):
    """Serialize to JSON and atomically replace the target file."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(obj, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# convergence studies

def _study_value(scn: Scenario, n: int) -> float:
    study = scn.study
    ch = scn.chart(n)
    if study == "replacement":
        xi = random_complementary_field(ch, seed=scn.seed + 20, r=2)
        kap = random_so3_connection(ch, seed=scn.seed + 120)
        gam = random_spacetime_connection(ch, seed=scn.seed + 220)
        return replacement_residual(xi, gam, kappa=kap).sup_norm()
    if study == "curvature":
        kap = random_so3_connection(ch, seed=scn.seed + 5)
        rho = curvature(kap)
        lie = d_kappa_lie(connection_as_form(kap), kap)
        return _sup(rho.data + lie.data)
    if study == "matter-residual":
        st = build_state(scn, n)
        return _sup(field_eq_residual(scn.sector, st)["matterbar_cov"])
    if study == "dirac-residual":
        modes = tuple(scn.field.get("modes", (1, 0, 0, 0)))
        st = dirac_wave(ch, modes=modes)
        from .dynamics import dirac_residual
        return _sup(dirac_residual(st)[0])
    if study == "gravity-gamma":
        st = frw_gravity_state(ch, eps=float(scn.metric.get("eps", 0.1)))
        return _sup(gravity_residuals(st)["gamma_res"])
    if study == "stress-divergence":
        # real standing wave: spatially varying T, genuine O(h^2) divergence
        from .connections import LinearConnection
        modes = tuple(scn.field.get("modes", (1, 0, 0, 0)))
        k = wave_covector(ch, modes)
        arg = np.zeros(ch.shape)
        for a in range(ch.m):
            arg = arg + k[a] * ch.coords(a)
        mass = math.sqrt(float(k[0] ** 2 - np.sum(k[1:] ** 2)))
        sig = matter_signature("boson", 1, 1)
        phi = GridField(ch, sig, np.cos(arg)[..., None, None, None])
        phibar = GridField(ch, sig.dual(), phi.data.copy())
        st = prolong("boson", phi=phi, phibar=phibar,
                     kappa=LinearConnection.zero(ch, 1),
                     background=flat_background(ch), mass=mass)
        t = total_stress_energy(st)
        return _sup(divergence_of_T(t, st.metric, Gamma=st.background.Gamma))
    raise ValidationError(f"scenario has no study (got {study!r})")


def convergence_study(scn: Scenario, levels: int) -> list:
    """Rows (n, h, residual sup-norm, observed order) over grid refinements.

    The scenario's n is the finest grid; levels halvings run from
    n / 2^{levels-1} up to n.  Exactly-zero residuals report 'exact'.
    """
    if levels < 2:
        raise ValidationError("levels must be >= 2")
    if scn.study is None:
        raise ValidationError("scenario has no 'study' key")
    fac = 2 ** (levels - 1)
    if scn.n % fac:
        raise ValidationError(f"n = {scn.n} not divisible by 2^(levels-1) = {fac}")
    if scn.n // fac < 4:
        raise ValidationError("coarsest grid would have fewer than 4 points")
    ns = [scn.n // 2 ** (levels - 1 - i) for i in range(levels)]
    exact = scn.tolerances["exact"]
    rows = []
    prev = None
    for n in ns:
        v = _study_value(scn, n)
        if v <= exact:
            order = "exact"
        elif prev is None:
            order = ""
        elif prev <= exact:
            order = "exact"
        else:
            order = f"{math.log2(prev / v):.4f}"
        rows.append({"n": n, "h": scn.box / n, "sup_norm": v,
                     "observed_order": order})
        prev = v
    return rows


def write_csv_atomic(rows: list, path: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["n", "h", "sup_norm",
                                              "observed_order"])
            w.writeheader()
            for row in rows:
                w.writerow(row)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
