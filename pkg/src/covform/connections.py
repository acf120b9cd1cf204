"""Linear, spacetime, and spinor connections; torsion, duals, curvature.

Coefficient storage puts the derivative index FIRST everywhere:

  kappa[..., a, i, j]   : nabla_a phi^i = d_a phi^i - kappa[a, i, j] phi^j
  gamma[..., e, a, c]   : nabla_e v^a   = d_e v^a   + gamma[e, a, c] v^c
  spinor coeff[..., a]  : nabla_a psi   = d_a psi   - coeff[a] psi

Torsion components follow T^a_{bc} = gamma[b, a, c] - gamma[c, a, b] and
the torsion 1-form is tau_a = T^b_{ab}.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fiber import (FiberSignature, Endomorphism, InternalVector, InternalCovector,
                    Multiplicity, TangentIndex, CotangentIndex, Spinor, CoSpinor,
                    commutator, index_combos, n_slots, slot_table)
from .grid import Chart, GridField, diff_axis


@dataclass
class LinearConnection:
    """Matrix-valued covector field kappa on an internal rank-n bundle."""

    chart: Chart
    kappa: np.ndarray                      # chart.shape + (m, n, n)
    basis: tuple | None = None             # optional Lie-subalgebra basis (K, n, n)

    def __post_init__(self):
        m = self.chart.m
        shp = self.kappa.shape
        if shp[:m] != self.chart.shape or len(shp) != m + 3 or shp[-1] != shp[-2] \
                or shp[m] != m:
            raise ValueError("connection coefficient shape mismatch")
        if self.basis is not None:
            self.basis = tuple(np.asarray(b) for b in self.basis)
            self._check_span()

    @property
    def n(self) -> int:
        return self.kappa.shape[-1]

    def _check_span(self, tol: float = 1e-10):
        n = self.n
        bas = np.stack([b.reshape(-1) for b in self.basis])       # (K, n*n)
        flat = self.kappa.reshape(-1, n * n)
        coef, *_ = np.linalg.lstsq(bas.T, flat.T, rcond=None)
        resid = flat - coef.T @ bas
        scale = max(np.max(np.abs(flat)), 1.0)
        if np.max(np.abs(resid)) > tol * scale:
            raise ValueError("connection coefficients leave the subalgebra span")

    def project_to_basis(self, values: np.ndarray, tol: float = 1e-10) -> float:
        """Max projection residual of endomorphism values onto the basis."""
        if self.basis is None:
            raise ValueError("no subalgebra basis declared")
        n = self.n
        bas = np.stack([b.reshape(-1) for b in self.basis])
        flat = values.reshape(-1, n * n)
        coef, *_ = np.linalg.lstsq(bas.T, flat.T, rcond=None)
        resid = flat - coef.T @ bas
        return float(np.max(np.abs(resid)))

    @classmethod
    def zero(cls, chart: Chart, n: int, dtype=float) -> "LinearConnection":
        return cls(chart, np.zeros(chart.shape + (chart.m, n, n), dtype=dtype))


def dual_connection(conn: LinearConnection) -> LinearConnection:
    """Dual connection on E*: kappa*_a = -kappa_a^T (acting on covectors)."""
    return LinearConnection(conn.chart, -np.swapaxes(conn.kappa, -1, -2),
                            basis=None)


@dataclass
class SpacetimeConnection:
    """Linear connection on the tangent bundle with derived torsion data."""

    chart: Chart
    gamma: np.ndarray                       # chart.shape + (m, m, m)

    def __post_init__(self):
        m = self.chart.m
        if self.gamma.shape != self.chart.shape + (m, m, m):
            raise ValueError("spacetime connection shape mismatch")
        # T^a_{bc} = gamma[b, a, c] - gamma[c, a, b]
        self.torsion = (np.einsum("...bac->...abc", self.gamma)
                        - np.einsum("...cab->...abc", self.gamma))
        # tau_a = T^b_{ab}
        self.tau = np.einsum("...bab->...a", self.torsion)

    @classmethod
    def zero(cls, chart: Chart) -> "SpacetimeConnection":
        m = chart.m
        return cls(chart, np.zeros(chart.shape + (m, m, m)))

    @property
    def trace(self) -> np.ndarray:
        """gamma[e, d, d]: the density-weight trace appearing in divergences."""
        return np.einsum("...edd->...e", self.gamma)


def levi_civita(metric, order: int = 2) -> SpacetimeConnection:
    """Christoffel coefficients by finite differences of the metric."""
    chart = metric.chart
    m = chart.m
    dg = np.stack([diff_axis(metric.g, e, chart.h, order) for e in range(m)],
                  axis=len(chart.shape))                     # grid + (e, a, b)
    # X[e, d, c] = d_e g_{dc} + d_c g_{ed} - d_d g_{ec}
    x = dg + np.einsum("...ced->...edc", dg) - np.einsum("...dec->...edc", dg)
    gamma = 0.5 * np.einsum("...ad,...edc->...eac", metric.inv, x)
    return SpacetimeConnection(chart, gamma)


# ---------------------------------------------------------------------------
# gamma matrices and spinor connection

def gamma_matrices(m: int = 4) -> np.ndarray:
    """Constant Dirac-representation gamma matrices, gamma[a] with upper a.

    {gamma^a, gamma^b} = 2 eta^{ab}, eta = diag(+,-,-,-).
    """
    if m != 4:
        raise ValueError("gamma matrices provided for m = 4 only")
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    zero2 = np.zeros((2, 2), dtype=complex)
    g0 = np.block([[eye2, zero2], [zero2, -eye2]])
    gs = [np.block([[zero2, s], [-s, zero2]]) for s in (s1, s2, s3)]
    return np.stack([g0] + gs)


@dataclass
class SpinorConnection:
    """Spinor connection coefficients plus the fixed gamma matrices."""

    chart: Chart
    coeff: np.ndarray | None = None          # chart.shape + (m, 4, 4), complex

    def __post_init__(self):
        m = self.chart.m
        if self.coeff is None:
            self.coeff = np.zeros(self.chart.shape + (m, 4, 4), dtype=complex)
        if self.coeff.shape != self.chart.shape + (m, 4, 4):
            raise ValueError("spinor connection shape mismatch")
        self.gammas = gamma_matrices(m)

    def check_anticommutation(self, metric, tol: float = 1e-12) -> float:
        g = self.gammas
        anti = np.einsum("aij,bjk->abik", g, g) + np.einsum("bij,ajk->abik", g, g)
        want = 2.0 * np.einsum("...ab,ik->...abik", metric.inv,
                               np.eye(4, dtype=complex))
        dev = float(np.max(np.abs(anti - want)))
        if dev > tol:
            raise ValueError(f"gamma anticommutation violated by {dev:.3e}")
        return dev


# ---------------------------------------------------------------------------
# tensor product connection

@dataclass
class Background:
    """The geometric background a matter field couples to."""

    metric: "object"
    Gamma: SpacetimeConnection
    spinor: SpinorConnection | None = None


@dataclass
class ProductConnection:
    """Kronecker-sum connection on a product fiber.

    actions is an ordered list matching the signature's factors; each entry
    is ("mat", A) with A of shape grid + (m, d, d) acting as nabla = d - A,
    ("endo", kappa, dual) for commutator actions on endomorphism factors,
    or None for a factor the connection ignores.
    """

    chart: Chart
    signature: FiberSignature
    actions: list


def tensor_product_connection(signature: FiberSignature, kappa: LinearConnection | None,
                              background: Background | None) -> ProductConnection:
    """Build the factor-wise connection actions for a mixed fiber signature."""
    chart = None
    if kappa is not None:
        chart = kappa.chart
    elif background is not None:
        chart = background.Gamma.chart
    if chart is None:
        raise ValueError("need at least one connection")
    if kappa is not None and background is not None \
            and background.Gamma.chart != kappa.chart:
        raise ValueError("chart mismatch between connections")

    actions = []
    for f in signature.factors:
        if isinstance(f, InternalVector):
            actions.append(("mat", _need(kappa, "internal factor").kappa))
        elif isinstance(f, InternalCovector):
            actions.append(("mat", -np.swapaxes(_need(kappa, "internal factor").kappa,
                                                -1, -2)))
        elif isinstance(f, Endomorphism):
            actions.append(("endo", _need(kappa, "endomorphism factor").kappa,
                            f.dual_rep))
        elif isinstance(f, TangentIndex):
            actions.append(("mat", -_need(background, "tangent factor").Gamma.gamma))
        elif isinstance(f, CotangentIndex):
            actions.append(("mat", np.swapaxes(
                _need(background, "cotangent factor").Gamma.gamma, -1, -2)))
        elif isinstance(f, Spinor):
            sp = _need(background, "spinor factor").spinor
            actions.append(("mat", _need(sp, "spinor factor").coeff))
        elif isinstance(f, CoSpinor):
            sp = _need(background, "spinor factor").spinor
            actions.append(("mat", -np.swapaxes(_need(sp, "spinor factor").coeff,
                                                -1, -2)))
        elif isinstance(f, Multiplicity):
            actions.append(None)
        else:
            raise ValueError(f"unknown fiber factor {f!r}")
    return ProductConnection(chart, signature, actions)


def _need(obj, what):
    if obj is None:
        raise ValueError(f"missing connection for {what}")
    return obj


# ---------------------------------------------------------------------------
# curvature

def dkk(conn: LinearConnection, order: int = 2) -> GridField:
    """The prolongation slot d_kappa kappa, components

    (d_k k)_{ab} = d_a kappa_b - d_b kappa_a - [kappa_a, kappa_b].
    """
    chart = conn.chart
    m = chart.m
    k = conn.kappa
    dk = np.stack([diff_axis(k, e, chart.h, order) for e in range(m)], axis=m)
    # dk[..., e, a, i, j] = d_e kappa_a
    slots = []
    for a, b in index_combos(m, 2):
        slots.append(dk[..., a, b, :, :] - dk[..., b, a, :, :]
                     - commutator(k[..., a, :, :], k[..., b, :, :]))
    data = np.stack(slots, axis=m)
    sig = FiberSignature((Endomorphism(conn.n),), 2, "standard")
    return GridField(chart, sig, data)


def curvature(conn: LinearConnection, order: int = 2) -> GridField:
    """Curvature rho = -d_kappa kappa as a packed endomorphism-valued 2-form."""
    out = dkk(conn, order)
    out.data = -out.data
    if conn.basis is not None:
        resid = conn.project_to_basis(out.data)
        scale = max(float(np.max(np.abs(out.data))), 1.0)
        if resid > 1e-10 * scale:
            raise ValueError("curvature leaves the declared subalgebra span")
    return out


def riemann_from_gamma(Gamma: SpacetimeConnection, order: int = 2) -> GridField:
    """Curvature of the tangent-bundle connection, R = -d_Gamma Gamma.

    Packed components R[slot(ab), c, d] equal the familiar
    R^c_{d ab} = d_a gamma[b,c,d] - d_b gamma[a,c,d] + [gamma_a, gamma_b]^c_d.
    """
    equiv = LinearConnection(Gamma.chart, -Gamma.gamma)
    return curvature(equiv, order)
