"""Fiber signatures, multi-index bookkeeping, and pointwise tensor algebra.

Antisymmetric index blocks are stored packed: one slot per sorted
multi-index, with sign tables handling unsorted lookups.  A field of form
degree d is stored either in the "standard" representation (d covariant
indices) or the "complementary" one (m-d contravariant indices obtained by
epsilon-dualization); `degree` on a signature always counts STORED indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import comb, factorial

import numpy as np


# ---------------------------------------------------------------------------
# fiber factors

@dataclass(frozen=True)
class InternalVector:
    n: int

    @property
    def shape(self):
        return (self.n,)

    def dual(self):
        return InternalCovector(self.n)


@dataclass(frozen=True)
class InternalCovector:
    n: int

    @property
    def shape(self):
        return (self.n,)

    def dual(self):
        return InternalVector(self.n)


@dataclass(frozen=True)
class Endomorphism:
    n: int
    dual_rep: bool = False   # True: value pairs with endomorphisms (dual action)

    @property
    def shape(self):
        return (self.n, self.n)

    def dual(self):
        return Endomorphism(self.n, not self.dual_rep)


@dataclass(frozen=True)
class TangentIndex:
    m: int = 4

    @property
    def shape(self):
        return (self.m,)

    def dual(self):
        return CotangentIndex(self.m)


@dataclass(frozen=True)
class CotangentIndex:
    m: int = 4

    @property
    def shape(self):
        return (self.m,)

    def dual(self):
        return TangentIndex(self.m)


@dataclass(frozen=True)
class Spinor:
    n: int = 4

    @property
    def shape(self):
        return (self.n,)

    def dual(self):
        return CoSpinor(self.n)


@dataclass(frozen=True)
class CoSpinor:
    n: int = 4

    @property
    def shape(self):
        return (self.n,)

    def dual(self):
        return Spinor(self.n)


@dataclass(frozen=True)
class Multiplicity:
    """An inert factor no connection acts on (an auxiliary index block)."""

    d: int

    @property
    def shape(self):
        return (self.d,)

    def dual(self):
        return Multiplicity(self.d)


@dataclass(frozen=True)
class FiberSignature:
    """Ordered fiber factors + stored antisymmetric index count + representation."""

    factors: tuple = ()
    degree: int = 0
    rep: str = "standard"      # "standard" | "complementary"

    def __post_init__(self):
        if self.rep not in ("standard", "complementary"):
            raise ValueError("rep must be 'standard' or 'complementary'")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")

    @property
    def fiber_shape(self) -> tuple:
        shape = ()
        for f in self.factors:
            shape = shape + f.shape
        return shape

    def form_degree(self, m: int) -> int:
        return self.degree if self.rep == "standard" else m - self.degree

    def has_spinor(self) -> bool:
        return any(isinstance(f, (Spinor, CoSpinor)) for f in self.factors)

    def dual(self) -> "FiberSignature":
        return FiberSignature(tuple(f.dual() for f in self.factors),
                              self.degree, self.rep)

    def with_degree(self, degree: int, rep: str | None = None) -> "FiberSignature":
        return FiberSignature(self.factors, degree, rep or self.rep)


SCALAR = FiberSignature()


# ---------------------------------------------------------------------------
# multi-index tables

def perm_sign(seq) -> int:
    """Sign of the permutation sorting seq; 0 if any entry repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def epsilon_symbol(indices) -> int:
    """Pure permutation symbol on m indices (values in {-1, 0, +1})."""
    return perm_sign(indices)


@lru_cache(maxsize=None)
def index_combos(m: int, r: int) -> tuple:
    if not 0 <= r <= m:
        raise ValueError(f"index count {r} out of range for m={m}")
    return tuple(combinations(range(m), r))


@lru_cache(maxsize=None)
def slot_table(m: int, r: int) -> dict:
    return {c: i for i, c in enumerate(index_combos(m, r))}


def n_slots(m: int, r: int) -> int:
    return comb(m, r)


def slot_lookup(m: int, idx: tuple) -> tuple:
    """(slot, sign) of an arbitrary index tuple; sign 0 on repeats."""
    s = perm_sign(idx)
    if s == 0:
        return 0, 0
    return slot_table(m, len(idx))[tuple(sorted(idx))], s


@lru_cache(maxsize=None)
def complement_table(m: int, r: int) -> tuple:
    """For each sorted r-tuple A: (complement slot, epsilon sign of (A, comp))."""
    out = []
    for a in index_combos(m, r):
        b = tuple(i for i in range(m) if i not in a)
        out.append((slot_table(m, m - r)[b], perm_sign(a + b)))
    return tuple(out)


def unpack(m: int, r: int, packed: np.ndarray, axis: int) -> np.ndarray:
    """Expand a packed slot axis into r antisymmetric axes of size m."""
    packed = np.moveaxis(packed, axis, 0)
    full = np.zeros((m,) * r + packed.shape[1:], dtype=packed.dtype)
    for slot, combo in enumerate(index_combos(m, r)):
        for p in permutations(combo):
            full[p] = perm_sign(p) * packed[slot]
    return np.moveaxis(full, tuple(range(r)), tuple(range(axis, axis + r)))


def pack(m: int, r: int, full: np.ndarray, axis: int) -> np.ndarray:
    """Read the sorted-multi-index slots out of r antisymmetric axes."""
    full = np.moveaxis(full, tuple(range(axis, axis + r)), tuple(range(r)))
    slots = [full[c] for c in index_combos(m, r)]
    out = np.stack(slots, axis=0) if slots else np.zeros((0,) + full.shape[r:])
    return np.moveaxis(out, 0, axis)


def alt_project(full: np.ndarray, axes: tuple) -> np.ndarray:
    """Antisymmetrization projector over the given axes."""
    k = len(axes)
    if k <= 1:
        return full
    out = np.zeros_like(full)
    base = list(range(full.ndim))
    for p in permutations(range(k)):
        perm = base.copy()
        for i, j in enumerate(p):
            perm[axes[i]] = axes[j]
        out += perm_sign(p) * np.transpose(full, perm)
    return out / factorial(k)


# ---------------------------------------------------------------------------
# pointwise linear algebra helpers

def matvec(mat: np.ndarray, data: np.ndarray, axis: int, grid_ndim: int) -> np.ndarray:
    """Pointwise matrix action on one fiber axis of a grid array.

    mat: grid + (p, q); data: grid + rest with data.shape[axis] == q.
    Returns grid + rest with that axis replaced by p.
    """
    moved = np.moveaxis(data, axis, -1)
    lead = moved.shape[:grid_ndim]
    mid = moved.shape[grid_ndim:-1]
    flat = moved.reshape(lead + (-1, moved.shape[-1]))
    out = np.einsum("...pq,...rq->...rp", mat, flat)
    out = out.reshape(lead + mid + (mat.shape[-2],))
    return np.moveaxis(out, -1, axis)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise [A, B] = AB - BA on the trailing two axes."""
    if a.shape[-1] != a.shape[-2] or a.shape[-2:] != b.shape[-2:]:
        raise ValueError("endomorphism dimension mismatch")
    return a @ b - b @ a


# ---------------------------------------------------------------------------
# metric

@dataclass
class Metric:
    """Grid-sampled metric with cached inverse and volume density.

    Signature convention (+,-,-,...,-); orientation epsilon_{01..m-1} = +1.
    """

    chart: "object"
    g: np.ndarray               # chart.shape + (m, m)

    def __post_init__(self):
        m = self.chart.m
        if tuple(self.g.shape) != self.chart.shape + (m, m):
            raise ValueError("metric array shape mismatch")
        if np.max(np.abs(self.g - np.swapaxes(self.g, -1, -2))) > 1e-12:
            raise ValueError("metric must be symmetric")
        self.inv = np.linalg.inv(self.g)
        det = np.linalg.det(self.g)
        absdet = np.abs(det)
        if np.any(absdet <= 0):
            raise ValueError("singular metric")
        self.sqrt_abs_det = np.sqrt(absdet)
        ident = np.eye(m)
        if np.max(np.abs(self.g @ self.inv - ident)) > 1e-10:
            raise ValueError("metric inverse inaccurate")

    @classmethod
    def minkowski(cls, chart) -> "Metric":
        m = chart.m
        diag = np.diag([1.0] + [-1.0] * (m - 1))
        return cls(chart, np.broadcast_to(diag, chart.shape + (m, m)).copy())

    @classmethod
    def diagonal(cls, chart, diag_fields) -> "Metric":
        """diag_fields: list of m grid arrays (or scalars) for the diagonal."""
        m = chart.m
        g = np.zeros(chart.shape + (m, m))
        for a, f in enumerate(diag_fields):
            g[..., a, a] = f
        return cls(chart, g)

    @classmethod
    def frw(cls, chart, eps: float = 0.05) -> "Metric":
        """g = diag(1, -a(t)^2, ...), a = 1 + eps sin(2 pi t / L), t = x^0."""
        t = chart.coords(0)
        a = 1.0 + eps * np.sin(2.0 * np.pi * t / chart.box)
        a2 = np.broadcast_to(a * a, chart.shape)
        return cls.diagonal(chart, [np.ones(chart.shape)] + [-a2] * (chart.m - 1))

    def raise_axis(self, data: np.ndarray, axis: int, grid_ndim: int) -> np.ndarray:
        return matvec(self.inv, data, axis, grid_ndim)

    def lower_axis(self, data: np.ndarray, axis: int, grid_ndim: int) -> np.ndarray:
        return matvec(self.g, data, axis, grid_ndim)


# ---------------------------------------------------------------------------
# GridField-level operations (import placed late to avoid a cycle)

def _grid():
    from . import grid
    return grid


def complementary_convert(xi, direction: str):
    """Switch between standard and complementary component sets.

    to_complementary: xi^{a1..ar i} = epsilon^{(A, B)} xi_{B i} with B the
    sorted complement of A; to_standard is the (sign-symmetric) inverse.
    Round trip is the identity exactly.
    """
    grid = _grid()
    m = xi.chart.m
    sig = xi.signature
    if direction == "to_complementary":
        if sig.rep != "standard":
            raise ValueError("field is not in standard representation")
    elif direction == "to_standard":
        if sig.rep != "complementary":
            raise ValueError("field is not in complementary representation")
    else:
        raise ValueError("unknown direction")
    r_in = sig.degree
    r_out = m - r_in
    table = complement_table(m, r_out)  # indexed by OUTPUT slot
    slot_axis = m
    src = np.moveaxis(xi.data, slot_axis, 0)
    parts = [sign * src[bslot] for bslot, sign in table]
    data = np.moveaxis(np.stack(parts, axis=0), 0, slot_axis)
    new_rep = "complementary" if direction == "to_complementary" else "standard"
    return grid.GridField(xi.chart, sig.with_degree(r_out, new_rep), data)


@lru_cache(maxsize=None)
def _shuffle_table(m: int, p: int, q: int) -> tuple:
    """(out_slot, a_slot, b_slot, sign) entries of the packed wedge product."""
    entries = []
    st_p, st_q, st_out = slot_table(m, p), slot_table(m, q), slot_table(m, p + q)
    for c in index_combos(m, p + q):
        for a_part in combinations(c, p):
            b_part = tuple(i for i in c if i not in a_part)
            entries.append((st_out[c], st_p[a_part], st_q[b_part],
                            perm_sign(a_part + b_part)))
    return tuple(entries)


def wedge(alpha, beta):
    """Exterior product.

    standard x standard: shuffle-sum wedge, fiber factors tensored.
    standard 1-form x complementary: the dual-side product
    r xi^{a1..ar i} tau_{a_r} (output complementary, one fewer stored index).
    """
    grid = _grid()
    m = alpha.chart.m
    if alpha.chart != beta.chart:
        raise ValueError("chart mismatch")
    sa, sb = alpha.signature, beta.signature
    gd = m  # number of grid axes

    if sa.rep == "standard" and sb.rep == "standard":
        p, q = sa.degree, sb.degree
        if p + q > m:
            raise ValueError("wedge degree overflow")
        out_sig = FiberSignature(sa.factors + sb.factors, p + q, "standard")
        dtype = np.result_type(alpha.data, beta.data)
        a_mv = np.moveaxis(alpha.data, gd, 0)
        b_mv = np.moveaxis(beta.data, gd, 0)
        na = int(np.prod(sa.fiber_shape)) if sa.fiber_shape else 1
        nb = int(np.prod(sb.fiber_shape)) if sb.fiber_shape else 1
        acc = np.zeros((n_slots(m, p + q),) + alpha.chart.shape + (na, nb),
                       dtype=dtype)
        for oslot, aslot, bslot, sign in _shuffle_table(m, p, q):
            av = a_mv[aslot].reshape(alpha.chart.shape + (na,))
            bv = b_mv[bslot].reshape(beta.chart.shape + (nb,))
            acc[oslot] += sign * np.einsum("...i,...j->...ij", av, bv)
        acc = acc.reshape((n_slots(m, p + q),) + alpha.chart.shape
                          + out_sig.fiber_shape)
        return grid.GridField(alpha.chart, out_sig, np.moveaxis(acc, 0, gd).copy())

    if sa.rep == "standard" and sa.degree == 1 and sb.rep == "complementary":
        if sa.fiber_shape != ():
            raise ValueError("dual-side wedge expects a scalar-fiber 1-form")
        r = sb.degree
        if r < 1:
            raise ValueError("complementary field has no index to contract")
        out_sig = sb.with_degree(r - 1)
        dtype = np.result_type(alpha.data, beta.data)
        out = np.zeros(alpha.chart.shape + (n_slots(m, r - 1),) + sb.fiber_shape,
                       dtype=dtype)
        a_mv = np.moveaxis(alpha.data, gd, 0)     # (m,) + grid
        b_mv = np.moveaxis(beta.data, gd, 0)
        out_mv = np.moveaxis(out, gd, 0)
        for oslot, combo in enumerate(index_combos(m, r - 1)):
            for a in range(m):
                if a in combo:
                    continue
                slot, sign = slot_lookup(m, combo + (a,))
                out_mv[oslot] += r * sign * b_mv[slot] * _expand(a_mv[a], sb.fiber_shape)
        return grid.GridField(alpha.chart, out_sig, out)

    raise ValueError("unsupported wedge operand representations")


def _expand(arr: np.ndarray, fiber_shape: tuple) -> np.ndarray:
    return arr.reshape(arr.shape + (1,) * len(fiber_shape))


def interior_product(v: np.ndarray, xi):
    """Contraction of a vector field with the first form slot.

    v: grid + (m,) array. Complementary-representation input is converted,
    contracted, and converted back.
    """
    grid = _grid()
    m = xi.chart.m
    sig = xi.signature
    if sig.form_degree(m) < 1:
        raise ValueError("interior product needs form degree >= 1")
    if sig.rep == "complementary":
        std = complementary_convert(xi, "to_standard")
        return complementary_convert(interior_product(v, std), "to_complementary")
    r = sig.degree
    out_sig = sig.with_degree(r - 1)
    dtype = np.result_type(v, xi.data)
    out = np.zeros(xi.chart.shape + (n_slots(m, r - 1),) + sig.fiber_shape, dtype=dtype)
    x_mv = np.moveaxis(xi.data, m, 0)
    out_mv = np.moveaxis(out, m, 0)
    for oslot, combo in enumerate(index_combos(m, r - 1)):
        for a in range(m):
            if a in combo:
                continue
            slot, sign = slot_lookup(m, (a,) + combo)
            out_mv[oslot] += sign * x_mv[slot] * _expand(v[..., a], sig.fiber_shape)
    return grid.GridField(xi.chart, out_sig, out)


def t_bar_wedge(torsion: np.ndarray, xi):
    """Exterior-then-interior torsion product on complementary components:

    (T barwedge xi)^{a1..a_{r-1}} =
        Alt[ r (r-1) T^{a_{r-1}}_{bc} xi^{a1..a_{r-2} b c i} ].

    torsion: grid + (m, m, m) with T[a, b, c] = T^a_{bc}.
    """
    grid = _grid()
    m = xi.chart.m
    sig = xi.signature
    if sig.rep != "complementary":
        raise ValueError("t_bar_wedge expects complementary representation")
    r = sig.degree
    if r < 2:
        raise ValueError("t_bar_wedge needs r >= 2")
    full = unpack(m, r, xi.data, m)          # grid + (m,)*r + fiber
    gd = m
    nfib = int(np.prod(sig.fiber_shape)) if sig.fiber_shape else 1
    flat = full.reshape(full.shape[:gd + r] + (nfib,))
    # out[..., A', e, f] = T[..., e, b, c] * xi[..., A', b, c, f]
    tor = torsion.reshape(xi.chart.shape + (1,) * (r - 2) + (m, m, m))
    contracted = np.einsum("...ebc,...bcf->...ef", tor, flat)
    out_full = r * (r - 1) * contracted.reshape(contracted.shape[:-1]
                                                + sig.fiber_shape)
    out_full = alt_project(out_full, tuple(range(gd, gd + r - 1)))
    packed = pack(m, r - 1, out_full, gd)
    return grid.GridField(xi.chart, sig.with_degree(r - 1), packed)


def hodge_star(zeta, metric: Metric):
    """Hodge star, defined directly in complementary components:

    xi^{a1..ar i} = sqrt|g| g^{a1 b1} ... g^{ar br} zeta_{b1..br i}.
    Input standard degree r, output complementary with r stored indices
    (form degree m - r).
    """
    grid = _grid()
    m = zeta.chart.m
    sig = zeta.signature
    if sig.rep != "standard":
        raise ValueError("hodge_star expects a standard-representation input")
    r = sig.degree
    full = unpack(m, r, zeta.data, m)
    for k in range(r):
        full = metric.raise_axis(full, m + k, m)
    full = full * _expand(metric.sqrt_abs_det.reshape(metric.sqrt_abs_det.shape
                                                      + (1,) * r),
                          sig.fiber_shape)
    packed = pack(m, r, full, m)
    return grid.GridField(zeta.chart, sig.with_degree(r, "complementary"), packed)
