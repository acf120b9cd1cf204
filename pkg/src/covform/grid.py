"""Periodic uniform grids, finite differences, and deterministic test fields.

A Chart is an m-dimensional periodic box sampled on N points per axis.
All fields live on a chart as numpy arrays whose leading m axes are the
grid axes; a packed antisymmetric slot axis and the fiber axes follow
(see fiber.py for the storage model).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import comb

import numpy as np

from .fiber import FiberSignature, n_slots


@dataclass(frozen=True)
class Chart:
    """Periodic uniform grid on an m-dimensional box of side `box`."""

    m: int = 4
    n: int = 8                      # points per axis
    box: float = 1.0
    signature_tag: str = "+---"     # metric signature convention label

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("chart dimension must be >= 1")
        if self.n < 4:
            raise ValueError("need at least 4 points per axis")

    @property
    def h(self) -> float:
        return self.box / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.m

    @property
    def cell_volume(self) -> float:
        return self.h ** self.m

    def coords(self, axis: int) -> np.ndarray:
        """Coordinate values along one axis, broadcastable over the grid."""
        if not 0 <= axis < self.m:
            raise ValueError("axis out of range")
        x = np.arange(self.n) * self.h
        shape = [1] * self.m
        shape[axis] = self.n
        return x.reshape(shape)

    def refined(self, factor: int = 2) -> "Chart":
        return Chart(self.m, self.n * factor, self.box, self.signature_tag)

    def coarsened(self, factor: int = 2) -> "Chart":
        if self.n % factor:
            raise ValueError("points per axis not divisible by factor")
        return Chart(self.m, self.n // factor, self.box, self.signature_tag)


@dataclass
class GridField:
    """Grid-sampled antisymmetric-index field with a declared fiber signature.

    data shape: chart.shape + (n_slots,) + signature.fiber_shape, where the
    slot axis runs over sorted multi-indices of length signature.degree
    (degree = number of stored indices; the form degree is `degree` for the
    standard representation and m - degree for the complementary one).
    """

    chart: Chart
    signature: FiberSignature
    data: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        want = self.chart.shape + (n_slots(self.chart.m, self.signature.degree),) \
            + self.signature.fiber_shape
        if tuple(self.data.shape) != want:
            raise ValueError(f"data shape {self.data.shape} != expected {want}")
        if self.signature.has_spinor() and not np.iscomplexobj(self.data):
            raise ValueError("spinor-bearing fields must be complex")

    def copy(self) -> "GridField":
        return GridField(self.chart, self.signature, self.data.copy(), dict(self.meta))

    def zeros_like(self, signature: FiberSignature | None = None) -> "GridField":
        sig = signature or self.signature
        shape = self.chart.shape + (n_slots(self.chart.m, sig.degree),) + sig.fiber_shape
        return GridField(self.chart, sig, np.zeros(shape, dtype=self.data.dtype))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def __add__(self, other):
        self._check_compatible(other)
        return GridField(self.chart, self.signature, self.data + other.data)

    def __sub__(self, other):
        self._check_compatible(other)
        return GridField(self.chart, self.signature, self.data - other.data)

    def __mul__(self, c):
        return GridField(self.chart, self.signature, self.data * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.chart, self.signature, -self.data)

    def _check_compatible(self, other):
        if not isinstance(other, GridField):
            raise TypeError("expected a GridField")
        if other.chart != self.chart or other.signature != self.signature:
            raise ValueError("chart or signature mismatch")


# ---------------------------------------------------------------------------
# finite differences

_STENCILS = {
    2: ((1, 0.5), ),                       # (f(x+h) - f(x-h)) / (2h)
    4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0)),  # 4th-order central
}


def diff_axis(arr: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Central finite difference along one leading (grid) axis, periodic wrap."""
    if order not in _STENCILS:
        raise ValueError("order must be 2 or 4")
    out = np.zeros_like(arr)
    for shift, w in _STENCILS[order]:
        out += w * (np.roll(arr, -shift, axis=axis) - np.roll(arr, shift, axis=axis))
    return out / h


def partial_derivative(f: GridField, axis: int, order: int = 2) -> GridField:
    """Discrete partial derivative of a grid field along a chart axis."""
    if not 0 <= axis < f.chart.m:
        raise ValueError("axis out of range")
    return GridField(f.chart, f.signature, diff_axis(f.data, axis, f.chart.h, order))


def interior_mask(chart: Chart, axis: int, margin: int) -> np.ndarray:
    """Boolean grid mask excluding `margin` wrap-contaminated slabs on one axis.

    Used by the aperiodic interior-check harness: derivatives are always
    taken with periodic wrap, and comparisons against aperiodic analytic
    profiles are restricted to points whose stencils never crossed the seam.
    """
    mask = np.ones(chart.shape, dtype=bool)
    idx = [slice(None)] * chart.m
    idx[axis] = slice(0, margin)
    mask[tuple(idx)] = False
    idx[axis] = slice(chart.n - margin, chart.n)
    mask[tuple(idx)] = False
    return mask


# ---------------------------------------------------------------------------
# deterministic trigonometric test fields

@dataclass(frozen=True)
class TrigSpec:
    """Coefficient table of a random trigonometric polynomial.

    The continuum function is independent of the grid resolution, so the
    same spec sampled on refined charts yields nested approximations of one
    smooth periodic field.
    """

    m: int
    comp_shape: tuple          # (n_slots,) + fiber_shape
    zero_modes: np.ndarray     # comp_shape
    amplitudes: np.ndarray     # comp_shape + (n_modes,)
    waves: np.ndarray          # comp_shape + (n_modes, m) integer wavenumbers
    phases: np.ndarray         # comp_shape + (n_modes,)

    def sample(self, chart: Chart) -> np.ndarray:
        if chart.m != self.m:
            raise ValueError("chart dimension mismatch")
        xs = [chart.coords(a) / chart.box for a in range(self.m)]  # in [0,1)
        out = np.empty(chart.shape + self.comp_shape)
        for comp in np.ndindex(self.comp_shape):
            vals = np.full(chart.shape, self.zero_modes[comp])
            for k in range(self.amplitudes.shape[-1]):
                phase = self.phases[comp + (k,)]
                arg = phase
                for a in range(self.m):
                    arg = arg + 2.0 * np.pi * self.waves[comp + (k, a)] * xs[a]
                vals = vals + self.amplitudes[comp + (k,)] * np.cos(arg)
            out[(Ellipsis,) + comp] = vals
        return out


def draw_trig_spec(m: int, comp_shape: tuple, seed: int, max_wavenumber: int,
                   n_modes: int = 3, amplitude: float = 1.0) -> TrigSpec:
    if max_wavenumber < 1:
        raise ValueError("max_wavenumber must be >= 1")
    rng = np.random.default_rng(seed)
    zero = amplitude * rng.uniform(-1.0, 1.0, size=comp_shape)
    amps = amplitude * rng.uniform(-1.0, 1.0, size=comp_shape + (n_modes,))
    waves = rng.integers(-max_wavenumber, max_wavenumber + 1,
                         size=comp_shape + (n_modes, m))
    # avoid all-zero wavevectors (they would silently shift the zero mode)
    flat = waves.reshape(-1, m)
    for row in flat:
        while not row.any():
            row[:] = rng.integers(-max_wavenumber, max_wavenumber + 1, size=m)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=comp_shape + (n_modes,))
    return TrigSpec(m, comp_shape, zero, amps, waves, phases)


def make_trig_field(chart: Chart, signature: FiberSignature, seed: int,
                    max_wavenumber: int, amplitude: float = 1.0) -> GridField:
    """Deterministic pseudo-random trig polynomial field (exactly periodic)."""
    comp_shape = (n_slots(chart.m, signature.degree),) + signature.fiber_shape
    spec = draw_trig_spec(chart.m, comp_shape, seed, max_wavenumber,
                          amplitude=amplitude)
    data = spec.sample(chart)
    if signature.has_spinor():
        spec_im = draw_trig_spec(chart.m, comp_shape, seed + 987654321,
                                 max_wavenumber, amplitude=amplitude)
        data = data.astype(complex) + 1j * spec_im.sample(chart)
        gf = GridField(chart, signature, data)
        gf.meta["zero_mode"] = spec.zero_modes + 1j * spec_im.zero_modes
        return gf
    gf = GridField(chart, signature, data)
    gf.meta["zero_mode"] = spec.zero_modes.copy()
    return gf


def cell_sum(density: GridField) -> float | complex:
    """Discrete integral h^m * sum over grid points of a scalar density."""
    if density.signature.degree != 0 or density.signature.fiber_shape != ():
        raise ValueError("cell_sum expects a scalar (rank-0 fiber, degree-0) field")
    total = density.data.sum() * density.chart.cell_volume
    if np.iscomplexobj(density.data):
        return complex(total)
    return float(total)
