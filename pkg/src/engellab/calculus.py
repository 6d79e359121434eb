"""Charts, points, and derivative-propagating vector fields / one-forms.

A field is defined either by a component rule (a callable evaluated with
generic arithmetic, so it works on floats and on :class:`~engellab.jets.Jet`
seeds alike) or by a custom ``taylor_fn`` for fields produced by geometric
constructions (brackets, pointwise linear solves, frame recombinations).
Evaluation is pure: no shared mutable state, safe to sample in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ChartMismatchError, DerivativeOrderError, EngelLabError
from .jets import Jet

INF_ORDER = math.inf


@dataclass(frozen=True)
class Chart:
    """A single coordinate chart; multi-chart atlases live in zoll-lab only."""

    name: str
    coords: tuple
    bounds: tuple = None  # optional ((lo, hi), ...) per coordinate

    @property
    def dim(self):
        return len(self.coords)

    def contains(self, coords):
        if self.bounds is None:
            return True
        return all(lo <= c <= hi for c, (lo, hi) in zip(coords, self.bounds))

    def point(self, coords):
        return Point(self, np.asarray(coords, dtype=float))


class Point:
    """A point in a chart: identifier plus finite coordinates."""

    __slots__ = ("chart", "coords")

    def __init__(self, chart, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (chart.dim,):
            raise EngelLabError(
                f"point has {coords.shape} coordinates, chart {chart.name!r} has dimension {chart.dim}"
            )
        if not np.all(np.isfinite(coords)):
            raise EngelLabError("point coordinates must be finite")
        self.chart = chart
        self.coords = coords

    def __repr__(self):
        return f"Point({self.chart.name}, {np.array2string(self.coords, precision=6)})"


def _coords_of(point, chart):
    if isinstance(point, Point):
        if chart is not None and point.chart is not chart and point.chart.name != chart.name:
            raise ChartMismatchError(
                f"point lives on chart {point.chart.name!r}, object on {chart.name!r}"
            )
        return point.coords
    return np.asarray(point, dtype=float)


class _FieldBase:
    """Shared machinery for vector fields, one-forms, and scalar fields."""

    n_components = None  # None: same as chart dimension; 1 for scalars

    def __init__(self, chart, components=None, taylor_fn=None, max_order=INF_ORDER, name=""):
        if components is None and taylor_fn is None:
            raise EngelLabError("need a component rule or a taylor_fn")
        self.chart = chart
        self.components = components
        self.taylor_fn = taylor_fn
        self.max_order = max_order
        self.name = name

    def _ncomp(self):
        return self.chart.dim if self.n_components is None else self.n_components

    def taylor(self, point, order):
        """Jets of the components around ``point``, to total degree ``order``."""
        if order > self.max_order:
            raise DerivativeOrderError(
                f"field {self.name or type(self).__name__!r} only evaluable to order {self.max_order}, got {order}"
            )
        coords = _coords_of(point, self.chart)
        if self.taylor_fn is not None:
            jets = self.taylor_fn(coords, order)
        else:
            seeds = Jet.seeds(coords, order)
            jets = self.components(seeds)
        jets = [jets] if isinstance(jets, Jet) else list(jets)
        out = []
        for j in jets:
            if not isinstance(j, Jet):
                j = Jet.constant(float(j), self.chart.dim, order)
            out.append(j.truncated(order))
        if len(out) != self._ncomp():
            raise EngelLabError(f"rule returned {len(out)} components, expected {self._ncomp()}")
        return out

    def __call__(self, point):
        coords = _coords_of(point, self.chart)
        if self.taylor_fn is None:
            vals = self.components(list(coords))
            vals = [vals] if not hasattr(vals, "__len__") else vals
            arr = np.array([v.value if isinstance(v, Jet) else float(v) for v in vals])
        else:
            arr = np.array([j.value for j in self.taylor(coords, 0)])
        if self.n_components == 1:
            return float(arr[0])
        return arr

    def jacobian(self, point):
        """Matrix of first partials, rows = components, columns = variables."""
        jets = self.taylor(point, 1)
        return np.array([j.gradient() for j in jets])


class VectorField(_FieldBase):
    """A smooth vector field on a chart, evaluable with derivatives."""

    def __add__(self, other):
        _same_chart(self, other)
        cap = min(self.max_order, other.max_order)
        a, b = self, other

        def tfn(coords, order):
            return [x + y for x, y in zip(a.taylor(coords, order), b.taylor(coords, order))]

        return VectorField(self.chart, taylor_fn=tfn, max_order=cap,
                           name=f"({self.name}+{other.name})")

    def __mul__(self, scalar):
        a = self
        if isinstance(scalar, ScalarField):
            _same_chart(self, scalar)
            cap = min(self.max_order, scalar.max_order)

            def tfn(coords, order):
                s = scalar.taylor(coords, order)[0]
                return [s * x for x in a.taylor(coords, order)]

            return VectorField(self.chart, taylor_fn=tfn, max_order=cap)
        s = float(scalar)

        def tfn(coords, order):
            return [x * s for x in a.taylor(coords, order)]

        return VectorField(self.chart, taylor_fn=tfn, max_order=self.max_order)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)


class OneForm(_FieldBase):
    """A smooth one-form; the rule returns covector components."""

    def pair(self, X, point, order=0):
        """Jet of ``alpha(X)`` at ``point``."""
        _same_chart(self, X)
        a = self.taylor(point, order)
        v = X.taylor(point, order)
        acc = a[0] * v[0]
        for i in range(1, self.chart.dim):
            acc = acc + a[i] * v[i]
        return acc

    def d_matrix(self, point, order=0):
        """Jets of the exterior derivative, ``d alpha_{ij} = d_i a_j - d_j a_i``.

        Consumes one derivative order of the form.
        """
        a = self.taylor(point, order + 1)
        n = self.chart.dim
        return [[a[j].derivative(i) - a[i].derivative(j) for j in range(n)] for i in range(n)]

    def d_apply(self, X, Y, point, order=0):
        """Jet of ``d alpha (X, Y)`` at ``point``."""
        M = self.d_matrix(point, order)
        xv = X.taylor(point, order)
        yv = Y.taylor(point, order)
        n = self.chart.dim
        acc = None
        for i in range(n):
            for j in range(n):
                term = M[i][j] * xv[i] * yv[j]
                acc = term if acc is None else acc + term
        return acc

    def __mul__(self, scalar):
        a = self
        if isinstance(scalar, ScalarField):
            def tfn(coords, order):
                s = scalar.taylor(coords, order)[0]
                return [s * x for x in a.taylor(coords, order)]
            return OneForm(self.chart, taylor_fn=tfn,
                           max_order=min(self.max_order, scalar.max_order))
        s = float(scalar)

        def tfn(coords, order):
            return [x * s for x in a.taylor(coords, order)]

        return OneForm(self.chart, taylor_fn=tfn, max_order=self.max_order)

    __rmul__ = __mul__

    def __add__(self, other):
        _same_chart(self, other)
        a, b = self, other

        def tfn(coords, order):
            return [x + y for x, y in zip(a.taylor(coords, order), b.taylor(coords, order))]

        return OneForm(self.chart, taylor_fn=tfn,
                       max_order=min(self.max_order, other.max_order))


class ScalarField(_FieldBase):
    """A smooth scalar function on a chart."""

    n_components = 1

    def __mul__(self, other):
        a = self
        if isinstance(other, ScalarField):
            _same_chart(self, other)

            def tfn(coords, order):
                return [a.jet(coords, order) * other.jet(coords, order)]

            return ScalarField(self.chart, taylor_fn=tfn,
                               max_order=min(self.max_order, other.max_order))
        if isinstance(other, (VectorField, OneForm)):
            return other * self
        s = float(other)

        def tfn(coords, order):
            return [a.jet(coords, order) * s]

        return ScalarField(self.chart, taylor_fn=tfn, max_order=self.max_order)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        a = self
        if isinstance(other, (int, float)):
            s = float(other)

            def tfn(coords, order):
                return [a.jet(coords, order) + s]

            return ScalarField(self.chart, taylor_fn=tfn, max_order=self.max_order)
        _same_chart(self, other)

        def tfn(coords, order):
            return [a.jet(coords, order) + other.jet(coords, order)]

        return ScalarField(self.chart, taylor_fn=tfn,
                           max_order=min(self.max_order, other.max_order))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarField) else -float(other))

    def reciprocal(self):
        a = self

        def tfn(coords, order):
            return [a.jet(coords, order).reciprocal()]

        return ScalarField(self.chart, taylor_fn=tfn, max_order=self.max_order)

    def jet(self, point, order):
        return self.taylor(point, order)[0]

    def differential(self, point, order=0):
        """Gradient jets (components of df)."""
        j = self.jet(point, order + 1)
        return [j.derivative(i) for i in range(self.chart.dim)]


def _same_chart(a, b):
    if a.chart.name != b.chart.name or a.chart.dim != b.chart.dim:
        raise ChartMismatchError(f"charts {a.chart.name!r} and {b.chart.name!r} differ")


# -- constructors -------------------------------------------------------------


def constant_field(chart, vec, name=""):
    vec = [float(v) for v in vec]
    return VectorField(chart, components=lambda xs: list(vec), name=name)


def coordinate_field(chart, i, name=None):
    vec = [0.0] * chart.dim
    vec[i] = 1.0
    return constant_field(chart, vec, name=name or f"d/d{chart.coords[i]}")


def constant_form(chart, covec, name=""):
    covec = [float(v) for v in covec]
    return OneForm(chart, components=lambda xs: list(covec), name=name)


# -- Lie bracket ---------------------------------------------------------------


def lie_bracket(X, Y):
    """The vector field ``[X, Y] = DY.X - DX.Y``.

    Evaluable to one order less than its arguments; bilinear and antisymmetric.
    """
    _same_chart(X, Y)
    n = X.chart.dim
    cap = min(X.max_order, Y.max_order) - 1
    if cap < 0:
        raise DerivativeOrderError("bracket arguments must be evaluable to order >= 1")

    def tfn(coords, order):
        xj = X.taylor(coords, order + 1)
        yj = Y.taylor(coords, order + 1)
        out = []
        for i in range(n):
            acc = None
            for j in range(n):
                term = yj[i].derivative(j) * xj[j] - xj[i].derivative(j) * yj[j]
                acc = term if acc is None else acc + term
            out.append(acc.truncated(order))
        return out

    return VectorField(X.chart, taylor_fn=tfn, max_order=cap,
                       name=f"[{X.name},{Y.name}]")


def lie_derivative_scalar(X, f):
    """The scalar field ``X(f)``."""
    _same_chart(X, f)
    n = X.chart.dim

    def tfn(coords, order):
        xj = X.taylor(coords, order)
        fj = f.jet(coords, order + 1)
        acc = None
        for j in range(n):
            term = fj.derivative(j) * xj[j]
            acc = term if acc is None else acc + term
        return [acc.truncated(order)]

    return ScalarField(X.chart, taylor_fn=tfn,
                       max_order=min(X.max_order, f.max_order - 1))
