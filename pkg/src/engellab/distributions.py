"""Derived flags of distributions, Engel/contact tests, the characteristic
line field, and Reeb fields.

Rank decisions use a relative singular-value cutoff (default 1e-7 of the
largest singular value per stage); reports carry the full singular values so
near-degenerate cases can be audited instead of silently misclassified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import OneForm, Point, VectorField, _coords_of, lie_bracket
from .errors import EngelLabError, GeometryError
from .jets import Jet, jet_solve

DEFAULT_RANK_TOL = 1e-7


@dataclass
class DistributionFrame:
    """A spanning set of vector fields for a rank-r distribution."""

    fields: list

    def __post_init__(self):
        if not self.fields:
            raise EngelLabError("frame needs at least one field")
        chart = self.fields[0].chart
        for f in self.fields:
            if f.chart.name != chart.name:
                raise EngelLabError("frame fields live on different charts")
        self.chart = chart

    @property
    def rank(self):
        return len(self.fields)

    @property
    def dim(self):
        return self.chart.dim

    def matrix(self, p):
        """Columns = frame fields evaluated at p."""
        return np.column_stack([f(p) for f in self.fields])


@dataclass
class FlagReport:
    """Point-wise ranks of D, D^2, D^3 with the singular values behind them."""

    point: object
    ranks: tuple
    singular_values: list
    tol: float

    @property
    def is_engel(self):
        return self.ranks == (2, 3, 4)


@dataclass
class LineDirection:
    """An oriented line in a tangent space."""

    base: object
    direction: np.ndarray
    sign_convention: str = "first-nonzero-positive"

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise EngelLabError("line direction must be nonzero")
        self.direction = d / norm

    def angle_to(self, other):
        """Unoriented angle between lines (in [0, pi/2])."""
        v = other.direction if isinstance(other, LineDirection) else np.asarray(other, float)
        v = v / np.linalg.norm(v)
        c = abs(float(np.dot(self.direction, v)))
        return float(np.arccos(min(1.0, c)))


def _rank_of(cols, tol):
    M = np.column_stack(cols)
    sv = np.linalg.svd(M, compute_uv=False)
    smax = sv[0] if len(sv) else 0.0
    rank = int(np.sum(sv > tol * smax)) if smax > 0 else 0
    return rank, sv


def flag_generators(frame):
    """Vector fields generating D, D^2, D^3 (as far as rank 2 frames need).

    Stage 2 adds the pairwise brackets; stage 3 adds brackets of the frame
    fields with the stage-2 generators.
    """
    fields = list(frame.fields)
    brackets = []
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            brackets.append(lie_bracket(fields[i], fields[j]))
    stage2 = fields + brackets
    stage3 = list(stage2)
    for f in fields:
        for b in brackets:
            stage3.append(lie_bracket(f, b))
    return fields, stage2, stage3


def flag_ranks(frame, p, tol=DEFAULT_RANK_TOL):
    """Ranks of D, D^2, D^3 at ``p`` via singular values of the evaluated
    generators."""
    st1, st2, st3 = flag_generators(frame)
    cols1 = [f(p) for f in st1]
    r1, sv1 = _rank_of(cols1, tol)
    if r1 < frame.rank:
        raise GeometryError(f"frame degenerate at {p}", point=p)
    cols2 = cols1 + [f(p) for f in st2[len(st1):]]
    r2, sv2 = _rank_of(cols2, tol)
    cols3 = cols2 + [f(p) for f in st3[len(st2):]]
    r3, sv3 = _rank_of(cols3, tol)
    return FlagReport(point=p, ranks=(r1, r2, r3), singular_values=[sv1, sv2, sv3], tol=tol)


def is_engel(frame, p, tol=DEFAULT_RANK_TOL):
    """True iff the flag ranks at ``p`` are (2, 3, 4)."""
    if frame.dim != 4 or frame.rank != 2:
        return False
    return flag_ranks(frame, p, tol).is_engel


def is_contact(frame_or_form, p, tol=DEFAULT_RANK_TOL):
    """Contact test on a 3-dimensional chart.

    Frame variant: rank of {V0, V1, [V0, V1]} is 3.  Form variant:
    ``alpha ^ d alpha`` is nondegenerate relative to the form's scale.
    """
    if isinstance(frame_or_form, OneForm):
        alpha = frame_or_form
        if alpha.chart.dim != 3:
            raise EngelLabError("contact form test needs a 3-dimensional chart")
        a = alpha(p)
        M = [[j.value for j in row] for row in alpha.d_matrix(p)]
        vol = a[0] * M[1][2] - a[1] * M[0][2] + a[2] * M[0][1]
        scale = np.linalg.norm(a) * max(np.max(np.abs(M)), 1e-300)
        return abs(vol) > tol * max(scale, 1e-300)
    frame = frame_or_form
    if not isinstance(frame, DistributionFrame):
        frame = DistributionFrame(list(frame_or_form))
    if frame.dim != 3 or frame.rank != 2:
        raise EngelLabError("contact frame test needs 2 fields on a 3-dimensional chart")
    v0, v1 = frame.fields
    cols = [v0(p), v1(p), lie_bracket(v0, v1)(p)]
    r, _ = _rank_of(cols, tol)
    return r == 3


def characteristic_line(frame, p, tol=DEFAULT_RANK_TOL, orient=None):
    """The characteristic direction of an Engel frame at ``p``: the kernel of
    ``v -> [[X, Y], v] mod D^2`` inside the plane spanned by the frame.

    ``orient`` optionally fixes the sign by alignment with a reference vector
    (Engel domains pass their vertical field so that positive motion rotates
    contact directions counterclockwise); otherwise the first sufficiently
    nonzero component is made positive.
    """
    if frame.rank != 2:
        raise EngelLabError("characteristic line needs a rank-2 frame")
    X, Y = frame.fields
    B = lie_bracket(X, Y)
    x0, y0, b0 = X(p), Y(p), B(p)
    # orthogonal complement of D^2 in coordinates, via SVD
    M2 = np.column_stack([x0, y0, b0])
    U, sv, _ = np.linalg.svd(M2)
    if sv[2] <= tol * sv[0]:
        raise GeometryError("distribution is not Engel at the point (rank D^2 < 3)", point=p)
    normal = U[:, 3]
    c1 = float(normal @ lie_bracket(B, X)(p))
    c2 = float(normal @ lie_bracket(B, Y)(p))
    scale = max(abs(c1), abs(c2))
    if scale <= tol * max(np.linalg.norm(b0), 1.0):
        raise GeometryError("characteristic kernel is not one-dimensional numerically", point=p)
    # [[X,Y], aX + bY] mod D^2 has coefficient a*c1 + b*c2 (the non-tensorial
    # terms land inside D^2); kernel direction is (c2, -c1) in frame coords
    v = c2 * x0 - c1 * y0
    if orient is not None:
        ref = np.asarray(orient, dtype=float)
        if abs(float(v @ ref)) > 1e-14 and float(v @ ref) < 0.0:
            v = -v
        convention = "aligned-with-reference"
    else:
        nz = np.argmax(np.abs(v))
        if v[nz] < 0:
            v = -v
        convention = "first-nonzero-positive"
    base = p if isinstance(p, Point) else frame.chart.point(p)
    return LineDirection(base=base, direction=v, sign_convention=convention)


def reeb_vector(alpha, p):
    """The Reeb vector of a contact form at a point: ``alpha(Z) = 1``,
    ``d alpha(Z, .) = 0``.

    In dimension 3, the kernel of ``d alpha`` is spanned by the component
    dual ``(da_23, da_31, da_12)``; normalizing by ``alpha`` gives Z.
    """
    jets = _reeb_jets(alpha, _coords_of(p, alpha.chart), 0)
    return np.array([j.value for j in jets])


def _reeb_jets(alpha, coords, order):
    M = alpha.d_matrix(coords, order)
    v = [M[1][2], M[2][0], M[0][1]]
    a = alpha.taylor(coords, order)
    pairing = a[0] * v[0] + a[1] * v[1] + a[2] * v[2]
    if abs(pairing.value) < 1e-13:
        raise GeometryError("form is not contact at the point (alpha ^ d alpha = 0)", point=coords)
    inv = pairing.reciprocal()
    return [vi * inv for vi in v]


def reeb_field(alpha):
    """The Reeb vector field of a contact form on a 3-dimensional chart."""
    if alpha.chart.dim != 3:
        raise EngelLabError("Reeb field construction needs a 3-dimensional chart")

    def tfn(coords, order):
        return _reeb_jets(alpha, coords, order)

    return VectorField(alpha.chart, taylor_fn=tfn, max_order=alpha.max_order - 1,
                       name=f"Reeb({alpha.name})")


def annihilator_form(v0, v1, name=""):
    """The one-form on a 3-dimensional chart vanishing on both fields,
    realized as the coordinate cross product of their component vectors."""
    if v0.chart.dim != 3:
        raise EngelLabError("annihilator construction needs a 3-dimensional chart")

    def tfn(coords, order):
        a = v0.taylor(coords, order)
        b = v1.taylor(coords, order)
        return [a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0]]

    return OneForm(v0.chart, taylor_fn=tfn,
                   max_order=min(v0.max_order, v1.max_order), name=name)


def plane_principal_angle(basis_a, basis_b):
    """Largest principal angle between the spans of two column bases.

    Computed from the sine (the residual of projecting one orthonormal basis
    onto the other span), which stays accurate for small angles where the
    cosine formula loses half the digits.
    """
    A = np.linalg.qr(np.column_stack(basis_a))[0]
    B = np.linalg.qr(np.column_stack(basis_b))[0]
    R = B - A @ (A.T @ B)
    s = np.linalg.svd(R, compute_uv=False)
    return float(np.arcsin(min(1.0, s.max() if len(s) else 0.0)))
