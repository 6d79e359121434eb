"""Prolongation to Engel domains, contactification of slices, development
maps, and contact-plane transport along the characteristic foliation."""

import math

import numpy as np
import pytest

from engellab.calculus import Chart
from engellab.distributions import (flag_ranks, characteristic_line,
                                    is_contact, plane_principal_angle)
from engellab.errors import EngelLabError, GeometryError
from engellab.expressions import vector_field_from_exprs
from engellab.prolongation import (EngelDomain, ParallelizedContact, Slice,
                                   check_slice_transverse, contactify,
                                   development, development_angle,
                                   development_coefficients,
                                   leaf_projective_coordinate, prolong,
                                   slice_transport)

CH3 = Chart("base", ("x", "y", "z"))


def standard_contact():
    v0 = vector_field_from_exprs(CH3, ["0", "1", "0"])
    v1 = vector_field_from_exprs(CH3, ["1", "0", "y"])
    return ParallelizedContact(CH3, v0, v1)


def perturbed_contact():
    v0 = vector_field_from_exprs(CH3, ["0.1*z", "1 + 0.1*x", "0.05*x*y"])
    v1 = vector_field_from_exprs(CH3, ["1", "0.1*sin(z)", "y + 0.1*x"])
    return ParallelizedContact(CH3, v0, v1)


def test_prolonged_frame_is_engel():
    rng = np.random.default_rng(0)
    for base in (standard_contact(), perturbed_contact()):
        dom = prolong(base, check_points=[rng.uniform(-1, 1, 3) for _ in range(5)])
        frame = dom.frame()
        for _ in range(40):
            p = np.append(rng.uniform(-1, 1, 3), rng.uniform(0.0, 0.5 * math.pi))
            rep = flag_ranks(frame, p)
            assert rep.is_engel, (base, p, rep.ranks)


def test_characteristic_line_is_vertical():
    dom = prolong(perturbed_contact())
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = np.append(rng.uniform(-1, 1, 3), rng.uniform(0.0, 1.5))
        ld = characteristic_line(dom.frame(), p)
        assert ld.angle_to([0, 0, 0, 1]) < 1e-8


def test_contactify_recovers_contact_planes():
    dom = prolong(perturbed_contact())
    rng = np.random.default_rng(2)
    for theta in (0.0, 0.7, 1.3):
        slc = dom.theta_slice(theta)
        cont = contactify(dom.frame(), slc)
        for _ in range(10):
            m = rng.uniform(-0.8, 0.8, 3)
            assert is_contact(cont.frame(), m)
            # the induced plane equals D(m, theta) pushed into the slice
            got = [cont.v0(m), cont.v1(m)]
            q = slc.embed_coords(m)
            want = [slc.project_vector(dom.vertical(q) * 0.0 + v)
                    for v in (np.array([0, 0, 0, 1.0]),)]
            V = dom.V(q)
            # slice tangent of D^2 is { V, [W, V] } projected; compare planes
            # via the lifted Legendrian frame of the base rotated by theta
            b = dom.base
            v0, v1 = b.v0(m), b.v1(m)
            c, s = math.cos(theta), math.sin(theta)
            plane = [c * v0 + s * v1, -s * v0 + c * v1]
            ang = plane_principal_angle(got, plane)
            assert ang < 1e-8, (theta, m, ang)


def test_contactify_tangent_slice_raises():
    dom = prolong(standard_contact())
    # a theta slice is fine, but slicing along x at the origin makes D^2
    # contain the slice tangent nowhere; pick instead a slice the frame
    # degenerates on: axis 1 (= y) has normal components (V.y, W.y, B.y)
    # which stay independent, so craft a genuinely tangent configuration
    slc = Slice(dom.chart, 3, 0.0)
    cont = contactify(dom.frame(), slc)
    assert is_contact(cont.frame(), [0.1, 0.2, 0.3])
    with pytest.raises(EngelLabError):
        contactify(dom.base.frame(), slc)  # wrong rank/dimension


def test_slice_transversality_check():
    dom = prolong(standard_contact())
    slc = dom.theta_slice(0.3)
    assert check_slice_transverse(dom, slc, [0.1, 0.2, 0.3]) > 1.0
    with pytest.raises(GeometryError):
        check_slice_transverse(dom, Slice(dom.chart, 0, 0.0), [0.0, 0.2, 0.3, 0.1])


def test_development_is_theta_rotation_on_standard_domain():
    # on the unperturbed domain the developed angle equals theta itself
    dom = prolong(standard_contact())
    rng = np.random.default_rng(3)
    for _ in range(10):
        theta = rng.uniform(0.05, 1.5)
        q = np.append(rng.uniform(-0.5, 0.5, 3), theta)
        ang = development_angle(dom, q, tol=1e-11)
        assert abs(ang - theta) < 1e-8
        dev = development(dom, q, tol=1e-11)
        assert dev.contact_residual < 1e-9
        slope = leaf_projective_coordinate(dom, q, tol=1e-11)
        assert abs(slope - math.tan(theta)) < 1e-7


def test_development_at_bottom_is_inclusion():
    dom = prolong(perturbed_contact())
    q = [0.2, -0.1, 0.3, 0.0]
    (a, b), dev = development_coefficients(dom, q)
    # the reported direction is normalized, so compare up to scale
    assert abs(b) < 1e-12
    assert abs(a - 1.0 / np.linalg.norm(dom.base.v0(q[:3]))) < 1e-12
    assert np.allclose(dev.foot, q[:3])


def test_development_monotone_in_theta():
    dom = prolong(perturbed_contact())
    m = [0.2, 0.1, -0.3]
    angles = [development_angle(dom, np.append(m, t), tol=1e-10)
              for t in np.linspace(0.0, 1.5, 12)]
    assert all(b > a for a, b in zip(angles, angles[1:]))


def test_projective_charts_differ_by_moebius():
    # two affine fiber charts given by basis changes are related by a linear
    # fractional transformation with the same matrix
    dom = prolong(perturbed_contact())
    M = np.array([[1.0, 0.4], [-0.3, 0.9]])
    rng = np.random.default_rng(4)
    for _ in range(8):
        q = np.append(rng.uniform(-0.4, 0.4, 3), rng.uniform(0.1, 1.2))
        (a, b), _ = development_coefficients(dom, q, tol=1e-10)
        s0 = leaf_projective_coordinate(dom, q, tol=1e-10)
        s1 = leaf_projective_coordinate(dom, q, basis_change=M, tol=1e-10)
        # [a; b] = M [a'; b'] so s1 = (m11 b - m10 a-ish) via solve; verify
        ap, bp = np.linalg.solve(M, [a, b])
        assert abs(s1 - bp / ap) < 1e-10
        assert abs(s0 - b / a) < 1e-10


def test_slice_transport_rotation_matrix():
    # transporting between theta slices of the standard domain rotates the
    # Legendrian frame by the angle difference
    base = standard_contact()
    dom = prolong(base, full_circle=True)
    m = [0.3, -0.2, 0.4]
    res = slice_transport(dom, dom.theta_slice(0.0), dom.theta_slice(0.9), m, tol=1e-11)
    assert res.contact_defect < 1e-9
    c, s = math.cos(0.9), math.sin(0.9)
    want = np.array([[c, s], [-s, c]])
    # contactified frames at theta=0 and theta=0.9 both come from pivot
    # elimination, so compare the planes and the determinant instead of the
    # raw matrix entries when frames differ by plane-preserving scalings
    assert abs(np.linalg.det(res.matrix) - np.linalg.det(want)) < 1e-7
    assert np.max(np.abs(res.matrix - want)) < 1e-7


def test_full_circle_return_is_identity():
    base = perturbed_contact()
    dom = prolong(base, full_circle=True)
    rng = np.random.default_rng(5)
    bottom = dom.theta_slice(0.0)
    for _ in range(5):
        m = rng.uniform(-0.4, 0.4, 3)
        res = slice_transport(dom, bottom, bottom, m, tol=1e-11)
        assert np.max(np.abs(res.image - m)) < 1e-8
        assert np.max(np.abs(res.matrix - np.eye(2))) < 1e-7
        assert abs(res.crossing_time - 2.0 * math.pi) < 1e-8


def test_same_slice_transport_needs_full_circle():
    dom = prolong(standard_contact(), full_circle=False)
    with pytest.raises(EngelLabError):
        slice_transport(dom, dom.theta_slice(0.0), dom.theta_slice(0.0), [0, 0, 0])
