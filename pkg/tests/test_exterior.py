from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kuranishi_atlas.errors import (
    DegreeError,
    KernelMismatchError,
    NotTransverseError,
    SingularMapError,
    StabilizationError,
)
from kuranishi_atlas.exterior import (
    DetLineElement,
    DualWedge,
    OrientationSign,
    RationalMatrix,
    Wedge,
    canonical_cokernel,
    canonical_kernel,
    commutes_cclaim,
    commutes_ccord,
    complete_basis,
    contract_full,
    contract_kernel,
    det_line_canonical,
    normalize,
    standard_orientation,
    transverse_zero_sign,
    verify_stabilization_independence,
)


def m(*rows):
    return RationalMatrix.from_rows(rows)


def test_det_of_empty_matrix_is_one():
    assert RationalMatrix.zeros(0, 0).det() == 1


def test_det_of_non_square_raises():
    with pytest.raises(DegreeError):
        m([1, 2]).det()


def test_inverse_of_singular_matrix_raises():
    with pytest.raises(SingularMapError):
        m([1, 2], [2, 4]).inverse()


def test_matrix_arithmetic():
    a = m([1, 2], [3, 4])
    assert (a @ RationalMatrix.identity(2)) == a
    assert (a - a).is_zero()
    assert a.transpose() == m([1, 3], [2, 4])
    assert a.det() == -2
    assert str(m([1, Fraction(1, 2)], [0, 3])) == "[1 1/2; 0 3]"


def test_kernel_and_cokernel_of_projection():
    d = m([1, 0])
    kernel = canonical_kernel(d)
    assert kernel.cols == 1
    assert (d @ kernel).is_zero()
    assert canonical_cokernel(m([1], [0])).cols == 1


def test_contract_full_on_swap_is_minus_one():
    value = contract_full(m([0, 1], [1, 0]), Wedge.standard(2), DualWedge.standard(2))
    assert value == -1


def test_contract_full_rejects_singular_map():
    with pytest.raises((SingularMapError, DegreeError)):
        contract_full(m([1, 1], [1, 1]), Wedge.standard(2), DualWedge.standard(2))


def test_contract_kernel_normalizes_dual_wedge_on_its_own_vectors():
    f = m([2, 0], [0, 0])
    phi = m([0], [1])
    assert contract_kernel(f, phi, standard_orientation(2, 2)).scale == 2


def test_contract_kernel_of_zero_map():
    element = contract_kernel(RationalMatrix.zeros(1, 1), RationalMatrix.identity(1), standard_orientation(1, 1))
    assert element.scale == 1


def test_normalize_scales_by_kernel_vector():
    element = normalize(m([1, 0]), m([0], [2]), RationalMatrix.zeros(1, 0), Fraction(1))
    assert element.scale == 2


def test_normalize_rejects_vectors_outside_kernel():
    with pytest.raises(KernelMismatchError):
        normalize(m([1, 0]), m([1], [0]), RationalMatrix.zeros(1, 0), Fraction(1))


def test_stabilization_independence_on_a_point():
    report = verify_stabilization_independence(m([0]), m([1]), m([2]))
    assert report.route == "direct"
    assert report.scale == 2
    assert report.predicted == 2
    assert report.intertwined


def test_transverse_zero_sign():
    assert int(transverse_zero_sign(m([-2]))) == -1
    assert int(transverse_zero_sign(m([0, 1], [1, 0]))) == -1
    assert int(transverse_zero_sign(m([3]))) == 1


def test_transverse_zero_sign_of_degenerate_zero():
    with pytest.raises(NotTransverseError):
        transverse_zero_sign(m([0]))
    with pytest.raises(DegreeError):
        transverse_zero_sign(m([1, 0]))


def test_orientation_sign():
    plus, minus = OrientationSign(1), OrientationSign(-1)
    assert int(plus * minus) == -1
    assert str(-minus) == "+1"
    with pytest.raises(ValueError):
        OrientationSign(2)


def test_det_line_canonical_uses_rref_kernel():
    D = m([1, 0])
    element = det_line_canonical(D)
    assert element.scale == 1
    assert element.kernel == canonical_kernel(D)
    assert element.cokernel.cols == 0


@pytest.mark.parametrize("d", [1, 2, -3])
@pytest.mark.parametrize("r", [1, 3])
def test_contraction_commutes_with_graph_trivialization(d, r):
    assert commutes_ccord(m([d]), m([r]))


def test_graph_trivialization_needs_isomorphism():
    with pytest.raises(StabilizationError):
        commutes_ccord(m([1]), m([0]))


def test_transition_square_rejects_non_intertwining_maps():
    with pytest.raises(KernelMismatchError):
        commutes_cclaim(m([1]), m([1]), m([1]), m([2]))


def draw_matrix(data, rows, cols, lo=-3, hi=3):
    values = data.draw(st.lists(st.integers(lo, hi), min_size=rows * cols, max_size=rows * cols))
    return RationalMatrix(rows, cols, tuple(Fraction(v) for v in values))


def test_stabilization_comparison_in_both_orders():
    forward = verify_stabilization_independence(m([1]), m([1]), m([1, 2]))
    backward = verify_stabilization_independence(m([1]), m([1, 2]), m([1]))
    assert forward.route == "direct"
    assert backward.route == "reverse"
    assert forward.intertwined and backward.intertwined
    assert backward.scale == 1 / forward.scale


def test_stabilization_comparison_with_a_zero_stabilization():
    D = m([Fraction(-1, 2), 1, Fraction(2, 3), 1])
    report = verify_stabilization_independence(D, m([-1]), m([0]))
    assert report.route == "via direct sum"
    assert report.intertwined
    assert report.scale == report.predicted


def test_stabilization_must_be_surjective():
    with pytest.raises(StabilizationError):
        verify_stabilization_independence(m([0]), m([0]), m([1]))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_stabilization_independence_on_random_instances(data):
    rows = data.draw(st.integers(1, 3))
    D = draw_matrix(data, rows, data.draw(st.integers(1, 3)))
    R1 = draw_matrix(data, rows, data.draw(st.integers(1, 3)))
    R2 = draw_matrix(data, rows, data.draw(st.integers(1, 3)))
    surjective = all(RationalMatrix.hstack(D, R).rank() == rows for R in (R1, R2))
    if not surjective:
        with pytest.raises(StabilizationError):
            verify_stabilization_independence(D, R1, R2)
        return
    report = verify_stabilization_independence(D, R1, R2)
    assert report.intertwined, report.transcript


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_graph_trivialization_on_random_instances(data):
    rows = data.draw(st.integers(1, 3))
    D = draw_matrix(data, rows, data.draw(st.integers(1, 4)))
    R = draw_matrix(data, rows, rows)
    assume(R.det() != 0)
    assert commutes_ccord(D, R)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_transition_square_on_random_instances(data):
    # D_J = [[D_I, B], [0, C]] with C invertible satisfies the index condition for the standard inclusions
    m_i, n_i, k = data.draw(st.integers(1, 2)), data.draw(st.integers(1, 3)), data.draw(st.integers(1, 2))
    D_I = draw_matrix(data, m_i, n_i)
    B = draw_matrix(data, m_i, k)
    C = draw_matrix(data, k, k)
    assume(C.det() != 0)
    top = RationalMatrix.hstack(D_I, B)
    bottom = RationalMatrix.hstack(RationalMatrix.zeros(k, n_i), C)
    D_J = RationalMatrix.vstack(top, bottom)
    dphi = RationalMatrix.vstack(RationalMatrix.identity(n_i), RationalMatrix.zeros(k, n_i))
    phihat = RationalMatrix.vstack(RationalMatrix.identity(m_i), RationalMatrix.zeros(k, m_i))
    assert commutes_cclaim(D_I, D_J, dphi, phihat)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_contract_kernel_under_changes_of_basis(data):
    rows, cols = data.draw(st.integers(1, 3)), data.draw(st.integers(1, 4))
    F = draw_matrix(data, rows, cols)
    elem = standard_orientation(cols, rows)
    phi = canonical_kernel(F)
    base = contract_kernel(F, phi, elem)

    B = draw_matrix(data, cols, cols)
    assume(B.det() != 0)
    moved = DetLineElement(B @ elem.kernel, elem.cokernel, elem.scale)
    assert contract_kernel(F, phi, moved).scale == B.det() * base.scale

    free = cols - phi.cols
    A = draw_matrix(data, free, free)
    assume(free == 0 or A.det() != 0)
    shift = draw_matrix(data, phi.cols, free)
    completion = complete_basis(phi) @ A + (phi @ shift if phi.cols else RationalMatrix.zeros(cols, free))
    assert contract_kernel(F, phi, elem, completion).scale == base.scale
