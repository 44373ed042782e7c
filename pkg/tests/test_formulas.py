import math

import pytest

from stlppc.errors import (
    FormulaSyntaxError,
    NonConcaveNegationError,
    SelectorOutOfRangeError,
    TimeBoundOrderError,
)
from stlppc.formulas import (
    AngleBandAtom,
    BallPairAtom,
    BallToPointAtom,
    BandDiffAtom,
    LinearAtom,
    PhiFormula,
    PsiAnd,
    PsiAtom,
    StateLayout,
    participants,
)
from stlppc.parser import parse_task


def test_parse_eventually_ball_to_point():
    task = parse_task("F[5,15] dist(2,[90,90]) <= 5")
    assert len(task.units) == 1
    unit = task.units[0]
    assert unit.op == "F" and unit.a == 5 and unit.b == 15
    assert isinstance(unit.psi, PsiAtom)
    atom = unit.psi.atom
    assert isinstance(atom, BallToPointAtom)
    assert atom.agent == 2 and atom.center == (90, 90) and atom.radius == 5


def test_parse_always_conjunction():
    task = parse_task("G[0,15] (dist(1,2) <= 10 && dist(1,3) <= 10)")
    unit = task.units[0]
    assert unit.op == "G"
    assert isinstance(unit.psi, PsiAnd)
    assert len(unit.psi.children) == 2
    assert all(isinstance(c.atom, BallPairAtom) for c in unit.psi.children)


def test_parse_band_and_angle_atoms():
    task = parse_task(
        "F[10,15] (comp(5,1) - comp(4,1) in (27,33) && angdeg(4) near -45 tol 5)"
    )
    band, ang = (c.atom for c in task.units[0].psi.children)
    assert isinstance(band, BandDiffAtom)
    assert (band.agent_i, band.comp_i, band.agent_j, band.comp_j) == (5, 0, 4, 0)
    assert (band.lo, band.hi) == (27, 33)
    assert isinstance(ang, AngleBandAtom)
    assert ang.target_deg == -45 and ang.tol_deg == 5


def test_parse_linear_atom_and_negation():
    task = parse_task("G[0,5] (lin(comp(1,1) - 2*comp(2,1)) >= 3 && !lin(comp(1,2)) >= 0)")
    lin, neg = task.units[0].psi.children
    atom = lin.atom
    assert isinstance(atom, LinearAtom)
    assert atom.terms == ((1, 0, 1.0), (2, 0, -2.0)) and atom.rhs == 3
    # negated affine atom evaluates to -h
    layout = StateLayout({1: 2, 2: 2})
    row = neg.conjuncts()[0]
    import numpy as np

    x = np.array([0.0, 4.0, 0.0, 0.0])
    assert row.value(x, layout) == -4.0


def test_time_bound_order_rejected():
    with pytest.raises(TimeBoundOrderError):
        parse_task("F[5,3] dist(1,2) <= 1")


def test_sequence_window_overlap_rejected():
    with pytest.raises(TimeBoundOrderError):
        parse_task("F[0,6] dist(1,[0,0]) <= 1 && F[5,9] dist(1,[2,2]) <= 1")


def test_negation_of_non_affine_rejected():
    with pytest.raises(NonConcaveNegationError):
        parse_task("F[0,1] !dist(1,2) <= 1")
    with pytest.raises(NonConcaveNegationError):
        parse_task("F[0,1] !angdeg(1) near 0 tol 5")


def test_syntax_errors():
    for bad in ("", "F[1,2]", "H[0,1] dist(1,2) <= 1", "F[0,1] dist(1,2) <= ",
                "F[0,1] dist(1,2) <= 1 garbage"):
        with pytest.raises(FormulaSyntaxError):
            parse_task(bad)


def test_nest_flattening_cumulative_windows():
    task = parse_task("F[2,4] (dist(1,[0,0]) <= 1 && F[1,3] (dist(1,[5,5]) <= 1))")
    assert task.from_nest
    (u1, u2) = task.units
    assert (u1.a, u1.b) == (2, 4)
    assert (u2.a, u2.b) == (3, 7)
    assert all(u.op == "F" for u in task.units)


def test_nest_three_deep_matches_hand_flattening():
    task = parse_task(
        "F[1,2] (dist(1,[0,0]) <= 1 && F[1,2] (dist(1,[1,1]) <= 1 && F[2,3] dist(1,[2,2]) <= 1))"
    )
    windows = [(u.a, u.b) for u in task.units]
    assert windows == [(1, 2), (2, 4), (4, 7)]


def test_theta_sequence_parses():
    task = parse_task("F[0,2] dist(1,[0,0]) <= 1 && G[3,5] dist(1,[0,0]) <= 2")
    assert [u.op for u in task.units] == ["F", "G"]
    assert not task.from_nest


def test_bare_true_task():
    task = parse_task("true")
    assert task.units == () and task.trivial
    assert participants(task, 7) == (7,)


def test_participants_ordering_and_owner():
    t1 = parse_task("F[0,1] dist(1,2) <= 1")
    assert participants(t1, 1) == (1, 2)
    assert participants(t1, 2) == (1, 2)
    t2 = parse_task("F[0,1] dist(2,[0,0]) <= 1")
    assert participants(t2, 2) == (2,)
    assert participants(t2, 5) == (2, 5)


@pytest.mark.parametrize(
    "text",
    [
        "F[5,15] dist(2,[90,90]) <= 5",
        "G[0,15] (dist(1,2) <= 10 && dist(1,3) <= 10)",
        "F[10,15] (dist(5,[110,40]) <= 5 && comp(5,1) - comp(4,1) in (27,33) && angdeg(5) near 180 tol 5)",
        "F[0,2] dist(1,[0,0]) <= 1 && G[3,5] dist(1,[0,0]) <= 2",
        "F[2,4] (dist(1,[0,0]) <= 1 && F[1,3] (dist(1,[5,5]) <= 1))",
        "G[0,5] (lin(comp(1,1) - 2*comp(2,1)) >= 3 && !lin(comp(1,2)) >= 0)",
        "true",
        "F[0,1] (dist(1,[0.5,-1.25]) <= 1.5 && true)",
    ],
)
def test_parse_print_parse_round_trip(text):
    task = parse_task(text)
    printed = task.text()
    again = parse_task(printed)
    assert again == task
    assert again.text() == printed


def test_layout_selector_checks():
    layout = StateLayout({1: 2, 3: 3})
    assert layout.total_dim == 5
    assert layout.slice_of(3) == slice(2, 5)
    with pytest.raises(SelectorOutOfRangeError):
        layout.index(2, 0)
    with pytest.raises(SelectorOutOfRangeError):
        layout.index(1, 2)


def test_angle_band_rows_are_degree_scaled():
    import numpy as np

    layout = StateLayout({4: 3})
    atom = AngleBandAtom(4, -45.0, 5.0)
    lo, hi = atom.conjuncts()
    x = np.array([0.0, 0.0, math.radians(-45.0)])
    assert lo.value(x, layout) == pytest.approx(5.0)
    assert hi.value(x, layout) == pytest.approx(5.0)
    x[2] = math.radians(-40.0)
    assert lo.value(x, layout) == pytest.approx(10.0)
    assert hi.value(x, layout) == pytest.approx(0.0)


def test_phi_formula_validates_window():
    with pytest.raises(TimeBoundOrderError):
        PhiFormula("F", -1.0, 2.0, PsiAtom(BallPairAtom(1, 2, 1.0)))
