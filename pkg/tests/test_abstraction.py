from collections import Counter

from hypothesis import given, settings

from evstl import ltl
from evstl.abstraction import F_KIND, G_KIND, U_LEFT, U_RIGHT, abstract
from evstl.formula import ALWAYS, ImplG, PredConj, SpecAnd, TimedF, TimedG, TimedU, TimeInterval, parse, predicates_of

from test_formula import DECLS, specs


def test_single_robot(alarm_formula):
    ab = abstract(alarm_formula)
    assert str(ab.ltl) == "G(alarm -> F p_near55_0_10)"
    (p,) = ab.props.values()
    assert p.name == "p_near55_0_10" and p.kind == F_KIND and p.interval == TimeInterval(0, 10)
    assert ab.events == {"alarm"}


def test_nested_implication(geometry_decls):
    ab = abstract(parse("G(A -> G(B -> F[0,10](near55)))", geometry_decls))
    assert str(ab.ltl) == "G(A -> G(B -> F p_near55_0_10))"


def test_until_kinds(geometry_decls):
    ab = abstract(parse("(g1 & !near55) U[2,9.5] (near55)", geometry_decls))
    assert str(ab.ltl) == "(p_g1_2_9p5_UL & p_not_near55_2_9p5_UL) U p_near55_2_9p5_UR"
    kinds = {n: p.kind for n, p in ab.props.items()}
    assert kinds == {"p_g1_2_9p5_UL": U_LEFT, "p_not_near55_2_9p5_UL": U_LEFT, "p_near55_2_9p5_UR": U_RIGHT}
    assert ab.props["p_g1_2_9p5_UL"].partners == ("p_near55_2_9p5_UR",)


def test_duplicates_get_distinct_props(geometry_decls):
    ab = abstract(parse("F[0,10](g1) & F[0,10](g1)", geometry_decls))
    assert sorted(ab.props) == ["p_g1_0_10", "p_g1_0_10_2"]


def test_predicate_antecedent_is_untimed_g(geometry_decls):
    ab = abstract(parse("G(g1 & !g2 -> F[0,5](near55))", geometry_decls))
    ant = [p for p in ab.props.values() if p.kind == G_KIND]
    assert {p.name for p in ant} == {"p_g1_0_inf_G", "p_not_g2_0_inf_G"}
    assert all(p.interval == ALWAYS for p in ant)


def test_conjunction_shares_interval_and_kind(geometry_decls):
    ab = abstract(parse("G[1,4](g1 & sep)", geometry_decls))
    assert str(ab.ltl) == "G(p_g1_1_4_G & p_sep_1_4_G)"
    assert {p.interval for p in ab.props.values()} == {TimeInterval(1, 4)}


def test_four_robot_template_count(compiled):
    _, c = compiled("four_robot")
    assert len(c.props) == 14


def _erase(f):
    """Shape of an STL spec with intervals and leaf identities removed."""
    if isinstance(f, SpecAnd):
        return ("and", tuple(_erase(a) for a in f.args))
    if isinstance(f, ImplG):
        return ("G", ("->", "ant", _erase(f.body)))
    if isinstance(f, TimedF):
        return ("F", _leaves(f.body))
    if isinstance(f, TimedG):
        return ("G", _leaves(f.body))
    if isinstance(f, TimedU):
        return ("U", _leaves(f.left), _leaves(f.right))
    raise TypeError(f)


def _leaves(p: PredConj):
    return "leaf" if len(p.literals) == 1 else ("and", ("leaf",) * len(p.literals))


def _erase_ltl(g):
    if isinstance(g, ltl.And):
        # conjunctions of props stand for predicate conjunctions
        if all(isinstance(a, ltl.Prop) for a in g.args):
            return ("and", ("leaf",) * len(g.args))
        return ("and", tuple(_erase_ltl(a) for a in g.args))
    if isinstance(g, ltl.Always) and isinstance(g.arg, ltl.Implies):
        return ("G", ("->", "ant", _erase_ltl(g.arg.right)))
    if isinstance(g, ltl.Always):
        return ("G", _erase_ltl(g.arg))
    if isinstance(g, ltl.Eventually):
        return ("F", _erase_ltl(g.arg))
    if isinstance(g, ltl.Until):
        return ("U", _erase_ltl(g.left), _erase_ltl(g.right))
    if isinstance(g, ltl.Prop):
        return "leaf"
    raise TypeError(g)


@settings(max_examples=200)
@given(specs)
def test_abstraction_properties(f):
    a1, a2 = abstract(f), abstract(f)
    # deterministic names
    assert str(a1.ltl) == str(a2.ltl) and list(a1.props) == list(a2.props)
    # every predicate occurrence maps to exactly one proposition
    occurrences = Counter((p.name, p.negated) for p in predicates_of(f))
    props = Counter((p.pred.name, p.pred.negated) for p in a1.props.values())
    assert occurrences == props
    # structure survives
    assert _erase(f) == _erase_ltl(a1.ltl)
    # leaves of the LTL formula are events or table entries
    assert a1.ltl.props() <= set(a1.props) | set(DECLS.events)
