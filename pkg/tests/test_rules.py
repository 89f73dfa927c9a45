import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ril.rules import (EMPTY, Rule, RuleKind, RuleSet, active_count, evaluate, is_consistent,
                       kb_activation, rule_activation)

N_ACTIONS = 5

action_sets = st.frozensets(st.integers(0, N_ACTIONS - 1), min_size=1)
rule_specs = st.lists(st.tuples(st.booleans(), action_sets), max_size=6)


def make_rules(specs, kind=RuleKind.ACCELERATION):
    rules = [Rule(f"r{i}", (lambda obs, on=on: on), rec, kind) for i, (on, rec) in enumerate(specs)]
    return RuleSet(tuple(rules), kind)


def const(rule_id, on, rec):
    return Rule(rule_id, lambda obs: on, frozenset(rec))


def test_activation_of_single_rule():
    r = Rule("up", lambda obs: obs > 3, frozenset({1, 2}))
    assert rule_activation(r, 5) == {1, 2}
    assert rule_activation(r, 2) == EMPTY


def test_rule_rejects_empty_or_negative_recommendation():
    with pytest.raises(ValueError):
        Rule("r", lambda o: True, frozenset())
    with pytest.raises(ValueError):
        Rule("r", lambda o: True, frozenset({-1}))


def test_rule_set_rejects_duplicate_ids_and_mixed_kinds():
    with pytest.raises(ValueError, match="duplicate"):
        RuleSet((const("a", True, {0}), const("a", True, {1})), RuleKind.ACCELERATION)
    safe = Rule("s", lambda o: True, frozenset({0}), RuleKind.SAFETY)
    with pytest.raises(ValueError):
        RuleSet((safe,), RuleKind.ACCELERATION)


def test_kb_activation_examples():
    rs = RuleSet((const("a", True, {0, 1}), const("b", True, {1, 2}), const("c", False, {3})),
                 RuleKind.ACCELERATION)
    assert kb_activation(rs, None) == {1}
    assert active_count(rs, None) == 2
    assert is_consistent(rs, None)
    assert kb_activation(RuleSet.empty(), None) == EMPTY


def test_inactive_rules_do_not_constrain():
    rs = RuleSet((const("a", False, {0}), const("b", False, {1})), RuleKind.ACCELERATION)
    assert kb_activation(rs, None) == EMPTY
    assert is_consistent(rs, None)


def test_pairwise_consistent_triangle_has_empty_intersection():
    rs = RuleSet((const("ab", True, {0, 1}), const("bc", True, {1, 2}), const("ac", True, {0, 2})),
                 RuleKind.ACCELERATION)
    assert is_consistent(rs, None)
    assert kb_activation(rs, None) == EMPTY
    assert evaluate(rs, None) == (EMPTY, True)


def test_disjoint_pair_is_inconsistent():
    rs = RuleSet((const("a", True, {0}), const("b", True, {1})), RuleKind.ACCELERATION)
    assert not is_consistent(rs, None)


def test_merge_keeps_kind():
    a = make_rules([(True, {0})])
    b = RuleSet((const("z", True, {0}),), RuleKind.ACCELERATION)
    assert len(a.merged(b)) == 2
    with pytest.raises(ValueError):
        a.merged(RuleSet.empty(RuleKind.SAFETY))


@settings(max_examples=500)
@given(rule_specs, st.randoms(use_true_random=False))
def test_order_independence(specs, rnd):
    rs = make_rules(specs)
    shuffled = list(rs.rules)
    rnd.shuffle(shuffled)
    other = RuleSet(tuple(shuffled), RuleKind.ACCELERATION)
    assert kb_activation(rs, None) == kb_activation(other, None)
    assert is_consistent(rs, None) == is_consistent(other, None)


@settings(max_examples=500)
@given(action_sets, action_sets)
def test_consistency_is_symmetric(a, b):
    ab = make_rules([(True, a), (True, b)])
    ba = make_rules([(True, b), (True, a)])
    assert is_consistent(ab, None) == is_consistent(ba, None) == bool(a & b)


@settings(max_examples=500)
@given(rule_specs, st.tuples(st.booleans(), action_sets))
def test_adding_a_rule_never_restores_consistency(specs, extra):
    before = is_consistent(make_rules(specs), None)
    after = is_consistent(make_rules(specs + [extra]), None)
    assert before or not after


@settings(max_examples=500)
@given(rule_specs)
def test_kb_activation_within_every_active_set(specs):
    rs = make_rules(specs)
    kb = kb_activation(rs, None)
    for on, rec in specs:
        if on:
            assert kb <= rec
    if not any(on for on, _ in specs):
        assert kb == EMPTY


@settings(max_examples=500)
@given(rule_specs)
def test_evaluate_matches_separate_calls(specs):
    rs = make_rules(specs)
    assert evaluate(rs, None) == (kb_activation(rs, None), is_consistent(rs, None))


@settings(max_examples=300)
@given(rule_specs)
def test_consistency_matches_bruteforce(specs):
    active = [rec for on, rec in specs if on]
    expected = all(active[i] & active[j] for i in range(len(active)) for j in range(i + 1, len(active)))
    assert is_consistent(make_rules(specs), None) == expected
