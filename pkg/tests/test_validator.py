from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purposegraph.errors import CycleDetected, DanglingEdge
from purposegraph.lpl import (
    DataElement,
    DataRecipient,
    InheritanceEdge,
    LayeredPrivacyPolicy,
    PrivacyModel,
    Purpose,
    RecipientKind,
    UnderlyingPurposeEdge,
    parse_policy,
)
from purposegraph.synth import Mutation, mutate, random_valid_policy
from purposegraph.validator import Rule, check_acyclic, check_edge, closure, validate

FIXTURES = Path(__file__).parent / "fixtures"
UP = UnderlyingPurposeEdge


def purpose(pid: str, **kw) -> Purpose:
    kw.setdefault("name", pid)
    return Purpose(pid, **kw)


def graph_policy(nodes, edges) -> LayeredPrivacyPolicy:
    return LayeredPrivacyPolicy(
        purposes=tuple(purpose(n) for n in nodes),
        composition=tuple(UP(a, b) for a, b in edges),
    )


def pair(parent: Purpose, child: Purpose) -> tuple[LayeredPrivacyPolicy, UnderlyingPurposeEdge]:
    policy = LayeredPrivacyPolicy(purposes=(parent, child), composition=(UP(parent.id, child.id),))
    return policy, policy.composition[0]


FULL = dict(
    opt_out=True,
    required=False,
    descr="d",
    recipients={DataRecipient("acme", RecipientKind.CONTROLLER)},
    privacy_model=PrivacyModel("k-anonymity", {"k": 5}),
    data={DataElement("User", "email")},
)


def test_identical_child_has_no_violations():
    policy, edge = pair(purpose("p", **FULL), purpose("c", **FULL))
    assert check_edge(policy, edge) == []


def test_data_subset_violation():
    parent = purpose("p", data={DataElement("User", "email")})
    child = purpose("c", data={DataElement("User", "email"), DataElement("User", "location")})
    policy, edge = pair(parent, child)
    found = check_edge(policy, edge)
    assert [v.rule for v in found] == [Rule.DATA_SUBSET]
    assert "User.location" in found[0].detail


def test_privacy_model_violation():
    parent = purpose("p", privacy_model=PrivacyModel("k-anonymity", {"k": 5}))
    child = purpose("c", privacy_model=PrivacyModel("k-anonymity", {"k": 3}))
    assert [v.rule for v in check_edge(*pair(parent, child))] == [Rule.PRIVACY_MODEL_ORDER]


def test_incomparable_privacy_model_is_violation():
    parent = purpose("p", privacy_model=PrivacyModel("k-anonymity", {"k": 5}))
    child = purpose("c", privacy_model=PrivacyModel("t-closeness", {"t": 0.2}))
    assert [v.rule for v in check_edge(*pair(parent, child))] == [Rule.PRIVACY_MODEL_ORDER]


def test_child_may_add_anonymization():
    parent = purpose("p")
    child = purpose("c", privacy_model=PrivacyModel("k-anonymity", {"k": 2}))
    assert check_edge(*pair(parent, child)) == []


def test_all_rules_reported_together():
    parent = purpose("p", **FULL)
    child = purpose(
        "c",
        opt_out=False,
        required=True,
        recipients={DataRecipient("other", RecipientKind.THIRD_PARTY)},
        data={DataElement("User", "ssn")},
    )
    rules = [v.rule for v in check_edge(*pair(parent, child))]
    assert rules == [
        Rule.DATA_SUBSET,
        Rule.RECIPIENT_SUBSET,
        Rule.PRIVACY_MODEL_ORDER,
        Rule.REQUIRED_MISMATCH,
        Rule.OPT_OUT_MISMATCH,
    ]


def test_check_edge_dangling():
    policy = LayeredPrivacyPolicy(purposes=(purpose("a"),))
    with pytest.raises(DanglingEdge):
        check_edge(policy, UP("a", "zz"))


@pytest.mark.parametrize(
    "nodes, edges, witness",
    [
        (["a"], [], None),
        (["a", "b", "c"], [("a", "b"), ("b", "c")], None),
        (["a", "b"], [("a", "b"), ("b", "a")], ["a", "b", "a"]),
        (["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "b")], ["b", "c", "b"]),
    ],
)
def test_check_acyclic(nodes, edges, witness):
    found = check_acyclic(graph_policy(nodes, edges))
    if witness is None:
        assert found is None
    else:
        assert found.rule is Rule.CYCLE
        assert list(found.witness) == witness
        assert (found.edge.parent, found.edge.child) == tuple(witness[-2:])


def test_news_portal_validates_with_two_roots():
    report = validate(parse_policy((FIXTURES / "news_portal_policy.json").read_bytes()))
    assert report.is_valid
    assert report.roots == {"p1", "p1.1"}


def test_single_purpose_policy():
    report = validate(LayeredPrivacyPolicy(purposes=(purpose("only"),)))
    assert report.is_valid and report.roots == {"only"}


def test_required_flip_gives_one_violation():
    policy = parse_policy((FIXTURES / "news_portal_policy.json").read_bytes())
    child = policy.purpose("p3′")
    flipped = policy.replace_purpose(Purpose(**{**child.__dict__, "required": not child.required}))
    report = validate(flipped)
    assert [(v.rule, v.edge.child) for v in report.violations] == [(Rule.REQUIRED_MISMATCH, "p3′")]


def test_inheritance_not_order_checked_unless_strict():
    parent = purpose("base", privacy_model=PrivacyModel("k-anonymity", {"k": 9}))
    child = purpose("sub")
    policy = LayeredPrivacyPolicy(purposes=(parent, child), hierarchy=(InheritanceEdge("base", "sub"),))
    assert validate(policy).is_valid
    strict = validate(policy, strict_inheritance=True)
    assert strict.rules() == [Rule.PRIVACY_MODEL_ORDER]


def test_multiple_inheritance_reported_for_programmatic_policy():
    policy = LayeredPrivacyPolicy(
        purposes=tuple(purpose(x) for x in "abc"),
        hierarchy=(InheritanceEdge("a", "c"), InheritanceEdge("b", "c")),
    )
    assert validate(policy).rules() == [Rule.MULTIPLE_INHERITANCE]


def test_report_serialization_is_deterministic():
    policy = graph_policy(["a", "b"], [("a", "b"), ("b", "a")])
    first = json.dumps(validate(policy).to_dict(), sort_keys=True)
    assert first == json.dumps(validate(policy).to_dict(), sort_keys=True)
    assert json.loads(first)["violations"][0]["witness"] == ["a", "b", "a"]


# -- closure -------------------------------------------------------------------


def dfs_reach(edges, root):
    """Oracle: plain recursive DFS set of nodes reachable from root."""
    seen = set()

    def go(n):
        if n in seen:
            return
        seen.add(n)
        for a, b in edges:
            if a == n:
                go(b)

    go(root)
    return seen


def bfs_depths(edges, root):
    depth = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for n in frontier:
            for a, b in edges:
                if a == n and b not in depth:
                    depth[b] = depth[n] + 1
                    nxt.append(b)
        frontier = nxt
    return depth


@pytest.mark.parametrize(
    "nodes, edges, root, expected",
    [
        (["a"], [], "a", ["a"]),
        (["a", "b", "c"], [("a", "b"), ("b", "c")], "a", ["a", "b", "c"]),
        (["a", "b", "c", "d"], [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")], "a", ["a", "b", "c", "d"]),
        (["a", "b", "c", "d"], [("a", "c"), ("a", "b"), ("b", "d")], "b", ["b", "d"]),
    ],
)
def test_closure_examples(nodes, edges, root, expected):
    policy = graph_policy(nodes, edges)
    assert closure(policy, root) == expected
    assert set(expected) == dfs_reach(edges, root)


def test_closure_rejects_cycles():
    with pytest.raises(CycleDetected):
        closure(graph_policy(["a", "b"], [("a", "b"), ("b", "a")]), "a")


@st.composite
def dags(draw):
    n = draw(st.integers(1, 9))
    nodes = [f"n{i}" for i in range(n)]
    pairs = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return nodes, edges


@given(dags())
def test_closure_matches_dfs_and_is_layered(dag):
    nodes, edges = dag
    policy = graph_policy(nodes, edges)
    for root in nodes:
        order = closure(policy, root)
        assert len(order) == len(set(order))
        assert set(order) == dfs_reach(edges, root)
        depth = bfs_depths(edges, root)
        assert [depth[n] for n in order] == sorted(depth[n] for n in order)


@given(dags())
def test_roots_partition_and_cover(dag):
    nodes, edges = dag
    report = validate(graph_policy(nodes, edges))
    non_roots = set(nodes) - report.roots
    assert non_roots == {b for _, b in edges}
    covered = set().union(*(dfs_reach(edges, r) for r in report.roots))
    assert covered == set(nodes)


# -- generator-based soundness -------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generated_policies_are_valid(seed):
    assert validate(random_valid_policy(random.Random(seed))).is_valid


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Mutation)))
def test_mutants_are_caught_on_mutated_edge(seed, mutation):
    rng = random.Random(seed)
    policy = random_valid_policy(rng)
    if not policy.composition:
        return
    mutant, edge = mutate(policy, mutation, rng)
    report = validate(mutant)
    assert not report.is_valid
    if mutation is Mutation.ADD_BACK_EDGE:
        (cycle,) = [v for v in report.violations if v.rule is Rule.CYCLE]
        steps = set(zip(cycle.witness, cycle.witness[1:]))
        assert (edge.parent, edge.child) in steps
    else:
        assert any(v.rule.value == mutation.value and v.edge == edge for v in report.violations)
