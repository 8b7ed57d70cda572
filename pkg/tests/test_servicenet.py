from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purposegraph.errors import ServiceModelError, UnknownPurpose, UnknownService
from purposegraph.lpl import DataRecipient, LayeredPrivacyPolicy, Purpose, RecipientKind, data_set, dumps_canonical
from purposegraph.servicenet import (
    GovEdge,
    ServiceNet,
    Transition,
    WebService,
    check_coverage,
    parse_service_model,
    pd,
    service_model_to_dict,
    validate_net,
    validate_service,
)
from purposegraph.synth import random_service_tree


def leaf(name: str, *data_sets: list[str], **kw) -> WebService:
    transitions = [Transition(f"t{k}", f"step {k}", data_set(ds)) for k, ds in enumerate(data_sets, 1)]
    return WebService(name, net=ServiceNet.sequence(*transitions), **kw)


def flatten_union(ws: WebService) -> frozenset:
    """Oracle: recursive walk collecting every transition's data."""
    out = set()
    if ws.net is not None:
        for t in ws.net.transitions:
            out.update(t.data)
    for c in ws.components:
        out.update(flatten_union(c))
    return frozenset(out)


# -- nets ----------------------------------------------------------------------


def test_minimal_net_is_ok():
    assert validate_net(ServiceNet.sequence(Transition("t1"))) == []


def test_register_subscribe_confirm_net_is_ok():
    net = ServiceNet.sequence(
        Transition("t1", "register customer"),
        Transition("t2", "create subscription"),
        Transition("t3", "send confirmation email"),
    )
    assert validate_net(net) == []
    assert ("i", "t1") in net.arcs and ("t3", "o") in net.arcs


def test_place_to_place_arc_is_non_bipartite():
    net = ServiceNet({"i", "o"}, (), {("i", "o")}, "i", "o")
    errors = validate_net(net)
    assert any("non-bipartite arc" in e for e in errors)


@pytest.mark.parametrize(
    "net, fragment",
    [
        (ServiceNet({"i"}, (), (), "i", "i"), "coincide"),
        (ServiceNet({"i", "o"}, (), (), "x", "o"), "input place"),
        (ServiceNet({"i", "o"}, (Transition("t"),), {("i", "t")}, "i", "o"), "not on a path"),
        (ServiceNet({"i", "o"}, (Transition("t"), Transition("u")), {("i", "t"), ("t", "u")}, "i", "o"), "non-bipartite"),
        (ServiceNet({"i", "o"}, (), {("i", "zz")}, "i", "o"), "unknown node"),
    ],
)
def test_net_errors(net, fragment):
    assert any(fragment in e for e in validate_net(net))


def test_leaf_without_net_is_invalid():
    assert validate_service(WebService("bare")) != []
    assert validate_service(WebService("comp", components=(leaf("x", []),))) == []


# -- pd ------------------------------------------------------------------------


def test_pd_leaf_union():
    ws = leaf("signup", ["C.name", "C.email"], ["C.plan"], ["C.email"])
    assert pd(ws).data == data_set(["C.name", "C.email", "C.plan"])


def test_pd_composite_without_own_net():
    ws = WebService("S", components=(leaf("S1", ["X.a"]), leaf("S2", ["X.b"])))
    assert pd(ws).data == data_set(["X.a", "X.b"])


def test_pd_empty_net():
    assert pd(WebService("e", net=ServiceNet.sequence())).data == frozenset()


def test_pd_metadata_is_declared_not_derived():
    r = DataRecipient("mailer", RecipientKind.PROCESSOR)
    child = leaf("c", ["X.a"], recipients={r}, underlying_policies={"vendor"})
    parent = WebService("p", components=(child,))
    assert pd(child).recipients == {r}
    assert pd(parent).recipients == frozenset()
    assert pd(parent).underlying_policies == frozenset()


def test_pd_component_cycle_is_an_error():
    a = WebService("a", components=())
    b = WebService("b", components=(a,))
    object.__setattr__(a, "components", (b,))
    with pytest.raises(ServiceModelError):
        pd(a)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pd_matches_oracle_and_is_monotone(seed):
    root = random_service_tree(random.Random(seed))
    assert pd(root).data == flatten_union(root)
    for ws in root.walk():
        for child in ws.components:
            assert pd(ws).data >= pd(child).data


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_pd_is_order_independent(seed, shuffler):
    root = random_service_tree(random.Random(seed))

    def permuted(ws):
        comps = [permuted(c) for c in ws.components]
        shuffler.shuffle(comps)
        net = ws.net
        if net is not None:
            ts = list(net.transitions)
            shuffler.shuffle(ts)
            net = ServiceNet(net.places, tuple(ts), net.arcs, net.input, net.output)
        return WebService(ws.name, components=tuple(comps), net=net)

    assert pd(permuted(root)).data == pd(root).data


# -- coverage ------------------------------------------------------------------


def policy_with(*purposes: Purpose, upp=()) -> LayeredPrivacyPolicy:
    return LayeredPrivacyPolicy(purposes=purposes, underlying_policies=tuple(upp))


def test_covered():
    policy = policy_with(Purpose("p", "P", data=data_set(["U.email", "U.name"])))
    report = check_coverage(policy, [leaf("s", ["U.email"])], [GovEdge("s", "p")])
    assert report.ok and report.uncovered == [] and report.ungoverned == []


def test_uncovered_reports_missing_data():
    policy = policy_with(Purpose("p", "P", data=data_set(["U.email"])))
    report = check_coverage(policy, [leaf("s", ["U.email", "U.ssn"])], [GovEdge("s", "p")])
    assert report.uncovered == ["s"]
    (entry,) = report.services
    assert entry.missing_data == ["U.ssn"]
    assert entry.closest == "p"


def test_ungoverned_is_flagged():
    policy = policy_with(Purpose("p", "P"))
    report = check_coverage(policy, [leaf("s", [])], [])
    assert report.ungoverned == ["s"]
    assert not report.ok


def test_components_need_their_own_gov_edges():
    policy = policy_with(Purpose("p", "P", data=data_set(["X.a"])))
    root = WebService("root", components=(leaf("c", ["X.a"]),))
    report = check_coverage(policy, [root], [GovEdge("root", "p")])
    assert report.ungoverned == ["c"]
    report = check_coverage(policy, [root], [GovEdge("root", "p"), GovEdge("c", "p")])
    assert report.ok


def test_single_purpose_must_cover():
    # two governing purposes each covering half do not add up
    policy = policy_with(Purpose("a", "A", data=data_set(["X.a"])), Purpose("b", "B", data=data_set(["X.b"])))
    report = check_coverage(policy, [leaf("s", ["X.a", "X.b"])], [GovEdge("s", "a"), GovEdge("s", "b")])
    assert report.uncovered == ["s"]


def test_recipients_must_be_covered():
    r = DataRecipient("ads", RecipientKind.THIRD_PARTY)
    policy = policy_with(Purpose("p", "P"))
    report = check_coverage(policy, [leaf("s", [], recipients={r})], [GovEdge("s", "p")])
    assert report.services[0].missing_recipients == ["ads(ThirdParty)"]


def test_unknown_underlying_policy_uncovers():
    policy = policy_with(Purpose("p", "P"), upp=[LayeredPrivacyPolicy(name="vendor")])
    ok = check_coverage(policy, [leaf("s", [], underlying_policies={"vendor"})], [GovEdge("s", "p")])
    bad = check_coverage(policy, [leaf("s", [], underlying_policies={"other"})], [GovEdge("s", "p")])
    assert ok.ok and bad.uncovered == ["s"]


def test_gov_reference_errors():
    policy = policy_with(Purpose("p", "P"))
    with pytest.raises(UnknownPurpose):
        check_coverage(policy, [leaf("s", [])], [GovEdge("s", "nope")])
    with pytest.raises(UnknownService):
        check_coverage(policy, [leaf("s", [])], [GovEdge("ghost", "p")])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.sampled_from(["EntA.f0", "EntB.f1", "EntC.f2", "New.x"])))
def test_coverage_is_monotone_in_purpose_data(seed, extra):
    rng = random.Random(seed)
    root = random_service_tree(rng)
    names = [s.name for s in root.walk()]
    data = frozenset(rng.sample(sorted(pd(root).data, key=str), k=len(pd(root).data) // 2))
    base = Purpose("p", "P", data=data)
    gov = [GovEdge(n, "p") for n in names]
    before = check_coverage(policy_with(base), [root], gov)
    after = check_coverage(policy_with(Purpose("p", "P", data=data | data_set(extra))), [root], gov)
    assert set(after.uncovered) <= set(before.uncovered)


# -- service model file --------------------------------------------------------


def test_service_model_round_trip():
    tree = WebService("root", "r", "host", "/", (leaf("a", ["X.a"]), leaf("b", ["X.b"])))
    doc = service_model_to_dict([tree], [GovEdge("a", "p")])
    model = parse_service_model(dumps_canonical(doc))
    assert [s.name for s in model.top_level] == ["root"]
    assert pd(model.top_level[0]).data == data_set(["X.a", "X.b"])
    assert model.gov == [GovEdge("a", "p")]


def test_service_model_rejects_component_cycles():
    doc = {
        "services": [
            {"name": "a", "desc": "", "loc": "", "url": "", "components": ["b"], "recipients": [], "underlyingPolicies": []},
            {"name": "b", "desc": "", "loc": "", "url": "", "components": ["a"], "recipients": [], "underlyingPolicies": []},
        ],
        "gov": [],
    }
    with pytest.raises(ServiceModelError):
        parse_service_model(dumps_canonical(doc))
