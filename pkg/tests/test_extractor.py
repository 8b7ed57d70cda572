from __future__ import annotations

import dataclasses
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_request_mappings, oracle_reachable
from purposegraph.errors import DuplicateName, UnknownEntry, UnknownInterface
from purposegraph.extractor import (
    Defaults,
    MethodRef,
    build_call_graph,
    extract,
    index,
    join_route,
    load_corpus,
    reachable_data,
    reachable_data_all,
    strongly_connected_components,
)
from purposegraph.lpl import DataRecipient, PrivacyModel, RecipientKind, data_set
from purposegraph.minisvc import Call, Param, parse_source
from purposegraph.servicenet import pd, validate_service
from purposegraph.synth import random_corpus
from purposegraph.validator import validate

ACCOUNT_DIR = Path(__file__).parent / "fixtures" / "account_service"

NOTIFIER = """
interface Notifier { void send(String msg); }
class EmailNotifier implements Notifier { void send(String msg) { Email e; } }
class SmsNotifier implements Notifier { void send(String msg) { new Phone(); } }
@Document class Email { @PersonalData String addr; }
@Document class Phone { @PersonalData String number; String carrier; }
@Controller("alerts") class AlertController {
    Notifier notifier;
    @RequestMapping("/alert") void alert(String msg) { notifier.send(msg); }
    @RequestMapping("/ping") void ping() { }
}
"""


def units_of(*sources: str):
    return [parse_source(text, f"f{i}.msvc") for i, text in enumerate(sources)]


def account_units():
    return load_corpus(ACCOUNT_DIR)


# -- index ---------------------------------------------------------------------


def test_index_account_entities():
    st_ = index(account_units())
    assert st_.entities == {"User": data_set(["User.email"])}
    assert st_.controllers["AccountController"].label == "account"


def test_index_unknown_interface():
    with pytest.raises(UnknownInterface):
        index(units_of("class A implements Missing { }"))


def test_index_no_documents():
    assert index(units_of("class A { void m() { } }")).entities == {}


def test_index_document_without_personal_data_is_not_an_entity():
    assert index(units_of("@Document class Log { String line; }")).entities == {}


def test_index_duplicate_names():
    with pytest.raises(DuplicateName) as info:
        index(units_of("class A { }", "interface A { }"))
    assert info.value.paths == ["f0.msvc", "f1.msvc"]
    with pytest.raises(DuplicateName):
        index(units_of("class A { B x; void x() { } }"))


@pytest.mark.parametrize(
    "prefix, path, expected",
    [("", "/register", "/register"), ("/api/", "/users", "/api/users"), ("api", "users/", "/api/users"), ("", "", "/")],
)
def test_join_route(prefix, path, expected):
    assert join_route(prefix, path) == expected


def test_class_level_prefix():
    st_ = index(units_of('@RequestMapping("/v1") class C { @RequestMapping("/x") void x() { } }'))
    assert build_call_graph(st_).entry_points == {MethodRef("C", "x"): "/v1/x"}


# -- call graph ----------------------------------------------------------------


def test_account_direct_dispatch_edge_when_repo_in_corpus():
    repo = "class UserRepo { void save(User u) { } }"
    units = account_units() + units_of(repo)
    cg = build_call_graph(index(units))
    assert (MethodRef("AccountController", "register"), MethodRef("UserRepo", "save")) in cg.edges
    assert cg.warnings == []


def test_account_library_receiver_is_a_warning():
    cg = build_call_graph(index(account_units()))
    assert cg.edges == frozenset()
    (w,) = cg.warnings
    assert (w.path, w.line, w.col) == ("AccountController.msvc", 1, 144)
    assert str(w) == "AccountController.msvc:1:144 call repo.save: type UserRepo is outside the corpus"


def test_interface_call_reaches_every_implementer():
    cg = build_call_graph(index(units_of(NOTIFIER)))
    alert = MethodRef("AlertController", "alert")
    assert sorted(b for a, b in cg.edges if a == alert) == [
        MethodRef("EmailNotifier", "send"),
        MethodRef("SmsNotifier", "send"),
    ]


def test_recursive_pair():
    src = "class A { B b; void a() { b.b(); } }\nclass B { A a; void b() { a.a(); } }"
    cg = build_call_graph(index(units_of(src)))
    assert {(MethodRef("A", "a"), MethodRef("B", "b")), (MethodRef("B", "b"), MethodRef("A", "a"))} <= cg.edges


def test_undeclared_receiver_warns():
    cg = build_call_graph(index(units_of("class A { void m() { ghost.run(); } }")))
    assert cg.edges == frozenset()
    assert "undeclared receiver 'ghost'" in cg.warnings[0].message


# -- reachability --------------------------------------------------------------


def test_account_register_reaches_user_email():
    units = account_units()
    st_ = index(units)
    cg = build_call_graph(st_)
    assert reachable_data(cg, st_, ("AccountController", "register")) == data_set(["User.email"])
    assert oracle_reachable(units)[("AccountController", "register")] == {"User.email"}


def test_notifier_reaches_both_implementations():
    units = units_of(NOTIFIER)
    st_ = index(units)
    cg = build_call_graph(st_)
    assert reachable_data(cg, st_, ("AlertController", "alert")) == data_set(["Email.addr", "Phone.number"])
    assert reachable_data(cg, st_, ("AlertController", "ping")) == frozenset()


def test_recursion_terminates_and_unions():
    src = """
    @Document class E { @PersonalData String x; }
    class A { B b; void a() { b.b(); } }
    class B { A a; void b() { a.a(); new E(); } }
    @Controller("c") class C { A a; @RequestMapping("/r") void r() { a.a(); } }
    """
    st_ = index(units_of(src))
    assert reachable_data(build_call_graph(st_), st_, ("C", "r")) == data_set(["E.x"])


def test_field_shadowed_by_local_is_not_a_touch():
    src = """
    @Document class E { @PersonalData String x; }
    class Other { void go() { } }
    @Controller("c") class C { E store; @RequestMapping("/a") void a() { Other store; store.go(); } }
    """
    st_ = index(units_of(src))
    assert reachable_data(build_call_graph(st_), st_, ("C", "a")) == frozenset()


def test_field_only_counts_when_used_as_receiver():
    src = """
    @Document class E { @PersonalData String x; void touch() { } }
    @Controller("c") class C {
        E store;
        @RequestMapping("/idle") void idle() { }
        @RequestMapping("/use") void use() { store.touch(); }
    }
    """
    st_ = index(units_of(src))
    cg = build_call_graph(st_)
    assert reachable_data(cg, st_, ("C", "idle")) == frozenset()
    assert reachable_data(cg, st_, ("C", "use")) == data_set(["E.x"])


def test_unknown_entry():
    st_ = index(account_units())
    with pytest.raises(UnknownEntry):
        reachable_data(build_call_graph(st_), st_, ("AccountController", "nope"))


def brute_sccs(adj):
    def reach(a):
        seen, stack = {a}, [a]
        while stack:
            for b in adj[stack.pop()]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        return seen

    r = {a: reach(a) for a in adj}
    return {frozenset(b for b in adj if b in r[a] and a in r[b]) for a in adj}


@given(st.dictionaries(st.integers(0, 12), st.lists(st.integers(0, 12), max_size=4), max_size=13))
def test_tarjan_matches_mutual_reachability(raw):
    adj = {n: [] for n in range(13)}
    for a, bs in raw.items():
        adj[a] = bs
    comps = strongly_connected_components(adj)
    assert {frozenset(c) for c in comps} == brute_sccs(adj)
    # sinks first: no component points to a later one
    pos = {n: i for i, c in enumerate(comps) for n in c}
    assert all(pos[b] <= pos[a] for a in adj for b in adj[a])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reachability_matches_oracle(seed):
    files = random_corpus(random.Random(seed))
    units = [parse_source(text, path) for path, text in sorted(files.items())]
    st_ = index(units)
    cg = build_call_graph(st_)
    got = {tuple(ref): {d.qualified_name for d in reachable_data(cg, st_, ref)} for ref in cg.entry_points}
    assert got == oracle_reachable(units)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_adding_a_call_never_shrinks(seed, rnd):
    files = random_corpus(random.Random(seed))
    units = [parse_source(text, path) for path, text in sorted(files.items())]
    st_ = index(units)
    before = reachable_data_all(build_call_graph(st_), st_)
    callers = sorted(st_.methods)
    if not callers:
        return
    caller = rnd.choice(callers)
    callee = rnd.choice(callers)
    cls = st_.classes[caller.cls]
    method = st_.methods[caller]
    pname = "addedRecv"
    new_method = dataclasses.replace(
        method,
        params=method.params + (Param(callee.cls, pname),),
        body=method.body + (Call(pname, callee.method),),
    )
    new_cls = dataclasses.replace(cls, methods=tuple(new_method if m is method else m for m in cls.methods))
    units = [
        dataclasses.replace(u, classes=tuple(new_cls if c is cls else c for c in u.classes)) for u in units
    ]
    st2 = index(units)
    cg2 = build_call_graph(st2)
    assert (caller, callee) in cg2.edges
    after = reachable_data_all(cg2, st2)
    assert all(after[ref] >= data for ref, data in before.items())


# -- generation ----------------------------------------------------------------


def test_generate_account_service():
    result = extract(account_units(), "account_service")
    assert result.root_purpose.id == "account_service"
    assert [p.id for p in result.controller_purposes] == ["AccountController"]
    assert [p.id for p in result.endpoint_purposes] == ["AccountController/register"]
    assert result.endpoint_purposes[0].name == "register"
    assert result.endpoint_purposes[0].data == data_set(["User.email"])
    assert result.root_purpose.data == data_set(["User.email"])
    s = result.stats
    assert (s.n_controllers, s.n_endpoints, s.endpoints_per_controller["mean"]) == (1, 1, 1.0)
    assert (s.n_controllers_with_pd, s.n_endpoints_under_them, s.n_entity_types) == (1, 1, 1)
    report = validate(result.policy())
    assert report.is_valid and report.roots == {"account_service"}


def test_generate_empty_corpus():
    result = extract([], "empty")
    policy = result.policy()
    assert [p.id for p in policy.purposes] == ["empty"]
    assert result.root_purpose.data == frozenset()
    assert policy.composition == ()
    assert result.stats.n_controllers == 0
    assert result.stats.endpoints_per_controller == {"min": None, "max": None, "mean": None}


def test_services_mirror_purposes_and_are_covered():
    from purposegraph.servicenet import check_coverage

    result = extract(units_of(NOTIFIER), "alerts")
    tree = result.services
    assert validate_service(tree) == []
    names = {s.name for s in tree.walk()}
    assert names == {p.id for p in result.policy().purposes}
    assert {(g.service, g.purpose) for g in result.gov} == {(n, n) for n in names}
    for p in result.endpoint_purposes:
        (ws,) = [s for s in tree.walk() if s.name == p.id]
        assert pd(ws).data == p.data
    assert check_coverage(result.policy(), [tree], result.gov).ok


def test_controller_without_personal_data_kept_but_not_counted():
    result = extract(units_of(NOTIFIER, '@Controller("h") class Health { @RequestMapping("/h") void h() { } }'), "x")
    assert "Health" in {p.id for p in result.controller_purposes}
    assert result.stats.n_controllers == 2
    assert result.stats.n_controllers_with_pd == 1
    assert result.stats.n_endpoints_under_them == 2


def test_route_collision_gets_method_suffix():
    src = '@Controller("c") class C { @RequestMapping("/x") void a() { } @RequestMapping("x") void b() { } }'
    ids = [p.id for p in extract(units_of(src), "n").endpoint_purposes]
    assert ids == ["C/x#a", "C/x#b"]


def test_root_id_collision():
    result = extract(units_of('@Controller("c") class C { @RequestMapping("/x") void a() { } }'), "C")
    assert result.root_purpose.id == "C#root"
    assert validate(result.policy()).is_valid


def test_defaults_fill_undecidable_fields():
    d = Defaults(
        opt_out=True,
        required=False,
        privacy_model=PrivacyModel("k-anonymity", {"k": 5}),
        recipients=frozenset({DataRecipient("ops", RecipientKind.PROCESSOR)}),
    )
    result = extract(account_units(), "acct", d)
    for p in result.policy().purposes:
        assert (p.opt_out, p.required) == (True, False)
        assert p.recipients == {DataRecipient("ops", RecipientKind.PROCESSOR)}
    assert validate(result.policy()).is_valid


def test_default_recipient_is_corpus_controller():
    p = extract(account_units(), "acct").root_purpose
    assert p.recipients == {DataRecipient("acct", RecipientKind.CONTROLLER)}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generated_corpora_extract_valid_and_sound(seed):
    files = random_corpus(random.Random(seed))
    units = [parse_source(text, path) for path, text in sorted(files.items())]
    result = extract(units, "gen")
    assert validate(result.policy()).is_valid
    assert len(result.endpoint_purposes) == count_request_mappings(units)
