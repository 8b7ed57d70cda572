"""Seeded generators for test corpora, policies and service trees.

Everything here takes a ``random.Random`` so results are reproducible from a
seed.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import random
import string

from .lpl import (
    DataElement,
    DataRecipient,
    InheritanceEdge,
    LayeredPrivacyPolicy,
    PrivacyModel,
    Purpose,
    RecipientKind,
    Retention,
    RetentionType,
    UnderlyingPurposeEdge,
    retention_compare,
    Ordering,
)
from .minisvc import (
    Annotation,
    Call,
    ClassDecl,
    CompilationUnit,
    FieldDecl,
    InterfaceDecl,
    LocalDecl,
    MethodDecl,
    MethodSig,
    New,
    Param,
    format_unit,
)
from .servicenet import ServiceNet, Transition, WebService

GRID_DATES = [dt.date(2023, 1, 1), dt.date(2023, 6, 30), dt.date(2024, 1, 1), dt.date(2024, 6, 30), dt.date(2025, 1, 1)]


def retention_grid() -> list[Retention]:
    """Every retention over the 3 types x 5 dates grid (plus undated forms), ascending."""
    grid = [Retention.fixed(d) for d in GRID_DATES]
    grid += [Retention.after_purpose(d) for d in GRID_DATES]
    grid += [Retention.after_purpose(), Retention.indefinite()]
    return grid


DATA_VOCAB = [DataElement(f"Ent{e}", f"f{k}") for e in "ABCDE" for k in range(4)]
RECIPIENT_VOCAB = [
    DataRecipient("acme", RecipientKind.CONTROLLER),
    DataRecipient("mailer", RecipientKind.PROCESSOR),
    DataRecipient("hosting", RecipientKind.PROCESSOR),
    DataRecipient("ads", RecipientKind.THIRD_PARTY),
]
_MODELS = {"k-anonymity": ("k", 1), "l-diversity": ("l", 1), "t-closeness": ("t", -1)}


# --------------------------------------------------------------------------
# policies
# --------------------------------------------------------------------------


def random_valid_policy(rng: random.Random, max_purposes: int = 12) -> LayeredPrivacyPolicy:
    """A policy that satisfies every composition constraint by construction.

    Edges only go from lower to higher index, so the graph is a DAG with at
    least one edge. Data and recipients are built bottom-up as unions,
    retention and privacy models top-down within the bounds set by parents.
    """
    n = rng.randint(2, max_purposes)
    ids = [f"p{i}" for i in range(n)]
    edges = {(i, j) for j in range(1, n) for i in range(j) if rng.random() < 0.3}
    if not edges:
        edges.add((0, 1))
    parents = {j: sorted(i for i, jj in edges if jj == j) for j in range(n)}
    children = {i: sorted(j for ii, j in edges if ii == i) for i in range(n)}

    comp = list(range(n))

    def find(x: int) -> int:
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for i, j in edges:
        comp[find(i)] = find(j)
    flags = {}
    models = {}
    for root in {find(i) for i in range(n)}:
        flags[root] = (rng.random() < 0.5, rng.random() < 0.5)
        models[root] = rng.choice([None, "k-anonymity", "l-diversity", "t-closeness"])

    data: dict[int, set] = {}
    recipients: dict[int, set] = {}
    for i in reversed(range(n)):
        data[i] = set().union(*(data[c] for c in children[i])) | set(rng.sample(DATA_VOCAB, rng.randint(0, 3)))
        recipients[i] = set().union(*(recipients[c] for c in children[i])) | set(
            rng.sample(RECIPIENT_VOCAB, rng.randint(0, 2))
        )
        if not recipients[i]:
            recipients[i].add(rng.choice(RECIPIENT_VOCAB))

    grid = retention_grid()
    retention: dict[int, int] = {}
    pm: dict[int, PrivacyModel | None] = {}
    for j in range(n):
        bound = min((retention[p] for p in parents[j]), default=len(grid) - 1)
        retention[j] = rng.randint(0, bound)
        name = models[find(j)]
        parent_models = [pm[p] for p in parents[j] if pm[p] is not None]
        if name is None or (not parent_models and rng.random() < 0.4):
            pm[j] = None
            continue
        attr, sign = _MODELS[name]
        if sign > 0:
            base = max((m.as_dict()[attr] for m in parent_models), default=rng.randint(2, 5))
            value = base + rng.randint(0, 3)
        else:
            base = min((m.as_dict()[attr] for m in parent_models), default=rng.choice([0.5, 0.25]))
            value = base * rng.choice([1, 0.5])
        pm[j] = PrivacyModel(name, {attr: value})

    purposes = []
    for i in range(n):
        opt_out, required = flags[find(i)]
        purposes.append(
            Purpose(
                id=ids[i],
                name=f"purpose {i}",
                opt_out=opt_out,
                required=required,
                descr=f"generated purpose {i}",
                recipients=frozenset(recipients[i]),
                retention=grid[retention[i]],
                privacy_model=pm[i],
                data=frozenset(data[i]),
            )
        )
    hierarchy = []
    for j in range(1, n):
        if rng.random() < 0.2:
            hierarchy.append(InheritanceEdge(ids[rng.randrange(j)], ids[j]))
    return LayeredPrivacyPolicy(
        version="1.0",
        name=f"generated-{n}",
        lang="en",
        pp_uri="https://example.org/privacy",
        purposes=tuple(purposes),
        composition=tuple(UnderlyingPurposeEdge(ids[i], ids[j]) for i, j in edges),
        hierarchy=tuple(hierarchy),
    )


class Mutation(enum.Enum):
    ADD_CHILD_DATUM = "DataSubset"
    REMOVE_PARENT_RECIPIENT = "RecipientSubset"
    RAISE_CHILD_RETENTION = "RetentionOrder"
    WEAKEN_CHILD_MODEL = "PrivacyModelOrder"
    FLIP_CHILD_REQUIRED = "RequiredMismatch"
    FLIP_CHILD_OPT_OUT = "OptOutMismatch"
    ADD_BACK_EDGE = "Cycle"


def mutate(
    policy: LayeredPrivacyPolicy, mutation: Mutation, rng: random.Random
) -> tuple[LayeredPrivacyPolicy, UnderlyingPurposeEdge]:
    """Break exactly one constraint on a randomly chosen composition edge.

    Returns the mutant and the edge the mutation targets.
    """
    edge = rng.choice(policy.composition)
    parent, child = policy.purpose(edge.parent), policy.purpose(edge.child)
    rep = dataclasses.replace
    if mutation is Mutation.ADD_CHILD_DATUM:
        return policy.replace_purpose(rep(child, data=child.data | {DataElement("Mutant", "extra")})), edge
    if mutation is Mutation.REMOVE_PARENT_RECIPIENT:
        victim = min(child.recipients, key=DataRecipient.sort_key)
        return policy.replace_purpose(rep(parent, recipients=parent.recipients - {victim})), edge
    if mutation is Mutation.RAISE_CHILD_RETENTION:
        if parent.retention.rtype is not RetentionType.INDEFINITE:
            return policy.replace_purpose(rep(child, retention=Retention.indefinite())), edge
        mutant = policy.replace_purpose(rep(parent, retention=Retention.fixed(dt.date(1970, 1, 1))))
        if retention_compare(child.retention, Retention.fixed(dt.date(1970, 1, 1))) is not Ordering.GREATER:
            mutant = mutant.replace_purpose(rep(child, retention=Retention.after_purpose()))
        return mutant, edge
    if mutation is Mutation.WEAKEN_CHILD_MODEL:
        mutant = policy.replace_purpose(rep(child, privacy_model=None))
        if parent.privacy_model is None:
            mutant = mutant.replace_purpose(rep(parent, privacy_model=PrivacyModel("k-anonymity", {"k": 2})))
        return mutant, edge
    if mutation is Mutation.FLIP_CHILD_REQUIRED:
        return policy.replace_purpose(rep(child, required=not child.required)), edge
    if mutation is Mutation.FLIP_CHILD_OPT_OUT:
        return policy.replace_purpose(rep(child, opt_out=not child.opt_out)), edge
    back = UnderlyingPurposeEdge(edge.child, edge.parent)
    return rep(policy, composition=policy.composition + (back,)), back


def _text(rng: random.Random, nonempty: bool = True) -> str:
    alphabet = string.ascii_letters + string.digits + " -_.éü√\"\\/"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(1 if nonempty else 0, 10)))


def random_policy(rng: random.Random, depth: int = 0) -> LayeredPrivacyPolicy:
    """Arbitrary well-formed policy (not necessarily valid) for round-trips."""
    n = rng.randint(0, 8)
    ids = sorted({_text(rng) for _ in range(n)})
    purposes = []
    for pid in ids:
        rtype = rng.choice(list(RetentionType))
        when = None
        if rtype is RetentionType.FIXED_DATE or (rtype is RetentionType.AFTER_PURPOSE and rng.random() < 0.5):
            when = dt.date(2000, 1, 1) + dt.timedelta(days=rng.randint(0, 20000))
        pm = None
        if rng.random() < 0.5:
            pm = PrivacyModel(
                rng.choice(["k-anonymity", "t-closeness", "custom"]),
                {rng.choice("abcdkt") + str(i): rng.choice([rng.randint(-5, 50), rng.random()]) for i in range(rng.randint(0, 3))},
            )
        purposes.append(
            Purpose(
                id=pid,
                name=_text(rng),
                opt_out=rng.random() < 0.5,
                required=rng.random() < 0.5,
                descr=_text(rng, nonempty=False),
                recipients=frozenset(rng.sample(RECIPIENT_VOCAB, rng.randint(0, 3))),
                retention=Retention(rtype, when),
                privacy_model=pm,
                data=frozenset(rng.sample(DATA_VOCAB, rng.randint(0, 4))),
            )
        )
    composition = set()
    hierarchy = {}
    for _ in range(rng.randint(0, 2 * n)) if n >= 2 else ():
        a, b = rng.sample(ids, 2)
        composition.add(UnderlyingPurposeEdge(a, b))
        if rng.random() < 0.3:
            hierarchy.setdefault(b, InheritanceEdge(a, b))
    underlying = ()
    if depth < 2 and rng.random() < 0.3:
        underlying = tuple(random_policy(rng, depth + 1) for _ in range(rng.randint(1, 2)))
    return LayeredPrivacyPolicy(
        version=rng.choice(["1.0", "2.1", ""]),
        name=_text(rng, nonempty=False),
        lang=rng.choice(["en", "fi", "de-AT", "en-GB"]),
        pp_uri=rng.choice(["", "https://example.org/p", "urn:x:" + _text(rng)]),
        underlying_policies=underlying,
        purposes=tuple(purposes),
        composition=tuple(composition),
        hierarchy=tuple(hierarchy.values()),
    )


# --------------------------------------------------------------------------
# MiniSvc corpora
# --------------------------------------------------------------------------

_LIB_TYPES = ["String", "Logger", "HttpClient"]


def random_corpus(
    rng: random.Random,
    max_classes: int = 30,
    max_methods: int = 8,
    max_implementers: int = 3,
) -> dict[str, str]:
    """Random MiniSvc corpus as ``{relative path: source}``.

    Includes entities (some without personal fields), interfaces with up to
    ``max_implementers`` implementations, service classes, controllers,
    library calls and arbitrary (possibly recursive) call structure.
    """
    n_entities = rng.randint(0, 4)
    n_ifaces = rng.randint(0, 3)
    impl_counts = [rng.randint(0, max_implementers) for _ in range(n_ifaces)]
    budget = max_classes - n_entities - sum(impl_counts)
    while budget < 1:
        i = max(range(n_ifaces), key=lambda k: impl_counts[k])
        impl_counts[i] -= 1
        budget += 1
    n_ctl = rng.randint(0, min(6, budget))
    n_svc = rng.randint(0, budget - n_ctl)

    entities = []
    for e in range(n_entities):
        fields = tuple(
            FieldDecl("String", f"attr{k}", (Annotation("PersonalData"),) if rng.random() < 0.6 else ())
            for k in range(rng.randint(1, 3))
        )
        annotations = (Annotation("Document"),) if rng.random() < 0.85 else ()
        entities.append(ClassDecl(f"Ent{e}", annotations, None, fields, ()))

    iface_methods = {f"Port{i}": [f"op{k}" for k in range(rng.randint(1, 3))] for i in range(n_ifaces)}
    class_methods: dict[str, list[str]] = {}
    impl_of: dict[str, str] = {}
    for i, count in enumerate(impl_counts):
        for j in range(count):
            name = f"Port{i}Impl{j}"
            impl_of[name] = f"Port{i}"
            ops = [m for m in iface_methods[f"Port{i}"] if rng.random() < 0.9]
            extra = [f"help{k}" for k in range(rng.randint(0, 2))]
            class_methods[name] = (ops + extra)[:max_methods]
    for s in range(n_svc):
        class_methods[f"Svc{s}"] = [f"run{k}" for k in range(rng.randint(1, max_methods))]
    controllers = [f"Ctl{c}" for c in range(n_ctl)]
    for c in controllers:
        class_methods[c] = [f"handle{k}" for k in range(rng.randint(1, max_methods))]
    for e in entities:
        class_methods[e.name] = []

    types = [e.name for e in entities] + list(iface_methods) + list(class_methods) + _LIB_TYPES

    def method_names_of(t: str) -> list[str]:
        if t in iface_methods:
            return iface_methods[t]
        return class_methods.get(t, []) or ["save", "load"]

    def build_class(name: str) -> ClassDecl:
        fields = tuple(
            FieldDecl(rng.choice(types), f"dep{k}") for k in range(rng.randint(0, 3))
        )
        methods = []
        for m in class_methods[name]:
            params = tuple(Param(rng.choice(types), f"arg{k}") for k in range(rng.randint(0, 2)))
            scope = {p.name: p.type for p in params} | {f.name: f.type for f in fields}
            body = []
            for k in range(rng.randint(0, 6)):
                roll = rng.random()
                if roll < 0.25:
                    t = rng.choice(types)
                    body.append(LocalDecl(t, f"v{k}"))
                    scope[f"v{k}"] = t
                elif roll < 0.35 and entities:
                    body.append(New(rng.choice(entities).name))
                elif roll < 0.95 and scope:
                    recv = rng.choice(sorted(scope))
                    body.append(Call(recv, rng.choice(method_names_of(scope[recv])), tuple(rng.sample(sorted(scope), min(len(scope), rng.randint(0, 2))))))
                else:
                    body.append(Call("ghost", "call"))
            annotations: tuple[Annotation, ...] = ()
            if name.startswith("Ctl") and rng.random() < 0.8:
                annotations = (Annotation("RequestMapping", rng.choice(["/", "/a", "/b", f"/{m}", f"/{m}/x", ""])),)
            methods.append(MethodDecl("void", m, annotations, params, tuple(body)))
        annotations = ()
        if name.startswith("Ctl"):
            annotations = tuple(
                a
                for a, keep in (
                    (Annotation("Controller", name.lower()), rng.random() < 0.7),
                    (Annotation("RequestMapping", rng.choice(["/api", "api/", "/v1/"])), rng.random() < 0.4),
                )
                if keep
            )
        return ClassDecl(name, annotations, impl_of.get(name), fields, tuple(methods))

    decls: list = list(entities)
    decls += [build_class(n) for n in class_methods if not n.startswith("Ent")]
    decls += [InterfaceDecl(n, tuple(MethodSig("void", m, ()) for m in ms)) for n, ms in iface_methods.items()]
    rng.shuffle(decls)
    return _to_files(rng, decls)


def _to_files(rng: random.Random, decls: list) -> dict[str, str]:
    """Pack declarations into files of one to three declarations."""
    files = {}
    i = 0
    while decls:
        size = rng.randint(1, 3)
        chunk, decls = decls[:size], decls[size:]
        unit = CompilationUnit(
            f"src/file{i}.msvc",
            tuple(d for d in chunk if isinstance(d, ClassDecl)),
            tuple(d for d in chunk if isinstance(d, InterfaceDecl)),
        )
        files[unit.path] = format_unit(unit)
        i += 1
    return files


def shaped_corpus(
    seed: int,
    controllers: int = 30,
    endpoints: int = 245,
    max_endpoints: int = 51,
    without_personal_data: int = 8,
    entity_types: int = 19,
) -> dict[str, str]:
    """Deterministic corpus with a prescribed controller/endpoint shape.

    One controller gets ``max_endpoints`` endpoints, at least one gets a
    single endpoint, and the rest share the remainder. The
    ``without_personal_data`` controllers with the fewest endpoints never
    reach an entity.
    """
    rng = random.Random(seed)
    if not (controllers >= 2 and controllers - 1 + max_endpoints <= endpoints <= max_endpoints * controllers):
        raise ValueError("infeasible controller/endpoint shape")
    counts = [max_endpoints, 1] + [1] * (controllers - 2)
    remaining = endpoints - sum(counts)
    while remaining:
        i = rng.randrange(2, controllers)
        if counts[i] < max_endpoints:
            counts[i] += 1
            remaining -= 1
    rng.shuffle(counts)

    entities = [
        ClassDecl(
            f"Entity{e:02d}",
            (Annotation("Document"),),
            None,
            tuple(
                FieldDecl("String", f"field{k}", (Annotation("PersonalData"),) if k < 2 else ())
                for k in range(3)
            ),
        )
        for e in range(entity_types)
    ]
    repos = [
        ClassDecl(
            f"Repo{e:02d}",
            (),
            None,
            (),
            (
                MethodDecl("void", "save", (), (Param(f"Entity{e:02d}", "item"),)),
                MethodDecl("void", "count", ()),
            ),
        )
        for e in range(entity_types)
    ]
    plain_ids = set(sorted(range(controllers), key=lambda c: (counts[c], c))[:without_personal_data])
    decls: list = entities + repos
    for c, count in enumerate(counts):
        name = f"Controller{c:02d}"
        plain = c in plain_ids
        fields = tuple(FieldDecl(f"Repo{e:02d}", f"repo{e:02d}") for e in range(entity_types))
        methods = []
        for k in range(count):
            repo = f"repo{rng.randrange(entity_types):02d}"
            body = (Call(repo, "count"),) if plain else (Call(repo, "save"), Call(repo, "count"))
            methods.append(
                MethodDecl("void", f"endpoint{k:02d}", (Annotation("RequestMapping", f"/e{k:02d}"),), (), body)
            )
        decls.append(
            ClassDecl(
                name,
                (Annotation("Controller", name.lower()), Annotation("RequestMapping", f"/c{c:02d}")),
                None,
                fields,
                tuple(methods),
            )
        )
    return {
        f"src/{d.name}.msvc": format_unit(CompilationUnit(f"src/{d.name}.msvc", (d,), ())) for d in decls
    }


# --------------------------------------------------------------------------
# service trees
# --------------------------------------------------------------------------


def random_net(rng: random.Random, prefix: str) -> ServiceNet:
    """A net of one to three transitions in sequence, optionally with a parallel branch."""
    n = rng.randint(0, 3)
    transitions = [
        Transition(f"{prefix}t{k}", f"step {k}", frozenset(rng.sample(DATA_VOCAB, rng.randint(0, 3))))
        for k in range(n)
    ]
    net = ServiceNet.sequence(*transitions)
    if n and rng.random() < 0.3:
        branch = Transition(f"{prefix}b", "branch", frozenset(rng.sample(DATA_VOCAB, rng.randint(0, 2))))
        net = ServiceNet(
            net.places,
            net.transitions + (branch,),
            net.arcs | {(net.input, branch.id), (branch.id, net.output)},
            net.input,
            net.output,
        )
    return net


def random_service_tree(rng: random.Random, max_depth: int = 4) -> WebService:
    counter = iter(range(10**6))

    def build(depth: int) -> WebService:
        name = f"S{next(counter)}"
        n_children = rng.randint(0, 3) if depth < max_depth else 0
        components = tuple(build(depth + 1) for _ in range(n_children))
        net = random_net(rng, name) if not components or rng.random() < 0.4 else None
        return WebService(name, f"service {name}", "host", f"/{name}", components, net)

    return build(1)
