"""Static extraction of composed purposes from MiniSvc source.

Pipeline: :func:`index` the parsed units into a symbol table,
:func:`build_call_graph` over it, compute the personal data reachable from
every ``@RequestMapping`` entry-point, and :func:`generate` a three-level
purpose tree (root -> controllers -> endpoints) together with the matching
web-service tree and gov mapping.

A method *touches* the personal data of an ``@Document`` entity ``E`` when it

* constructs ``E`` (``new E();``),
* declares a parameter or local of type ``E``, or
* uses a field of its class with type ``E`` as a call receiver.

This is a flow-insensitive approximation: it defines what the analysis can
and cannot see. Calls through an interface are resolved pessimistically to
every implementation. Calls on receivers whose type is not declared in the
corpus (libraries) produce no edge, only a warning.
"""

from __future__ import annotations

import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple

from .errors import DuplicateName, SchemaError, UnknownEntry, UnknownInterface
from .lpl import (
    DataElement,
    DataRecipient,
    LayeredPrivacyPolicy,
    PrivacyModel,
    Purpose,
    RecipientKind,
    Retention,
    UnderlyingPurposeEdge,
    policy_to_dict,
    privacy_model_from_dict,
    recipient_from_dict,
    retention_from_dict,
)
from .minisvc import Call, ClassDecl, CompilationUnit, InterfaceDecl, LocalDecl, MethodDecl, New, parse_source
from .servicenet import GovEdge, ServiceNet, Transition, WebService, service_model_to_dict

DOCUMENT = "Document"
PERSONAL_DATA = "PersonalData"
CONTROLLER = "Controller"
REQUEST_MAPPING = "RequestMapping"


class MethodRef(NamedTuple):
    cls: str
    method: str

    def __str__(self) -> str:
        return f"{self.cls}.{self.method}"


@dataclass(frozen=True)
class ExtractionWarning:
    path: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col} {self.message}"


@dataclass(frozen=True)
class InterfaceInfo:
    decl: InterfaceDecl
    implementers: frozenset[str]

    @property
    def signatures(self):
        return self.decl.signatures


@dataclass(frozen=True)
class ControllerInfo:
    label: str
    prefix: str


@dataclass
class SymbolTable:
    classes: dict[str, ClassDecl] = field(default_factory=dict)
    interfaces: dict[str, InterfaceInfo] = field(default_factory=dict)
    entities: dict[str, frozenset[DataElement]] = field(default_factory=dict)
    controllers: dict[str, ControllerInfo] = field(default_factory=dict)
    methods: dict[MethodRef, MethodDecl] = field(default_factory=dict)
    paths: dict[str, str] = field(default_factory=dict)


def join_route(prefix: str, path: str) -> str:
    """Concatenate a class-level prefix and a method path, normalizing '/'."""
    segments = [s for s in f"{prefix}/{path}".split("/") if s]
    return "/" + "/".join(segments)


def index(units: Iterable[CompilationUnit]) -> SymbolTable:
    st = SymbolTable()
    seen: dict[str, list[str]] = {}
    decls: list[tuple[str, str, Any]] = []
    for unit in units:
        for decl in (*unit.classes, *unit.interfaces):
            seen.setdefault(decl.name, []).append(unit.path)
            decls.append((decl.name, unit.path, decl))
    for name, paths in sorted(seen.items()):
        if len(paths) > 1:
            raise DuplicateName(name, sorted(paths))

    for name, path, decl in decls:
        st.paths[name] = path
        if isinstance(decl, InterfaceDecl):
            sig_names = [s.name for s in decl.signatures]
            _check_unique(name, sig_names, path)
            st.interfaces[name] = InterfaceInfo(decl, frozenset())
        else:
            _check_unique(name, [f.name for f in decl.fields] + [m.name for m in decl.methods], path)
            st.classes[name] = decl

    implementers: dict[str, set[str]] = {name: set() for name in st.interfaces}
    for name, cls in sorted(st.classes.items()):
        if cls.implements is not None:
            if cls.implements not in st.interfaces:
                raise UnknownInterface(cls.implements, name)
            implementers[cls.implements].add(name)
        for m in cls.methods:
            st.methods[MethodRef(name, m.name)] = m
        if cls.annotation(DOCUMENT) is not None:
            personal = frozenset(
                DataElement(name, f.name) for f in cls.fields if any(a.name == PERSONAL_DATA for a in f.annotations)
            )
            if personal:
                st.entities[name] = personal
        ctrl = cls.annotation(CONTROLLER)
        if ctrl is not None or any(m.annotation(REQUEST_MAPPING) for m in cls.methods):
            mapping = cls.annotation(REQUEST_MAPPING)
            st.controllers[name] = ControllerInfo(
                label=(ctrl.arg if ctrl is not None and ctrl.arg else name),
                prefix=(mapping.arg or "") if mapping is not None else "",
            )
    for name, impls in implementers.items():
        st.interfaces[name] = InterfaceInfo(st.interfaces[name].decl, frozenset(impls))
    return st


def _check_unique(owner: str, names: list[str], path: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"{owner}.{n}", [path])
        seen.add(n)


@dataclass
class CallGraph:
    nodes: frozenset[MethodRef]
    edges: frozenset[tuple[MethodRef, MethodRef]]
    entry_points: dict[MethodRef, str]
    warnings: list[ExtractionWarning] = field(default_factory=list)

    def successors(self) -> dict[MethodRef, list[MethodRef]]:
        adj: dict[MethodRef, list[MethodRef]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
        for targets in adj.values():
            targets.sort()
        return adj


def _scope(cls: ClassDecl, method: MethodDecl) -> tuple[dict[str, str], dict[str, str]]:
    """(locals incl. params, class fields) name -> type; first declaration wins."""
    local: dict[str, str] = {}
    for p in method.params:
        local.setdefault(p.name, p.type)
    for s in method.body:
        if isinstance(s, LocalDecl):
            local.setdefault(s.name, s.type)
    fields = {}
    for f in cls.fields:
        fields.setdefault(f.name, f.type)
    return local, fields


def build_call_graph(st: SymbolTable) -> CallGraph:
    nodes = frozenset(st.methods)
    edges: set[tuple[MethodRef, MethodRef]] = set()
    entries: dict[MethodRef, str] = {}
    warnings: list[ExtractionWarning] = []
    for ref in sorted(st.methods):
        cls = st.classes[ref.cls]
        method = st.methods[ref]
        path = st.paths[ref.cls]
        mapping = method.annotation(REQUEST_MAPPING)
        if mapping is not None:
            prefix = st.controllers[ref.cls].prefix
            entries[ref] = join_route(prefix, mapping.arg or "")
        local, fields = _scope(cls, method)
        for s in method.body:
            if not isinstance(s, Call):
                continue
            rtype = local.get(s.receiver, fields.get(s.receiver))
            if rtype is None:
                warnings.append(ExtractionWarning(path, s.line, s.col, f"undeclared receiver {s.receiver!r} in {ref}"))
                continue
            if rtype in st.classes:
                target = MethodRef(rtype, s.method)
                if target in st.methods:
                    edges.add((ref, target))
                else:
                    warnings.append(ExtractionWarning(path, s.line, s.col, f"class {rtype} has no method {s.method!r}"))
            elif rtype in st.interfaces:
                impls = sorted(st.interfaces[rtype].implementers)
                if not impls:
                    warnings.append(ExtractionWarning(path, s.line, s.col, f"interface {rtype} has no implementations"))
                for impl in impls:
                    target = MethodRef(impl, s.method)
                    if target in st.methods:
                        edges.add((ref, target))
                    else:
                        warnings.append(
                            ExtractionWarning(path, s.line, s.col, f"{impl} implements {rtype} but has no method {s.method!r}")
                        )
            else:
                warnings.append(
                    ExtractionWarning(path, s.line, s.col, f"call {s.receiver}.{s.method}: type {rtype} is outside the corpus")
                )
    return CallGraph(nodes, frozenset(edges), entries, warnings)


def direct_touches(st: SymbolTable, ref: MethodRef) -> frozenset[DataElement]:
    """Personal data a single method touches, ignoring its callees."""
    cls = st.classes[ref.cls]
    method = st.methods[ref]
    local, fields = _scope(cls, method)
    types: set[str] = set(local.values())
    for s in method.body:
        if isinstance(s, New):
            types.add(s.class_name)
        elif isinstance(s, Call) and s.receiver not in local and s.receiver in fields:
            types.add(fields[s.receiver])
    data: set[DataElement] = set()
    for t in types:
        data |= st.entities.get(t, frozenset())
    return frozenset(data)


def strongly_connected_components(adj: Mapping[Any, list]) -> list[list]:
    """Tarjan's algorithm, iterative. Components come out sinks first."""
    counter = 0
    number: dict = {}
    low: dict = {}
    stack: list = []
    on_stack: set = set()
    components: list[list] = []
    for root in sorted(adj):
        if root in number:
            continue
        number[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(adj[root]))]
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in number:
                    number[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], number[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == number[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                components.append(sorted(comp))
    return components


def reachable_data_all(cg: CallGraph, st: SymbolTable) -> dict[MethodRef, frozenset[DataElement]]:
    """Reachable personal data for every node, via the SCC condensation."""
    adj = cg.successors()
    result: dict[MethodRef, frozenset[DataElement]] = {}
    for comp in strongly_connected_components(adj):
        data: set[DataElement] = set()
        members = set(comp)
        for node in comp:
            data |= direct_touches(st, node)
            for nxt in adj[node]:
                if nxt not in members:
                    data |= result[nxt]
        frozen = frozenset(data)
        for node in comp:
            result[node] = frozen
    return result


def reachable_data(cg: CallGraph, st: SymbolTable, entry: MethodRef | tuple[str, str]) -> frozenset[DataElement]:
    entry = MethodRef(*entry)
    if entry not in cg.nodes:
        raise UnknownEntry(f"{entry} is not a method of the corpus")
    return reachable_data_all(cg, st)[entry]


# --------------------------------------------------------------------------
# purpose generation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Defaults:
    """Values for purpose fields that static analysis cannot derive.

    ``recipients=None`` means "the controller of record", a single
    ``Controller`` recipient named after the corpus.
    """

    opt_out: bool = False
    required: bool = True
    retention: Retention = field(default_factory=Retention.indefinite)
    privacy_model: PrivacyModel | None = None
    recipients: frozenset[DataRecipient] | None = None
    version: str = "1.0"
    lang: str = "en"
    pp_uri: str = ""

    def recipients_for(self, corpus_name: str) -> frozenset[DataRecipient]:
        if self.recipients is None:
            return frozenset({DataRecipient(corpus_name, RecipientKind.CONTROLLER)})
        return self.recipients


_DEFAULT_KEYS = {"optOut", "required", "retention", "privacyModel", "recipients", "version", "lang", "ppURI"}


def defaults_from_dict(value: Any) -> Defaults:
    if not isinstance(value, dict):
        raise SchemaError("$", "expected an object")
    for key in sorted(value):
        if key not in _DEFAULT_KEYS:
            raise SchemaError(f"$.{key}", "unknown key")
    kwargs: dict[str, Any] = {}
    for key, attr in (("optOut", "opt_out"), ("required", "required")):
        if key in value:
            if not isinstance(value[key], bool):
                raise SchemaError(f"$.{key}", "expected a boolean")
            kwargs[attr] = value[key]
    for key, attr in (("version", "version"), ("lang", "lang"), ("ppURI", "pp_uri")):
        if key in value:
            if not isinstance(value[key], str):
                raise SchemaError(f"$.{key}", "expected a string")
            kwargs[attr] = value[key]
    if "retention" in value:
        kwargs["retention"] = retention_from_dict(value["retention"], "$.retention")
    if value.get("privacyModel") is not None:
        kwargs["privacy_model"] = privacy_model_from_dict(value["privacyModel"], "$.privacyModel")
    if value.get("recipients") is not None:
        if not isinstance(value["recipients"], list):
            raise SchemaError("$.recipients", "expected an array")
        kwargs["recipients"] = frozenset(
            recipient_from_dict(r, f"$.recipients[{i}]") for i, r in enumerate(value["recipients"])
        )
    return Defaults(**kwargs)


@dataclass
class Stats:
    n_controllers: int
    n_endpoints: int
    endpoints_per_controller: dict[str, float | None]
    n_controllers_with_pd: int
    n_endpoints_under_them: int
    endpoints_per_controller_with_pd: dict[str, float | None]
    n_entity_types: int
    purpose_data_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "nControllers": self.n_controllers,
            "nEndpoints": self.n_endpoints,
            "endpointsPerController": self.endpoints_per_controller,
            "nControllersWithPersonalData": self.n_controllers_with_pd,
            "nEndpointsUnderThem": self.n_endpoints_under_them,
            "endpointsPerControllerWithPersonalData": self.endpoints_per_controller_with_pd,
            "nEntityTypes": self.n_entity_types,
            "purposeDataCounts": dict(sorted(self.purpose_data_counts.items())),
        }


def _spread(counts: list[int]) -> dict[str, float | None]:
    if not counts:
        return {"min": None, "max": None, "mean": None}
    return {"min": min(counts), "max": max(counts), "mean": statistics.fmean(counts)}


@dataclass
class ExtractionResult:
    root_purpose: Purpose
    controller_purposes: list[Purpose]
    endpoint_purposes: list[Purpose]
    composition: list[UnderlyingPurposeEdge]
    gov: list[GovEdge]
    services: WebService
    stats: Stats
    policy_meta: dict[str, str] = field(default_factory=dict)
    warnings: list[ExtractionWarning] = field(default_factory=list)

    def policy(self) -> LayeredPrivacyPolicy:
        return LayeredPrivacyPolicy(
            version=self.policy_meta.get("version", "1.0"),
            name=self.policy_meta.get("name", self.root_purpose.id),
            lang=self.policy_meta.get("lang", "en"),
            pp_uri=self.policy_meta.get("ppURI", ""),
            purposes=(self.root_purpose, *self.controller_purposes, *self.endpoint_purposes),
            composition=tuple(self.composition),
        )

    def to_dict(self) -> dict:
        out = policy_to_dict(self.policy())
        out.update(service_model_to_dict([self.services], self.gov))
        out["stats"] = self.stats.to_dict()
        return out


def _unique_id(candidate: str, taken: set[str], suffix: str) -> str:
    while candidate in taken:
        candidate += suffix
    return candidate


def generate(
    st: SymbolTable,
    cg: CallGraph,
    corpus_name: str,
    defaults: Defaults | None = None,
) -> ExtractionResult:
    """Build the root -> controller -> endpoint purpose and service trees."""
    defaults = defaults or Defaults()
    reach = reachable_data_all(cg, st)
    recipients = defaults.recipients_for(corpus_name)

    def make(pid: str, name: str, descr: str, data: frozenset[DataElement]) -> Purpose:
        return Purpose(
            id=pid,
            name=name,
            opt_out=defaults.opt_out,
            required=defaults.required,
            descr=descr,
            recipients=recipients,
            retention=defaults.retention,
            privacy_model=defaults.privacy_model,
            data=data,
        )

    controller_purposes: list[Purpose] = []
    endpoint_purposes: list[Purpose] = []
    composition: list[UnderlyingPurposeEdge] = []
    controller_services: list[WebService] = []
    taken = set(st.controllers)
    per_controller: dict[str, int] = {}
    for cname in sorted(st.controllers):
        info = st.controllers[cname]
        path = st.paths[cname]
        entries = sorted((route, ref.method) for ref, route in cg.entry_points.items() if ref.cls == cname)
        routes = [r for r, _ in entries]
        endpoint_services = []
        union: set[DataElement] = set()
        for route, mname in entries:
            pid = f"{cname}{route}"
            if routes.count(route) > 1:
                pid = f"{pid}#{mname}"
            taken.add(pid)
            data = reach[MethodRef(cname, mname)]
            union |= data
            descr = f"{route} handled by {cname}.{mname}"
            endpoint_purposes.append(make(pid, mname, descr, data))
            composition.append(UnderlyingPurposeEdge(cname, pid))
            net = ServiceNet.sequence(Transition("t", mname, data))
            endpoint_services.append(WebService(pid, descr, path, route, (), net))
        per_controller[cname] = len(entries)
        cdescr = f"Controller {info.label}"
        controller_purposes.append(make(cname, info.label, cdescr, frozenset(union)))
        controller_services.append(
            WebService(
                cname,
                cdescr,
                path,
                join_route(info.prefix, ""),
                tuple(endpoint_services),
                None if endpoint_services else ServiceNet.sequence(),
            )
        )

    root_id = _unique_id(corpus_name, taken, "#root")
    root_data: frozenset[DataElement] = frozenset().union(*(p.data for p in controller_purposes))
    root_descr = f"All entry-points of {corpus_name}"
    root = make(root_id, corpus_name, root_descr, root_data)
    composition.extend(UnderlyingPurposeEdge(root_id, p.id) for p in controller_purposes)
    root_service = WebService(
        root_id,
        root_descr,
        "",
        "/",
        tuple(controller_services),
        None if controller_services else ServiceNet.sequence(),
    )
    gov = [GovEdge(p.id, p.id) for p in (root, *controller_purposes, *endpoint_purposes)]

    with_pd = [p.id for p in controller_purposes if p.data]
    stats = Stats(
        n_controllers=len(controller_purposes),
        n_endpoints=len(endpoint_purposes),
        endpoints_per_controller=_spread(list(per_controller.values())),
        n_controllers_with_pd=len(with_pd),
        n_endpoints_under_them=sum(per_controller[c] for c in with_pd),
        endpoints_per_controller_with_pd=_spread([per_controller[c] for c in with_pd]),
        n_entity_types=len(st.entities),
        purpose_data_counts={p.id: len(p.data) for p in (root, *controller_purposes, *endpoint_purposes)},
    )
    meta = {"version": defaults.version, "name": corpus_name, "lang": defaults.lang, "ppURI": defaults.pp_uri}
    return ExtractionResult(
        root,
        controller_purposes,
        endpoint_purposes,
        composition,
        gov,
        root_service,
        stats,
        meta,
        list(cg.warnings),
    )


def load_corpus(src_dir: str | os.PathLike) -> list[CompilationUnit]:
    """Parse every ``.msvc`` file below ``src_dir`` in path order.

    Unit paths are relative to ``src_dir`` (POSIX separators) so results do
    not depend on where the corpus lives.
    """
    root = Path(src_dir)
    files = sorted(root.rglob("*.msvc"), key=lambda p: p.relative_to(root).as_posix())
    return [parse_source(f.read_bytes(), f.relative_to(root).as_posix()) for f in files]


def extract(units: Iterable[CompilationUnit], corpus_name: str, defaults: Defaults | None = None) -> ExtractionResult:
    st = index(units)
    cg = build_call_graph(st)
    return generate(st, cg, corpus_name, defaults)
