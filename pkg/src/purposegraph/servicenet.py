"""Web services, service nets and policy coverage.

A web service is described by metadata, its component services and a
place/transition net whose transitions are labelled with the personal data
they process. :func:`pd` collects that data; :func:`check_coverage` decides
whether each service is governed by a purpose that covers it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import SchemaError, ServiceModelError, UnknownPurpose, UnknownService
from .lpl import (
    DataElement,
    DataRecipient,
    LayeredPrivacyPolicy,
    _Reader,
    data_element_from_json,
    loads_json,
    recipient_from_dict,
    recipient_to_dict,
)


@dataclass(frozen=True)
class Transition:
    id: str
    label: str = ""
    data: frozenset[DataElement] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", frozenset(self.data))


@dataclass(frozen=True)
class ServiceNet:
    places: frozenset[str]
    transitions: tuple[Transition, ...]
    arcs: frozenset[tuple[str, str]]
    input: str
    output: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "places", frozenset(self.places))
        object.__setattr__(self, "transitions", tuple(sorted(self.transitions, key=lambda t: t.id)))
        object.__setattr__(self, "arcs", frozenset(tuple(a) for a in self.arcs))

    @classmethod
    def sequence(cls, *transitions: Transition) -> ServiceNet:
        """Linear net ``i -> t1 -> p1 -> t2 -> ... -> o``."""
        places = ["i"] + [f"p{k}" for k in range(1, len(transitions))] + ["o"]
        arcs = set()
        for k, t in enumerate(transitions):
            arcs.add((places[k], t.id))
            arcs.add((t.id, places[k + 1]))
        if not transitions:
            places = ["i", "o"]
        return cls(frozenset(places), tuple(transitions), frozenset(arcs), "i", "o")


def validate_net(net: ServiceNet) -> list[str]:
    """Structural errors of a service net; empty when well-formed."""
    errors: list[str] = []
    places = set(net.places)
    tids = [t.id for t in net.transitions]
    transitions = set(tids)
    if len(transitions) != len(tids):
        errors.append("duplicate transition id")
    for name in sorted(places & transitions):
        errors.append(f"id {name!r} is both a place and a transition")
    if net.input not in places:
        errors.append(f"input place {net.input!r} is not a place")
    if net.output not in places:
        errors.append(f"output place {net.output!r} is not a place")
    if net.input == net.output:
        errors.append("input and output place coincide")
    succ: dict[str, set[str]] = {}
    pred: dict[str, set[str]] = {}
    for src, dst in sorted(net.arcs):
        if src not in places and src not in transitions:
            errors.append(f"arc {src}->{dst}: unknown node {src!r}")
            continue
        if dst not in places and dst not in transitions:
            errors.append(f"arc {src}->{dst}: unknown node {dst!r}")
            continue
        if (src in places) == (dst in places):
            errors.append(f"non-bipartite arc {src}->{dst}")
            continue
        succ.setdefault(src, set()).add(dst)
        pred.setdefault(dst, set()).add(src)
    forward = _reach(net.input, succ)
    backward = _reach(net.output, pred)
    for tid in sorted(transitions):
        if tid not in forward or tid not in backward:
            errors.append(f"transition {tid!r} is not on a path from input to output")
    return errors


def _reach(start: str, adj: Mapping[str, set[str]]) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


@dataclass(frozen=True, eq=False)
class WebService:
    """A (possibly composite) web service.

    Identity is the unique ``name``; two records with the same name are
    treated as the same service.
    """

    name: str
    desc: str = ""
    loc: str = ""
    url: str = ""
    components: tuple[WebService, ...] = ()
    net: ServiceNet | None = None
    recipients: frozenset[DataRecipient] = frozenset()
    underlying_policies: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "recipients", frozenset(self.recipients))
        object.__setattr__(self, "underlying_policies", frozenset(self.underlying_policies))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WebService) and other.name == self.name

    def __hash__(self) -> int:
        return hash(self.name)

    def walk(self) -> list[WebService]:
        """This service and all transitive components, each once, by name."""
        seen: dict[str, WebService] = {}
        stack = [self]
        while stack:
            ws = stack.pop()
            if ws.name in seen:
                continue
            seen[ws.name] = ws
            stack.extend(ws.components)
        return [seen[n] for n in sorted(seen)]


def validate_service(ws: WebService) -> list[str]:
    errors = []
    for s in ws.walk():
        if not s.components and s.net is None:
            errors.append(f"service {s.name!r}: leaf service without a service net")
        if s.net is not None:
            errors.extend(f"service {s.name!r}: {e}" for e in validate_net(s.net))
    return errors


@dataclass(frozen=True)
class PdResult:
    data: frozenset[DataElement] = frozenset()
    recipients: frozenset[DataRecipient] = frozenset()
    underlying_policies: frozenset[str] = frozenset()


def pd(ws: WebService, _memo: dict[str, frozenset[DataElement]] | None = None) -> PdResult:
    """Personal data processed by ``ws``: its own transitions plus all components.

    Recipients and underlying policies are the service's declared metadata.
    """
    memo = {} if _memo is None else _memo
    return PdResult(_pd_data(ws, memo, ()), ws.recipients, ws.underlying_policies)


def _pd_data(ws: WebService, memo: dict, active: tuple[str, ...]) -> frozenset[DataElement]:
    if ws.name in memo:
        return memo[ws.name]
    if ws.name in active:
        raise ServiceModelError("component cycle: " + " -> ".join(active + (ws.name,)))
    data: set[DataElement] = set()
    if ws.net is not None:
        for t in ws.net.transitions:
            data |= t.data
    for comp in ws.components:
        data |= _pd_data(comp, memo, active + (ws.name,))
    result = frozenset(data)
    memo[ws.name] = result
    return result


@dataclass(frozen=True, order=True)
class GovEdge:
    service: str
    purpose: str


@dataclass
class ServiceCoverage:
    service: str
    governed_by: list[str]
    covered: bool
    covering: list[str] = field(default_factory=list)
    # smallest shortfall among governing purposes when uncovered
    closest: str | None = None
    missing_data: list[str] = field(default_factory=list)
    missing_recipients: list[str] = field(default_factory=list)
    unknown_underlying_policies: list[str] = field(default_factory=list)

    @property
    def governed(self) -> bool:
        return bool(self.governed_by)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "service": self.service,
            "governed": self.governed,
            "governedBy": self.governed_by,
            "covered": self.covered,
            "coveringPurposes": self.covering,
        }
        if not self.covered and self.governed:
            out["closestPurpose"] = self.closest
            out["missingData"] = self.missing_data
            out["missingRecipients"] = self.missing_recipients
        if self.unknown_underlying_policies:
            out["unknownUnderlyingPolicies"] = self.unknown_underlying_policies
        return out


@dataclass
class CoverageReport:
    services: list[ServiceCoverage]

    @property
    def ok(self) -> bool:
        return all(s.covered for s in self.services)

    @property
    def uncovered(self) -> list[str]:
        return [s.service for s in self.services if s.governed and not s.covered]

    @property
    def ungoverned(self) -> list[str]:
        return [s.service for s in self.services if not s.governed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "ungoverned": self.ungoverned,
            "uncovered": self.uncovered,
            "services": [s.to_dict() for s in self.services],
            "note": "underlying policies are matched by name against the policy's underlyingPolicies",
        }


def check_coverage(
    policy: LayeredPrivacyPolicy,
    services: Iterable[WebService],
    gov: Iterable[GovEdge],
) -> CoverageReport:
    """Decide, for every service and its transitive components, whether a
    single governing purpose covers its processed data and recipients."""
    universe: dict[str, WebService] = {}
    for ws in services:
        for s in ws.walk():
            universe.setdefault(s.name, s)
    purposes = policy.purpose_map
    governing: dict[str, list[str]] = {name: [] for name in universe}
    for edge in sorted(set(gov)):
        if edge.service not in universe:
            raise UnknownService(f"gov edge references unknown service {edge.service!r}")
        if edge.purpose not in purposes:
            raise UnknownPurpose(f"gov edge references unknown purpose {edge.purpose!r}")
        governing[edge.service].append(edge.purpose)
    known_upp = {u.name for u in policy.underlying_policies}
    memo: dict = {}
    report = []
    for name in sorted(universe):
        result = pd(universe[name], memo)
        unknown_upp = sorted(result.underlying_policies - known_upp)
        entry = ServiceCoverage(name, governing[name], covered=False, unknown_underlying_policies=unknown_upp)
        best: tuple | None = None
        for pid in governing[name]:
            p = purposes[pid]
            miss_d = result.data - p.data
            miss_r = result.recipients - p.recipients
            if not miss_d and not miss_r:
                entry.covering.append(pid)
                continue
            key = (len(miss_d) + len(miss_r), pid)
            if best is None or key < best[0]:
                best = (key, pid, miss_d, miss_r)
        entry.covered = bool(entry.covering) and not unknown_upp
        if not entry.covering and best is not None:
            _, entry.closest, miss_d, miss_r = best
            entry.missing_data = sorted(d.qualified_name for d in miss_d)
            entry.missing_recipients = sorted(f"{r.name}({r.kind.value})" for r in miss_r)
        report.append(entry)
    return CoverageReport(report)


# --------------------------------------------------------------------------
# service model files
# --------------------------------------------------------------------------

_SERVICE_KEYS = {"name", "desc", "loc", "url", "components", "recipients", "underlyingPolicies"}


def _net_from_dict(value: Any, path: str, reader: _Reader) -> ServiceNet:
    obj = reader.obj(value, path, {"places", "transitions", "arcs", "input", "output"})
    places = [reader.string(p, f"{path}.places[{i}]", True) for i, p in enumerate(reader.array(obj["places"], f"{path}.places"))]
    transitions = []
    for i, t in enumerate(reader.array(obj["transitions"], f"{path}.transitions")):
        tp = f"{path}.transitions[{i}]"
        tobj = reader.obj(t, tp, {"id", "label", "data"})
        transitions.append(
            Transition(
                reader.string(tobj["id"], f"{tp}.id", True),
                reader.string(tobj["label"], f"{tp}.label"),
                frozenset(
                    data_element_from_json(d, f"{tp}.data[{j}]")
                    for j, d in enumerate(reader.array(tobj["data"], f"{tp}.data"))
                ),
            )
        )
    arcs = []
    for i, a in enumerate(reader.array(obj["arcs"], f"{path}.arcs")):
        if not (isinstance(a, list) and len(a) == 2 and all(isinstance(x, str) for x in a)):
            raise SchemaError(f"{path}.arcs[{i}]", "expected a [source, target] pair")
        arcs.append(tuple(a))
    return ServiceNet(
        frozenset(places),
        tuple(transitions),
        frozenset(arcs),
        reader.string(obj["input"], f"{path}.input", True),
        reader.string(obj["output"], f"{path}.output", True),
    )


def net_to_dict(net: ServiceNet) -> dict:
    return {
        "places": sorted(net.places),
        "transitions": [
            {"id": t.id, "label": t.label, "data": sorted(d.qualified_name for d in t.data)}
            for t in net.transitions
        ],
        "arcs": [list(a) for a in sorted(net.arcs)],
        "input": net.input,
        "output": net.output,
    }


def service_to_dict(ws: WebService) -> dict:
    out: dict[str, Any] = {
        "name": ws.name,
        "desc": ws.desc,
        "loc": ws.loc,
        "url": ws.url,
        "components": sorted(c.name for c in ws.components),
        "recipients": [recipient_to_dict(r) for r in sorted(ws.recipients, key=DataRecipient.sort_key)],
        "underlyingPolicies": sorted(ws.underlying_policies),
    }
    if ws.net is not None:
        out["net"] = net_to_dict(ws.net)
    return out


def services_to_list(services: Iterable[WebService]) -> list[dict]:
    everything: dict[str, WebService] = {}
    for ws in services:
        for s in ws.walk():
            everything.setdefault(s.name, s)
    return [service_to_dict(everything[n]) for n in sorted(everything)]


@dataclass
class ServiceModel:
    services: dict[str, WebService]
    gov: list[GovEdge]

    @property
    def top_level(self) -> list[WebService]:
        """Services that are not a component of another service."""
        nested = {c.name for s in self.services.values() for c in s.components}
        return [s for n, s in sorted(self.services.items()) if n not in nested]


def service_model_from_dict(value: Any, lenient: bool = False) -> ServiceModel:
    """Load ``{"services": [...], "gov": [...]}``.

    Other top-level keys are ignored so that an extraction result can be used
    directly as a service model.
    """
    reader = _Reader(lenient)
    if not isinstance(value, dict):
        raise SchemaError("$", "expected an object")
    for key in ("services", "gov"):
        if key not in value:
            raise SchemaError(f"$.{key}", "missing required key")
    raw: dict[str, dict] = {}
    order: list[str] = []
    for i, item in enumerate(reader.array(value["services"], "$.services")):
        path = f"$.services[{i}]"
        obj = reader.obj(item, path, _SERVICE_KEYS, {"net"})
        name = reader.string(obj["name"], f"{path}.name", True)
        if name in raw:
            raise SchemaError(f"{path}.name", f"duplicate service name {name!r}")
        for key in ("desc", "loc", "url"):
            reader.string(obj[key], f"{path}.{key}")
        comps = reader.array(obj["components"], f"{path}.components")
        for j, c in enumerate(comps):
            reader.string(c, f"{path}.components[{j}]", True)
        raw[name] = dict(obj, _path=path)
        order.append(name)

    built: dict[str, WebService] = {}

    def build(name: str, active: tuple[str, ...]) -> WebService:
        if name in built:
            return built[name]
        if name in active:
            raise ServiceModelError("component cycle: " + " -> ".join(active + (name,)))
        obj = raw[name]
        path = obj["_path"]
        comps = []
        for cname in obj["components"]:
            if cname not in raw:
                raise UnknownService(f"{path}.components: unknown service {cname!r}")
            comps.append(build(cname, active + (name,)))
        net = None if obj.get("net") is None else _net_from_dict(obj["net"], f"{path}.net", reader)
        recipients = [
            recipient_from_dict(r, f"{path}.recipients[{k}]", reader)
            for k, r in enumerate(reader.array(obj["recipients"], f"{path}.recipients"))
        ]
        upp = [
            reader.string(u, f"{path}.underlyingPolicies[{k}]", True)
            for k, u in enumerate(reader.array(obj["underlyingPolicies"], f"{path}.underlyingPolicies"))
        ]
        ws = WebService(
            name=name,
            desc=obj["desc"],
            loc=obj["loc"],
            url=obj["url"],
            components=tuple(comps),
            net=net,
            recipients=frozenset(recipients),
            underlying_policies=frozenset(upp),
        )
        built[name] = ws
        return ws

    for name in order:
        build(name, ())
    for name in order:
        errors = validate_service(built[name])
        if errors:
            raise ServiceModelError(errors[0])
    gov = []
    for i, item in enumerate(reader.array(value["gov"], "$.gov")):
        obj = reader.obj(item, f"$.gov[{i}]", {"service", "purpose"})
        gov.append(
            GovEdge(
                reader.string(obj["service"], f"$.gov[{i}].service", True),
                reader.string(obj["purpose"], f"$.gov[{i}].purpose", True),
            )
        )
    return ServiceModel(built, gov)


def parse_service_model(text: str | bytes, lenient: bool = False) -> ServiceModel:
    return service_model_from_dict(loads_json(text), lenient)


def service_model_to_dict(services: Iterable[WebService], gov: Iterable[GovEdge]) -> dict:
    return {
        "services": services_to_list(services),
        "gov": [{"service": g.service, "purpose": g.purpose} for g in sorted(set(gov))],
    }
