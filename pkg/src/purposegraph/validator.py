"""Validity checks for composed-purpose policies.

A composition edge ``parent -> child`` is valid when the child processes no
more data, shares with no more recipients, retains no longer, anonymizes no
weaker, and agrees on ``required`` and ``optOut``. On top of that the
composition graph must be acyclic and inheritance must be single-parent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from .errors import CycleDetected, DanglingEdge, UnknownAttribute
from .lpl import (
    DEFAULT_REGISTRY,
    InheritanceEdge,
    LayeredPrivacyPolicy,
    Ordering,
    Purpose,
    StrengthRegistry,
    UnderlyingPurposeEdge,
    privacy_model_compare,
    retention_compare,
)

Edge = Union[UnderlyingPurposeEdge, InheritanceEdge]


class Rule(enum.Enum):
    DATA_SUBSET = "DataSubset"
    RECIPIENT_SUBSET = "RecipientSubset"
    RETENTION_ORDER = "RetentionOrder"
    PRIVACY_MODEL_ORDER = "PrivacyModelOrder"
    REQUIRED_MISMATCH = "RequiredMismatch"
    OPT_OUT_MISMATCH = "OptOutMismatch"
    CYCLE = "Cycle"
    MULTIPLE_INHERITANCE = "MultipleInheritance"


_RULE_INDEX = {rule: i for i, rule in enumerate(Rule)}


@dataclass(frozen=True)
class Violation:
    edge: Edge | None
    rule: Rule
    detail: str
    witness: tuple[str, ...] = ()

    def sort_key(self) -> tuple:
        if self.edge is None:
            edge_key: tuple = ("",)
        else:
            edge_key = (self.edge.kind, self.edge.parent, self.edge.child)
        return (edge_key, _RULE_INDEX[self.rule], self.detail)

    def to_dict(self) -> dict:
        edge = None
        if self.edge is not None:
            edge = {"kind": self.edge.kind, "parent": self.edge.parent, "child": self.edge.child}
        out = {"edge": edge, "rule": self.rule.value, "detail": self.detail}
        if self.witness:
            out["witness"] = list(self.witness)
        return out


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    roots: frozenset[str] = field(default_factory=frozenset)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def rules(self) -> list[Rule]:
        return [v.rule for v in self.violations]

    def to_dict(self) -> dict:
        return {
            "isValid": self.is_valid,
            "roots": sorted(self.roots),
            "violations": [v.to_dict() for v in self.violations],
        }


def _names(items) -> str:
    return "{" + ", ".join(sorted(str(i) for i in items)) + "}"


def _resolve(policy: LayeredPrivacyPolicy, edge: Edge) -> tuple[Purpose, Purpose]:
    purposes = policy.purpose_map
    for end in (edge.parent, edge.child):
        if end not in purposes:
            raise DanglingEdge(edge, end)
    return purposes[edge.parent], purposes[edge.child]


def _retention_violation(edge: Edge, parent: Purpose, child: Purpose) -> Violation | None:
    order = retention_compare(child.retention, parent.retention)
    if order in (Ordering.LESS, Ordering.EQUAL):
        return None
    return Violation(
        edge,
        Rule.RETENTION_ORDER,
        f"child retention {_fmt_retention(child)} exceeds parent retention {_fmt_retention(parent)}",
    )


def _privacy_model_violation(
    edge: Edge, parent: Purpose, child: Purpose, registry: StrengthRegistry
) -> Violation | None:
    try:
        order = privacy_model_compare(child.privacy_model, parent.privacy_model, registry)
    except UnknownAttribute as exc:
        return Violation(edge, Rule.PRIVACY_MODEL_ORDER, str(exc))
    if order in (Ordering.GREATER, Ordering.EQUAL):
        return None
    return Violation(
        edge,
        Rule.PRIVACY_MODEL_ORDER,
        f"child privacy model {_fmt_pm(child)} is {order.value.lower()} than parent {_fmt_pm(parent)}"
        if order is Ordering.LESS
        else f"child privacy model {_fmt_pm(child)} is incomparable with parent {_fmt_pm(parent)}",
    )


def _fmt_retention(p: Purpose) -> str:
    r = p.retention
    return r.rtype.value if r.point_in_time is None else f"{r.rtype.value}@{r.point_in_time.isoformat()}"


def _fmt_pm(p: Purpose) -> str:
    pm = p.privacy_model
    if pm is None:
        return "none"
    return pm.name + "{" + ", ".join(f"{k}: {v}" for k, v in pm.attributes) + "}"


def check_edge(
    policy: LayeredPrivacyPolicy,
    edge: UnderlyingPurposeEdge,
    registry: StrengthRegistry = DEFAULT_REGISTRY,
) -> list[Violation]:
    """Return every constraint the composition edge violates, in rule order."""
    parent, child = _resolve(policy, edge)
    found: list[Violation] = []
    extra_data = child.data - parent.data
    if extra_data:
        found.append(Violation(edge, Rule.DATA_SUBSET, f"child data not in parent: {_names(extra_data)}"))
    extra_recipients = child.recipients - parent.recipients
    if extra_recipients:
        found.append(
            Violation(
                edge,
                Rule.RECIPIENT_SUBSET,
                "child recipients not in parent: "
                + _names(f"{r.name}({r.kind.value})" for r in extra_recipients),
            )
        )
    for v in (
        _retention_violation(edge, parent, child),
        _privacy_model_violation(edge, parent, child, registry),
    ):
        if v is not None:
            found.append(v)
    if child.required != parent.required:
        found.append(
            Violation(edge, Rule.REQUIRED_MISMATCH, f"required: child {child.required}, parent {parent.required}")
        )
    if child.opt_out != parent.opt_out:
        found.append(
            Violation(edge, Rule.OPT_OUT_MISMATCH, f"optOut: child {child.opt_out}, parent {parent.opt_out}")
        )
    return found


def _adjacency(policy: LayeredPrivacyPolicy) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {p.id: [] for p in policy.purposes}
    for edge in policy.composition:
        adj.setdefault(edge.parent, []).append(edge.child)
        adj.setdefault(edge.child, [])
    for children in adj.values():
        children.sort()
    return adj


def find_cycle(adj: dict[str, list[str]]) -> list[str] | None:
    """Return one directed cycle as ``[a, ..., a]`` or None.

    Iterative three-colour DFS; nodes and successors are visited in sorted
    order so the witness is deterministic.
    """
    white, grey, black = 0, 1, 2
    colour = dict.fromkeys(adj, white)
    for start in sorted(adj):
        if colour[start] != white:
            continue
        path = [start]
        iters = [iter(adj[start])]
        colour[start] = grey
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = black
                iters.pop()
                continue
            if colour[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            if colour[nxt] == white:
                colour[nxt] = grey
                path.append(nxt)
                iters.append(iter(adj[nxt]))
    return None


def check_acyclic(policy: LayeredPrivacyPolicy) -> Violation | None:
    """None when the composition graph is a DAG, else one Cycle violation."""
    witness = find_cycle(_adjacency(policy))
    if witness is None:
        return None
    closing = UnderlyingPurposeEdge(witness[-2], witness[-1])
    return Violation(closing, Rule.CYCLE, "cycle: " + " -> ".join(witness), tuple(witness))


def check_inheritance(policy: LayeredPrivacyPolicy) -> list[Violation]:
    by_child: dict[str, list[InheritanceEdge]] = {}
    for edge in policy.hierarchy:
        by_child.setdefault(edge.child, []).append(edge)
    found = []
    for child, edges in sorted(by_child.items()):
        if len(edges) > 1:
            parents = sorted(e.parent for e in edges)
            found.append(
                Violation(
                    sorted(edges)[1],
                    Rule.MULTIPLE_INHERITANCE,
                    f"{child!r} inherits from {', '.join(repr(p) for p in parents)}",
                )
            )
    return found


def roots(policy: LayeredPrivacyPolicy) -> frozenset[str]:
    """Purposes that are not a component of any other purpose."""
    children = {e.child for e in policy.composition}
    return frozenset(p.id for p in policy.purposes if p.id not in children)


def validate(
    policy: LayeredPrivacyPolicy,
    registry: StrengthRegistry = DEFAULT_REGISTRY,
    strict_inheritance: bool = False,
) -> ValidationReport:
    """Check every rule and collect all violations (not fail-fast)."""
    found: list[Violation] = []
    for edge in policy.composition:
        found.extend(check_edge(policy, edge, registry))
    cycle = check_acyclic(policy)
    if cycle is not None:
        found.append(cycle)
    found.extend(check_inheritance(policy))
    if strict_inheritance:
        for edge in policy.hierarchy:
            parent, child = _resolve(policy, edge)
            for v in (
                _retention_violation(edge, parent, child),
                _privacy_model_violation(edge, parent, child, registry),
            ):
                if v is not None:
                    found.append(v)
    found.sort(key=Violation.sort_key)
    return ValidationReport(tuple(found), roots(policy))


def closure(policy: LayeredPrivacyPolicy, root: str) -> list[str]:
    """Transitive composition closure of ``root`` in breadth-first layers.

    Each layer is sorted by id; a purpose appears once, in the shallowest
    layer that reaches it.
    """
    if root not in policy.purpose_map:
        raise KeyError(root)
    adj = _adjacency(policy)
    witness = find_cycle(adj)
    if witness is not None:
        raise CycleDetected(witness)
    order = [root]
    seen = {root}
    layer = [root]
    while layer:
        nxt = sorted({c for node in layer for c in adj[node] if c not in seen})
        seen.update(nxt)
        order.extend(nxt)
        layer = nxt
    return order
