"""Layered Privacy Language policy model with composed purposes.

Purposes, retentions, privacy models and the two purpose relations
(composition and single inheritance), together with their orderings and a
canonical JSON serialization.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import DanglingEdge, PolicySyntaxError, SchemaError, UnknownAttribute

__all__ = [
    "Ordering",
    "DataElement",
    "RecipientKind",
    "DataRecipient",
    "RetentionType",
    "Retention",
    "PrivacyModel",
    "StrengthRegistry",
    "DEFAULT_REGISTRY",
    "Purpose",
    "UnderlyingPurposeEdge",
    "InheritanceEdge",
    "LayeredPrivacyPolicy",
    "retention_compare",
    "privacy_model_compare",
    "parse_policy",
    "serialize_policy",
    "policy_from_dict",
    "policy_to_dict",
]

_LANG = re.compile(r"^[A-Za-z]{2,8}(-[A-Za-z0-9]{1,8})*$")


class Ordering(enum.Enum):
    LESS = "Less"
    EQUAL = "Equal"
    GREATER = "Greater"
    INCOMPARABLE = "Incomparable"


def _cmp(a: Any, b: Any) -> Ordering:
    if a < b:
        return Ordering.LESS
    if a > b:
        return Ordering.GREATER
    return Ordering.EQUAL


@dataclass(frozen=True, order=True)
class DataElement:
    """One personal-data attribute, named ``Entity.field``."""

    entity: str
    field: str

    def __post_init__(self) -> None:
        if not self.entity or not self.field:
            raise ValueError("data element needs a non-empty entity and field")
        if "." in self.entity or "." in self.field:
            raise ValueError(f"data element parts may not contain '.': {self.entity!r}, {self.field!r}")

    @property
    def qualified_name(self) -> str:
        return f"{self.entity}.{self.field}"

    @classmethod
    def parse(cls, qualified_name: str) -> DataElement:
        parts = qualified_name.split(".")
        if len(parts) != 2:
            raise ValueError(f"expected 'Entity.field', got {qualified_name!r}")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return self.qualified_name


class RecipientKind(enum.Enum):
    CONTROLLER = "Controller"
    PROCESSOR = "Processor"
    THIRD_PARTY = "ThirdParty"


@dataclass(frozen=True)
class DataRecipient:
    name: str
    kind: RecipientKind = RecipientKind.CONTROLLER

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("data recipient name must be non-empty")

    def sort_key(self) -> tuple[str, str]:
        return (self.name, self.kind.value)


class RetentionType(enum.Enum):
    FIXED_DATE = "fixedDate"
    AFTER_PURPOSE = "afterPurpose"
    INDEFINITE = "indefinite"


_RETENTION_RANK = {
    RetentionType.FIXED_DATE: 0,
    RetentionType.AFTER_PURPOSE: 1,
    RetentionType.INDEFINITE: 2,
}


@dataclass(frozen=True)
class Retention:
    rtype: RetentionType
    point_in_time: dt.date | None = None

    def __post_init__(self) -> None:
        if self.rtype is RetentionType.FIXED_DATE and self.point_in_time is None:
            raise ValueError("fixedDate retention requires a point in time")
        if self.rtype is RetentionType.INDEFINITE and self.point_in_time is not None:
            raise ValueError("indefinite retention cannot carry a point in time")

    @classmethod
    def indefinite(cls) -> Retention:
        return cls(RetentionType.INDEFINITE)

    @classmethod
    def after_purpose(cls, cap: dt.date | None = None) -> Retention:
        return cls(RetentionType.AFTER_PURPOSE, cap)

    @classmethod
    def fixed(cls, when: dt.date) -> Retention:
        return cls(RetentionType.FIXED_DATE, when)


def retention_compare(a: Retention, b: Retention) -> Ordering:
    """Compare retentions; ``Greater`` means data is kept longer (less strict).

    Across types ``Indefinite > AfterPurpose > FixedDate``. Within a type the
    later date is greater, and an ``AfterPurpose`` with a cap date is less than
    one without.
    """
    if a.rtype is not b.rtype:
        return _cmp(_RETENTION_RANK[a.rtype], _RETENTION_RANK[b.rtype])
    if a.point_in_time is None and b.point_in_time is None:
        return Ordering.EQUAL
    if a.point_in_time is None:
        return Ordering.GREATER
    if b.point_in_time is None:
        return Ordering.LESS
    return _cmp(a.point_in_time, b.point_in_time)


@dataclass(frozen=True)
class PrivacyModel:
    """An anonymization guarantee such as ``k-anonymity{k: 5}``.

    ``attributes`` accepts any mapping and is normalized to a sorted tuple of
    ``(key, value)`` pairs so the model stays hashable.
    """

    name: str
    attributes: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        attrs = self.attributes
        items = attrs.items() if isinstance(attrs, Mapping) else attrs
        normalized = tuple(sorted((str(k), v) for k, v in items))
        if not self.name:
            raise ValueError("privacy model name must be non-empty")
        for key, value in normalized:
            if not key:
                raise ValueError("privacy model attribute keys must be non-empty")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"privacy model attribute {key!r} must be a finite number")
        if len({k for k, _ in normalized}) != len(normalized):
            raise ValueError("duplicate privacy model attribute")
        object.__setattr__(self, "attributes", normalized)

    def as_dict(self) -> dict[str, float]:
        return dict(self.attributes)


class StrengthRegistry:
    """Per-model, per-attribute strength direction.

    ``+1`` means a larger value is a stronger guarantee, ``-1`` a smaller one.
    """

    def __init__(self, directions: Mapping[str, Mapping[str, int]] | None = None) -> None:
        self._directions: dict[str, dict[str, int]] = {}
        for name, attrs in (directions or {}).items():
            self.register(name, attrs)

    def register(self, name: str, attrs: Mapping[str, int | str]) -> None:
        parsed = {}
        for key, direction in attrs.items():
            if direction in ("higher", 1):
                parsed[key] = 1
            elif direction in ("lower", -1):
                parsed[key] = -1
            else:
                raise ValueError(f"{name}.{key}: direction must be 'higher' or 'lower'")
        self._directions[name] = parsed

    def direction(self, name: str, attribute: str) -> int:
        try:
            return self._directions[name][attribute]
        except KeyError:
            raise UnknownAttribute(name, attribute) from None

    def extended(self, directions: Mapping[str, Mapping[str, int | str]]) -> StrengthRegistry:
        new = StrengthRegistry(self._directions)
        for name, attrs in directions.items():
            new.register(name, attrs)
        return new

    def __contains__(self, name: str) -> bool:
        return name in self._directions


DEFAULT_REGISTRY = StrengthRegistry(
    {
        "k-anonymity": {"k": 1},
        "l-diversity": {"l": 1},
        "t-closeness": {"t": -1},
    }
)


def privacy_model_compare(
    a: PrivacyModel | None,
    b: PrivacyModel | None,
    registry: StrengthRegistry = DEFAULT_REGISTRY,
) -> Ordering:
    """Compare two optional privacy models by guarantee strength.

    An absent model is the weakest. Models with different names are
    incomparable; equal names compare attribute-wise, and mixed attribute
    directions are incomparable.
    """
    if a is None and b is None:
        return Ordering.EQUAL
    if a is None:
        return Ordering.LESS
    if b is None:
        return Ordering.GREATER
    if a.name != b.name:
        return Ordering.INCOMPARABLE
    a_attrs, b_attrs = a.as_dict(), b.as_dict()
    for key in sorted(a_attrs.keys() ^ b_attrs.keys()):
        raise UnknownAttribute(a.name, key)
    stronger = weaker = False
    for key in sorted(a_attrs):
        sign = registry.direction(a.name, key)
        order = _cmp(a_attrs[key] * sign, b_attrs[key] * sign)
        stronger |= order is Ordering.GREATER
        weaker |= order is Ordering.LESS
    if stronger and weaker:
        return Ordering.INCOMPARABLE
    if stronger:
        return Ordering.GREATER
    if weaker:
        return Ordering.LESS
    return Ordering.EQUAL


@dataclass(frozen=True)
class Purpose:
    id: str
    name: str
    opt_out: bool = False
    required: bool = True
    descr: str = ""
    recipients: frozenset[DataRecipient] = frozenset()
    retention: Retention = field(default_factory=Retention.indefinite)
    privacy_model: PrivacyModel | None = None
    data: frozenset[DataElement] = frozenset()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("purpose id must be non-empty")
        if not self.name:
            raise ValueError(f"purpose {self.id!r}: name must be non-empty")
        object.__setattr__(self, "recipients", frozenset(self.recipients))
        object.__setattr__(self, "data", frozenset(self.data))


@dataclass(frozen=True, order=True)
class UnderlyingPurposeEdge:
    """Composition: ``child`` is a component purpose of ``parent``."""

    parent: str
    child: str

    kind = "composition"


@dataclass(frozen=True, order=True)
class InheritanceEdge:
    """PurposeHierarchy: ``child`` is-a ``parent``."""

    parent: str
    child: str

    kind = "inheritance"


@dataclass(frozen=True)
class LayeredPrivacyPolicy:
    """A policy: metadata, purposes and the two purpose relations.

    The constructor only normalizes ordering (purposes by id, edges
    lexicographically) so that equal policies compare equal. Referential
    integrity is checked by :func:`parse_policy` and :meth:`check_integrity`;
    semantic validity lives in :mod:`purposegraph.validator`.
    """

    version: str = "1.0"
    name: str = ""
    lang: str = "en"
    pp_uri: str = ""
    underlying_policies: tuple[LayeredPrivacyPolicy, ...] = ()
    purposes: tuple[Purpose, ...] = ()
    composition: tuple[UnderlyingPurposeEdge, ...] = ()
    hierarchy: tuple[InheritanceEdge, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "underlying_policies", tuple(self.underlying_policies))
        object.__setattr__(self, "purposes", tuple(sorted(self.purposes, key=lambda p: p.id)))
        object.__setattr__(self, "composition", tuple(sorted(set(self.composition))))
        object.__setattr__(self, "hierarchy", tuple(sorted(set(self.hierarchy))))

    @property
    def purpose_map(self) -> dict[str, Purpose]:
        return {p.id: p for p in self.purposes}

    def purpose(self, purpose_id: str) -> Purpose:
        for p in self.purposes:
            if p.id == purpose_id:
                return p
        raise KeyError(purpose_id)

    def replace_purpose(self, purpose: Purpose) -> LayeredPrivacyPolicy:
        others = [p for p in self.purposes if p.id != purpose.id]
        return _replace(self, purposes=tuple(others) + (purpose,))

    def check_integrity(self) -> None:
        """Raise unless ids are unique and every edge resolves."""
        ids = [p.id for p in self.purposes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[0]
            raise SchemaError("$.purposes", f"duplicate purpose id {dup!r}")
        known = set(ids)
        for edge in (*self.composition, *self.hierarchy):
            for end in (edge.parent, edge.child):
                if end not in known:
                    raise DanglingEdge(edge, end)


def _replace(policy: LayeredPrivacyPolicy, **changes: Any) -> LayeredPrivacyPolicy:
    return dataclasses.replace(policy, **changes)


# --------------------------------------------------------------------------
# JSON mapping
# --------------------------------------------------------------------------

_TOP_KEYS = {
    "version",
    "name",
    "lang",
    "ppURI",
    "underlyingPolicies",
    "purposes",
    "composition",
    "hierarchy",
}
# sections an extraction result adds on top of a policy document
EXTRACTION_SECTIONS = frozenset({"gov", "services", "stats"})
_PURPOSE_KEYS = {
    "id",
    "name",
    "optOut",
    "required",
    "descr",
    "recipients",
    "retention",
    "privacyModel",
    "data",
}


class _Reader:
    def __init__(self, lenient: bool) -> None:
        self.lenient = lenient

    def obj(self, value: Any, path: str, required: set[str], optional: set[str] = frozenset()) -> dict:
        if not isinstance(value, dict):
            raise SchemaError(path, "expected an object")
        for key in sorted(required):
            if key not in value:
                raise SchemaError(f"{path}.{key}", "missing required key")
        if not self.lenient:
            for key in sorted(value):
                if key not in required and key not in optional:
                    raise SchemaError(f"{path}.{key}", "unknown key")
        return value

    @staticmethod
    def string(value: Any, path: str, nonempty: bool = False) -> str:
        if not isinstance(value, str):
            raise SchemaError(path, "expected a string")
        if nonempty and not value:
            raise SchemaError(path, "must be non-empty")
        return value

    @staticmethod
    def boolean(value: Any, path: str) -> bool:
        if not isinstance(value, bool):
            raise SchemaError(path, "expected a boolean")
        return value

    @staticmethod
    def array(value: Any, path: str) -> list:
        if not isinstance(value, list):
            raise SchemaError(path, "expected an array")
        return value


def _unique(items: list, path: str, what: str) -> None:
    seen = set()
    for i, item in enumerate(items):
        if item in seen:
            raise SchemaError(f"{path}[{i}]", f"duplicate {what}")
        seen.add(item)


def recipient_from_dict(value: Any, path: str, reader: _Reader | None = None) -> DataRecipient:
    reader = reader or _Reader(False)
    obj = reader.obj(value, path, {"name", "kind"})
    name = reader.string(obj["name"], f"{path}.name", nonempty=True)
    kind = reader.string(obj["kind"], f"{path}.kind")
    try:
        return DataRecipient(name, RecipientKind(kind))
    except ValueError:
        raise SchemaError(f"{path}.kind", f"unknown recipient kind {kind!r}") from None


def recipient_to_dict(r: DataRecipient) -> dict:
    return {"name": r.name, "kind": r.kind.value}


def data_element_from_json(value: Any, path: str) -> DataElement:
    if not isinstance(value, str):
        raise SchemaError(path, "expected 'Entity.field' string")
    try:
        return DataElement.parse(value)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def retention_from_dict(value: Any, path: str, reader: _Reader | None = None) -> Retention:
    reader = reader or _Reader(False)
    obj = reader.obj(value, path, {"type"}, {"pointInTime"})
    rtype_text = reader.string(obj["type"], f"{path}.type")
    try:
        rtype = RetentionType(rtype_text)
    except ValueError:
        raise SchemaError(f"{path}.type", f"unknown retention type {rtype_text!r}") from None
    when = None
    if "pointInTime" in obj and obj["pointInTime"] is not None:
        text = reader.string(obj["pointInTime"], f"{path}.pointInTime")
        try:
            when = dt.date.fromisoformat(text)
        except ValueError:
            raise SchemaError(f"{path}.pointInTime", f"not a YYYY-MM-DD date: {text!r}") from None
        if len(text) != 10:
            raise SchemaError(f"{path}.pointInTime", f"not a YYYY-MM-DD date: {text!r}")
    try:
        return Retention(rtype, when)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def retention_to_dict(r: Retention) -> dict:
    out: dict[str, Any] = {"type": r.rtype.value}
    if r.point_in_time is not None:
        out["pointInTime"] = r.point_in_time.isoformat()
    return out


def privacy_model_from_dict(value: Any, path: str, reader: _Reader | None = None) -> PrivacyModel:
    reader = reader or _Reader(False)
    obj = reader.obj(value, path, {"name", "attributes"})
    name = reader.string(obj["name"], f"{path}.name", nonempty=True)
    attrs = obj["attributes"]
    if not isinstance(attrs, dict):
        raise SchemaError(f"{path}.attributes", "expected an object")
    try:
        return PrivacyModel(name, attrs)
    except ValueError as exc:
        raise SchemaError(f"{path}.attributes", str(exc)) from None


def privacy_model_to_dict(pm: PrivacyModel) -> dict:
    return {"name": pm.name, "attributes": pm.as_dict()}


def _purpose_from_dict(value: Any, path: str, reader: _Reader) -> Purpose:
    obj = reader.obj(value, path, _PURPOSE_KEYS - {"privacyModel"}, {"privacyModel"})
    recipients = [
        recipient_from_dict(r, f"{path}.recipients[{i}]", reader)
        for i, r in enumerate(reader.array(obj["recipients"], f"{path}.recipients"))
    ]
    _unique(recipients, f"{path}.recipients", "recipient")
    data = [
        data_element_from_json(d, f"{path}.data[{i}]")
        for i, d in enumerate(reader.array(obj["data"], f"{path}.data"))
    ]
    _unique(data, f"{path}.data", "data element")
    pm = obj.get("privacyModel")
    return Purpose(
        id=reader.string(obj["id"], f"{path}.id", nonempty=True),
        name=reader.string(obj["name"], f"{path}.name", nonempty=True),
        opt_out=reader.boolean(obj["optOut"], f"{path}.optOut"),
        required=reader.boolean(obj["required"], f"{path}.required"),
        descr=reader.string(obj["descr"], f"{path}.descr"),
        recipients=frozenset(recipients),
        retention=retention_from_dict(obj["retention"], f"{path}.retention", reader),
        privacy_model=None if pm is None else privacy_model_from_dict(pm, f"{path}.privacyModel", reader),
        data=frozenset(data),
    )


def _edges_from_list(value: Any, path: str, reader: _Reader, cls: type) -> list:
    edges = []
    for i, item in enumerate(reader.array(value, path)):
        obj = reader.obj(item, f"{path}[{i}]", {"parent", "child"})
        parent = reader.string(obj["parent"], f"{path}[{i}].parent", nonempty=True)
        child = reader.string(obj["child"], f"{path}[{i}].child", nonempty=True)
        if parent == child:
            raise SchemaError(f"{path}[{i}]", f"edge from {parent!r} to itself")
        edges.append(cls(parent, child))
    _unique(edges, path, "edge")
    return edges


def policy_from_dict(value: Any, path: str = "$", lenient: bool = False) -> LayeredPrivacyPolicy:
    """Build a policy from decoded JSON, enforcing every structural invariant."""
    reader = _Reader(lenient)
    optional = EXTRACTION_SECTIONS if path == "$" else frozenset()
    obj = reader.obj(value, path, _TOP_KEYS, optional)
    lang = reader.string(obj["lang"], f"{path}.lang")
    if not _LANG.match(lang):
        raise SchemaError(f"{path}.lang", f"not a language tag: {lang!r}")
    underlying = [
        policy_from_dict(u, f"{path}.underlyingPolicies[{i}]", lenient)
        for i, u in enumerate(reader.array(obj["underlyingPolicies"], f"{path}.underlyingPolicies"))
    ]
    purposes = [
        _purpose_from_dict(p, f"{path}.purposes[{i}]", reader)
        for i, p in enumerate(reader.array(obj["purposes"], f"{path}.purposes"))
    ]
    composition = _edges_from_list(obj["composition"], f"{path}.composition", reader, UnderlyingPurposeEdge)
    hierarchy = _edges_from_list(obj["hierarchy"], f"{path}.hierarchy", reader, InheritanceEdge)
    parents: dict[str, str] = {}
    for i, edge in enumerate(hierarchy):
        if edge.child in parents:
            raise SchemaError(
                f"{path}.hierarchy[{i}]",
                f"purpose {edge.child!r} inherits from both {parents[edge.child]!r} and {edge.parent!r}",
            )
        parents[edge.child] = edge.parent
    policy = LayeredPrivacyPolicy(
        version=reader.string(obj["version"], f"{path}.version"),
        name=reader.string(obj["name"], f"{path}.name"),
        lang=lang,
        pp_uri=reader.string(obj["ppURI"], f"{path}.ppURI"),
        underlying_policies=tuple(underlying),
        purposes=tuple(purposes),
        composition=tuple(composition),
        hierarchy=tuple(hierarchy),
    )
    policy.check_integrity()
    return policy


def purpose_to_dict(p: Purpose) -> dict:
    out: dict[str, Any] = {
        "id": p.id,
        "name": p.name,
        "optOut": p.opt_out,
        "required": p.required,
        "descr": p.descr,
        "recipients": [recipient_to_dict(r) for r in sorted(p.recipients, key=DataRecipient.sort_key)],
        "retention": retention_to_dict(p.retention),
        "data": sorted(d.qualified_name for d in p.data),
    }
    if p.privacy_model is not None:
        out["privacyModel"] = privacy_model_to_dict(p.privacy_model)
    return out


def policy_to_dict(policy: LayeredPrivacyPolicy) -> dict:
    return {
        "version": policy.version,
        "name": policy.name,
        "lang": policy.lang,
        "ppURI": policy.pp_uri,
        "underlyingPolicies": [policy_to_dict(u) for u in policy.underlying_policies],
        "purposes": [purpose_to_dict(p) for p in policy.purposes],
        "composition": [{"parent": e.parent, "child": e.child} for e in policy.composition],
        "hierarchy": [{"parent": e.parent, "child": e.child} for e in policy.hierarchy],
    }


def dumps_canonical(obj: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def loads_json(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PolicySyntaxError(1, exc.start + 1, "input is not valid UTF-8") from None
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise PolicySyntaxError(exc.lineno, exc.colno, exc.msg) from None


def _reject_constant(name: str) -> None:
    raise json.JSONDecodeError(f"non-finite number {name}", "", 0)


def parse_policy(text: str | bytes, lenient: bool = False) -> LayeredPrivacyPolicy:
    """Parse a policy JSON document.

    Raises PolicySyntaxError, SchemaError or DanglingEdge.
    """
    return policy_from_dict(loads_json(text), lenient=lenient)


def serialize_policy(policy: LayeredPrivacyPolicy) -> str:
    return dumps_canonical(policy_to_dict(policy))


def data_set(names: Iterable[str]) -> frozenset[DataElement]:
    """Shorthand: ``data_set(["User.email"])``."""
    return frozenset(DataElement.parse(n) for n in names)
