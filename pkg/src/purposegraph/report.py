"""Human-facing renderings: DOT graphs and the statistics table."""

from __future__ import annotations

from collections import Counter
from typing import Any

from .errors import SchemaError
from .lpl import LayeredPrivacyPolicy


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def policy_to_dot(policy: LayeredPrivacyPolicy) -> str:
    """Composed-purpose graph; composition edges solid, inheritance dashed."""
    lines = ["digraph purposes {"]
    for p in policy.purposes:
        data = "{" + ", ".join(sorted(d.qualified_name for d in p.data)) + "}"
        label = _dot_quote(p.id)[:-1] + "\\n" + _dot_quote(data)[1:]
        lines.append(f"  {_dot_quote(p.id)} [label={label}];")
    for e in policy.composition:
        lines.append(f"  {_dot_quote(e.parent)} -> {_dot_quote(e.child)};")
    for e in policy.hierarchy:
        lines.append(f"  {_dot_quote(e.parent)} -> {_dot_quote(e.child)} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _get(doc: dict, key: str, kind: type, path: str = "$") -> Any:
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required key")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise SchemaError(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _spread(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    for key in ("min", "max", "mean"):
        if key not in value:
            raise SchemaError(f"{path}.{key}", "missing required key")
        v = value[key]
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise SchemaError(f"{path}.{key}", "expected a number or null")
    return value


def summarize(doc: Any) -> dict:
    """Statistics summary of an extraction result document.

    Adds the transparency ratio (purposes per web service) and the breadth of
    the composition graph (largest out-degree) to the stored ``stats``.
    """
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    stats = _get(doc, "stats", dict)
    purposes = _get(doc, "purposes", list)
    services = doc.get("services", [])
    if not isinstance(services, list):
        raise SchemaError("$.services", "expected an array")
    composition = doc.get("composition", [])
    if not isinstance(composition, list):
        raise SchemaError("$.composition", "expected an array")
    degree: Counter[str] = Counter()
    for i, e in enumerate(composition):
        if not isinstance(e, dict) or not isinstance(e.get("parent"), str):
            raise SchemaError(f"$.composition[{i}]", "expected {parent, child}")
        degree[e["parent"]] += 1
    ratio = len(purposes) / len(services) if services else None
    return {
        "controllers": _get(stats, "nControllers", int, "$.stats"),
        "endpoints": _get(stats, "nEndpoints", int, "$.stats"),
        "endpointsPerController": _spread(stats.get("endpointsPerController"), "$.stats.endpointsPerController"),
        "controllersWithPersonalData": _get(stats, "nControllersWithPersonalData", int, "$.stats"),
        "endpointsUnderThem": _get(stats, "nEndpointsUnderThem", int, "$.stats"),
        "endpointsPerControllerWithPersonalData": _spread(
            stats.get("endpointsPerControllerWithPersonalData"), "$.stats.endpointsPerControllerWithPersonalData"
        ),
        "entityTypes": _get(stats, "nEntityTypes", int, "$.stats"),
        "purposes": len(purposes),
        "services": len(services),
        "ratio": ratio,
        "ratioFlag": ratio is not None and ratio <= 1,
        "breadth": max(degree.values(), default=0),
    }


def _one_decimal(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.1f}"


def _range(spread: dict) -> str:
    if spread["min"] is None:
        return "n/a"
    return f"[{spread['min']}, {spread['max']}]"


def format_stats(summary: dict) -> str:
    """Plain-text table; means and the ratio are printed with one decimal."""
    allc = summary["endpointsPerController"]
    pdc = summary["endpointsPerControllerWithPersonalData"]
    lines = [
        f"controllers: {summary['controllers']}, endpoints: {summary['endpoints']}, "
        f"mean: {_one_decimal(allc['mean'])}, ratio: {_one_decimal(summary['ratio'])}",
        f"all controllers: {summary['controllers']} controllers, total {summary['endpoints']} endpoints, "
        f"range {_range(allc)}, average {_one_decimal(allc['mean'])}",
        f"with personal data: {summary['controllersWithPersonalData']} controllers, "
        f"total {summary['endpointsUnderThem']} endpoints, range {_range(pdc)}, average {_one_decimal(pdc['mean'])}",
        f"entity types: {summary['entityTypes']}",
        f"purposes: {summary['purposes']}, services: {summary['services']}, "
        f"ratio: {_one_decimal(summary['ratio'])}, breadth: {summary['breadth']}",
    ]
    if summary["ratioFlag"]:
        lines.append(f"flag: transparency ratio {_one_decimal(summary['ratio'])} is not above 1")
    return "\n".join(lines) + "\n"
