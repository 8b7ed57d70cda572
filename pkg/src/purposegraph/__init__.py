"""Composed privacy-policy purposes: model, validation, service nets and
static extraction from annotated service code."""

from .extractor import (
    CallGraph,
    Defaults,
    ExtractionResult,
    MethodRef,
    SymbolTable,
    build_call_graph,
    extract,
    generate,
    index,
    load_corpus,
    reachable_data,
)
from .lpl import (
    DataElement,
    DataRecipient,
    InheritanceEdge,
    LayeredPrivacyPolicy,
    Ordering,
    PrivacyModel,
    Purpose,
    RecipientKind,
    Retention,
    RetentionType,
    UnderlyingPurposeEdge,
    parse_policy,
    privacy_model_compare,
    retention_compare,
    serialize_policy,
)
from .minisvc import format_unit, parse, parse_source, tokenize
from .servicenet import GovEdge, ServiceNet, Transition, WebService, check_coverage, pd, validate_net
from .validator import Rule, ValidationReport, Violation, check_acyclic, check_edge, closure, validate

__version__ = "0.1.0"

__all__ = [
    "build_call_graph",
    "CallGraph",
    "check_acyclic",
    "check_coverage",
    "check_edge",
    "closure",
    "DataElement",
    "DataRecipient",
    "Defaults",
    "extract",
    "ExtractionResult",
    "format_unit",
    "generate",
    "GovEdge",
    "index",
    "InheritanceEdge",
    "LayeredPrivacyPolicy",
    "load_corpus",
    "MethodRef",
    "Ordering",
    "parse",
    "parse_policy",
    "parse_source",
    "pd",
    "privacy_model_compare",
    "PrivacyModel",
    "Purpose",
    "reachable_data",
    "RecipientKind",
    "Retention",
    "retention_compare",
    "RetentionType",
    "Rule",
    "serialize_policy",
    "ServiceNet",
    "SymbolTable",
    "tokenize",
    "Transition",
    "UnderlyingPurposeEdge",
    "validate",
    "validate_net",
    "ValidationReport",
    "Violation",
    "WebService",
]
