"""Cooperation-context modelling, view generation, and cross-view sync."""

from .content import Element, ViewContent, content_document, parse_content, render_content
from .graph import (
    ContextGraph,
    ContextStore,
    Delta,
    Direction,
    Edge,
    IngestError,
    Node,
    PathExpression,
    PathStep,
    PublishError,
    load_project,
    neighbors,
    parse_project,
    publish,
    walk,
)
from .lexer import ParseError
from .metamodel import (
    DomainModel,
    Metamodel,
    ValidationReport,
    Violation,
    builtin_metamodel,
    parse_domain_model,
    print_domain_model,
    validate_graph,
)
from .rules import (
    COORDINATOR_ROLE,
    GenerationError,
    RoleFilter,
    RuleSet,
    TraceMap,
    check_rules,
    coordinator_filter,
    generate,
    parse_rules,
    print_rules,
    standard_role_filter,
)
from .sync import (
    CorrelationConfig,
    HighlightDirective,
    SelectionEvent,
    SessionManager,
    StaleVersionError,
    propagate,
)
from .views import (
    ViewConceptModel,
    ViewSchema,
    builtin_views,
    emit_schema,
    parse_schema,
    parse_view_models,
    validate_content,
)

__version__ = "0.1.0"

__all__ = [
    "COORDINATOR_ROLE",
    "ContextGraph",
    "ContextStore",
    "CorrelationConfig",
    "Delta",
    "Direction",
    "DomainModel",
    "Edge",
    "Element",
    "GenerationError",
    "HighlightDirective",
    "IngestError",
    "Metamodel",
    "Node",
    "ParseError",
    "PathExpression",
    "PathStep",
    "PublishError",
    "RoleFilter",
    "RuleSet",
    "SelectionEvent",
    "SessionManager",
    "StaleVersionError",
    "TraceMap",
    "ValidationReport",
    "ViewConceptModel",
    "ViewContent",
    "ViewSchema",
    "Violation",
    "builtin_metamodel",
    "builtin_views",
    "check_rules",
    "content_document",
    "coordinator_filter",
    "emit_schema",
    "generate",
    "load_project",
    "neighbors",
    "parse_content",
    "parse_domain_model",
    "parse_project",
    "parse_rules",
    "parse_schema",
    "parse_view_models",
    "print_domain_model",
    "print_rules",
    "propagate",
    "publish",
    "render_content",
    "standard_role_filter",
    "validate_content",
    "validate_graph",
    "walk",
]
