"""Command-line front door: validate, lint-rules, schema, transform, serve.

Exit codes: 0 success, 1 parse/validation failure, 2 usage error.
Diagnostics are line-oriented (``file:line:col: message`` for parse errors,
``file: element: message`` for validation reports).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from .content import render_content
from .graph import ContextGraph, ContextStore, IngestError, load_project
from .lexer import ParseError
from .metamodel import DomainModel, parse_domain_model
from .rules import GenerationError, RuleSet, check_rules, generate, parse_rules, standard_role_filter
from .server import build_state, serve
from .views import ViewConceptModel, builtin_views, emit_schema, parse_view_models


@dataclass
class Bundle:
    model: DomainModel
    views: tuple[ViewConceptModel, ...]
    graph: ContextGraph | None = None
    ruleset: RuleSet | None = None


class LoadFailure(Exception):
    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(diagnostics))


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise LoadFailure([f"{path}: file not found"])
    return p.read_text(encoding="utf-8")


def load_views(args: argparse.Namespace) -> tuple[ViewConceptModel, ...]:
    views = list(builtin_views())
    if getattr(args, "views", None):
        try:
            extra = parse_view_models(_read(args.views), filename=args.views)
        except ParseError as exc:
            raise LoadFailure([exc.diagnostic()]) from None
        known = {v.view_id for v in views}
        for view in extra:
            if view.view_id in known:
                raise LoadFailure([f"{args.views}: view {view.view_id!r} shadows a built-in view"])
            views.append(view)
    return tuple(views)


def load_bundle(args: argparse.Namespace) -> Bundle:
    """Parse every referenced file up front; any failure aborts the action."""
    try:
        model = parse_domain_model(_read(args.model), name=Path(args.model).stem, filename=args.model)
    except ParseError as exc:
        raise LoadFailure([exc.diagnostic()]) from None

    bundle = Bundle(model, load_views(args))

    if getattr(args, "rules", None):
        try:
            bundle.ruleset = parse_rules(_read(args.rules), filename=args.rules)
        except ParseError as exc:
            raise LoadFailure([exc.diagnostic()]) from None
        report = check_rules(bundle.ruleset, model, bundle.views)
        if not report.ok:
            raise LoadFailure([f"{args.rules}: {line}" for line in report.diagnostics()])

    if getattr(args, "project", None):
        try:
            bundle.graph = load_project(model, args.project)
        except ParseError as exc:
            raise LoadFailure([exc.diagnostic()]) from None
        except IngestError as exc:
            raise LoadFailure([f"{args.project}: {line}" for line in exc.diagnostics]) from None

    return bundle


def _cmd_validate(args: argparse.Namespace) -> int:
    load_bundle(args)
    print("ok")
    return 0


def _cmd_lint_rules(args: argparse.Namespace) -> int:
    load_bundle(args)
    print("ok")
    return 0


def _cmd_schema(args: argparse.Namespace) -> int:
    views = load_views(args)
    view = next((v for v in views if v.view_id == args.view), None)
    if view is None:
        print(f"unknown view {args.view!r}", file=sys.stderr)
        return 1
    _emit(emit_schema(view).schema_document, args.output)
    return 0


def _cmd_transform(args: argparse.Namespace) -> int:
    bundle = load_bundle(args)
    assert bundle.graph is not None and bundle.ruleset is not None
    view = next((v for v in bundle.views if v.view_id == args.view), None)
    if view is None:
        print(f"unknown view {args.view!r}", file=sys.stderr)
        return 1
    role_filter = standard_role_filter(bundle.model, args.role)
    try:
        content, _ = generate(bundle.ruleset, bundle.graph, view, role_filter)
    except GenerationError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    _emit(render_content(content), args.output)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    bundle = load_bundle(args)
    assert bundle.graph is not None and bundle.ruleset is not None
    store = ContextStore(bundle.model, bundle.graph)
    ui_dir = Path(args.ui) if args.ui else None
    if ui_dir is not None and not ui_dir.is_dir():
        print(f"{args.ui}: not a directory", file=sys.stderr)
        return 1
    state = build_state(store, bundle.views, bundle.ruleset, ui_dir=ui_dir)
    serve(state, host=args.host, port=args.port)
    return 0


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _model_args(parser: argparse.ArgumentParser, project: bool, rules: bool) -> None:
    parser.add_argument("--model", required=True, help="domain model (.cdm)")
    parser.add_argument("--views", help="additional view models (.cvm)")
    if project:
        parser.add_argument("--project", required=True, help="project file (.cpj)")
    if rules:
        parser.add_argument("--rules", required=True, help="transformation rules (.cvt)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopsync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate project files")
    _model_args(p, project=True, rules=False)
    p.add_argument("--rules", help="also lint these rules (.cvt)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("lint-rules", help="typecheck a rule file")
    _model_args(p, project=False, rules=True)
    p.set_defaults(func=_cmd_lint_rules)

    p = sub.add_parser("schema", help="emit the schema of one view")
    p.add_argument("--views", help="additional view models (.cvm)")
    p.add_argument("--view", required=True, help="view id")
    p.add_argument("-o", "--output", help="write to file instead of stdout")
    p.set_defaults(func=_cmd_schema)

    p = sub.add_parser("transform", help="generate one view's content")
    _model_args(p, project=True, rules=True)
    p.add_argument("--view", required=True, help="view id")
    p.add_argument("--role", default="coordinator", help="role filter (default coordinator)")
    p.add_argument("-o", "--output", help="write to file instead of stdout")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("serve", help="run the HTTP/ws service")
    _model_args(p, project=True, rules=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="static frontend directory to mount at /")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoadFailure as exc:
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
