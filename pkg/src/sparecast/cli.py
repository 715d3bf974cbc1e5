"""Command-line gateway.

Exit codes: 0 clean analysis, 2 hotspots remain (human attention needed),
1 document or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import DEFAULT_CONFIG, load_config
from .decisions import CostModel, cost_model_to_json
from .errors import DocumentError, SparecastError
from .report import build_report, render_json, render_text
from .revision import (
    ACTION_DECLARE_CERTAIN,
    ACTION_MANUAL_OVERRIDE,
    ACTION_RUN_ALL,
    HARD_CAP_EXPONENT,
    SessionStore,
)

_ACTION_NAMES = {
    "declare-certain": ACTION_DECLARE_CERTAIN,
    "override": ACTION_MANUAL_OVERRIDE,
    "run-all": ACTION_RUN_ALL,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparecast",
        description="Spare-parts forecasting engine over a part and assembly tree",
    )
    parser.add_argument(
        "--show-config",
        action="store_true",
        help="dump the default tables and cost model as JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p_analyze = sub.add_parser("analyze", help="run the full pipeline on a document")
    p_analyze.add_argument("input", help="path to the input JSON document")
    p_analyze.add_argument("--format", choices=("json", "text"), default="text")
    p_analyze.add_argument("--out", help="write the report here instead of stdout")
    p_analyze.add_argument("--journal", help="write the session journal here (enables resolve)")
    p_analyze.add_argument("--config", help="engine config path (else SPARECAST_CONFIG)")

    p_resolve = sub.add_parser("resolve", help="resolve hotspots in a journaled session")
    p_resolve.add_argument("--journal", required=True, help="session journal to load and append")
    p_resolve.add_argument("--hotspot", help="hotspot id, e.g. H1")
    p_resolve.add_argument("--action", choices=sorted(_ACTION_NAMES))
    p_resolve.add_argument("--mode", help="mode id for declare-certain")
    p_resolve.add_argument("--type", choices=("random", "wearout"), help="declared mode type")
    p_resolve.add_argument("--spared", choices=("yes", "no"), help="override: spare the node?")
    p_resolve.add_argument(
        "--stock",
        action="append",
        default=[],
        metavar="ECHELON=QTY",
        help="override stocking, repeatable (car|branch|regional_dc|factory)",
    )
    p_resolve.add_argument("--note", default="", help="override note for the justification")
    p_resolve.add_argument(
        "--unsafe-cap",
        type=int,
        default=HARD_CAP_EXPONENT,
        metavar="EXP",
        help=f"raise the run-all scenario cap above 2^{HARD_CAP_EXPONENT}",
    )
    p_resolve.add_argument("--config", help="engine config path")
    p_resolve.add_argument("--format", choices=("json", "text"), default="text")

    p_serve = sub.add_parser("serve", help="serve the HTTP API and workbench UI")
    p_serve.add_argument("--input", required=True, help="document to load as session s1")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8437)
    p_serve.add_argument("--assets", help="static UI assets directory (default frontend/dist)")
    p_serve.add_argument("--config", help="engine config path")
    return parser


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _read_document(path: str) -> str | None:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None


def _print_report(session, store, fmt: str, out: str | None) -> int:
    hotspots = store.detect_hotspots(session.id)
    report = build_report(session, hotspots)
    rendered = render_json(report) if fmt == "json" else render_text(report)
    if out:
        Path(out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 2 if hotspots else 0


def _cmd_analyze(args) -> int:
    text = _read_document(args.input)
    if text is None:
        return 1
    store = SessionStore(load_config(args.config) if args.config else load_config())
    try:
        session = store.create(text)
    except DocumentError as exc:
        node = f" (node {exc.node_id})" if exc.node_id else ""
        return _fail(f"invalid document: {exc}{node}")
    except SparecastError as exc:
        return _fail(str(exc))
    code = _print_report(session, store, args.format, args.out)
    if args.journal:
        Path(args.journal).write_text("\n".join(session.journal_lines) + "\n", encoding="utf-8")
    return code


def _resolve_params(args) -> tuple[str, dict] | None:
    action = _ACTION_NAMES[args.action]
    if action == ACTION_DECLARE_CERTAIN:
        if not args.mode or not args.type:
            print("error: declare-certain needs --mode and --type", file=sys.stderr)
            return None
        return action, {"mode": args.mode, "mode_type": args.type}
    if action == ACTION_MANUAL_OVERRIDE:
        if args.spared is None:
            print("error: override needs --spared yes|no", file=sys.stderr)
            return None
        stocking = []
        for spec in args.stock:
            try:
                echelon, qty = spec.split("=", 1)
                stocking.append([echelon, int(qty)])
            except ValueError:
                print(f"error: bad --stock spec {spec!r}", file=sys.stderr)
                return None
        return action, {"spared": args.spared == "yes", "stocking": stocking, "note": args.note}
    return action, {}


def _apply_resolution(store, session, args, action, params) -> int:
    try:
        store.resolve(
            session.id,
            args.hotspot,
            action,
            params,
            hard_cap_exponent=args.unsafe_cap,
        )
    except SparecastError as exc:
        return _fail(str(exc))
    Path(args.journal).write_text("\n".join(session.journal_lines) + "\n", encoding="utf-8")
    remaining = store.detect_hotspots(session.id)
    print(f"resolved {args.hotspot}; {len(remaining)} hotspot(s) remain")
    return 0


def _interactive_resolve(store, session, args) -> int:
    while True:
        hotspots = store.detect_hotspots(session.id)
        if not hotspots:
            print("analysis complete: no hotspots remain")
            break
        print(f"\n{len(hotspots)} hotspot(s):")
        for h in hotspots:
            print(
                f"  {h.id} {h.kind} at {h.node_id} modes={','.join(h.driving_modes)} "
                f"frontier={h.frontier} swing={h.swing_cents:.0f}c"
            )
        print(
            "commands: declare <H> <mode> <random|wearout> | override <H> <yes|no> [echelon=qty ...]"
            " | run-all <H> | quit"
        )
        try:
            line = input("resolve> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line in ("q", "quit", "exit"):
            break
        words = line.split()
        try:
            if words[0] == "declare" and len(words) == 4:
                store.resolve(
                    session.id,
                    words[1],
                    ACTION_DECLARE_CERTAIN,
                    {"mode": words[2], "mode_type": words[3]},
                )
            elif words[0] == "override" and len(words) >= 3:
                stocking = [w.split("=", 1) for w in words[3:]]
                store.resolve(
                    session.id,
                    words[1],
                    ACTION_MANUAL_OVERRIDE,
                    {
                        "spared": words[2] == "yes",
                        "stocking": [[e, int(q)] for e, q in stocking],
                    },
                )
            elif words[0] == "run-all" and len(words) == 2:
                store.resolve(session.id, words[1], ACTION_RUN_ALL, {})
            else:
                print("unrecognized command")
                continue
        except SparecastError as exc:
            print(f"error: {exc}")
            continue
        Path(args.journal).write_text("\n".join(session.journal_lines) + "\n", encoding="utf-8")
    return 0


def _cmd_resolve(args) -> int:
    journal_path = Path(args.journal)
    try:
        journal_text = journal_path.read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot read journal {args.journal}: {exc}")
    store = SessionStore(load_config(args.config) if args.config else load_config())
    try:
        session = store.replay(journal_text)
    except SparecastError as exc:
        return _fail(f"cannot replay journal: {exc}")

    if args.hotspot and args.action:
        parsed = _resolve_params(args)
        if parsed is None:
            return 1
        action, params = parsed
        return _apply_resolution(store, session, args, action, params)
    if args.hotspot or args.action:
        return _fail("--hotspot and --action go together")
    if not sys.stdin.isatty():
        return _fail("no --hotspot/--action given and stdin is not a terminal")
    return _interactive_resolve(store, session, args)


def _cmd_serve(args) -> int:
    from .service import EngineService, make_server

    text = _read_document(args.input)
    if text is None:
        return 1
    store = SessionStore(load_config(args.config) if args.config else load_config())
    try:
        session = store.create(text)
    except SparecastError as exc:
        return _fail(f"invalid document: {exc}")
    assets = args.assets
    if assets is None:
        bundled = Path.cwd() / "frontend" / "dist"
        assets = str(bundled) if bundled.is_dir() else None
    service = EngineService(store, session.id, assets_dir=assets)
    try:
        server = make_server(service, args.host, args.port)
    except OSError as exc:
        return _fail(f"cannot bind {args.host}:{args.port}: {exc}")
    print(f"serving session {session.id} on http://{args.host}:{args.port}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _show_config() -> int:
    cfg = DEFAULT_CONFIG
    dump = {
        "class_table": {
            tag: {
                "default_rate": {
                    "low": e.default_rate.low,
                    "best": e.default_rate.best,
                    "high": e.default_rate.high,
                },
                "default_mode_type": e.default_mode_type.value,
                "default_p_wearout": e.default_p_wearout,
                "times": None
                if e.times is None
                else {
                    "swap_hours": e.times.swap_hours,
                    "disassembly_hours": e.times.disassembly_hours,
                    "repair_hours": e.times.repair_hours,
                },
            }
            for tag, e in sorted(cfg.class_table.entries.items())
        },
        "indicator_table": {
            tag: {
                "likelihood_ratio_wearout": e.likelihood_ratio_wearout,
                "rate_factor": e.rate_factor,
            }
            for tag, e in sorted(cfg.indicator_table.entries.items())
        },
        "enumeration_cap": cfg.enumeration_cap,
        "kit_epsilon": cfg.kit_epsilon,
        "cost_model": cost_model_to_json(CostModel()),
    }
    print(json.dumps(dump, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        return _show_config()
    if args.command == "analyze":
        return _cmd_analyze(args)
    if args.command == "resolve":
        return _cmd_resolve(args)
    if args.command == "serve":
        return _cmd_serve(args)
    parser.print_help()
    return 1


if __name__ == "__main__":
    sys.exit(main())
