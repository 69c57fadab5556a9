"""Command-line front end: one-shot query runner, REPL, checker, and fuzzer.

Exit codes: 0 success, 1 parse/type/runtime error in a query, 2 snapshot or
store error. Results go to stdout, diagnostics to stderr. GRQL_SEED, when
set, is the default permutation seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import harness
from .desugar import DesugarError, desugar
from .evaluator import EvalConfig, EvalFault, IdAllocator, evaluate
from .model import Cardinality, ComputedType, Schema, Store, format_type
from .parser import build_schema, parse_query, parse_schema
from .serialize import debug_print, serialize, to_json_text
from .store_io import LoadedSnapshot, SnapshotError, load_snapshot, save_snapshot
from .surface import ParseError
from .typecheck import TypeCheckError, synth
from .wellformed import check_schema

EXIT_OK = 0
EXIT_QUERY_ERROR = 1
EXIT_STORE_ERROR = 2


def _env_seed() -> int | None:
    raw = os.environ.get("GRQL_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


@dataclass
class Session:
    """REPL/runner state; the store always passes check_store between
    commands, and edit marks reset at the start of every query."""

    schema: Schema
    store: Store
    schema_text: str
    next_id: int
    seed: int | None = None
    dedup: bool = False
    fmt: str = "json"
    dirty: bool = False

    @classmethod
    def from_snapshot(cls, snap: LoadedSnapshot, **kw) -> Session:
        return cls(snap.schema, snap.store, snap.schema_text, snap.next_id, **kw)

    def run_query(self, text: str) -> tuple[object, ComputedType, Cardinality]:
        """Parse, lower, check, and evaluate one query against the session
        store; commits the new store to the session on success."""
        expr = desugar(parse_query(text))
        ty, card = synth(self.schema, {}, expr)
        allocator = IdAllocator(max(self.next_id, self.store.max_numeric_id() + 1))
        config = EvalConfig(permutation_seed=self.seed, dedup_projections=self.dedup,
                            id_allocator=allocator)
        store = self.store.unlock_all()
        outcome = evaluate(self.schema, config, {}, store, store, expr)
        if outcome.store_after.tuples != self.store.tuples:
            self.dirty = True
        self.store = outcome.store_after.unlock_all()
        self.next_id = allocator.next_id
        return outcome.result, ty, card

    def render(self, result, ty, card, pretty: bool) -> str:
        if self.fmt == "debug":
            return debug_print(result)
        return to_json_text(serialize(result, ty, card), pretty=pretty)


def _strip_query(text: str) -> str:
    text = text.strip()
    if text.endswith(";"):
        text = text[:-1]
    return text


def _write_snapshot(path: str, text: str) -> None:
    """Single-writer discipline: hold an advisory exclusive lock while the
    snapshot bytes go out (POSIX only; a no-op elsewhere)."""
    with open(path, "w", encoding="utf-8") as fh:
        try:
            import fcntl

            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        except ImportError:
            pass
        fh.write(text)


def cmd_run(args) -> int:
    try:
        with open(args.store, encoding="utf-8") as fh:
            snap = load_snapshot(fh.read())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STORE_ERROR
    except SnapshotError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_STORE_ERROR

    session = Session.from_snapshot(snap, seed=args.seed, dedup=args.dedup, fmt=args.format)
    try:
        result, ty, card = session.run_query(_strip_query(args.query))
    except (ParseError, DesugarError, TypeCheckError, EvalFault) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUERY_ERROR

    print(session.render(result, ty, card, pretty=False))
    if args.commit:
        _write_snapshot(args.store,
                        save_snapshot(session.schema_text, session.store, session.next_id))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        with open(args.path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STORE_ERROR

    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            schema = load_snapshot(text).schema
        except SnapshotError as exc:
            for d in exc.diagnostics:
                print(d, file=sys.stderr)
            return EXIT_STORE_ERROR
    else:
        # a bare schema file
        try:
            schema, diags = build_schema(parse_schema(text))
        except ParseError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_STORE_ERROR
        diags.extend(check_schema(schema))
        if diags:
            for d in diags:
                print(d, file=sys.stderr)
            return EXIT_STORE_ERROR

    if args.query is not None:
        try:
            ty, card = synth(schema, {}, desugar(parse_query(_strip_query(args.query))))
        except (ParseError, DesugarError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_QUERY_ERROR
        except TypeCheckError as exc:
            print(exc, file=sys.stderr)
            return EXIT_QUERY_ERROR
        print(f"{format_type(ty)} # {card}")
    return EXIT_OK


def _repl_help() -> str:
    return (
        "meta commands:\n"
        "  \\schema        print the schema source\n"
        "  \\type EXPR     print the synthesized type and cardinality\n"
        "  \\save          persist the session store to the snapshot file\n"
        "  \\seed N        set the permutation seed (\\seed off to clear)\n"
        "  \\dedup on|off  toggle projection de-duplication\n"
        "  \\quit          exit\n"
        "queries end with ';'"
    )


def cmd_repl(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        with open(args.store, encoding="utf-8") as fh:
            snap = load_snapshot(fh.read())
    except (OSError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STORE_ERROR

    session = Session.from_snapshot(snap, seed=args.seed, dedup=args.dedup, fmt=args.format)
    buffer = ""
    interactive = stdin is sys.stdin and sys.stdin.isatty()

    def emit(line: str) -> None:
        print(line, file=stdout)

    while True:
        if interactive:
            print("grql> " if not buffer else "....> ", end="", flush=True)
        line = stdin.readline()
        if not line:
            break
        stripped = line.strip()
        if not buffer and stripped.startswith("\\"):
            parts = stripped.split(None, 1)
            cmd, rest = parts[0], parts[1] if len(parts) > 1 else ""
            if cmd == "\\quit":
                return EXIT_OK
            if cmd == "\\help":
                emit(_repl_help())
            elif cmd == "\\schema":
                emit(session.schema_text.rstrip("\n"))
            elif cmd == "\\type":
                try:
                    expr = desugar(parse_query(_strip_query(rest)))
                    ty, card = synth(session.schema, {}, expr)
                    emit(f"{format_type(ty)} # {card}")
                except (ParseError, DesugarError, TypeCheckError) as exc:
                    emit(f"error: {exc}")
            elif cmd == "\\save":
                _write_snapshot(args.store,
                                save_snapshot(session.schema_text, session.store,
                                              session.next_id))
                session.dirty = False
                emit(f"saved {args.store}")
            elif cmd == "\\seed":
                if rest.strip().lower() in ("off", ""):
                    session.seed = None
                    emit("seed off")
                else:
                    try:
                        session.seed = int(rest)
                        emit(f"seed {session.seed}")
                    except ValueError:
                        emit("error: \\seed takes an integer or 'off'")
            elif cmd == "\\dedup":
                session.dedup = rest.strip().lower() == "on"
                emit(f"dedup {'on' if session.dedup else 'off'}")
            else:
                emit(f"unknown command {cmd}; \\help lists commands")
            continue

        buffer += line
        while ";" in buffer:
            query, _, buffer = buffer.partition(";")
            if not query.strip():
                continue
            try:
                result, ty, card = session.run_query(query)
                emit(session.render(result, ty, card, pretty=True))
            except (ParseError, DesugarError, TypeCheckError, EvalFault) as exc:
                emit(f"error: {exc}")
        if not buffer.strip():
            buffer = ""
    return EXIT_OK


def cmd_fuzz(args) -> int:
    if args.replay:
        with open(args.replay, encoding="utf-8") as fh:
            ce = harness.replay_counterexample(fh.read())
        if ce is None:
            print("replay: no failure reproduced")
            return EXIT_OK
        print(f"replay: {ce.property_name}: {ce.witness}", file=sys.stderr)
        print(ce.expr_text, file=sys.stderr)
        return EXIT_QUERY_ERROR

    failures, coverage = harness.run_fuzz(args.cases, args.seed, workers=args.workers)
    total = sum(coverage.values())
    print(f"{args.cases} cases, {total} expression nodes, "
          f"{len(failures)} counter-example(s)")
    if not failures:
        return EXIT_OK
    for ce in failures:
        shrunk = harness.shrink(ce) if ce.instance is not None else ce
        path = f"counterexample-{shrunk.seed}.json"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(harness.counterexample_to_json(shrunk))
        print(f"{shrunk.property_name}: {shrunk.witness} -> {path}", file=sys.stderr)
    return EXIT_QUERY_ERROR


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grql",
                                description="graph-relational query calculus tools")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=_env_seed(),
                        help="permutation seed (default: GRQL_SEED or canonical order)")
        sp.add_argument("--format", choices=("json", "debug"), default="json")
        sp.add_argument("--dedup", action="store_true",
                        help="de-duplicate object projections (diverges from the formal semantics)")

    run = sub.add_parser("run", help="evaluate one query against a snapshot")
    run.add_argument("store", help="path to a .grdb.json snapshot")
    run.add_argument("query")
    run.add_argument("--commit", action="store_true", help="write the resulting store back")
    common(run)
    run.set_defaults(fn=cmd_run)

    repl = sub.add_parser("repl", help="interactive session")
    repl.add_argument("store")
    common(repl)
    repl.set_defaults(fn=cmd_repl)

    check = sub.add_parser("check", help="validate a snapshot or schema file")
    check.add_argument("path")
    check.add_argument("--query", help="also type-check a query and print its type # cardinality")
    check.set_defaults(fn=cmd_check)

    fuzz = sub.add_parser("fuzz", help="run the metatheory property suite")
    fuzz.add_argument("--cases", type=int, default=1000)
    fuzz.add_argument("--seed", type=int, default=_env_seed() or 1)
    fuzz.add_argument("--workers", type=int, default=1)
    fuzz.add_argument("--replay", help="re-run a stored counterexample file")
    fuzz.set_defaults(fn=cmd_fuzz)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
