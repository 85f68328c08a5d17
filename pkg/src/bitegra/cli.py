"""Command line front end: batch subcommands and an interactive shell."""
from __future__ import annotations

import argparse
import json
import os
import re
import shlex
import sys
from pathlib import Path

from .chronos import NEG_INF, POS_INF, Period, parse_timestamp
from .database import Database
from .errors import BitegraError, QueryError, StorageError, UnknownRegistration
from .interchange import ImportFormatError, export_graph, import_graph, read_records
from .planner import emit_sql
from .render import FORMATS, render
from .storage import SchemaConfig

EXIT_OK, EXIT_USAGE, EXIT_QUERY, EXIT_IO = 0, 1, 2, 3
DEFAULT_DB = os.environ.get("BITEGRA_DB", "bitegra_data")
HELP = """\
statements end with ';'
  SELECT ...;                          run a query
  \\explain [sql] SELECT ...;           show the logical plan or the SQL text
  \\import <file> [--graph g] [--tx-time ts]
  \\export <file> [--graph g]
  \\register gcn|grcn [--sink path | --queue name] [--valid-from ts] [--valid-to ts] SELECT ...;
  \\deregister <id>                     \\registrations
  \\setprop <id> <key> <json> [--valid-from ts] [--valid-to ts]
  \\delprop <id> <key>                  \\delete <id>
  \\create <graph> [schema]             \\use <graph>        \\graphs      \\schema
  \\notifications [queue]               \\set format table|csv|jsonl
  \\help                                \\quit"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_schema(spec: str | None) -> SchemaConfig | None:
    """A schema JSON file, or a preset such as ``TFL+PAC``."""
    if not spec:
        return None
    if Path(spec).exists():
        return SchemaConfig.load(spec)
    m = re.fullmatch(r"(GVE|TFL|HyVE)\s*[+/,]\s*(PAC|PAT|HyPe)", spec.strip(), re.I)
    if not m:
        raise UsageError(f"schema {spec!r} is neither a file nor a preset like TFL+PAC")
    norm = {s.upper(): s for s in ("GVE", "TFL", "HyVE", "PAC", "PAT", "HyPe")}
    return SchemaConfig.preset(norm[m.group(1).upper()], norm[m.group(2).upper()])


def _timestamp(text: str | None, default: int) -> int:
    if text is None:
        return default
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _validity(valid_from: str | None, valid_to: str | None) -> Period | None:
    if valid_from is None and valid_to is None:
        return None
    return Period(_timestamp(valid_from, NEG_INF), _timestamp(valid_to, POS_INF))


def _ensure_graph(db: Database, name: str | None, schema: SchemaConfig | None):
    if name is None:
        return db.graph()
    if name not in db.graphs:
        return db.create_graph(name, schema)
    return db.graph(name)


def _endpoint(sink: str | None, queue: str | None):
    if sink:
        return "file:" + str(Path(sink).resolve())
    return f"queue:{queue or 'default'}"


# ---------------------------------------------------------------------------
# shell
# ---------------------------------------------------------------------------

_OPT_RE = re.compile(r"""(?:^|\s)--(sink|queue|valid-from|valid-to|graph)\s+("[^"]*"|\S+)""")


class Shell:
    def __init__(self, db: Database, schema: SchemaConfig | None = None, out=None,
                 base_dir: Path | None = None):
        self.db = db
        self.schema = schema
        self.out = out or sys.stdout
        self.base_dir = base_dir
        self.format = "table"
        self.errors = 0

    def echo(self, text: str = "") -> None:
        print(text, file=self.out)

    def _input_path(self, name: str) -> Path:
        p = Path(name)
        if not p.exists() and self.base_dir is not None and not p.is_absolute():
            alt = self.base_dir / p
            if alt.exists():
                return alt
        return p

    @staticmethod
    def complete(buffer: str) -> bool:
        text = buffer.strip()
        if not text:
            return False
        if text.startswith("\\"):
            head = text.split(None, 1)[0].lower()
            if head == "\\explain":
                return text.endswith(";")
            if head == "\\register":
                rest = _OPT_RE.sub(" ", text).split(None, 2)
                quoted = len(rest) > 2 and rest[2].startswith("'") and text.rstrip().endswith("'")
                return quoted or text.endswith(";")
            return True
        return text.endswith(";")

    def run_lines(self, lines) -> bool:
        """Execute statements from an iterable of lines; False once \\quit is seen."""
        buf = ""
        for line in lines:
            if not buf and not line.strip():
                continue
            if not buf and line.strip().startswith("//"):
                continue
            buf += line if line.endswith("\n") else line + "\n"
            if self.complete(buf):
                stmt, buf = buf.strip(), ""
                if not self.execute(stmt):
                    return False
        if buf.strip():
            return self.execute(buf.strip())
        return True

    def execute(self, stmt: str) -> bool:
        try:
            if stmt.startswith("\\"):
                return self.command(stmt)
            self.query(stmt.rstrip(";"))
        except (BitegraError, UsageError, OSError, ValueError) as exc:
            self.errors += 1
            self.echo(f"error: {exc}")
        return True

    def query(self, text: str) -> None:
        table = self.db.query(text)
        self.echo(render(table, self.format).rstrip("\n"))

    def command(self, stmt: str) -> bool:
        parts = stmt.split(None, 1)
        head = parts[0].lower()
        rest = parts[1].strip() if len(parts) > 1 else ""
        if head in ("\\quit", "\\q", "\\exit"):
            return False
        if head == "\\help":
            self.echo(HELP)
        elif head == "\\explain":
            text = rest.rstrip(";")
            if text[:3].lower() == "sql" and (len(text) == 3 or text[3].isspace()):
                self.echo(self.db.explain_sql(text[3:].strip()))
            else:
                prepared = self.db.prepare(text)
                self.echo(prepared.explain())
        elif head == "\\register":
            self.register(rest)
        else:
            handler = getattr(self, "cmd_" + head[1:], None)
            if handler is None:
                raise UsageError(f"unknown command {head}; try \\help")
            handler(shlex.split(rest))
        return True

    def register(self, rest: str) -> None:
        opts = {k: v.strip('"') for k, v in _OPT_RE.findall(rest)}
        text = _OPT_RE.sub(" ", rest).strip()
        kind, _, query = text.partition(" ")
        if kind.upper() not in ("GCN", "GRCN"):
            raise UsageError(f"notification type must be gcn or grcn, got {kind!r}")
        query = query.strip().rstrip(";").strip()
        if len(query) > 1 and query[0] == "'" and query[-1] == "'":
            query = query[1:-1].replace("''", "'")
        sink = opts.get("sink")
        if sink and self.base_dir is not None and not Path(sink).is_absolute():
            sink = str(self.base_dir / sink)  # scripts write next to themselves
        rid = self.db.register(query, kind.upper(), _validity(opts.get("valid-from"), opts.get("valid-to")),
                               _endpoint(sink, opts.get("queue")), opts.get("graph"))
        self.echo(f"registration {rid}")

    # -- simple commands -----------------------------------------------------------

    def _options(self, args: list[str], names: tuple[str, ...], positional: int):
        opts, pos = {}, []
        it = iter(args)
        for a in it:
            if a.startswith("--") and a[2:] in names:
                try:
                    opts[a[2:]] = next(it)
                except StopIteration:
                    raise UsageError(f"option {a} needs a value") from None
            else:
                pos.append(a)
        if len(pos) != positional:
            raise UsageError(f"expected {positional} argument(s), got {len(pos)}")
        return pos, opts

    def cmd_import(self, args):
        pos, opts = self._options(args, ("graph", "tx-time"), 1)
        path = self._input_path(pos[0])
        read_records(path)  # fail on a bad file before creating any graph
        store = _ensure_graph(self.db, opts.get("graph") or (None if self.db.graphs else "default"), self.schema)
        tx_time = _timestamp(opts["tx-time"], 0) if "tx-time" in opts else None
        v, e, p = import_graph(store, path, tx_time)
        self.echo(f"imported {v} vertices, {e} edges, {p} properties into {store.name}")

    def cmd_export(self, args):
        pos, opts = self._options(args, ("graph",), 1)
        store = self.db.graph(opts.get("graph"))
        n = export_graph(store, self._input_path(pos[0]))
        self.echo(f"exported {n} records from {store.name}")

    def cmd_create(self, args):
        if not 1 <= len(args) <= 2:
            raise UsageError("usage: \\create <graph> [schema]")
        self.db.create_graph(args[0], load_schema(args[1]) if len(args) > 1 else self.schema)
        self.echo(f"created graph {args[0]}")

    def cmd_use(self, args):
        if len(args) != 1:
            raise UsageError("usage: \\use <graph>")
        self.db.use(args[0])

    def cmd_graphs(self, args):
        for name, store in self.db.graphs.items():
            mark = "*" if name == self.db.graph().name else " "
            self.echo(f"{mark} {name}")

    def cmd_schema(self, args):
        store = self.db.graph(args[0] if args else None)
        for name in sorted(store.tables):
            self.echo(store.tables[name].describe())

    def cmd_setprop(self, args):
        pos, opts = self._options(args, ("valid-from", "valid-to"), 3)
        try:
            value = json.loads(pos[2])
        except json.JSONDecodeError:
            value = pos[2]
        store = self.db.graph()
        with store.begin() as tx:
            tx.set_property(int(pos[0]), pos[1], value, _validity(opts.get("valid-from"), opts.get("valid-to")))
        self.echo("ok")

    def cmd_delprop(self, args):
        if len(args) != 2:
            raise UsageError("usage: \\delprop <id> <key>")
        with self.db.graph().begin() as tx:
            tx.delete_property(int(args[0]), args[1])
        self.echo("ok")

    def cmd_delete(self, args):
        if len(args) != 1:
            raise UsageError("usage: \\delete <id>")
        with self.db.graph().begin() as tx:
            tx.delete_element(int(args[0]))
        self.echo("ok")

    def cmd_deregister(self, args):
        if len(args) != 1 or not args[0].isdigit():
            raise UsageError("usage: \\deregister <id>")
        self.db.deregister(int(args[0]))
        self.echo("ok")

    def cmd_registrations(self, args):
        for reg in self.db.cgn.registrations.values():
            self.echo(f"{reg.id} {reg.type} {reg.validity} {reg.endpoint.spec} {reg.query_text!r}")

    def cmd_notifications(self, args):
        q = self.db.cgn.queue(args[0] if args else "default")
        for n in q.drain():
            self.echo(json.dumps(n.to_json()))

    def cmd_set(self, args):
        if len(args) != 2 or args[0] != "format" or args[1] not in FORMATS:
            raise UsageError(f"usage: \\set format {'|'.join(FORMATS)}")
        self.format = args[1]


def _interactive_lines(prompt="bitegra> ", more="     ... "):
    buf = ""
    while True:
        try:
            line = input(more if buf.strip() else prompt)
        except EOFError:
            return
        buf += line + "\n"
        if Shell.complete(buf):
            buf = ""
        yield line


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _open(args) -> Database:
    return Database(args.db)


def cmd_repl(args) -> int:
    db = Database(args.db) if args.db else Database()
    shell = Shell(db, load_schema(args.schema))
    if args.script:
        shell.base_dir = Path(args.script).resolve().parent
        with open(args.script, encoding="utf-8") as fh:
            shell.run_lines(fh.readlines())
    elif sys.stdin.isatty():
        shell.run_lines(_interactive_lines())
    else:
        shell.run_lines(sys.stdin)
    return EXIT_OK


def cmd_import(args) -> int:
    read_records(args.file)  # fail on a bad file before creating any graph
    db = _open(args)
    store = _ensure_graph(db, args.graph, load_schema(args.schema))
    tx_time = _timestamp(args.tx_time, 0) if args.tx_time else None
    v, e, p = import_graph(store, args.file, tx_time)
    print(f"imported {v} vertices, {e} edges, {p} properties into {store.name}")
    return EXIT_OK


def cmd_export(args) -> int:
    store = _open(args).graph(args.graph)
    n = export_graph(store, args.file)
    print(f"exported {n} records from {store.name}")
    return EXIT_OK


def _query_text(args) -> str:
    if args.expr:
        return args.expr
    if args.file:
        return Path(args.file).read_text(encoding="utf-8")
    raise UsageError("give a query with -e or -f")


def cmd_query(args) -> int:
    db = _open(args)
    text = _query_text(args).strip().rstrip(";")
    if args.explain:
        out = emit_sql(db.prepare(text, args.graph))
    else:
        out = render(db.query(text, args.graph), args.format)
    if args.out:
        Path(args.out).write_text(out if out.endswith("\n") else out + "\n", encoding="utf-8")
    else:
        print(out.rstrip("\n"))
    return EXIT_OK


def cmd_register(args) -> int:
    db = _open(args)
    text = _query_text(args).strip().rstrip(";")
    rid = db.register(text, args.type.upper(), _validity(args.valid_from, args.valid_to),
                      _endpoint(args.sink, args.queue), args.graph)
    print(rid)
    return EXIT_OK


def cmd_deregister(args) -> int:
    _open(args).deregister(args.id)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bitegra", description="Bitemporal property graph database")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("repl", help="interactive shell (reads a script or stdin when not a terminal)")
    r.add_argument("--db", help="database directory (in-memory when omitted)")
    r.add_argument("--schema", help="schema config JSON or preset such as TFL+PAC")
    r.add_argument("--script", help="run statements from a file")
    r.set_defaults(func=cmd_repl)

    i = sub.add_parser("import", help="load a JSON-lines graph file in one transaction")
    i.add_argument("file")
    i.add_argument("--graph", required=True)
    i.add_argument("--db", default=DEFAULT_DB)
    i.add_argument("--schema", help="schema for a newly created graph")
    i.add_argument("--tx-time", help="transaction time stamped on the load commit")
    i.set_defaults(func=cmd_import)

    x = sub.add_parser("export", help="write the current state of a graph as JSON lines")
    x.add_argument("file")
    x.add_argument("--graph")
    x.add_argument("--db", default=DEFAULT_DB)
    x.set_defaults(func=cmd_export)

    q = sub.add_parser("query", help="run one query")
    q.add_argument("-e", "--expr")
    q.add_argument("-f", "--file")
    q.add_argument("--db", default=DEFAULT_DB)
    q.add_argument("--graph")
    q.add_argument("--format", choices=FORMATS, default="table")
    q.add_argument("--out", help="write the result to a file")
    q.add_argument("--explain", action="store_true", help="print the SQL translation instead")
    q.set_defaults(func=cmd_query)

    g = sub.add_parser("register", help="register a continuous notification")
    g.add_argument("--type", required=True, type=str.lower, choices=("gcn", "grcn"))
    g.add_argument("-e", "--expr")
    g.add_argument("-f", "--file")
    g.add_argument("--sink", help="JSON-lines file receiving notifications")
    g.add_argument("--queue", help="in-memory queue name (when no sink)")
    g.add_argument("--valid-from")
    g.add_argument("--valid-to")
    g.add_argument("--db", default=DEFAULT_DB)
    g.add_argument("--graph")
    g.set_defaults(func=cmd_register)

    d = sub.add_parser("deregister", help="remove a registration")
    d.add_argument("id", type=int)
    d.add_argument("--db", default=DEFAULT_DB)
    d.set_defaults(func=cmd_deregister)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bitegra: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImportFormatError, OSError) as exc:
        print(f"bitegra: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QueryError, StorageError, UnknownRegistration, ValueError) as exc:
        print(f"bitegra: {exc}", file=sys.stderr)
        return EXIT_QUERY


if __name__ == "__main__":
    sys.exit(main())
