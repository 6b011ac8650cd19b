"""Command-line client for the semagraph service.

Every data command talks to a service: either a remote one over HTTP
(``--server http://host:port``) or an in-process instance bound to a
config file (``--server local:CONFIG``), which is the embedded,
no-daemon mode. ``semagraph serve`` runs the HTTP service itself.

Exit codes: 0 ok, 1 usage, 2 data error, 3 engine error.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from .config import Config, load_config
from .errors import SemagraphError, UsageError as EngineUsage

DEFAULT_SERVER = "local:"

_EXIT_BY_CATEGORY = {"usage": 1, "data": 2, "engine": 3}


class Client:
    """Thin HTTP client; `local:` servers run the app in-process."""

    def __init__(self, server: str):
        self.server = server
        self._app = None
        if server.startswith("local:"):
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # starlette testclient deprecation noise
                from fastapi.testclient import TestClient

            from .service import create_app

            config_path = server[len("local:") :]
            config = load_config(config_path) if config_path else Config()
            self._app = create_app(config)
            self._http = TestClient(self._app, raise_server_exceptions=False)
        else:
            import httpx

            self._http = httpx.Client(base_url=server, timeout=600.0)

    def __enter__(self) -> "Client":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def call(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        try:
            if method == "GET":
                resp = self._http.get(path)
            else:
                resp = self._http.post(path, json=payload or {})
        except Exception as exc:  # noqa: BLE001 - connection problems
            _fail(f"cannot reach server {self.server}: {exc}", 3)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                category = body.get("category", "engine")
                message = body.get("message", resp.text)
            except Exception:  # noqa: BLE001
                category, message = "engine", resp.text
            _fail(message, _EXIT_BY_CATEGORY.get(category, 3))
        return resp.json()

    def close(self) -> None:
        if self._app is not None:
            self._app.state.db.close()  # embedded mode: checkpoint now
        self._http.close()


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_params(text: Optional[str]) -> dict:
    params = {}
    if not text:
        return params
    for pair in text.split(","):
        if "=" not in pair:
            _fail(f"bad --params entry {pair!r}, expected k=v", 1)
        key, _, raw = pair.partition("=")
        value: object = raw
        for caster in (int, float):
            try:
                value = caster(raw)
                break
            except ValueError:
                continue
        if raw.lower() in ("true", "false"):
            value = raw.lower() == "true"
        params[key.strip()] = value
    return params


def _print_rows(columns, rows, fmt: str) -> None:
    if fmt == "json-lines":
        for row in rows:
            click.echo(json.dumps(dict(zip(columns, row))))
        return
    if columns:
        click.echo("\t".join(columns))
    for row in rows:
        click.echo("\t".join(row))


@click.group()
@click.option("--server", default=DEFAULT_SERVER, envvar="SEMAGRAPH_SERVER", show_default=True,
              help="Service URL, or local:CONFIG for in-process mode.")
@click.pass_context
def main(ctx, server: str):
    ctx.obj = server


@main.command()
@click.option("--config", "config_path", default=None, help="Config file path.")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve(config_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = load_config(config_path) if config_path else Config()
    app = create_app(config)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


@main.command()
@click.option("--wipe", is_flag=True, help="Recreate the data directory from scratch.")
@click.pass_obj
def init(server, wipe):
    """Create (or reset) the store layout."""
    with Client(server) as client:
        out = client.call("POST", "/admin/init", {"wipe": wipe})
    click.echo(f"initialized {out['data_dir'] or '(in-memory)'}")


@main.command()
@click.option("--nodes", multiple=True, type=click.Path(), help="Node CSV path (repeatable).")
@click.option("--rels", multiple=True, type=click.Path(), help="Relationship CSV path (repeatable).")
@click.option("--blob-dir", default=None, type=click.Path(), help="Directory holding blob files.")
@click.option("--blob-column", default="blob_path", show_default=True)
@click.pass_obj
def load(server, nodes, rels, blob_dir, blob_column):
    """Ingest CSV files (idempotent per content hash)."""
    if not nodes and not rels:
        _fail("load needs --nodes and/or --rels", 1)
    with Client(server) as client:
        out = client.call(
            "POST",
            "/ingest",
            {"nodes": list(nodes), "rels": list(rels), "blob_dir": blob_dir, "blob_column": blob_column},
        )
    click.echo(
        f"loaded {out['nodes_created']} nodes, {out['rels_created']} rels, "
        f"{out['blobs_created']} blobs; {len(out['rejected'])} rejected, "
        f"{len(out['skipped_files'])} files skipped"
    )
    for line in out["rejected"]:
        click.echo(f"rejected: {line}", err=True)


@main.command()
@click.argument("text", required=False)
@click.option("--file", "file_path", type=click.Path(), help="Read the query from a file.")
@click.option("--params", default=None, help="Comma-separated k=v parameter bindings.")
@click.option("--format", "fmt", type=click.Choice(["tsv", "json-lines"]), default="tsv", show_default=True)
@click.option("--plan-mode", type=click.Choice(["greedy", "naive"]), default="greedy", hidden=True)
@click.pass_obj
def query(server, text, file_path, params, fmt, plan_mode):
    """Execute a query (prefix with EXPLAIN to see its plan)."""
    if text is None and file_path is None:
        _fail("query needs TEXT or --file", 1)
    if file_path is not None:
        with open(file_path, encoding="utf-8") as f:
            text = f.read()
    with Client(server) as client:
        out = client.call(
            "POST", "/query", {"text": text, "params": _parse_params(params), "plan_mode": plan_mode}
        )
    _print_rows(out["columns"], out["rows"], fmt)
    if out.get("summary"):
        click.echo(" ".join(f"{k}={v}" for k, v in out["summary"].items()), err=True)


@main.command()
@click.argument("text")
@click.pass_obj
def explain(server, text):
    """Print the optimized plan for a query."""
    with Client(server) as client:
        out = client.call("POST", "/explain", {"text": text})
    click.echo(out["plan"])


@main.command()
@click.pass_obj
def stats(server):
    """Show store statistics."""
    with Client(server) as client:
        out = client.call("GET", "/stats")
    for key in ("node_count", "rel_count", "blob_count", "avg_out_degree"):
        click.echo(f"{key}: {out[key]}")
    for label, count in sorted(out["label_counts"].items()):
        click.echo(f"label {label}: {count}")
    for rel_type, count in sorted(out["rel_type_counts"].items()):
        click.echo(f"type {rel_type}: {count}")


@main.command()
@click.pass_obj
def repl(server):
    """Interactive session; :quit, :stats, :explain <query>."""
    with Client(server) as client:
        click.echo("semagraph repl -- :quit to exit, :stats, :explain <query>")
        buffer = ""
        while True:
            try:
                line = input("sg> " if not buffer else "...> ")
            except EOFError:
                break
            stripped = line.strip()
            if not buffer:
                if stripped == ":quit":
                    break
                if stripped == ":stats":
                    out = client.call("GET", "/stats")
                    click.echo(
                        f"{out['node_count']} nodes, {out['rel_count']} rels, {out['blob_count']} blobs"
                    )
                    continue
                if stripped.startswith(":explain"):
                    out = client.call("POST", "/explain", {"text": stripped[len(":explain") :].strip()})
                    click.echo(out["plan"])
                    continue
            buffer = (buffer + "\n" + line) if buffer else line
            if not stripped.endswith(";"):
                continue
            text, buffer = buffer, ""
            try:
                out = client.call("POST", "/query", {"text": text, "params": {}})
            except SystemExit:
                continue  # stay in the repl after a failed query
            _print_rows(out["columns"], out["rows"], "tsv")
            if out.get("summary"):
                click.echo(" ".join(f"{k}={v}" for k, v in out["summary"].items()))


@main.command("bench-index")
@click.option("--vectors", default=10_000, show_default=True)
@click.option("--dim", default=64, show_default=True)
@click.option("--clusters", default=100, show_default=True)
@click.option("--buckets", default=100, show_default=True)
@click.option("--k", "ks", default="1,10,100,500", show_default=True, help="Comma-separated k values.")
@click.option("--nprobe", "nprobes", default="1", show_default=True, help="Comma-separated nprobe values ('all' allowed).")
@click.option("--repeats", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def bench_index(server, vectors, dim, clusters, buckets, ks, nprobes, repeats, seed):
    """Vector-index recall/latency benchmark against the exact oracle."""
    payload = {
        "vectors": vectors,
        "dim": dim,
        "clusters": clusters,
        "buckets": buckets,
        "ks": [int(x) for x in ks.split(",")],
        "nprobes": [x if x == "all" else int(x) for x in nprobes.split(",")],
        "repeats": repeats,
        "seed": seed,
    }
    with Client(server) as client:
        out = client.call("POST", "/bench/index", payload)
    click.echo(out["text"])


@main.command("cluster-sim")
@click.option("--replicas", default=5, show_default=True)
@click.option("--writes", default=1000, show_default=True)
@click.option("--drop", default=0.1, show_default=True)
@click.option("--min-delay", default=0, show_default=True)
@click.option("--max-delay", default=50, show_default=True)
@click.option("--late-joiner-lag", default=None, type=int, help="Join a fresh replica this many versions behind.")
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def cluster_sim(server, replicas, writes, drop, min_delay, max_delay, late_joiner_lag, seed):
    """Run the replication simulation and print per-node digests."""
    payload = {
        "replicas": replicas,
        "writes": writes,
        "drop_rate": drop,
        "min_delay": min_delay,
        "max_delay": max_delay,
        "seed": seed,
        "late_joiner_lag": late_joiner_lag,
    }
    with Client(server) as client:
        out = client.call("POST", "/cluster/sim", payload)
    click.echo(out["text"])


def run() -> None:
    try:
        main(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except EngineUsage as exc:
        click.echo(f"usage error: {exc}", err=True)
        sys.exit(1)
    except SemagraphError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_BY_CATEGORY.get(exc.category, 3))


if __name__ == "__main__":
    run()
