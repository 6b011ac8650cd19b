"""FastAPI service wrapping one embedded database instance.

The service owns the engine configured at startup; clients (the CLI
included) talk JSON. Engine errors map onto HTTP statuses by category:
usage 422, data 400, engine 500.
"""

from __future__ import annotations

import shutil
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..config import Config
from ..database import Database
from ..errors import SemagraphError
from .. import bench, ingest
from .models import (
    BenchIndexRequest,
    BenchIndexResponse,
    CheckpointResponse,
    ClusterSimRequest,
    ClusterSimResponse,
    ExplainRequest,
    ExplainResponse,
    IndexRequest,
    IngestRequest,
    IngestResponse,
    InitRequest,
    InitResponse,
    QueryRequest,
    QueryResponse,
    StatsResponse,
)

_STATUS_BY_CATEGORY = {"usage": 422, "data": 400, "engine": 500}


def create_app(config: Config | None = None, *, in_memory: bool = False) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app_: FastAPI):
        yield
        app_.state.db.close()  # checkpoint on shutdown

    app = FastAPI(title="semagraph", version="0.1.0", lifespan=lifespan)
    app.state.config = config or Config()
    app.state.db = Database(app.state.config, in_memory=in_memory)

    @app.exception_handler(SemagraphError)
    async def engine_error(request: Request, exc: SemagraphError):
        return JSONResponse(
            status_code=_STATUS_BY_CATEGORY.get(exc.category, 500),
            content={"error": type(exc).__name__, "category": exc.category, "message": str(exc)},
        )

    def db() -> Database:
        return app.state.db

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest):
        ctx = db().make_context(req.params)
        result = db().execute(req.text, req.params, plan_mode=req.plan_mode, ctx=ctx)
        table = result.rendered(ctx)
        columns = table[0] if table else result.columns
        rows = table[1:] if table else []
        return QueryResponse(
            columns=columns, rows=rows, summary=result.summary.as_dict() if result.summary else None
        )

    @app.post("/explain", response_model=ExplainResponse)
    def explain(req: ExplainRequest):
        return ExplainResponse(plan=db().explain(req.text))

    @app.post("/admin/init", response_model=InitResponse)
    def init(req: InitRequest):
        cfg = app.state.config
        if req.wipe and cfg.data_dir and db().data_dir:
            db().close()
            shutil.rmtree(cfg.data_dir, ignore_errors=True)
            app.state.db = Database(cfg)
        db().checkpoint()
        return InitResponse(data_dir=db().data_dir, created=True)

    @app.post("/ingest", response_model=IngestResponse)
    def load(req: IngestRequest):
        spec = ingest.IngestSpec(
            nodes=req.nodes, rels=req.rels, blob_dir=req.blob_dir, blob_column=req.blob_column
        )
        report = ingest.load(db(), spec)
        return IngestResponse(**report.as_dict())

    @app.get("/stats", response_model=StatsResponse)
    def stats():
        s = db().stats()
        return StatsResponse(
            node_count=s.node_count,
            rel_count=s.rel_count,
            label_counts=dict(s.label_counts),
            rel_type_counts=dict(s.rel_type_counts),
            avg_out_degree=s.avg_out_degree,
            blob_count=len(db().blobs._metas),
        )

    @app.post("/indexes")
    def create_index(req: IndexRequest):
        db().create_index(req.label, req.key)
        return {"created": True, "label": req.label, "key": req.key}

    @app.post("/checkpoint", response_model=CheckpointResponse)
    def checkpoint():
        return CheckpointResponse(snapshot=db().checkpoint())

    @app.post("/bench/index", response_model=BenchIndexResponse)
    def bench_index(req: BenchIndexRequest):
        report = bench.run_recall_bench(
            vectors=req.vectors,
            dim=req.dim,
            clusters=req.clusters,
            buckets=req.buckets,
            ks=tuple(req.ks),
            nprobes=tuple(req.nprobes),
            repeats=req.repeats,
            seed=req.seed,
        )
        return BenchIndexResponse(report=report.as_dict(), text=report.format())

    @app.post("/cluster/sim", response_model=ClusterSimResponse)
    def cluster_sim(req: ClusterSimRequest):
        report = bench.run_cluster_scenario(
            replicas=req.replicas,
            writes=req.writes,
            drop_rate=req.drop_rate,
            min_delay=req.min_delay,
            max_delay=req.max_delay,
            seed=req.seed,
            late_joiner_lag=req.late_joiner_lag,
        )
        return ClusterSimResponse(report=report.as_dict(), text=report.format())

    return app
