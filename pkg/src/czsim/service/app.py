"""FastAPI application exposing one endpoint per experiment command.

Every endpoint takes a fully merged run configuration (the CLI merges
command defaults, the config file, and flag overrides before posting)
and returns the tables and report as JSON; the client turns tables into
CSV files.  ``GET /v1/schema`` publishes the JSON schema configs are
validated against.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException

from .. import __version__, config, experiments


def _run(command: str, cfg: config.RunConfig) -> dict:
    cfg = cfg.model_copy(update={"command": command})
    start = time.perf_counter()
    try:
        result = experiments.run_command(cfg)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=422,
                            detail=f"{type(exc).__name__}: {exc}") from exc
    wall = time.perf_counter() - start
    return {
        "command": result.command,
        "tables": [{"name": t.name, "header": list(t.header),
                    "rows": [list(r) for r in t.rows]}
                   for t in result.tables],
        "report": result.report,
        "meta": {"config_hash": config.config_hash(cfg),
                 "tool_version": __version__, "wall_time_s": wall},
    }


def create_app() -> FastAPI:
    app = FastAPI(title="czsim",
                  description="Pulse-level CZ fault simulation service",
                  version=__version__)

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/v1/schema")
    def schema() -> dict:
        return config.config_schema()

    def register(command: str) -> None:
        def endpoint(cfg: config.RunConfig) -> dict:
            return _run(command, cfg)

        endpoint.__name__ = command.replace("-", "_")
        app.post(f"/v1/{command}", name=command)(endpoint)

    for command in config.COMMANDS:
        register(command)
    return app
