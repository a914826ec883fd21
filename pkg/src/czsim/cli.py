"""Command-line client: merges configuration, calls the service, writes
CSV/JSON artifacts.

By default each command talks to an in-process instance of the service;
``--server`` points at a running one instead (``czsim serve`` starts
it).  Either way the service does the work and the client owns all file
output, so results are identical in both modes.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import config, experiments
from . import __version__

_COMMAND_HELP = {
    "calibrate": "grid-search gate time and amplitude for each pulse family",
    "fault-sweep": "conditional-phase error and fidelity over a pulse-fault grid",
    "decoherence-bench": "depth-vs-fidelity decay curve with an exponential fit",
    "testgen": "chi-square test repetitions per input pattern and fault",
    "enumerate": "dump the fault universe of a circuit",
    "gate-sim": "single-gate run with an optional injected fault",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="czsim",
        description="Fault simulation toolkit for adiabatic transmon CZ gates")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in config.COMMANDS:
        sp = sub.add_parser(command, help=_COMMAND_HELP[command])
        sp.add_argument("--config", help="JSON config file merged over defaults")
        sp.add_argument("--out", help="output directory (default from config)")
        sp.add_argument("--seed", type=int, help="override the run seed")
        sp.add_argument("--workers", type=int, help="worker process count")
        sp.add_argument("--server",
                        help="base URL of a running service; omit to run in process")
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def _post(command: str, payload: dict, server: str | None) -> dict:
    if server is None:
        import asyncio

        from .service import create_app

        async def call() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://czsim.internal",
                                         timeout=None) as client:
                return await client.post(f"/v1/{command}", json=payload)

        response = asyncio.run(call())
    else:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(f"/v1/{command}", json=payload)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise SystemExit(f"czsim {command} failed ({response.status_code}): "
                         f"{detail}")
    return response.json()


def _summary_lines(command: str, report: dict) -> list[str]:
    lines = []
    if command == "calibrate":
        for family, best in sorted(report.get("best", {}).items()):
            lines.append(f"{family}: t_gate {best['t_gate_ns']:.1f} ns, "
                         f"fidelity {best['fidelity']:.6f}")
    elif command == "fault-sweep":
        if "baseline_fidelity" in report:
            lines.append(f"baseline fidelity {report['baseline_fidelity']:.6f}")
        for label, drop in sorted(report.get("max_drop", {}).items()):
            lines.append(f"max drop {label}: {drop:.4f}")
    elif command == "decoherence-bench":
        fit = report["fit"]
        lines.append(f"fit: tau {fit['tau']:.1f} layers, "
                     f"R^2 {fit['r_squared']:.4f}")
    elif command == "testgen":
        for circ, entry in sorted(report["summary"].get("all_cz", {}).items()):
            for eps, best in sorted(entry["best_by_epsilon"].items()):
                reps = best["repetitions"]
                label = "UNDETECTABLE" if reps is None else reps
                lines.append(f"{circ} all-CZ eps={eps}: pattern "
                             f"{best['pattern']}, repetitions {label}")
        n_un = len(report.get("single_cz_undetectable", []))
        n_det = len(report.get("single_cz_detectable", []))
        if n_un or n_det:
            lines.append(f"single-CZ: {n_det} detectable, {n_un} undetectable")
    elif command == "enumerate":
        lines.append(f"{report['circuit']}: {report['total_count']} faults "
                     f"({report['pulse_fault_count']} pulse-parameter) over "
                     f"{report['n_cz']} CZ gates at m={report['m']}")
    elif command == "gate-sim":
        lines.append(f"fidelity {report['fidelity']:.6f}, conditional phase "
                     f"{report['conditional_phase']:.6f} rad")
    return lines


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    if args.command == "schema":
        json.dump(config.config_schema(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0

    overrides = {"seed": args.seed, "workers": args.workers,
                 "out_dir": args.out}
    try:
        cfg = config.load_config(args.command, args.config, overrides)
    except (ValueError, OSError) as exc:
        raise SystemExit(f"config error: {exc}") from exc
    data = _post(args.command, cfg.model_dump(mode="json"), args.server)

    result = experiments.ExperimentResult(
        command=data["command"],
        tables=[experiments.Table(t["name"], tuple(t["header"]),
                                  [tuple(r) for r in t["rows"]])
                for t in data["tables"]],
        report=data["report"])
    paths = experiments.write_artifacts(result, cfg, cfg.out_dir,
                                        data["meta"]["wall_time_s"])
    for line in _summary_lines(args.command, data["report"]):
        print(line)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
