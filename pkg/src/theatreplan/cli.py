"""Command-line interface.

Subcommands: generate, solve, reschedule, buffer, experiment, serve.
Exit codes: 0 success, 1 usage error, 2 no solution, 3 internal error.
Errors print a single machine-parsable line `error: <message>`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    Disruption,
    ExperimentConfig,
    buffer_grid,
    reschedule,
    run_experiment,
)
from .colgen import CgParams
from .core import Surgery, evaluate, recover_rooms
from .errors import InputError, NoSolutionError, TheatrePlanError, ValidationError
from .instances import (
    GenSpec,
    generate,
    load_instance,
    load_solution,
    save_instance,
    save_solution,
    solution_hash,
)
from .money import money_str
from .pipeline import METHODS, solve_with_method
from .rga import RgaParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_SOLUTION = 2
EXIT_INTERNAL = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="theatreplan",
        description="Operating-room planning and scheduling toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic instance")
    gen.add_argument("--surgeries", type=int, required=True)
    gen.add_argument("--days", type=int, default=5)
    gen.add_argument("--surgeons", type=int, default=8)
    gen.add_argument("--rooms", type=int, default=5)
    gen.add_argument("--slot-minutes", type=int, default=5)
    gen.add_argument("--regular-hours", type=int, default=8)
    gen.add_argument("--overtime-hours", type=int, default=2)
    gen.add_argument("--duration-min", type=int, default=30)
    gen.add_argument("--duration-max", type=int, default=230)
    gen.add_argument("--due-min", type=int, default=1)
    gen.add_argument("--due-max", type=int, default=14)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)

    solve = sub.add_parser("solve", help="solve an instance")
    solve.add_argument("instance")
    solve.add_argument("--method", choices=sorted(METHODS), default="cg")
    solve.add_argument("--time-limit", type=float, default=None)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--population", type=int, default=None)
    solve.add_argument("--generations", type=int, default=None)
    solve.add_argument("-o", "--output", default=None)
    solve.add_argument("--report-dir", default=None)

    res = sub.add_parser("reschedule", help="rolling-horizon re-optimization")
    res.add_argument("instance")
    res.add_argument("--baseline", required=True)
    res.add_argument("--disruption", required=True)
    res.add_argument("--freeze-days", type=int, default=2)
    res.add_argument("--solver", choices=["pmiorps", "cg"], default="pmiorps")
    res.add_argument("--seed", type=int, default=0)
    res.add_argument("--time-limit", type=float, default=None)
    res.add_argument("-o", "--output", default=None)

    buf = sub.add_parser("buffer", help="buffer-time robustness study")
    buf.add_argument("instance")
    buf.add_argument("--grid", default="0,30,60,90,120")
    buf.add_argument("--seed", type=int, default=0)
    buf.add_argument("-o", "--output", default=None)
    buf.add_argument("--report-dir", default=None)

    exp = sub.add_parser("experiment", help="run a declarative experiment grid")
    exp.add_argument("config")
    exp.add_argument("-o", "--output", default=None)
    exp.add_argument("--report-dir", default=None)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--workers", type=int, default=None)
    srv.add_argument("--store", default=None)
    return parser


def load_disruption(path) -> Disruption:
    data = json.loads(Path(path).read_text())
    new_surgeries = tuple(
        Surgery(
            id=0,
            duration=s["duration"],
            due_day=data.get("arrival_day"),
            surgeon=s["surgeon"],
        )
        for s in data.get("new_surgeries", [])
    )
    return Disruption(
        kind=data.get("kind", "none"),
        arrival_day=data.get("arrival_day"),
        new_surgeries=new_surgeries,
        tightened=tuple((int(a), int(b)) for a, b in data.get("tightened", [])),
    )


def cmd_generate(args) -> int:
    spec = GenSpec(
        num_surgeries=args.surgeries,
        num_days=args.days,
        num_surgeons=args.surgeons,
        rooms_per_day=args.rooms,
        duration_range=(args.duration_min, args.duration_max),
        due_day_range=(args.due_min, args.due_max),
        slot_minutes=args.slot_minutes,
        regular_hours=args.regular_hours,
        overtime_hours=args.overtime_hours,
        seed=args.seed,
    )
    instance = generate(spec)
    save_instance(instance, args.output)
    print(
        f"generated {len(instance.surgeries)} surgeries over {instance.num_days} days "
        f"-> {args.output}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    rga_params = None
    if args.population or args.generations:
        rga_params = RgaParams(
            population=args.population or 254,
            generations=args.generations or 185,
            seed=args.seed,
            time_limit=args.time_limit,
        )
    outcome = solve_with_method(
        instance,
        args.method,
        seed=args.seed,
        time_limit=args.time_limit,
        rga_params=rga_params,
    )
    if outcome.schedule is None:
        return _fail(EXIT_NO_SOLUTION, f"{args.method} found no solution ({outcome.status})")
    schedule = outcome.schedule
    if schedule.cost_breakdown is None:
        schedule = schedule.with_costs(evaluate(schedule, instance))
    if args.output:
        save_solution(schedule, args.output, instance)
    from .report import kpi_summary_line

    print(kpi_summary_line(args.method, schedule))
    print(f"solution-hash: {solution_hash(schedule)}")
    if args.report_dir:
        _write_solve_report(args, instance, schedule, outcome)
    return EXIT_OK


def _write_solve_report(args, instance, schedule, outcome) -> None:
    from . import report

    out = Path(args.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    roomed = schedule
    if any(a.room is None for a in schedule.assignments.values()):
        roomed = recover_rooms(schedule, instance)
    report.plot_gantt(roomed, instance, out / "gantt.png")
    kpi = schedule.cost_breakdown
    report.write_kpi_csv(
        [
            {
                "instance": args.instance,
                "kind": "solve",
                "method": args.method,
                "status": outcome.status,
                "total": float(kpi.total),
                "postponement": float(kpi.postponement),
                "or_opening": float(kpi.or_opening),
                "overtime": float(kpi.overtime),
                "delta_pct": 0.0,
            }
        ],
        out / "kpi.csv",
    )
    nmcb = outcome.detail.get("nmcb")
    if nmcb:
        report.plot_operator_stats(nmcb, out / "operators.png")


def cmd_reschedule(args) -> int:
    instance = load_instance(args.instance)
    baseline = load_solution(args.baseline, instance)
    disruption = load_disruption(args.disruption)
    from .optimizer import MipLimits

    schedule, kpi = reschedule(
        baseline,
        instance,
        disruption,
        args.freeze_days,
        solver=args.solver,
        seed=args.seed,
        mip_limits=MipLimits(time_limit=args.time_limit) if args.time_limit else None,
    )
    if args.output:
        from .analysis import apply_disruption

        save_solution(schedule, args.output, apply_disruption(instance, disruption))
    print(
        f"rescheduled: total={money_str(kpi.total)} delta={kpi.delta_pct:.2f}% "
        f"postponement={money_str(kpi.postponement)} or_opening={money_str(kpi.or_opening)} "
        f"overtime={money_str(kpi.overtime)}"
    )
    return EXIT_OK


def cmd_buffer(args) -> int:
    instance = load_instance(args.instance)
    grid = [int(v) for v in args.grid.split(",") if v != ""]
    outcomes = buffer_grid(instance, grid, noise_seed=args.seed)
    rows = []
    for out in outcomes:
        row = {
            "instance": args.instance,
            "kind": "buffer",
            "method": f"B={out.buffer_minutes}",
            "status": "ok",
        }
        row.update(out.kpi.as_dict())
        rows.append(row)
        print(
            f"B={out.buffer_minutes:>3}: total={money_str(out.kpi.total)} "
            f"overtime={money_str(out.kpi.overtime)} delta={out.kpi.delta_pct:.2f}%"
        )
    if args.output:
        from .report import write_kpi_csv

        write_kpi_csv(rows, args.output)
    if args.report_dir:
        from . import report

        out_dir = Path(args.report_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.plot_buffer_curves(outcomes, out_dir / "buffer.png")
        report.write_kpi_csv(rows, out_dir / "buffer.csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    data = json.loads(Path(args.config).read_text())
    config = ExperimentConfig(
        instances=[GenSpec(**spec) for spec in data["instances"]],
        methods=data.get("methods", ["cg"]),
        buffers=data.get("buffers", []),
        emergencies=data.get("emergencies", 0),
        emergency_day=data.get("emergency_day", 3),
        freeze_days=data.get("freeze_days", 2),
        reschedule_solver=data.get("reschedule_solver", "pmiorps"),
        seed=data.get("seed", 0),
        time_limit=data.get("time_limit"),
    )
    rows = run_experiment(config)
    for row in rows:
        print(
            f"{row['instance']} {row['kind']} {row['method']}: {row['status']}"
            + (f" total={row['total']}" if "total" in row else "")
        )
    if args.output:
        from .report import write_kpi_csv

        write_kpi_csv(rows, args.output)
    if args.report_dir:
        from . import report

        out_dir = Path(args.report_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_kpi_csv(rows, out_dir / "experiment.csv")
        buffer_rows = [r for r in rows if r["kind"] == "buffer" and "total" in r]
        if buffer_rows:
            import matplotlib.pyplot as plt

            fig, ax = plt.subplots(figsize=(7, 4))
            ax.plot(
                [r["method"] for r in buffer_rows],
                [r["overtime"] for r in buffer_rows],
                marker="o",
            )
            ax.set_ylabel("realized overtime cost")
            ax.grid(alpha=0.3)
            fig.tight_layout()
            fig.savefig(out_dir / "experiment_overtime.png", dpi=120)
            plt.close(fig)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(workers=args.workers, store_dir=args.store)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "generate": cmd_generate,
        "solve": cmd_solve,
        "reschedule": cmd_reschedule,
        "buffer": cmd_buffer,
        "experiment": cmd_experiment,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except NoSolutionError as exc:
        return _fail(EXIT_NO_SOLUTION, str(exc))
    except (InputError, ValidationError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    except TheatrePlanError as exc:
        return _fail(EXIT_INTERNAL, str(exc))
    except Exception as exc:  # pragma: no cover - last resort
        return _fail(EXIT_INTERNAL, f"unexpected failure: {exc}")


if __name__ == "__main__":
    sys.exit(main())
