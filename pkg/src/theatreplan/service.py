"""JSON-over-HTTP service: instances, asynchronous solve jobs,
solutions with Gantt rows, what-if rescheduling and buffer analysis.

Ids are content hashes, so identical requests deduplicate naturally.
Results are immutable once done; a solution is only published after it
passes the feasibility check.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .analysis import Disruption, apply_disruption, buffer_grid, reschedule
from .core import Schedule, Surgery, check_feasibility, evaluate, recover_rooms
from .errors import NoSolutionError, TheatrePlanError, ValidationError
from .instances import (
    GenSpec,
    generate,
    instance_from_dict,
    instance_hash,
    instance_to_dict,
    schedule_from_dict,
    schedule_to_dict,
    solution_hash,
)
from .money import money_str
from .pipeline import METHODS, solve_with_method
from .rga import RgaParams


class GenerateRequest(BaseModel):
    num_surgeries: int
    num_days: int = 5
    num_surgeons: int = 8
    rooms_per_day: int = 5
    slot_minutes: int = 5
    regular_hours: int = 8
    overtime_hours: int = 2
    duration_min: int = 30
    duration_max: int = 230
    due_min: int = 1
    due_max: int = 14
    seed: int = 0


class InstanceUpload(BaseModel):
    instance: Optional[dict] = None
    generate: Optional[GenerateRequest] = None


class SolveRequest(BaseModel):
    method: str = "cg"
    seed: int = 0
    time_limit: Optional[float] = None
    population: Optional[int] = None
    generations: Optional[int] = None


class EmergencySpec(BaseModel):
    duration: int  # slots
    surgeon: int


class RescheduleRequest(BaseModel):
    freeze_days: int = 2
    arrival_day: Optional[int] = None
    emergencies: list[EmergencySpec] = Field(default_factory=list)
    tightenings: list[tuple[int, int]] = Field(default_factory=list)
    solver: str = "pmiorps"
    seed: int = 0
    time_limit: Optional[float] = None


class BufferRequest(BaseModel):
    grid: list[int] = Field(default_factory=lambda: [0, 30, 60, 90, 120])
    seed: int = 0


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"
    progress: dict = field(default_factory=dict)
    solution_id: Optional[str] = None
    error: Optional[str] = None


class Store:
    """Append-only in-memory store with optional on-disk persistence."""

    def __init__(self, store_dir: Optional[str] = None):
        self.lock = threading.Lock()
        self.instances: dict[str, dict] = {}
        self.solutions: dict[str, dict] = {}
        self.jobs: dict[str, Job] = {}
        self.dir = Path(store_dir) if store_dir else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)
            for path in self.dir.glob("instance_*.json"):
                data = json.loads(path.read_text())
                self.instances[path.stem.split("_", 1)[1]] = data
            for path in self.dir.glob("solution_*.json"):
                data = json.loads(path.read_text())
                self.solutions[path.stem.split("_", 1)[1]] = data

    def put_instance(self, data: dict) -> str:
        iid = hashlib.sha256(
            json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:16]
        with self.lock:
            self.instances[iid] = data
        if self.dir:
            (self.dir / f"instance_{iid}.json").write_text(json.dumps(data))
        return iid

    def put_solution(self, payload: dict) -> str:
        sid = payload["id"]
        with self.lock:
            self.solutions[sid] = payload
        if self.dir:
            (self.dir / f"solution_{sid}.json").write_text(json.dumps(payload))
        return sid


def _gantt_rows(schedule: Schedule, instance) -> list[dict]:
    rows = []
    minute = instance.slot_minutes
    for sid, a in sorted(schedule.assignments.items()):
        s = instance.surgery(sid)
        start_min = a.start * minute
        dur_min = s.duration * minute
        regular_end = instance.regular_slots * minute
        rows.append(
            {
                "surgery": sid,
                "day": a.day,
                "room": a.room,
                "start_minutes": start_min,
                "duration_minutes": dur_min,
                "surgeon": s.surgeon,
                "due_day": s.due_day,
                "overtime_minutes": max(0, start_min + dur_min - regular_end),
            }
        )
    return rows


def _solution_payload(schedule: Schedule, instance, instance_id: str, extra: dict) -> dict:
    schedule = schedule.with_costs(evaluate(schedule, instance))
    if any(a.room is None for a in schedule.assignments.values()):
        schedule = recover_rooms(schedule, instance)
    b = schedule.cost_breakdown
    sid = solution_hash(schedule)[:16]
    return {
        "id": sid,
        "instance_id": instance_id,
        "schedule": schedule_to_dict(schedule, instance),
        "kpi": {
            "total": float(b.total),
            "postponement": float(b.postponement),
            "or_opening": float(b.or_opening),
            "overtime": float(b.overtime),
            "display": {
                "total": money_str(b.total),
                "postponement": money_str(b.postponement),
                "or_opening": money_str(b.or_opening),
                "overtime": money_str(b.overtime),
            },
        },
        "gantt": _gantt_rows(schedule, instance),
        "postponed": sorted(schedule.postponed),
        "rooms_open": {str(d): y for d, y in sorted(schedule.rooms_open.items())},
        "detail": extra,
    }


def create_app(workers: Optional[int] = None, store_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="theatreplan", version="0.1.0")
    store = Store(store_dir)
    pool = ThreadPoolExecutor(max_workers=workers or max(1, (os.cpu_count() or 2) - 1))

    def get_instance(iid: str):
        data = store.instances.get(iid)
        if data is None:
            raise HTTPException(404, f"unknown instance {iid}")
        return instance_from_dict(data)

    def submit(job: Job, fn):
        store.jobs[job.id] = job

        def run():
            job.status = "running"
            try:
                fn(job)
                job.status = "done"
            except (NoSolutionError, ValidationError, TheatrePlanError) as exc:
                job.status = "failed"
                job.error = str(exc)
            except Exception as exc:  # pragma: no cover
                job.status = "failed"
                job.error = f"internal: {exc}"
                traceback.print_exc()

        pool.submit(run)
        return {"job_id": job.id}

    @app.post("/instances")
    def post_instance(body: InstanceUpload):
        if body.generate is not None:
            g = body.generate
            spec = GenSpec(
                num_surgeries=g.num_surgeries,
                num_days=g.num_days,
                num_surgeons=g.num_surgeons,
                rooms_per_day=g.rooms_per_day,
                duration_range=(g.duration_min, g.duration_max),
                due_day_range=(g.due_min, g.due_max),
                slot_minutes=g.slot_minutes,
                regular_hours=g.regular_hours,
                overtime_hours=g.overtime_hours,
                seed=g.seed,
            )
            data = instance_to_dict(generate(spec))
        elif body.instance is not None:
            data = instance_to_dict(instance_from_dict(body.instance))
        else:
            raise HTTPException(400, "provide either 'instance' or 'generate'")
        iid = store.put_instance(data)
        return {"id": iid, "num_surgeries": len(data["surgeries"])}

    @app.get("/instances/{iid}")
    def get_instance_route(iid: str):
        data = store.instances.get(iid)
        if data is None:
            raise HTTPException(404, f"unknown instance {iid}")
        return {"id": iid, "instance": data}

    @app.post("/instances/{iid}/solve")
    def post_solve(iid: str, body: SolveRequest):
        instance = get_instance(iid)
        if body.method not in METHODS:
            raise HTTPException(400, f"unknown method {body.method}")
        job_id = hashlib.sha256(
            json.dumps(
                {"instance": iid, "solve": body.model_dump()}, sort_keys=True
            ).encode()
        ).hexdigest()[:16]
        existing = store.jobs.get(job_id)
        if existing is not None:
            return {"job_id": job_id}
        job = Job(job_id, "solve", progress={"method": body.method})

        def work(job: Job):
            rga_params = None
            if body.population or body.generations:
                rga_params = RgaParams(
                    population=body.population or 254,
                    generations=body.generations or 185,
                    seed=body.seed,
                    time_limit=body.time_limit,
                )
            outcome = solve_with_method(
                instance,
                body.method,
                seed=body.seed,
                time_limit=body.time_limit,
                rga_params=rga_params,
            )
            if outcome.schedule is None:
                raise NoSolutionError(f"{body.method}: {outcome.status}")
            report = check_feasibility(outcome.schedule, instance)
            if not report.ok:
                raise TheatrePlanError("solver produced an infeasible schedule")
            payload = _solution_payload(
                outcome.schedule, instance, iid, _jsonable(outcome.detail)
            )
            store.put_solution(payload)
            job.solution_id = payload["id"]
            job.progress.update({"status_detail": outcome.status})

        return submit(job, work)

    @app.get("/jobs/{jid}")
    def get_job(jid: str):
        job = store.jobs.get(jid)
        if job is None:
            raise HTTPException(404, f"unknown job {jid}")
        return {
            "id": job.id,
            "kind": job.kind,
            "status": job.status,
            "progress": job.progress,
            "solution_id": job.solution_id,
            "error": job.error,
        }

    @app.get("/solutions/{sid}")
    def get_solution(sid: str):
        payload = store.solutions.get(sid)
        if payload is None:
            for job in store.jobs.values():
                if job.solution_id == sid or job.id == sid:
                    if job.status in ("queued", "running"):
                        raise HTTPException(409, "job still running")
            raise HTTPException(404, f"unknown solution {sid}")
        return payload

    @app.post("/solutions/{sid}/reschedule")
    def post_reschedule(sid: str, body: RescheduleRequest):
        payload = store.solutions.get(sid)
        if payload is None:
            raise HTTPException(404, f"unknown solution {sid}")
        instance = get_instance(payload["instance_id"])
        baseline = schedule_from_dict(payload["schedule"], instance)
        if body.emergencies and body.arrival_day is None:
            raise HTTPException(400, "emergencies need an arrival_day")
        disruption = Disruption(
            kind="emergency_arrivals" if body.emergencies else (
                "due_date_tightening" if body.tightenings else "none"
            ),
            arrival_day=body.arrival_day,
            new_surgeries=tuple(
                Surgery(id=0, duration=e.duration, due_day=body.arrival_day, surgeon=e.surgeon)
                for e in body.emergencies
            ),
            tightened=tuple((int(a), int(b)) for a, b in body.tightenings),
        )
        job_id = hashlib.sha256(
            json.dumps(
                {"solution": sid, "reschedule": body.model_dump()}, sort_keys=True
            ).encode()
        ).hexdigest()[:16]
        if job_id in store.jobs:
            return {"job_id": job_id}
        job = Job(job_id, "reschedule")

        def work(job: Job):
            schedule, kpi = reschedule(
                baseline,
                instance,
                disruption,
                body.freeze_days,
                solver=body.solver,
                seed=body.seed,
            )
            disrupted = apply_disruption(instance, disruption)
            new_iid = store.put_instance(instance_to_dict(disrupted))
            out = _solution_payload(
                schedule, disrupted, new_iid, {"delta_pct": kpi.delta_pct, "baseline": sid}
            )
            out["kpi"]["delta_pct"] = kpi.delta_pct
            store.put_solution(out)
            job.solution_id = out["id"]

        return submit(job, work)

    @app.post("/solutions/{sid}/buffer")
    def post_buffer(sid: str, body: BufferRequest):
        payload = store.solutions.get(sid)
        if payload is None:
            raise HTTPException(404, f"unknown solution {sid}")
        instance = get_instance(payload["instance_id"])
        try:
            outcomes = buffer_grid(instance, body.grid, noise_seed=body.seed)
        except (ValidationError, NoSolutionError) as exc:
            raise HTTPException(400, str(exc))
        return {
            "solution_id": sid,
            "seed": body.seed,
            "rows": [
                {"buffer_minutes": o.buffer_minutes, **o.kpi.as_dict()}
                for o in outcomes
            ],
        }

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.exists():  # serve the built single-page client when present
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _jsonable(data: Any):
    if isinstance(data, dict):
        return {k: _jsonable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_jsonable(v) for v in data]
    if isinstance(data, float) and (data != data or data in (float("inf"), float("-inf"))):
        return None
    if isinstance(data, (int, float, str, bool)) or data is None:
        return data
    return str(data)
