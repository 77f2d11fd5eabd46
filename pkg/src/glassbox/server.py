"""HTTP API over a pipeline home directory.

One annotation store per server; all mutations are serialized behind a lock
and written back to disk immediately, so the CLI and the server can be used
interchangeably on the same home. Error mapping: phase violations and
duplicate responses are 409, unknown ids 404, malformed bodies 400.
"""

import os
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import pipeline as P
from .annotation import (
    PHASES,
    advance_phase,
    closed_annotate,
    load_store,
    open_annotate,
    organize_labels,
    save_store,
)
from .config import PipelineConfig, read_json_artifact
from .consistency import (
    WorkerResponse,
    append_response,
    build_records,
    merge_likert,
    read_responses,
)
from .errors import (
    AnnotationError,
    EditError,
    MissingArtifactError,
    PhaseError,
    ResponseError,
)


class OpenBody(BaseModel):
    text: str


class ClosedBody(BaseModel):
    labels: list[int]


class EditBody(BaseModel):
    edits: list[dict]


class ResponseBody(BaseModel):
    worker_id: str
    answer: str


class PhaseBody(BaseModel):
    to: str


class _RecordInput:
    """Adapter giving build_records the three fields it reads."""

    __slots__ = ("sample_id", "icr", "predicted_label")

    def __init__(self, d):
        self.sample_id = d["sample_id"]
        self.icr = d["icr"]
        self.predicted_label = d["predicted_label"]


def _store_view(store, feature_id):
    labels = [
        {"label_id": i, "name": store.label_name(i)}
        for i in store.assignments.get(feature_id, [])
    ]
    return {
        "feature": feature_id,
        "open_texts": store.open_texts.get(feature_id, []),
        "labels": labels,
    }


def create_app(home, cfg=None, ui=None):
    home = os.path.abspath(home)
    if cfg is None:
        cfg_path = os.path.join(home, P.CONFIG)
        if os.path.exists(cfg_path):
            doc = read_json_artifact(cfg_path)
            cfg = PipelineConfig.from_dict(doc["provenance"]["config"])
        else:
            cfg = PipelineConfig()

    app = FastAPI(title="glassbox annotation service")
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(PhaseError)
    async def _phase(request: Request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    for kind in (EditError, AnnotationError, ResponseError):
        @app.exception_handler(kind)
        async def _invalid(request: Request, exc):
            return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(MissingArtifactError)
    async def _missing(request: Request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    def store_path():
        return P.require(home, P.ANNOTATION)

    def get_store():
        return load_store(store_path())

    def put_store(store):
        save_store(store, os.path.join(home, P.ANNOTATION))

    def tasks_doc():
        return read_json_artifact(P.require(home, P.TASKS))

    def responses():
        path = os.path.join(home, P.RESPONSES)
        return read_responses(path) if os.path.exists(path) else []

    # ---- annotation ----------------------------------------------------

    @app.get("/features")
    def list_features():
        store = get_store()
        return {
            "phase": store.phase,
            "round": store.round,
            "features": [
                _store_view(store, f) for f in range(store.feature_count)
            ],
        }

    @app.get("/features/{feature_id}")
    def get_feature(feature_id: int):
        store = get_store()
        if not 0 <= feature_id < store.feature_count:
            raise HTTPException(404, f"no feature {feature_id}")
        return {"phase": store.phase, "round": store.round,
                **_store_view(store, feature_id)}

    @app.get("/features/{feature_id}/images")
    def feature_images(feature_id: int):
        doc = read_json_artifact(P.require(home, P.ANNOT_IMAGES))
        for entry in doc["features"]:
            if entry["feature"] == feature_id:
                return entry
        raise HTTPException(404, f"no feature {feature_id}")

    @app.post("/features/{feature_id}/open")
    def post_open(feature_id: int, body: OpenBody):
        with lock:
            store = get_store()
            if not 0 <= feature_id < store.feature_count:
                raise HTTPException(404, f"no feature {feature_id}")
            open_annotate(store, feature_id, body.text)
            put_store(store)
            return _store_view(store, feature_id)

    @app.post("/features/{feature_id}/closed")
    def post_closed(feature_id: int, body: ClosedBody):
        with lock:
            store = get_store()
            if not 0 <= feature_id < store.feature_count:
                raise HTTPException(404, f"no feature {feature_id}")
            closed_annotate(store, feature_id, body.labels)
            put_store(store)
            return _store_view(store, feature_id)

    @app.get("/vocabulary")
    def get_vocabulary():
        store = get_store()
        labels = [
            {
                "label_id": i,
                "name": entry["name"],
                "features": len(store.features_for(i)),
            }
            for i, entry in sorted(store.vocabulary.items())
            if store.resolve(i) == i
        ]
        return {"phase": store.phase, "round": store.round, "labels": labels}

    @app.post("/vocabulary")
    def post_vocabulary(body: EditBody):
        with lock:
            store = get_store()
            organize_labels(store, body.edits)
            put_store(store)
            return get_vocabulary()

    @app.post("/phase")
    def post_phase(body: PhaseBody):
        if body.to not in PHASES:
            raise HTTPException(400, f"unknown phase {body.to!r}")
        with lock:
            store = get_store()
            advance_phase(store, body.to)
            put_store(store)
            return {"phase": store.phase, "round": store.round}

    # ---- consistency tasks ----------------------------------------------

    @app.get("/tasks/next")
    def next_task(question: str, worker: str = "local"):
        if question not in ("PCR", "LCR"):
            raise HTTPException(400, f"unknown question {question!r}")
        doc = tasks_doc()
        cap = doc.get("workers_per_question", cfg.workers_per_question)
        answered = {}
        mine = set()
        for r in responses():
            key = (r.sample_id, r.question)
            answered[key] = answered.get(key, 0) + 1
            if r.worker_id == worker:
                mine.add(key)
        remaining = 0
        chosen = None
        for task in doc["tasks"]:
            if task["question"] != question:
                continue
            key = (task["sample_id"], question)
            if key in mine or answered.get(key, 0) >= cap:
                continue
            remaining += 1
            if chosen is None:
                chosen = task
        return {"task": chosen, "remaining": remaining}

    @app.post("/tasks/{task_id}/response")
    def post_response(task_id: str, body: ResponseBody):
        with lock:
            doc = tasks_doc()
            task = next((t for t in doc["tasks"] if t["task_id"] == task_id),
                        None)
            if task is None:
                raise HTTPException(404, f"no task {task_id}")
            merge_likert(body.answer)  # rejects unknown tokens with 400
            key = (task["sample_id"], task["question"], body.worker_id)
            for r in responses():
                if (r.sample_id, r.question, r.worker_id) == key:
                    raise HTTPException(
                        409,
                        f"worker {body.worker_id!r} already answered "
                        f"{task['question']} for {task['sample_id']}",
                    )
            append_response(
                os.path.join(home, P.RESPONSES),
                WorkerResponse(task_id, task["sample_id"], task["question"],
                               body.worker_id, body.answer),
            )
            return {"recorded": True, "task_id": task_id}

    @app.get("/records")
    def get_records():
        saved = os.path.join(home, P.RECORDS)
        if os.path.exists(saved):
            from .consistency import load_records_jsonl

            return {
                "source": P.RECORDS,
                "records": [r.to_json_dict()
                            for r in load_records_jsonl(saved)],
            }
        # live view: aggregate whatever samples already have both answers
        analyses_path = os.path.join(home, P.ANALYSES_TEST)
        if not os.path.exists(analyses_path):
            return {"source": "none", "records": []}
        doc = read_json_artifact(analyses_path)
        got = responses()
        covered = {
            (r.sample_id, r.question) for r in got
        }
        ready = [
            _RecordInput(s) for s in doc["samples"]
            if (s["sample_id"], "PCR") in covered
            and (s["sample_id"], "LCR") in covered
        ]
        if not ready:
            return {"source": "live", "records": []}
        from .data.dataset_io import load_dataset

        _, _, test, _ = load_dataset(P.require(home, P.DATASET))
        truth = {s.sample_id: s.label for s in test}
        records = build_records(ready, got, truth)
        return {"source": "live",
                "records": [r.to_json_dict() for r in records]}

    # static image mounts for the browser UI
    for sub in (P.IMAGES_DIR, P.OVERLAYS_DIR):
        path = os.path.join(home, sub)
        if os.path.isdir(path):
            app.mount(f"/{sub}", StaticFiles(directory=path), name=sub)

    # the built UI, if any, goes at the root — mounted last so API routes win
    if ui is not None:
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")

    return app
