"""HTTP session service carrying the interactive editing workflow.

Sessions are ephemeral in-process workspaces; the memory bank on disk
is the only durable state. Every response that carries an image also
carries the exact map that produced it, so any result can be replayed
bit-for-bit with ``apply``.
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import agent
from .errors import (
    FormatError,
    InvalidArgumentError,
    NotFoundError,
    ParseError,
    PerTouchError,
)
from .imagecore import Image
from .instruction import DSL_VERSION, StrongInstruction, WeakInstruction, parse
from .parammap import ParameterMap, build_map, encode_pmap
from .retouch import TransferConfig, get_backend
from .scoring import ATTRIBUTES, score_region
from .segmentation import SegmentationMap, decode_segmentation

API_VERSION = "pertouch/1"


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8710
    memory_path: str | None = None
    backend: str = "parametric"
    backend_url: str | None = None
    rethink: agent.RethinkConfig = field(default_factory=agent.RethinkConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    seed: int = 0
    max_image_dim: int = 4096

    def __post_init__(self):
        if self.max_image_dim < 64:
            raise InvalidArgumentError("max image dimension must be at least 64")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        import json

        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        listen = doc.get("listen", "127.0.0.1:8710")
        host, _, port = listen.rpartition(":")
        rethink = agent.RethinkConfig(**doc.get("rethink", {}))
        return cls(
            listen_host=host or "127.0.0.1",
            listen_port=int(port),
            memory_path=doc.get("memory"),
            backend=doc.get("backend", "parametric"),
            backend_url=doc.get("backend_url"),
            rethink=rethink,
            seed=int(doc.get("seed", 0)),
            max_image_dim=int(doc.get("max_image_dim", 4096)),
        )


@dataclass
class HistoryEntry:
    text: str
    rounds: int
    accepted: bool = False


@dataclass
class Session:
    id: str
    image: Image
    seg: SegmentationMap
    measured: ParameterMap
    current_map: ParameterMap
    tags: frozenset[str]
    output: Image | None = None
    last_scope: str | None = None
    history: list[HistoryEntry] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class _ApiError(Exception):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.payload = {"error": message, **extra}


def _scores_json(pm: ParameterMap) -> dict:
    return {str(rid): vec.to_dict() for rid, vec in sorted(pm.scores.items())}


def _regions_json(seg: SegmentationMap) -> list[dict]:
    return [
        {"id": info.id, "label": info.label, "area": info.area, "bbox": list(info.bbox)}
        for info in seg.regions
    ]


def _mean_abs_delta(a: Image, b: Image) -> float:
    diff = np.abs(a.pixels.astype(np.float64) - b.pixels.astype(np.float64))
    return float(diff.mean()) / 255.0


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="pertouch", version="1")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    memory_lock = threading.Lock()
    bank = (
        agent.MemoryBank.load(config.memory_path)
        if config.memory_path
        else agent.MemoryBank()
    )
    backend = get_backend(config.backend, url=config.backend_url, cfg=config.transfer)

    def fail(status: int, message: str, **extra):
        raise _ApiError(status, message, **extra)

    @app.exception_handler(_ApiError)
    async def _api_error(_request, exc: _ApiError):
        return JSONResponse(
            status_code=exc.status, content={"version": API_VERSION, **exc.payload}
        )

    @app.exception_handler(PerTouchError)
    async def _uncaught(_request, exc: PerTouchError):
        return JSONResponse(
            status_code=500, content={"version": API_VERSION, "error": str(exc)}
        )

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            fail(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            fail(400, "request body must be a JSON object")
        return body

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            fail(404, f"unknown session {session_id!r}")
        return session

    def edit_response(session: Session, rounds: int, saturated: bool) -> dict:
        output = session.output
        rescored = {
            str(info.id): score_region(output, session.seg, info.id).to_dict()
            for info in session.seg.regions
        }
        return {
            "version": API_VERSION,
            "session_id": session.id,
            "output": base64.b64encode(output.png_bytes()).decode("ascii"),
            "map": encode_pmap(session.current_map),
            "rounds": rounds,
            "saturated": saturated,
            "per_region_scores": rescored,
            "mean_abs_delta": _mean_abs_delta(session.image, output),
        }

    @app.get("/healthz")
    async def healthz():
        return {"version": API_VERSION, "status": "ok"}

    @app.post("/v1/session")
    async def create_session(request: Request):
        body = await read_body(request)
        if "image" not in body or "mask" not in body:
            fail(400, "session needs 'image' (base64 PNG) and 'mask' (segmentation JSON)")
        try:
            blob = base64.b64decode(body["image"], validate=True)
        except (binascii.Error, TypeError, ValueError):
            fail(400, "image is not valid base64")
        try:
            img = Image.from_png_bytes(blob)
        except FormatError as exc:
            fail(400, str(exc))
        if img.width > config.max_image_dim or img.height > config.max_image_dim:
            fail(
                413,
                f"image {img.width}x{img.height} exceeds the "
                f"{config.max_image_dim} pixel dimension limit",
            )
        try:
            seg = decode_segmentation(body["mask"], img.width, img.height)
        except (FormatError, InvalidArgumentError) as exc:
            fail(400, str(exc))
        measured = build_map(img, seg)
        session = Session(
            id=uuid.uuid4().hex,
            image=img,
            seg=seg,
            measured=measured,
            current_map=measured,
            tags=agent.extract_scene_tags(img),
        )
        with registry_lock:
            sessions[session.id] = session
        return {
            "version": API_VERSION,
            "session_id": session.id,
            "width": img.width,
            "height": img.height,
            "regions": _regions_json(seg),
            "scores": _scores_json(measured),
        }

    @app.post("/v1/session/{session_id}/instruct")
    async def instruct(session_id: str, request: Request):
        session = get_session(session_id)
        body = await read_body(request)
        if body.get("version", DSL_VERSION) != DSL_VERSION:
            fail(400, f"unsupported DSL version {body.get('version')!r}")
        text = body.get("text")
        if not isinstance(text, str):
            fail(400, "instruct needs a 'text' string")
        try:
            instr = parse(text)
        except ParseError as exc:
            fail(422, str(exc), offset=exc.offset)
        with session.lock:
            if isinstance(instr, WeakInstruction):
                result = agent.weak_edit(
                    session.image,
                    session.seg,
                    bank,
                    measured=session.measured,
                    backend=backend,
                )
                session.last_scope = None
            else:
                try:
                    result = agent.strong_edit(
                        session.image,
                        session.seg,
                        bank,
                        instr,
                        config.rethink,
                        measured=session.measured,
                        backend=backend,
                    )
                except NotFoundError as exc:
                    fail(404, str(exc))
                session.last_scope = instr.target
            session.current_map = result.map
            session.output = result.output
            session.history.append(HistoryEntry(text, result.rounds))
            return edit_response(session, result.rounds, result.saturated)

    @app.post("/v1/session/{session_id}/adjust")
    async def adjust(session_id: str, request: Request):
        session = get_session(session_id)
        body = await read_body(request)
        try:
            region = int(body["region"])
            attribute = str(body["attribute"])
            target = float(body["target"])
        except (KeyError, TypeError, ValueError):
            fail(400, "adjust needs integer 'region', string 'attribute', number 'target'")
        if attribute not in ATTRIBUTES:
            fail(400, f"unknown attribute {attribute!r}")
        if not -1.0 <= target <= 1.0:
            fail(400, f"target {target} outside [-1, 1]")
        if not any(info.id == region for info in session.seg.regions):
            fail(404, f"unknown region {region}")
        with session.lock:
            result = agent.targeted_edit(
                session.image,
                session.seg,
                bank,
                region,
                attribute,
                target,
                config.rethink,
                measured=session.measured,
                backend=backend,
            )
            session.current_map = result.map
            session.output = result.output
            session.last_scope = session.seg.region(region).label
            session.history.append(
                HistoryEntry(f"adjust {region} {attribute} {target}", result.rounds)
            )
            return edit_response(session, result.rounds, result.saturated)

    @app.post("/v1/session/{session_id}/confirm")
    async def confirm(session_id: str, request: Request):
        session = get_session(session_id)
        with session.lock:
            if session.output is None:
                fail(400, "nothing to confirm: no edit has been rendered")
            with memory_lock:
                agent.confirm(
                    bank,
                    session.tags,
                    session.current_map,
                    session.measured,
                    scope=session.last_scope,
                )
            if session.history:
                session.history[-1].accepted = True
            return {"version": API_VERSION, "memory_records_total": len(bank)}

    @app.get("/v1/session/{session_id}")
    async def session_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return {
                "version": API_VERSION,
                "session_id": session.id,
                "width": session.image.width,
                "height": session.image.height,
                "regions": _regions_json(session.seg),
                "scores": _scores_json(session.measured),
                "map": encode_pmap(session.current_map),
                "tags": sorted(session.tags),
                "has_output": session.output is not None,
                "history": [
                    {"text": h.text, "rounds": h.rounds, "accepted": h.accepted}
                    for h in session.history
                ],
            }

    @app.get("/v1/memory/summary")
    async def memory_summary():
        with memory_lock:
            records = list(bank.records)
        by_tag: dict[str, list] = {}
        for record in records:
            for tag in record.tags:
                by_tag.setdefault(tag, []).append(record.scores.as_tuple())
        summary = {
            tag: {
                "count": len(rows),
                "mean": {
                    name: float(np.mean([row[i] for row in rows]))
                    for i, name in enumerate(ATTRIBUTES)
                },
            }
            for tag, rows in sorted(by_tag.items())
        }
        return {
            "version": API_VERSION,
            "total": len(records),
            "tags": summary,
        }

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(
        create_app(config),
        host=config.listen_host,
        port=config.listen_port,
        log_level="warning",
    )
