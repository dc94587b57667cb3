"""HTTP facade over the pipeline: upload once, re-warp cheaply per mu.

A session pins one uploaded image together with its computed full-resolution
flow. Changing the retouch amount never re-runs the model — it re-warps the
cached flow, so interactive mu sweeps stay fast. Sessions live in an
in-memory LRU store; the oldest is evicted when the store is full.
"""

import io
import logging
import struct
import threading
import time
import uuid
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import Response
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from .data import image_to_u8
from .errors import SchemaError
from .kernels import warp_rows_u8
from .pipeline import FlowStats, ReshapePipeline
from .priors import ingest_keypoints
from .warp import FlowField, flo_bytes, visualize_flow

log = logging.getLogger(__name__)

DEFAULT_MAX_SESSIONS = 16


@dataclass
class Session:
    id: str
    image: np.ndarray  # (3, H, W) float32, full resolution
    flow: FlowField  # full resolution
    stats: FlowStats
    created: float = field(default_factory=time.monotonic)


class SessionStore:
    """Thread-safe LRU keyed by session id."""

    def __init__(self, capacity: int = DEFAULT_MAX_SESSIONS):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: "dict[str, Session]" = {}
        self._order: "list[str]" = []

    def put(self, session: Session) -> None:
        with self._lock:
            if session.id in self._items:
                self._order.remove(session.id)
            self._items[session.id] = session
            self._order.append(session.id)
            while len(self._order) > self.capacity:
                evicted = self._order.pop(0)
                del self._items[evicted]
                log.info("session %s evicted (store full)", evicted)

    def get(self, session_id: str) -> Optional[Session]:
        with self._lock:
            session = self._items.get(session_id)
            if session is not None:
                self._order.remove(session_id)
                self._order.append(session_id)
            return session

    def delete(self, session_id: str) -> bool:
        with self._lock:
            if session_id not in self._items:
                return False
            del self._items[session_id]
            self._order.remove(session_id)
            return True

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class ReshapeRequest(BaseModel):
    mu: float


def _decode_upload(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / np.float32(255.0)
    except UnidentifiedImageError:
        raise HTTPException(status_code=400, detail="image upload is not a decodable image")
    return arr.transpose(2, 0, 1).copy()


def _png_chunk(kind: bytes, payload: bytes) -> bytes:
    raw = kind + payload
    return struct.pack(">I", len(payload)) + raw + struct.pack(">I", zlib.crc32(raw))


def _png_from_rows(rows: np.ndarray, w: int, h: int) -> bytes:
    """Minimal deterministic RGB PNG encoder (store-mode zlib, filter 0).

    Interactive mu sweeps re-encode a full-resolution frame per request;
    general-purpose encoders spend hundreds of milliseconds filtering and
    compressing it. Uncompressed IDAT keeps the response a valid PNG while
    encoding in one memory pass. Responses for equal inputs are
    byte-identical. ``rows`` is the (H, 1+3W) uint8 scanline buffer:
    a zero filter byte, then RGB triples.
    """
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    idat = zlib.compress(rows.tobytes(), 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", idat)
        + _png_chunk(b"IEND", b"")
    )


def _png_bytes(u8_chw: np.ndarray) -> bytes:
    c, h, w = u8_chw.shape
    rows = np.empty((h, 1 + 3 * w), dtype=np.uint8)
    rows[:, 0] = 0  # per-row filter byte: None
    rows[:, 1:] = u8_chw.transpose(1, 2, 0).reshape(h, 3 * w)
    return _png_from_rows(rows, w, h)


def create_app(
    pipeline: ReshapePipeline, max_sessions: int = DEFAULT_MAX_SESSIONS
) -> FastAPI:
    app = FastAPI(title="bodyflow", docs_url=None, redoc_url=None)
    store = SessionStore(max_sessions)
    app.state.pipeline = pipeline
    app.state.sessions = store

    def session_or_404(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session

    @app.post("/sessions")
    def create_session(
        image: UploadFile = File(...), keypoints: UploadFile = File(...)
    ):
        arr = _decode_upload(image.file.read())
        try:
            kp = ingest_keypoints(keypoints.file.read())
            flow = pipeline.compute_flow(arr, kp)
        except SchemaError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = Session(
            id=uuid.uuid4().hex, image=arr, flow=flow, stats=FlowStats.of(flow)
        )
        store.put(session)
        return {"session_id": session.id, "flow_stats": session.stats.to_dict()}

    @app.post("/sessions/{session_id}/reshape")
    def reshape(session_id: str, request: ReshapeRequest):
        session = session_or_404(session_id)
        mu = request.mu
        if not np.isfinite(mu) or abs(mu) > 1.0:
            raise HTTPException(
                status_code=422, detail=f"mu must lie in [-1, 1], got {mu}"
            )
        h, w = session.flow.resolution
        rows = warp_rows_u8(session.image, session.flow.data, mu)
        return Response(content=_png_from_rows(rows, w, h), media_type="image/png")

    @app.get("/sessions/{session_id}/flow")
    def get_flow(session_id: str, format: str = "flo"):
        session = session_or_404(session_id)
        if format == "flo":
            return Response(
                content=flo_bytes(session.flow), media_type="application/octet-stream"
            )
        if format == "png":
            rgb = visualize_flow(session.flow)
            return Response(content=_png_bytes(image_to_u8(rgb)), media_type="image/png")
        raise HTTPException(status_code=422, detail=f"format must be flo or png, got {format!r}")

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        if not store.delete(session_id):
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return Response(status_code=204)

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "checkpoint_id": pipeline.checkpoint_id,
            "sessions": len(store),
            "max_sessions": store.capacity,
        }

    return app
