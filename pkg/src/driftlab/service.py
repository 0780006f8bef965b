"""HTTP session API exposing a live run to a human annotator.

One session = one prequential run advanced by explicit step calls. With a
human oracle the run parks at a pending query (mode
``paused_awaiting_annotation``) until an annotation arrives; a paused session
never advances its model or detectors. All endpoints are versioned under /v1
and exchange JSON; per-session access is serialized through a lock.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, HTTPException, Query

from driftlab._core import BACKEND
from driftlab.ebc import EbcError, ExperimentSession
from driftlab.evaluate import ConfigError, ExperimentConfig, build_session, gold_for
from driftlab.exstream import explanation_payload


@dataclass
class SessionHandle:
    session: ExperimentSession
    config: ExperimentConfig
    seed: int
    gold: list[int]
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, SessionHandle] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def create(self, config: ExperimentConfig, seed: int) -> tuple[str, SessionHandle]:
        session, gold = build_session(config, seed)
        handle = SessionHandle(session=session, config=config, seed=seed, gold=sorted(gold))
        with self._lock:
            sid = f"s{next(self._ids)}"
            self._sessions[sid] = handle
        return sid, handle

    def get(self, sid: str) -> SessionHandle:
        with self._lock:
            handle = self._sessions.get(sid)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")
        return handle


def _mode(session: ExperimentSession) -> str:
    if session.paused:
        return "paused_awaiting_annotation"
    if session.finished:
        return "finished"
    return "running"


def _snapshot(sid: str, handle: SessionHandle) -> dict:
    session = handle.session
    latest = session.last_cadence
    latest_explanation = None
    if latest is not None:
        latest_explanation = explanation_payload(latest, session.stream[latest.t].x)
    return {
        "id": sid,
        "mode": _mode(session),
        "t": session.t,
        "total": session.total,
        "seed": handle.seed,
        "backend": BACKEND,
        "tau": session.tau,
        "entropy": None if latest is None else latest.entropy,
        "dissimilarity": None if latest is None else latest.dissimilarity,
        "latest_explanation": latest_explanation,
        "pending_query": None if session.pending_query is None else session.pending_query.to_dict(),
        "spurious": session.spurious_names,
        "feature_names": list(session.schema.names),
        "gold_drifts": handle.gold,
        "delay_window": handle.config.delay_window,
        "alarm_count": len(session.alarms),
        "query_count": len(session.queries),
        "state_digest": session.state_digest(),
    }


def create_app(default_config: ExperimentConfig | None = None) -> FastAPI:
    app = FastAPI(title="driftlab session API", version="1.0")
    store = SessionStore()

    @app.post("/v1/sessions")
    def create_session(body: dict = Body(default_factory=dict)) -> dict:
        raw = body.get("config")
        if raw is None:
            if default_config is None:
                raise HTTPException(
                    status_code=422, detail="config: required (no server default configured)"
                )
            config = default_config
        else:
            try:
                config = ExperimentConfig.from_dict(raw)
            except ConfigError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        seed = body.get("seed", config.seeds[0])
        if not isinstance(seed, int):
            raise HTTPException(status_code=422, detail="seed: expected an integer")
        try:
            sid, handle = store.create(config, seed)
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with handle.lock:
            return _snapshot(sid, handle)

    @app.get("/v1/sessions/{sid}")
    def get_session(sid: str) -> dict:
        handle = store.get(sid)
        with handle.lock:
            return _snapshot(sid, handle)

    @app.post("/v1/sessions/{sid}/step")
    def step_session(sid: str, n: int = Query(default=1, ge=0)) -> dict:
        handle = store.get(sid)
        with handle.lock:
            session = handle.session
            if session.paused:
                raise HTTPException(
                    status_code=409, detail="session is paused awaiting annotation"
                )
            session.run(max_steps=n)
            return _snapshot(sid, handle)

    @app.post("/v1/sessions/{sid}/annotation")
    def submit_annotation(sid: str, body: dict = Body(...)) -> dict:
        handle = store.get(sid)
        spurious = body.get("spurious")
        if not isinstance(spurious, list) or not all(isinstance(s, str) for s in spurious):
            raise HTTPException(status_code=422, detail="spurious: expected a list of feature names")
        with handle.lock:
            session = handle.session
            if not session.paused:
                raise HTTPException(status_code=409, detail="session is not awaiting annotation")
            try:
                session.submit_annotation(spurious)
            except EbcError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            return _snapshot(sid, handle)

    @app.get("/v1/sessions/{sid}/events")
    def get_events(sid: str, since: int = Query(default=0, ge=0)) -> list[dict]:
        handle = store.get(sid)
        with handle.lock:
            return handle.session.events_since(since)

    return app
