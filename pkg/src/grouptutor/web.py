"""HTTP and WebSocket surface over a ServerCore.

Core mutations are serialized under one asyncio lock (they are
microsecond-scale dict operations); the slow paths — tutor backend
calls and grader subprocesses — run outside it in worker threads, so
rooms still make progress in parallel where it matters. Tokens issued
by /api/join are the only handle clients hold; the websocket at /ws
carries everything else as JSON frames.
"""

from __future__ import annotations

import asyncio
import json
import secrets
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .cms import WorksheetNotFound, WorksheetStore, export_worksheet, import_worksheet
from .config import ServiceConfig
from .core import CloseConnection, ServerCore, Session
from .model import DomainError, Role


class Gateway:
    """Shared connection state: token table, live sockets, room locking."""

    def __init__(self, core: ServerCore, store: WorksheetStore, config: ServiceConfig):
        self.core = core
        self.store = store
        self.config = config
        self.tokens: dict[str, str] = {}  # token -> session_id
        self.sockets: dict[str, WebSocket] = {}  # session_id -> socket
        self.lock = asyncio.Lock()
        self._events_at_snapshot = 0

    def issue_token(self, session: Session) -> str:
        token = secrets.token_urlsafe(24)
        self.tokens[token] = session.session_id
        return token

    def session_for(self, token: str) -> Optional[Session]:
        session_id = self.tokens.get(token)
        if session_id is None:
            return None
        return self.core.sessions.get(session_id)

    async def send_all(self, outbound) -> None:
        for session_id, fr in outbound:
            ws = self.sockets.get(session_id)
            if ws is None:
                continue
            try:
                await ws.send_text(json.dumps(fr, separators=(",", ":")))
            except Exception:
                self.sockets.pop(session_id, None)

    def maybe_snapshot(self) -> None:
        n = len(self.core.log.records)
        if self.config.snapshot_every and n - self._events_at_snapshot >= self.config.snapshot_every:
            self._events_at_snapshot = n
            path = self.config.snapshot_path
            tmp = path.with_suffix(".json.tmp")
            tmp.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_text(json.dumps(self.core.snapshot_state()), encoding="utf-8")
            tmp.replace(path)

    async def dispatch(self, session: Session, fr: dict):
        """Route one frame, keeping slow work outside the core lock."""
        kind = fr.get("kind")
        if kind == "ask_tutor" and isinstance(fr.get("body"), dict):
            return await self._dispatch_ask(session, fr)
        if kind == "check_answer" and isinstance(fr.get("body"), dict):
            return await self._dispatch_grade(session, fr)
        async with self.lock:
            out = self.core.handle_frame(session.session_id, fr)
            self.maybe_snapshot()
            return out

    async def _dispatch_ask(self, session: Session, fr: dict):
        loop = asyncio.get_running_loop()
        async with self.lock:
            try:
                out, context, room = self.core.begin_ask(session, str(fr["body"].get("text", "")))
            except DomainError as e:
                from .core import error_frame

                return [(session.session_id, error_frame(e.code, e.message, "ask_tutor"))]
        await self.send_all(out)
        try:
            reply = await asyncio.wait_for(
                loop.run_in_executor(None, self.core.backend.complete, context),
                timeout=60.0,
            )
        except Exception:
            # Whatever the backend raised, the room must not stay locked;
            # finish_ask posts the unavailable notice instead.
            reply = None
        async with self.lock:
            out = self.core.finish_ask(room.room_id, reply)
            self.maybe_snapshot()
            return out

    async def _dispatch_grade(self, session: Session, fr: dict):
        from . import grader as grader_mod
        from .core import error_frame, frame
        from .model import render_solution

        loop = asyncio.get_running_loop()
        async with self.lock:
            try:
                room = self.core._require_room(session, {}, ta_may_target=False)
                self.core._require_member(session, room)
                worksheet = self.core.worksheets[room.worksheet_id]
                problem = worksheet.problem(room.selected_problem)
                executor = self.core.config.executors.get(problem.language_tag)
                if executor is None:
                    raise DomainError(
                        "no_executor",
                        f"no executor configured for language {problem.language_tag!r}",
                    )
                solution = render_solution(problem, room.doc_states[problem.problem_id].texts)
                result_id = self.core._next_id("g")
                ran_at = self.core.clock.now_ms()
            except DomainError as e:
                return [(session.session_id, error_frame(e.code, e.message, "check_answer"))]
        result = await loop.run_in_executor(
            None,
            lambda: grader_mod.run_tests(
                problem,
                solution,
                executor,
                work_dir=self.core.config.grader_work_dir,
                result_id=result_id,
                ran_at=ran_at,
            ),
        )
        async with self.lock:
            self.core._commit(room.room_id, "grader_run", {"result": result.to_dict()})
            self.maybe_snapshot()
            return self.core._room_broadcast(
                room.room_id,
                frame("grader_result", {"room_id": room.room_id, "result": result.to_dict()}),
            )


def create_app(core: ServerCore, store: WorksheetStore, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="grouptutor")
    gw = Gateway(core, store, config)
    app.state.gateway = gw

    @app.post("/api/join")
    async def join(request: Request):
        data = await request.json()
        try:
            async with gw.lock:
                session = core.join(
                    str(data.get("email", "")),
                    int(data.get("group_number", -1)),
                    str(data.get("display_name", "")),
                )
                gw.maybe_snapshot()
        except DomainError as e:
            return JSONResponse({"error": e.code, "message": e.message}, status_code=400)
        return {
            "token": gw.issue_token(session),
            "participant_id": session.participant.participant_id,
            "role": session.participant.role.value,
            "room_id": session.room_id,
        }

    @app.get("/api/worksheets")
    async def list_worksheets():
        out = []
        for wid in store.list_ids():
            w = store.load(wid)
            out.append(
                {
                    "worksheet_id": w.worksheet_id,
                    "title": w.title,
                    "problems": len(w.problems),
                    "published": w.published,
                }
            )
        return {"worksheets": out}

    @app.get("/api/worksheets/{worksheet_id}")
    async def get_worksheet(worksheet_id: str):
        try:
            w = store.load(worksheet_id)
        except WorksheetNotFound:
            return JSONResponse({"error": "not_found"}, status_code=404)
        return PlainTextResponse(export_worksheet(w), media_type="text/markdown")

    @app.put("/api/worksheets/{worksheet_id}")
    async def put_worksheet(worksheet_id: str, request: Request, token: str = Query("")):
        session = gw.session_for(token)
        if session is None or session.participant.role != Role.TA:
            return JSONResponse({"error": "forbidden"}, status_code=403)
        source = (await request.body()).decode("utf-8")
        result = import_worksheet(source)
        if isinstance(result, list):
            return JSONResponse(
                {"errors": [{"line": e.line, "message": e.message} for e in result]},
                status_code=400,
            )
        if result.worksheet_id != worksheet_id:
            return JSONResponse(
                {"error": "id_mismatch", "message": f"body declares {result.worksheet_id!r}"},
                status_code=400,
            )
        store.store(result)
        async with gw.lock:
            core.worksheets[result.worksheet_id] = result
        return {"worksheet_id": result.worksheet_id, "problems": len(result.problems)}

    @app.get("/api/metrics")
    async def metrics():
        async with gw.lock:
            return core.metrics()

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket, token: str = Query("")):
        session = gw.session_for(token)
        if session is None:
            await websocket.close(code=4401)
            return
        await websocket.accept()
        gw.sockets[session.session_id] = websocket
        try:
            await websocket.send_text(
                json.dumps(core.welcome_frame(session), separators=(",", ":"))
            )
            while True:
                raw = await websocket.receive_text()
                try:
                    fr = json.loads(raw)
                except json.JSONDecodeError:
                    from .core import error_frame

                    await websocket.send_text(json.dumps(error_frame("malformed", "not JSON")))
                    continue
                try:
                    out = await gw.dispatch(session, fr)
                except CloseConnection:
                    await websocket.close(code=4400)
                    break
                await gw.send_all(out)
        except WebSocketDisconnect:
            pass
        finally:
            gw.sockets.pop(session.session_id, None)
            async with gw.lock:
                out = core.leave(session.session_id)
            await gw.send_all(out)

    if config.frontend_dir and Path(config.frontend_dir).exists():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="frontend")

    return app


def build_service(config: ServiceConfig) -> tuple[FastAPI, ServerCore, WorksheetStore]:
    """Boot from durable storage: worksheets, snapshot, event-log tail."""
    store = WorksheetStore(config.content_dir)
    worksheets = {wid: store.load(wid) for wid in store.list_ids()}

    snapshot = None
    if config.snapshot_path.exists():
        try:
            snapshot = json.loads(config.snapshot_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            snapshot = None  # fall back to full log replay

    config.data_dir.mkdir(parents=True, exist_ok=True)
    core, truncation = ServerCore.from_log(
        config.log_path,
        worksheets,
        config.core_config(),
        snapshot=snapshot,
        backend=config.tutor_backend(),
        policy=config.tutor_policy(),
    )
    if truncation:
        import logging

        logging.getLogger("grouptutor").warning(
            "event log truncated at %s: %s", truncation.line, truncation.reason
        )
    app = create_app(core, store, config)
    return app, core, store
