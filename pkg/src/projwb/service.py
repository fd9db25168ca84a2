"""HTTP rating service.

Serves projections from a finished run for blind rating: the payload a
rater sees carries coordinates, class labels, and guidelines, but never
the technique or its parameters. Each (user, seed) pair gets its own
shuffled queue; ratings append to per-user JSONL files and sessions
resume from whatever is already rated.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .datasets import DataError, Dataset
from .harness import (
    METRICS_NAME,
    MetricTable,
    load_run_datasets,
    load_run_projections,
    training_from_ratings,
)
from .learning import MIN_FIT_ROWS
from .projections import Projection
from .rating_store import (
    SCORE_MAX,
    SCORE_MIN,
    RatingStore,
    validate_user_id,
)
from .seeding import derive_seed

DEFAULT_RATINGS_SUBDIR = "ratings"


def load_guidelines() -> str:
    return (
        resources.files("projwb").joinpath("data/guidelines.txt").read_text().strip()
    )


def build_queue(projection_ids: list[str], user_id: str, seed: int) -> tuple[str, ...]:
    """Deterministic per-user presentation order over all projections."""
    ids = sorted(projection_ids)
    order = np.random.default_rng(derive_seed(seed, "queue", user_id)).permutation(len(ids))
    return tuple(ids[i] for i in order)


def session_token(user_id: str, seed: int) -> str:
    # reuse the id scheme of projections: short, opaque, reproducible
    digest = hashlib.sha256(f"{user_id}:{seed}".encode()).hexdigest()
    return "s" + digest[:12]


@dataclass
class Session:
    session_id: str
    user_id: str
    seed: int
    queue: tuple[str, ...]


class SessionRequest(BaseModel):
    user_id: str
    seed: int = 0


class RatingRequest(BaseModel):
    projection_id: str
    score: int
    revisit: bool = False


def _json_response(payload: dict, status_code: int = 200) -> Response:
    # deterministic body bytes: sorted keys, fixed separators
    return Response(
        content=json.dumps(payload, sort_keys=True, indent=2) + "\n",
        media_type="application/json",
        status_code=status_code,
    )


def create_app(
    run_dir: str,
    ratings_dir: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    datasets: dict[str, Dataset] = load_run_datasets(run_dir)
    projections: dict[str, Projection] = {
        p.id: p for p in load_run_projections(run_dir)
    }
    if not projections:
        raise DataError(f"run at {run_dir} has no projections")
    store = RatingStore(ratings_dir or os.path.join(run_dir, DEFAULT_RATINGS_SUBDIR))
    guidelines = load_guidelines()
    metrics_path = os.path.join(run_dir, METRICS_NAME)

    app = FastAPI(title="projection rating service")
    sessions: dict[str, Session] = {}

    def _session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def _progress(session: Session) -> tuple[int, str | None]:
        """(rated count, first unrated projection id in queue order)."""
        latest = store.latest(session.user_id)
        rated = 0
        current = None
        for pid in session.queue:
            if pid in latest:
                rated += 1
            elif current is None:
                current = pid
        return rated, current

    @app.post("/sessions")
    def create_session(req: SessionRequest) -> Response:
        try:
            validate_user_id(req.user_id)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        token = session_token(req.user_id, req.seed)
        if token not in sessions:
            sessions[token] = Session(
                session_id=token,
                user_id=req.user_id,
                seed=req.seed,
                queue=build_queue(list(projections), req.user_id, req.seed),
            )
        session = sessions[token]
        rated, _ = _progress(session)
        return _json_response(
            {
                "session_id": session.session_id,
                "user_id": session.user_id,
                "rated": rated,
                "total": len(session.queue),
            }
        )

    @app.get("/sessions/{session_id}/next")
    def next_projection(session_id: str) -> Response:
        session = _session(session_id)
        rated, current = _progress(session)
        if current is None:
            return _json_response({"done": True, "rated": rated, "total": len(session.queue)})
        proj = projections[current]
        ds = datasets[proj.dataset_id]
        return _json_response(
            {
                "projection_id": proj.id,
                "dataset_id": proj.dataset_id,
                "coords": [[float(x), float(y)] for x, y in proj.coords],
                "labels": [int(v) for v in ds.labels],
                "guidelines": guidelines,
                "rated": rated,
                "total": len(session.queue),
            }
        )

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(session_id: str, req: RatingRequest) -> Response:
        session = _session(session_id)
        if req.projection_id not in projections:
            raise HTTPException(
                status_code=404, detail=f"unknown projection {req.projection_id!r}"
            )
        if not SCORE_MIN <= req.score <= SCORE_MAX:
            raise HTTPException(
                status_code=400,
                detail=f"score must be in [{SCORE_MIN}, {SCORE_MAX}], got {req.score}",
            )
        rated, current = _progress(session)
        if req.projection_id != current:
            already = req.projection_id in store.latest(session.user_id)
            if not (req.revisit and already):
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"projection {req.projection_id!r} is not the current queue item; "
                        "set revisit to change an earlier answer"
                    ),
                )
        store.append(session.user_id, req.projection_id, req.score)
        rated, _ = _progress(session)
        return _json_response({"ok": True, "rated": rated, "total": len(session.queue)})

    @app.get("/users/{user_id}/export")
    def export_training(user_id: str) -> Response:
        try:
            validate_user_id(user_id)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        latest = store.latest(user_id)
        if not latest:
            raise HTTPException(status_code=404, detail=f"no ratings for user {user_id!r}")
        if len(latest) < MIN_FIT_ROWS:
            raise HTTPException(
                status_code=409,
                detail=(
                    f"only {len(latest)} rated projections; "
                    f"export needs at least {MIN_FIT_ROWS}"
                ),
            )
        if not os.path.exists(metrics_path):
            raise HTTPException(
                status_code=409,
                detail=f"no metric table at {metrics_path}; run `evaluate` first",
            )
        table = MetricTable.from_csv(metrics_path)
        try:
            training = training_from_ratings(user_id, dict(latest), table)
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return _json_response(
            {
                "user_id": training.user_id,
                "rows": [
                    {
                        "projection_id": row.projection_id,
                        "rating": row.rating,
                        **row.metric.to_dict(),
                    }
                    for row in training.rows
                ],
            }
        )

    if ui_dir is not None:
        if not os.path.isdir(ui_dir):
            raise DataError(f"UI directory not found: {ui_dir}")
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
