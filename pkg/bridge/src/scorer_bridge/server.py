"""HTTP surface: POST /score (single) and POST /score_batch (list)."""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from scorer_bridge.scoring import BadRequest, CompletionScorer, ScoreRequest


class ScoreRequestModel(BaseModel):
    id: str
    prefix: str
    completion: str

    def to_request(self) -> ScoreRequest:
        return ScoreRequest(id=self.id, prefix=self.prefix, completion=self.completion)


def create_app(scorer: CompletionScorer, busy_timeout: float = 30.0) -> FastAPI:
    app = FastAPI(title="lm-scorer-bridge")
    app.state.scorer = scorer
    # scoring is serialized per device; concurrent requests queue on this
    app.state.lock = threading.Lock()
    app.state.busy_timeout = busy_timeout

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def run(reqs: list[ScoreRequest]):
        if not app.state.lock.acquire(timeout=app.state.busy_timeout):
            return JSONResponse(status_code=503, content={"detail": "model busy"})
        try:
            return [r.to_dict() for r in app.state.scorer.score_batch(reqs)]
        except BadRequest as e:
            return JSONResponse(status_code=400, content={"detail": str(e)})
        finally:
            app.state.lock.release()

    @app.get("/health")
    def health():
        return {"status": "ok", "model": scorer.model_id}

    @app.post("/score")
    def score(req: ScoreRequestModel):
        out = run([req.to_request()])
        if isinstance(out, JSONResponse):
            return out
        return out[0]

    @app.post("/score_batch")
    def score_batch(reqs: list[ScoreRequestModel]):
        return run([r.to_request() for r in reqs])

    return app
