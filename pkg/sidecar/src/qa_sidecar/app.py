"""FastAPI service implementing the span-extractor wire protocol.

POST /extract takes a question plus candidate documents and returns
scored answer spans whose offsets are byte offsets into the UTF-8
encoding of each document exactly as transmitted; the char-to-byte
conversion lives here so clients can validate slices uniformly. One
inference runs at a time per worker; concurrency comes from workers.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import Backend, make_backend

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SidecarConfig:
    """Service knobs; the window default matches the larger serving setting."""

    model: str = "overlap"
    max_window_chars: int = 3000
    max_answers: int = 10
    device: str | None = None
    question_template: str = "{question}"

    @classmethod
    def from_env(cls) -> "SidecarConfig":
        return cls(
            model=os.environ.get("QA_SIDECAR_MODEL", "overlap"),
            max_window_chars=int(os.environ.get("QA_SIDECAR_WINDOW", "3000")),
            max_answers=int(os.environ.get("QA_SIDECAR_MAX_ANSWERS", "10")),
            device=os.environ.get("QA_SIDECAR_DEVICE") or None,
            question_template=os.environ.get("QA_SIDECAR_QUESTION_TEMPLATE", "{question}"),
        )


class DocumentIn(BaseModel):
    id: str
    text: str


class ExtractRequest(BaseModel):
    question: str
    documents: list[DocumentIn] = Field(min_length=1)
    max_answers: int = Field(default=10, ge=1)
    window_chars: int | None = Field(default=None, ge=1)


class AnswerOut(BaseModel):
    doc_id: str
    start: int
    end: int
    text: str
    score: float


class ExtractResponse(BaseModel):
    answers: list[AnswerOut]
    model_id: str


def create_app(config: SidecarConfig | None = None, backend: Backend | None = None) -> FastAPI:
    config = config or SidecarConfig.from_env()
    backend = backend or make_backend(config.model, device=config.device)
    app = FastAPI(title="qa-sidecar", docs_url=None, redoc_url=None)
    inference_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "INVALID_REQUEST", "message": str(exc.errors()[:3])},
        )

    @app.exception_handler(Exception)
    async def failure_handler(request: Request, exc: Exception):
        logger.exception("inference failed")
        return JSONResponse(
            status_code=500,
            content={"code": "MODEL_FAILURE", "message": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "model_id": backend.model_id,
            "max_window_chars": config.max_window_chars,
        }

    @app.post("/extract", response_model=ExtractResponse)
    def extract(request: ExtractRequest) -> ExtractResponse:
        question = config.question_template.format(question=request.question)
        window = min(request.window_chars or config.max_window_chars, config.max_window_chars)
        limit = min(request.max_answers, config.max_answers)
        answers: list[AnswerOut] = []
        for document in request.documents:
            context = document.text[:window]
            if not context:
                continue
            with inference_lock:
                spans = backend.answer(question, context, limit)
            for span in spans:
                prefix = document.text[: span.start]
                matched = document.text[span.start : span.end]
                start_b = len(prefix.encode("utf-8"))
                answers.append(
                    AnswerOut(
                        doc_id=document.id,
                        start=start_b,
                        end=start_b + len(matched.encode("utf-8")),
                        text=matched,
                        score=span.score,
                    )
                )
        answers.sort(key=lambda a: (-a.score, a.doc_id, a.start))
        return ExtractResponse(answers=answers[:limit], model_id=backend.model_id)

    return app


app = create_app()
