"""HTTP surface over a ServiceStore.

JSON in, JSON out. Error mapping is uniform across endpoints: malformed
bodies or documents are 400, unknown screen/element/trace ids are 404, an
embedding produced by a different model version is 409, and any configured
gate that rejects a request (overlay gates, replay match threshold) is 422
with a human-readable ``reason``.
"""

from typing import Optional

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..encoder import EncoderModel
from ..errors import (
    EmptyAnnotationStore,
    EmptyIndex,
    GateNotMet,
    MalformedDocument,
    ModelVersionMismatch,
    ScreenMatchError,
    UnknownId,
)
from ..featurize import DEFAULT_TEXT_ENCODER, TextEncoder
from ..matcher import MatchParams, correspond, heuristic_correspond
from ..screen import Screen, parse_screen
from .store import Annotation, OverlayGates, SearchFilters, ServiceStore, TraceStep


def _screen_context(screen: Screen) -> dict:
    """Compact layout for result cards and wireframe rendering."""
    return {
        "screen_id": screen.screen_id,
        "screen_category": screen.screen_category,
        "width_px": screen.width_px,
        "height_px": screen.height_px,
        "elements": [{"element_id": el.element_id,
                      "bbox": el.bounds.as_list(),
                      "category": el.category.name,
                      "text": el.text}
                     for el in screen.elements],
    }


def _result_card(store: ServiceStore, entry, score: Optional[float]) -> dict:
    return {
        "uid": entry.uid,
        "element_id": entry.element_id,
        "screen_id": entry.screen_id,
        "tags": list(entry.tags),
        "text": entry.text,
        "bounds": entry.bounds.as_list(),
        "score": score,
        "screen": _screen_context(store.index.screen(entry.screen_id)),
    }


def _parse_match_params(raw: Optional[dict],
                        defaults: MatchParams) -> tuple:
    """(MatchParams, use_heuristic) from a request's params object."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise MalformedDocument("params must be an object")
    try:
        params = MatchParams(
            k=int(raw.get("k", defaults.k)),
            c=float(raw.get("c", defaults.c)),
            assignment=str(raw.get("assignment", defaults.assignment)),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad match params: {exc}") from exc
    return params, bool(raw.get("heuristic", False))


def create_app(store: ServiceStore, model: EncoderModel,
               enc: TextEncoder = DEFAULT_TEXT_ENCODER,
               match_params: MatchParams = MatchParams(),
               gates: OverlayGates = OverlayGates()) -> FastAPI:
    app = FastAPI(title="screenmatch", docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        # 422 is reserved for gate failures; malformed requests are 400
        return JSONResponse(status_code=400, content={"reason": "malformed request"})

    @app.exception_handler(ScreenMatchError)
    async def _domain(request: Request, exc: ScreenMatchError):
        if isinstance(exc, (UnknownId, EmptyIndex)):
            status = 404
        elif isinstance(exc, ModelVersionMismatch):
            status = 409
        elif isinstance(exc, (GateNotMet, EmptyAnnotationStore)):
            status = 422
        else:
            status = 400
        return JSONResponse(status_code=status, content={"reason": str(exc)})

    @app.post("/v1/screens")
    async def post_screen(payload: dict = Body(...)):
        screen = parse_screen(payload)
        screen_id, element_ids = store.index_screen(screen, model, enc)
        return {"screen_id": screen_id, "element_ids": element_ids}

    @app.get("/v1/search")
    async def get_search(tags: str = Query(""), text: str = Query(""),
                         k: int = Query(10, ge=1, le=1000)):
        tag_list = tuple(t.strip() for t in tags.split(",") if t.strip())
        text_q = text if text else None
        if not tag_list and text_q is None:
            return JSONResponse(status_code=400,
                                content={"reason": "empty query: give tags or text"})
        filters = SearchFilters(tags=tag_list, text=text_q)
        entries = store.search(filters, k)
        return {"query": {"tags": list(tag_list), "text": text_q, "k": k},
                "total": len(entries),
                "results": [_result_card(store, e, None) for e in entries]}

    @app.get("/v1/elements/{uid}/similar")
    async def get_similar(uid: str, k: int = Query(10, ge=1, le=1000)):
        ranked = store.similar_to(uid, k)
        return {"exemplar": uid,
                "total": len(ranked),
                "results": [_result_card(store, e, score) for e, score in ranked]}

    @app.post("/v1/correspond")
    async def post_correspond(payload: dict = Body(...)):
        def resolve(key: str) -> Screen:
            ref = payload.get(key)
            if isinstance(ref, str):
                return store.index.screen(ref)
            if isinstance(ref, dict):
                return parse_screen(ref)
            raise MalformedDocument(
                f"{key} must be an indexed screen_id or a screen document")

        a, b = resolve("screen_a"), resolve("screen_b")
        params, heuristic = _parse_match_params(payload.get("params"), match_params)
        if heuristic:
            mapping = heuristic_correspond(a, b, params)
        else:
            mapping = correspond(a, b, model, enc, params)
        doc = mapping.as_dict()
        doc["screens"] = {"a": _screen_context(a), "b": _screen_context(b)}
        return doc

    @app.post("/v1/annotations")
    async def post_annotation(payload: dict = Body(...)):
        try:
            ann = Annotation(screen_id=str(payload["screen_id"]),
                             element_id=str(payload["element_id"]),
                             text=str(payload["text"]),
                             author=str(payload.get("author", "")))
        except KeyError:
            return JSONResponse(status_code=400,
                                content={"reason": "annotation needs screen_id, element_id, text"})
        stored = store.add_annotation(ann)
        return stored.as_dict()

    @app.post("/v1/overlay")
    async def post_overlay(payload: dict = Body(...)):
        if "screen" not in payload:
            return JSONResponse(status_code=400,
                                content={"reason": "overlay needs a screen document"})
        target = parse_screen(payload["screen"])
        params, _ = _parse_match_params(payload.get("params"), match_params)
        spec = store.transfer_overlay(target, model, enc, gates, params)
        if spec.reason is not None:
            return JSONResponse(status_code=422, content=spec.as_dict())
        return spec.as_dict()

    @app.post("/v1/traces")
    async def post_trace(payload: dict = Body(...)):
        raw_steps = payload.get("steps")
        if not isinstance(raw_steps, list) or not raw_steps:
            return JSONResponse(status_code=400,
                                content={"reason": "trace needs a non-empty steps list"})
        steps = []
        for raw in raw_steps:
            try:
                steps.append(TraceStep(index=int(raw["index"]),
                                       screen=parse_screen(raw["screen"]),
                                       target_element_id=str(raw["target_element_id"]),
                                       action=dict(raw["action"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedDocument(f"bad trace step: {exc}") from exc
        trace_id = store.add_trace(steps, payload.get("trace_id"))
        return {"trace_id": trace_id, "step_count": len(steps)}

    @app.post("/v1/traces/{trace_id}/replay-step")
    async def post_replay(trace_id: str, payload: dict = Body(...)):
        if "screen" not in payload:
            return JSONResponse(status_code=400,
                                content={"reason": "replay needs a live screen document"})
        steps = store.get_trace(trace_id)
        try:
            step_index = int(payload.get("step_index", 0))
        except (TypeError, ValueError) as exc:
            raise MalformedDocument("step_index must be an integer") from exc
        matching = [st for st in steps if st.index == step_index]
        if not matching:
            raise UnknownId(f"trace {trace_id!r} has no step {step_index}")
        live = parse_screen(payload["screen"])
        params, _ = _parse_match_params(payload.get("params"), match_params)
        result = store.replay_step(matching[0], live, model, enc, params)
        return result.as_dict()

    return app
