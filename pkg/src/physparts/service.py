"""Local single-user review service over an asset directory.

Thin veneer: each endpoint returns the byte-exact output of the matching
library serializer, so no numeric or formatting logic forks between the
HTTP layer and the library. No auth: the service binds locally for one
reviewer. Writes are serialized per asset behind a version counter;
POSTs carrying a stale version get 409.

Disk layout per asset: ``root/<id>/asset.json`` plus ``part_<n>.obj`` and an
append-only ``review_log.jsonl``.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse

from .asset import (KinematicConstraint, ObjectAsset, Violation,
                    _check_constraint_fields, dump_asset_json, load_asset,
                    save_asset)
from .annotate import ReviewLog, ReviewState, review_transition
from .config import EstimationConfig
from .errors import NoContact, StateTransitionError, UnknownPart
from .kinematics import candidate_payload
from .meshio import mesh_to_bytes


class _AssetEntry:
    def __init__(self, asset: ObjectAsset, directory: Path):
        self.asset = asset
        self.directory = directory
        self.version = 1
        self.lock = threading.Lock()

    @property
    def review(self) -> ReviewState:
        return ReviewLog(self.directory / "review_log.jsonl").replay()


def _asset_hash(asset: ObjectAsset) -> str:
    return hashlib.sha256(dump_asset_json(asset).encode("utf-8")).hexdigest()


def _config_hash(config: EstimationConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def asset_summary(entry: _AssetEntry, asset_id: str) -> dict:
    a = entry.asset
    return {
        "id": asset_id,
        "object_name": a.object_name,
        "category": a.category,
        "n_parts": len(a.parts),
        "n_constraints": len(a.constraints),
        "review": entry.review.status,
        "version": entry.version,
    }


def listing_payload(entries: dict) -> bytes:
    rows = [asset_summary(entries[k], k) for k in sorted(entries)]
    return (json.dumps({"assets": rows}, indent=2, sort_keys=True) + "\n"
            ).encode("utf-8")


def _selection_violations(asset: ObjectAsset, constraint: KinematicConstraint) -> list:
    violations: list = []
    _check_constraint_fields(constraint, "constraint", violations)
    for role, pid in (("parent_part", constraint.parent_part),
                      ("child_part", constraint.child_part)):
        if pid is not None and not asset.has_part(pid):
            violations.append(Violation(
                code="DanglingConstraintRef", path=f"constraint.{role}",
                message=f"part {pid} does not exist"))
    return violations


def _constraint_from_body(body: dict) -> KinematicConstraint:
    def _tup(v):
        return None if v is None else tuple(float(x) for x in v)
    return KinematicConstraint(
        kind=str(body.get("kind", "")),
        parent_part=body.get("parent_part"),
        child_part=body.get("child_part"),
        direction=_tup(body.get("direction")),
        pivot=_tup(body.get("pivot")),
        range=_tup(body.get("range")),
        finalized=True,
    )


def create_app(root: Path, config: EstimationConfig | None = None) -> FastAPI:
    root = Path(root)
    if config is None:
        config = EstimationConfig()
    app = FastAPI(title="physparts review service")
    entries: dict = {}
    for path in sorted(p for p in root.iterdir() if p.is_dir()):
        if (path / "asset.json").is_file():
            entries[path.name] = _AssetEntry(load_asset(path), path)
    candidate_cache: dict = {}

    def _entry(asset_id: str):
        entry = entries.get(asset_id)
        if entry is None:
            return None, JSONResponse({"detail": f"unknown asset {asset_id!r}"},
                                      status_code=404)
        return entry, None

    @app.get("/assets")
    def list_assets():
        return Response(content=listing_payload(entries),
                        media_type="application/json")

    @app.get("/assets/{asset_id}")
    def get_asset(asset_id: str):
        entry, err = _entry(asset_id)
        if err:
            return err
        return Response(content=dump_asset_json(entry.asset).encode("utf-8"),
                        media_type="application/json",
                        headers={"X-Asset-Version": str(entry.version)})

    @app.get("/assets/{asset_id}/mesh/{part_id}")
    def get_mesh(asset_id: str, part_id: int):
        entry, err = _entry(asset_id)
        if err:
            return err
        if not entry.asset.has_part(part_id):
            return JSONResponse({"detail": f"unknown part {part_id}"},
                                status_code=404)
        blob = mesh_to_bytes(entry.asset.part_by_id(part_id).mesh)
        return Response(content=blob, media_type="application/octet-stream")

    @app.get("/assets/{asset_id}/candidates/{child_id}/{parent_id}")
    def get_candidates(asset_id: str, child_id: int, parent_id: int,
                       kind: str = "CB"):
        entry, err = _entry(asset_id)
        if err:
            return err
        for pid in (child_id, parent_id):
            if not entry.asset.has_part(pid):
                return JSONResponse({"detail": f"unknown part {pid}"},
                                    status_code=404)
        key = (_asset_hash(entry.asset), (child_id, parent_id, kind),
               _config_hash(config))
        blob = candidate_cache.get(key)
        if blob is None:
            try:
                blob = candidate_payload(entry.asset, child_id, parent_id,
                                         kind=kind, config=config)
            except (NoContact, UnknownPart, ValueError) as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            candidate_cache[key] = blob
        return Response(content=blob, media_type="application/json")

    @app.post("/assets/{asset_id}/selection")
    def post_selection(asset_id: str, body: dict):
        entry, err = _entry(asset_id)
        if err:
            return err
        with entry.lock:
            if body.get("version") != entry.version:
                return JSONResponse(
                    {"detail": "stale version", "version": entry.version},
                    status_code=409)
            try:
                constraint = _constraint_from_body(body.get("constraint") or {})
            except (TypeError, ValueError) as exc:
                return JSONResponse({"detail": f"malformed constraint: {exc}"},
                                    status_code=422)
            violations = _selection_violations(entry.asset, constraint)
            if violations:
                return JSONResponse(
                    {"detail": "constraint invariants failed",
                     "violations": [{"code": v.code, "path": v.path,
                                     "message": v.message} for v in violations]},
                    status_code=422)
            kept = tuple(c for c in entry.asset.constraints
                         if c.child_part != constraint.child_part
                         or c.child_part is None)
            entry.asset = replace(entry.asset, constraints=kept + (constraint,))
            save_asset(entry.asset, entry.directory)
            ReviewLog(entry.directory / "review_log.jsonl").note(
                {"event": "selection", "constraint": constraint.to_dict()})
            entry.version += 1
            return JSONResponse({"version": entry.version,
                                 "constraint": constraint.to_dict()})

    @app.post("/assets/{asset_id}/review")
    def post_review(asset_id: str, body: dict):
        entry, err = _entry(asset_id)
        if err:
            return err
        with entry.lock:
            if body.get("version") != entry.version:
                return JSONResponse(
                    {"detail": "stale version", "version": entry.version},
                    status_code=409)
            status = {"approve": "human_approved", "edit": "human_edited",
                      "reject": "rejected", "requeue": "pending",
                      "vlm_done": "vlm_done"}.get(body.get("decision"))
            if status is None:
                return JSONResponse(
                    {"detail": f"unknown decision {body.get('decision')!r}"},
                    status_code=422)
            try:
                state = review_transition(
                    entry.review, status, editor=body.get("editor", ""),
                    timestamp=datetime.now(timezone.utc).isoformat())
            except StateTransitionError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            ReviewLog(entry.directory / "review_log.jsonl").append(state)
            entry.version += 1
            return JSONResponse({"version": entry.version,
                                 "review": state.status})

    return app
