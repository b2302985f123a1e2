"""VLM-assisted annotation: prompt building, pluggable backends with an
offline mock, tolerant response parsing, and the human-review state machine.

The system prompt template is reproduced verbatim, including its example
block quirks (duplicated numbered items, ellipsis lines, malformed example
JSON). The parser therefore has two stages: strict JSON after mild repairs,
then a positional key-value scan that tolerates misplaced brackets.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .asset import (DescriptionSet, KinematicConstraint, MaterialSpec, ObjectAsset,
                    validate_asset)
from .errors import (BackendUnavailable, LabelMismatch, RateLimited, SchemaViolation,
                     StateTransitionError, Timeout, UnparseableResponse, ValidationError)
from .render import default_property_views, render_isolation, write_png

log = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Prompt template (per-part annotation, system role).

PROMPT_INTRO = (
    "You have a good understanding of the structure of an articulated object. "
    "Your job is to assist the user in analyzing the properties of it. "
    "Specifically, the user will give you images of parts, and your task is to "
    "recognize the articulated object and analyze the parts of that object. "
    "You should find a similar physical 3D object in the real world. Based on "
    "human knowledge of it, you should give your answer about the information "
    "as follows:\n"
    "\n"
    "Object-level: \n"
    "(1) name, category, and dimension (length*width*height, in cm) of the "
    "articulated object.\n"
    "\n"
    "Part-level: "
)

_PART_BLOCK = (
    "Part_{n} (image_{n}):\n"
    "(1) Label, name, material, density (g/cm^3) of the part.\n"
    "(2) priority rank of being touched when using this object based on human "
    "preference.\n"
    "(3) labels of all neighboring parts.\n"
    "(3.1) assign a movement type for each group between Part_{n} and its "
    "neighboring parts (A. merely touch and no movement constraints, B. relative "
    "translationally move, C. rotation about an axis, D. rotation about a point, "
    "or E. rigid constraint). If the movement type is B, C, or D, output the "
    "parent and child parts.\n"
    "(3.2) assign a movement type for each group between Part_{n} and its "
    "neighboring parts (A. merely touch and no movement constraints, B. relative "
    "translationally move, C. rotation about an axis, D. rotation about a point, "
    "or E. rigid constraint). If the movement type is B, C, or D, output the "
    "parent and child parts.\n"
    "...\n"
    "(4) summarize the basic information (including material, physical "
    "dimension, category, and name), functional, movement description, and "
    "priority of being grasped description."
)

PROMPT_EXAMPLE = """For example:
{
"object_name": "Rifle",
"category": "ToyGun",
"dimension": "80*10*25",
"parts": [
    {
    "label": 1,
    "material": "Plastic",
    "density": "1.2 g/cm^3",
    "name": "Foregrip",
    "priority_rank": 2,
    "neighbors": [
        {
        "labels_of_movement_group": "1-8",
        "movement_type": "E",
        }
    "Basic_description": "It's a foregrip of a Rifle made of plastic.",
    "Functional_description": "It can control the ...",
    "Movement_description": "It cannot move normally...",
    "Grasped_description": "Most likely to be grasped or handled.",
    ]
    },
    {
    "label": 2,
    "material": "Plastic",
    "density": "1.2 g/cm^3",
    "name": "Stock",
    "priority_rank": 5,
    "neighbors": [
        {
        "labels_of_movement_group": "2-8",
        "movement_type": "B",
        "parent_label": 8,
        "child_label": 2
        }
    "Basic_description": "It's a foregrip of a Rifle classified as a gun. It is a big part of the object made of plastic.",
    "Functional_description": "It can be grasped to control the object...",
    "Movement_description": "It cannot move normally...",
    "Grasped_description": "Less likely to be grasped.",
    ]
    },
    ...
}"""

PROMPT_REMEMBER = (
    "Remember:\n"
    "(1) Do not answer anything not asked.\n"
    "(2) You should base on the physical 3D object in the real world to analyze "
    "the properties and movement of the object.\n"
    "(3) You should purely based on its function to detremine the movement type "
    "of parts.\n"
    "(4) You should prefer to analyze the rendered object as a real 3D object "
    "rather than a toy model.\n"
    "(5) You should assign the priority rank of being grasped from 1 to 10. The "
    "most likely part to be touched is 1.\n"
    "(6) You should consider the function rather than the area or name of the "
    "target part to determine the priority rank of being grasped.\n"
    "(7) The target part uses red color while the other parts use grey color.\n"
    "(8) You should output full JSON including all parts."
)


def prompt_text(part_count: int) -> str:
    blocks = "\n".join(_PART_BLOCK.format(n=i) for i in range(1, part_count + 1))
    return f"{PROMPT_INTRO}\n{blocks}\n\n{PROMPT_EXAMPLE}\n\n{PROMPT_REMEMBER}"


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    images: tuple          # one (h, w, 3) uint8 isolation render per part, id order
    view_indices: tuple    # chosen default-view index per part
    occlusion_warnings: tuple  # part ids invisible from every default view


def build_prompt(asset: ObjectAsset, part_count: int | None = None) -> PromptBundle:
    """System text plus one isolation image per part.

    Each part uses its least-occluded default view (max red-pixel count).
    Parts invisible from all 10 views are flagged but still get their best
    (first) view so the request can proceed.
    """
    if part_count is None:
        part_count = len(asset.parts)
    if part_count != len(asset.parts):
        raise LabelMismatch(f"part_count {part_count} != asset parts {len(asset.parts)}")
    views = default_property_views()
    images, view_idx, warnings = [], [], []
    for p in asset.parts:
        best_i, best_red, best_img = 0, -1, None
        for i, view in enumerate(views):
            img = render_isolation(asset, p.id, view)
            red = int(((img[..., 0] == 255) & (img[..., 1] == 0) & (img[..., 2] == 0)).sum())
            if red > best_red:
                best_i, best_red, best_img = i, red, img
        if best_red == 0:
            warnings.append(p.id)
            log.warning("part %d occluded in every default view", p.id)
        images.append(best_img)
        view_idx.append(best_i)
    return PromptBundle(
        system_text=prompt_text(part_count),
        images=tuple(images),
        view_indices=tuple(view_idx),
        occlusion_warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Backends.


def request_hash(system_text: str, images) -> str:
    h = hashlib.sha256(system_text.encode("utf-8"))
    for img in images:
        h.update(np.ascontiguousarray(img).tobytes())
    return h.hexdigest()


class MockVlm:
    """Offline backend: canned responses keyed by request hash.

    ``fallback`` answers any unknown hash, letting fixtures supply one
    response for a whole pipeline. Load canned files from a directory of
    ``<hash>.txt`` via from_directory().
    """

    def __init__(self, responses: dict | None = None, fallback: str | None = None):
        self.responses = dict(responses or {})
        self.fallback = fallback
        self.calls = 0

    @classmethod
    def from_directory(cls, path, fallback=None):
        responses = {p.stem: p.read_text(encoding="utf-8")
                     for p in sorted(Path(path).glob("*.txt"))}
        return cls(responses, fallback)

    def complete(self, system_text: str, images) -> str:
        self.calls += 1
        key = request_hash(system_text, images)
        if key in self.responses:
            return self.responses[key]
        if self.fallback is not None:
            return self.fallback
        raise BackendUnavailable(f"mock has no response for request {key[:12]}")


class FailingVlm:
    """Always-unavailable backend, for retry-path behavior."""

    def __init__(self, error=BackendUnavailable("backend down")):
        self.error = error
        self.calls = 0

    def complete(self, system_text, images):
        self.calls += 1
        raise self.error


class HttpVlm:
    """Minimal JSON-over-HTTP backend: one text+images -> text call.

    Sends {model, temperature 0, system, images: [b64 PNG]} and expects
    {"text": ...}. The API key comes from the environment, never config files.
    """

    def __init__(self, endpoint: str, model: str, api_key_env: str = "VLM_API_KEY",
                 timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def complete(self, system_text: str, images) -> str:
        import io
        import os

        import httpx

        payload_images = []
        for img in images:
            buf = io.BytesIO()
            write_png(buf, img)
            payload_images.append(base64.b64encode(buf.getvalue()).decode("ascii"))
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"model": self.model, "temperature": 0,
                      "system": system_text, "images": payload_images},
                headers=headers, timeout=self.timeout_s)
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited(f"429 from {self.endpoint}")
        if resp.status_code != 200:
            raise BackendUnavailable(f"{resp.status_code} from {self.endpoint}")
        return resp.json()["text"]


def query_vlm(backend, system_text: str, images, retries: int = 3,
              backoff_s: float = 0.5) -> str:
    """One model call with exponential backoff; logs the request hash."""
    key = request_hash(system_text, images)
    log.info("vlm request %s (%d images)", key[:12], len(images))
    last = None
    for attempt in range(retries):
        try:
            return backend.complete(system_text, images)
        except (BackendUnavailable, RateLimited, Timeout) as exc:
            last = exc
            if attempt + 1 < retries:
                time.sleep(backoff_s * (2 ** attempt))
    raise last


# ---------------------------------------------------------------------------
# Response parsing.


@dataclass(frozen=True)
class MovementGroup:
    labels: str                  # e.g. "1-8"
    movement_type: str           # A..E
    parent_label: int | None = None
    child_label: int | None = None


@dataclass(frozen=True)
class RawPart:
    label: int
    name: str = ""
    material: str = ""
    density: float = 0.0
    priority_rank: int = 1
    groups: tuple = ()
    descriptions: DescriptionSet = field(default_factory=DescriptionSet)


@dataclass(frozen=True)
class RawAnnotation:
    object_name: str
    category: str
    dimension: str               # "L*W*H" in cm
    parts: tuple

    def dimension_tuple(self) -> tuple:
        bits = self.dimension.replace(" ", "").split("*")
        if len(bits) != 3:
            raise SchemaViolation("dimension", f"expected L*W*H, got {self.dimension!r}")
        try:
            return tuple(float(b) for b in bits)
        except ValueError:
            raise SchemaViolation("dimension", f"non-numeric in {self.dimension!r}") from None

    def to_dict(self) -> dict:
        return {
            "object_name": self.object_name,
            "category": self.category,
            "dimension": self.dimension,
            "parts": [
                {"label": p.label, "name": p.name, "material": p.material,
                 "density": p.density, "priority_rank": p.priority_rank,
                 "groups": [{"labels": g.labels,
                             "movement_type": g.movement_type,
                             "parent_label": g.parent_label,
                             "child_label": g.child_label} for g in p.groups],
                 "descriptions": p.descriptions.to_dict()}
                for p in self.parts
            ],
        }


_DENSITY_RE = re.compile(
    r"^\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*(g\s*/\s*cm\s*(?:\^?3|³))?\s*$")


def parse_density(value) -> float:
    """Accepts 1.2, "1.2", "1.2 g/cm^3", "1.2 g/cm3"; rejects other units."""
    if isinstance(value, (int, float)):
        return float(value)
    m = _DENSITY_RE.match(str(value))
    if not m:
        raise SchemaViolation("density", f"cannot parse density {value!r}")
    return float(m.group(1))


def _strip_fences(text: str) -> str:
    fenced = re.findall(r"```(?:json)?\s*(.*?)```", text, flags=re.S)
    return fenced[0] if fenced else text


def _json_region(text: str) -> str:
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise UnparseableResponse("no JSON object found in response")
    return text[start:end + 1]


def _mild_repairs(blob: str) -> str:
    blob = re.sub(r"^\s*\.\.\.\s*,?\s*$", "", blob, flags=re.M)  # ellipsis rows
    blob = re.sub(r",(\s*[}\]])", r"\1", blob)                   # trailing commas
    return blob


_PAIR_RE = re.compile(
    r'"(?P<key>[^"\\]+)"\s*:\s*(?:"(?P<str>(?:[^"\\]|\\.)*)"|(?P<num>-?\d+(?:\.\d+)?))')

_DESC_KEYS = {
    "Basic_description": "basic",
    "Functional_description": "functional",
    "Movement_description": "kinematic",
    "Grasped_description": "grasped",
}


def _scan_pairs(blob: str) -> RawAnnotation:
    """Positional fallback: walk "key": value pairs in order.

    "label" opens a new part; "labels_of_movement_group" opens a new group in
    the current part. Tolerates the template's misplaced brackets.
    """
    header = {"object_name": "", "category": "", "dimension": ""}
    parts: list[dict] = []
    group = None

    def close_group():
        nonlocal group
        if group is not None:
            parts[-1]["groups"].append(MovementGroup(**group))
            group = None

    for m in _PAIR_RE.finditer(blob):
        key = m.group("key")
        value = m.group("str") if m.group("str") is not None else m.group("num")
        if key in header and not parts:
            header[key] = str(value)
        elif key == "label":
            close_group()
            parts.append({"label": int(float(value)), "groups": [], "desc": {}})
        elif not parts:
            continue
        elif key == "labels_of_movement_group":
            close_group()
            group = {"labels": str(value), "movement_type": ""}
        elif key == "movement_type" and group is not None:
            group["movement_type"] = str(value)
        elif key == "parent_label" and group is not None:
            group["parent_label"] = int(float(value))
        elif key == "child_label" and group is not None:
            group["child_label"] = int(float(value))
        elif key in _DESC_KEYS:
            close_group()
            parts[-1]["desc"][_DESC_KEYS[key]] = str(value)
        elif key in ("name", "material", "priority_rank", "density"):
            close_group()
            parts[-1][key] = value
    close_group()
    if not parts:
        raise UnparseableResponse("no parts found in response")
    raw_parts = []
    for p in parts:
        raw_parts.append(RawPart(
            label=p["label"],
            name=str(p.get("name", "")),
            material=str(p.get("material", "")),
            density=parse_density(p.get("density", 0.0)),
            priority_rank=int(float(p.get("priority_rank", 1))),
            groups=tuple(p["groups"]),
            descriptions=DescriptionSet(**p["desc"]),
        ))
    return RawAnnotation(
        object_name=header["object_name"], category=header["category"],
        dimension=header["dimension"], parts=tuple(raw_parts))


def _from_strict(data: dict) -> RawAnnotation:
    parts = []
    for pd in data.get("parts", []):
        groups = []
        neighbors = pd.get("neighbors", [])
        desc = {}
        for item in neighbors:
            if not isinstance(item, dict):
                continue
            if "labels_of_movement_group" in item:
                groups.append(MovementGroup(
                    labels=str(item["labels_of_movement_group"]),
                    movement_type=str(item.get("movement_type", "")),
                    parent_label=(int(item["parent_label"])
                                  if "parent_label" in item else None),
                    child_label=(int(item["child_label"])
                                 if "child_label" in item else None),
                ))
            for k, v in item.items():  # descriptions misplaced into neighbors
                if k in _DESC_KEYS:
                    desc[_DESC_KEYS[k]] = str(v)
        for k, v in pd.items():
            if k in _DESC_KEYS:
                desc[_DESC_KEYS[k]] = str(v)
        parts.append(RawPart(
            label=int(pd["label"]),
            name=str(pd.get("name", "")),
            material=str(pd.get("material", "")),
            density=parse_density(pd.get("density", 0.0)),
            priority_rank=int(pd.get("priority_rank", 1)),
            groups=tuple(groups),
            descriptions=DescriptionSet(**desc),
        ))
    return RawAnnotation(
        object_name=str(data.get("object_name", "")),
        category=str(data.get("category", "")),
        dimension=str(data.get("dimension", "")),
        parts=tuple(parts))


def _validate_raw(raw: RawAnnotation) -> RawAnnotation:
    if not raw.parts:
        raise UnparseableResponse("no parts found in response")
    for i, p in enumerate(raw.parts):
        path = f"parts[{i}]"
        if not (1 <= p.priority_rank <= 10):
            raise SchemaViolation(f"{path}.priority_rank",
                                  f"{p.priority_rank} outside [1, 10]")
        for j, g in enumerate(p.groups):
            gpath = f"{path}.neighbors[{j}]"
            if g.movement_type not in ("A", "B", "C", "D", "E"):
                raise SchemaViolation(f"{gpath}.movement_type",
                                      f"unknown type {g.movement_type!r}")
            needs_pc = g.movement_type in ("B", "C", "D")
            has_pc = g.parent_label is not None and g.child_label is not None
            if needs_pc and not has_pc:
                raise SchemaViolation(gpath,
                                      f"type {g.movement_type} requires parent and child labels")
            if not needs_pc and (g.parent_label is not None or g.child_label is not None):
                raise SchemaViolation(gpath,
                                      f"type {g.movement_type} must not carry parent/child labels")
    return raw


def parse_response(text: str) -> RawAnnotation:
    """Tolerant extraction: strict JSON after mild repairs, else positional scan."""
    blob = _mild_repairs(_json_region(_strip_fences(text)))
    try:
        data = json.loads(blob)
        if isinstance(data, dict):
            return _validate_raw(_from_strict(data))
    except json.JSONDecodeError:
        pass
    except (KeyError, TypeError, ValueError) as exc:
        raise UnparseableResponse(f"JSON parsed but malformed: {exc!r}") from None
    return _validate_raw(_scan_pairs(blob))


# ---------------------------------------------------------------------------
# Applying an approved annotation.

# name -> (youngs_modulus GPa, poisson_ratio); density always comes from the
# annotation. Lookup is case-insensitive with a generic default.
MATERIAL_TABLE = {
    "plastic": (2.0, 0.35),
    "metal": (100.0, 0.30),
    "steel": (200.0, 0.30),
    "aluminum": (69.0, 0.33),
    "aluminium": (69.0, 0.33),
    "iron": (211.0, 0.29),
    "copper": (117.0, 0.34),
    "brass": (102.0, 0.34),
    "wood": (11.0, 0.35),
    "glass": (70.0, 0.22),
    "ceramic": (300.0, 0.27),
    "porcelain": (60.0, 0.23),
    "rubber": (0.05, 0.49),
    "fabric": (0.5, 0.30),
    "cloth": (0.5, 0.30),
    "leather": (0.3, 0.40),
    "paper": (2.0, 0.30),
    "cardboard": (0.5, 0.30),
    "stone": (50.0, 0.25),
    "foam": (0.01, 0.30),
}
DEFAULT_ELASTICITY = (1.0, 0.30)


def material_from_name(name: str, density: float) -> MaterialSpec:
    youngs, poisson = MATERIAL_TABLE.get(name.strip().lower(), DEFAULT_ELASTICITY)
    return MaterialSpec(name=name, youngs_modulus=youngs,
                        poisson_ratio=poisson, density=max(density, 0.0))


def constraint_stubs(raw: RawAnnotation) -> list[KinematicConstraint]:
    """Unfinalized (kind, parent, child) stubs for every B/C/D group, deduped."""
    seen = set()
    stubs = []
    for p in raw.parts:
        for g in p.groups:
            if g.movement_type not in ("B", "C", "D"):
                continue
            key = (g.movement_type, g.parent_label, g.child_label)
            if key in seen:
                continue
            seen.add(key)
            stubs.append(KinematicConstraint(
                kind=g.movement_type, parent_part=g.parent_label,
                child_part=g.child_label, finalized=False))
    return stubs


def apply_annotation(asset: ObjectAsset, raw: RawAnnotation) -> tuple:
    """Write approved annotation fields onto the asset.

    Returns (annotated asset, constraint stubs still needing estimation).
    The stubs are not attached: estimation must fill their geometry first.
    """
    raw_labels = sorted(p.label for p in raw.parts)
    asset_ids = sorted(p.id for p in asset.parts)
    if raw_labels != asset_ids:
        raise LabelMismatch(f"annotation labels {raw_labels} != part ids {asset_ids}")
    by_label = {p.label: p for p in raw.parts}
    parts = []
    for part in asset.parts:
        rp = by_label[part.id]
        parts.append(replace(
            part,
            name=rp.name or part.name,
            material=material_from_name(rp.material, rp.density),
            affordance_rank=rp.priority_rank,
            descriptions=rp.descriptions,
        ))
    annotated = replace(
        asset,
        object_name=raw.object_name or asset.object_name,
        category=raw.category or asset.category,
        absolute_scale=raw.dimension_tuple(),
        parts=tuple(parts),
    )
    violations = validate_asset(annotated)
    if violations:
        raise ValidationError(violations)
    return annotated, constraint_stubs(raw)


# ---------------------------------------------------------------------------
# Review state machine with an append-only JSONL log.

REVIEW_STATUSES = ("pending", "vlm_done", "human_approved", "human_edited", "rejected")
_TRANSITIONS = {
    "pending": ("vlm_done",),
    "vlm_done": ("human_approved", "human_edited", "rejected"),
    "human_approved": (),
    "human_edited": (),
    "rejected": ("pending",),
}


@dataclass(frozen=True)
class ReviewState:
    status: str = "pending"
    editor: str = ""
    timestamp: str = ""

    def is_approved(self) -> bool:
        return self.status in ("human_approved", "human_edited")


def review_transition(state: ReviewState, status: str, editor: str = "",
                      timestamp: str = "") -> ReviewState:
    if status not in REVIEW_STATUSES:
        raise StateTransitionError(f"unknown status {status!r}")
    if status not in _TRANSITIONS[state.status]:
        raise StateTransitionError(f"cannot move {state.status} -> {status}")
    return ReviewState(status=status, editor=editor, timestamp=timestamp)


class ReviewLog:
    """Append-only JSONL: state transitions plus informational notes.

    Replay re-applies the transitions through the state machine, so a
    corrupted or hand-ordered log fails loudly; note entries (no "status"
    key) are skipped.
    """

    def __init__(self, path):
        self.path = Path(path)

    def _write(self, entry: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def append(self, state: ReviewState, payload: dict | None = None) -> None:
        entry = {"status": state.status, "editor": state.editor,
                 "timestamp": state.timestamp}
        if payload is not None:
            entry["payload"] = payload
        self._write(entry)

    def note(self, payload: dict) -> None:
        self._write({"event": payload})

    def replay(self) -> ReviewState:
        state = ReviewState()
        if not self.path.is_file():
            return state
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if "status" not in entry:
                    continue
                state = review_transition(state, entry["status"],
                                          entry.get("editor", ""),
                                          entry.get("timestamp", ""))
        return state


# ---------------------------------------------------------------------------
# End-to-end convenience used by the CLI and tests.


def run_annotation(asset: ObjectAsset, backend, chunk_size: int | None = None):
    """build_prompt -> query -> parse, optionally chunking oversized image sets.

    Chunked requests carry the per-part blocks and images of their chunk only;
    parsed chunks merge by part label (object header from the first chunk).
    """
    bundle = build_prompt(asset)
    if chunk_size is None or len(bundle.images) <= chunk_size:
        return parse_response(query_vlm(backend, bundle.system_text, bundle.images))
    merged_parts: list[RawPart] = []
    header = None
    ids = [p.id for p in asset.parts]
    for start in range(0, len(ids), chunk_size):
        chunk_ids = ids[start:start + chunk_size]
        text = prompt_text(len(chunk_ids))
        images = bundle.images[start:start + chunk_size]
        raw = parse_response(query_vlm(backend, text, images))
        if header is None:
            header = raw
        merged_parts.extend(raw.parts)
    merged_parts.sort(key=lambda p: p.label)
    return RawAnnotation(object_name=header.object_name, category=header.category,
                         dimension=header.dimension, parts=tuple(merged_parts))
