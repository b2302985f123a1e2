"""Command-line entry points for each pipeline stage.

Every run writes one job manifest next to its outputs; a rerun whose job
hash matches a completed manifest is skipped unless --force. Exit codes:
0 success, 2 validation/input failure, 3 backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import asset as asset_mod
from .config import EstimationConfig, load_config
from .errors import (BackendUnavailable, Divergence, EmbedderUnavailable,
                     PhysPartsError, RateLimited, Timeout, UnparseableResponse)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3

_BACKEND_ERRORS = (BackendUnavailable, RateLimited, Timeout,
                   UnparseableResponse, EmbedderUnavailable, Divergence)


@dataclass
class JobManifest:
    command: str
    inputs: list
    config_hash: str
    seed: int
    outputs: list
    status: str
    job_hash: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(paths) -> list:
    digests = []
    for p in sorted(Path(x) for x in paths):
        if p.is_dir():
            for f in sorted(p.rglob("*")):
                if f.is_file():
                    digests.append(f"{f}:{_hash_file(f)}")
        elif p.is_file():
            digests.append(f"{p}:{_hash_file(p)}")
    return digests


def config_hash(config: EstimationConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def job_hash(command: str, inputs, cfg_hash: str, seed: int) -> str:
    blob = json.dumps({"command": command, "inputs": _hash_inputs(inputs),
                       "config": cfg_hash, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def manifest_path(out_dir: Path) -> Path:
    return Path(out_dir) / "job_manifest.json"


def write_manifest(out_dir: Path, manifest: JobManifest) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path(out_dir).write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def should_skip(out_dir: Path, jhash: str, force: bool) -> bool:
    if force:
        return False
    path = manifest_path(out_dir)
    if not path.is_file():
        return False
    try:
        old = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if old.get("job_hash") != jhash or old.get("status") != "done":
        return False
    return all(Path(p).exists() for p in old.get("outputs", []))


def _config_for(args) -> EstimationConfig:
    cfg = load_config(args.config) if args.config else EstimationConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _seed_of(args) -> int:
    return args.seed if args.seed is not None else 0


def _run_job(args, command: str, inputs, out_dir: Path, work) -> int:
    """Manifest wrapper: skip on identical completed job, else run ``work``.

    ``work`` returns the list of output paths it wrote.
    """
    cfg = _config_for(args)
    jhash = job_hash(command, inputs, config_hash(cfg), cfg.seed)
    if should_skip(out_dir, jhash, getattr(args, "force", False)):
        print(f"{command}: unchanged inputs, skipping (--force to rerun)")
        return EXIT_OK
    outputs = work(cfg)
    write_manifest(out_dir, JobManifest(
        command=command, inputs=[str(p) for p in inputs],
        config_hash=config_hash(cfg), seed=cfg.seed,
        outputs=[str(p) for p in outputs], status="done", job_hash=jhash))
    return EXIT_OK


# ------------------------------------------------------------- commands

def _cmd_normalize(args) -> int:
    from .geometry import normalize_object
    out = Path(args.output)

    def work(cfg):
        a = asset_mod.load_asset(args.input)
        asset_mod.save_asset(normalize_object(a), out)
        return [out / "asset.json"]

    return _run_job(args, "normalize", [args.input], out, work)


def _cmd_merge(args) -> int:
    from .geometry import MergePolicy, merge_tiny_parts
    out = Path(args.output)

    def work(cfg):
        a = asset_mod.load_asset(args.input)
        policy = MergePolicy(area_threshold_hard=args.area_small,
                             area_threshold_soft=args.area_with_faces,
                             face_threshold=args.max_faces)
        merged = merge_tiny_parts(a, policy)
        asset_mod.save_asset(merged, out)
        print(f"merge: {len(a.parts)} -> {len(merged.parts)} parts")
        return [out / "asset.json"]

    return _run_job(args, "merge", [args.input], out, work)


def _cmd_annotate(args) -> int:
    from .annotate import (MockVlm, HttpVlm, ReviewLog, ReviewState,
                           apply_annotation, run_annotation)
    out = Path(args.output)

    def work(cfg):
        a = asset_mod.load_asset(args.input)
        if args.backend == "mock":
            if not args.responses:
                raise BackendUnavailable("mock backend needs --responses DIR")
            backend = MockVlm.from_directory(args.responses)
        else:
            if not args.endpoint:
                raise BackendUnavailable("http backend needs --endpoint URL")
            backend = HttpVlm(endpoint=args.endpoint, model=args.model)
        raw = run_annotation(a, backend, chunk_size=args.chunk_size)
        annotated, stubs = apply_annotation(a, raw)
        asset_mod.save_asset(annotated, out)
        raw_path = out / "annotation_raw.json"
        raw_path.write_text(json.dumps(raw.to_dict(), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
        stub_path = out / "constraint_stubs.json"
        stub_path.write_text(json.dumps([s.to_dict() for s in stubs], indent=2,
                                        sort_keys=True) + "\n", encoding="utf-8")
        log = ReviewLog(out / "review_log.jsonl")
        log.append(ReviewState(status="vlm_done"), payload={"stage": "annotate"})
        print(f"annotate: {len(raw.parts)} parts, {len(stubs)} joints to estimate")
        return [out / "asset.json", raw_path, stub_path]

    return _run_job(args, "annotate", [args.input], out, work)


def _cmd_estimate(args) -> int:
    from .kinematics import candidate_payload, estimate_constraint
    out = Path(args.output)

    def work(cfg):
        a = asset_mod.load_asset(args.input)
        constraint = estimate_constraint(a, args.child, args.parent, args.kind,
                                         config=cfg)
        written = []
        cand_path = out / f"candidates_{args.child}_{args.parent}.json"
        out.mkdir(parents=True, exist_ok=True)
        cand_path.write_bytes(candidate_payload(a, args.child, args.parent,
                                                args.kind, cfg))
        written.append(cand_path)
        con_path = out / f"constraint_{args.child}_{args.parent}.json"
        con_path.write_text(json.dumps(constraint.to_dict(), indent=2,
                                       sort_keys=True) + "\n", encoding="utf-8")
        written.append(con_path)
        if args.auto_select:
            final = replace(constraint, finalized=True)
            others = tuple(c for c in a.constraints
                           if c.child_part != final.child_part)
            asset_mod.save_asset(replace(a, constraints=others + (final,)), out)
            written.append(out / "asset.json")
        print(f"estimate: kind {constraint.kind} direction {constraint.direction}")
        return written

    return _run_job(args, "estimate", [args.input], out, work)


def _cmd_procgen(args) -> int:
    from .procgen import ComponentSpec, compose, enumerate_plans
    out = Path(args.output)

    def work(cfg):
        bases = []
        for spec in args.base:
            path = Path(spec)
            bases.append((path.name, asset_mod.load_asset(path)))
        components = []
        for spec in args.component:
            path_str, _, ids = spec.partition(":")
            if not ids:
                raise PhysPartsError(
                    f"component spec {spec!r} must be DIR:id[,id...]")
            path = Path(path_str)
            components.append(ComponentSpec(
                asset=asset_mod.load_asset(path), asset_id=path.name,
                part_ids=tuple(int(x) for x in ids.split(","))))
        plans = enumerate_plans(bases, components, mode=args.mode, config=cfg)
        by_id = dict(bases)
        by_comp = {c.asset_id: c for c in components}
        written = []
        for i, plan in enumerate(plans):
            composed = compose(by_id[plan.base_asset_id],
                               by_comp[plan.component_asset_id], plan)
            dest = out / f"composed_{i:03d}"
            asset_mod.save_asset(composed, dest)
            written.append(dest / "asset.json")
        plans_path = out / "plans.json"
        out.mkdir(parents=True, exist_ok=True)
        plans_path.write_text(json.dumps(
            {"count": len(plans), "mode": args.mode,
             "plans": [p.to_dict() for p in plans]},
            indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(plans_path)
        print(f"procgen: {len(plans)} plan(s) composed")
        return written

    return _run_job(args, "procgen", list(args.base) + [
        s.partition(":")[0] for s in args.component], out, work)


def _cmd_voxelize(args) -> int:
    from .physfeat import save_voxel_grid, voxelize
    out = Path(args.output)

    def work(cfg):
        a = asset_mod.load_asset(args.input)
        grid = voxelize(a, resolution=args.resolution, seed=cfg.seed)
        out.mkdir(parents=True, exist_ok=True)
        grid_path = out / "features.pvx"
        save_voxel_grid(grid, grid_path)
        print(f"voxelize: {len(grid.occupied)} occupied voxels "
              f"at resolution {grid.resolution}")
        return [grid_path]

    return _run_job(args, "voxelize", [args.input], out, work)


def _cmd_evaluate(args) -> int:
    from .metrics import evaluate_assets
    out = Path(args.output)

    def work(cfg):
        pred = asset_mod.load_asset(args.pred)
        gt = asset_mod.load_asset(args.gt)
        report = evaluate_assets(pred, gt, n_points=args.points, seed=cfg.seed)
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
        print(text)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "report.json"
        report_path.write_text(text + "\n", encoding="utf-8")
        return [report_path]

    return _run_job(args, "evaluate", [args.pred, args.gt], out, work)


def _cmd_cfm_toy(args) -> int:
    from .cfm import (LinearField, MLPField, TrainConfig, save_checkpoint,
                      toy_mixture, train)
    out = Path(args.output)

    def work(cfg):
        model = (MLPField(dim=2, hidden=args.hidden, seed=cfg.seed)
                 if args.model == "mlp" else LinearField(dim=2, seed=cfg.seed))
        data = toy_mixture(args.n_samples, seed=cfg.seed)
        result = train(model, data, TrainConfig(steps=args.steps, seed=cfg.seed))
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / "model.pcfm"
        save_checkpoint(model, ckpt)
        trace_path = out / "trace.json"
        trace_path.write_text(json.dumps(
            {"initial": result.initial_eval, "final": result.final_eval,
             "trace": result.trace.tolist()}, indent=2) + "\n", encoding="utf-8")
        drop = 100.0 * (1.0 - result.final_eval / result.initial_eval)
        print(f"cfm-toy: loss {result.initial_eval:.6f} -> "
              f"{result.final_eval:.6f} ({drop:.1f}% reduction)")
        return [ckpt, trace_path]

    return _run_job(args, "cfm-toy", [], out, work)


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(Path(args.root), _config_for(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--config", default=None,
                        help="JSON or TOML estimation config")
    common.add_argument("--force", action="store_true",
                        help="rerun even when the job manifest is current")

    parser = argparse.ArgumentParser(
        prog="physparts",
        description="physics-grounded part annotation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", parents=[common],
                       help="rescale an asset to the canonical unit box")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("merge", parents=[common], help="absorb tiny parts")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--area-small", type=float, default=0.2)
    p.add_argument("--area-with-faces", type=float, default=0.06)
    p.add_argument("--max-faces", type=int, default=100)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("annotate", parents=[common],
                       help="query a vision backend and apply its labels")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--backend", choices=("mock", "http"), default="mock")
    p.add_argument("--responses", default=None,
                   help="directory of canned <hash>.txt responses")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default="default")
    p.add_argument("--chunk-size", type=int, default=None)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("estimate", parents=[common],
                       help="estimate one joint from contact geometry")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--child", type=int, required=True)
    p.add_argument("--parent", type=int, required=True)
    p.add_argument("--kind", choices=("B", "C", "D", "CB"), required=True)
    p.add_argument("--auto-select", action="store_true",
                   help="attach the top candidate as a finalized constraint")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("procgen", parents=[common],
                       help="compose donor components onto base assets")
    p.add_argument("output")
    p.add_argument("--base", action="append", required=True,
                   help="base asset directory (repeatable)")
    p.add_argument("--component", action="append", required=True,
                   help="donor DIR:part_id[,part_id...] (repeatable)")
    p.add_argument("--mode", choices=("intra", "cross"), default="cross")
    p.set_defaults(func=_cmd_procgen)

    p = sub.add_parser("voxelize", parents=[common],
                       help="pack per-voxel physical features")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("evaluate", parents=[common],
                       help="shape and property metrics between two assets")
    p.add_argument("output", nargs="?", default="eval_out")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--points", type=int, default=10000)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("cfm-toy", parents=[common],
                       help="train the toy flow matcher on a 2D mixture")
    p.add_argument("output")
    p.add_argument("--model", choices=("linear", "mlp"), default="mlp")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--n-samples", type=int, default=4096)
    p.set_defaults(func=_cmd_cfm_toy)

    p = sub.add_parser("serve", parents=[common],
                       help="local review service over an asset directory")
    p.add_argument("root")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (PhysPartsError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
