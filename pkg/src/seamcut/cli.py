"""Command-line pipelines: extract, unwrap, segment, synth, train, generate, eval.

Every command writes a JSON report next to its outputs. Exit codes: 0 success,
1 internal error, 2 input or validation error, 3 topological failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .codec import N_BINS, CodecError, SeamSequence, encode
from .cutting import apply_seams, repair_charts
from .extract import extract_seams, validate_uv_layout
from .flatten import ConvergenceError, FlattenError, NonDiskChartError, unwrap_cut
from .mesh import MeshError, TriMesh, load_obj, normalize_to_unit_cube, save_obj
from .sampling import DEFAULT_BUDGET, PAPER_BUDGET, sample_condition
from .segmentation import LabelError, boundary_cleanliness, load_labels, refine_labels

log = logging.getLogger("seamcut")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_TOPOLOGY = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        self.code = code
        super().__init__(message)


class PipelineReport:
    """Stage timings, counts, metrics and paths for one command invocation."""

    def __init__(self, command: str, seed: int | None = None):
        self.data = {"command": command, "version": __version__, "seed": seed,
                     "stages": [], "counts": {}, "metrics": {}, "paths": {}, "warnings": []}
        self._names: set[str] = set()

    def stage(self, name: str):
        report = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                if name in report._names:
                    raise RuntimeError(f"stage {name!r} recorded twice")
                report._names.add(name)
                report.data["stages"].append(
                    {"name": name, "seconds": round(time.perf_counter() - self.t0, 6)})
                return False

        return _Timer()

    def warn(self, message: str) -> None:
        log.warning(message)
        self.data["warnings"].append(message)

    def write(self, path) -> None:
        self.data["paths"]["report"] = str(path)
        with open(path, "w") as fh:
            json.dump(_jsonable(self.data), fh, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _derived(path: Path, suffix: str, override=None) -> Path:
    """``foo.obj`` -> ``foo.<suffix>`` unless overridden."""
    if override:
        return Path(override)
    return path.with_name(f"{path.stem}.{suffix}")


def _load_mesh(path) -> TriMesh:
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path}: no such file")
    return load_obj(path)


def _load_seams(path) -> SeamSequence:
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path}: no such file")
    try:
        with open(path) as fh:
            return SeamSequence.from_json(json.load(fh))
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise CliError(f"{path}: unreadable seam file ({err})") from err


def _check_bins(bins: int) -> int:
    if not 2 <= bins <= N_BINS:
        raise CliError(f"--bins must lie in [2, {N_BINS}] (control tokens start at {N_BINS})")
    return bins


# ---------------------------------------------------------------------------
# geometry commands


def cmd_extract(args) -> int:
    src = Path(args.mesh)
    report = PipelineReport("extract", args.seed)
    bins = _check_bins(args.bins)
    with report.stage("load"):
        mesh = _load_mesh(src)
    if not mesh.has_uv:
        raise CliError(f"{src}: mesh has no UV coordinates")
    with report.stage("extract"):
        edges, seq = extract_seams(mesh)
    seams_path = _derived(src, "seams.json", args.seams)
    islands_path = _derived(src, "islands.json", args.islands)
    obj = seq.to_json()
    obj["seam_edges"] = [list(e) for e in edges.sorted_edges()]
    obj["n_bins"] = bins
    obj["tokens"] = encode(seq, max_segments=max(seq.n_segments, 1), n_bins=bins) if seq.n_segments else []
    with open(seams_path, "w") as fh:
        json.dump(obj, fh)
    with open(islands_path, "w") as fh:
        json.dump({"islands": edges.islands}, fh)
    report.data["counts"].update(seam_edges=len(edges.edges), segments=seq.n_segments,
                                 islands=len(edges.islands))
    report.data["paths"].update(input=str(src), seams=str(seams_path), islands=str(islands_path))
    code = EXIT_OK
    if args.validate:
        with report.stage("validate"):
            layout = validate_uv_layout(mesh)
        report.data["uv_layout"] = layout.to_json()
        if not layout.ok:
            report.warn("UV layout failed validation")
            code = EXIT_INPUT
    report.write(_derived(src, "extract.json", args.report))
    return code


def _write_unwrapped(path, mesh_cut: TriMesh, tf, atlas) -> None:
    out = TriMesh(tf.inverse(mesh_cut.vertices), mesh_cut.faces, atlas.corner_uv(mesh_cut))
    save_obj(out, path)


def cmd_unwrap(args) -> int:
    src = Path(args.mesh)
    report = PipelineReport("unwrap", args.seed)
    with report.stage("load"):
        mesh = _load_mesh(src)
        seam = _load_seams(args.seams)
        norm, tf = normalize_to_unit_cube(mesh)
    with report.stage("cut"):
        cut = apply_seams(norm, seam)
    with report.stage("flatten"):
        atlas = unwrap_cut(cut.cut_mesh, cut.charts, strict=False)
    out_path = _derived(src, "unwrapped.obj", args.output)
    report.data["counts"].update(segments=seam.n_segments, seam_edges=len(cut.applied_seam_edges.edges),
                                 charts=len(cut.charts),
                                 duplicated_vertices=cut.report.duplicated_vertices,
                                 skipped_faces=atlas.skipped)
    report.data["cut"] = cut.report.to_json()
    report.data["metrics"].update(atlas.report())
    report.data["paths"].update(input=str(src), seams=str(args.seams))
    code = EXIT_OK
    non_disk = {k: v for k, v in atlas.failed_charts.items() if "not a topological disk" in v}
    if atlas.failed_charts:
        report.data["failed_charts"] = {str(k): v for k, v in atlas.failed_charts.items()}
        for k, msg in sorted(atlas.failed_charts.items()):
            print(f"chart {k}: {msg}", file=sys.stderr)
        code = EXIT_TOPOLOGY if non_disk else EXIT_INTERNAL
    else:
        with report.stage("write"):
            _write_unwrapped(out_path, cut.cut_mesh, tf, atlas)
        report.data["paths"]["output"] = str(out_path)
    report.write(_derived(src, "unwrap.json", args.report))
    return code


def cmd_segment(args) -> int:
    src = Path(args.mesh)
    report = PipelineReport("segment", args.seed)
    if not Path(args.labels).exists():
        raise CliError(f"{args.labels}: no such file")
    with report.stage("load"):
        mesh = _load_mesh(src)
        seam = _load_seams(args.seams)
        labels = load_labels(args.labels)
        norm, _ = normalize_to_unit_cube(mesh)
    if len(labels) != mesh.n_faces:
        raise CliError(f"{len(labels)} labels for {mesh.n_faces} faces")
    with report.stage("cut"):
        cut = apply_seams(norm, seam)
    with report.stage("refine"):
        refined = refine_labels(cut.charts, labels)
    raw_clean = boundary_cleanliness(labels, cut.charts, mesh)
    new_clean = boundary_cleanliness(refined, cut.charts, mesh)
    out_path = _derived(src, "refined_labels.json", args.output)
    with open(out_path, "w") as fh:
        json.dump(refined.to_json(), fh)
    report.data["counts"].update(patches=len(cut.charts), faces=mesh.n_faces)
    report.data["metrics"].update(boundary_cleanliness_raw=raw_clean,
                                  boundary_cleanliness_refined=new_clean)
    report.data["paths"].update(input=str(src), labels=str(args.labels), output=str(out_path))
    print(f"boundary cleanliness: raw {raw_clean:.4f} -> refined {new_clean:.4f}")
    report.write(_derived(src, "segment.json", args.report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# neural commands


def _model_config(args, base=None):
    from .neural import ModelConfig

    if args.paper_scale:
        cfg = ModelConfig.paper_scale()
    elif base is not None:
        cfg = ModelConfig.from_dict(base.to_dict())
    else:
        cfg = ModelConfig()
    d = cfg.to_dict()
    if args.bins is not None:
        d["n_bins"] = _check_bins(args.bins)
    if getattr(args, "budget", None) is not None:
        d["point_budget"] = args.budget
    return ModelConfig.from_dict(d)


def _load_model(args):
    from .neural import CheckpointError, ConfigMismatchError, load_checkpoint
    from .neural.checkpoint import read_checkpoint

    path = Path(args.checkpoint)
    if not path.exists():
        raise CliError(f"{path}: no such checkpoint")
    try:
        expected = None
        if args.paper_scale or args.bins is not None:
            from .neural import ModelConfig

            stored = ModelConfig.from_dict(read_checkpoint(path)[0]["config"])
            expected = _model_config(args, base=stored)
            expected.point_budget = stored.point_budget
        model, _, meta = load_checkpoint(path, expected)
    except ConfigMismatchError as err:
        raise CliError(str(err)) from err
    except CheckpointError as err:
        raise CliError(str(err)) from err
    return model, meta


def cmd_synth(args) -> int:
    from .neural import make_synthetic_dataset

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    report = PipelineReport("synth", args.seed)
    with report.stage("generate"):
        shapes = make_synthetic_dataset(args.n, seed=args.seed)
    entries = []
    with report.stage("write"):
        for i, s in enumerate(shapes):
            stem = f"{s.family}_{i:04d}"
            save_obj(s.mesh, out / f"{stem}.obj")
            s.seam.save(out / f"{stem}.seams.json")
            entries.append({"mesh": f"{stem}.obj", "seams": f"{stem}.seams.json",
                            "family": s.family, "params": s.params,
                            "n_vertices": s.mesh.n_vertices, "n_segments": s.seam.n_segments})
    with open(out / "manifest.json", "w") as fh:
        json.dump({"seed": args.seed, "shapes": entries}, fh, indent=1)
    report.data["counts"]["shapes"] = len(entries)
    report.data["paths"]["output"] = str(out)
    report.write(out / "synth.json")
    return EXIT_OK


def _read_dataset(directory: Path):
    manifest = directory / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            entries = json.load(fh)["shapes"]
        pairs = [(directory / e["mesh"], directory / e["seams"]) for e in entries]
    else:
        pairs = [(p, p.with_name(f"{p.stem}.seams.json")) for p in sorted(directory.glob("*.obj"))]
        pairs = [(m, s) for m, s in pairs if s.exists()]
    if not pairs:
        raise CliError(f"{directory}: no mesh/seam pairs found")
    return pairs


def cmd_train(args) -> int:
    from .neural import TrainConfig, make_example, save_checkpoint, train

    report = PipelineReport("train", args.seed)
    cfg = _model_config(args)
    data_dir = Path(args.data)
    with report.stage("load"):
        examples = []
        for mesh_path, seam_path in _read_dataset(data_dir):
            mesh, _ = normalize_to_unit_cube(_load_mesh(mesh_path))
            seam = _load_seams(seam_path)
            cloud = sample_condition(mesh, cfg.point_budget, seed=args.seed)
            examples.append(make_example(mesh, seam, cfg, cloud))
    hyper = TrainConfig(steps=args.steps, batch_size=args.batch_size, lr=args.lr,
                        warmup_steps=args.warmup, seed=args.seed, augment=not args.no_augment)
    with report.stage("train"):
        result = train(examples, cfg, hyper)
    ckpt = Path(args.output)
    curve = _derived(ckpt, "loss.csv", args.curve)
    with report.stage("write"):
        save_checkpoint(ckpt, result.model, result.optimizer,
                        {"steps": len(result.history), "seed": args.seed, "examples": len(examples)})
        result.save_curve(curve)
    report.data["counts"].update(examples=len(examples), steps=len(result.history))
    report.data["metrics"].update(initial_ce=result.history[0][1], final_ce=result.history[-1][1],
                                  final_kl=result.history[-1][2])
    report.data["paths"].update(data=str(data_dir), checkpoint=str(ckpt), curve=str(curve))
    report.write(_derived(ckpt, "train.json", args.report))
    return EXIT_OK


def _gen_config(args, cfg):
    from .neural import GenerationConfig

    try:
        gen = GenerationConfig(ratio=args.ratio, temperature=args.temperature, top_k=args.top_k,
                               seed=args.seed, max_segments=args.max_segments, bucket=args.bucket)
    except ValueError as err:
        raise CliError(str(err)) from err
    if gen.bucket is not None and not 0 <= gen.bucket < cfg.n_buckets:
        raise CliError(f"--bucket must lie in [0, {cfg.n_buckets})")
    return gen


def _generate_for(model, mesh: TriMesh, gen, budget: int, seed: int):
    from .neural import generate

    norm, tf = normalize_to_unit_cube(mesh)
    cloud = sample_condition(norm, budget, seed=seed)
    return norm, tf, generate(model, cloud, gen, mesh.n_vertices)


def cmd_generate(args) -> int:
    src = Path(args.mesh)
    report = PipelineReport("generate", args.seed)
    with report.stage("load"):
        model, _ = _load_model(args)
        mesh = _load_mesh(src)
    gen = _gen_config(args, model.cfg)
    if gen.ratio_advisory:
        report.warn(gen.ratio_advisory)
    budget = args.budget or model.cfg.point_budget
    with report.stage("generate"):
        _, _, res = _generate_for(model, mesh, gen, budget, args.seed)
    if res.truncated:
        report.warn("generation hit the segment limit before emitting EOS")
    out = _derived(src, "seams.json", args.output)
    obj = res.seam.to_json()
    obj.update(tokens=res.tokens, truncated=res.truncated, bucket=res.bucket,
               target_segments=res.target_segments, seed=args.seed)
    with open(out, "w") as fh:
        json.dump(obj, fh)
    report.data["counts"].update(segments=res.seam.n_segments, tokens=len(res.tokens),
                                 target_segments=res.target_segments, bucket=res.bucket)
    report.data["truncated"] = res.truncated
    report.data["paths"].update(input=str(src), checkpoint=str(args.checkpoint), output=str(out))
    report.write(_derived(src, "generate.json", args.report))
    return EXIT_OK


def _eval_one(model, mesh_path: Path, out_dir: Path, gen, budget: int, seed: int, repair: bool) -> dict:
    row = {"mesh": mesh_path.name, "n_vertices": 0, "n_segments": 0, "n_charts": 0,
           "repair_rounds": 0, "failed_charts": 0, "mean_conformal_energy": float("nan"),
           "truncated": False, "error": ""}
    try:
        mesh = load_obj(mesh_path)
        row["n_vertices"] = mesh.n_vertices
        norm, tf, res = _generate_for(model, mesh, gen, budget, seed)
        row["n_segments"], row["truncated"] = res.seam.n_segments, res.truncated
        res.seam.save(out_dir / f"{mesh_path.stem}.seams.json")
        cut = apply_seams(norm, res.seam)
        if repair:
            cut, row["repair_rounds"] = repair_charts(norm, cut)
        atlas = unwrap_cut(cut.cut_mesh, cut.charts, strict=False)
        row["n_charts"], row["failed_charts"] = len(cut.charts), len(atlas.failed_charts)
        row["mean_conformal_energy"] = atlas.mean_energy
        if not atlas.failed_charts:
            _write_unwrapped(out_dir / f"{mesh_path.stem}.unwrapped.obj", cut.cut_mesh, tf, atlas)
    except (MeshError, CodecError, FlattenError, ValueError) as err:
        row["error"] = str(err)
    return row


EVAL_COLUMNS = ["mesh", "n_vertices", "n_segments", "n_charts", "repair_rounds", "failed_charts",
                "mean_conformal_energy", "truncated", "error"]


def cmd_eval(args) -> int:
    in_dir = Path(args.meshes)
    meshes = sorted(in_dir.glob("*.obj"))
    meshes = [m for m in meshes if not m.name.endswith(".unwrapped.obj")]
    if not meshes:
        raise CliError(f"{in_dir}: no .obj files")
    out_dir = Path(args.output or in_dir / "eval")
    out_dir.mkdir(parents=True, exist_ok=True)
    report = PipelineReport("eval", args.seed)
    with report.stage("load"):
        model, _ = _load_model(args)
    gen = _gen_config(args, model.cfg)
    if gen.ratio_advisory:
        report.warn(gen.ratio_advisory)
    budget = args.budget or model.cfg.point_budget
    with report.stage("evaluate"):
        run = lambda p: _eval_one(model, p, out_dir, gen, budget, args.seed, not args.no_repair)
        if args.workers > 1:
            with ThreadPoolExecutor(args.workers) as pool:
                rows = list(pool.map(run, meshes))
        else:
            rows = [run(p) for p in meshes]
    csv_path = out_dir / "eval.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EVAL_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({**r, "mean_conformal_energy": f"{r['mean_conformal_energy']:.8g}"})
    energies = np.array([r["mean_conformal_energy"] for r in rows], dtype=float)
    finite = energies[np.isfinite(energies)]
    report.data["counts"].update(meshes=len(rows), finite=int(finite.size),
                                 errors=sum(bool(r["error"]) for r in rows))
    report.data["metrics"]["mean_conformal_energy"] = float(finite.mean()) if finite.size else None
    report.data["rows"] = rows
    report.data["paths"].update(input=str(in_dir), csv=str(csv_path), checkpoint=str(args.checkpoint))
    report.write(out_dir / "eval.json")
    print(f"{len(rows)} meshes, {finite.size} with finite mean E_conf; CSV at {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seamcut", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"seamcut {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, bins_default=None):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--bins", type=int, default=bins_default)
        sp.add_argument("--report", help="report path (default derives from the input stem)")

    def neural(sp):
        sp.add_argument("--paper-scale", action="store_true",
                        help="use the full-size architecture constants")
        sp.add_argument("--budget", type=int, default=None,
                        help=f"condition points ({DEFAULT_BUDGET} desk default, {PAPER_BUDGET} full)")

    def sampling(sp):
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--ratio", type=float, default=0.2)
        sp.add_argument("--temperature", type=float, default=1.0)
        sp.add_argument("--top-k", type=int, default=0)
        sp.add_argument("--max-segments", type=int, default=None)
        sp.add_argument("--bucket", type=int, default=None, help="override the ratio-derived bucket")

    sp = sub.add_parser("extract", help="seams and UV islands of a textured mesh")
    sp.add_argument("mesh")
    sp.add_argument("--seams")
    sp.add_argument("--islands")
    sp.add_argument("--validate", action="store_true")
    common(sp, N_BINS)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("unwrap", help="cut along seams, flatten and pack")
    sp.add_argument("mesh")
    sp.add_argument("seams")
    sp.add_argument("-o", "--output")
    common(sp)
    sp.set_defaults(func=cmd_unwrap)

    sp = sub.add_parser("segment", help="patch-majority refinement of face labels")
    sp.add_argument("mesh")
    sp.add_argument("seams")
    sp.add_argument("labels")
    sp.add_argument("-o", "--output")
    common(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("synth", help="write the synthetic training family")
    sp.add_argument("output")
    sp.add_argument("-n", type=int, default=200)
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="teacher-forced training on a mesh/seam directory")
    sp.add_argument("data")
    sp.add_argument("-o", "--output", required=True, help="checkpoint path")
    sp.add_argument("--curve", help="loss CSV path")
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--batch-size", type=int, default=8)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--warmup", type=int, default=0)
    sp.add_argument("--no-augment", action="store_true")
    common(sp)
    neural(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("generate", help="sample a seam for a mesh")
    sp.add_argument("mesh")
    sp.add_argument("-o", "--output")
    sampling(sp)
    common(sp)
    neural(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("eval", help="generate, unwrap and score every mesh in a directory")
    sp.add_argument("meshes")
    sp.add_argument("-o", "--output", help="output directory (default <meshes>/eval)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--no-repair", action="store_true",
                    help="leave non-disk charts unflattened instead of adding cuts")
    sampling(sp)
    common(sp)
    neural(sp)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except NonDiskChartError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (MeshError, CodecError, LabelError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as err:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
