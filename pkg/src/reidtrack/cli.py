"""Command-line entry point: track, simulate, evaluate, sweep."""

from __future__ import annotations

import argparse
import glob as globlib
import itertools
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_value
from .embedding import IdentityEmbedder
from .errors import (
    ConfigError,
    InfeasibleConfigError,
    InitFailedError,
    MalformedRecordError,
    ReidTrackError,
    StepFailedError,
)
from .evaluation import (
    SequenceResult,
    accuracy_robustness,
    aggregate,
    parse_box_line,
    precision_curve,
    read_box_file,
    success_curve,
    write_curve_csv,
    write_summary_csv,
)
from .geometry import BoundingBox, FrameDims
from .providers import (
    ExternalFeaturesEmbedder,
    ExternalFileProvider,
    Frame,
    HistogramEmbedder,
    NccProvider,
    OracleProvider,
)
from .rng import substream
from .simulator import Scenario, generate, load_scenario, save_scenario
from .tracker import Tracker, format_box_line, write_results

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
SCENARIO_FILENAME = "scenario.json"
INIT_FILENAME = "init.txt"
GROUNDTRUTH_FILENAME = "groundtruth.txt"

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INIT = 4


def _provenance(config: RunConfig) -> list[str]:
    return [f"reidtrack {__version__}",
            f"config_hash = {config.hash()}",
            f"seed = {config.seed}"]


def _load_image_frames(paths: list[Path]) -> list[Frame]:
    from PIL import Image

    frames = []
    for i, p in enumerate(paths):
        arr = np.asarray(Image.open(p).convert("RGB"))
        frames.append(Frame(index=i, dims=FrameDims(arr.shape[1], arr.shape[0]),
                            raster=arr))
    return frames


def _load_sequence(seq_dir: Path) -> tuple[list[Frame], BoundingBox, str, Scenario | None]:
    """Frames, init box and sequence kind ('scenario' or 'raster') from a directory."""
    scenario = None
    scenario_path = seq_dir / SCENARIO_FILENAME
    if scenario_path.exists():
        scenario = load_scenario(scenario_path)
        frames = scenario.frames
        kind = "scenario"
    else:
        images = sorted(p for p in seq_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not images:
            raise FileNotFoundError(f"{seq_dir} contains neither {SCENARIO_FILENAME} nor images")
        frames = _load_image_frames(images)
        kind = "raster"

    init_path = seq_dir / INIT_FILENAME
    source = init_path if init_path.exists() else seq_dir / GROUNDTRUTH_FILENAME
    if not source.exists():
        raise FileNotFoundError(f"initialization box file not found: {init_path}")
    init_box = None
    for line in source.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            continue
        init_box = parse_box_line(line)
        break
    if init_box is None:
        raise ValueError(f"{source}: first line does not contain an initialization box")
    return frames, init_box, kind, scenario


def _build_provider(config: RunConfig, kind: str, scenario: Scenario | None):
    name = config["tracker.provider"]
    if name == "oracle":
        if scenario is None:
            raise ConfigError("oracle provider requires a scenario sequence")
        return OracleProvider(seed=config.seed,
                              base_score=config["provider.base_score"],
                              jitter_sigma=scenario.config.box_jitter_sigma)
    if name == "external":
        path = config["provider.candidates_path"]
        if not path:
            raise ConfigError("external provider requires provider.candidates_path")
        return ExternalFileProvider(path)
    if name == "ncc":
        if kind != "raster":
            raise ConfigError("ncc provider requires an image sequence")
        return NccProvider(floor=config["provider.ncc_floor"],
                           max_peaks=config["provider.ncc_max_peaks"])
    raise ConfigError(f"unknown provider '{name}'")


def _build_embedder(config: RunConfig, kind: str):
    name = config["tracker.embedder"]
    if name == "identity":
        if kind != "scenario":
            raise ConfigError("identity embedder requires a scenario sequence")
        sigma = config["embedder.noise_sigma"]
        rng = substream(config.seed, "embedder") if sigma > 0 else None
        return IdentityEmbedder(noise_sigma=sigma, rng=rng)
    if name == "histogram":
        if kind != "raster":
            raise ConfigError("histogram embedder requires an image sequence")
        return HistogramEmbedder()
    if name == "external":
        return ExternalFeaturesEmbedder()
    raise ConfigError(f"unknown embedder '{name}'")


def _track_sequence(config: RunConfig, seq_dir: Path, out_path: Path) -> int:
    """Run the tracker over one sequence directory; returns the frame count."""
    frames, init_box, kind, scenario = _load_sequence(seq_dir)
    provider = _build_provider(config, kind, scenario)
    embedder = _build_embedder(config, kind)
    tracker = Tracker(config.tracker_config(), provider, embedder)
    outputs = tracker.run_sequence(frames, init_box)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_results(out_path, outputs, header_lines=_provenance(config),
                  hold_last_box=config["tracker.hold_last_box"])
    return len(outputs)


def _simulate_into(config: RunConfig, out_dir: Path) -> None:
    scenario = generate(config.scenario_config())
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = {"tool": f"reidtrack {__version__}", "config_hash": config.hash(),
                  "seed": config.seed}
    save_scenario(out_dir / SCENARIO_FILENAME, scenario, provenance)
    header = [f"# {line}" for line in _provenance(config)]
    target = scenario.target
    gt_lines = [format_box_line(box if visible else None)
                for box, visible in zip(target.trajectory, target.visible)]
    (out_dir / GROUNDTRUTH_FILENAME).write_text(
        "\n".join(header + gt_lines) + "\n", encoding="utf-8")
    (out_dir / INIT_FILENAME).write_text(
        "\n".join(header + [format_box_line(target.trajectory[0])]) + "\n",
        encoding="utf-8")


def _evaluate_pair(results_path: Path, gt_path: Path, name: str) -> SequenceResult:
    predictions = read_box_file(results_path)
    truth = read_box_file(gt_path)
    if len(predictions) != len(truth):
        raise ValueError(f"sequence '{name}': {len(predictions)} predictions vs "
                         f"{len(truth)} ground-truth lines")
    return SequenceResult(name=name, predictions=predictions, ground_truth=truth)


def _effective_config(args) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        config = config.with_overrides({"seed": args.seed})
    return config


def cmd_track(args) -> int:
    config = _effective_config(args)
    out = Path(args.out) if args.out else Path("results.txt")
    n = _track_sequence(config, Path(args.sequence_dir), out)
    if not args.quiet:
        print(f"tracked {n} frames -> {out}")
    return 0


def cmd_simulate(args) -> int:
    config = _effective_config(args)
    out_dir = Path(args.out) if args.out else Path("scenario")
    _simulate_into(config, out_dir)
    if not args.quiet:
        print(f"scenario written to {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    config = _effective_config(args)
    paths = sorted(Path(p) for p in globlib.glob(args.results_glob))
    if not paths:
        raise FileNotFoundError(f"no results files match {args.results_glob!r}")
    gt_dir = Path(args.gt_dir)
    results = []
    for path in paths:
        name = path.stem
        candidates = [gt_dir / f"{name}.txt", gt_dir / name / GROUNDTRUTH_FILENAME]
        gt_path = next((c for c in candidates if c.exists()), None)
        if gt_path is None:
            raise FileNotFoundError(f"no ground truth for sequence '{name}' under {gt_dir}")
        results.append(_evaluate_pair(path, gt_path, name))

    rows = [(r.name, success_curve(r), precision_curve(r), accuracy_robustness(r))
            for r in results]
    overall = aggregate(results)
    out = Path(args.out) if args.out else Path("summary.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    header = _provenance(config)
    write_summary_csv(out, rows, overall, header_lines=header)
    write_curve_csv(out.with_name(out.stem + "_success.csv"), overall[0], header)
    write_curve_csv(out.with_name(out.stem + "_precision.csv"), overall[1], header)
    if not args.quiet:
        for name, succ, prec, ar in rows:
            print(f"{name}: auc={succ.auc:.4f} p20={prec.precision_at_20:.4f} "
                  f"acc={ar.accuracy:.4f} rob={ar.robustness:.4f}")
        print(f"ALL: auc={overall[0].auc:.4f} p20={overall[1].precision_at_20:.4f} "
              f"acc={overall[2].accuracy:.4f} rob={overall[2].robustness:.4f}")
    return 0


def _parse_params(specs: list[str]) -> list[tuple[str, list]]:
    if not 1 <= len(specs) <= 2:
        raise ConfigError("sweep takes one or two --param specifications")
    params = []
    for spec in specs:
        key, sep, raw = spec.partition("=")
        if not sep or not raw:
            raise ConfigError(f"--param must look like KEY=V1,V2,..., got {spec!r}")
        key = key.strip()
        values = [parse_value(key, v) for v in raw.split(",")]
        params.append((key, values))
    return params


def cmd_sweep(args) -> int:
    base = _effective_config(args)
    params = _parse_params(args.param)
    keys = [k for k, _ in params]
    rows = []
    for combo in itertools.product(*(vals for _, vals in params)):
        config = base.with_overrides(dict(zip(keys, combo)))
        with tempfile.TemporaryDirectory(prefix="reidtrack-sweep-") as tmp:
            tmp_dir = Path(tmp)
            if config["io.sequence_dir"]:
                seq_dir = Path(config["io.sequence_dir"])
                gt_path = (Path(config["io.gt_path"]) if config["io.gt_path"]
                           else seq_dir / GROUNDTRUTH_FILENAME)
            else:
                seq_dir = tmp_dir / "scenario"
                _simulate_into(config, seq_dir)
                gt_path = seq_dir / GROUNDTRUTH_FILENAME
            results_path = tmp_dir / "results.txt"
            _track_sequence(config, seq_dir, results_path)
            result = _evaluate_pair(results_path, gt_path, "sweep")
            succ, prec, ar = success_curve(result), precision_curve(result), accuracy_robustness(result)
        rows.append(list(combo) + [succ.auc, prec.precision_at_20,
                                   ar.accuracy, ar.robustness])
        if not args.quiet:
            settings = ", ".join(f"{k}={v}" for k, v in zip(keys, combo))
            print(f"[{settings}] auc={succ.auc:.4f} rob={ar.robustness:.4f}")

    out = Path(args.out) if args.out else Path("sweep.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {h}" for h in _provenance(base)]
    lines.append(",".join(keys + ["auc", "precision20", "accuracy", "robustness"]))
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reidtrack",
                                     description="Confuser-aware tracking engine")
    parser.add_argument("--version", action="version", version=f"reidtrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("track", help="run the tracker over one sequence directory")
    p.add_argument("sequence_dir")
    common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="generate a synthetic scenario directory")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score results files against ground truth")
    p.add_argument("results_glob")
    p.add_argument("gt_dir")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="track+evaluate over a parameter grid")
    p.add_argument("--param", action="append", default=[],
                   help="KEY=V1,V2,... (repeat for a second axis)")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InfeasibleConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InitFailedError as e:
        print(f"tracking init failed: {e}", file=sys.stderr)
        return EXIT_INIT
    except (OSError, MalformedRecordError, StepFailedError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ReidTrackError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
