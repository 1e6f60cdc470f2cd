"""Command-line entry point: ``gprterrain <subcommand> ...``.

Every randomized subcommand takes ``--seed`` (default 42, announced on
stderr when defaulted) and writes ``config-echo.json`` into its output
directory so the run can be repeated exactly.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import header_info, load_corpus, save_corpus, write_csv_table, write_radargram
from .experiments import (
    LENGTH_WIDTHS,
    ExperimentConfig,
    emit_report,
    run_band_experiment,
    run_length_experiment,
    run_model_comparison,
)
from .mapping import (
    GPR_WINDOWS,
    camera_model,
    compare_fusion,
    read_scene,
    render_ppm,
    sidewalk_scene,
    truth_grid,
)
from .models import (
    CLASS_COLUMNS,
    VAE_EPOCHS,
    Architecture,
    ModelConfig,
    TrainConfig,
    build_model,
    evaluate,
    load_model,
    save_model,
    train,
)
from .models.networks import Classifier
from .preprocess import Band, SliceSpec, class_counts, normalize, split_dataset
from .simulate import (
    CorpusConfig,
    TerrainClass,
    TraceTimebase,
    default_terrain_profiles,
    generate_corpus,
    ricker_wavelet,
    synth_radargram,
)

DEFAULT_SEED = 42
ECHO_NAME = "config-echo.json"
log = logging.getLogger("gprterrain")


class CliError(RuntimeError):
    pass


# --- helpers ----------------------------------------------------------------

def _resolve_seed(args, fallback: int | None = None) -> int:
    if args.seed is not None:
        return args.seed
    if fallback is not None:
        return fallback
    print(f"NOTICE: no --seed given; using the default seed {DEFAULT_SEED}", file=sys.stderr)
    return DEFAULT_SEED


def _echo(out: Path, args, **resolved) -> Path:
    """Write the effective configuration of this run to ``out``."""
    cfg = {k: v for k, v in vars(args).items() if k != "func" and k != "jobs"}
    cfg.update(resolved)
    cfg["version"] = __version__
    path = out / ECHO_NAME
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _corpus(args):
    """The corpus from ``--corpus`` or, without it, the default synthetic corpus."""
    if args.corpus:
        return load_corpus(args.corpus), {"manifest": str(args.corpus)}
    cfg = CorpusConfig(seed=args.corpus_seed)
    return generate_corpus(cfg), {"generated": True, "corpus_seed": cfg.seed}


def _spec_for(arch: Architecture, band: Band, width: int, stride: int) -> SliceSpec:
    if arch is Architecture.CNN1D:
        return SliceSpec(1, 1, Band.FULL)
    return SliceSpec.for_width(width, band, stride)


def _model_config(arch: Architecture, spec: SliceSpec, args) -> ModelConfig:
    kwargs = {}
    if arch is Architecture.CLUSTER_VAE:
        kwargs = {"latent_dim": args.latent_dim, "gamma": args.gamma}
    return ModelConfig(arch, spec.band.height, spec.w_resize, **kwargs)


# --- subcommands ------------------------------------------------------------

def parse_scene_config(path) -> dict:
    """Read a ``key = value`` simulation scene.

    Keys: ``segments`` (required, e.g. ``grass:20, sand:12``), ``noise_std``,
    ``dt``, ``fc``, ``roughness``, ``source_amplitude`` and ``seed``.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read scene {path}: {exc.strerror or exc}") from exc
    out: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key = value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            if key == "segments":
                segs = []
                for item in value.split(","):
                    name, count = item.split(":")
                    segs.append((TerrainClass.parse(name), int(count)))
                out[key] = segs
            elif key == "seed":
                out[key] = int(value)
            elif key in ("noise_std", "dt", "fc", "roughness", "source_amplitude"):
                out[key] = float(value)
            else:
                raise CliError(f"{path}:{n}: unknown key {key!r}")
        except (ValueError, KeyError) as exc:
            raise CliError(f"{path}:{n}: bad value for {key}: {exc}") from None
    if "segments" not in out:
        raise CliError(f"{path}: missing required key 'segments'")
    return out


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.scene:
        scene = parse_scene_config(args.scene)
        seed = _resolve_seed(args, scene.get("seed"))
        defaults = CorpusConfig()
        tb = TraceTimebase(scene.get("dt", defaults.dt))
        wavelet = scene.get("source_amplitude", defaults.source_amplitude) * ricker_wavelet(
            scene.get("fc", defaults.fc), tb)
        profiles = default_terrain_profiles(scene.get("roughness", defaults.roughness))
        segments = [(profiles[c], n) for c, n in scene["segments"]]
        r = synth_radargram(segments, tb, wavelet, scene.get("noise_std", defaults.noise_std), seed,
                            source_id="scene")
        write_radargram(r, out / "scene.rgg")
        print(f"wrote {out / 'scene.rgg'} ({r.height}x{r.width})")
        _echo(out, args, seed=seed, scene_config={k: str(v) for k, v in scene.items()})
        return 0
    seed = _resolve_seed(args)
    cfg = CorpusConfig(n_radargrams=args.n_radargrams, total_traces=args.traces, noise_std=args.noise,
                       roughness=args.roughness, seed=seed)
    manifest = save_corpus(generate_corpus(cfg), out)
    print(f"wrote {cfg.n_radargrams} radargrams and {manifest}")
    _echo(out, args, seed=seed)
    return 0


def cmd_preprocess(args) -> int:
    out = _out_dir(args)
    seed = _resolve_seed(args)
    corpus, info = _corpus(args)
    spec = SliceSpec.for_width(args.width, Band(args.band), args.stride)
    split = split_dataset(corpus, spec, args.train_fraction, seed)
    rows = [[sid, "train"] for sid in split.train_ids] + [[sid, "test"] for sid in split.test_ids]
    write_csv_table(rows, out / "split.csv", header=["source_id", "side"])
    slices = [[side, s.source_id, str(s.offset), CLASS_COLUMNS[int(s.label)]]
              for side, ss in (("train", split.train), ("test", split.test)) for s in ss]
    write_csv_table(slices, out / "slices.csv", header=["side", "source_id", "offset", "label"])
    counts = [[side, *map(str, class_counts(ss))] for side, ss in (("train", split.train), ("test", split.test))]
    write_csv_table(counts, out / "class_counts.csv", header=["side", *CLASS_COLUMNS])
    print(f"{len(split.train)} train / {len(split.test)} test slices, {split.discarded} mixed windows discarded")
    _echo(out, args, seed=seed, corpus_info=info)
    return 0


def cmd_train(args) -> int:
    out = _out_dir(args)
    seed = _resolve_seed(args)
    arch = Architecture.parse(args.arch)
    corpus, info = _corpus(args)
    spec = _spec_for(arch, Band(args.band), args.width, args.stride)
    mcfg = _model_config(arch, spec, args)
    epochs = args.epochs or (VAE_EPOCHS if arch is Architecture.CLUSTER_VAE else TrainConfig.epochs)
    split = normalize(split_dataset(corpus, spec, args.train_fraction, args.split_seed))
    model = build_model(mcfg, seed)
    result = train(model, split, TrainConfig(epochs=epochs, batch_size=args.batch_size, lr=args.lr, seed=seed))
    save_model(model, out / "model.tnn", spec.band)
    write_csv_table([[str(i), f"{v:.8f}"] for i, v in enumerate(result.history)], out / "history.csv",
                    header=["epoch", "train_loss"])
    print(f"trained {arch.value} for {epochs} epochs; final loss {result.history[-1]:.5f}")
    _echo(out, args, seed=seed, epochs=epochs, corpus_info=info)
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    model, band = load_model(args.model)
    corpus, info = _corpus(args)
    spec = _spec_for(model.config.architecture, band, model.config.cols, args.stride)
    split = split_dataset(corpus, spec, args.train_fraction, args.split_seed)
    x, y = split.arrays("test")
    report = evaluate(model, model.normalize_input(x), y)
    f = "{:.6f}".format
    write_csv_table([[f(report.overall), *(f(v) for v in report.per_class)]], out / "eval.csv",
                    header=["overall", *CLASS_COLUMNS])
    conf = [[CLASS_COLUMNS[i], *map(str, row)] for i, row in enumerate(report.confusion)]
    write_csv_table(conf, out / "confusion.csv", header=["true", *CLASS_COLUMNS])
    print(f"overall {report.overall:.4f}  " + "  ".join(f"{c} {v:.4f}" for c, v in zip(CLASS_COLUMNS, report.per_class)))
    _echo(out, args, corpus_info=info)
    return 0


def cmd_experiment(args) -> int:
    out = _out_dir(args)
    seed = _resolve_seed(args)
    corpus, info = _corpus(args)
    cfg = ExperimentConfig(trials=args.trials, epochs=args.epochs, vae_epochs=args.vae_epochs,
                           split_seed=seed, jobs=args.jobs)
    runners = {
        "band": run_band_experiment,
        "length": lambda c, cfg, corpus_info: run_length_experiment(c, cfg, args.widths, corpus_info),
        "models": run_model_comparison,
    }
    report = runners[args.study](corpus, cfg, corpus_info=info)
    paths = emit_report(report, out)
    print(Path(paths[1]).read_text(encoding="utf-8"), end="")
    _echo(out, args, seed=seed, corpus_info=info)
    return 0


def cmd_map(args) -> int:
    out = _out_dir(args)
    seed = _resolve_seed(args)
    scene = read_scene(args.scene) if args.scene else sidewalk_scene()
    if args.model:
        model, _ = load_model(args.model)
        if not isinstance(model, Classifier):
            raise CliError(f"{args.model} holds a {model.config.architecture.value} model; map needs cnn1d or cnn2d")
    else:
        corpus = generate_corpus(CorpusConfig(seed=args.corpus_seed))
        spec = SliceSpec(32, 4, Band.DIRECT)
        model = build_model(ModelConfig(Architecture.CNN2D, 60, 32), seed)
        train(model, normalize(split_dataset(corpus, spec, 0.8, DEFAULT_SEED)),
              TrainConfig(epochs=args.epochs, seed=seed))
    camera = camera_model(args.confusion, args.camera_error)
    summary = compare_fusion(scene, camera, model, seed=seed, gpr_windows=args.gpr_windows)
    render_ppm(truth_grid(scene), out / "truth.ppm")
    render_ppm(summary.camera_grid, out / "camera.ppm")
    render_ppm(summary.fused_grid, out / "fused.ppm")
    write_csv_table(summary.rows(), out / "accuracy.csv", header=["map", "overall", "sidewalk_track"])
    for name, overall, track in summary.rows():
        print(f"{name:7s} overall {overall or 'n/a'}  sidewalk track {track or 'n/a'}")
    _echo(out, args, seed=seed)
    return 0


def cmd_inspect(args) -> int:
    info = header_info(args.path)
    for k, v in info.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, (list, tuple, np.ndarray)):
            v = " ".join(map(str, v))
        print(f"{k:>14}: {v}")
    return 0


# --- parser -----------------------------------------------------------------

def _add_corpus_flags(p):
    p.add_argument("--corpus", type=Path, help="manifest CSV of a saved corpus (default: generate the synthetic corpus)")
    p.add_argument("--corpus-seed", type=int, default=0, help="seed of the generated corpus when --corpus is absent")
    p.add_argument("--train-fraction", type=float, default=0.8, help="radargram-level train fraction")


def _add_seed(p, what: str):
    p.add_argument("--seed", type=int, default=None, help=f"{what} (default {DEFAULT_SEED})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gprterrain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gprterrain {__version__}")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for experiments (default: logical cores); never changes results")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="synthesize a scene radargram or the default corpus")
    p.add_argument("--scene", type=Path, help="key = value scene file; without it the full corpus is generated")
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p, "generation seed; overrides a seed in the scene file")
    p.add_argument("--n-radargrams", type=int, default=CorpusConfig.n_radargrams)
    p.add_argument("--traces", type=int, default=CorpusConfig.total_traces, help="total traces in the corpus")
    p.add_argument("--noise", type=float, default=CorpusConfig.noise_std, help="noise std in mV")
    p.add_argument("--roughness", type=float, default=CorpusConfig.roughness, help="direct-wave jitter in mV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="pad, slice and split a corpus; writes split and slice tables")
    _add_corpus_flags(p)
    p.add_argument("--out", required=True)
    _add_seed(p, "split seed")
    p.add_argument("--width", type=int, default=32, help="window width w_resize")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--band", choices=[b.value for b in Band], default="direct")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model and save a TNN1 checkpoint")
    _add_corpus_flags(p)
    p.add_argument("--out", required=True)
    _add_seed(p, "initialization and shuffling seed")
    p.add_argument("--split-seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--arch", default="cnn2d", help="cnn1d, cnn2d (alias alexnet-proxy) or cluster-vae")
    p.add_argument("--band", choices=[b.value for b in Band], default="direct")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--epochs", type=int, default=None, help=f"default 20, or {VAE_EPOCHS} for cluster-vae")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--latent-dim", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.1, help="clustering loss weight")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the frozen test radargrams")
    _add_corpus_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--stride", type=int, default=4)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run the band, length or model-family study")
    p.add_argument("study", choices=["band", "length", "models"])
    _add_corpus_flags(p)
    p.add_argument("--out", required=True)
    _add_seed(p, "split seed; trials use seeds 1..N")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--vae-epochs", type=int, default=VAE_EPOCHS)
    p.add_argument("--widths", type=lambda s: tuple(int(v) for v in s.split(",")), default=LENGTH_WIDTHS,
                   help="comma-separated widths for the length study")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("map", help="camera-only vs fused terrain map along a traverse")
    p.add_argument("--scene", type=Path, help="scene file ([grid] + [trajectory]); default: sidewalk scene")
    p.add_argument("--model", type=Path, help="trained cnn1d/cnn2d checkpoint; default: train a cnn2d now")
    p.add_argument("--out", required=True)
    _add_seed(p, "traverse and training seed")
    p.add_argument("--corpus-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=5, help="training epochs when no --model is given")
    p.add_argument("--confusion", type=float, default=0.9, help="camera sidewalk->asphalt rate")
    p.add_argument("--camera-error", type=float, default=0.0, help="camera error rate on other classes")
    p.add_argument("--gpr-windows", type=int, default=GPR_WINDOWS, help="GPR windows classified per pose")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("inspect", help="print the RGG1 header and statistics of a radargram file")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        if module == "builtins":
            module = "io" if isinstance(exc, OSError) else args.command
        print(f"gprterrain {args.command}: error [{module}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
