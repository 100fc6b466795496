"""``chansep`` command line: synthesize, train, search, separate, evaluate, report.

Every subcommand echoes its resolved configuration and seed as ``#`` lines on
stdout before doing any work. Runtime failures exit 1 with a single
``chansep: error: <Type>: <message>`` line on stderr; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from .algorithms import (
    Alg1Model,
    Alg2Model,
    Autoencoder,
    LatentSearchConfig,
    SeparatorModel,
    latent_search,
    load_model,
    save_model,
    separate,
    train_alg1,
    train_autoencoder,
    train_separator,
)
from .dataset import CLASSES, DatasetConfig, build_dataset, load_manifest, validate_manifest
from .experiment import Preset, class_samples, demo_preset, run_experiment, training_pairs
from .metrics import evaluate_dataset, read_report_csv, render_tables
from .wavio import read_wav, write_wav

OUT_ENV = "CHANSEP_OUT"
DEFAULT_OUT = "chansep_out"
_MODEL_TAGS = {"alg1": Alg1Model, "alg2": Alg2Model, "alg3": SeparatorModel}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _read_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def resolve_preset(config_path, seed) -> tuple[Preset, int]:
    """Demo preset, overridden section by section from a JSON config, then by ``--seed``.

    Config sections: ``dataset``, ``arch``, ``ae``, ``alg1``, ``alg3``, ``search``.
    """
    doc = _read_json(config_path) if config_path else {}
    unknown = set(doc) - {"dataset", "arch", "ae", "alg1", "alg3", "search"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    base_seed = 0 if seed is None else seed
    p = demo_preset(base_seed)
    ds = DatasetConfig.from_dict({**p.dataset.to_dict(), **doc.get("dataset", {})})
    p = Preset(
        dataset=ds,
        arch=replace(p.arch, **doc.get("arch", {})),
        ae=replace(p.ae, **doc.get("ae", {})),
        alg1=replace(p.alg1, **doc.get("alg1", {})),
        alg3=replace(p.alg3, **doc.get("alg3", {})),
        search=LatentSearchConfig(**{**p.search.to_dict(), **doc.get("search", {})}),
    )
    if seed is not None:
        p = Preset(
            dataset=replace(p.dataset, seed=seed),
            arch=p.arch,
            ae=replace(p.ae, seed=seed + 1),
            alg1=replace(p.alg1, seed=seed + 2),
            alg3=replace(p.alg3, seed=seed + 3),
            search=replace(p.search, seed=seed + 4),
        )
    return p, base_seed


def _echo(sub: str, seed: int, config: dict) -> None:
    print(f"# chansep {sub} seed={seed}")
    print("# config " + json.dumps(config, sort_keys=True))
    sys.stdout.flush()


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _load_records(manifest, split=None):
    recs = load_manifest(manifest)
    problems = validate_manifest(recs)
    if problems:
        raise ValueError(f"{manifest}: {len(problems)} manifest problems, first: {problems[0]}")
    return recs if split is None else [r for r in recs if r.split == split]


def _load_decoders(ae_dir) -> list:
    decoders = []
    for c in CLASSES:
        ae = load_model(Path(ae_dir) / f"ae_{c}.json")
        if not isinstance(ae, Autoencoder):
            raise ValueError(f"{ae_dir}/ae_{c}.json is not an autoencoder checkpoint")
        decoders.append(ae.decoder)
    return decoders


def _load_tagged(path, alg):
    model = load_model(path)
    if not isinstance(model, _MODEL_TAGS[alg]):
        raise ValueError(f"{path} holds a {type(model).__name__}, not an {alg} model")
    return model


def _separate_one(job):
    model, wave = job
    return separate(model, wave)


def _search_one(job):
    decoders, cfg, wave = job
    res = latent_search(wave, decoders, cfg)
    return res.outputs, res.best_lr, res.best_loss


def _map(fn, jobs, n_jobs):
    if n_jobs <= 1:
        return map(fn, jobs)
    pool = ProcessPoolExecutor(max_workers=n_jobs)
    return _closing_map(pool, fn, jobs)


def _closing_map(pool, fn, jobs):
    with pool:
        yield from pool.map(fn, jobs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> None:
    if args.config:
        doc = _read_json(args.config)
        cfg = DatasetConfig.from_dict(doc.get("dataset", doc))
    else:
        cfg = demo_preset(0).dataset
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    _echo("synth", cfg.seed, cfg.to_dict())
    out = _out_dir(args)
    ds = build_dataset(cfg, out)
    print(f"wrote {len(ds)} records to {out / 'manifest.jsonl'}")


def cmd_train_ae(args) -> None:
    preset, seed = resolve_preset(args.config, args.seed)
    _echo("train-ae", seed, {"class": args.cls, "arch": preset.arch.to_dict(), "train": asdict(preset.ae)})
    train = _load_records(args.manifest, "train")
    ae = train_autoencoder(class_samples(train, args.cls), preset.arch, preset.ae, class_id=args.cls)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    save_model(ae, out / f"ae_{args.cls}.json", seed=preset.ae.seed, final_loss=ae.loss_curve[-1])
    print(f"class {args.cls}: loss {ae.loss_curve[0]:.6e} -> {ae.loss_curve[-1]:.6e}; wrote {out / f'ae_{args.cls}.json'}")


def cmd_train(args) -> None:
    preset, seed = resolve_preset(args.config, args.seed)
    tc = preset.alg1 if args.alg == "alg1" else preset.alg3
    _echo("train", seed, {"alg": args.alg, "arch": preset.arch.to_dict(), "train": asdict(tc)})
    pairs = training_pairs(_load_records(args.manifest, "train"))
    if args.alg == "alg1":
        model = train_alg1(pairs, preset.arch, tc, CLASSES)
    else:
        model = train_separator(pairs, _load_decoders(args.ae_dir), preset.arch, tc, CLASSES)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / f"{args.alg}.json", seed=tc.seed, final_loss=model.loss_curve[-1])
    print(f"{args.alg}: loss {model.loss_curve[0]:.6e} -> {model.loss_curve[-1]:.6e}; wrote {out / f'{args.alg}.json'}")


def cmd_search(args) -> None:
    preset, seed = resolve_preset(args.config, args.seed)
    _echo("search", seed, {"alg": "alg2", "split": args.split, "search": preset.search.to_dict(), "jobs": args.jobs})
    recs = _load_records(args.manifest, args.split)
    model = Alg2Model(_load_decoders(args.ae_dir), CLASSES, preset.search)
    out = _out_dir(args)
    (out / "separated").mkdir(parents=True, exist_ok=True)
    save_model(model, out / "alg2.json", seed=preset.search.seed)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["sample_id", "best_lr", "best_loss"])
    jobs = ((model.decoders, model.search, r.mixture_wave()) for r in recs)
    with open(out / "search_log.csv", "w", newline="") as fh:
        log_writer = csv.writer(fh, lineterminator="\n")
        log_writer.writerow(["sample_id", "best_lr", "best_loss"])
        for rec, (outputs, lr, loss) in zip(recs, _map(_search_one, jobs, args.jobs)):
            row = [rec.id, repr(lr), repr(loss)]
            writer.writerow(row)
            log_writer.writerow(row)
            sys.stdout.flush()
            for c, w in zip(CLASSES, outputs):
                write_wav(w, out / "separated" / f"{rec.id}_{c}.wav")


def cmd_separate(args) -> None:
    _echo("separate", 0, {"model": str(args.model), "input": str(args.input)})
    model = load_model(args.model)
    if isinstance(model, Autoencoder):
        raise ValueError(f"{args.model} is a single-class autoencoder; use an alg1, alg2 or alg3 checkpoint")
    wave = read_wav(args.input)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    for c, w in zip(model.channel_classes, separate(model, wave)):
        path = out / f"{Path(args.input).stem}_{c}.wav"
        write_wav(w, path)
        print(path)


def cmd_eval(args) -> None:
    _echo("eval", 0, {"alg": args.alg, "model": str(args.model), "manifest": str(args.manifest),
                      "split": args.split, "jobs": args.jobs})
    model = _load_tagged(args.model, args.alg)
    recs = _load_records(args.manifest, args.split)
    if not recs:
        raise ValueError(f"no records in split {args.split!r}")
    outputs = dict(zip((r.id for r in recs), _map(_separate_one, ((model, r.mixture_wave()) for r in recs), args.jobs)))
    report = evaluate_dataset(outputs, recs, model.channel_classes, args.alg)
    dest = _out_dir(args)
    if dest.suffix != ".csv":
        dest = dest / f"report_{args.alg}.csv"
    dest.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(dest)
    print(f"wrote {len(report.rows)} rows to {dest}")


def cmd_report(args) -> None:
    _echo("report", 0, {"inputs": [str(p) for p in args.inputs]})
    rows = [row for p in args.inputs for row in read_report_csv(p)]
    text = render_tables(rows)
    print(text)
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tables.txt").write_text(text + "\n")


def cmd_demo(args) -> None:
    preset, seed = resolve_preset(args.config, args.seed)
    _echo("demo", seed, {"dataset": preset.dataset.to_dict(), "arch": preset.arch.to_dict(),
                         "ae": asdict(preset.ae), "alg1": asdict(preset.alg1), "alg3": asdict(preset.alg3),
                         "search": preset.search.to_dict()})
    result = run_experiment(preset, tuple(args.alg))
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for alg, rep in result.reports.items():
        paths.append(out / f"report_{alg}.csv")
        rep.to_csv(paths[-1])
    text = render_tables([row for p in paths for row in read_report_csv(p)])
    (out / "tables.txt").write_text(text + "\n")
    print(text)
    print("timings_s " + json.dumps({k: round(v, 1) for k, v in result.timings.items()}))


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chansep", description="Fixed-channel single-channel source separation.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log training progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help, config=True, seed=True):
        p = sub.add_parser(name, help=help)
        p.set_defaults(fn=fn)
        p.add_argument("--out", type=Path, help=f"output location (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        if config:
            p.add_argument("--config", type=Path, help="JSON config file")
        if seed:
            p.add_argument("--seed", type=int, help="base seed; overrides seeds in the config")
        return p

    add("synth", cmd_synth, "synthesize the mixture corpus (WAVs + manifest.jsonl)")

    p = add("train-ae", cmd_train_ae, "train one per-class autoencoder")
    p.add_argument("--class", dest="cls", required=True, choices=CLASSES)
    p.add_argument("--manifest", type=Path, required=True)

    p = add("train", cmd_train, "train the joint model (alg1) or the separator (alg3)")
    p.add_argument("--alg", required=True, choices=("alg1", "alg3"))
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--ae-dir", type=Path, help="directory holding ae_A.json .. ae_D.json (alg3)")

    p = add("search", cmd_search, "latent search over one split (alg2); streams CSV progress")
    p.add_argument("--alg", required=True, choices=("alg2",))
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--ae-dir", type=Path, required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--jobs", type=_positive_int, default=1)

    p = add("separate", cmd_separate, "write one WAV per output channel", config=False, seed=False)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)

    p = add("eval", cmd_eval, "evaluate a model on one split; writes the report CSV", config=False, seed=False)
    p.add_argument("--alg", required=True, choices=("alg1", "alg2", "alg3"))
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--jobs", type=_positive_int, default=1)

    p = add("report", cmd_report, "render report CSVs as text tables", config=False, seed=False)
    p.add_argument("inputs", nargs="+", type=Path, metavar="CSV")

    p = add("demo", cmd_demo, "run the whole desk-scale experiment in memory")
    p.add_argument("--alg", nargs="+", default=["alg1", "alg2", "alg3"], choices=("alg1", "alg2", "alg3"))
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "alg", None) == "alg3" and args.command == "train" and args.ae_dir is None:
        ap.print_usage(sys.stderr)
        print("chansep: error: train --alg alg3 requires --ae-dir", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        args.fn(args)
    except BrokenPipeError:
        # downstream reader went away (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return 1
    except KeyboardInterrupt:
        print("chansep: error: Interrupted: stopped by user", file=sys.stderr)
        return 130
    except Exception as exc:  # noqa: BLE001 - single-line report for every failure
        msg = " ".join(str(exc).split())
        print(f"chansep: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
