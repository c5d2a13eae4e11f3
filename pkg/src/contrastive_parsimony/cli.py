"""Command-line entry point: ``cparsimony {topologies,simulate,train,evaluate,encode}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .config import RunConfig, load_run_config
from .encoder import encode, load_checkpoint
from .evaluation import evaluate, evaluate_oracle
from .parsimony import binarize, parsimony_vector
from .simulator import generate_dataset, load_observations
from .topology import enumerate_topologies
from .trainer import prepare_inputs, train

log = logging.getLogger("cparsimony")

ALIASES = {"n_observations": ["--n"], "num_internal": ["--internal"]}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="output location (meaning depends on the command)")
    g = p.add_argument_group("config overrides")
    for f in fields(RunConfig):
        flags = ["--" + f.name.replace("_", "-")] + ALIASES.get(f.name, [])
        g.add_argument(*flags, dest=f.name, default=None, metavar=f.type.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cparsimony", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topologies", help="list every rooted labeled topology")
    _add_common(p)

    p = sub.add_parser("simulate", help="write train/test JSON-Lines datasets")
    _add_common(p)

    p = sub.add_parser("train", help="fit the encoder on the training file")
    _add_common(p)

    p = sub.add_parser("evaluate", help="top-k and event accuracy on the test file")
    _add_common(p)
    p.add_argument("--ground-truth-encoder", action="store_true",
                   help="score the true event matrices instead of encoder output")
    p.add_argument("--details", action="store_true", help="include per-observation records")

    p = sub.add_parser("encode", help="dump probabilities and events for one observation")
    _add_common(p)
    p.add_argument("--index", type=int, default=0, help="line index in the test file")
    return parser


def _overrides(args) -> dict:
    return {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}


def cmd_topologies(cfg: RunConfig, args) -> int:
    try:
        tops = enumerate_topologies(cfg.num_internal)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for i, g in enumerate(tops):
        print(json.dumps({"id": i, **g.to_dict()}))
    print(f"count: {len(tops)}")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    if args.out:
        cfg = cfg.updated({"data_dir": args.out})
    sim = cfg.sim_config()
    cfg.train_file.parent.mkdir(parents=True, exist_ok=True)
    cfg.test_file.parent.mkdir(parents=True, exist_ok=True)
    n_train, n_test = generate_dataset(sim, cfg.split, cfg.train_file, cfg.test_file)
    print(f"train: {n_train} observations -> {cfg.train_file}")
    print(f"test: {n_test} observations -> {cfg.test_file}")
    print(f"seed: {sim.seed}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    if args.out:
        cfg = cfg.updated({"checkpoint_dir": args.out})
    train_set = load_observations(cfg.train_file)
    if not train_set:
        raise ValueError(f"{cfg.train_file} holds no observations")
    tc = cfg.train_config()
    params, history = train(train_set, cfg.encoder_config(), tc)
    means = history.epoch_means()
    for epoch, value in means.items():
        print(f"epoch {epoch}: mean loss {value:.4f}")
    print(f"steps: {len(history)}")
    print(f"checkpoint: {Path(tc.checkpoint_dir) / 'final.json'}")
    print(f"history: {Path(tc.checkpoint_dir) / 'history.csv'}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    test_set = load_observations(cfg.test_file)
    if not test_set:
        raise ValueError(f"{cfg.test_file} holds no observations")
    tops = enumerate_topologies(test_set[0].instance.topology.n_splitters + 1)
    if args.ground_truth_encoder:
        report = evaluate_oracle(test_set, tops)
    else:
        params, enc_cfg, extra = load_checkpoint(cfg.checkpoint_file)
        report = evaluate(test_set, params, tops, enc_cfg,
                          standardize_inputs=extra.get("standardize_inputs", cfg.standardize))
    text = report.to_json(details=args.details)
    print(report.table())
    print(text)
    out = args.out or cfg.report_path
    if out:
        Path(out).write_text(text + "\n")
    return 0


def cmd_encode(cfg: RunConfig, args) -> int:
    obs = load_observations(cfg.test_file)[args.index]
    params, enc_cfg, extra = load_checkpoint(cfg.checkpoint_file)
    x = prepare_inputs(obs.series, extra.get("standardize_inputs", cfg.standardize))
    probs = encode(x, params, enc_cfg).detach().numpy()
    X = binarize(probs)
    doc = {"id": obs.id, "probs": probs.tolist(), "events": X.tolist(),
           "parsimony": parsimony_vector(obs.instance, X).tolist()}
    text = json.dumps(doc)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


COMMANDS = {"topologies": cmd_topologies, "simulate": cmd_simulate, "train": cmd_train,
            "evaluate": cmd_evaluate, "encode": cmd_encode}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_run_config(args.config, _overrides(args))
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return 2
    print("# effective config\n" + "\n".join("# " + line for line in cfg.dump().splitlines()),
          file=sys.stderr)
    try:
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, IndexError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
