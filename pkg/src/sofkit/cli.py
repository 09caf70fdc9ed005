"""Command line interface.

    sofkit exp1|exp2|exp3|exp4 [--config FILE] [--loss L] [--lambda X]
           [--lr X] [--steps N] [--seed N] [--profile desk|paper]
           [--data-dir PATH] [--out PATH --format csv|json] ...
    sofkit fetch --dataset mnist|fashion --url-base URL --data-dir PATH

Config files are flat ``key = value`` text mirroring the flags; explicit
flags win over config values.
"""

from __future__ import annotations

import argparse
import os
import sys
import urllib.request

from . import datasets as ds
from .harness import ExperimentConfig, report, run_experiment

IDX_FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)


def parse_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _add_experiment_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--loss", action="append", dest="losses",
                   help="loss selector (repeatable)")
    p.add_argument("--lambda", action="append", dest="lambda_grid", type=float,
                   help="regularization weight (repeatable)")
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seed list (exp4)")
    p.add_argument("--profile", choices=("desk", "paper"))
    p.add_argument("--data-dir")
    p.add_argument("--dataset", choices=("mnist", "fashion"))
    p.add_argument("--formula", help="exp1: two-variable formula text")
    p.add_argument("--sigma", type=float)
    p.add_argument("--optimizer", action="append", dest="optimizers",
                   choices=("adam", "sgd"))
    p.add_argument("--teacher-checkpoint")
    p.add_argument("--checkpoint-out")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))


_LIST_KEYS = {"losses", "lambda_grid", "optimizers", "seeds"}
_FLOAT_KEYS = {"learning_rate", "sigma"}
_INT_KEYS = {"steps", "epochs", "seed"}


def _merge_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        for key, raw in parse_config_file(args.config).items():
            if key == "lambda":
                key = "lambda_grid"
            if key == "loss":
                key = "losses"
            if key == "lr":
                key = "learning_rate"
            if key == "optimizer":
                key = "optimizers"
            if key in _LIST_KEYS:
                values[key] = [v.strip() for v in raw.split(",")]
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            elif key in _INT_KEYS:
                values[key] = int(raw)
            else:
                values[key] = raw
    for key, value in vars(args).items():
        if key in ("command", "config", "func") or value is None:
            continue
        values[key] = value
    if "lambda_grid" in values:
        values["lambda_grid"] = [float(v) for v in values["lambda_grid"]]
    if "seeds" in values:
        raw = values["seeds"]
        if isinstance(raw, str):
            raw = raw.split(",")
        values["seeds"] = [int(v) for v in raw]
    if "optimizers" in values:
        values["optimizers"] = tuple(values["optimizers"])
    out = values.pop("out", None)
    fmt = values.pop("format", "csv")
    cfg = ExperimentConfig(experiment=args.command, **values)
    return cfg, out, fmt


def cmd_experiment(args):
    cfg, out, fmt = _merge_config(args)
    table = run_experiment(cfg)
    if out:
        report(table, out, fmt)
        print(f"wrote {len(table.rows)} rows to {out}")
    else:
        for row in table.rows:
            print(row)
    return 0


def cmd_fetch(args):
    os.makedirs(os.path.join(args.data_dir, args.dataset), exist_ok=True)
    base = args.url_base.rstrip("/")
    for name in IDX_FILES:
        dest = os.path.join(args.data_dir, args.dataset, name)
        if os.path.exists(dest):
            print(f"{dest} already present")
            continue
        url = f"{base}/{name}"
        print(f"fetching {url}")
        with urllib.request.urlopen(url) as resp:
            payload = resp.read()
        if len(payload) < 1000:
            raise IOError(f"{url}: implausibly small payload ({len(payload)} bytes)")
        with open(dest, "wb") as fh:
            fh.write(payload)
        # decode immediately so corrupt downloads fail here, not mid-run
        if "images" in name:
            ds.load_idx_images(dest)
        else:
            ds.load_idx_labels(dest)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sofkit",
                                     description="semantic objective function experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for exp in ("exp1", "exp2", "exp3", "exp4"):
        p = sub.add_parser(exp)
        _add_experiment_flags(p)
        p.set_defaults(func=cmd_experiment)
    fetch = sub.add_parser("fetch")
    fetch.add_argument("--dataset", choices=("mnist", "fashion"), required=True)
    fetch.add_argument("--url-base", required=True)
    fetch.add_argument("--data-dir", required=True)
    fetch.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
