"""Command line harness: ``dmcca {extract,synth,sweep,run}``.

``run`` and ``sweep`` accept a JSON config via ``--config``; any flag given
on the command line overrides the corresponding config key.  Recognised
config keys: ``methods``, ``train``, ``test`` (lists of feature CSVs, one
per set), ``idx`` (``train_images``, ``train_labels``, ``test_images``,
``test_labels``, ``per_class``), ``d_max``, ``d_range``, ``fusion``,
``pair``, ``seed``, ``out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classify import SweepResult, comparison_csv, single_set_accuracies, sweep_dimensions
from .dataset import LabelVector, MultisetDataset, load_feature_table, load_idx, write_feature_table
from .family import Fusion, Method, MethodSpec, save_model
from .features import digit_feature_sets
from .io import atomic_write_json, atomic_write_text, fmt
from .synth import SyntheticSpec, generate

log = logging.getLogger("dmcca")

DIGIT_SETS = ("gabor_mean", "gabor_std", "zernike")


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def select_per_class(labels: np.ndarray, per_class: int | None) -> np.ndarray:
    """Indices of the first ``per_class`` samples of every class, in file order."""
    if per_class is None:
        return np.arange(labels.size)
    keep = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        keep[np.flatnonzero(labels == c)[:per_class]] = True
    return np.flatnonzero(keep)


def extract_digits(images_path, labels_path, per_class: int | None = None):
    images, labels = load_idx(images_path, labels_path)
    idx = select_per_class(labels.labels, per_class)
    feats = digit_feature_sets(images[idx])
    lab = LabelVector(labels.labels[idx], labels.n_classes)
    return MultisetDataset(tuple(feats[k] for k in DIGIT_SETS), lab)


def cmd_extract(args) -> int:
    out = Path(args.out)
    with _Stage("extract"):
        data = extract_digits(args.images, args.labels, args.per_class)
    with _Stage("write"):
        for name, x in zip(DIGIT_SETS, data.sets):
            write_feature_table(out / f"{args.prefix}{name}.csv", x, data.labels.labels)
    return 0


def cmd_synth(args) -> int:
    dims = tuple(int(v) for v in args.dims.split(","))
    spec = SyntheticSpec(n_sets=len(dims), n_classes=args.classes, n_train=args.n_train,
                         n_test=args.n_test, dims=dims, separation=args.separation,
                         shared_strength=args.shared, noise=args.noise,
                         latent_dim=args.latent_dim, seed=args.seed)
    with _Stage("synth"):
        train, test = generate(spec)
    out = Path(args.out)
    with _Stage("write"):
        for split, data in (("train", train), ("test", test)):
            for i, x in enumerate(data.sets):
                write_feature_table(out / f"{split}_set{i}.csv", x, data.labels.labels)
    return 0


def _load_sets(paths) -> MultisetDataset:
    sets, labels = [], None
    for i, p in enumerate(paths):
        fm, lab = load_feature_table(p, set_id=i)
        if labels is None:
            labels = lab
        elif not np.array_equal(labels.labels, lab.labels):
            raise ValueError(f"{p}: labels differ from {paths[0]}")
        sets.append(fm.values)
    return MultisetDataset(tuple(sets), labels)


def _same_classes(train: MultisetDataset, test: MultisetDataset):
    c = max(train.n_classes, test.n_classes)
    return (MultisetDataset(train.sets, LabelVector(train.labels.labels, c)),
            MultisetDataset(test.sets, LabelVector(test.labels.labels, c)))


def resolve_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    overrides = {
        "methods": args.method,
        "train": args.train,
        "test": args.test,
        "d_max": args.d_max,
        "fusion": args.fusion,
        "seed": args.seed,
        "out": args.out,
        "pair": args.pair,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    cfg.setdefault("methods", ["DMCCA"])
    cfg.setdefault("fusion", "sum")
    cfg.setdefault("seed", 0)
    if "out" not in cfg:
        raise ValueError("an output directory is required (--out or config 'out')")
    if not cfg.get("idx") and not (cfg.get("train") and cfg.get("test")):
        raise ValueError("give train/test feature tables or an 'idx' block")
    return cfg


def load_experiment(cfg: dict) -> tuple[MultisetDataset, MultisetDataset]:
    idx = cfg.get("idx")
    if idx:
        per_class = idx.get("per_class", 150)
        train = extract_digits(idx["train_images"], idx["train_labels"], per_class)
        test = extract_digits(idx["test_images"], idx["test_labels"], per_class)
    else:
        if len(cfg["train"]) != len(cfg["test"]):
            raise ValueError("train and test need the same number of feature tables")
        train, test = _load_sets(cfg["train"]), _load_sets(cfg["test"])
    return _same_classes(train, test)


def _d_range(cfg: dict):
    if cfg.get("d_range") is not None:
        return list(cfg["d_range"])
    if cfg.get("d_max") is not None:
        return list(range(1, int(cfg["d_max"]) + 1))
    return None


def run_method(train, test, spec: MethodSpec, cfg: dict, out: Path) -> SweepResult:
    if spec.kind.two_set and train.n_sets != 2:
        pair = cfg.get("pair") or [train.n_sets - 2, train.n_sets - 1]
        train, test = train.select_sets(pair), test.select_sets(pair)
    result = sweep_dimensions(train, test, spec, _d_range(cfg) if spec.kind is not Method.SERIAL else None)
    name = spec.kind.value.lower()
    result.write(out / f"sweep_{name}.csv", out / f"summary_{name}.json")
    if result.model is not None:
        save_model(result.model, out / f"model_{name}.json")
    return result


def cmd_run(args, single: bool = False) -> int:
    with _Stage("config"):
        cfg = resolve_config(args)
        methods = [MethodSpec(Method.parse(m), Fusion.parse(cfg["fusion"])) for m in cfg["methods"]]
        if single and len(methods) != 1:
            raise ValueError("sweep takes exactly one --method")
    with _Stage("load"):
        train, test = load_experiment(cfg)
    out = Path(cfg["out"])
    results = []
    for spec in methods:
        with _Stage(f"method {spec.kind.value}"):
            results.append(run_method(train, test, spec, cfg, out))
    if single:
        return 0
    with _Stage("report"):
        atomic_write_text(out / "comparison.csv", comparison_csv(results))
        singles = single_set_accuracies(train, test)
        atomic_write_text(out / "singles.csv",
                          "set,accuracy\n" + "".join(f"{i},{fmt(a)}\n" for i, a in enumerate(singles)))
        atomic_write_json(out / "config.json", {k: cfg[k] for k in sorted(cfg)})
    for r in results:
        print(f"{r.method.kind.value:7s} best_d={r.best_d:<3d} best_accuracy={r.best_accuracy:.4f} d_max={r.d_max}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmcca", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="Gabor mean/std and Zernike features from IDX files")
    e.add_argument("--images", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--per-class", type=int, default=None,
                   help="keep the first N samples of every class")
    e.add_argument("--prefix", default="", help="file name prefix, e.g. 'train_'")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("synth", help="write seeded synthetic train/test feature tables")
    s.add_argument("--classes", type=int, default=6)
    s.add_argument("--dims", default="20,20,30", help="comma-separated per-set dimensions")
    s.add_argument("--n-train", type=int, default=300)
    s.add_argument("--n-test", type=int, default=120)
    s.add_argument("--separation", type=float, default=1.0)
    s.add_argument("--shared", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=2.0)
    s.add_argument("--latent-dim", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    for name, single in (("run", False), ("sweep", True)):
        r = sub.add_parser(name, help="compare methods" if not single else "sweep one method over d")
        r.add_argument("--config")
        r.add_argument("--method", action="append", type=str.upper,
                       choices=[m.value for m in Method])
        r.add_argument("--train", nargs="+")
        r.add_argument("--test", nargs="+")
        r.add_argument("--d-max", type=int)
        r.add_argument("--fusion", choices=["sum", "concat"])
        r.add_argument("--pair", type=int, nargs=2, help="sets used by the two-set methods")
        r.add_argument("--seed", type=int)
        r.add_argument("--out")
        r.set_defaults(func=lambda a, single=single: cmd_run(a, single=single))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"dmcca: error in {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
