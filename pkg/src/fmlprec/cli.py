"""Command-line entry point: ``fmlprec {prepare,train,eval,filter-study,inspect-filters,synth}``.

Settings come from defaults, then a flat ``key=value`` config file, then
command-line flags (last wins). Exit status: 0 ok, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import data, synthetic
from .errors import FormatError
from .evaluation import evaluate_full, evaluate_sampled
from .model import FmlpModel, ModelConfig
from .spectral import FilterKind
from .training import TrainConfig, fit, load_checkpoint, save_checkpoint

log = logging.getLogger("fmlprec")

TARGET_MODE_FLAGS = {"all": "all_positions", "last": "last_only"}
STUDY_VARIANTS = (
    ("none", "none", FilterKind.ALL_PASS),
    ("HPF", "none", FilterKind.HIGH_PASS),
    ("LPF", "none", FilterKind.LOW_PASS),
    ("BSF", "none", FilterKind.BAND_STOP),
    ("FMLP-Rec", "learnable", FilterKind.ALL_PASS),
)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    # model
    hidden_size: int = 64
    max_len: int = 50
    num_blocks: int = 2
    d_ff: int = 0  # 0 means 4 * hidden_size
    dropout: float = 0.5
    init_std: float = 0.02
    mixer: str = "learnable"
    pre_filter: str = "allpass"
    # optimization
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    target_mode: str = "all_positions"
    seed: int = 0
    # data and evaluation
    data: str = ""
    format: str = "triplet"
    min_count: int = 5
    checkpoint: str = ""
    output: str = ""
    history: str = ""
    ranks: str = ""
    protocol: str = "sampled99"
    split: str = "test"
    mask_history: bool = True

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            hidden_size=self.hidden_size,
            max_len=self.max_len,
            num_blocks=self.num_blocks,
            d_ff=self.d_ff or None,
            dropout=self.dropout,
            init_std=self.init_std,
            seed=self.seed,
            mixer=self.mixer,
            pre_filter=self.pre_filter,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, adam_epsilon=self.adam_epsilon,
            batch_size=self.batch_size, max_epochs=self.max_epochs, patience=self.patience,
            seed=self.seed, target_mode=self.target_mode, eval_seed=self.seed,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    if key not in _FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    t = str(_FIELD_TYPES[key])
    try:
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
        if t == "bool":
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise UsageError(f"bad value {value!r} for {key} ({t})") from None
    return value


def parse_assignments(lines, source: str) -> dict:
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key = key.strip().replace("-", "_")
        out[key] = _coerce(key, value.strip())
    return out


def build_config(args) -> RunConfig:
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        values.update(parse_assignments(path.read_text().splitlines(), str(path)))
    flag_values = {
        "seed": getattr(args, "seed", None),
        "data": getattr(args, "data", None),
        "format": getattr(args, "format", None),
        "checkpoint": getattr(args, "checkpoint", None),
        "protocol": getattr(args, "protocol", None),
        "output": getattr(args, "output", None),
    }
    mode = getattr(args, "target_mode", None)
    if mode is not None:
        flag_values["target_mode"] = TARGET_MODE_FLAGS[mode]
    values.update({k: v for k, v in flag_values.items() if v is not None})
    values.update(parse_assignments(getattr(args, "set", None) or [], "--set"))
    return RunConfig(**values)


def _require(cfg: RunConfig, *keys: str) -> None:
    for k in keys:
        if not getattr(cfg, k):
            raise UsageError(f"--{k} is required")


def _load_splits(cfg: RunConfig):
    path = Path(cfg.data)
    if not path.exists():
        raise FileNotFoundError(f"prepared dataset cache not found at {path}; run `fmlprec prepare` first")
    log_, _ = data.load_log(path)
    return log_, data.split_leave_one_out(log_, cfg.max_len)


def format_stats_table(stats: dict) -> str:
    header = "# Sequences\t# Items\t# Actions\t# Sparsity"
    row = f"{stats['sequences']:,}\t{stats['items']:,}\t{stats['actions']:,}\t{100 * stats['sparsity']:.2f}%"
    return header + "\n" + row + "\n"


def cmd_prepare(cfg: RunConfig) -> int:
    _require(cfg, "data", "output")
    raw = data.ingest(cfg.data, cfg.format)
    filtered = data.apply_core_filter(raw, cfg.min_count)
    splits = data.split_leave_one_out(filtered, cfg.max_len)
    data.save_log(filtered, cfg.output, {"format": cfg.format, "min_count": str(cfg.min_count)})
    print(format_stats_table(filtered.stats()), end="")
    print(f"train sequences: {len(splits.train)}  eval users: {len(splits.test)}  "
          f"skipped users: {splits.skipped_users}")
    return 0


def train_model(cfg: RunConfig, splits, resume: bool = False, checkpoint: str | None = None,
                history: str | None = None):
    """Fit one model; writes the best checkpoint and a ``.last`` checkpoint per epoch."""
    train_cfg = cfg.train_config()
    state = progress = best = None
    if resume:
        ck = load_checkpoint(f"{checkpoint}.last")
        model, state, progress = ck.model, ck.state, ck.progress
        if progress is not None and progress.best_epoch and Path(checkpoint).exists():
            best = load_checkpoint(checkpoint).model.state_arrays()
    else:
        model = FmlpModel(cfg.model_config(splits.num_items))

    def on_epoch(m, st, prog):
        if not checkpoint:
            return
        save_checkpoint(f"{checkpoint}.last", m, st, prog, train_cfg)
        if prog.best_epoch == prog.epoch:
            save_checkpoint(checkpoint, m, st, prog, train_cfg)

    result = fit(model, splits, train_cfg, state, progress, history_path=history,
                 on_epoch=on_epoch, best_state=best)
    if checkpoint:
        save_checkpoint(checkpoint, model, result.best_adam, result.progress, train_cfg)
    return model, result


def cmd_train(cfg: RunConfig, resume: bool = False) -> int:
    _require(cfg, "data", "checkpoint")
    _, splits = _load_splits(cfg)
    history = cfg.history or f"{cfg.checkpoint}.history.tsv"
    _, result = train_model(cfg, splits, resume, cfg.checkpoint, history)
    p = result.progress
    print(f"epochs run: {p.epoch}  best epoch: {p.best_epoch}  best valid MRR: {p.best_mrr:.4f}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg, "data", "checkpoint")
    model = load_checkpoint(cfg.checkpoint).model
    cfg.max_len = model.config.max_len
    _, splits = _load_splits(cfg)
    if cfg.protocol == "sampled99":
        report = evaluate_sampled(model, splits, seed=cfg.seed, split=cfg.split)
    elif cfg.protocol == "full":
        report = evaluate_full(model, splits, mask_history=cfg.mask_history, split=cfg.split)
    else:
        raise UsageError(f"unknown protocol {cfg.protocol!r}")
    if cfg.output:
        report.write(cfg.output, cfg.ranks or None)
    elif cfg.ranks:
        Path(cfg.ranks).write_text("".join(f"{u}\t{r}\n" for u, r in report.ranks))
    print(report.to_text(), end="")
    return 0


def run_filter_study(cfg: RunConfig, splits, checkpoint_dir: str | None = None) -> list[dict]:
    rows = []
    for name, mixer, pre in STUDY_VARIANTS:
        vcfg = RunConfig(**{**asdict(cfg), "mixer": mixer, "pre_filter": pre.value})
        ckpt = str(Path(checkpoint_dir) / f"{name}.ckpt") if checkpoint_dir else None
        model, _ = train_model(vcfg, splits, checkpoint=ckpt)
        rep = evaluate_sampled(model, splits, seed=cfg.seed, split="test")
        rows.append({"variant": name, "NDCG@10": rep.metrics["NDCG@10"], "HR@10": rep.metrics["HR@10"]})
        log.info("%s: NDCG@10 %.4f HR@10 %.4f", name, rows[-1]["NDCG@10"], rows[-1]["HR@10"])
    return rows


def cmd_filter_study(cfg: RunConfig) -> int:
    _require(cfg, "data")
    _, splits = _load_splits(cfg)
    if cfg.checkpoint:
        Path(cfg.checkpoint).mkdir(parents=True, exist_ok=True)
    rows = run_filter_study(cfg, splits, cfg.checkpoint or None)
    text = "variant\tNDCG@10\tHR@10\n" + "".join(
        f"{r['variant']}\t{r['NDCG@10']:.4f}\t{r['HR@10']:.4f}\n" for r in rows
    )
    if cfg.output:
        Path(cfg.output).write_text(text)
    print(text, end="")
    return 0


def filter_spectrum_rows(model: FmlpModel) -> list[tuple[int, int, float, float, float]]:
    """(block, bin, bin/K, mean |w|, mean Re w) for every block and frequency bin."""
    rows = []
    for b, block in enumerate(model.blocks):
        if block.bank is None:
            continue
        w = block.bank.complex_weights()
        k_total = w.shape[0]
        amp = np.abs(w).mean(axis=1)
        real = w.real.mean(axis=1)
        rows += [(b, k, k / k_total, float(amp[k]), float(real[k])) for k in range(k_total)]
    return rows


def cmd_inspect_filters(cfg: RunConfig) -> int:
    _require(cfg, "checkpoint")
    model = load_checkpoint(cfg.checkpoint).model
    text = "block\tbin\tfrequency\tamplitude\tmean_real\n" + "".join(
        f"{b}\t{k}\t{f:.6f}\t{a:.6f}\t{r:.6f}\n" for b, k, f, a, r in filter_spectrum_rows(model)
    )
    if cfg.output:
        Path(cfg.output).write_text(text)
    print(text, end="")
    return 0


def cmd_synth(args) -> int:
    seqs = synthetic.periodic_sequences(
        num_users=args.users, num_items=args.items, period=args.period, noise=args.noise,
        min_len=args.min_len, max_len=args.max_len, seed=args.seed or 0,
    )
    synthetic.write_triplets(seqs, args.output)
    print(f"wrote {sum(map(len, seqs.values()))} interactions for {len(seqs)} users to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmlprec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data_help="prepared dataset cache"):
        p.add_argument("--config", metavar="PATH", help="flat key=value config file")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--data", metavar="PATH", help=data_help)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        return p

    p = common(sub.add_parser("prepare", help="ingest, 5-core filter and cache a dataset"), "raw input file")
    p.add_argument("--format", choices=data.FORMATS)
    p.add_argument("--output", metavar="PATH", help="cache file to write")

    p = common(sub.add_parser("train", help="train and write the best checkpoint"))
    p.add_argument("--checkpoint", metavar="PATH", help="best checkpoint to write")
    p.add_argument("--target-mode", choices=sorted(TARGET_MODE_FLAGS))
    p.add_argument("--resume", action="store_true", help="continue from CHECKPOINT.last")

    p = common(sub.add_parser("eval", help="evaluate a checkpoint"))
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--protocol", choices=("sampled99", "full"))
    p.add_argument("--output", metavar="PATH", help="report file")

    p = common(sub.add_parser("filter-study", help="compare classical filters on all-MLP variants"))
    p.add_argument("--checkpoint", metavar="DIR", help="directory for per-variant checkpoints")
    p.add_argument("--target-mode", choices=sorted(TARGET_MODE_FLAGS))
    p.add_argument("--output", metavar="PATH", help="table file")

    p = common(sub.add_parser("inspect-filters", help="dump learned filter amplitudes"))
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--output", metavar="PATH")

    p = sub.add_parser("synth", help="write a synthetic periodic triplet file")
    p.add_argument("--output", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--period", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--min-len", type=int, default=20)
    p.add_argument("--max-len", type=int, default=30)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = build_config(args)
        if args.command == "prepare":
            return cmd_prepare(cfg)
        if args.command == "train":
            return cmd_train(cfg, resume=args.resume)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "filter-study":
            return cmd_filter_study(cfg)
        return cmd_inspect_filters(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fmlprec: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, RuntimeError, FormatError) as exc:
        print(f"fmlprec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
