"""Command-line front end: suppress, eval, gradcheck, train-toy, sweep-sigma-t.

Exit codes are a stable contract: 0 success, 2 input/parse failure, 3
configuration or contract violation, 4 id mismatch between detection and
ground-truth files, 5 gradient check beyond tolerance, 6 optimizer
divergence. 1 is the generic failure code (a completed run whose built-in
assertion did not hold).

Configuration files are flat ``key = value`` text: blank lines and lines
starting with ``#`` are ignored, unknown keys are rejected, command-line
flags override file values.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace

from . import losses
from .evaluation import (
    EvalConfig,
    GroundTruthBox,
    IdMismatchError,
    evaluate,
)
from .records import (
    DetectionRecord,
    RecordParseError,
    from_detection,
    read_detections,
    read_ground_truths,
    to_detection,
    write_detections,
)
from .suppression import SuppressConfig, suppress
from .synthetic import (
    DivergenceError,
    SyntheticGroup,
    run_experiment,
)

__all__ = ["main", "RunConfig", "ConfigError", "load_config"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_ID_MISMATCH = 4
EXIT_GRADCHECK = 5
EXIT_DIVERGENCE = 6

GRADCHECK_TOL = 1e-6
DEFAULT_SWEEP_GRID = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1)


class ConfigError(ValueError):
    """Invalid configuration key or value."""


@dataclass
class RunConfig:
    """Flat run configuration; every field doubles as a config-file key."""

    # suppression
    sigma_t: float = 0.02
    soft_nms: str = "off"
    soft_sigma: float = 0.5
    nms_iou_thresh: float = 0.5
    score_floor: float = 0.001
    voting: bool = False
    vote_pool: str = "initial"
    per_class: bool = True
    # file paths
    input: str | None = None
    output: str | None = None
    det: str | None = None
    gt: str | None = None
    # synthetic training
    noise_stds: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3)
    true_coords: tuple[float, ...] = (0.0,)
    n_samples: int = 10_000
    seed: int = 0
    learning_rate: float = 0.05
    max_steps: int = 100_000
    adaptive_lr: bool = True
    # metrics
    eval_thresholds: tuple[float, ...] = EvalConfig().iou_thresholds

    def suppress_config(self) -> SuppressConfig:
        try:
            return SuppressConfig(
                sigma_t=self.sigma_t,
                soft_nms=self.soft_nms,
                soft_sigma=self.soft_sigma,
                nms_iou_thresh=self.nms_iou_thresh,
                score_floor=self.score_floor,
                voting=self.voting,
                vote_pool=self.vote_pool,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def eval_config(self) -> EvalConfig:
        try:
            return EvalConfig(iou_thresholds=tuple(self.eval_thresholds))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_float_csv(text: str) -> tuple[float, ...]:
    items = [part.strip() for part in text.split(",") if part.strip() != ""]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(item) for item in items)


_KEY_PARSERS = {
    "sigma_t": float,
    "soft_nms": str,
    "soft_sigma": float,
    "nms_iou_thresh": float,
    "score_floor": float,
    "voting": _parse_bool,
    "vote_pool": str,
    "per_class": _parse_bool,
    "input": str,
    "output": str,
    "det": str,
    "gt": str,
    "noise_stds": _parse_float_csv,
    "true_coords": _parse_float_csv,
    "n_samples": int,
    "seed": int,
    "learning_rate": float,
    "max_steps": int,
    "adaptive_lr": _parse_bool,
    "eval_thresholds": _parse_float_csv,
}

assert set(_KEY_PARSERS) == {f.name for f in fields(RunConfig)}


def load_config(path: str) -> RunConfig:
    """Parse a flat key=value config file into a RunConfig."""
    cfg = RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise RecordParseError(f"cannot read config file: {exc}", path=path) from exc
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped == "" or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise RecordParseError(
                f"expected 'key = value', got {stripped!r}", number, path
            )
        key, _, raw_value = stripped.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:line {number}: unknown config key {key!r}")
        try:
            value = _KEY_PARSERS[key](raw_value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:line {number}: bad value for {key!r}: {exc}"
            ) from exc
        setattr(cfg, key, value)
    return cfg


def _fmt_value(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.6f}"


def _metric_table(metrics: dict[str, float]) -> str:
    width = max(len(name) for name in metrics)
    lines = [f"{name:<{width}}  {_fmt_value(value)}" for name, value in metrics.items()]
    return "\n".join(lines)


def _write_metrics_json(path: str, metrics: dict[str, float]) -> None:
    clean = {
        name: (None if isinstance(v, float) and math.isnan(v) else v)
        for name, v in metrics.items()
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(clean, handle, indent=2)
        handle.write("\n")


def _suppress_records(
    records: list[DetectionRecord], cfg: SuppressConfig, per_class: bool
) -> list[DetectionRecord]:
    """Run suppression independently for every image in the record list."""
    by_image: dict[int, list[DetectionRecord]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec)
    out: list[DetectionRecord] = []
    for image_id in sorted(by_image):
        dets = [to_detection(rec) for rec in by_image[image_id]]
        for det in suppress(dets, cfg, per_class=per_class):
            out.append(from_detection(det, image_id))
    return out


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "sigma_t", None) is not None:
        cfg.sigma_t = args.sigma_t
    if getattr(args, "soft", None) is not None:
        cfg.soft_nms = args.soft
    if getattr(args, "vote", None) is not None:
        cfg.voting = args.vote == "on"
    return cfg


def cmd_suppress(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    in_path = args.in_path or cfg.input
    out_path = args.out_path or cfg.output
    if in_path is None or out_path is None:
        print("error: suppress needs --in and --out (or config keys input/output)",
              file=sys.stderr)
        return EXIT_CONFIG
    scfg = cfg.suppress_config()
    records = read_detections(in_path)
    if scfg.voting:
        for i, rec in enumerate(records, start=1):
            if rec.var is None:
                print(
                    f"error: voting is enabled but record at line {i} has no 'var'",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
    refined = _suppress_records(records, scfg, cfg.per_class)
    write_detections(out_path, refined)
    in_counts: dict[int, int] = {}
    out_counts: dict[int, int] = {}
    for rec in records:
        in_counts[rec.category_id] = in_counts.get(rec.category_id, 0) + 1
    for rec in refined:
        out_counts[rec.category_id] = out_counts.get(rec.category_id, 0) + 1
    for cls in sorted(in_counts):
        print(f"class {cls}: {in_counts[cls]} -> {out_counts.get(cls, 0)}")
    print(f"total: {len(records)} -> {len(refined)}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    det_path = args.det or cfg.det
    gt_path = args.gt or cfg.gt
    if det_path is None or gt_path is None:
        print("error: eval needs --det and --gt (or config keys det/gt)",
              file=sys.stderr)
        return EXIT_CONFIG
    det_records = read_detections(det_path)
    gt_records = read_ground_truths(gt_path)
    gts = [GroundTruthBox.from_record(rec) for rec in gt_records]
    result = evaluate(det_records, gts, cfg.eval_config())
    print(_metric_table(result.metrics))
    if args.out:
        _write_metrics_json(args.out, result.metrics)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.cases == 0:
        print("warning: 0 cases requested; gradient check is vacuous")
        return EXIT_OK
    loss_fn = None
    if args.perturb:
        def loss_fn(pred, label, _base=losses.kl_loss, _eps=args.perturb):
            out = _base(pred, label)
            return losses.LossOutput(
                out.value, out.grad_loc + _eps, out.grad_log_var, out.branch
            )
    result = losses.gradient_check(
        n_cases=args.cases, seed=args.seed, loss_fn=loss_fn
    )
    print(f"quadratic branch: max relative error {result.max_rel_quadratic:.3e}")
    print(f"linear branch:    max relative error {result.max_rel_linear:.3e}")
    if result.max_rel <= GRADCHECK_TOL:
        return EXIT_OK
    loc, log_var, label, which = result.worst_case
    print(
        f"FAIL: {which} off by {result.max_rel:.3e} at "
        f"loc={loc!r}, log_var={log_var!r}, label={label!r}",
        file=sys.stderr,
    )
    return EXIT_GRADCHECK


def cmd_train_toy(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    true_coords = cfg.true_coords
    if len(true_coords) == 1:
        true_coords = true_coords * len(cfg.noise_stds)
    if len(true_coords) != len(cfg.noise_stds):
        raise ConfigError(
            "true_coords must have one entry or match noise_stds in length"
        )
    groups = [
        SyntheticGroup(
            true_coord=true_coords[i],
            noise_std=cfg.noise_stds[i],
            n_samples=cfg.n_samples,
            seed=cfg.seed + i,
        )
        for i in range(len(cfg.noise_stds))
    ]
    report = run_experiment(
        groups,
        learning_rate=cfg.learning_rate,
        max_steps=cfg.max_steps,
        adaptive_lr=cfg.adaptive_lr,
    )
    header = (
        f"{'group':<5}  {'noise_std':>9}  {'true_var':>10}  "
        f"{'learned_var':>11}  {'ratio':>7}  {'quad_frac':>9}  {'steps':>6}  status"
    )
    print(header)
    for i, row in enumerate(report.rows):
        print(
            f"{i:<5}  {row.group.noise_std:>9.4f}  {row.true_variance:>10.6f}  "
            f"{row.learned_variance:>11.6f}  {row.ratio:>7.4f}  "
            f"{row.quadratic_fraction:>9.6f}  {row.state.step:>6}  {row.state.status}"
        )
    verdict = "yes" if report.rank_agreement else "NO"
    print(f"rank agreement (noisier groups learn larger variance): {verdict}")
    if args.out:
        payload = {
            "groups": [
                {
                    "noise_std": row.group.noise_std,
                    "true_variance": row.true_variance,
                    "learned_variance": row.learned_variance,
                    "ratio": row.ratio,
                    "quadratic_fraction": row.quadratic_fraction,
                    "steps": row.state.step,
                    "status": row.state.status,
                }
                for row in report.rows
            ],
            "rank_agreement": report.rank_agreement,
        }
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
    return EXIT_OK if report.rank_agreement else EXIT_FAIL


def cmd_sweep_sigma_t(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    det_path = args.det or cfg.det
    gt_path = args.gt or cfg.gt
    if det_path is None or gt_path is None:
        print("error: sweep-sigma-t needs --det and --gt (or config keys det/gt)",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        grid = _parse_float_csv(args.grid) if args.grid else DEFAULT_SWEEP_GRID
    except ValueError as exc:
        raise ConfigError(f"bad --grid: {exc}") from exc
    for value in grid:
        if value < 0:
            raise ConfigError(f"sigma_t grid values must be >= 0, got {value!r}")
    det_records = read_detections(det_path)
    gt_records = read_ground_truths(gt_path)
    gts = [GroundTruthBox.from_record(rec) for rec in gt_records]
    base = cfg.suppress_config()
    if any(value > 0 for value in grid):
        for i, rec in enumerate(det_records, start=1):
            if rec.var is None:
                print(
                    f"error: voting sweep needs variances but record at line {i} "
                    "has no 'var'",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
    columns = ("AP", "AP50", "AP75", "AP80", "AP90")
    print(f"{'sigma_t':>8}  " + "  ".join(f"{c:>8}" for c in columns))
    for value in grid:
        if value == 0:
            scfg = replace(base, voting=False)
        else:
            scfg = replace(base, voting=True, sigma_t=value)
        refined = _suppress_records(det_records, scfg, cfg.per_class)
        result = evaluate(refined, gts, cfg.eval_config())
        cells = "  ".join(f"{_fmt_value(result.metrics[c]):>8}" for c in columns)
        print(f"{value:>8g}  {cells}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varboxes",
        description=(
            "Uncertainty-aware detection post-processing: suppression with "
            "variance voting, metrics, and loss diagnostics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("suppress", help="refine a detection file")
    p.add_argument("--in", dest="in_path", metavar="F", help="input detections (JSONL)")
    p.add_argument("--out", dest="out_path", metavar="F", help="output detections (JSONL)")
    p.add_argument("--config", metavar="F", help="flat key=value config file")
    p.add_argument("--sigma-t", dest="sigma_t", type=float, metavar="X",
                   help="voting temperature")
    p.add_argument("--soft", nargs="?", const="gaussian", default=None,
                   choices=("off", "linear", "gaussian"),
                   help="soft-NMS mode (bare --soft selects gaussian)")
    p.add_argument("--vote", choices=("on", "off"), help="toggle variance voting")
    p.set_defaults(func=cmd_suppress)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--det", metavar="F", help="detections (JSONL)")
    p.add_argument("--gt", metavar="F", help="ground truth (JSONL)")
    p.add_argument("--config", metavar="F")
    p.add_argument("--out", metavar="F", help="write metrics as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of loss gradients")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--cases", type=int, default=2000, metavar="N",
                   help="random cases per branch")
    p.add_argument("--perturb", type=float, default=0.0, metavar="X",
                   help="self-test hook: bias the analytic location gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="synthetic variance-recovery experiment")
    p.add_argument("--config", required=True, metavar="F")
    p.add_argument("--out", metavar="F", help="write the summary as JSON")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("sweep-sigma-t", help="metric table across voting temperatures")
    p.add_argument("--det", metavar="F")
    p.add_argument("--gt", metavar="F")
    p.add_argument("--grid", metavar="CSV", help="sigma_t values; 0 disables voting")
    p.add_argument("--config", metavar="F")
    p.set_defaults(func=cmd_sweep_sigma_t)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RecordParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IdMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ID_MISMATCH
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
