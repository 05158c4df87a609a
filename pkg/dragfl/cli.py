"""
Experiment runner
-----------------
    python -m dragfl run --config cfg.json [--set key=value ...] --out DIR
    python -m dragfl compare DIR_A/manifest.json DIR_B/manifest.json ...
    python -m dragfl sweep --config cfg.json --aggregators fedavg,drag [--q 0.05,1] --out DIR

``run`` writes ``metrics.csv`` (one row per completed round) and
``manifest.json`` (echoed config, timestamps, outcome) into the output
directory. ``compare`` reports rounds used per aggregator relative to the
FedAvg run of the same experiment. ``sweep`` runs one config under several
aggregators (and optionally several heterogeneity levels) and compares them.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import pandas as pd

from . import settings, simulator
from .errors import ConfigError, DragFLError, ManifestMismatchError
from .simulator import AGGREGATORS, ExperimentConfig, RoundRecord

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["round", "train_loss", "test_accuracy", "grad_norm_sq", "mean_lambda", "max_lambda", "num_attackers"]
METRICS_FILE = "metrics.csv"
MANIFEST_FILE = "manifest.json"

# settings that must agree before rounds-to-target can be compared
_COMPARE_KEYS = ("model", "data", "seed", "target_accuracy")
_MANIFEST_KEYS = ("config", "aggregator", "outcome", "rounds_used")

EXIT_OK, EXIT_CONFIG, EXIT_OUTPUT = 0, 2, 3


@dataclass(frozen=True)
class RunManifest:
    config: dict
    started_at: str
    finished_at: str
    outcome: str  # reached_target | exhausted_rounds
    rounds_used: int
    aggregator: str
    final_test_accuracy: Optional[float]
    metrics_file: str = METRICS_FILE


# ---------------------------------
# Config
# ---------------------------------

def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, _, text = item.partition("=")
    path = key.strip().split(".")
    node = raw
    for part in path[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[path[-1]] = _parse_value(text.strip())


def parse_config(path: Optional[Union[str, Path]], overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Load a JSON config, apply ``key=value`` overrides, validate."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("config", f"file not found: {p}")
        text = p.read_text(encoding="utf-8")
        if text.strip():
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError("config", f"{p} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config", f"{p} must hold a JSON object")
    for item in overrides:
        _apply_override(raw, item)
    raw.setdefault("workers", settings.default_workers())
    return ExperimentConfig.from_dict(raw)


# ---------------------------------
# Output
# ---------------------------------

def metrics_frame(records: Sequence[RoundRecord]) -> pd.DataFrame:
    rows = [{
        "round": r.round,
        "train_loss": r.train_loss,
        "test_accuracy": r.test_accuracy,
        "grad_norm_sq": r.global_grad_norm_sq,
        "mean_lambda": r.mean_lambda,
        "max_lambda": r.max_lambda,
        "num_attackers": len(r.attackers),
    } for r in records]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_metrics(records: Sequence[RoundRecord], path: Path) -> None:
    metrics_frame(records).to_csv(path, index=False, float_format="%.17g", na_rep="", lineterminator="\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(config: ExperimentConfig, out_dir: Union[str, Path]) -> int:
    """Run one experiment and persist its metrics and manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error("cannot create output directory %s: %s", out, e)
        return EXIT_OUTPUT

    started = _now()
    logger.info("running %s for up to %d rounds (seed %d)", config.aggregator, config.T_max, config.seed)
    try:
        records = simulator.run_experiment(config)
    except DragFLError as e:
        logger.error("experiment failed: %s", e)
        return EXIT_CONFIG
    manifest = RunManifest(
        config=config.to_dict(),
        started_at=started,
        finished_at=_now(),
        outcome="reached_target" if simulator.reached_target(config, records) else "exhausted_rounds",
        rounds_used=len(records),
        aggregator=config.aggregator,
        final_test_accuracy=records[-1].test_accuracy if records else None,
    )
    try:
        write_metrics(records, out / METRICS_FILE)
        (out / MANIFEST_FILE).write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error("cannot write results to %s: %s", out, e)
        return EXIT_OUTPUT
    logger.info("%s: %s after %d rounds -> %s", config.aggregator, manifest.outcome, manifest.rounds_used, out)
    return EXIT_OK


# ---------------------------------
# Comparison
# ---------------------------------

def load_manifest(path: Union[str, Path]) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_FILE
    try:
        manifest = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ManifestMismatchError(f"manifest not found: {p}") from e
    except json.JSONDecodeError as e:
        raise ManifestMismatchError(f"{p} is not a valid manifest: {e}") from e
    if not isinstance(manifest, dict):
        raise ManifestMismatchError(f"{p} must hold a JSON object")
    for key in _MANIFEST_KEYS:
        if key not in manifest:
            raise ManifestMismatchError(f"{p} lacks {key}")
    if not isinstance(manifest["config"], dict):
        raise ManifestMismatchError(f"{p}: config must be an object")
    return manifest


def compare_table(manifests: Sequence[Union[str, Path]]) -> pd.DataFrame:
    """Rounds used per run and the ratio to the FedAvg run of the same experiment."""
    if len(manifests) < 2:
        raise ManifestMismatchError("compare needs at least two manifests")
    loaded = [(str(p), load_manifest(p)) for p in manifests]

    first_path, first = loaded[0]
    for path, m in loaded[1:]:
        for key in _COMPARE_KEYS:
            if m["config"].get(key) != first["config"].get(key):
                raise ManifestMismatchError(f"{path} and {first_path} differ in {key}")

    baselines = [m for _, m in loaded if m["aggregator"] == "fedavg"]
    if not baselines:
        raise ManifestMismatchError("no fedavg manifest among the inputs; ratios need a fedavg counterpart")
    base_rounds = baselines[0]["rounds_used"]

    rows = []
    for path, m in loaded:
        ratio = m["rounds_used"] / base_rounds if base_rounds else float("nan")
        rows.append({
            "manifest": path,
            "aggregator": m["aggregator"],
            "outcome": m["outcome"],
            "rounds_used": m["rounds_used"],
            "final_test_accuracy": m.get("final_test_accuracy"),
            "ratio_vs_fedavg": ratio,
        })
    return pd.DataFrame(rows)


def compare(manifests: Sequence[Union[str, Path]]) -> str:
    table = compare_table(manifests)
    return table.to_string(index=False, float_format=lambda x: f"{x:.3f}")


# ---------------------------------
# Sweep
# ---------------------------------

def sweep(config: ExperimentConfig, aggregators: Sequence[str], out_dir: Union[str, Path],
          q_levels: Optional[Sequence[float]] = None) -> tuple[int, list[str]]:
    """Run ``config`` once per aggregator (and heterogeneity level); return exit code and reports."""
    unknown = [agg for agg in aggregators if agg not in AGGREGATORS]
    if unknown:
        raise ConfigError("aggregators", f"unknown aggregator {unknown[0]!r}")
    out = Path(out_dir)
    reports = []
    for q in q_levels or [config.q]:
        level_dir = out / f"q{q:g}" if q_levels else out
        manifests = []
        for agg in aggregators:
            cfg = replace(config, aggregator=agg, q=q)
            code = run(cfg, level_dir / agg)
            if code != EXIT_OK:
                return code, reports
            manifests.append(level_dir / agg / MANIFEST_FILE)
        if len(manifests) >= 2 and "fedavg" in aggregators:
            reports.append(f"q = {q:g}\n{compare(manifests)}")
    return EXIT_OK, reports


# ---------------------------------
# Entry point
# ---------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dragfl", description="Federated learning simulator with DRAG aggregation.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default from DRAGFL_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="experiment JSON file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, dotted for nested keys (drag.c=0.25)")
    p_run.add_argument("--out", help="output directory (default: DRAGFL_OUTPUT_DIR)")

    p_cmp = sub.add_parser("compare", help="compare rounds-to-target across runs")
    p_cmp.add_argument("manifests", nargs="+", help="manifest.json files or run directories")

    p_sweep = sub.add_parser("sweep", help="run one config under several aggregators")
    p_sweep.add_argument("--config", help="experiment JSON file")
    p_sweep.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_sweep.add_argument("--aggregators", default="fedavg,drag", help="comma-separated list")
    p_sweep.add_argument("--q", default=None, help="comma-separated heterogeneity levels")
    p_sweep.add_argument("--out", help="output directory (default: DRAGFL_OUTPUT_DIR)")
    return parser


def _output_dir(arg: Optional[str]) -> Path:
    if arg:
        return Path(arg)
    env = settings.default_output_dir()
    if env is None:
        raise ConfigError("out", f"pass --out or set {settings.ENV_OUTPUT_DIR}")
    return env


def _parse_levels(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as e:
        raise ConfigError("q", f"expected comma-separated numbers, got {text!r}") from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    try:
        if args.command == "run":
            config = parse_config(args.config, args.overrides)
            return run(config, _output_dir(args.out))
        if args.command == "compare":
            print(compare(args.manifests))
            return EXIT_OK
        config = parse_config(args.config, args.overrides)
        q_levels = _parse_levels(args.q) if args.q else None
        code, reports = sweep(config, [a.strip() for a in args.aggregators.split(",")],
                              _output_dir(args.out), q_levels)
        for report in reports:
            print(report, end="\n\n")
        return code
    except DragFLError as e:
        logger.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
