"""``twinctl`` command-line entry point.

Every run subcommand writes exactly one RunLog, named by UTC start time and
protocol kind, then renders its report from the stored text so that
``twinctl report`` on the same file reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import __version__, presets
from .calibration import CalibrationModel, reference_model
from .config import FrameworkConfig, load_config, with_overrides
from .errors import (DataError, MissingPrerequisiteError, SchemaVersionError, TwinError)
from .ingest import read_curves
from .protocols import (ProtocolSpec, run_calibration_sweep, run_fruit_characterization,
                        run_grasp_feedback, run_stress_test, run_tuning_validation)
from .report import build_report
from .runlog import RunLog, config_digest

log = logging.getLogger("twinctl")

CALIBRATION_SCHEMA = 1
CALIBRATION_FILE = "calibration.yaml"


# -- persistence -----------------------------------------------------------------

def save_calibration(model: CalibrationModel, path, source: str = "") -> Path:
    doc = {"schema_version": CALIBRATION_SCHEMA, "model": model.to_dict(), "source": source}
    path = Path(path)
    path.write_text(yaml.safe_dump(doc, sort_keys=True), encoding="utf-8")
    return path


def load_calibration(path) -> CalibrationModel:
    """Read a calibration file; the literal ``reference`` selects the built-in law."""
    if str(path) == "reference":
        return reference_model()
    p = Path(path)
    if not p.is_file():
        raise MissingPrerequisiteError(
            f"calibration file not found: {p} (run 'twinctl calibrate' first, or pass "
            f"--calibration reference)")
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"{p}: unreadable calibration file: {exc}") from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise DataError(f"{p}: not a calibration file")
    if doc["schema_version"] != CALIBRATION_SCHEMA:
        raise SchemaVersionError(
            f"{p}: calibration schema_version {doc['schema_version']!r} is not supported")
    return CalibrationModel.from_dict(doc["model"])


def write_runlog(rl: RunLog, out_dir, precision: int, now: Optional[datetime] = None) -> Path:
    """Write under a fresh name; an existing file is never replaced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = (now or datetime.now(timezone.utc)).strftime("%Y%m%dT%H%M%S%fZ")
    text = rl.to_text(precision)
    n = 0
    while True:
        name = f"{stamp}_{rl.kind}" + (f"-{n}" if n else "") + ".runlog"
        try:
            with open(out / name, "x", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            return out / name
        except FileExistsError:
            n += 1


def read_runlog(path) -> RunLog:
    p = Path(path)
    if not p.is_file():
        raise MissingPrerequisiteError(f"run log not found: {p}")
    return RunLog.from_text(p.read_text(encoding="utf-8"), source=str(p))


# -- argument types --------------------------------------------------------------

def positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a finite value > 0, got {text}")
    return v


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def column(text):
    """Column selector: an integer is a 0-based index, anything else a header name."""
    return int(text) if text.lstrip("-").isdigit() else text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config (default: $TWINCTL_CONFIG)")
    common.add_argument("--backend", choices=("sim", "serial"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="twinctl", description="Physical-twin test bench control.")
    ap.add_argument("--version", action="version", version=f"twinctl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("calibrate", parents=[common], help="pressure sweep and P(K) fit")
    p.add_argument("--trials", type=positive_int, default=5)
    p.add_argument("--p-start", type=float)
    p.add_argument("--p-step", type=float)
    p.add_argument("--p-end", type=float)
    p.add_argument("--preload", type=positive_float)
    p.add_argument("--indent", type=positive_float)
    p.add_argument("--calibration-out", metavar="PATH",
                   help=f"calibration file to write (default: OUT/{CALIBRATION_FILE})")

    def with_model(p):
        p.add_argument("--calibration", metavar="PATH",
                       help=f"calibration file, or 'reference' (default: OUT/{CALIBRATION_FILE})")

    p = sub.add_parser("tune", parents=[common], help="stiffness tuning validation")
    p.add_argument("--stiffness", type=positive_float, nargs="+", required=True, metavar="K")
    p.add_argument("--trials", type=positive_int, default=5)
    with_model(p)

    p = sub.add_parser("grasp", parents=[common], help="pressure feedback during grasping")
    p.add_argument("--stiffness", type=positive_float, nargs="+", default=[2.0, 2.5, 3.0],
                   metavar="K")
    p.add_argument("--trials", type=positive_int, default=5)
    p.add_argument("--firm-close", type=float)
    p.add_argument("--step", type=positive_float)
    p.add_argument("--max-step-total", type=positive_float)
    with_model(p)

    p = sub.add_parser("stress", parents=[common], help="cyclic loading drift test")
    p.add_argument("--cycles", type=positive_int, default=50)
    p.add_argument("--stiffness", type=positive_float, default=3.0, metavar="K")
    p.add_argument("--drift-preset", action="store_true",
                   help="simulate the slowly leaking chamber instead of the configured twin")
    with_model(p)

    p = sub.add_parser("characterize", parents=[common], help="fruit stiffness from CSV curves")
    p.add_argument("--input", nargs="+", required=True, metavar="CSV")
    p.add_argument("--displacement-col", type=column, default="displacement_mm")
    p.add_argument("--force-col", type=column, default="force_n")
    p.add_argument("--id-col", type=column)
    p.add_argument("--day-col", type=column)
    p.add_argument("--day", type=int, help="day for files without a day column")
    p.add_argument("--eval-depth", type=positive_float, default=3.0)

    p = sub.add_parser("report", parents=[common], help="re-render the report of a run log")
    p.add_argument("--runlog", required=True, metavar="PATH")
    return ap


# -- commands --------------------------------------------------------------------

def _context(args):
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, backend=args.backend, seed=args.seed, output_dir=args.out)
    return cfg, Path(cfg.output_dir)


def _finish(rl: RunLog, cfg: FrameworkConfig, out: Path):
    path = write_runlog(rl, out, cfg.log_precision)
    bundle = build_report(read_runlog(path), path.with_suffix(".report"))
    print(f"runlog: {path}")
    print(f"report: {bundle.directory}")
    return path, bundle


def _model(args, out: Path) -> CalibrationModel:
    return load_calibration(args.calibration or out / CALIBRATION_FILE)


def _spec(kind, trials, seed, **params):
    return ProtocolSpec.make(kind, trials=trials, seed=seed,
                             **{k: v for k, v in params.items() if v is not None})


def cmd_calibrate(args):
    cfg, out = _context(args)
    spec = _spec("calibration_sweep", args.trials, cfg.seed, p_start=args.p_start,
                 p_step=args.p_step, p_end=args.p_end, preload=args.preload, indent=args.indent)
    devices = cfg.open_devices()
    try:
        rl, _ = run_calibration_sweep(devices, spec, cfg.protocol, config_digest(cfg.to_mapping()))
    finally:
        devices.close()
    path, _ = _finish(rl, cfg, out)
    model = CalibrationModel.from_dict(rl.derived["model"])
    cal = save_calibration(model, args.calibration_out or out / CALIBRATION_FILE, path.name)
    print(f"calibration: {cal}")
    print(f"P = {model.slope_a:.4f} K + {model.intercept_b:.4f}   R^2 = {model.r_squared:.5f}   "
          f"n = {model.n_points}")


def cmd_tune(args):
    cfg, out = _context(args)
    model = _model(args, out)
    spec = _spec("tuning_validation", args.trials, cfg.seed, targets=list(args.stiffness))
    devices = cfg.open_devices()
    try:
        rl = run_tuning_validation(devices, model, spec, cfg.protocol,
                                   config_digest(cfg.to_mapping()))
    finally:
        devices.close()
    _finish(rl, cfg, out)
    print("target_N_per_mm,setpoint_kPa,mean_K,sd_K,accuracy_pct,mse,rmse")
    for s in rl.derived["summary"]:
        print(f"{s['target']:g},{s['setpoint']:.2f},{s['mean_k']:.4f},{s['sd_k']:.4f},"
              f"{s['accuracy_pct']:.2f},{s['mse']:.6f},{s['rmse']:.6f}")


def cmd_grasp(args):
    cfg, out = _context(args)
    model = _model(args, out)
    spec = _spec("grasp_feedback", args.trials, cfg.seed, targets=list(args.stiffness),
                 firm_close=args.firm_close, step=args.step, max_step_total=args.max_step_total)
    devices = cfg.open_devices()
    try:
        rl = run_grasp_feedback(devices, model, spec, cfg.protocol, config_digest(cfg.to_mapping()))
    finally:
        devices.close()
    _finish(rl, cfg, out)
    print("target_N_per_mm,compression_mm,mean_pressure_kPa,sd_pressure_kPa")
    for r in rl.derived["grasp"]:
        print(f"{r['target']:g},{r['compression']:g},{r['mean_pressure']:.4f},"
              f"{r['sd_pressure']:.4f}")


def cmd_stress(args):
    cfg, out = _context(args)
    if args.drift_preset:
        cfg = replace(cfg, twin=replace(cfg.twin, drift_kpa_per_cycle=presets.DRIFT_KPA_PER_CYCLE,
                                        seating_shift_kpa=presets.SEATING_SHIFT_KPA))
    model = _model(args, out)
    spec = _spec("stress_test", 1, cfg.seed, cycles=args.cycles, target=args.stiffness)
    devices = cfg.open_devices()
    try:
        rl, report = run_stress_test(devices, model, spec, cfg.protocol,
                                     config_digest(cfg.to_mapping()))
    finally:
        devices.close()
    _finish(rl, cfg, out)
    for k, v in report.metrics().items():
        print(f"{k},{v:.6g}")


def cmd_characterize(args):
    cfg, out = _context(args)
    dataset = []
    for path in args.input:
        dataset.extend(read_curves(path, displacement=args.displacement_col, force=args.force_col,
                                   sample_id=args.id_col, day=args.day_col, default_day=args.day))
    if not dataset:
        raise DataError("no curves found in the input files")
    spec = _spec("fruit_characterization", 1, cfg.seed, eval_depth=args.eval_depth)
    rl, stats = run_fruit_characterization(dataset, spec, drop_fraction=cfg.protocol.drop_fraction)
    _finish(rl, cfg, out)
    for e in rl.derived["errors"]:
        print(f"twinctl: skipped {e['id']}: {e['error']}", file=sys.stderr)
    print("day,mean_K_N_per_mm,sd_K_N_per_mm,n")
    for s in stats:
        sd = "" if s.single else f"{s.std_k:.2f}"
        print(f"{s.day},{s.mean_k:.2f},{sd},{s.n}")


def cmd_report(args):
    rl = read_runlog(args.runlog)
    target = Path(args.out) if args.out else Path(args.runlog).with_suffix(".report")
    bundle = build_report(rl, target)
    for name, path in sorted({**bundle.tables, **bundle.plots}.items()):
        print(f"{name}: {path}")


COMMANDS = {
    "calibrate": cmd_calibrate,
    "tune": cmd_tune,
    "grasp": cmd_grasp,
    "stress": cmd_stress,
    "characterize": cmd_characterize,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        COMMANDS[args.command](args)
    except TwinError as exc:
        print(f"twinctl: error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"twinctl: error[E_IO]: {exc}", file=sys.stderr)
        return 3 if isinstance(exc, FileNotFoundError) else 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
