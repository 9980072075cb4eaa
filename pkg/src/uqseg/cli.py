"""Command-line front end.

    uqseg phantom --kind head --count 20 --seed 1 --out data/
    uqseg run --dataset data/ --method tta --samples 8 --seed 42 --out results/
    uqseg analyze --results results/ --out reports/
    uqseg serve --results results/ --port 8400 --decisions decisions.ndjson

Exit codes: 0 success, 1 usage, 2 data/format error, 3 predictor error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from .analysis import batch_report, report_csv, unc_error_histogram
from .errors import DataError, FormatError, PredictorError, UqsegError
from .phantom import generate_dataset
from .pipeline import RunConfig, load_records, run
from .raster import load_mask, load_uncertainty_map, save_heatmap_pgm
from .uncertainty import MAP_KINDS


class _Parser(argparse.ArgumentParser):
    # exit 1 on usage errors (argparse defaults to 2, which we reserve for data errors)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uqseg",
                     description="Uncertainty-aware segmentation measurement toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="generate a synthetic phantom dataset")
    p.add_argument("--kind", required=True, choices=["head", "femur"])
    p.add_argument("--count", required=True, type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=0.02,
                   help="additive Gaussian noise sigma (default 0.02)")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("run", help="run the segmentation pipeline over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=["baseline", "tta", "mcd"], default="baseline")
    p.add_argument("--samples", type=_positive_int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file: predictor, priors, threshold, ood_threshold")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive_int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="reports and histograms over run results")
    p.add_argument("--results", required=True)
    p.add_argument("--bin-width", type=float, default=0.05)
    p.add_argument("--unc-kind", choices=list(MAP_KINDS), default="data",
                   help="uncertainty raster feeding the histogram (default data)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="start the review service over run results")
    p.add_argument("--results", required=True)
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--decisions", required=True, help="NDJSON decision log path")
    p.add_argument("--ui", help="directory with the built review UI (served at /)")
    p.set_defaults(func=cmd_serve)
    return parser


def cmd_phantom(args) -> int:
    generate_dataset(args.kind, args.count, args.seed, args.out,
                     noise_sigma=args.noise)
    print(f"wrote {args.count} {args.kind} cases to {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"no config file at {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})")
    overrides = {"method": args.method, "samples": args.samples, "seed": args.seed}
    if args.workers:
        overrides["workers"] = args.workers
    config = RunConfig.from_dict(cfg, **overrides)
    summary = run(args.dataset, args.out, config)
    print(f"processed {summary['n_cases']} cases "
          f"({summary['n_flagged']} flagged) into {args.out}")
    if summary["predictor_failures"]:
        print("predictor failures: " + ", ".join(summary["predictor_failures"]),
              file=sys.stderr)
        return 3
    return 0


def cmd_analyze(args) -> int:
    results = Path(args.results)
    records = load_records(results)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = batch_report(records)
    _write_text(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_text(out / "report.csv", report_csv(report))

    hist_cases = []
    for rec in records:
        case_dir = results / rec.meta.case_id
        if (rec.error is None and rec.uncertainty_paths
                and rec.mask_path and rec.meta.gt_mask_path):
            unc = load_uncertainty_map(case_dir / rec.uncertainty_paths[args.unc_kind])
            hist_cases.append((unc, load_mask(case_dir / rec.mask_path),
                               load_mask(case_dir / rec.meta.gt_mask_path)))
    hist = unc_error_histogram(hist_cases, args.bin_width)
    _write_text(out / "histogram.json",
                json.dumps(hist.to_dict(), indent=2, sort_keys=True) + "\n")

    heat_dir = out / "heatmaps"
    heat_dir.mkdir(exist_ok=True)
    for rec in records:
        case_dir = results / rec.meta.case_id
        for kind, name in sorted(rec.uncertainty_paths.items()):
            raster = load_uncertainty_map(case_dir / name)
            save_heatmap_pgm(raster, heat_dir / f"{rec.meta.case_id}_{kind}.pgm")
    print(f"wrote report.csv, report.json, histogram.json and heatmaps to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(args.results, args.decisions, ui_dir=args.ui)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise DataError(f"cannot bind {args.host}:{args.port}: {exc}")
    finally:
        probe.close()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PredictorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UqsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
