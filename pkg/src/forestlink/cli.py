"""Command-line front end: fit, compare, fading, simulate, plf, models.

Every output file embeds the resolved configuration and seed so a run can be
reproduced from its artifacts alone.  Exit codes are stable: 0 ok, 2 input
error, 3 degenerate fit, 4 degenerate statistics.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import defaults
from .antenna import (
    DEFAULT_TX_POLARIZATION,
    as_polarization,
    db_from_power_ratio,
    effective_link_terms,
    polarization_loss,
    read_angular_csv,
)
from .campaign import (
    DegenerateFitError,
    LogFormatError,
    compare_models,
    fit_path_loss_model,
    read_log,
    samples_from_records,
)
from .channel import PathLossModel, RadioConfig, load_models
from .fading import (
    DegenerateDataError,
    FadingFit,
    best_fit,
    empirical_cdf,
    fade_depth,
    is_worse_than_rayleigh,
)
from .simulate import load_mission, sweep_heights, write_trace_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE_FIT = 3
EXIT_DEGENERATE_STATS = 4

FORMAT_CHOICES = ("csv", "json", "plot-data")

# below this, the 99 % fade level loses meaning
MIN_FADING_SAMPLES = 100


class _CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _config_blob(args: argparse.Namespace, extra: dict | None = None) -> dict:
    blob = {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "func" and value is not None
    }
    if extra:
        blob.update(extra)
    return blob


def _header_comment(args: argparse.Namespace, extra: dict | None = None) -> str:
    blob = _config_blob(args, extra)
    seed = blob.get("seed", "none")
    return f"forestlink {args.command} | seed={seed} | config={json.dumps(blob, sort_keys=True)}"


def _wants(args: argparse.Namespace, category: str) -> bool:
    return category in args.format


def _out_path(args: argparse.Namespace, filename: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, filename)


def _write_csv(path: str, comment: str, header: tuple, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: str, payload: dict, args: argparse.Namespace, extra: dict | None = None) -> None:
    payload = dict(payload)
    payload["config"] = _config_blob(args, extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_radio(args: argparse.Namespace) -> RadioConfig:
    if getattr(args, "radio_config", None) is None:
        return RadioConfig()
    try:
        with open(args.radio_config, "r", encoding="utf-8") as fh:
            return RadioConfig.from_dict(json.load(fh))
    except FileNotFoundError:
        raise _CliError(f"radio config {args.radio_config!r} not found", EXIT_INPUT)
    except (json.JSONDecodeError, ValueError) as exc:
        raise _CliError(f"bad radio config {args.radio_config!r}: {exc}", EXIT_INPUT)


def _resolve_model(identifier: str, registry_path: str | None) -> PathLossModel:
    """A model is either a registry name or a path to a model JSON file."""
    models = load_models(registry_path)
    for model in models:
        if model.name == identifier:
            return model
    if os.path.exists(identifier):
        with open(identifier, "r", encoding="utf-8") as fh:
            return PathLossModel.from_dict(json.load(fh))
    known = ", ".join(m.name for m in models)
    raise _CliError(f"unknown model {identifier!r} (known: {known})", EXIT_INPUT)


def _read_records(args: argparse.Namespace):
    sidecars = getattr(args, "sidecar", None) or []
    if args.schema == "geo" and len(sidecars) not in (1, len(args.logs)):
        raise _CliError(
            f"geo schema needs one --sidecar total or one per log file "
            f"(got {len(sidecars)} for {len(args.logs)} logs)",
            EXIT_INPUT,
        )
    records = []
    for index, path in enumerate(args.logs):
        sidecar = None
        if sidecars:
            sidecar = sidecars[0] if len(sidecars) == 1 else sidecars[index]
        records.extend(read_log(path, args.schema, sidecar))
    suspicious = sum(r.suspicious for r in records)
    if suspicious:
        print(
            f"warning: {suspicious} record(s) carry an exactly-zero RSSI "
            "(likely missing data)",
            file=sys.stderr,
        )
    return records


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fit(args: argparse.Namespace) -> int:
    radio = _load_radio(args)
    records = _read_records(args)
    samples = samples_from_records(records, radio, args.wavelength_m)
    fit = fit_path_loss_model(samples, args.name, args.bin_width_m)
    comment = _header_comment(args)
    if _wants(args, "json"):
        _write_json(_out_path(args, "model.json"), fit.to_dict(), args)
    if _wants(args, "csv"):
        _write_csv(
            _out_path(args, "residuals.csv"),
            comment,
            ("d3d_m", "h_m", "residual_db"),
            (
                (repr(float(d)), repr(float(h)), repr(float(r)))
                for d, h, r in zip(samples.d3d_m, samples.h_m, fit.residuals_db)
            ),
        )
        _write_csv(
            _out_path(args, "samples.csv"),
            comment,
            ("d3d_m", "h_m", "pl_db", "pl_large_db", "small_scale_db"),
            (
                (
                    repr(float(samples.d3d_m[i])),
                    repr(float(samples.h_m[i])),
                    repr(float(samples.pl_db[i])),
                    repr(float(samples.pl_large_db[i])),
                    repr(float(samples.small_scale_db[i])),
                )
                for i in range(len(samples))
            ),
        )
        _write_csv(
            _out_path(args, "rse.csv"),
            comment,
            ("d_lo_m", "d_hi_m", "h_m", "count", "rse"),
            (
                (repr(b.d_lo_m), repr(b.d_hi_m), repr(b.h_m), b.count, repr(b.rse))
                for b in fit.rse_by_bin.bins
            ),
        )
    if args.plots:
        from . import plots

        plots.render_fit(fit, samples, _out_path(args, "fit_overview.png"))
    m = fit.model
    print(
        f"fitted {m.name}: intercept {m.pl_intercept_db:.2f} dB, gamma {m.gamma:.3f}, "
        f"eta {m.eta_db_per_m:.3f} dB/m, sigma_sf {m.sigma_sf_db:.2f} dB "
        f"({fit.sample_count} samples, mean RSE {fit.rse_by_bin.mean_rse:.4f})"
    )
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    radio = _load_radio(args)
    records = _read_records(args)
    samples = samples_from_records(records, radio, args.wavelength_m)
    if args.models == "all":
        models = load_models(args.registry)
    else:
        models = [_resolve_model(name.strip(), args.registry) for name in args.models.split(",")]
    comparisons = compare_models(samples, models)
    comment = _header_comment(args)
    if _wants(args, "csv"):
        _write_csv(
            _out_path(args, "compare.csv"),
            comment,
            ("model", "median_abs_diff_db", "n"),
            ((c.name, repr(c.median_abs_diff_db), c.diffs_db.size) for c in comparisons),
        )
    if _wants(args, "plot-data"):
        rows = []
        for comp in comparisons:
            ordered = np.sort(comp.diffs_db)
            cdf = np.arange(1, ordered.size + 1) / ordered.size
            step = max(ordered.size // args.max_curve_points, 1)
            for i in range(0, ordered.size, step):
                rows.append((comp.name, repr(float(ordered[i])), repr(float(cdf[i]))))
        _write_csv(
            _out_path(args, "compare_cdf.csv"),
            comment,
            ("model", "diff_db", "cdf"),
            rows,
        )
    if args.plots:
        from . import plots

        plots.render_compare(comparisons, _out_path(args, "compare_cdf.png"))
    best = min(comparisons, key=lambda c: c.median_abs_diff_db)
    for comp in comparisons:
        marker = " <- best" if comp is best else ""
        print(f"{comp.name}: median |diff| = {comp.median_abs_diff_db:.2f} dB{marker}")
    return EXIT_OK


def _read_column(path: str, column: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            if reader.fieldnames is None or column not in reader.fieldnames:
                raise _CliError(
                    f"{path}: no column {column!r} "
                    f"(found: {', '.join(reader.fieldnames or ())})",
                    EXIT_INPUT,
                )
            values = []
            for line_no, row in enumerate(reader, start=2):
                raw = row[column]
                try:
                    values.append(float(raw))
                except (TypeError, ValueError):
                    raise _CliError(
                        f"{path}:{line_no}: bad value {raw!r} for {column}", EXIT_INPUT
                    )
    except FileNotFoundError:
        raise _CliError(f"input file {path!r} not found", EXIT_INPUT)
    if not values:
        raise _CliError(f"{path}: no data rows", EXIT_INPUT)
    return np.asarray(values)


def _cmd_fading(args: argparse.Namespace) -> int:
    small_scale_db = _read_column(args.samples, args.column)
    envelope = 10.0 ** (small_scale_db / 20.0)
    fit = best_fit(envelope)
    magnitudes = np.abs(small_scale_db)
    low_samples = magnitudes.size < MIN_FADING_SAMPLES
    if low_samples:
        print(
            f"warning: only {magnitudes.size} samples; the 99 % fade level is unreliable",
            file=sys.stderr,
        )
    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        report = fade_depth(magnitudes)
    payload = {
        "fit": fit.to_dict(),
        "fade": report.to_dict(),
        "worse_than_rayleigh": bool(is_worse_than_rayleigh(envelope)),
        "low_sample_warning": bool(low_samples),
    }
    if _wants(args, "json"):
        _write_json(_out_path(args, "fading_fit.json"), payload, args)
    if _wants(args, "plot-data"):
        cdf = empirical_cdf(magnitudes)
        step = max(cdf.support.size // args.max_curve_points, 1)
        _write_csv(
            _out_path(args, "fading_cdf.csv"),
            _header_comment(args),
            ("magnitude_db", "cdf"),
            (
                (repr(float(cdf.support[i])), repr(float(cdf.fractions[i])))
                for i in range(0, cdf.support.size, step)
            ),
        )
    if args.plots:
        from . import plots

        plots.render_fading(small_scale_db, fit, report, _out_path(args, "fading_overview.png"))
    print(
        f"best family: {fit.family.value} {fit.params} "
        f"(loglik {fit.log_likelihood:.1f}, n={fit.sample_count}); "
        f"fade depth {report.depth_db:.2f} dB, max fade {report.max_fade_db:.2f} dB"
    )
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    radio = _load_radio(args)
    model = _resolve_model(args.model, args.registry)
    try:
        mission = load_mission(args.mission)
    except FileNotFoundError:
        raise _CliError(f"mission file {args.mission!r} not found", EXIT_INPUT)
    except (json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        raise _CliError(f"bad mission file {args.mission!r}: {exc}", EXIT_INPUT)
    fading = None
    if args.fading is not None:
        try:
            with open(args.fading, "r", encoding="utf-8") as fh:
                fading = FadingFit.from_dict(json.load(fh))
        except FileNotFoundError:
            raise _CliError(f"fading file {args.fading!r} not found", EXIT_INPUT)
        except (json.JSONDecodeError, ValueError, KeyError) as exc:
            raise _CliError(f"bad fading file {args.fading!r}: {exc}", EXIT_INPUT)
    sweep = sweep_heights(mission, model, radio, fading, args.seed)
    comment = _header_comment(args, {"radio": radio.to_dict(), "model": model.to_dict()})
    if _wants(args, "csv"):
        for trace in sweep.traces:
            write_trace_csv(
                trace, _out_path(args, f"trace_h{trace.h_m:g}.csv"), header_comment=comment
            )
        _write_csv(
            _out_path(args, "summary.csv"),
            comment,
            ("h_m", "predicted_range_m", "observed_range_m", "pdr", "sent", "delivered"),
            (
                (
                    repr(r.h_m),
                    repr(r.predicted_range_m),
                    repr(r.observed_range_m),
                    repr(r.pdr),
                    r.sent,
                    r.delivered,
                )
                for r in sweep.rows
            ),
        )
    if _wants(args, "json"):
        _write_json(
            _out_path(args, "summary.json"),
            sweep.to_dict(),
            args,
            {"radio": radio.to_dict(), "model": model.to_dict()},
        )
    if args.plots:
        from . import plots

        plots.render_simulate(sweep, radio, _out_path(args, "simulate_overview.png"))
    for row in sweep.rows:
        print(
            f"h={row.h_m:g} m: predicted range {row.predicted_range_m:.0f} m, "
            f"observed {row.observed_range_m:.0f} m, PDR {row.pdr:.3f} "
            f"({row.delivered}/{row.sent})"
        )
    return EXIT_OK


def _parse_vector(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise _CliError(
            f"polarization vector {text!r} must have three comma-separated components",
            EXIT_INPUT,
        )
    try:
        return as_polarization([complex(p.strip()) for p in parts])
    except ValueError as exc:
        raise _CliError(f"bad polarization vector {text!r}: {exc}", EXIT_INPUT)


def _cmd_plf(args: argparse.Namespace) -> int:
    tx = _parse_vector(args.tx_pol) if args.tx_pol else DEFAULT_TX_POLARIZATION
    if args.angular_csv is None and args.rx_pol is None:
        raise _CliError("plf needs either --rx-pol or --angular-csv", EXIT_INPUT)
    payload: dict = {"level": args.level}
    comment = _header_comment(args)
    if args.rx_pol is not None:
        rx = _parse_vector(args.rx_pol)
        loss = polarization_loss(tx, rx)
        payload["plf_linear"] = loss
        payload["chi_db"] = db_from_power_ratio(loss)
        print(f"polarization loss: {loss:.6f} ({payload['chi_db']:.3f} dB)")
    if args.angular_csv is not None:
        try:
            samples = read_angular_csv(args.angular_csv)
        except FileNotFoundError:
            raise _CliError(f"angular file {args.angular_csv!r} not found", EXIT_INPUT)
        except ValueError as exc:
            raise _CliError(str(exc), EXIT_INPUT)
        terms = effective_link_terms(samples, tx, args.level)
        payload.update(terms.to_dict())
        losses = np.minimum(
            np.abs(np.sum(tx[None, :] * np.conj(samples.polarization), axis=1)) ** 2, 1.0
        )
        plf_db = db_from_power_ratio(losses)
        if _wants(args, "plot-data"):
            rows = [
                (repr(float(g)), repr(float(p)))
                for g, p in zip(np.sort(samples.gain_dbi), np.sort(plf_db))
            ]
            _write_csv(
                _out_path(args, "plf_ccdf.csv"),
                comment,
                ("gain_dbi_sorted", "plf_db_sorted"),
                rows,
            )
        if args.plots:
            from . import plots

            plots.render_ccdf(
                samples.gain_dbi, plf_db, args.level, _out_path(args, "plf_ccdf.png")
            )
        print(
            f"effective terms at the {args.level:.0%} level: "
            f"g_rx = {terms.g_rx_dbi:.2f} dBi, chi = {terms.chi_db:.2f} dB"
        )
    if _wants(args, "json"):
        _write_json(_out_path(args, "plf_terms.json"), payload, args)
    return EXIT_OK


def _cmd_models(args: argparse.Namespace) -> int:
    if args.action != "list":
        raise _CliError(f"unknown models action {args.action!r}", EXIT_INPUT)
    models = load_models(args.registry)
    print(f"{'name':<22} {'PL(1m) dB':>10} {'gamma':>7} {'eta dB/m':>9} {'sigma dB':>9}")
    for m in models:
        print(
            f"{m.name:<22} {m.pl_intercept_db:>10.2f} {m.gamma:>7.2f} "
            f"{m.eta_db_per_m:>9.2f} {m.sigma_sf_db:>9.2f}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestlink",
        description="Body-to-UAV LoRa channel toolkit: fit path-loss models from "
        "signal logs, analyze fading, and simulate links.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out", help="directory for output files")
    common.add_argument(
        "--format",
        default=",".join(FORMAT_CHOICES),
        type=lambda s: tuple(s.split(",")),
        help="comma list of output families to write: csv,json,plot-data",
    )
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument(
        "--no-plots",
        dest="plots",
        action="store_false",
        help="skip figure rendering next to the delimited outputs",
    )
    common.add_argument(
        "--registry", default=None, help="path to an alternative model registry JSON"
    )
    common.add_argument(
        "--max-curve-points",
        type=int,
        default=2000,
        help="downsample emitted curve data above this many points",
    )

    ingest = argparse.ArgumentParser(add_help=False)
    ingest.add_argument("logs", nargs="+", help="input log CSV file(s)")
    ingest.add_argument(
        "--schema", choices=("range", "geo"), default="range", help="log column layout"
    )
    ingest.add_argument(
        "--sidecar",
        action="append",
        default=None,
        help="geo schema position sidecar JSON (repeat for one per log file)",
    )
    ingest.add_argument("--radio-config", default=None, help="radio config JSON")
    ingest.add_argument(
        "--wavelength-m",
        type=float,
        default=defaults.WAVELENGTH_M,
        help="carrier wavelength for the small-scale window",
    )

    p_fit = sub.add_parser("fit", parents=[common, ingest], help="fit a path-loss model from logs")
    p_fit.add_argument("--name", default="fitted", help="name for the fitted model")
    p_fit.add_argument(
        "--bin-width-m", type=float, default=10.0, help="distance bin width for the RSE table"
    )
    p_fit.set_defaults(func=_cmd_fit)

    p_cmp = sub.add_parser(
        "compare", parents=[common, ingest], help="rank models against measured losses"
    )
    p_cmp.add_argument(
        "--models",
        default="all",
        help="'all' or comma list of registry names / model JSON paths",
    )
    p_cmp.set_defaults(func=_cmd_compare)

    p_fad = sub.add_parser(
        "fading", parents=[common], help="fit fading statistics from a small-scale column"
    )
    p_fad.add_argument("samples", help="CSV file with the fading column")
    p_fad.add_argument(
        "--column", default="small_scale_db", help="name of the dB fading column"
    )
    p_fad.set_defaults(func=_cmd_fading)

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="synthesize traces and delivery summaries"
    )
    p_sim.add_argument("mission", help="mission JSON file")
    p_sim.add_argument("--model", default="mediterranean-forest", help="model name or JSON path")
    p_sim.add_argument("--radio-config", default=None, help="radio config JSON")
    p_sim.add_argument("--fading", default=None, help="fading fit JSON for small-scale draws")
    p_sim.set_defaults(func=_cmd_simulate)

    p_plf = sub.add_parser(
        "plf", parents=[common], help="polarization loss and effective antenna terms"
    )
    p_plf.add_argument("--tx-pol", default=None, help="tx polarization 'x,y,z' (complex ok)")
    p_plf.add_argument("--rx-pol", default=None, help="rx polarization 'x,y,z'")
    p_plf.add_argument("--angular-csv", default=None, help="angular sample table")
    p_plf.add_argument(
        "--level", type=float, default=defaults.GUARANTEE_LEVEL, help="guarantee level"
    )
    p_plf.set_defaults(func=_cmd_plf)

    p_mod = sub.add_parser("models", parents=[common], help="registry utilities")
    p_mod.add_argument("action", choices=("list",))
    p_mod.set_defaults(func=_cmd_models)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for fmt in args.format:
        if fmt not in FORMAT_CHOICES:
            print(f"error: unknown format {fmt!r}", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except LogFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE_FIT
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE_STATS
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
