"""``cavity-spdc`` command line.

    cavity-spdc <command> --scenario FILE --out DIR [options]

Commands: jsi, sweep, spectrum, fit, synth, schmidt. Exit status is 0 on
success, 2 for usage/configuration/data errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from . import __version__
from .dispersion import wavelength_from_omega
from .errors import CavitySPDCError, ConfigError, NoInteriorMaximum, NonConvergence
from .io import (
    atomic_write,
    histogram_csv,
    jsa_csv,
    jsi_csv,
    marginals_csv,
    read_histogram,
    schmidt_csv,
    schmidt_summary_csv,
    spectrum_csv,
)
from .scenario import Scenario, bundled_scenario_path, load_scenario
from .schmidt import schmidt_decompose
from .spectral import TWO_PI, apply_filter, build_jsa, cluster_spectrum
from .svg import heatmap_svg, line_plot_svg
from .sweep import central_mode_fraction, central_window, optimal_pulse_length, purity_sweep
from .temporal import (
    Histogram,
    cross_correlation_model,
    fit_cross_correlation,
    fit_hom,
    fit_linear_g2,
    format_bandwidth_report,
    hom_model,
    predict_g2,
)

DEFAULT_SMOKE_POINTS = 513
FIT_KINDS = ("xcorr", "hom", "g2power")


@dataclass(frozen=True)
class RunConfig:
    command: str
    scenario: str | None
    out: Path
    seed: int | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        common = {"command", "scenario", "out", "handler"}
        opts = {k: v for k, v in vars(args).items() if k not in common}
        return cls(args.command, args.scenario, Path(args.out), getattr(args, "seed", None), opts)


# ------------------------------------------------------------------------ helpers


def resolve_scenario(spec: str | None) -> Scenario:
    """A file path, or the name of a bundled scenario (paper, no_cavity, equal_fsr)."""
    spec = spec or "paper"
    path = Path(spec)
    if not path.exists() and path.suffix == "" and "/" not in spec:
        bundled = bundled_scenario_path(spec)
        if bundled.exists():
            path = bundled
    return load_scenario(path)


def _with_points(sc: Scenario, points: int) -> tuple[Scenario, str | None]:
    """``points > 0`` forces an n x n smoke grid with the resolution guard relaxed."""
    if points < 0:
        raise ConfigError("--points must be >= 0")
    if points == 0:
        return sc, None
    if points < 16:
        raise ConfigError("--points must be 0 or at least 16")
    note = f"note: smoke resolution {points}x{points}, linewidth guard relaxed"
    return sc.with_grid(n=points, relaxed_guard=True), note


def _tau_seconds(tau_ns: float | None, sc: Scenario) -> float | None:
    if tau_ns is None:
        return None if sc.pump.tau is None else sc.pump.tau / sc.tau_scale
    if not tau_ns > 0:
        raise ConfigError(f"pulse length must be positive, got {tau_ns} ns")
    return tau_ns * 1e-9


def _write(out: Path, name: str, data) -> Path:
    return atomic_write(out / name, data)


def _ghz(axis, center):
    return (axis - center) / TWO_PI / 1e9


def _build(sc: Scenario, tau: float | None, shape: str | None, filtered: bool):
    pump = sc.pump_for(tau, shape)
    jsa = build_jsa(sc.crystal, sc.cavity, pump, sc.grid, relaxed_guard=sc.relaxed_guard)
    if filtered:
        jsa = apply_filter(jsa, sc.etalons())
    return jsa


# ----------------------------------------------------------------------- commands


def cmd_jsi(cfg: RunConfig, log) -> int:
    o = cfg.options
    sc, note = _with_points(resolve_scenario(cfg.scenario), o["points"])
    if note:
        log(note)
    tau = _tau_seconds(o["tau_ns"], sc)
    jsa = _build(sc, tau, o["shape"], o["filtered"])
    written = [
        _write(cfg.out, "jsi.csv", jsi_csv(jsa)),
        _write(cfg.out, "marginals.csv", marginals_csv(jsa)),
    ]
    if o["complex"]:
        written.append(_write(cfg.out, "jsa.csv", jsa_csv(jsa)))
    g = jsa.grid
    label = f"{sc.name}: JSI" + (f", {tau * 1e9:.3g} ns" if tau else "") + (
        ", filtered" if o["filtered"] else "")
    svg = heatmap_svg(
        jsa.intensity.T,  # rows = idler (vertical), columns = signal
        _ghz(jsa.signal_axis, g.signal_center),
        _ghz(jsa.idler_axis, g.idler_center),
        "signal detuning (GHz)", "idler detuning (GHz)", label,
    )
    written.append(_write(cfg.out, "jsi.svg", svg))
    for p in written:
        log(f"wrote {p}")
    return 0


def _parse_taus(o) -> list[float]:
    if o["taus_ns"]:
        try:
            taus = [float(t) for t in o["taus_ns"].split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"--taus-ns must be a comma-separated list, got {o['taus_ns']!r}")
    else:
        lo, hi, step = o["tau_min_ns"], o["tau_max_ns"], o["tau_step_ns"]
        if not step > 0:
            raise ConfigError("--tau-step-ns must be positive")
        if hi < lo:
            raise ConfigError("--tau-max-ns must not be below --tau-min-ns")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        taus = [round(lo + k * step, 9) for k in range(n)]
    if not taus:
        raise ConfigError("empty pulse-length list")
    if any(not t > 0 for t in taus):
        raise ConfigError("pulse lengths must be positive")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("pulse lengths must be strictly increasing")
    return [t * 1e-9 for t in taus]


def cmd_sweep(cfg: RunConfig, log) -> int:
    o = cfg.options
    taus = _parse_taus(o)
    sc, note = _with_points(resolve_scenario(cfg.scenario), o["points"])
    if note:
        log(note)
    workers = o["workers"] or None
    table = purity_sweep(sc, taus, o["shape"], o["filtered"], workers=workers)
    written = [_write(cfg.out, "sweep.csv", table.to_csv())]
    series = [(f"{o['shape']} pump", table.taus * 1e9, table.purities)]
    compare = o["compare_shape"]
    if compare != "none" and compare != o["shape"]:
        other = purity_sweep(sc, taus, compare, o["filtered"], workers=workers)
        written.append(_write(cfg.out, f"sweep_{compare}.csv", other.to_csv()))
        series.append((f"{compare} pump", other.taus * 1e9, other.purities))
    title = f"{sc.name}: purity, " + ("filtered" if o["filtered"] else "unfiltered")
    svg = line_plot_svg(series, "pump pulse length (ns)", "spectral purity P", title,
                        markers=True)
    written.append(_write(cfg.out, "sweep.svg", svg))
    if o["optimum"]:
        try:
            tau_opt, p_opt = optimal_pulse_length(sc, o["shape"], o["filtered"])
            text = f"status=interior\ntau_p_ns={tau_opt * 1e9:.6f}\nP={p_opt:.10f}\n"
        except NoInteriorMaximum as exc:
            log(f"warning: {exc}")
            text = f"status=boundary\ntau_p_ns={exc.tau * 1e9:.6f}\nP={exc.purity:.10f}\n"
        written.append(_write(cfg.out, "optimum.txt", text))
    for p in written:
        log(f"wrote {p}")
    return 0


def cmd_spectrum(cfg: RunConfig, log) -> int:
    o = cfg.options
    if not o["span_ghz"] > 0:
        raise ConfigError("--span-ghz must be positive")
    if o["step_mhz"] is not None and not o["step_mhz"] > 0:
        raise ConfigError("--step-mhz must be positive")
    sc = resolve_scenario(cfg.scenario)
    span = o["span_ghz"] * 1e9
    half = TWO_PI * span / 2
    ends = np.array([sc.omega_s0 - half, sc.omega_s0 + half])
    for w in (ends, sc.pump.center - ends):
        sc.crystal.sellmeier.check_range(wavelength_from_omega(w), sc.crystal.temperature)
    step = None if o["step_mhz"] is None else o["step_mhz"] * 1e6
    spec = cluster_spectrum(sc.crystal, sc.cavity, sc.pump.center, sc.omega_s0, span, step)
    peak = float(spec.intensity.max())
    written = [_write(cfg.out, "spectrum.csv", spectrum_csv(spec))]
    svg = line_plot_svg(
        [("pair emission", spec.idler_detuning_hz / 1e9, spec.intensity / peak),
         ("phase-matching envelope", spec.idler_detuning_hz / 1e9,
          spec.envelope / float(spec.envelope.max()))],
        "idler detuning (GHz)", "normalised intensity", f"{sc.name}: cluster spectrum",
        ylim=(0.0, 1.05),
    )
    written.append(_write(cfg.out, "spectrum.svg", svg))
    for p in written:
        log(f"wrote {p}")
    return 0


def _report_text(kind: str, report, extra: list[str]) -> str:
    lines = [f"kind={kind}"]
    for name, value, err in zip(report.names, report.values, report.errors):
        lines.append(f"{name}={value:.10g}")
        lines.append(f"{name}_err={err:.10g}")
    lines += [
        f"rss={report.rss:.10g}",
        f"converged={str(report.converged).lower()}",
        f"iterations={report.iterations}",
        f"reliable={str(report.reliable).lower()}",
    ]
    lines += [f"flag={f}" for f in report.flags]
    lines += extra
    return "\n".join(lines) + "\n"


def cmd_fit(cfg: RunConfig, log) -> int:
    o = cfg.options
    kind = o["kind"]
    xname, hist = read_histogram(o["data"])
    weighted = not o["unweighted"]
    extra = []
    try:
        if kind == "xcorr":
            report = fit_cross_correlation(hist, weighted=weighted)
            model = cross_correlation_model(hist.centers, *report.values)
            for label, key in (("signal", "dnu_s"), ("idler", "dnu_i")):
                line = format_bandwidth_report(label, report[key])
                extra.append(f"# {line}")
                log(line)
        elif kind == "hom":
            report = fit_hom(hist, weighted=weighted)
            model = hom_model(hist.centers, *report.values)
        else:
            report = fit_linear_g2(hist.centers, hist.counts, hist.sigma)
            model = predict_g2(report, hist.centers)
            at = o["predict_mw"]
            extra.append(f"g2_at_{at:g}mw={float(predict_g2(report, at)):.10g}")
    except NonConvergence as exc:
        _write(cfg.out, "fit_report.txt", _report_text(kind, exc.report, extra))
        raise
    text = _report_text(kind, report, extra)
    resid = hist.counts - model
    lines = [f"{xname},observed,model,residual"]
    lines += [f"{x:.10e},{y:.10e},{m:.10e},{r:.10e}"
              for x, y, m, r in zip(hist.centers, hist.counts, model, resid)]
    written = [
        _write(cfg.out, "fit_report.txt", text),
        _write(cfg.out, "fit_residuals.csv", "\n".join(lines) + "\n"),
    ]
    log(text.rstrip())
    for p in written:
        log(f"wrote {p}")
    return 0


def _poisson(rng: np.random.Generator, mean: np.ndarray) -> np.ndarray:
    """Inverse-CDF Poisson draws from one uniform per bin."""
    u = rng.random(mean.size)
    return scipy.stats.poisson.ppf(u, mean).astype(np.int64)


def synth_data(kind: str, o: dict, seed: int) -> str:
    """CSV text for a synthetic dataset; the only randomness is Philox(seed)."""
    rng = np.random.Generator(np.random.Philox(seed))
    noise = not o["no_noise"]
    if kind == "xcorr":
        half = o["window_ns"] * 1e-9 / 2
        step = o["bin_ps"] * 1e-12
        n = int(round(2 * half / step)) + 1
        t = np.linspace(-half, half, n) + o["t0_ns"] * 1e-9
        mean = cross_correlation_model(
            t, o["dnu_s_mhz"] * 1e6, o["dnu_i_mhz"] * 1e6, o["peak_counts"],
            o["baseline_counts"], o["t0_ns"] * 1e-9,
        )
        counts = _poisson(rng, mean) if noise else mean
        return histogram_csv("time_s", Histogram(t, counts), int_counts=noise)
    if kind == "hom":
        half = o["separation_range_ns"] * 1e-9
        n = int(o["points"])
        dt = np.linspace(-half, half, n)
        mean = hom_model(dt, o["visibility"], o["width_ns"] * 1e-9, o["baseline_counts"])
        counts = _poisson(rng, mean) if noise else mean
        return histogram_csv("separation_s", Histogram(dt, counts), int_counts=noise)
    power = np.linspace(o["power_min_mw"], o["power_max_mw"], int(o["points"]))
    g2 = o["intercept"] + o["slope_per_mw"] * power
    sigma = np.full_like(g2, o["g2_sigma"])
    if noise:
        g2 = g2 + o["g2_sigma"] * scipy.stats.norm.ppf(rng.random(g2.size))
    return histogram_csv("power_mw", Histogram(power, np.abs(g2), sigma), value_name="g2",
                         int_counts=False)


def cmd_synth(cfg: RunConfig, log) -> int:
    o = cfg.options
    checks = {
        "xcorr": ("dnu_s_mhz", "dnu_i_mhz", "peak_counts", "window_ns", "bin_ps"),
        "hom": ("width_ns", "separation_range_ns", "baseline_counts"),
        "g2power": ("g2_sigma",),
    }[o["kind"]]
    for key in checks:
        if not o[key] > 0:
            raise ConfigError(f"--{key.replace('_', '-')} must be positive")
    if o["kind"] == "hom" and not 0.0 <= o["visibility"] <= 1.0:
        raise ConfigError("--visibility must lie in [0, 1]")
    if o["kind"] != "xcorr" and o["points"] < 2:
        raise ConfigError("--points must be at least 2")
    if o["seed"] < 0:
        raise ConfigError("--seed must be non-negative")
    path = _write(cfg.out, o["name"], synth_data(o["kind"], o, o["seed"]))
    log(f"wrote {path}")
    return 0


def cmd_schmidt(cfg: RunConfig, log) -> int:
    o = cfg.options
    sc, note = _with_points(resolve_scenario(cfg.scenario), o["points"])
    if note:
        log(note)
    tau = _tau_seconds(o["tau_ns"], sc)
    jsa = _build(sc, tau, o["shape"], o["filtered"])
    res = schmidt_decompose(jsa, n_modes=o["modes"])
    frac = central_mode_fraction(jsa, central_window(sc))
    summary = schmidt_summary_csv(res).rstrip("\n").split("\n")
    summary[0] += ",central_fraction"
    summary[1] += f",{frac:.10f}"
    written = [
        _write(cfg.out, "schmidt.csv", schmidt_csv(res)),
        _write(cfg.out, "schmidt_summary.csv", "\n".join(summary) + "\n"),
    ]
    if o["modes"] > 0:
        cols = ["signal_offset_hz"] + [f"abs_u{k}" for k in range(res.signal_modes.shape[1])]
        rows = [",".join(cols)]
        off = (jsa.signal_axis - jsa.grid.signal_center) / TWO_PI
        for j in range(off.size):
            rows.append(",".join([f"{off[j]:.10e}"]
                                 + [f"{abs(v):.10e}" for v in res.signal_modes[j]]))
        written.append(_write(cfg.out, "schmidt_modes.csv", "\n".join(rows) + "\n"))
    log(f"K={res.K:.6f} P={res.P:.6f} central_fraction={frac:.6f}")
    for p in written:
        log(f"wrote {p}")
    return 0


# ------------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--scenario", metavar="FILE", default=None,
        help="scenario file, or a bundled name (paper, no_cavity, equal_fsr); default: paper",
    )
    p.add_argument("--out", metavar="DIR", required=True,
                   help="output directory (created if missing); nothing is written elsewhere")


def _spectral_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-ns", type=float, default=None,
                   help="pump pulse length in ns (default: the scenario's tau_ns)")
    p.add_argument("--shape", choices=("gaussian", "square", "cw"), default=None,
                   help="pump temporal shape (default: the scenario's shape)")
    p.add_argument("--filtered", action="store_true",
                   help="apply the scenario's etalon filters before output")
    p.add_argument("--points", type=int, default=0,
                   help="force an N x N smoke grid with the linewidth guard relaxed "
                        "(0 = the scenario's guard-compliant grid)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavity-spdc",
        description="Photon-pair spectra of a doubly-resonant ppKTP cavity.",
        epilog="Exit status: 0 success, 2 usage/configuration/data error, 3 numerical failure. "
               "CAVITY_SPDC_THREADS caps sweep workers (0 = one per CPU).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}",
                        help="print the version and exit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("jsi", help="joint spectral intensity map, marginals and heatmap",
                       description="Write jsi.csv, marginals.csv and jsi.svg.")
    _common(p)
    _spectral_options(p)
    p.set_defaults(points=DEFAULT_SMOKE_POINTS)
    p.add_argument("--complex", action="store_true",
                   help="also write jsa.csv with the complex amplitude (re, im)")
    p.set_defaults(handler=cmd_jsi)

    p = sub.add_parser("sweep", help="purity versus pump pulse length",
                       description="Write sweep.csv and sweep.svg (plus the comparison curve).")
    _common(p)
    p.add_argument("--shape", choices=("gaussian", "square"), default="gaussian",
                   help="pump temporal shape of the main curve")
    p.add_argument("--compare-shape", choices=("square", "gaussian", "none"), default="square",
                   help="second pump shape overlaid on the plot (none to skip)")
    p.add_argument("--filtered", action="store_true",
                   help="apply the scenario's etalon filters")
    p.add_argument("--tau-min-ns", type=float, default=0.3, help="first pulse length (ns)")
    p.add_argument("--tau-max-ns", type=float, default=2.0, help="last pulse length (ns)")
    p.add_argument("--tau-step-ns", type=float, default=0.1, help="pulse length step (ns)")
    p.add_argument("--taus-ns", default=None,
                   help="explicit comma-separated pulse lengths in ns (overrides the range)")
    p.add_argument("--points", type=int, default=0,
                   help="force an N x N smoke grid with the linewidth guard relaxed "
                        "(0 = the scenario's guard-compliant grid)")
    p.add_argument("--workers", type=int, default=0,
                   help="parallel workers (0 = CAVITY_SPDC_THREADS or one per CPU)")
    p.add_argument("--optimum", action="store_true",
                   help="also search the optimal pulse length in [0.2, 3] ns (optimum.txt)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("spectrum", help="cluster spectrum along the cw energy line",
                       description="Write spectrum.csv and spectrum.svg.")
    _common(p)
    p.add_argument("--span-ghz", type=float, default=1200.0,
                   help="total signal detuning span in GHz, centred on the central mode")
    p.add_argument("--step-mhz", type=float, default=None,
                   help="sampling step in MHz (default: linewidth/16)")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("fit", help="fit cross-correlation, HOM or g2-versus-power data",
                       description="Write fit_report.txt (key=value) and fit_residuals.csv.")
    _common(p)
    p.add_argument("--kind", choices=FIT_KINDS, required=True, help="model family to fit")
    p.add_argument("--data", metavar="CSV", required=True,
                   help="input CSV: time_s|separation_s|power_mw, counts|g2[, sigma]")
    p.add_argument("--unweighted", action="store_true",
                   help="disable Poisson (or sigma) weighting")
    p.add_argument("--predict-mw", type=float, default=2.0,
                   help="g2power only: pump power (mW) at which to report the prediction")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("synth", help="synthetic datasets with seeded Poisson noise",
                       description="Write a synthetic data CSV (Philox generator, "
                                   "inverse-CDF Poisson sampling).")
    _common(p)
    p.add_argument("--kind", choices=FIT_KINDS, required=True, help="dataset family")
    p.add_argument("--seed", type=int, default=1, help="Philox seed (same seed, same bytes)")
    p.add_argument("--no-noise", action="store_true",
                   help="write the exact model values instead of noisy draws")
    p.add_argument("--name", default="data.csv", help="output file name inside --out")
    p.add_argument("--dnu-s-mhz", type=float, default=167.9, help="xcorr: signal bandwidth (MHz)")
    p.add_argument("--dnu-i-mhz", type=float, default=180.4, help="xcorr: idler bandwidth (MHz)")
    p.add_argument("--peak-counts", type=float, default=1e4,
                   help="xcorr: peak counts above baseline")
    p.add_argument("--t0-ns", type=float, default=0.0, help="xcorr: peak position (ns)")
    p.add_argument("--window-ns", type=float, default=16.0,
                   help="xcorr: total histogram window (ns)")
    p.add_argument("--bin-ps", type=float, default=50.0, help="xcorr: bin width (ps)")
    p.add_argument("--baseline-counts", type=float, default=None,
                   help="xcorr: accidental baseline (default 100); "
                        "hom: rate far from the dip (default 1e4)")
    p.add_argument("--visibility", type=float, default=0.912, help="hom: dip visibility")
    p.add_argument("--width-ns", type=float, default=1.3, help="hom: dip half-width (ns)")
    p.add_argument("--separation-range-ns", type=float, default=8.0,
                   help="hom: scan from -range to +range (ns)")
    p.add_argument("--points", type=int, default=41, help="hom/g2power: number of points")
    p.add_argument("--intercept", type=float, default=0.004,
                   help="g2power: zero-power heralded g2")
    p.add_argument("--slope-per-mw", type=float, default=0.011,
                   help="g2power: g2 increase per mW")
    p.add_argument("--power-min-mw", type=float, default=0.2, help="g2power: lowest power (mW)")
    p.add_argument("--power-max-mw", type=float, default=2.0, help="g2power: highest power (mW)")
    p.add_argument("--g2-sigma", type=float, default=0.002,
                   help="g2power: gaussian noise / stated uncertainty per point")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("schmidt", help="Schmidt spectrum of one JSA",
                       description="Write schmidt.csv (k, lambda) and schmidt_summary.csv.")
    _common(p)
    _spectral_options(p)
    p.add_argument("--modes", type=int, default=0,
                   help="also write |u_k| of the leading N signal modes (schmidt_modes.csv)")
    p.set_defaults(handler=cmd_schmidt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and args.baseline_counts is None:
        args.baseline_counts = 100.0 if args.kind == "xcorr" else 1e4
    cfg = RunConfig.from_args(args)

    def log(msg):
        print(msg, file=sys.stderr)

    try:
        return args.handler(cfg, log)
    except CavitySPDCError as exc:
        log(f"cavity-spdc {cfg.command}: error: {exc}")
        return exc.exit_code
    except ValueError as exc:
        log(f"cavity-spdc {cfg.command}: error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
