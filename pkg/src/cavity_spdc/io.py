"""Text file formats: JSA/JSI grids, spectra, Schmidt tables, histogram input.

All writers go through :func:`atomic_write` (temp file in the target
directory, then rename). Numbers use ``repr``-stable ``%.10e`` formatting and
``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateData
from .schmidt import SchmidtResult, g2_unheralded_from_K
from .spectral import TWO_PI, ClusterSpectrum, JSAGrid, marginal
from .temporal import Histogram

FMT = "%.10e"


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _row(name: str, values) -> str:
    return name + "," + ",".join(FMT % v for v in values)


def _axes_header(jsa: JSAGrid) -> list[str]:
    g = jsa.grid
    return [
        f"signal_center_hz,{FMT % (g.signal_center / TWO_PI)}",
        f"idler_center_hz,{FMT % (g.idler_center / TWO_PI)}",
        _row("signal_offset_hz", (jsa.signal_axis - g.signal_center) / TWO_PI),
        _row("idler_offset_hz", (jsa.idler_axis - g.idler_center) / TWO_PI),
    ]


def _column_block(columns) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(columns), fmt=FMT, delimiter=",", newline="\n")
    return buf.getvalue()


def jsi_csv(jsa: JSAGrid) -> str:
    """Four axis header rows, then one ``intensity`` column in signal-major order."""
    head = "\n".join(_axes_header(jsa) + ["intensity"]) + "\n"
    return head + _column_block([jsa.intensity.ravel()])


def jsa_csv(jsa: JSAGrid) -> str:
    head = "\n".join(_axes_header(jsa) + ["re,im"]) + "\n"
    flat = jsa.amplitude.ravel()
    return head + _column_block([flat.real, flat.imag])


def read_jsa_csv(text: str):
    """Parse :func:`jsi_csv` / :func:`jsa_csv` output into (signal_hz, idler_hz, values)."""
    lines = text.splitlines()
    sig = np.array([float(v) for v in lines[2].split(",")[1:]])
    idl = np.array([float(v) for v in lines[3].split(",")[1:]])
    data = np.loadtxt(io.StringIO("\n".join(lines[5:])), delimiter=",", ndmin=2)
    if lines[4].strip() == "re,im":
        values = (data[:, 0] + 1j * data[:, 1]).reshape(sig.size, idl.size)
    else:
        values = data[:, 0].reshape(sig.size, idl.size)
    return sig, idl, values


def marginals_csv(jsa: JSAGrid) -> str:
    """Signal and idler marginals per Hz, against offsets from the band centres."""
    g = jsa.grid
    ms = marginal(jsa, "signal") * TWO_PI
    mi = marginal(jsa, "idler") * TWO_PI
    n = max(ms.size, mi.size)
    lines = ["signal_offset_hz,signal_density_per_hz,idler_offset_hz,idler_density_per_hz"]
    so = (jsa.signal_axis - g.signal_center) / TWO_PI
    io_ = (jsa.idler_axis - g.idler_center) / TWO_PI
    for k in range(n):
        a = f"{FMT % so[k]},{FMT % ms[k]}" if k < ms.size else ","
        b = f"{FMT % io_[k]},{FMT % mi[k]}" if k < mi.size else ","
        lines.append(f"{a},{b}")
    return "\n".join(lines) + "\n"


def spectrum_csv(spec: ClusterSpectrum) -> str:
    return "signal_detuning_hz,idler_detuning_hz,intensity,envelope\n" + _column_block(
        [spec.signal_detuning_hz, spec.idler_detuning_hz, spec.intensity, spec.envelope]
    )


def schmidt_csv(result: SchmidtResult) -> str:
    lines = ["k,lambda"]
    lines += [f"{k},{FMT % lam}" for k, lam in enumerate(result.lambdas)]
    return "\n".join(lines) + "\n"


def schmidt_summary_csv(result: SchmidtResult) -> str:
    K = result.K
    return f"K,P,g2_pred\n{K:.10f},{result.P:.10f},{g2_unheralded_from_K(K):.10f}\n"


# ------------------------------------------------------------------- data input

X_COLUMNS = ("time_s", "separation_s", "power_mw")


def read_histogram(path) -> tuple[str, Histogram]:
    """Read ``(time_s | separation_s | power_mw, counts [, sigma])`` CSV.

    ``g2`` is accepted as the value column for power scans.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DegenerateData(f"{path}: empty data file")
    header = [h.strip().lower() for h in rows[0]]
    if len(header) < 2 or header[0] not in X_COLUMNS or header[1] not in ("counts", "g2"):
        raise ConfigError(
            f"{path}:1: header must start with one of {X_COLUMNS} followed by counts or g2"
        )
    if len(rows) < 2:
        raise DegenerateData(f"{path}: no data rows")
    try:
        data = np.array([[float(c) for c in r[: len(header)]] for r in rows[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: rows must have {len(header)} columns")
    sigma = data[:, 2] if len(header) > 2 and header[2] == "sigma" else None
    try:
        hist = Histogram(data[:, 0], data[:, 1], sigma)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return header[0], hist


def histogram_csv(xname: str, hist: Histogram, value_name: str = "counts", int_counts=True) -> str:
    lines = [f"{xname},{value_name}" + (",sigma" if hist.sigma is not None else "")]
    for k in range(hist.counts.size):
        v = f"{int(hist.counts[k])}" if int_counts else FMT % hist.counts[k]
        line = f"{FMT % hist.centers[k]},{v}"
        if hist.sigma is not None:
            line += f",{FMT % hist.sigma[k]}"
        lines.append(line)
    return "\n".join(lines) + "\n"
