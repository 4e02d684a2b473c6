"""File formats: JSON headers with CSV bodies.

qfc-greens/1  header JSON + sparse CSV (out_index, in_index, re, im); omitted entries are exactly zero
qfc-sweep/1   metadata.json + center_###.csv (rows = out index, columns = delays)
qfc-recon/1   recon.json + magnitude/phase/group_delay/mask CSVs ([out, center])

Floats are written with 17 significant digits, so every reader/writer pair
round-trips bit-exactly.
"""

from __future__ import annotations

import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .greens import GreensFunction
from .grids import FrequencyGrid
from .measure import DelaySweepDataset
from .recon import GAUGE_CONVENTION, ReconstructedGreens

GREENS_SCHEMA = "qfc-greens/1"
SWEEP_SCHEMA = "qfc-sweep/1"
RECON_SCHEMA = "qfc-recon/1"
FLOAT = "%.17g"


# --- generic helpers ----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")
    return path


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FormatError("file not found", path) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, row=e.lineno, column=e.colno, offset=e.pos) from None


def _require(header, key, path, kind=None):
    if key not in header:
        raise FormatError(f"missing field {key!r}", path)
    v = header[key]
    if kind is not None and not isinstance(v, kind):
        raise FormatError(f"field {key!r} has the wrong type", path)
    return v


def _check_schema(header, expected, path):
    got = header.get("schema") if isinstance(header, dict) else None
    if got != expected:
        raise FormatError(f"schema mismatch: expected {expected!r}, found {got!r}", path)


def _grid(d, path, key):
    try:
        return FrequencyGrid.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"invalid grid {key!r}: {e}", path) from None


def _write_table(path, header_fields, rows, fmt):
    path = Path(path)
    buf = _io.StringIO()
    np.savetxt(buf, rows, fmt=fmt, delimiter=",", header=",".join(header_fields), comments="")
    path.write_text(buf.getvalue())
    return path


def read_table(path, n_columns=None, expected_rows=None):
    """Parse a comma-separated table with one header row.

    Returns (header fields, float array [rows, columns]).  Framing problems
    (missing final newline, ragged rows, wrong row count) and unparsable
    numbers raise FormatError naming the 1-based row, column and byte offset.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError("file not found", path) from None
    if not raw:
        raise FormatError("empty file", path, offset=0)
    if not raw.endswith(b"\n"):
        start = raw.rfind(b"\n") + 1
        raise FormatError("truncated file: last record has no line terminator", path, row=raw.count(b"\n") + 1, offset=start)
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as e:
        raise FormatError("non-ASCII byte", path, offset=e.start) from None
    lines = text.split("\n")[:-1]
    header = lines[0].split(",")
    ncol = len(header)
    if n_columns is not None and ncol != n_columns:
        raise FormatError(f"expected {n_columns} columns, header has {ncol}", path, row=1)
    nrows = len(lines) - 1
    if expected_rows is not None and nrows != expected_rows:
        raise FormatError(f"expected {expected_rows} data rows, found {nrows}", path, row=len(lines), offset=len(raw))
    if nrows == 0:
        return header, np.zeros((0, ncol))
    try:
        data = np.loadtxt(_io.StringIO(text), delimiter=",", skiprows=1, ndmin=2, dtype=float)
        if data.shape == (nrows, ncol):
            return header, data
    except ValueError:
        pass
    # slow path: find and report the first offending field
    offset = len(lines[0]) + 1
    for r, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != ncol:
            raise FormatError(f"expected {ncol} fields, found {len(fields)}", path, row=r, offset=offset)
        for c, tok in enumerate(fields, start=1):
            try:
                float(tok)
            except ValueError:
                raise FormatError(f"not a number: {tok!r}", path, row=r, column=c, offset=offset) from None
        offset += len(line) + 1
    raise FormatError("unreadable table", path)


def write_long_csv(path, columns: dict):
    """Long-format table: one column per key, equal lengths."""
    names = list(columns)
    arrs = [np.asarray(columns[k], dtype=float).ravel() for k in names]
    n = {a.size for a in arrs}
    if len(n) != 1:
        raise ValueError("long-format columns must have equal length")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return _write_table(path, names, np.column_stack(arrs), FLOAT)


# --- Green's functions ------------------------------------------------------------

def write_greens(g: GreensFunction, path):
    """Header at ``path`` (JSON) and body next to it with suffix .csv."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = path.with_suffix(".csv")
    v = g.values
    rows, cols = np.nonzero(v)
    table = np.column_stack([rows, cols, v.real[rows, cols], v.imag[rows, cols]])
    _write_table(body, ["out_index", "in_index", "re", "im"], table, ["%d", "%d", FLOAT, FLOAT])
    header = {
        "schema": GREENS_SCHEMA,
        "label": g.label,
        "out_grid": g.out_grid.to_dict(),
        "in_grid": g.in_grid.to_dict(),
        "body": body.name,
        "nonzero": int(rows.size),
        "metadata": g.metadata,
    }
    write_json(path, header)
    return path


def read_greens(path) -> GreensFunction:
    path = Path(path)
    h = read_json(path)
    _check_schema(h, GREENS_SCHEMA, path)
    out_grid = _grid(_require(h, "out_grid", path, dict), path, "out_grid")
    in_grid = _grid(_require(h, "in_grid", path, dict), path, "in_grid")
    body = path.parent / _require(h, "body", path, str)
    fields, data = read_table(body, n_columns=4, expected_rows=_require(h, "nonzero", path, int))
    if fields != ["out_index", "in_index", "re", "im"]:
        raise FormatError("unexpected column names", body, row=1)
    v = np.zeros((out_grid.count, in_grid.count), dtype=complex)
    if data.size:
        oi = data[:, 0]
        ii = data[:, 1]
        bad = (oi != np.round(oi)) | (ii != np.round(ii)) | (oi < 0) | (ii < 0) | (oi >= out_grid.count) | (ii >= in_grid.count)
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise FormatError("index out of range", body, row=r + 2, column=1 if (oi[r] < 0 or oi[r] >= out_grid.count) else 2)
        v[oi.astype(int), ii.astype(int)] = data[:, 2] + 1j * data[:, 3]
    return GreensFunction(out_grid, in_grid, v, h.get("label", ""), h.get("metadata", {}))


# --- sweeps ------------------------------------------------------------------------

def _center_file(i):
    return f"center_{i:03d}.csv"


def write_sweep(ds: DelaySweepDataset, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    idx = np.arange(ds.out_grid.count)
    header = ["out_index"] + [FLOAT % t for t in ds.delays]
    for i in range(ds.probe_centers.size):
        name = _center_file(i)
        _write_table(d / name, header, np.column_stack([idx, ds.intensities[i]]), ["%d"] + [FLOAT] * ds.delays.size)
        files.append(name)
    meta = {
        "schema": SWEEP_SCHEMA,
        "out_grid": ds.out_grid.to_dict(),
        "probe_centers": ds.probe_centers.tolist(),
        "delays_ps": ds.delays.tolist(),
        "shear": ds.shear,
        "amplitude": ds.amplitude,
        "averages": ds.averages,
        "seed": ds.noise_seed,
        "osa_fwhm_nm": ds.osa_fwhm,
        "files": files,
        "metadata": ds.metadata,
    }
    write_json(d / "metadata.json", meta)
    return d


def ingest_sweep(directory) -> DelaySweepDataset:
    """Read a qfc-sweep/1 directory and validate it against the dataset invariants."""
    d = Path(directory)
    mpath = d / "metadata.json"
    m = read_json(mpath)
    _check_schema(m, SWEEP_SCHEMA, mpath)
    out_grid = _grid(_require(m, "out_grid", mpath, dict), mpath, "out_grid")
    centers = np.asarray(_require(m, "probe_centers", mpath, list), dtype=float)
    delays = np.asarray(_require(m, "delays_ps", mpath, list), dtype=float)
    files = _require(m, "files", mpath, list)
    if len(files) != centers.size:
        raise FormatError(f"{len(files)} data files for {centers.size} probe centers", mpath)
    if delays.size > 1 and np.any(np.diff(delays) <= 0):
        raise FormatError("delays not increasing", mpath)
    data = np.empty((centers.size, out_grid.count, delays.size))
    for i, name in enumerate(files):
        p = d / name
        fields, table = read_table(p, n_columns=delays.size + 1, expected_rows=out_grid.count)
        try:
            col_delays = np.array([float(x) for x in fields[1:]])
        except ValueError:
            raise FormatError("delay header is not numeric", p, row=1) from None
        steps = np.diff(col_delays)
        if np.any(steps <= 0):
            raise FormatError("delays not increasing", p, row=1, column=int(np.flatnonzero(steps <= 0)[0]) + 3)
        if not np.array_equal(col_delays, delays):
            raise FormatError("delay header disagrees with metadata", p, row=1)
        if not np.array_equal(table[:, 0], np.arange(out_grid.count)):
            raise FormatError("out_index column must list 0..count-1 in order", p, column=1)
        vals = table[:, 1:]
        bad = ~np.isfinite(vals) | (vals < 0)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise FormatError("negative or non-finite intensity", p, row=int(r) + 2, column=int(c) + 2)
        data[i] = vals
    return DelaySweepDataset(
        out_grid,
        centers,
        delays,
        data,
        float(_require(m, "shear", mpath)),
        float(m.get("amplitude", 1.0)),
        int(m.get("averages", 1)),
        int(m.get("seed", 0)),
        float(m.get("osa_fwhm_nm", 0.0)),
        m.get("metadata", {}),
    )


# --- reconstructions -------------------------------------------------------------------

_RECON_BODIES = ("magnitude", "phase", "group_delay", "mask")


def write_recon(rg: ReconstructedGreens, directory, summary=None):
    """qfc-recon/1 plus long-format plot tables fig5a (|G|) and fig5b (arg G)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n_c = rg.probe_centers.size
    header = ["out_index"] + [f"center_{j}" for j in range(n_c)]
    idx = np.arange(rg.out_grid.count)
    mats = {
        "magnitude": rg.magnitude,
        "phase": rg.phase,
        "group_delay": rg.group_delay,
        "mask": rg.mask.astype(float),
    }
    for name, mat in mats.items():
        fmt = ["%d"] + (["%d"] * n_c if name == "mask" else [FLOAT] * n_c)
        _write_table(d / f"{name}.csv", header, np.column_stack([idx, mat]), fmt)
    meta = {
        "schema": RECON_SCHEMA,
        "out_grid": rg.out_grid.to_dict(),
        "probe_centers": rg.probe_centers.tolist(),
        "shear": rg.shear,
        "gauge": GAUGE_CONVENTION,
        "mask_intervals": rg.mask_intervals,
        "bodies": {k: f"{k}.csv" for k in _RECON_BODIES},
        "metadata": rg.metadata,
        "summary": summary or {},
    }
    write_json(d / "recon.json", meta)
    lam_in = np.broadcast_to(rg.center_wavelength_nm[None, :], rg.magnitude.shape)
    lam_out = np.broadcast_to(rg.out_grid.wavelength_nm[:, None], rg.magnitude.shape)
    sel = rg.mask
    write_long_csv(d / "fig5a_magnitude.csv", {"lambda_in_nm": lam_in[sel], "lambda_out_nm": lam_out[sel], "value": rg.magnitude[sel]})
    write_long_csv(d / "fig5b_phase.csv", {"lambda_in_nm": lam_in[sel], "lambda_out_nm": lam_out[sel], "value": rg.phase[sel]})
    return d


def read_recon(directory) -> ReconstructedGreens:
    d = Path(directory)
    mpath = d / "recon.json"
    m = read_json(mpath)
    _check_schema(m, RECON_SCHEMA, mpath)
    out_grid = _grid(_require(m, "out_grid", mpath, dict), mpath, "out_grid")
    centers = np.asarray(_require(m, "probe_centers", mpath, list), dtype=float)
    bodies = _require(m, "bodies", mpath, dict)
    mats = {}
    for name in _RECON_BODIES:
        p = d / _require(bodies, name, mpath, str)
        _, table = read_table(p, n_columns=centers.size + 1, expected_rows=out_grid.count)
        mats[name] = table[:, 1:]
    mask = mats["mask"]
    if not np.all((mask == 0) | (mask == 1)):
        raise FormatError("mask entries must be 0 or 1", d / bodies["mask"])
    return ReconstructedGreens(
        out_grid,
        centers,
        mats["magnitude"],
        mats["phase"],
        mats["group_delay"],
        mask.astype(bool),
        float(_require(m, "shear", mpath)),
        m.get("mask_intervals", {}),
        m.get("metadata", {}),
    )


def recon_summary(path):
    """The ``summary`` block stored with a reconstruction."""
    return read_json(Path(path) / "recon.json").get("summary", {})
