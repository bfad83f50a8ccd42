"""CSV ingestion, panel/model persistence, run manifests and report files.

Formats
-------
Price CSV (wide)
    header ``date,<ticker>,<ticker>,...``; one row per day, dates as
    ``YYYY-MM-DD``, cells positive decimals, empty cell = missing.
Panel CSV
    same layout; the index column is ``date`` for calendar panels and
    ``step`` for synthetic panels. Floats are written with ``repr`` so a
    re-read reproduces every value bit for bit.
Model JSON
    ``{"schema_version": 1, "kind": "market_model" | "apt_model", ...}``.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .apt import AptCoefficients, AptModel
from .errors import IngestError, OusynthError, SchemaError, SchemaVersionError
from .evaluate import EvalReport
from .market import MarketModel
from .ou import OuParameters
from .timeseries import PricePanel, PriceSeries, align_panel

SCHEMA_VERSION = 1
MISSING_POLICIES = ("error", "forward_fill")
_MISSING_TOKENS = {"", "na", "nan", "null", "none"}
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _fmt(x) -> str:
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- ingestion --------------------------------------------------------------


@dataclass(frozen=True)
class IngestConfig:
    path: str
    date_column: str = "date"
    tickers: tuple | None = None
    missing: str = "error"
    anchor_date: str | None = None
    market: str | None = None

    def __post_init__(self):
        if self.missing not in MISSING_POLICIES:
            raise IngestError(f"missing-data policy must be one of {MISSING_POLICIES}, got {self.missing!r}")
        if self.market is not None and not str(self.market).strip():
            raise IngestError("market ticker must be non-empty")


def _parse_date(text: str, where: str) -> np.datetime64:
    text = text.strip()
    if not _DATE_RE.match(text):
        raise IngestError(f"{where}: date {text!r} is not YYYY-MM-DD")
    try:
        return np.datetime64(dt.date.fromisoformat(text), "D")
    except ValueError as exc:
        raise IngestError(f"{where}: invalid date {text!r}") from exc


def ingest_csv(config: IngestConfig) -> list[PriceSeries]:
    """Parse a wide price CSV into one PriceSeries per ticker column.

    Rows are sorted by date. Missing cells either raise (``missing="error"``)
    or take the previous row's value (``missing="forward_fill"``). With
    ``anchor_date`` set, rows before it are dropped.
    """
    path = Path(config.path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    if not rows:
        raise IngestError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    if config.date_column not in header:
        raise IngestError(f"{path}: no date column {config.date_column!r} in header {header}")
    di = header.index(config.date_column)
    available = [h for i, h in enumerate(header) if i != di]
    tickers = list(config.tickers) if config.tickers is not None else available
    unknown = [t for t in tickers if t not in available]
    if unknown:
        raise IngestError(f"{path}: unknown ticker columns {unknown}")
    if config.market is not None and config.market not in tickers:
        raise IngestError(f"{path}: unknown market ticker {config.market!r}")
    if not tickers:
        raise IngestError(f"{path}: no ticker columns")
    cols = [header.index(t) for t in tickers]

    dates, lines, values = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        dates.append(_parse_date(row[di], f"{path}: line {lineno}"))
        lines.append(lineno)
        vals = []
        for t, ci in zip(tickers, cols):
            cell = row[ci].strip()
            if cell.lower() in _MISSING_TOKENS:
                vals.append(np.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise IngestError(f"{path}: line {lineno}, column {t!r}: unparseable cell {cell!r}") from None
            if not (v > 0 and np.isfinite(v)):
                raise IngestError(f"{path}: line {lineno}, column {t!r}: price {cell!r} is not a positive number")
            vals.append(v)
        values.append(vals)
    if not dates:
        raise IngestError(f"{path}: no data rows")

    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    lines = [lines[i] for i in order]
    matrix = np.array(values, dtype=float)[order]
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if dup.size:
        i = int(dup[0])
        raise IngestError(f"{path}: duplicate date {dates[i]} on lines {lines[i]} and {lines[i + 1]}")

    if config.anchor_date is not None:
        anchor = _parse_date(config.anchor_date, "anchor_date")
        keep = dates >= anchor
        if not keep.any():
            raise IngestError(f"{path}: no rows on or after anchor date {anchor}")
        dates, matrix = dates[keep], matrix[keep]
        lines = [ln for ln, k in zip(lines, keep) if k]

    holes = np.argwhere(np.isnan(matrix))
    if holes.size:
        if config.missing == "error":
            r, c = holes[0]
            raise IngestError(f"{path}: line {lines[r]}, column {tickers[c]!r}: missing value")
        for c in range(matrix.shape[1]):
            col = matrix[:, c]
            if np.isnan(col[0]):
                raise IngestError(f"{path}: line {lines[0]}, column {tickers[c]!r}: missing first value cannot be forward-filled")
            for r in range(1, col.size):
                if np.isnan(col[r]):
                    col[r] = col[r - 1]
    return [PriceSeries(t, dates, matrix[:, j]) for j, t in enumerate(tickers)]


# -- panels -----------------------------------------------------------------


def panel_to_csv_text(panel: PricePanel) -> str:
    calendar = np.issubdtype(panel.dates.dtype, np.datetime64)
    index_name = "date" if calendar else "step"
    rows = []
    for d, vals in zip(panel.dates, panel.matrix):
        rows.append([str(d) if calendar else str(int(d))] + [_fmt(v) for v in vals])
    return _csv_text([index_name, *panel.columns], rows)


def write_panel_csv(path, panel: PricePanel) -> None:
    atomic_write_text(path, panel_to_csv_text(panel))


def read_panel_csv(path) -> PricePanel:
    """Read a panel written by :func:`write_panel_csv` (or any complete wide CSV)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    index_name = header[0]
    if index_name not in ("date", "step"):
        raise IngestError(f"{path}: first column must be 'date' or 'step', got {index_name!r}")
    idx, data = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        if index_name == "step":
            try:
                idx.append(int(row[0]))
            except ValueError:
                raise IngestError(f"{path}: line {lineno}: bad step index {row[0]!r}") from None
        else:
            idx.append(_parse_date(row[0], f"{path}: line {lineno}"))
        try:
            data.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise IngestError(f"{path}: line {lineno}: {exc}") from None
    dates = np.array(idx, dtype=np.int64 if index_name == "step" else "datetime64[D]")
    return PricePanel(dates, tuple(header[1:]), np.array(data, dtype=float).reshape(len(idx), len(header) - 1))


def load_price_panel(path, missing: str = "error", anchor_date: str | None = None) -> PricePanel:
    """Step-indexed panels are read directly; calendar CSVs go through ingestion and alignment."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = next(csv.reader(fh), [""])
    if first and first[0].strip() == "step":
        return read_panel_csv(path)
    return align_panel(ingest_csv(IngestConfig(str(path), missing=missing, anchor_date=anchor_date)))


# -- models -----------------------------------------------------------------


def _market_to_dict(m: MarketModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "market_model",
        "column_ids": list(m.column_ids),
        "market_column": m.market_column,
        "anchor": m.anchor,
        "x0": m.x0.tolist(),
        "ou": {
            "a_matrix": m.ou.a_matrix.tolist(),
            "mu": m.ou.mu.tolist(),
            "gamma": m.ou.gamma.tolist(),
            "sigma": m.ou.sigma.tolist(),
        },
    }


def _apt_to_dict(m: AptModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "apt_model",
        "factor_ids": list(m.factor_ids),
        "stocks": [
            {
                "stock_id": c.stock_id,
                "alpha": c.alpha,
                "betas": c.betas.tolist(),
                "resid_sigma": c.resid_sigma,
                "r_squared": None if np.isnan(c.r_squared) else c.r_squared,
                "residuals": c.residuals.tolist(),
            }
            for c in m.coefficients
        ],
    }


def model_to_json(model) -> str:
    if isinstance(model, MarketModel):
        payload = _market_to_dict(model)
    elif isinstance(model, AptModel):
        payload = _apt_to_dict(model)
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return json.dumps(payload, indent=1, allow_nan=False) + "\n"


def save_model(path, model) -> None:
    atomic_write_text(path, model_to_json(model))


def _matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"corrupted field {name!r}: {exc}") from None
    return arr


def model_from_dict(payload: dict):
    if not isinstance(payload, dict):
        raise SchemaError("model file must contain a JSON object")
    version = payload.get("schema_version")
    if not isinstance(version, int):
        raise SchemaError("missing or non-integer schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"schema_version {version} is not supported (this build reads {SCHEMA_VERSION})")
    kind = payload.get("kind")
    try:
        if kind == "market_model":
            ou = payload["ou"]
            params = OuParameters(
                _matrix(ou["a_matrix"], "ou.a_matrix"),
                _matrix(ou["mu"], "ou.mu"),
                _matrix(ou["gamma"], "ou.gamma"),
                _matrix(ou["sigma"], "ou.sigma"),
            )
            return MarketModel(
                params,
                int(payload["market_column"]),
                tuple(payload["column_ids"]),
                float(payload["anchor"]),
                _matrix(payload["x0"], "x0"),
            )
        if kind == "apt_model":
            coeffs = []
            for s in payload["stocks"]:
                r2 = s.get("r_squared")
                coeffs.append(
                    AptCoefficients(
                        stock_id=s["stock_id"],
                        alpha=float(s["alpha"]),
                        betas=_matrix(s["betas"], "betas"),
                        resid_sigma=float(s["resid_sigma"]),
                        residuals=_matrix(s["residuals"], "residuals"),
                        r_squared=float("nan") if r2 is None else float(r2),
                    )
                )
            return AptModel(tuple(payload["factor_ids"]), tuple(coeffs))
    except OusynthError:
        raise
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"corrupted field: {exc}") from None
    raise SchemaError(f"unknown model kind {kind!r}")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(payload)


# -- manifests and reports --------------------------------------------------


@dataclass
class RunManifest:
    command: str
    seed: int
    steps: int | None = None
    traces: int | None = None
    noise: str | None = None
    versions: dict = field(default_factory=dict)
    input_checksums: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    started_at: str = ""
    finished_at: str = ""


def module_versions() -> dict:
    from . import __version__

    return {"ousynth": __version__, "numpy": np.__version__, "schema_version": SCHEMA_VERSION}


def utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, manifest: RunManifest) -> None:
    atomic_write_text(path, json.dumps(asdict(manifest), indent=1, sort_keys=True) + "\n")


def _safe_name(ticker: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", ticker)


def write_eval_report(report: EvalReport, out_dir) -> list[str]:
    """Emit ks.csv, moments.csv, kde_<ticker>.csv, kde2d_<market>_<sector>.csv and summary.json."""
    out = Path(out_dir)
    written = []

    def emit(name, text):
        atomic_write_text(out / name, text)
        written.append(name)

    emit(
        "ks.csv",
        _csv_text(
            ["ticker", "D", "p", "n1", "n2"],
            [[c, _fmt(r.statistic), _fmt(r.p_value), r.n1, r.n2] for c, r in report.ks.items()],
        ),
    )
    mrows = []
    for c in report.columns:
        for source, table in (("real", report.moments_real), ("synthetic", report.moments_synth)):
            m = table[c]
            mrows.append([c, source, _fmt(m.mean), _fmt(m.std), _fmt(m.skewness), _fmt(m.excess_kurtosis)])
    emit("moments.csv", _csv_text(["ticker", "source", "mean", "std", "skewness", "excess_kurtosis"], mrows))

    for c, pair in report.kde.items():
        if pair is None:
            continue
        real, syn = pair
        rows = [[_fmt(g), _fmt(a), _fmt(b)] for g, a, b in zip(real.grid, real.density, syn.density)]
        emit(f"kde_{_safe_name(c)}.csv", _csv_text(["grid", "real_density", "synth_density"], rows))

    for (mkt, sec), pair in report.kde2d.items():
        if pair is None:
            continue
        real, syn = pair
        rows = []
        for i, gx in enumerate(real.grid):
            for j, gy in enumerate(real.grid_y):
                rows.append([_fmt(gx), _fmt(gy), _fmt(real.density[i, j]), _fmt(syn.density[i, j])])
        emit(
            f"kde2d_{_safe_name(mkt)}_{_safe_name(sec)}.csv",
            _csv_text([mkt, sec, "real_density", "synth_density"], rows),
        )

    summary = {
        "schema_version": SCHEMA_VERSION,
        "market_id": report.market_id,
        "significance": report.significance,
        "pass_count": report.pass_count,
        "series_count": len(report.ks),
        "columns": list(report.columns),
    }
    emit("summary.json", json.dumps(summary, indent=1) + "\n")
    return written
