"""Regenerate the bundled 30-day toy dataset (12 ETFs, 20 stocks).

Run from the repository root:  python scripts/make_toy_data.py
The output is deterministic; the committed CSVs were produced by this script.
"""

from pathlib import Path

import numpy as np

ETFS = ["SPY", "XLB", "XLC", "XLE", "XLF", "XLI", "XLK", "XLP", "XLRE", "XLU", "XLV", "XLY"]
DAYS = 30
SEED = 20200401
OUT = Path(__file__).resolve().parents[1] / "src" / "ousynth" / "data"


def business_days(start: str, n: int) -> list[str]:
    days = np.busday_offset(np.datetime64(start), np.arange(n), roll="forward")
    return [str(d) for d in days]


def write(path: Path, dates, columns, matrix) -> None:
    lines = [",".join(["date", *columns])]
    for d, row in zip(dates, matrix):
        lines.append(",".join([d, *(f"{v:.4f}" for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main() -> None:
    rng = np.random.default_rng(SEED)
    dates = business_days("2020-04-01", DAYS)
    market = rng.normal(0.0008, 0.012, DAYS - 1)
    betas = rng.uniform(0.7, 1.3, len(ETFS) - 1)
    sector_ret = market[:, None] * betas + rng.normal(0.0, 0.007, (DAYS - 1, len(ETFS) - 1))
    etf_ret = np.column_stack([market, sector_ret])
    start = rng.uniform(40, 400, len(ETFS))
    etf_px = start * np.vstack([np.ones(len(ETFS)), np.cumprod(1 + etf_ret, axis=0)])

    n_stocks = 20
    sectors = rng.integers(1, len(ETFS), n_stocks)
    stock_ret = np.empty((DAYS - 1, n_stocks))
    for i, s in enumerate(sectors):
        stock_ret[:, i] = (
            0.0002
            + rng.uniform(0.8, 1.2) * market
            + rng.uniform(0.6, 1.4) * (etf_ret[:, s] - market)
            + rng.normal(0.0, 0.012, DAYS - 1)
        )
    stock_px = rng.uniform(20, 300, n_stocks) * np.vstack([np.ones(n_stocks), np.cumprod(1 + stock_ret, axis=0)])
    tickers = [f"S{i:02d}_{ETFS[s]}" for i, s in enumerate(sectors)]

    OUT.mkdir(parents=True, exist_ok=True)
    write(OUT / "toy_etfs.csv", dates, ETFS, etf_px)
    write(OUT / "toy_stocks.csv", dates, tickers, stock_px)


if __name__ == "__main__":
    main()
