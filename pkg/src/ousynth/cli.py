"""Command-line entry point.

Seeds: ``simulate --seed S`` gives trace k the seed ``derive_seed(S, k)``;
``generate --seed S`` gives stock i the seed ``derive_seed(S, i)``;
``pipeline --seed S`` uses S for the ETF traces (identical to ``simulate``)
and ``derive_seed(S, 1, k)`` as the stock base seed for trace k. Without
``--seed`` the value of ``$OUSYNTH_SEED`` (default 0) is used.

On failure the last stderr line is ``<ErrorClass>: <message>`` and the exit
status is 1.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from importlib import resources
from pathlib import Path

from . import dataio
from .apt import NOISE_MODES, AptModel, build_factor_panel, factors_for_model, fit_apt_universe, generate_stock_universe
from .errors import AlignmentError, OusynthError, SchemaError
from .evaluate import evaluate_scenario
from .market import MarketModel, build_training_panel, fit_market, generate_etf_scenarios
from .rng import default_seed, derive_seed
from .timeseries import PricePanel, align_panel, returns_from_prices

log = logging.getLogger("ousynth")

STOCK_STREAM = 1


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def _load(path, kind):
    model = dataio.load_model(path)
    if not isinstance(model, kind):
        raise SchemaError(f"{path}: expected a {kind.__name__}, found {type(model).__name__}")
    return model


def _trace_name(k: int) -> str:
    return f"trace_{k:03d}.csv"


def _normalized(panel: PricePanel) -> PricePanel:
    return PricePanel(panel.dates, panel.columns, panel.matrix / panel.matrix[0])


def _fit_apt_from_files(etf_csv, stocks_csv, etf_model: MarketModel, fill: str, anchor_date) -> tuple[AptModel, PricePanel]:
    etfs = dataio.ingest_csv(
        dataio.IngestConfig(str(etf_csv), tickers=etf_model.column_ids, missing=fill, anchor_date=anchor_date)
    )
    stocks = dataio.ingest_csv(dataio.IngestConfig(str(stocks_csv), missing=fill, anchor_date=anchor_date))
    clash = set(etf_model.column_ids) & {s.id for s in stocks}
    if clash:
        raise AlignmentError(f"stock tickers clash with ETF tickers: {sorted(clash)}")
    joint = align_panel(etfs + stocks)
    n_etf = etf_model.dim
    etf_panel = _normalized(PricePanel(joint.dates, joint.columns[:n_etf], joint.matrix[:, :n_etf]))
    factors = build_factor_panel(etf_panel, etf_model.market_column)
    stock_returns = [returns_from_prices(joint.series(c)) for c in joint.columns[n_etf:]]
    return fit_apt_universe(stock_returns, factors), etf_panel


def cmd_estimate(args) -> None:
    series = dataio.ingest_csv(
        dataio.IngestConfig(args.input, missing=args.fill, anchor_date=args.anchor_date, market=args.market)
    )
    panel = build_training_panel(series, args.market, anchor=args.anchor)
    model = fit_market(panel, args.market, anchor=args.anchor, start=args.start)
    dataio.save_model(args.out, model)
    log.info("fitted %d-dimensional model on %d rows -> %s", model.dim, panel.shape[0], args.out)


def cmd_simulate(args) -> None:
    started = dataio.utc_now()
    model = _load(args.model, MarketModel)
    seed = _seed(args)
    panels = generate_etf_scenarios(model, args.steps, args.traces, seed)
    out = Path(args.out_dir)
    names = []
    for k, p in enumerate(panels):
        dataio.write_panel_csv(out / _trace_name(k), p)
        names.append(_trace_name(k))
    manifest = dataio.RunManifest(
        command="simulate",
        seed=seed,
        steps=args.steps,
        traces=args.traces,
        versions=dataio.module_versions(),
        input_checksums={"model": dataio.sha256_file(args.model)},
        outputs=names,
        started_at=started,
        finished_at=dataio.utc_now(),
    )
    dataio.write_manifest(out / "manifest.json", manifest)


def cmd_fit_apt(args) -> None:
    etf_model = _load(args.etf_model, MarketModel)
    apt, _ = _fit_apt_from_files(args.input, args.stocks, etf_model, args.fill, args.anchor_date)
    dataio.save_model(args.out, apt)


def cmd_generate(args) -> None:
    started = dataio.utc_now()
    apt = _load(args.apt, AptModel)
    scenario = dataio.read_panel_csv(args.etf_scenario)
    seed = _seed(args)
    stocks = generate_stock_universe(apt.coefficients, factors_for_model(apt, scenario), args.noise, seed)
    out = Path(args.out)
    dataio.write_panel_csv(out, stocks)
    manifest = dataio.RunManifest(
        command="generate",
        seed=seed,
        steps=stocks.shape[0] - 1,
        traces=1,
        noise=args.noise,
        versions=dataio.module_versions(),
        input_checksums={"apt": dataio.sha256_file(args.apt), "etf_scenario": dataio.sha256_file(args.etf_scenario)},
        outputs=[out.name],
        started_at=started,
        finished_at=dataio.utc_now(),
    )
    dataio.write_manifest(out.with_name(out.stem + ".manifest.json"), manifest)


def cmd_evaluate(args) -> None:
    real = dataio.load_price_panel(args.real, missing=args.fill)
    synth = [dataio.load_price_panel(p) for p in args.synthetic]
    report = evaluate_scenario(real, synth, significance=args.alpha, market_id=args.market)
    dataio.write_eval_report(report, args.out)
    print(f"pass_count={report.pass_count}/{len(report.ks)} alpha={args.alpha}")


def cmd_pipeline(args) -> None:
    started = dataio.utc_now()
    out = Path(args.out_dir)
    seed = _seed(args)

    series = dataio.ingest_csv(
        dataio.IngestConfig(args.input, missing=args.fill, anchor_date=args.anchor_date, market=args.market)
    )
    training = build_training_panel(series, args.market)
    model = fit_market(training, args.market, start=args.start)
    dataio.save_model(out / "model.json", model)

    apt, real_etf = _fit_apt_from_files(args.input, args.stocks, model, args.fill, args.anchor_date)
    dataio.save_model(out / "apt.json", apt)

    steps = args.steps if args.steps is not None else training.shape[0] - 1
    scenarios = generate_etf_scenarios(model, steps, args.traces, seed)
    outputs = ["model.json", "apt.json"]
    for k, scen in enumerate(scenarios):
        dataio.write_panel_csv(out / "etf" / _trace_name(k), scen)
        stocks = generate_stock_universe(
            apt.coefficients, factors_for_model(apt, scen), args.noise, derive_seed(seed, STOCK_STREAM, k)
        )
        dataio.write_panel_csv(out / "stocks" / _trace_name(k), stocks)
        outputs += [f"etf/{_trace_name(k)}", f"stocks/{_trace_name(k)}"]

    report = evaluate_scenario(real_etf, scenarios, significance=args.alpha, market_id=args.market)
    outputs += [f"eval/{n}" for n in dataio.write_eval_report(report, out / "eval")]

    manifest = dataio.RunManifest(
        command="pipeline",
        seed=seed,
        steps=steps,
        traces=args.traces,
        noise=args.noise,
        versions=dataio.module_versions(),
        input_checksums={"input": dataio.sha256_file(args.input), "stocks": dataio.sha256_file(args.stocks)},
        outputs=outputs,
        started_at=started,
        finished_at=dataio.utc_now(),
    )
    dataio.write_manifest(out / "manifest.json", manifest)
    print(f"pass_count={report.pass_count}/{len(report.ks)} alpha={args.alpha}")


def toy_data_files() -> dict[str, Path]:
    base = resources.files("ousynth") / "data"
    return {"etfs": Path(str(base / "toy_etfs.csv")), "stocks": Path(str(base / "toy_stocks.csv"))}


def cmd_export_toy(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in toy_data_files().values():
        shutil.copyfile(path, out / path.name)
        print(out / path.name)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ousynth", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def ingest_flags(sp):
        sp.add_argument("--fill", choices=dataio.MISSING_POLICIES, default="error", help="missing-data policy")
        sp.add_argument("--anchor-date", default=None, help="drop rows before this YYYY-MM-DD date")

    sp = sub.add_parser("estimate", help="fit the OU market model to an ETF price CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--market", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--anchor", type=float, default=1.0)
    sp.add_argument("--start", choices=("last", "anchor"), default="last")
    ingest_flags(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("simulate", help="generate synthetic ETF scenarios from a fitted model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--traces", type=int, default=1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit-apt", help="fit per-stock factor regressions")
    sp.add_argument("--stocks", required=True)
    sp.add_argument("--etf-model", required=True)
    sp.add_argument("--input", required=True, help="historical ETF price CSV")
    sp.add_argument("--out", required=True)
    ingest_flags(sp)
    sp.set_defaults(func=cmd_fit_apt)

    sp = sub.add_parser("generate", help="generate a synthetic stock universe from one ETF scenario")
    sp.add_argument("--apt", required=True)
    sp.add_argument("--etf-scenario", required=True)
    sp.add_argument("--noise", choices=NOISE_MODES, default="gaussian")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("evaluate", help="compare real and synthetic return distributions")
    sp.add_argument("--real", required=True)
    sp.add_argument("--synthetic", required=True, nargs="+")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--market", default=None, help="market column (default: first column)")
    sp.add_argument("--fill", choices=dataio.MISSING_POLICIES, default="error")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("pipeline", help="estimate, simulate, fit-apt, generate and evaluate in one run")
    sp.add_argument("--input", required=True)
    sp.add_argument("--stocks", required=True)
    sp.add_argument("--market", required=True)
    sp.add_argument("--steps", type=int, default=None, help="default: length of the history")
    sp.add_argument("--traces", type=int, default=1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--noise", choices=NOISE_MODES, default="gaussian")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--start", choices=("last", "anchor"), default="last")
    sp.add_argument("--out-dir", required=True)
    ingest_flags(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("export-toy", help="copy the bundled toy dataset")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_export_toy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except OusynthError as exc:
        print(f"{type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except (OSError, ValueError, TypeError) as exc:
        print(f"{type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
