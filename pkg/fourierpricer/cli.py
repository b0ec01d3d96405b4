import sys
import json
import logging
import argparse
from datetime import datetime, timezone
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

from fourierpricer import __version__
from fourierpricer.bench import (
    abs_rel_errors,
    compare_timings,
    save_regression,
    time_workload,
    timing_frame,
)
from fourierpricer.config import Config
from fourierpricer.dataset import (
    FEATURE_NAMES,
    SamplingBounds,
    decode,
    export_parquet,
    generate,
    parse_json_line,
    read_dataset,
    read_header,
)
from fourierpricer.errors import NumericError, PricingError, ValidationError
from fourierpricer.fft_batch import StrikeLadder, fft_price_ladder
from fourierpricer.levy_models import model_from_mapping, model_to_mapping
from fourierpricer.mc_oracle import McConfig, mc_price
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec
from fourierpricer.quad_pricer import QuadratureConfig, price_many, price_single
from fourierpricer.report import (
    convergence_curves,
    cv_frame,
    eta_curves,
    loss_trace_frame,
    offset_curves,
    performance_table,
    write_csv,
)
from fourierpricer.surrogates.ensembles import TreeEnsembleConfig, cross_validate_depth, fit_ensemble
from fourierpricer.surrogates.mlp import MlpArchitecture, TrainConfig, mlp_train
from fourierpricer.surrogates.model_io import SurrogateModel, data_hash, load_model, save_model
from fourierpricer.tuner import TunerGrid, benchmark_prices, reference_cases, save_report, tune

LOGGER = logging.getLogger(__name__)


class RunContext:
    def __init__(self, subcommand: str, argv: Sequence[str], config: Config):
        self.subcommand = subcommand
        self.argv = list(argv)
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs: list[str] = []
        self.seeds: dict[str, int] = {'seed': config.seed}

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents = True, exist_ok = True)
        return self.out_dir / name

    def record(self, path: Path | str) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def write_manifest(self, status: str) -> Path:
        manifest = {
            'subcommand': self.subcommand,
            'argv': self.argv,
            'config': self.config.as_dict(),
            'config_sources': self.config.sources,
            'seeds': self.seeds,
            'version': __version__,
            'started': self.started,
            'finished': datetime.now(timezone.utc).isoformat(),
            'status': status,
            'outputs': self.outputs,
        }
        path = self.path(f"manifest_{self.subcommand}.json")
        with open(path, 'w') as f:
            json.dump(manifest, f, indent = 2, default = str)
        return path


def write_json(payload: dict, path: Path) -> Path:
    with open(path, 'w') as f:
        json.dump(payload, f, indent = 2, default = str)
    return path


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument('--model', choices = ['gbm', 'heston', 'evgp'], required = True)
    for name in ('sigma', 'kappa', 'theta', 'rho', 'v0', 'nu'):
        parser.add_argument(f"--{name}", type = float)


def _add_option_args(parser: argparse.ArgumentParser, with_strike: bool = True):
    parser.add_argument('--kind', choices = [k.value for k in OptionKind], default = 'european')
    parser.add_argument('--s0', type = float, required = True)
    if with_strike:
        parser.add_argument('--k', type = float, required = True, help = 'strike price')
    parser.add_argument('--t', type = float, required = True, help = 'maturity in years')
    parser.add_argument('--r', type = float, required = True, help = 'risk-free rate')


def _model(args: argparse.Namespace):
    return model_from_mapping(vars(args))


def _option(args: argparse.Namespace) -> OptionSpec:
    return OptionSpec(kind = OptionKind.parse(args.kind), strike = args.k, s0 = args.s0, T = args.t, r = args.r)


def _quad_config(offset: OffsetKind, config: Config, B: Optional[float], N: Optional[int]) -> QuadratureConfig:
    prefix = 'soa' if offset is OffsetKind.SMOOTH else 'cma'
    return QuadratureConfig(
        offset = offset,
        B = B if B is not None else config[f"{prefix}_b"],
        N = N if N is not None else config[f"{prefix}_n"]
    )


def _mc_config(config: Config) -> McConfig:
    return McConfig(
        paths = config.mc_paths,
        steps_per_year = config.mc_steps_per_year,
        seed = config.seed,
        batch_size = config.mc_batch_size,
        workers = config.workers
    )


def run_price(args: argparse.Namespace, ctx: RunContext) -> int:
    offset = OffsetKind.parse(args.offset)
    cfg = _quad_config(offset, ctx.config, args.B, args.N)
    option, model = _option(args), _model(args)
    result = price_single(option, model, cfg)

    print(f"price {result.price:.17g}")
    frame = pd.DataFrame([{
        'kind': option.kind.value, 's0': option.s0, 'strike': option.strike, 't': option.T, 'r': option.r,
        **model_to_mapping(model), 'offset': offset.value, 'B': cfg.B, 'N': cfg.N,
        'price': result.price, 'normalized_price': result.normalized_price, 'clamped': result.clamped,
    }])
    ctx.record(write_csv(frame, ctx.path('price.csv')))
    return 0


def run_tune(args: argparse.Namespace, ctx: RunContext) -> int:
    config = ctx.config
    grid = TunerGrid(
        b_min = config.tuner_b_min, b_max = config.tuner_b_max, b_step = config.tuner_b_step,
        iota_min = config.tuner_iota_min, iota_max = config.tuner_iota_max, iota_step = config.tuner_iota_step,
        threshold_bps = config.tuner_threshold_bps
    )
    cases = reference_cases()
    benchmarks = benchmark_prices(cases, _mc_config(config))
    offsets = [OffsetKind.SMOOTH, OffsetKind.CARR_MADAN] if args.offset == 'both' else [OffsetKind.parse(args.offset)]

    for offset in offsets:
        report = tune(offset, grid, cases = cases, benchmarks = benchmarks, workers = config.workers)
        print(f"{offset.value}: B*={report.B:g} iota*={report.iota:g} N*={report.N} mean_error={report.mean_error_bps:.4f}bps")
        for path in save_report(report, ctx.out_dir):
            ctx.record(path)
    return 0


def run_fft(args: argparse.Namespace, ctx: RunContext) -> int:
    offset = OffsetKind.parse(args.offset)
    ladder = StrikeLadder.from_csv(args.ladder, kind = OptionKind.parse(args.kind), s0 = args.s0, r = args.r, T = args.t)
    B = args.B if args.B is not None else ctx.config.fft_b
    N = args.N if args.N is not None else ctx.config.fft_n
    result = fft_price_ladder(ladder, _model(args), offset, B, N, k_lower = args.k_lower,
                              flag_threshold = ctx.config.otm_flag_threshold)

    frame = pd.DataFrame({'strike': ladder.strikes, 'price': result.prices, 'flag_otm_unstable': result.flags})
    ctx.record(write_csv(frame, Path(args.out) if args.out else ctx.path('fft_prices.csv')))
    print(f"priced {len(frame)} strikes, {int(result.flags.sum())} flagged")
    return 0


def run_mc(args: argparse.Namespace, ctx: RunContext) -> int:
    cfg = _mc_config(ctx.config)
    result = mc_price(_option(args), _model(args), cfg)
    print(f"price {result.price:.17g} std_error {result.std_error:.17g} seed {result.seed}")
    payload = {'price': result.price, 'std_error': result.std_error, 'paths': result.paths, 'seed': result.seed,
               'steps_per_year': cfg.steps_per_year}
    ctx.record(write_json(payload, ctx.path('mc.json')))
    return 0


def run_gen_data(args: argparse.Namespace, ctx: RunContext) -> int:
    out = Path(args.out) if args.out else ctx.path('dataset.jsonl')
    soa_cfg = QuadratureConfig(OffsetKind.SMOOTH, ctx.config.soa_b, ctx.config.soa_n)
    summary = generate(
        args.n, SamplingBounds(), ctx.config.seed, out,
        soa_cfg = soa_cfg, shard_size = args.shard_size, workers = ctx.config.workers
    )
    ctx.record(summary.path)
    if args.parquet:
        ctx.record(export_parquet(summary.path, summary.path.with_suffix('.parquet')))
    print(f"wrote {summary.written} records, skipped {summary.skipped}")
    return 0


def _tree_config(algo: str, config: Config, max_depth: Optional[int] = None) -> TreeEnsembleConfig:
    return TreeEnsembleConfig(
        kind = algo,
        n_trees = config.n_trees,
        max_depth = max_depth or (config.rf_max_depth if algo == 'rf' else config.gbdt_max_depth),
        subsample = config.subsample,
        shrinkage = config.shrinkage,
        bins = config.bins,
        min_leaf = config.min_leaf,
        seed = config.seed,
        workers = config.workers
    )


def run_train(args: argparse.Namespace, ctx: RunContext) -> int:
    config = ctx.config
    X, y, _ = read_dataset(args.data)
    if len(y) == 0:
        raise ValidationError(f"No records in {args.data}")
    ctx.seeds['dataset_seed'] = read_header(args.data).get('seed')
    metadata: dict[str, Any] = {
        'data_hash': data_hash(X, y), 'records': int(len(y)), 'seed': config.seed,
        'dataset_seed': ctx.seeds['dataset_seed'],
    }

    if args.algo == 'nn':
        architecture = MlpArchitecture(leaky_slope = config.leaky_slope)
        train_cfg = TrainConfig(
            batch_size = config.batch_size, epochs = config.epochs, learning_rate = config.learning_rate,
            lr_decay = config.lr_decay, decay_every = config.lr_decay_every, seed = config.seed,
            log_every = config.log_every
        )
        estimator, trace = mlp_train(X, y, architecture, train_cfg)
        metadata.update(train_config = asdict(train_cfg),
                        init = 'he-uniform', final_loss = trace[-1])
        ctx.record(write_csv(loss_trace_frame(trace), ctx.path('nn_loss_trace.csv')))
    else:
        max_depth = None
        if args.cv_depths:
            max_depth, losses = cross_validate_depth(
                X, y, args.algo, args.cv_depths, folds = config.cv_folds, cfg = _tree_config(args.algo, config)
            )
            ctx.record(write_csv(cv_frame(args.algo, losses), ctx.path(f"{args.algo}_cv.csv")))
        tree_cfg = _tree_config(args.algo, config, max_depth)
        estimator = fit_ensemble(X, y, tree_cfg)
        metadata.update(tree_config = asdict(tree_cfg),
                        final_loss = float(np.mean((estimator.predict(X) - y) ** 2)))

    model = SurrogateModel(algo = args.algo, estimator = estimator, metadata = metadata)
    ctx.record(save_model(model, Path(args.out) if args.out else ctx.path(f"{args.algo}.npz")))

    if args.test_data:
        X_test, y_test, _ = read_dataset(args.test_data)
        metrics = abs_rel_errors(model.predict(X_test), y_test)
        payload = {'algo': args.algo, 'absolute': metrics.absolute, 'relative_bps': metrics.relative_bps,
                   'excluded': metrics.excluded, 'n': metrics.n}
        ctx.record(write_json(payload, ctx.path(f"{args.algo}_metrics.json")))
        print(f"{args.algo}: absolute {metrics.absolute:.6g}, relative {metrics.relative_bps:.3f} bps")
    return 0


def _read_feature_rows(path: Path) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """features and raw spots from JSON lines holding records or bare 10-slot lists"""
    if not path.exists():
        raise ValidationError(f"Input file not found: {path}")
    features, spots = [], []
    with open(path, 'r') as f:
        for line_no, line in enumerate(f, start = 1):
            line = line.strip()
            if not line:
                continue
            row = parse_json_line(line, path, line_no)
            if isinstance(row, dict):
                if row.get('header'):
                    continue
                missing = [name for name in FEATURE_NAMES if name not in row]
                if missing:
                    raise ValidationError(f"{path}:{line_no}: record is missing features {missing}")
                values = [row[name] for name in FEATURE_NAMES]
                spots.append(row.get('s0_raw'))
            elif isinstance(row, list):
                if len(row) != len(FEATURE_NAMES):
                    raise ValidationError(f"{path}:{line_no}: expected {len(FEATURE_NAMES)} features, got {len(row)}")
                values = row
                spots.append(None)
            else:
                raise ValidationError(f"{path}:{line_no}: expected a record or a feature list")
            try:
                features.append([float(v) for v in values])
            except (TypeError, ValueError) as e:
                raise ValidationError(f"{path}:{line_no}: non-numeric feature ({e})")
    has_spots = bool(spots) and all(s is not None for s in spots)
    X = np.array(features, dtype = float) if features else np.empty((0, len(FEATURE_NAMES)))
    return X, (np.array(spots, dtype = float) if has_spots else None)


def run_predict(args: argparse.Namespace, ctx: RunContext) -> int:
    model = load_model(args.model)
    X, spots = _read_feature_rows(Path(args.input))
    frame = pd.DataFrame(X, columns = list(FEATURE_NAMES))
    frame['normalized_price'] = model.predict(X) if len(X) else []
    if spots is not None and len(X):
        frame['price'] = model.predict_actual(X, spots)
    ctx.record(write_csv(frame, Path(args.out) if args.out else ctx.path('predictions.csv')))
    print(f"predicted {len(frame)} rows")
    return 0


def run_bench(args: argparse.Namespace, ctx: RunContext) -> int:
    config = ctx.config
    repetitions = args.repetitions or config.timing_repetitions
    warmups = config.timing_warmups
    soa = QuadratureConfig(OffsetKind.SMOOTH, config.soa_b, config.soa_n)
    cma = QuadratureConfig(OffsetKind.CARR_MADAN, config.cma_b, config.cma_n)
    series: dict[str, list] = {}
    comparisons: list[tuple[str, str]] = []

    if args.suite == 'soa-cma':
        cases = reference_cases()
        series['cma_obo'] = time_workload('cma_obo', lambda: [price_single(c.option, c.model, cma) for c in cases], repetitions, warmups)
        series['soa_obo'] = time_workload('soa_obo', lambda: [price_single(c.option, c.model, soa) for c in cases], repetitions, warmups)
        comparisons.append(('cma_obo', 'soa_obo'))
    elif args.suite == 'fft':
        case = reference_cases()[0]
        ladder = StrikeLadder(kind = OptionKind.EUROPEAN, s0 = 150.0, r = 0.02, T = 0.25,
                              strikes = tuple(float(k) for k in range(50, 151)))
        options = [ladder.option(k) for k in ladder.strikes]
        series['soa_obo'] = time_workload('soa_obo', lambda: [price_single(o, case.model, soa) for o in options], repetitions, warmups)
        series['soa_fft'] = time_workload('soa_fft', lambda: fft_price_ladder(ladder, case.model, OffsetKind.SMOOTH, config.soa_b, config.soa_n), repetitions, warmups)
        series['cma_fft'] = time_workload('cma_fft', lambda: fft_price_ladder(ladder, case.model, OffsetKind.CARR_MADAN, config.cma_b, config.cma_n), repetitions, warmups)
        comparisons += [('soa_obo', 'soa_fft'), ('cma_fft', 'soa_fft')]
    else:
        if not args.data or not args.models:
            raise ValidationError("The surrogates suite needs --data and --models")
        X, _, records = read_dataset(args.data)
        contracts = [decode(record.features) for record in records]
        series['soa_obo'] = time_workload('soa_obo', lambda: price_many(contracts, soa), repetitions, warmups)
        for path in args.models:
            model = load_model(path)
            label = f"{model.algo}_predict"
            series[label] = time_workload(label, lambda model = model: model.predict(X), repetitions, warmups)
            comparisons.append(('soa_obo', label))

    samples = [s for values in series.values() for s in values]
    ctx.record(write_csv(timing_frame(samples), ctx.path(f"timings_{args.suite}.csv")))
    for baseline, candidate in comparisons:
        result = compare_timings(series[baseline], series[candidate])
        ctx.record(save_regression(result, ctx.path(f"regression_{candidate}_vs_{baseline}.json"), (baseline, candidate)))
        print(f"{candidate} ~ {baseline}: beta={result.beta:.4f} se={result.std_error:.3g} p={result.p_value:.3g}")
    return 0


def run_report(args: argparse.Namespace, ctx: RunContext) -> int:
    if args.what == 'offsets':
        frame = offset_curves(np.linspace(-1.0, 1.0, 401))
    elif args.what == 'eta':
        frame = eta_curves(reference_cases(), np.linspace(0.5, 500.0, 1000))
    elif args.what == 'convergence':
        cases = reference_cases()
        benchmarks = benchmark_prices(cases, _mc_config(ctx.config))
        frame = convergence_curves(cases, benchmarks, [float(b) for b in range(10, 1010, 10)])
    else:
        rows = []
        for path in args.metrics or []:
            with open(path, 'r') as f:
                rows.append(json.load(f))
        betas = {}
        for path in args.regressions or []:
            with open(path, 'r') as f:
                regression = json.load(f)
            betas[regression['candidate'].replace('_predict', '')] = regression['beta']
        frame = performance_table([
            {'algo': row['algo'], 'absolute': row['absolute'], 'relative_bps': row['relative_bps'],
             'beta': betas.get(row['algo'], float('nan'))}
            for row in rows
        ])
    ctx.record(write_csv(frame, ctx.path(f"report_{args.what}.csv")))
    return 0


COMMANDS = {
    'price': run_price,
    'tune': run_tune,
    'fft': run_fft,
    'mc': run_mc,
    'gen-data': run_gen_data,
    'train': run_train,
    'predict': run_predict,
    'bench': run_bench,
    'report': run_report,
}

# Flags that map onto configuration keys
CONFIG_FLAGS = (
    'seed', 'workers', 'out_dir', 'log_level', 'mc_paths', 'mc_steps_per_year', 'epochs',
    'learning_rate', 'batch_size', 'n_trees', 'tuner_threshold_bps',
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = 'fourierpricer', description = 'Fourier-transform option pricing toolkit')
    parser.add_argument('--config', type = str, help = 'dotenv-style config file or a run manifest')
    parser.add_argument('--out-dir', dest = 'out_dir', type = str)
    parser.add_argument('--workers', type = int)
    parser.add_argument('--seed', type = int)
    parser.add_argument('--log-level', dest = 'log_level', choices = ['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest = 'command', required = True)

    price = sub.add_parser('price', help = 'price one option by quadrature')
    _add_model_args(price)
    _add_option_args(price)
    price.add_argument('--offset', default = 'smooth')
    price.add_argument('--B', type = float)
    price.add_argument('--N', type = int)

    tune_parser = sub.add_parser('tune', help = 'grid search for (B, N)')
    tune_parser.add_argument('--offset', default = 'both')
    tune_parser.add_argument('--mc-paths', dest = 'mc_paths', type = int)
    tune_parser.add_argument('--threshold-bps', dest = 'tuner_threshold_bps', type = float)

    fft = sub.add_parser('fft', help = 'price a strike ladder with one FFT')
    _add_model_args(fft)
    _add_option_args(fft, with_strike = False)
    fft.add_argument('--ladder', required = True, help = 'CSV with one strike per row')
    fft.add_argument('--offset', default = 'smooth')
    fft.add_argument('--B', type = float)
    fft.add_argument('--N', type = int)
    fft.add_argument('--k-lower', dest = 'k_lower', type = float)
    fft.add_argument('--out', type = str)

    mc = sub.add_parser('mc', help = 'Monte Carlo benchmark price')
    _add_model_args(mc)
    _add_option_args(mc)
    mc.add_argument('--paths', dest = 'mc_paths', type = int)
    mc.add_argument('--steps-per-year', dest = 'mc_steps_per_year', type = int)

    gen = sub.add_parser('gen-data', help = 'generate a labelled dataset')
    gen.add_argument('--n', type = int, required = True)
    gen.add_argument('--out', type = str)
    gen.add_argument('--shard-size', dest = 'shard_size', type = int, default = 10_000)
    gen.add_argument('--parquet', action = 'store_true')

    train = sub.add_parser('train', help = 'train a surrogate')
    train.add_argument('--algo', choices = ['nn', 'rf', 'gbdt'], required = True)
    train.add_argument('--data', required = True)
    train.add_argument('--test-data', dest = 'test_data')
    train.add_argument('--out', type = str)
    train.add_argument('--epochs', type = int)
    train.add_argument('--lr', dest = 'learning_rate', type = float)
    train.add_argument('--batch-size', dest = 'batch_size', type = int)
    train.add_argument('--n-trees', dest = 'n_trees', type = int)
    train.add_argument('--cv-depths', dest = 'cv_depths', type = int, nargs = '+')

    predict = sub.add_parser('predict', help = 'predict prices with a trained surrogate')
    predict.add_argument('--model', required = True)
    predict.add_argument('--in', dest = 'input', required = True)
    predict.add_argument('--out', type = str)

    bench = sub.add_parser('bench', help = 'timing regressions')
    bench.add_argument('--suite', choices = ['soa-cma', 'fft', 'surrogates'], required = True)
    bench.add_argument('--repetitions', type = int)
    bench.add_argument('--data', type = str)
    bench.add_argument('--models', nargs = '+')

    report = sub.add_parser('report', help = 'plot-ready and table-shaped CSV')
    report.add_argument('--what', choices = ['offsets', 'eta', 'convergence', 'performance'], required = True)
    report.add_argument('--metrics', nargs = '+')
    report.add_argument('--regressions', nargs = '+')
    return parser


def execute(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 2 on validation errors or bad usage, 3 on numeric errors
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        overrides = {key: getattr(args, key, None) for key in CONFIG_FLAGS}
        config = Config(overrides = overrides, config_file = args.config)
    except ValidationError as e:
        LOGGER.error(str(e))
        return e.exit_code

    logging.getLogger().setLevel(config.log_level)
    ctx = RunContext(args.command, argv, config)
    status, code = 'error', 1
    try:
        code = COMMANDS[args.command](args, ctx)
        status = 'ok'
    except ValidationError as e:
        LOGGER.error(f"{args.command} failed: {e}")
        status, code = 'validation-error', e.exit_code
    except NumericError as e:
        LOGGER.error(f"{args.command} failed: {e}")
        status, code = 'numeric-error', e.exit_code
    except PricingError as e:
        LOGGER.error(f"{args.command} failed: {e}")
        status, code = 'error', e.exit_code
    finally:
        ctx.write_manifest(status)
    return code


def main():
    logging.basicConfig(level = logging.INFO)
    sys.exit(execute())


if __name__ == "__main__":
    main()
