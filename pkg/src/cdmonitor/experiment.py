"""Multi-seed training sweeps with metric snapshots, averaging, peak
detection, sample generation, and the CSV/params file formats.

A sweep runs ``num_runs`` independent trainings from seeds
``base_seed + k``.  Each run owns three decoupled RNG substreams (weight
initialization, training chains, measurement probes), so the parameter
trajectory is unaffected by how often metrics are measured, and a run is a
pure function of (config, run index).  Sweeps are therefore byte-identical
across repeats and across worker counts.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .criteria import (
    MetricsRecord,
    XiVariant,
    log_partition,
    log_unnormalized_marginal,
    mean_reconstruction_log_prob,
)
from .datasets import Dataset, generate_bars_and_stripes, generate_labeled_shifter
from .rbm import (
    NonFiniteParameterError,
    RbmParams,
    hidden_conditional_mean,
    run_gibbs_chain,
    sample_bernoulli,
    visible_conditional_mean,
)
from .training import TrainingConfig, init_params, train_epoch

logger = logging.getLogger(__name__)

# (visible units, hidden units, desk-scale epochs) per dataset.
DATASET_LAYOUTS = {"bs": (16, 8, 10000), "lse": (19, 10, 20000)}

FULL_SCALE_EPOCHS = 50000

# Centered moving-average width used for reported peaks; raw argmax is
# reported alongside.
SMOOTH_WINDOW = 5

DEFAULT_VARIANTS = (XiVariant.RANDOM_HIDDEN, XiVariant.COMPLEMENT_H1)

METRIC_NAMES = ("log_likelihood", "log_xi_random", "log_xi_complement", "log_recon_mean")

RUN_CSV_COLUMNS = (
    "epoch",
    "seed",
    "log_likelihood",
    "log_xi_random",
    "log_xi_complement",
    "log_recon_mean",
    "log_likelihood_mean",
)
MEAN_H_COLUMN = "log_xi_complement_mean_h"


class ExperimentError(RuntimeError):
    """A sweep-level failure (bad run collection, mismatched grids, ...)."""


class ParamsFormatError(ValueError):
    """A parameter file does not conform to the text format."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a sweep."""

    dataset: str
    visible: int
    hidden: int
    training: TrainingConfig
    num_runs: int = 10
    base_seed: int = 20260401
    variants_enabled: tuple[XiVariant, ...] = DEFAULT_VARIANTS
    init_std: float = 0.01
    lse_shift: str = "cyclic"

    def __post_init__(self) -> None:
        if self.dataset not in DATASET_LAYOUTS:
            raise ValueError(f"dataset must be one of {sorted(DATASET_LAYOUTS)}, got {self.dataset!r}")
        expected_visible = DATASET_LAYOUTS[self.dataset][0]
        if self.visible != expected_visible:
            raise ValueError(
                f"dataset {self.dataset!r} has {expected_visible} visible units, got {self.visible}"
            )
        if self.hidden < 1:
            raise ValueError(f"hidden must be >= 1, got {self.hidden}")
        if self.num_runs < 1:
            raise ValueError(f"num_runs must be >= 1, got {self.num_runs}")
        if not (isinstance(self.base_seed, int) and 0 <= self.base_seed < 2**64):
            raise ValueError(f"base_seed must be an integer in [0, 2^64), got {self.base_seed!r}")
        self.variants_enabled = tuple(self.variants_enabled)
        for required in DEFAULT_VARIANTS:
            if required not in self.variants_enabled:
                raise ValueError(f"variants_enabled must include {required.value!r}")
        if self.init_std < 0:
            raise ValueError(f"init_std must be >= 0, got {self.init_std}")
        if self.lse_shift not in ("cyclic", "end-off"):
            raise ValueError(f"lse_shift must be 'cyclic' or 'end-off', got {self.lse_shift!r}")

    @property
    def mean_h_enabled(self) -> bool:
        return XiVariant.COMPLEMENT_MEAN_H in self.variants_enabled


def default_config(dataset: str, **overrides) -> ExperimentConfig:
    """Desk-scale config for a dataset; keyword overrides are applied on top."""
    if dataset not in DATASET_LAYOUTS:
        raise ValueError(f"dataset must be one of {sorted(DATASET_LAYOUTS)}, got {dataset!r}")
    visible, hidden, epochs = DATASET_LAYOUTS[dataset]
    training = overrides.pop("training", None) or TrainingConfig(epochs=epochs)
    return ExperimentConfig(
        dataset=dataset, visible=visible, hidden=hidden, training=training, **overrides
    )


@dataclass
class RunResult:
    """Outcome of one seeded training run."""

    seed: int
    series: list[MetricsRecord]
    final_params: RbmParams | None
    aborted: bool = False
    abort_reason: str = ""
    n_recon_guarded: int = 0


@dataclass
class PeakReport:
    """Location of a metric's global maximum over a measurement series."""

    metric: str
    epoch_of_max: int
    max_value: float
    window: int = 1


def build_dataset(config: ExperimentConfig) -> Dataset:
    if config.dataset == "bs":
        return generate_bars_and_stripes()
    return generate_labeled_shifter(shift=config.lse_shift)


def _run_rngs(base_seed: int, run_index: int):
    """Independent substreams for (init, training, measurement)."""
    root = np.random.SeedSequence(base_seed + run_index)
    return tuple(np.random.default_rng(s) for s in root.spawn(3))


def _measure(
    params: RbmParams,
    X: np.ndarray,
    config: ExperimentConfig,
    rng: np.random.Generator,
    epoch: int,
) -> tuple[MetricsRecord, int]:
    """Snapshot all monitored quantities at the current parameters.

    Probes are rebuilt from fresh Gibbs chains every time: the diagnostic is
    a function of the evolving model, so nothing is cached across epochs.
    Draw order per snapshot is fixed (chain rounds, then the random-hidden
    uniforms) to keep the measurement stream reproducible.
    """
    count = X.shape[0]
    chain = run_gibbs_chain(params, X, config.training.n, rng)
    h_random = rng.random((count, params.num_hidden))

    log_um_x = np.sum(log_unnormalized_marginal(params, X))

    def probe_total(h_s: np.ndarray) -> float:
        Y = visible_conditional_mean(params, h_s)
        return float(log_um_x - np.sum(log_unnormalized_marginal(params, Y)))

    log_xi_random = probe_total(h_random)
    log_xi_complement = probe_total(1.0 - chain.h1)
    log_xi_mean_h = None
    if config.mean_h_enabled:
        log_xi_mean_h = probe_total(1.0 - hidden_conditional_mean(params, X))

    log_z = log_partition(params).log_z
    log_likelihood = float(log_um_x - count * log_z)
    recon_mean, guarded = mean_reconstruction_log_prob(params, X)

    record = MetricsRecord(
        epoch=epoch,
        log_likelihood=log_likelihood,
        log_xi_random=log_xi_random,
        log_xi_complement=log_xi_complement,
        log_recon_mean=recon_mean,
        log_likelihood_mean=log_likelihood / count,
        log_xi_complement_mean_h=log_xi_mean_h,
    )
    return record, guarded


def run_single(config: ExperimentConfig, run_index: int) -> RunResult:
    """One seeded run: init, train, snapshot at epoch 0 and every
    measure_every epochs (after the update)."""
    seed = config.base_seed + run_index
    data = build_dataset(config)
    X = data.matrix()
    init_rng, train_rng, measure_rng = _run_rngs(config.base_seed, run_index)
    params = init_params(config.visible, config.hidden, init_rng, config.init_std)

    series: list[MetricsRecord] = []
    guarded = 0
    record, g = _measure(params, X, config, measure_rng, epoch=0)
    series.append(record)
    guarded += g

    tc = config.training
    try:
        for epoch in range(1, tc.epochs + 1):
            params = train_epoch(params, data, tc, train_rng)
            if epoch % tc.measure_every == 0:
                record, g = _measure(params, X, config, measure_rng, epoch=epoch)
                series.append(record)
                guarded += g
    except NonFiniteParameterError as exc:
        logger.warning("run %d (seed %d) aborted at epoch %d: %s", run_index, seed, epoch, exc)
        return RunResult(
            seed=seed,
            series=series,
            final_params=None,
            aborted=True,
            abort_reason=f"epoch {epoch}: {exc}",
            n_recon_guarded=guarded,
        )
    return RunResult(seed=seed, series=series, final_params=params, n_recon_guarded=guarded)


def _run_single_packed(args) -> RunResult:
    return run_single(*args)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[RunResult]:
    """Execute all runs of a sweep; results are ordered by run index.

    Runs are independent, so ``jobs > 1`` distributes them over processes
    without changing any output.
    """
    indices = list(range(config.num_runs))
    if jobs <= 1 or config.num_runs == 1:
        return [run_single(config, k) for k in indices]
    with ProcessPoolExecutor(max_workers=min(jobs, config.num_runs)) as pool:
        return list(pool.map(_run_single_packed, [(config, k) for k in indices]))


def train_params_to_epoch(config: ExperimentConfig, run_index: int, epoch: int) -> RbmParams:
    """Reproduce run ``run_index``'s parameters as of ``epoch``.

    The training stream is independent of the measurement stream, so the
    parameter trajectory of a shorter run is a prefix of the full run's.
    """
    if not 0 <= epoch <= config.training.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.training.epochs}]")
    data = build_dataset(config)
    init_rng, train_rng, _ = _run_rngs(config.base_seed, run_index)
    params = init_params(config.visible, config.hidden, init_rng, config.init_std)
    for _ in range(epoch):
        params = train_epoch(params, data, config.training, train_rng)
    return params


def average_runs(results: list[RunResult]) -> list[MetricsRecord]:
    """Per-epoch arithmetic mean of each metric across completed runs."""
    completed = [r for r in results if not r.aborted]
    if not completed:
        raise ExperimentError("no completed runs to average")
    if len(completed) < len(results):
        logger.warning(
            "excluding %d aborted run(s) from averages", len(results) - len(completed)
        )
    grids = {tuple(rec.epoch for rec in r.series) for r in completed}
    if len(grids) != 1:
        raise ExperimentError("runs have mismatched measurement epoch grids")
    epochs = grids.pop()

    has_mean_h = all(
        rec.log_xi_complement_mean_h is not None for r in completed for rec in r.series
    )
    averaged = []
    for i, epoch in enumerate(epochs):
        rows = [r.series[i] for r in completed]
        mean_h = (
            float(np.mean([rec.log_xi_complement_mean_h for rec in rows]))
            if has_mean_h
            else None
        )
        averaged.append(
            MetricsRecord(
                epoch=epoch,
                log_likelihood=float(np.mean([rec.log_likelihood for rec in rows])),
                log_xi_random=float(np.mean([rec.log_xi_random for rec in rows])),
                log_xi_complement=float(np.mean([rec.log_xi_complement for rec in rows])),
                log_recon_mean=float(np.mean([rec.log_recon_mean for rec in rows])),
                log_likelihood_mean=float(np.mean([rec.log_likelihood_mean for rec in rows])),
                log_xi_complement_mean_h=mean_h,
            )
        )
    return averaged


def smooth_series(values, window: int) -> np.ndarray:
    """Centered moving average, truncated at the edges; window=1 is identity."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    v = np.asarray(values, dtype=np.float64)
    if window == 1:
        return v.copy()
    radius = window // 2
    out = np.empty_like(v)
    for i in range(v.size):
        out[i] = v[max(0, i - radius) : i + radius + 1].mean()
    return out


def detect_peak(series: list[MetricsRecord], metric: str, window: int = 1) -> PeakReport:
    """Epoch of the global maximum of a metric, ties broken earliest.

    ``window`` > 1 applies a centered moving average before the argmax.
    """
    if len(series) < 3:
        raise ValueError(f"need at least 3 measurements, got {len(series)}")
    values = np.array([getattr(rec, metric) for rec in series], dtype=np.float64)
    smoothed = smooth_series(values, window)
    i = int(np.argmax(smoothed))
    return PeakReport(
        metric=metric, epoch_of_max=series[i].epoch, max_value=float(smoothed[i]), window=window
    )


def generate_samples(
    params: RbmParams,
    count: int,
    burn_in: int,
    thin: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``count`` visible samples from one Gibbs chain.

    The chain starts from a uniformly random visible state, discards
    ``burn_in`` rounds, then emits every ``thin``-th visible sample.
    Returns a (count, V) binary matrix.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    if thin < 1:
        raise ValueError(f"thin must be >= 1, got {thin}")
    x0 = sample_bernoulli(np.full(params.num_visible, 0.5), rng)
    chain = run_gibbs_chain(params, x0, burn_in + count * thin, rng)
    idx = burn_in + thin * np.arange(1, count + 1) - 1
    return chain.visibles[idx]


# ---------------------------------------------------------------------------
# file formats: metric CSVs, peak reports, parameter dumps
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def write_run_csv(path, result: RunResult) -> None:
    """Per-run CSV, one row per measurement epoch, 17 significant digits."""
    with_mean_h = bool(result.series) and all(
        rec.log_xi_complement_mean_h is not None for rec in result.series
    )
    header = list(RUN_CSV_COLUMNS) + ([MEAN_H_COLUMN] if with_mean_h else [])
    lines = [",".join(header)]
    for rec in result.series:
        row = [
            str(rec.epoch),
            str(result.seed),
            _fmt(rec.log_likelihood),
            _fmt(rec.log_xi_random),
            _fmt(rec.log_xi_complement),
            _fmt(rec.log_recon_mean),
            _fmt(rec.log_likelihood_mean),
        ]
        if with_mean_h:
            row.append(_fmt(rec.log_xi_complement_mean_h))
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def _parse_csv(
    path, plain_header: list[str], mean_h_header: list[str]
) -> tuple[list[list[str]], bool]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    if not lines:
        raise ExperimentError(f"{path}: empty CSV")
    header = lines[0].split(",")
    if header == plain_header:
        with_mean_h = False
    elif header == mean_h_header:
        with_mean_h = True
    else:
        raise ExperimentError(f"{path}: unexpected header {lines[0]!r}")
    return [ln.split(",") for ln in lines[1:]], with_mean_h


def read_run_csv(path) -> tuple[list[MetricsRecord], int]:
    """Inverse of write_run_csv; returns (series, seed)."""
    rows, with_mean_h = _parse_csv(
        path, list(RUN_CSV_COLUMNS), list(RUN_CSV_COLUMNS) + [MEAN_H_COLUMN]
    )
    series = []
    seeds = set()
    for row in rows:
        seeds.add(int(row[1]))
        series.append(
            MetricsRecord(
                epoch=int(row[0]),
                log_likelihood=float(row[2]),
                log_xi_random=float(row[3]),
                log_xi_complement=float(row[4]),
                log_recon_mean=float(row[5]),
                log_likelihood_mean=float(row[6]),
                log_xi_complement_mean_h=float(row[7]) if with_mean_h else None,
            )
        )
    if len(seeds) != 1:
        raise ExperimentError(f"{path}: inconsistent seed column {sorted(seeds)}")
    return series, seeds.pop()


AVERAGED_CSV_COLUMNS = (
    "epoch",
    "log_likelihood",
    "log_xi_random",
    "log_xi_complement",
    "log_recon_mean",
    "log_likelihood_mean",
    "n_runs",
)


def write_averaged_csv(path, records: list[MetricsRecord], n_runs: int) -> None:
    """Averaged CSV: run columns minus seed, plus the run count."""
    with_mean_h = bool(records) and all(
        rec.log_xi_complement_mean_h is not None for rec in records
    )
    header = list(AVERAGED_CSV_COLUMNS[:-1]) + ([MEAN_H_COLUMN] if with_mean_h else []) + ["n_runs"]
    lines = [",".join(header)]
    for rec in records:
        row = [
            str(rec.epoch),
            _fmt(rec.log_likelihood),
            _fmt(rec.log_xi_random),
            _fmt(rec.log_xi_complement),
            _fmt(rec.log_recon_mean),
            _fmt(rec.log_likelihood_mean),
        ]
        if with_mean_h:
            row.append(_fmt(rec.log_xi_complement_mean_h))
        row.append(str(n_runs))
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def read_averaged_csv(path) -> tuple[list[MetricsRecord], int]:
    rows, with_mean_h = _parse_csv(
        path,
        list(AVERAGED_CSV_COLUMNS),
        list(AVERAGED_CSV_COLUMNS[:-1]) + [MEAN_H_COLUMN, "n_runs"],
    )
    records = []
    n_runs = set()
    for row in rows:
        records.append(
            MetricsRecord(
                epoch=int(row[0]),
                log_likelihood=float(row[1]),
                log_xi_random=float(row[2]),
                log_xi_complement=float(row[3]),
                log_recon_mean=float(row[4]),
                log_likelihood_mean=float(row[5]),
                log_xi_complement_mean_h=float(row[6]) if with_mean_h else None,
            )
        )
        n_runs.add(int(row[-1]))
    if len(n_runs) != 1:
        raise ExperimentError(f"{path}: inconsistent n_runs column")
    return records, n_runs.pop()


def peak_report_text(records: list[MetricsRecord], window: int = SMOOTH_WINDOW) -> str:
    """key=value blocks for every monitored metric: smoothed peak plus raw argmax."""
    metrics = list(METRIC_NAMES)
    if records and records[0].log_xi_complement_mean_h is not None:
        metrics.append(MEAN_H_COLUMN)
    blocks = []
    for metric in metrics:
        smoothed = detect_peak(records, metric, window=window)
        raw = detect_peak(records, metric, window=1)
        blocks.append(
            "\n".join(
                [
                    f"metric={metric}",
                    f"epoch={smoothed.epoch_of_max}",
                    f"value={_fmt(smoothed.max_value)}",
                    f"raw_epoch={raw.epoch_of_max}",
                    f"raw_value={_fmt(raw.max_value)}",
                ]
            )
        )
    return "\n\n".join(blocks) + "\n"


def write_params_file(path, params: RbmParams) -> None:
    """Text dump: header 'V H', then H weight rows, then the b row, then the c row."""
    lines = [f"{params.num_visible} {params.num_hidden}"]
    for row in params.W:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append(" ".join(_fmt(v) for v in params.b))
    lines.append(" ".join(_fmt(v) for v in params.c))
    _write_text(path, "\n".join(lines) + "\n")


def read_params_file(path) -> RbmParams:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln.strip()]
    if not lines:
        raise ParamsFormatError(f"{path}: empty params file")
    head = lines[0].split()
    if len(head) != 2:
        raise ParamsFormatError(f"{path}: header must be 'V H', got {lines[0]!r}")
    try:
        visible, hidden = int(head[0]), int(head[1])
    except ValueError:
        raise ParamsFormatError(f"{path}: non-integer header {lines[0]!r}") from None
    if visible < 1 or hidden < 1:
        raise ParamsFormatError(f"{path}: layer sizes must be positive, got {visible} {hidden}")
    expected = hidden + 2
    if len(lines) - 1 != expected:
        raise ParamsFormatError(
            f"{path}: expected {expected} data rows for V={visible} H={hidden}, "
            f"got {len(lines) - 1}"
        )
    try:
        rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise ParamsFormatError(f"{path}: bad float: {exc}") from None
    W = rows[:hidden]
    b, c = rows[hidden], rows[hidden + 1]
    if any(len(r) != visible for r in W) or len(b) != visible or len(c) != hidden:
        raise ParamsFormatError(f"{path}: row lengths inconsistent with header {visible} {hidden}")
    return RbmParams(np.array(W), np.array(b), np.array(c))
