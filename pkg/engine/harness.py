import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from engine.channel_model import Scheme, generate_channels
from engine.metrics import (
    SinrSample,
    empirical_cdf,
    evaluate_layer_slnr,
    layer_sinr_db,
    layer_sinr_spread,
    percentile_table,
    user_power_terms,
    user_sinr_db,
)
from engine.precoders import layer_slnr_precoder, slnr_user_precoder
from engine.receivers import DegenerateChannel, compute_receivers

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 8
SAMPLE_COLUMNS = ["drop_id", "user", "layer", "scheme", "receiver", "sinr_db"]
SORT_KEYS = ["drop_id", "user", "layer"]


@dataclass
class DropResult:
    drop_id: int
    samples: list
    user_sinr_db: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    resamples: int = 0


@dataclass
class CampaignSummary:
    scheme: str
    receiver: str
    drops: int
    percentiles: dict
    cdf: object
    mean_sinr_db: float
    median_user_sinr_db: float
    median_layer_spread_db: float
    resamples: int = 0


@dataclass
class CampaignResult:
    summary: CampaignSummary
    samples: pd.DataFrame
    resamples: int
    traces: dict = field(default_factory=dict)


@dataclass
class PairedReport:
    deltas: pd.DataFrame
    samples: pd.DataFrame
    summaries: dict
    mean_delta_db: float
    delta_ci_db: tuple
    resamples: int


def _layer_objectives(channels, precoders, receivers, config):
    values = []
    for k in range(channels.users):
        for l in range(config.layers[k]):
            values.append(evaluate_layer_slnr(channels, receivers, precoders.column(k, l), config, k, l))
    return np.array(values)


def _record(channels, precoders, receivers, config, scheme):
    """Measures every (k, l) layer and every user for one precoder/receiver state."""
    samples = []
    user_sinr = []
    for k in range(channels.users):
        terms = user_power_terms(channels, precoders, receivers, config, k)
        for l, sinr in enumerate(layer_sinr_db(terms)):
            samples.append(SinrSample(
                drop_id=channels.drop_id,
                user=k + 1,
                layer=l + 1,
                scheme=Scheme(scheme).value,
                receiver=config.receiver.value,
                sinr_db=float(sinr),
            ))
        user_sinr.append(user_sinr_db(terms))
    return samples, user_sinr


def _simulate(config, drop_id, attempt, record_trace, paired):
    """
    One block-static drop:
    1. t = 0: per-user SLNR precoder, then the configured receiver
    2. t = 1..T (layer SLNR only): layer precoder from U(t-1), then refresh U(t)
    3. measure at the final (V(T), U(T)) pair
    With paired=True the t = 0 state is also measured as the original-SLNR result.
    """
    channels = generate_channels(config, drop_id, attempt)
    precoders = slnr_user_precoder(channels, config)
    receivers = compute_receivers(channels, precoders, config)

    trace = [_layer_objectives(channels, precoders, receivers, config)] if record_trace else []
    baseline = None
    if paired:
        baseline = _record(channels, precoders, receivers, config, Scheme.ORIGINAL_SLNR)

    iterate = paired or config.scheme is Scheme.LAYER_SLNR
    if iterate:
        for t in range(1, config.feedback_iters + 1):
            precoders = layer_slnr_precoder(channels, receivers, config)
            receivers = compute_receivers(channels, precoders, config)
            if record_trace:
                trace.append(_layer_objectives(channels, precoders, receivers, config))

    scheme = Scheme.LAYER_SLNR if paired else config.scheme
    final = _record(channels, precoders, receivers, config, scheme)
    return final, baseline, trace


def _with_resampling(config, drop_id, record_trace=False, paired=False):
    for attempt in range(MAX_ATTEMPTS):
        try:
            return _simulate(config, drop_id, attempt, record_trace, paired) + (attempt,)
        except DegenerateChannel as e:
            logger.warning(f"Drop {drop_id} attempt {attempt} degenerate ({e}); resampling")
    logger.error(f"Drop {drop_id} stayed degenerate after {MAX_ATTEMPTS} attempts")
    raise DegenerateChannel(f"drop {drop_id} degenerate after {MAX_ATTEMPTS} attempts")


def run_drop(config, drop_id, record_trace=False):
    """
    Runs the feedback procedure for one drop under config.scheme.
    A degenerate channel is replaced by the next attempt sub-stream of the same drop.
    """
    (samples, user_sinr), _, trace, attempts = _with_resampling(config, drop_id, record_trace)
    logger.debug(f"Drop {drop_id} done after {attempts + 1} attempt(s)")
    return DropResult(drop_id=drop_id, samples=samples, user_sinr_db=user_sinr, trace=trace, resamples=attempts)


def run_paired_drop(config, drop_id):
    """
    Both schemes on one channel realization. The original-SLNR result is the t = 0
    state of the layer-SLNR run, which makes the pair share channels exactly.
    Returns (original DropResult, layer DropResult).
    """
    (layer_samples, layer_users), (orig_samples, orig_users), _, attempts = _with_resampling(
        config, drop_id, paired=True
    )
    return (
        DropResult(drop_id=drop_id, samples=orig_samples, user_sinr_db=orig_users, resamples=attempts),
        DropResult(drop_id=drop_id, samples=layer_samples, user_sinr_db=layer_users, resamples=attempts),
    )


# --- campaign execution --------------------------------------------------------

def _drop_batch(config, drop_ids, record_trace):
    return [run_drop(config, d, record_trace) for d in drop_ids]


def _paired_batch(config, drop_ids):
    return [run_paired_drop(config, d) for d in drop_ids]


def _batches(drops, workers):
    ids = list(range(1, drops + 1))
    size = max(1, int(np.ceil(len(ids) / (workers * 4))))
    return [ids[i:i + size] for i in range(0, len(ids), size)]


def _execute(fn, config, workers, *args):
    """Fans drop batches out to worker processes; order of completion does not matter."""
    workers = max(1, int(workers or 1))
    batches = _batches(config.drops, workers)
    if workers == 1:
        results = [fn(config, b, *args) for b in batches]
    else:
        logger.info(f"Running {config.drops} drops on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, config, b, *args) for b in batches]
            results = [f.result() for f in futures]
    return [item for batch in results for item in batch]


def samples_frame(samples):
    """Canonical sample DataFrame sorted by (drop_id, user, layer) and then scheme."""
    df = pd.DataFrame(
        [(s.drop_id, s.user, s.layer, s.scheme, s.receiver, s.sinr_db) for s in samples],
        columns=SAMPLE_COLUMNS,
    )
    if df.empty:
        return df
    return df.sort_values(SORT_KEYS + ["scheme"], kind="mergesort").reset_index(drop=True)


def summarize(drop_results, config, scheme):
    samples = [s for r in drop_results for s in r.samples]
    sinr = np.array([s.sinr_db for s in samples])
    cdf = empirical_cdf(sinr)

    spreads = []
    for r in drop_results:
        for k in range(config.users):
            spreads.append(layer_sinr_spread([s.sinr_db for s in r.samples if s.user == k + 1]))
    users = [u for r in drop_results for u in r.user_sinr_db]

    return CampaignSummary(
        scheme=Scheme(scheme).value,
        receiver=config.receiver.value,
        drops=len(drop_results),
        percentiles=percentile_table(cdf),
        cdf=cdf,
        mean_sinr_db=float(np.mean(sinr)),
        median_user_sinr_db=float(np.median(users)) if users else float("nan"),
        median_layer_spread_db=float(np.median(spreads)) if spreads else 0.0,
        resamples=sum(r.resamples for r in drop_results),
    )


def run_campaign(config, workers=1, record_trace=False):
    """
    Runs drops 1..config.drops and aggregates their samples.
    Output depends only on config: every drop owns its RNG stream and the merged
    samples are sorted canonically.
    """
    logger.info(
        f"Campaign start: scheme={config.scheme.value} receiver={config.receiver.value} "
        f"drops={config.drops} iters={config.feedback_iters} seed={config.seed} "
        f"layer_noise={config.layer_noise.value}"
    )
    try:
        results = _execute(_drop_batch, config, workers, record_trace)
    except Exception as e:
        logger.error(f"Campaign failed: {e}")
        raise
    results.sort(key=lambda r: r.drop_id)

    summary = summarize(results, config, config.scheme)
    if summary.resamples:
        logger.warning(f"{summary.resamples} degenerate drop attempts were resampled")
    logger.info(f"Campaign done: median layer SINR {summary.percentiles[0.5]:.3f} dB")

    traces = {r.drop_id: r.trace for r in results} if record_trace else {}
    return CampaignResult(
        summary=summary,
        samples=samples_frame([s for r in results for s in r.samples]),
        resamples=summary.resamples,
        traces=traces,
    )


def bootstrap_mean_ci(values, seed, n_boot=2000, level=0.95, batch=200):
    """Percentile bootstrap interval for the mean of values, seeded for reproducibility."""
    data = np.asarray(values, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(0xB007,)))
    means = []
    for start in range(0, n_boot, batch):
        count = min(batch, n_boot - start)
        idx = rng.integers(0, data.size, size=(count, data.size))
        means.append(data[idx].mean(axis=1))
    means = np.concatenate(means)
    tail = (1.0 - level) / 2.0
    return float(np.quantile(means, tail)), float(np.quantile(means, 1.0 - tail))


def compare_schemes(config, workers=1):
    """
    Paired comparison over identical channel realizations.
    Deltas are layer SLNR minus original SLNR per (drop, user, layer); the
    confidence interval resamples per-drop mean deltas.
    """
    logger.info(f"Paired comparison: {config.drops} drops, receiver={config.receiver.value}")
    try:
        pairs = _execute(_paired_batch, config, workers)
    except Exception as e:
        logger.error(f"Paired comparison failed: {e}")
        raise
    pairs.sort(key=lambda p: p[0].drop_id)
    originals = [p[0] for p in pairs]
    layered = [p[1] for p in pairs]

    orig_df = samples_frame([s for r in originals for s in r.samples])
    layer_df = samples_frame([s for r in layered for s in r.samples])
    deltas = orig_df[SORT_KEYS].copy()
    deltas["original_sinr_db"] = orig_df["sinr_db"].to_numpy()
    deltas["layer_sinr_db"] = layer_df["sinr_db"].to_numpy()
    deltas["delta_db"] = deltas["layer_sinr_db"] - deltas["original_sinr_db"]

    per_drop = deltas.groupby("drop_id", sort=True)["delta_db"].mean().to_numpy()
    ci = bootstrap_mean_ci(per_drop, config.seed)
    mean_delta = float(deltas["delta_db"].mean())
    logger.info(f"Mean layer-SLNR gain {mean_delta:.3f} dB (95% CI {ci[0]:.3f} .. {ci[1]:.3f})")

    summaries = {
        Scheme.ORIGINAL_SLNR.value: summarize(originals, config, Scheme.ORIGINAL_SLNR),
        Scheme.LAYER_SLNR.value: summarize(layered, config, Scheme.LAYER_SLNR),
    }
    return PairedReport(
        deltas=deltas,
        samples=samples_frame([s for r in originals + layered for s in r.samples]),
        summaries=summaries,
        mean_delta_db=mean_delta,
        delta_ci_db=ci,
        resamples=sum(r.resamples for r in originals),
    )