import logging
import os

import pandas as pd

from engine.harness import SAMPLE_COLUMNS, samples_frame
from engine.metrics import SinrSample

logger = logging.getLogger(__name__)

SINR_FORMAT = "%.6f"

PLOT_TEMPLATE = '''"""
Renders the effective layer SINR CDFs stored in {csv_name}.
Generated by the MU-MIMO SLNR simulator.
"""
import sys

import pandas as pd
import plotly.express as px

CSV_PATH = {csv_path!r}
HTML_PATH = {html_path!r}


def main():
    df = pd.read_csv(CSV_PATH)
    df["curve"] = df["scheme"] + " / " + df["receiver"]
    fig = px.ecdf(
        df,
        x="sinr_db",
        color="curve",
        title={title!r},
        labels={{"sinr_db": "Effective layer SINR (dB)", "curve": "Scheme"}},
    )
    fig.update_yaxes(title_text="CDF", range=[0, 1])
    fig.write_html(HTML_PATH)
    print(f"Wrote {{HTML_PATH}}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
'''


def _as_frame(samples):
    if isinstance(samples, pd.DataFrame):
        return samples[SAMPLE_COLUMNS]
    df = samples_frame(list(samples))
    return df if not df.empty else pd.DataFrame(columns=SAMPLE_COLUMNS)


def write_samples(samples, path):
    """
    Writes samples as CSV: header drop_id,user,layer,scheme,receiver,sinr_db,
    sinr_db with six decimals, LF line endings, UTF-8.
    Accepts a canonical DataFrame or a list of SinrSample.
    """
    df = _as_frame(samples)
    try:
        df.to_csv(path, index=False, float_format=SINR_FORMAT, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to write samples to '{path}': {e}")
        raise OSError(f"cannot write samples to '{path}': {e.strerror or e}") from e
    logger.info(f"Wrote {len(df)} samples to {path}")
    return path


def read_samples(path):
    """Parses a samples CSV back into a list of SinrSample."""
    try:
        df = pd.read_csv(
            path,
            dtype={"drop_id": int, "user": int, "layer": int, "scheme": str, "receiver": str, "sinr_db": float},
        )
    except OSError as e:
        logger.error(f"Failed to read samples from '{path}': {e}")
        raise
    return [
        SinrSample(int(r.drop_id), int(r.user), int(r.layer), r.scheme, r.receiver, float(r.sinr_db))
        for r in df.itertuples(index=False)
    ]


def write_cdf(summaries, path):
    """Writes every summary's CDF as rows (scheme, receiver, sinr_db, probability)."""
    frames = []
    for s in summaries:
        frames.append(pd.DataFrame({
            "scheme": s.scheme,
            "receiver": s.receiver,
            "sinr_db": s.cdf.values,
            "probability": s.cdf.probabilities,
        }))
    df = pd.concat(frames, ignore_index=True)
    try:
        df.to_csv(path, index=False, float_format=SINR_FORMAT, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to write CDF to '{path}': {e}")
        raise OSError(f"cannot write CDF to '{path}': {e.strerror or e}") from e
    logger.info(f"Wrote CDF with {len(df)} points to {path}")
    return path


def percentile_frame(summaries):
    """Long table: one row per (percentile, scheme, receiver)."""
    rows = []
    for s in summaries:
        for p, value in s.percentiles.items():
            rows.append({"percentile": p, "scheme": s.scheme, "receiver": s.receiver, "sinr_db": value})
    df = pd.DataFrame(rows, columns=["percentile", "scheme", "receiver", "sinr_db"])
    return df.sort_values(["percentile", "scheme", "receiver"], kind="mergesort").reset_index(drop=True)


def build_plot_script(csv_path, receivers):
    """Source of a standalone plotly script that draws all CDF curves on one axis."""
    base, _ = os.path.splitext(csv_path)
    label = ", ".join(sorted(set(receivers))) or "receiver"
    return PLOT_TEMPLATE.format(
        csv_name=os.path.basename(csv_path),
        csv_path=csv_path,
        html_path=base + "_cdf.html",
        title=f"CDF of effective layer SINR ({label})",
    )


def emit_summary(summaries, samples_path=None, plot_script_path=None):
    """
    Human-readable percentile table for each (scheme, receiver) plus headline statistics.
    When plot_script_path is given, the plotly script for samples_path is written there.
    Returns the text.
    """
    summaries = list(summaries)
    table = percentile_frame(summaries)
    lines = ["Effective layer SINR percentiles (dB)", table.to_string(index=False, float_format=lambda x: f"{x:.3f}"), ""]
    for s in summaries:
        lines.append(
            f"{s.scheme} / {s.receiver}: drops={s.drops} mean={s.mean_sinr_db:.3f} dB "
            f"user-median={s.median_user_sinr_db:.3f} dB layer-spread-median={s.median_layer_spread_db:.3f} dB "
            f"resamples={s.resamples}"
        )
    text = "\n".join(lines)

    if plot_script_path:
        script = build_plot_script(samples_path or "samples.csv", [s.receiver for s in summaries])
        try:
            with open(plot_script_path, "w", encoding="utf-8", newline="\n") as f:
                f.write(script)
        except OSError as e:
            logger.error(f"Failed to write plot script to '{plot_script_path}': {e}")
            raise OSError(f"cannot write plot script to '{plot_script_path}': {e.strerror or e}") from e
        logger.info(f"Wrote plot script to {plot_script_path}")
    return text
