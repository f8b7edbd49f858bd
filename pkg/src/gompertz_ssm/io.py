"""File formats: CSV for series and chains, JSON for structured summaries.

Numbers are serialized with 17 significant digits so every file round-trips
bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain

CHAIN_HEADER = ["iteration", "theta1", "theta2", "b"]
SERIES_HEADER = ["label", "count"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class SeriesFormatError(ValueError):
    """Raised when a series file cannot be parsed."""


def load_series_csv(path) -> tuple[np.ndarray, list[str]]:
    """Parse a `label,count` CSV into (counts, labels), preserving row order."""
    path = Path(path)
    if not path.exists():
        raise SeriesFormatError(f"{path}: no such file")
    counts: list[int] = []
    labels: list[str] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesFormatError(f"{path}: empty file, fewer than 2 observations")
        if [h.strip().lower() for h in header] != SERIES_HEADER:
            raise SeriesFormatError(
                f"{path}: expected header 'label,count', got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise SeriesFormatError(f"{path}: line {lineno}: expected 2 fields")
            label, raw = row[0].strip(), row[1].strip()
            try:
                value = int(raw)
            except ValueError:
                raise SeriesFormatError(
                    f"{path}: line {lineno}: count {raw!r} is not an integer"
                )
            if value < 0:
                raise SeriesFormatError(
                    f"{path}: line {lineno}: count must be nonnegative, got {value}"
                )
            labels.append(label)
            counts.append(value)
    if len(counts) < 2:
        raise SeriesFormatError(f"{path}: fewer than 2 observations")
    return np.array(counts, dtype=np.int64), labels


def write_series_csv(path, counts, labels=None) -> None:
    counts = np.asarray(counts)
    if labels is None:
        labels = [str(i + 1) for i in range(counts.size)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for label, c in zip(labels, counts):
            writer.writerow([label, int(c)])


def write_chain_csv(path, chain: PosteriorChain) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHAIN_HEADER)
        for i, row in enumerate(chain.draws, start=1):
            writer.writerow([i, _fmt(row[0]), _fmt(row[1]), _fmt(row[2])])


def read_chain_csv(path) -> np.ndarray:
    """Read a chain CSV back into an (n, 3) array of parameter draws."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CHAIN_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CHAIN_HEADER)!r}")
        rows = [[float(row[1]), float(row[2]), float(row[3])] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty chain")
    return np.array(rows)


def write_json(path, payload: dict) -> None:
    with Path(path).open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_mse_plot_data(path, summary) -> None:
    """Tidy plot-data table for the MSE figure family: one row per
    method/parameter with mean squared error and 5th/95th percentile bars."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "parameter", "mean", "p5", "p95"])
        for method, by_param in sorted(summary.metrics.items()):
            for name, vals in by_param.items():
                writer.writerow(
                    [
                        summary.scenario_id,
                        method,
                        name,
                        _fmt(vals["mse"]),
                        _fmt(vals["se_p5"]),
                        _fmt(vals["se_p95"]),
                    ]
                )


def write_coverage_plot_data(path, summary) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "parameter", "coverage"])
        for method, by_param in sorted(summary.metrics.items()):
            for name, vals in by_param.items():
                writer.writerow(
                    [summary.scenario_id, method, name, _fmt(vals["coverage"])]
                )


def write_acf_plot_data(path, acf_by_param: dict) -> None:
    """Tidy ACF table: one row per parameter/lag."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "lag", "acf"])
        for name, acf in acf_by_param.items():
            for lag, value in enumerate(acf):
                writer.writerow([name, lag, _fmt(value)])
