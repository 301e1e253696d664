"""Fixed-schema metrics CSV emission and parsing (RFC 4180 via csv)."""

from __future__ import annotations

import csv
from pathlib import Path

__all__ = ["METRIC_COLUMNS", "MetricsWriter", "read_metrics"]

METRIC_COLUMNS = (
    "step",
    "loss_dyn",
    "loss_image",
    "loss_vector_proprio",
    "loss_vector_goal",
    "loss_obj_mask",
    "loss_obj_rgb",
    "loss_obj_pos",
    "loss_pos_encoder",
    "loss_total",
    "reward_head_loss",
    "recon_target_err",
    "recon_entity_err",
    "eval_score_mean",
    "success_rate",
    "value_mean",
    "policy_entropy",
    "value_loss",
    "imag_reward_mean",
    "imag_reward_std",
)


class MetricsWriter:
    """Appends rows with the fixed column set; missing keys are an error."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRIC_COLUMNS)

    def write(self, row: dict) -> None:
        missing = [c for c in METRIC_COLUMNS if c not in row]
        if missing:
            raise ValueError(f"metrics row missing columns: {missing}")
        extra = set(row) - set(METRIC_COLUMNS)
        if extra:
            raise ValueError(f"metrics row has unknown columns: {sorted(extra)}")
        self._writer.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v) -> str:
    if isinstance(v, bool):
        raise TypeError("metrics cells are numeric")
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def read_metrics(path) -> list[dict]:
    """Parse a metrics CSV; validates the exact column set and order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRIC_COLUMNS:
            raise ValueError(f"unexpected metrics columns in {path}: {header}")
        rows = []
        for raw in reader:
            if len(raw) != len(METRIC_COLUMNS):
                raise ValueError(f"short metrics row in {path}: {raw}")
            row = {c: (int(v) if c == "step" else float(v))
                   for c, v in zip(METRIC_COLUMNS, raw)}
            rows.append(row)
    return rows
