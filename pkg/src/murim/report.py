"""Report tables: summary rows, round logs and the config echo.

CSV numbers use 12 significant digits; JSON uses Python's shortest
round-trip float repr. Nothing time- or host-dependent is written, so
identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .config import RunConfig
from .simulator import RoundRecord, RunSummary

RECORD_FIELDS = [f.name for f in dataclasses.fields(RoundRecord)]
_RECORD_TYPES = {
    "round": int,
    "client_id": int,
    "role": str,
    "resource_indicator": str,
    "privacy_indicator": str,
    "dropped": bool,
}

# leading columns mirror the paper-style tables
SUMMARY_COLUMNS = [
    "thr",
    "test",
    "train",
    "val",
    "innoc_drop",
    "liars_surv",
    "dropouts",
    "num_clients",
    "liar_fraction",
    "liars_injected",
    "aggregator",
    "reputation",
    "attack",
    "attackers_injected",
    "attacker_drops",
    "mean_utility_reliable",
    "mean_utility_unreliable",
    "utility_gap",
    "delta_acc",
    "rounds_completed",
    "terminated_early",
    "seed",
]


def fmt_csv(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    return str(value)


def _parse_cell(text: str, kind) -> Any:
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    if kind is int:
        return int(text)
    if kind is str:
        return text
    return float(text)


def summary_row(config: RunConfig, summary: RunSummary) -> dict[str, Any]:
    gap = summary.mean_utility_reliable - summary.mean_utility_unreliable
    return {
        "thr": config.reputation.reliability_threshold,
        "test": summary.final_test,
        "train": summary.final_train,
        "val": summary.final_val,
        "innoc_drop": summary.innocent_drops,
        "liars_surv": summary.liars_survived,
        "dropouts": summary.total_dropouts,
        "num_clients": config.num_clients,
        "liar_fraction": config.liar_fraction,
        "liars_injected": summary.liars_injected,
        "aggregator": config.aggregator,
        "reputation": config.reputation_enabled,
        "attack": config.attack.kind,
        "attackers_injected": summary.attackers_injected,
        "attacker_drops": summary.attacker_drops,
        "mean_utility_reliable": summary.mean_utility_reliable,
        "mean_utility_unreliable": summary.mean_utility_unreliable,
        "utility_gap": gap,
        "delta_acc": summary.delta_acc,
        "rounds_completed": summary.rounds_completed,
        "terminated_early": summary.terminated_early,
        "seed": summary.seed,
    }


def mean_rows(rows: Sequence[dict[str, Any]], keys: Sequence[str]) -> list[dict[str, Any]]:
    """Collapse rows that share ``keys`` into one row of seed means.

    Numeric columns are averaged, so counts such as ``liars_surv`` may become
    fractional. ``seed`` is replaced by ``n_seeds``.
    """
    groups: dict[tuple, list[dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    out = []
    for group in groups.values():
        merged: dict[str, Any] = {}
        for col, first in group[0].items():
            if col == "seed":
                continue
            values = [r[col] for r in group]
            if isinstance(first, bool) or not isinstance(first, (int, float)) or col in keys:
                merged[col] = first if all(v == first for v in values) else "mixed"
            else:
                merged[col] = math.fsum(values) / len(values)
        merged["n_seeds"] = len(group)
        out.append(merged)
    return out


def table_text(rows: Sequence[dict[str, Any]], fmt: str = "csv", columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else list(SUMMARY_COLUMNS)
    if fmt == "json":
        return json.dumps([{c: r.get(c) for c in columns} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt_csv(r.get(c)) for c in columns])
    return buf.getvalue()


def record_dict(rec: RoundRecord) -> dict[str, Any]:
    return dataclasses.asdict(rec)


def rounds_text(
    records: Iterable[RoundRecord],
    fmt: str = "csv",
    extra: dict[str, Any] | None = None,
) -> str:
    rows = []
    for rec in records:
        row = dict(extra or {})
        row.update(record_dict(rec))
        rows.append(row)
    columns = [*(extra or {}), *RECORD_FIELDS]
    return table_text(rows, fmt, columns)


def read_rounds_csv(path: str | Path) -> list[RoundRecord]:
    """Parse a round log written by :func:`rounds_text`; extra columns are ignored."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append(
                RoundRecord(**{f: _parse_cell(row[f], _RECORD_TYPES.get(f, float)) for f in RECORD_FIELDS})
            )
    return out


def curves_rows(summary: RunSummary) -> list[dict[str, Any]]:
    """Per-round accuracy series (round 0 is the initial model)."""
    return [
        {"round": t, "test": te, "train": tr, "val": va}
        for t, (te, tr, va) in enumerate(zip(summary.test_acc, summary.train_acc, summary.val_acc))
    ]


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
