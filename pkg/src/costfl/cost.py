"""Carbon-intensity traces, static per-client costs and emission accounting."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrityError, ParseError
from .seeding import rng as make_rng

logger = logging.getLogger(__name__)

DEFAULT_ENERGY_PER_ROUND = 0.001  # kWh per client per round
FIXTURE_NAME = "carbon_regions.csv"


@dataclass(frozen=True)
class CarbonTrace:
    region_id: str
    timestamps: tuple
    intensities: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=np.float64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ConfigError(f"trace {self.region_id!r} is empty")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ConfigError(f"trace {self.region_id!r} has negative or non-finite intensity")
        object.__setattr__(self, "intensities", arr)

    @property
    def average(self) -> float:
        return float(np.mean(self.intensities))


@dataclass(frozen=True)
class CostModel:
    per_client_cost: dict  # client_id -> gCO2eq/kWh
    energy_per_round: float = DEFAULT_ENERGY_PER_ROUND
    client_region: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.energy_per_round > 0:
            raise ConfigError("energy_per_round must be > 0")
        bad = [c for c, v in self.per_client_cost.items() if not v > 0]
        if bad:
            raise ConfigError(f"client costs must be > 0 (offending clients: {bad[:5]})")

    def cost(self, client_id: int) -> float:
        try:
            return self.per_client_cost[client_id]
        except KeyError:
            raise IntegrityError(f"client {client_id} has no assigned cost") from None

    def scaled(self, factor: float) -> "CostModel":
        return CostModel(
            {c: v * factor for c, v in self.per_client_cost.items()},
            self.energy_per_round,
            dict(self.client_region),
        )


def _parse_float(text: str, lineno: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric {what} {text!r}", lineno) from None


def _read_trace_file(path: Path) -> dict[str, tuple[list, list]]:
    """Rows are ``timestamp,intensity`` or ``region,timestamp,intensity``; a header row is skipped."""
    series: dict[str, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or not any(row):
                continue
            if len(row) == 2:
                region, ts, val = path.stem, row[0], row[1]
            elif len(row) == 3:
                region, ts, val = row
            else:
                raise ParseError(f"{path.name}: expected 2 or 3 columns, got {len(row)}", lineno)
            if lineno == 1 and val.lower() in {"intensity", "carbon_intensity", "value"}:
                continue
            x = _parse_float(val, lineno, "intensity")
            if x < 0:
                raise ParseError(f"{path.name}: negative intensity {x}", lineno)
            ts_list, vals = series.setdefault(region, ([], []))
            ts_list.append(ts)
            vals.append(x)
    return series


def load_traces(path=None) -> list[CarbonTrace]:
    """Load traces from a CSV file or a directory of CSV files.

    With no path the bundled 123-region fixture is used. Regions are returned
    sorted by id; regions without samples are skipped with a warning.
    """
    if path is None:
        path = resources.files("costfl.data") / FIXTURE_NAME
    path = Path(str(path))
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise ConfigError(f"no trace files under {path}")
    merged: dict[str, tuple[list, list]] = {}
    for f in files:
        series = _read_trace_file(f)
        if not series:
            logger.warning("trace file %s is empty; skipped", f.name)
        for region, (ts, vals) in series.items():
            tgt = merged.setdefault(region, ([], []))
            tgt[0].extend(ts)
            tgt[1].extend(vals)
    traces = []
    for region in sorted(merged):
        ts, vals = merged[region]
        if not vals:
            logger.warning("trace %s is empty; skipped", region)
            continue
        traces.append(CarbonTrace(region, tuple(ts), np.array(vals)))
    logger.info("loaded %d carbon-intensity regions from %s", len(traces), path)
    return traces


def trace_summary(traces: list[CarbonTrace]) -> dict:
    avgs = np.array([t.average for t in traces])
    return {
        "regions": len(traces),
        "min_average": float(avgs.min()),
        "max_average": float(avgs.max()),
        "mean_of_averages": float(avgs.mean()),
    }


def assign_costs(
    num_clients: int,
    traces: list[CarbonTrace],
    seed: int,
    energy_per_round: float = DEFAULT_ENERGY_PER_ROUND,
) -> CostModel:
    """Give every client the average intensity of a uniformly drawn region (with replacement)."""
    if not traces:
        raise ConfigError("no carbon traces to assign from")
    picks = make_rng(seed, "costs").integers(0, len(traces), size=num_clients)
    return CostModel(
        {cid: traces[k].average for cid, k in enumerate(picks.tolist())},
        energy_per_round,
        {cid: traces[k].region_id for cid, k in enumerate(picks.tolist())},
    )


def round_emissions(participants, cost_model: CostModel) -> float:
    """gCO2eq emitted by one round: sum of each participant's intensity times the round energy."""
    total = 0.0
    for cid in sorted(participants):
        total += cost_model.cost(cid) * cost_model.energy_per_round
    return total


def cost_report(cost_model: CostModel) -> dict:
    return {
        "energy_per_round_kwh": cost_model.energy_per_round,
        "clients": [
            {
                "client_id": cid,
                "region": cost_model.client_region.get(cid),
                "cost": cost_model.per_client_cost[cid],
            }
            for cid in sorted(cost_model.per_client_cost)
        ],
    }


def write_cost_report(path, cost_model: CostModel) -> None:
    Path(path).write_text(json.dumps(cost_report(cost_model), indent=2) + "\n")
