"""Regenerate the bundled synthetic 123-region carbon-intensity fixture.

Region averages span 14.96..947 gCO2eq/kWh with a mean of 369.74. Each region
gets three days of hourly samples built from +/- pairs around its average, so
the sample mean equals the average exactly (two-decimal values).
"""

import csv
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

N_REGIONS = 123
LOW, HIGH, MEAN = 14.96, 947.0, 369.74
HOURS = 72


def region_averages(seed: int = 2020) -> np.ndarray:
    rng = np.random.default_rng(seed)
    inner = np.sort(rng.gamma(2.2, 160.0, size=N_REGIONS - 2))
    inner = np.clip(inner, LOW + 1, HIGH - 1)
    target_inner_sum = MEAN * N_REGIONS - LOW - HIGH
    # affine shift toward the target sum, keeping values inside (LOW, HIGH)
    for _ in range(200):
        gap = target_inner_sum - inner.sum()
        if abs(gap) < 1e-9:
            break
        inner = np.clip(inner + gap / len(inner), LOW + 1, HIGH - 1)
    inner = np.round(inner, 2)
    residual = round(target_inner_sum - inner.sum(), 2)
    inner[len(inner) // 2] = round(inner[len(inner) // 2] + residual, 2)
    avgs = np.concatenate([[LOW], inner, [HIGH]])
    return rng.permutation(avgs)


def main(out: Path) -> None:
    avgs = region_averages()
    start = datetime(2022, 1, 1, tzinfo=timezone.utc)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "timestamp", "intensity"])
        for r, avg in enumerate(avgs):
            amp = 0.25 * avg
            for h in range(0, HOURS, 2):
                dev = round(amp * abs(np.sin(np.pi * (h % 24) / 24.0)), 2)
                dev = min(dev, avg)
                for k, v in enumerate((avg + dev, avg - dev)):
                    ts = (start + timedelta(hours=h + k)).strftime("%Y-%m-%dT%H:%M:%SZ")
                    w.writerow([f"R{r + 1:03d}", ts, f"{v:.2f}"])


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/costfl/data/carbon_regions.csv")
