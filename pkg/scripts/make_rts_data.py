#!/usr/bin/env python3
"""Regenerate the bundled single-area reliability test system data files.

Writes ``src/gridmc/data/rts/network.yaml`` and ``demand.csv`` from the
published single-area test system tables (24 buses, 32 units, 38 branches,
weekly/daily/hourly load percentages).  The hourly trace covers 52 weeks of
7 days (8736 h) and is extended to 8760 h by wrapping the first day of the
year.  Run from the repository root:

    python scripts/make_rts_data.py
"""

from pathlib import Path

import numpy as np
import yaml

OUT = Path(__file__).resolve().parents[1] / "src" / "gridmc" / "data" / "rts"

PEAK_MW = 2850.0

# unit class: (capacity MW, MTTF h, MTTR h)
UNIT_CLASSES = {
    "U12": (12.0, 2940.0, 60.0),
    "U20": (20.0, 450.0, 50.0),
    "U50": (50.0, 1980.0, 20.0),
    "U76": (76.0, 1960.0, 40.0),
    "U100": (100.0, 1200.0, 50.0),
    "U155": (155.0, 960.0, 40.0),
    "U197": (197.0, 950.0, 50.0),
    "U350": (350.0, 1150.0, 100.0),
    "U400": (400.0, 1100.0, 150.0),
}

# (bus, unit class) for each of the 32 units
UNITS = (
    [(1, "U20")] * 2 + [(1, "U76")] * 2 +
    [(2, "U20")] * 2 + [(2, "U76")] * 2 +
    [(7, "U100")] * 3 +
    [(13, "U197")] * 3 +
    [(15, "U12")] * 5 + [(15, "U155")] +
    [(16, "U155")] +
    [(18, "U400")] +
    [(21, "U400")] +
    [(22, "U50")] * 6 +
    [(23, "U155")] * 2 + [(23, "U350")]
)

# peak bus loads, MW (zero-load buses omitted); sums to the system peak
BUS_LOAD_MW = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
    10: 195, 13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128,
}

# branch table: (from, to, outage rate 1/yr, outage duration h,
#                reactance pu on 100 MVA, continuous rating MW)
BRANCHES = [
    (1, 2, 0.24, 16.0, 0.014, 175.0),
    (1, 3, 0.51, 10.0, 0.211, 175.0),
    (1, 5, 0.33, 10.0, 0.085, 175.0),
    (2, 4, 0.39, 10.0, 0.127, 175.0),
    (2, 6, 0.48, 10.0, 0.192, 175.0),
    (3, 9, 0.38, 10.0, 0.119, 175.0),
    (3, 24, 0.02, 768.0, 0.084, 400.0),
    (4, 9, 0.36, 10.0, 0.104, 175.0),
    (5, 10, 0.34, 10.0, 0.088, 175.0),
    (6, 10, 0.33, 35.0, 0.061, 175.0),
    (7, 8, 0.30, 10.0, 0.061, 175.0),
    (8, 9, 0.44, 10.0, 0.165, 175.0),
    (8, 10, 0.44, 10.0, 0.165, 175.0),
    (9, 11, 0.02, 768.0, 0.084, 400.0),
    (9, 12, 0.02, 768.0, 0.084, 400.0),
    (10, 11, 0.02, 768.0, 0.084, 400.0),
    (10, 12, 0.02, 768.0, 0.084, 400.0),
    (11, 13, 0.40, 11.0, 0.048, 500.0),
    (11, 14, 0.39, 11.0, 0.042, 500.0),
    (12, 13, 0.40, 11.0, 0.048, 500.0),
    (12, 23, 0.52, 11.0, 0.097, 500.0),
    (13, 23, 0.49, 11.0, 0.087, 500.0),
    (14, 16, 0.38, 11.0, 0.059, 500.0),
    (15, 16, 0.33, 11.0, 0.017, 500.0),
    (15, 21, 0.41, 11.0, 0.049, 500.0),
    (15, 21, 0.41, 11.0, 0.049, 500.0),
    (15, 24, 0.41, 11.0, 0.052, 500.0),
    (16, 17, 0.35, 11.0, 0.026, 500.0),
    (16, 19, 0.34, 11.0, 0.023, 500.0),
    (17, 18, 0.32, 11.0, 0.014, 500.0),
    (17, 22, 0.54, 11.0, 0.105, 500.0),
    (18, 21, 0.35, 11.0, 0.026, 500.0),
    (18, 21, 0.35, 11.0, 0.026, 500.0),
    (19, 20, 0.38, 11.0, 0.040, 500.0),
    (19, 20, 0.38, 11.0, 0.040, 500.0),
    (20, 23, 0.34, 11.0, 0.022, 500.0),
    (20, 23, 0.34, 11.0, 0.022, 500.0),
    (21, 22, 0.45, 11.0, 0.068, 500.0),
]

# weekly peak in percent of annual peak, weeks 1-52
WEEKLY_PCT = [
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7, 71.5, 72.7,
    70.4, 75.0, 72.1, 80.0, 75.4, 83.7, 87.0, 88.0, 85.6, 81.1, 90.0, 88.7,
    89.6, 86.1, 75.5, 81.6, 80.1, 88.0, 72.2, 77.6, 80.0, 72.9, 72.6, 70.5,
    78.0, 69.5, 72.4, 72.4, 74.3, 74.4, 80.0, 88.1, 88.5, 90.9, 94.0, 89.0,
    94.2, 97.0, 100.0, 95.2,
]

# daily peak in percent of weekly peak, Monday..Sunday
DAILY_PCT = [93.0, 100.0, 98.0, 96.0, 94.0, 77.0, 75.0]

# hourly load in percent of daily peak: season -> (weekday, weekend)
HOURLY_PCT = {
    "winter": (
        [67, 63, 60, 59, 59, 60, 74, 86, 95, 96, 96, 95,
         95, 95, 93, 94, 99, 100, 100, 96, 91, 83, 73, 63],
        [78, 72, 68, 66, 64, 65, 66, 70, 80, 88, 90, 91,
         90, 88, 87, 87, 91, 100, 99, 97, 94, 92, 87, 81],
    ),
    "summer": (
        [64, 60, 58, 56, 56, 58, 64, 76, 87, 95, 99, 100,
         99, 100, 100, 97, 96, 96, 93, 92, 92, 93, 87, 72],
        [74, 70, 66, 65, 64, 62, 62, 66, 81, 86, 91, 93,
         93, 92, 91, 91, 92, 94, 95, 95, 100, 93, 88, 80],
    ),
    "shoulder": (
        [63, 62, 60, 58, 59, 65, 72, 85, 95, 99, 100, 99,
         93, 92, 90, 88, 90, 92, 96, 98, 96, 90, 80, 70],
        [75, 73, 69, 66, 65, 65, 68, 74, 83, 89, 92, 94,
         91, 90, 90, 86, 85, 88, 92, 100, 97, 95, 90, 85],
    ),
}

WINTER_WEEKS = set(range(1, 9)) | set(range(44, 53))
SUMMER_WEEKS = set(range(18, 31))


def season_of(week: int) -> str:
    if week in WINTER_WEEKS:
        return "winter"
    if week in SUMMER_WEEKS:
        return "summer"
    return "shoulder"


def hourly_trace() -> np.ndarray:
    hours = []
    for week in range(1, 53):
        season = season_of(week)
        for day in range(7):  # week starts on Monday
            weekend = day >= 5
            profile = HOURLY_PCT[season][1 if weekend else 0]
            daily_peak = PEAK_MW * WEEKLY_PCT[week - 1] / 100.0 * DAILY_PCT[day] / 100.0
            hours.extend(daily_peak * h / 100.0 for h in profile)
    trace = np.array(hours)
    assert trace.size == 8736
    # wrap the first day to fill a calendar year of 8760 hours
    return np.concatenate([trace, trace[:24]])


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    generators = []
    for idx, (bus, cls) in enumerate(UNITS, start=1):
        cap, mttf, mttr = UNIT_CLASSES[cls]
        generators.append({
            "id": f"{cls}-{idx}",
            "bus": bus,
            "capacity_mw": cap,
            "availability": round(mttf / (mttf + mttr), 10),
        })
    assert len(generators) == 32
    assert sum(g["capacity_mw"] for g in generators) == 3405.0

    lines = []
    for idx, (a, b, rate, dur, x, cont) in enumerate(BRANCHES, start=1):
        lines.append({
            "id": f"L{idx}",
            "from_bus": a,
            "to_bus": b,
            "reactance_pu": x,
            "rating_mw": cont,
            "availability": round(1.0 - rate * dur / 8760.0, 10),
        })
    assert len(lines) == 38

    assert sum(BUS_LOAD_MW.values()) == int(PEAK_MW)
    network = {
        "schema_version": 1,
        "name": "rts-single-area",
        "buses": list(range(1, 25)),
        "peak_demand_mw": PEAK_MW,
        "bus_load_mw": {int(k): int(v) for k, v in sorted(BUS_LOAD_MW.items())},
        "generators": generators,
        "lines": lines,
        "demand_trace": "demand.csv",
    }
    with open(OUT / "network.yaml", "w") as f:
        yaml.safe_dump(network, f, sort_keys=False)

    trace = hourly_trace()
    with open(OUT / "demand.csv", "w") as f:
        f.write("demand_mw\n")
        f.writelines(f"{v:.6f}\n" for v in trace)

    print(f"wrote {OUT / 'network.yaml'} and demand.csv "
          f"(peak {trace.max():.1f} MW, mean {trace.mean():.1f} MW)")


if __name__ == "__main__":
    main()
