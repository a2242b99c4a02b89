#!/usr/bin/env python3
"""Writes synthetic hourly series for the shipped system configs.

Usage: gen_data.py [configs_dir]

Each system gets eight weeks of data: four weeks of history before the
planning start (enough for the bootstrap sampler) and four weeks after it.
Output is deterministic for a fixed seed.
"""

import math
import random
import sys
from datetime import datetime, timedelta
from pathlib import Path

HOURS = 8 * 7 * 24


def ar_noise(rng, n, sigma, phi=0.85):
    x, out = 0.0, []
    for _ in range(n):
        x = phi * x + rng.gauss(0.0, sigma)
        out.append(x)
    return out


def price(rng, n, level):
    noise = ar_noise(rng, n, 0.08 * level)
    out = []
    for t in range(n):
        h, d = t % 24, (t // 24) % 7
        shape = 1.0 + 0.25 * math.sin((h - 7) / 24 * 2 * math.pi) + 0.15 * math.exp(-((h - 18) ** 2) / 6)
        weekend = 0.85 if d >= 5 else 1.0
        out.append(level * shape * weekend + noise[t])
    return out


def heat(rng, n, base, swing):
    noise = ar_noise(rng, n, 0.04 * base)
    out = []
    for t in range(n):
        h = t % 24
        slow = 1.0 + 0.1 * math.sin(t / (24 * 9) * 2 * math.pi)
        day = 1.0 + swing * (0.6 * math.exp(-((h - 7) ** 2) / 4) + 0.3 * math.exp(-((h - 19) ** 2) / 6) - 0.25)
        out.append(max(0.05 * base, base * slow * day + noise[t]))
    return out


def solar(rng, n, peak):
    out = []
    for t in range(n):
        h = t % 24
        if t % 24 == 0:
            cloud = rng.uniform(0.2, 1.0)
        out.append(peak * cloud * max(0.0, math.sin((h - 6) / 12 * math.pi)))
    return out


def flat(rng, n, level):
    return [max(0.0, level + x) for x in ar_noise(rng, n, 0.05 * level)]


SYSTEMS = {
    "middelfart": (
        datetime(2019, 4, 15),
        lambda r: {
            "price": price(r, HOURS, 38.0),
            "heat_1": heat(r, HOURS, 7.5, 0.3),
            "heat_2": heat(r, HOURS, 3.0, 0.3),
        },
    ),
    "bronderslev": (
        datetime(2020, 12, 21),
        lambda r: {
            "price": price(r, HOURS, 48.0),
            "buy_price": [p + 12.0 for p in price(r, HOURS, 48.0)],
            "heat_1": heat(r, HOURS, 11.0, 0.25),
            "heat_2": heat(r, HOURS, 14.0, 0.25),
            "heat_3": heat(r, HOURS, 5.0, 0.25),
            "solar": solar(r, HOURS, 6.0),
        },
    ),
    "hillerod": (
        datetime(2021, 3, 8),
        lambda r: {
            "price": price(r, HOURS, 45.0),
            **{f"heat_{i + 1}": heat(r, HOURS, 0.45 * ub, 0.25) for i, ub in enumerate([20, 5, 2, 16.5, 22.2, 16, 2, 2])},
            "solar": solar(r, HOURS, 8.0),
            "waste_heat": flat(r, HOURS, 3.0),
        },
    ),
}


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "configs"
    for seed, (name, (start, make)) in enumerate(sorted(SYSTEMS.items())):
        rng = random.Random(1000 + seed)
        out = root / "data" / name
        out.mkdir(parents=True, exist_ok=True)
        for key, values in make(rng).items():
            with open(out / f"{key}.csv", "w") as f:
                f.write("timestamp,value\n")
                for t, v in enumerate(values):
                    ts = (start + timedelta(hours=t)).strftime("%Y-%m-%dT%H:%M:%S")
                    f.write(f"{ts},{v:.4f}\n")


if __name__ == "__main__":
    main()
