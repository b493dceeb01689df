#!/usr/bin/env python3
"""Regenerate the bundled 14-county fixture under data/ma14/.

Populations follow the 2020 Census county totals for Massachusetts. GDP values
are rounded approximations (billions of USD). Case counts approximate a
mid-March 2020 snapshot. Trip counts are synthetic: a gravity model over
county centroids with a dominant within-county component. The output is
deterministic.
"""
import csv
import math
import pathlib

COUNTIES = [
    # name, population, lat, lon, gdp (B USD), cum_cases, deaths
    ("Barnstable", 228996, 41.70, -70.30, 12.1, 3, 0),
    ("Berkshire", 129026, 42.37, -73.20, 7.3, 11, 0),
    ("Bristol", 579200, 41.80, -71.10, 26.0, 3, 0),
    ("Dukes", 20600, 41.40, -70.63, 1.6, 0, 0),
    ("Essex", 809829, 42.65, -70.95, 44.9, 14, 0),
    ("Franklin", 71029, 42.58, -72.58, 3.2, 1, 0),
    ("Hampden", 465825, 42.13, -72.63, 24.8, 3, 0),
    ("Hampshire", 162308, 42.34, -72.66, 7.4, 2, 0),
    ("Middlesex", 1632002, 42.48, -71.39, 190.5, 58, 0),
    ("Nantucket", 14255, 41.28, -70.10, 1.5, 0, 0),
    ("Norfolk", 725981, 42.17, -71.18, 56.3, 36, 0),
    ("Plymouth", 530819, 41.97, -70.82, 22.4, 5, 0),
    ("Suffolk", 797936, 42.33, -71.07, 161.2, 40, 0),
    ("Worcester", 862111, 42.35, -71.91, 45.6, 8, 0),
]
DATE = "2020-03-16"


def main() -> None:
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "ma14"
    out.mkdir(parents=True, exist_ok=True)
    n = len(COUNTIES)
    lat0 = sum(c[2] for c in COUNTIES) / n
    lon0 = sum(c[3] for c in COUNTIES) / n
    xy = [((c[3] - lon0) * 82.0, (c[2] - lat0) * 111.0) for c in COUNTIES]
    total = sum(c[1] for c in COUNTIES)
    norm = total ** 0.8 / 80.0 ** 1.6

    with open(out / "flows.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["origin", "destination", "trips"])
        for i, ci in enumerate(COUNTIES):
            for j, cj in enumerate(COUNTIES):
                if i == j:
                    trips = 2.0 * ci[1]
                else:
                    d = math.dist(xy[i], xy[j])
                    trips = 0.35 * ci[1] * cj[1] ** 0.8 / (d + 10.0) ** 1.6 / norm
                w.writerow([ci[0], cj[0], int(round(trips))])

    with open(out / "population.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "population"])
        for c in COUNTIES:
            w.writerow([c[0], c[1]])

    with open(out / "gdp.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "gdp"])
        for c in COUNTIES:
            w.writerow([c[0], c[4]])

    with open(out / "cases.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "cum_cases", "deaths", "date"])
        for c in COUNTIES:
            w.writerow([c[0], c[5], c[6], DATE])


if __name__ == "__main__":
    main()
