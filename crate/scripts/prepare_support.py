#!/usr/bin/env python3
"""Convert the public SUPPORT study file (support2.csv) into the numeric
layout this repository's loader ingests.

Usage:
    python3 scripts/prepare_support.py support2.csv data/support_processed.csv

The raw file is available from the Vanderbilt Biostatistics dataset
repository (https://hbiostat.org/data/repo/support2.csv). This script only
selects columns and dummy-codes the categorical ones; every missing value is
written through as an empty cell. Imputation policy lives in
data/support_schema.json, which the loader applies: recommended laboratory
defaults for the lab columns, sample medians elsewhere, and any column more
than 44% missing is dropped.

The exact variable selection of the original analysis is not published in
full; this is a documented reconstruction that lands on 39 predictors after
the loader's missingness filter (glucose, bun, urine, and adlp exceed it).
"""

import csv
import sys

# Passed through as numbers (missing kept blank for the loader's policy).
NUMERIC = [
    "age", "num.co", "edu", "scoma", "meanbp", "wblc", "hrt", "resp",
    "temp", "pafi", "alb", "bili", "crea", "sod", "ph", "glucose", "bun",
    "urine", "adlp", "adls", "adlsc", "diabetes", "dementia",
]

# Categorical columns: (column, [levels beyond the reference]).
DUMMIES = {
    "sex": ["male"],
    "income": ["$11-$25k", "$25-$50k", ">$50k"],
    "race": ["black", "hispanic", "asian", "other"],
    "ca": ["yes", "metastatic"],
    "dzgroup": [
        "CHF", "COPD", "Cirrhosis", "Colon Cancer", "Coma",
        "Lung Cancer", "MOSF w/Malig",
    ],
    "dzclass": ["COPD/CHF/Cirrhosis", "Cancer", "Coma"],
}


def slug(text):
    out = []
    for ch in text.lower():
        out.append(ch if ch.isalnum() else "_")
    cleaned = "".join(out).strip("_")
    while "__" in cleaned:
        cleaned = cleaned.replace("__", "_")
    return cleaned


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = sys.argv[1], sys.argv[2]

    with open(src, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)

    header = ["time", "event"]
    header += [slug(c) for c in NUMERIC]
    dummy_names = []
    for column, levels in DUMMIES.items():
        for level in levels:
            name = f"{slug(column)}_{slug(level)}"
            dummy_names.append((column, level, name))
            header.append(name)

    kept = 0
    with open(dst, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            time = row.get("d.time", "").strip()
            event = row.get("death", "").strip()
            if not time or event not in ("0", "1"):
                continue
            record = [time, event]
            for column in NUMERIC:
                value = row.get(column, "").strip()
                record.append(value if value else "")
            for column, level, _ in dummy_names:
                value = row.get(column, "").strip()
                record.append("1" if value == level else "0")
            writer.writerow(record)
            kept += 1

    n_features = len(header) - 2
    print(f"wrote {kept} rows with {n_features} candidate predictors to {dst}")
    print("load with data/support_schema.json; columns above 44% missing are dropped there")


if __name__ == "__main__":
    main()
