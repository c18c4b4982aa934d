from __future__ import annotations
import argparse
from pathlib import Path

import numpy as np
import pandas as pd

# Agregación independiente de study.csv (numpy puro por grupo), para contrastar study_summary.csv.
KEYS = ["n", "c", "method", "target_metric", "target_value"]


def aggregate(study_csv: Path) -> pd.DataFrame:
    df = pd.read_csv(study_csv, comment="#")
    rows = []
    for key, grp in df.groupby(KEYS, sort=True):
        vals = grp["required_q"].to_numpy(dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size:
            med, lo, hi = np.percentile(vals, [50.0, 2.5, 97.5])
        else:
            med = lo = hi = np.nan
        rows.append(dict(zip(KEYS, key), required_q_median=med, required_q_q025=lo, required_q_q975=hi, datasets=len(grp)))
    return pd.DataFrame(rows)


def compare(study_csv: Path, summary_csv: Path, atol: float = 1e-12) -> int:
    mine = aggregate(study_csv)
    theirs = pd.read_csv(summary_csv, comment="#")
    merged = mine.merge(theirs, on=KEYS, suffixes=("", "_summary"))
    bad = 0
    for col in ("required_q_median", "required_q_q025", "required_q_q975"):
        a, b = merged[col].to_numpy(dtype=float), merged[f"{col}_summary"].to_numpy(dtype=float)
        ok = np.isclose(a, b, rtol=0.0, atol=atol, equal_nan=True)
        bad += int((~ok).sum())
    print(f"grupos: {len(merged)} · discrepancias: {bad}")
    return bad


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Recalcula los cuantiles de study_summary.csv desde study.csv y los compara.")
    parser.add_argument("study_dir", nargs="?", default="output/study", help="Carpeta con study.csv y study_summary.csv")
    parser.add_argument("--atol", type=float, default=1e-12, help="Tolerancia absoluta por cuantil")
    args = parser.parse_args(argv)

    base = Path(args.study_dir).resolve()
    if not (base / "study.csv").exists():
        raise SystemExit(f"No se encontró study.csv en: {base}")
    return 1 if compare(base / "study.csv", base / "study_summary.csv", atol=args.atol) else 0


if __name__ == "__main__":
    raise SystemExit(main())
