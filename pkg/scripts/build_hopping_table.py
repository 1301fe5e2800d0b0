"""Regenerate the shipped H2+ hopping table from clamped-nuclei energies."""

import argparse
from pathlib import Path

from ultraindex.chemistry import h2plus_hopping_table

DEFAULT = Path(__file__).resolve().parents[1] / "src" / "ultraindex" / "data" / "hopping_h2plus.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT)
    args = ap.parse_args()
    table = h2plus_hopping_table()
    args.out.write_text(table.to_csv())
    print(f"wrote {len(table.d_over_a0)} rows to {args.out}")


if __name__ == "__main__":
    main()
