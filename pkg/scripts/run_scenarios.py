"""Write the CSV plot data of every scenario into one directory.

Usage: python scripts/run_scenarios.py [--config run.ini] [--out-dir results] [--threads N]
"""
import argparse
from pathlib import Path

from tfqkd.config import RunConfig
from tfqkd.scenarios import SCENARIOS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(SCENARIOS), help="subset of scenarios")
    args = ap.parse_args()
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in args.only or sorted(SCENARIOS):
        res = SCENARIOS[name](cfg, threads=args.threads)
        for p in res.write(args.out_dir):
            print(p)


if __name__ == "__main__":
    main()
