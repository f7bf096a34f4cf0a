"""Run every config in configs/ (desk scale unless --full) and list the outputs.

Usage: python3 scripts/run_desk_suite.py [--full] [--only fig1 ridge ...] [--workers N]
"""
import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all but smoke)")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    if not (ROOT / "data" / "demo.csv").exists():
        subprocess.run([sys.executable, str(ROOT / "scripts" / "make_demo_data.py")], check=True)
    configs = sorted(p for p in (ROOT / "configs").glob("*.yaml") if p.stem != "smoke")
    if args.only:
        configs = [p for p in configs if p.stem in args.only]
    status = 0
    for cfg in configs:
        cmd = [sys.executable, "-m", "augbagg.cli", "-v", "run", str(cfg)]
        if args.full:
            cmd.append("--full")
        if args.workers:
            cmd += ["--workers", str(args.workers)]
        print("$", " ".join(cmd), flush=True)
        rc = subprocess.run(cmd).returncode
        status = status or rc
    sys.exit(status)


if __name__ == "__main__":
    main()
