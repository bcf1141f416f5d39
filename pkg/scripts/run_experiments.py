"""Run every experiment sweep and write one CSV per sweep.

    python3 scripts/run_experiments.py [OUTDIR] [--threads N]

Summary lines go to stdout; exit status is non-zero if any sweep fails
its verdict or errors out.
"""

import argparse
import contextlib
import io
import sys
from pathlib import Path

from supersel.cli import main

HERE = Path(__file__).resolve().parent

SWEEPS = {
    "overlap": ["overlap", "--config", str(HERE / "configs" / "overlap.conf")],
    "commutator": ["commutator", "--expr", "x2*p1^2 + (0.5-1i)*x1*p2^3 + p3",
                   "--n-list", "8,16,32,64,128,256,512,1024"],
    "measure": ["measure", "--config", str(HERE / "configs" / "measure.conf")],
    "measure_sampled": ["measure", "--amplitudes", "0.6,0.8", "--kappa", "0.95",
                        "--env-list", "0,50,100", "--apparatus-sites", "10",
                        "--pointer-overlap", "0.5", "--gamma", "1", "--t", "0.01",
                        "--mode", "sampled"],
    "split": ["split", "--n-sites", "200", "--k-list", "1,2,5,10,20,50,100,200"],
    "cat": ["cat", "--gamma", "0.01", "--n-list", "10,100,1000,10000"],
    "scale_dust": ["scale", "--atoms", "1e10", "--atom-mass", "1e-26"],
    "scale_macro": ["scale", "--atoms", "1e23", "--atom-mass", "1e-26"],
}


def cli_args():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("outdir", nargs="?", default="results")
    ap.add_argument("--threads", type=int, default=1)
    return ap.parse_args()


def main_script() -> int:
    args = cli_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    failures = []
    for name, argv in SWEEPS.items():
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(argv + ["--threads", str(args.threads), "--out", str(out / f"{name}.csv")])
        summary = buf.getvalue().strip()
        print(f"{name:16s} {summary}")
        if code != 0 or "pass=false" in summary:
            failures.append(name)
    if failures:
        print("failed:", ", ".join(failures), file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main_script())
