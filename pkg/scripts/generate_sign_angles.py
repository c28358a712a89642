"""Regenerate the bundled sign-function phase angles with pyqsp.

Usage: python scripts/generate_sign_angles.py [--degrees 3,5,...] [--out PATH]

pyqsp is only needed here, not by the package.  Its angles use the Z-signal,
X-processing convention of ``neeqma.qsp`` directly (``Re <0|U|0>`` is the
polynomial).
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "src/neeqma/data/sign_phase_angles.txt"
KAPPA = 10


def angles_for(d: int) -> list[float]:
    cmd = ["pyqsp", "--hide-plot", f"--polyargs={d},{KAPPA}", "--plot-real-only",
           "--polyname", "poly_sign", "--return-angles", "poly"]
    env = dict(os.environ, MPLBACKEND="Agg")
    out = subprocess.run(cmd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
                         env=env).stdout
    # pyqsp can exit nonzero after printing the angles (plot teardown), so the
    # printed list is the success signal
    lines = [ln for ln in out.splitlines() if ln.startswith("[np.float64")]
    if not lines:
        sys.exit(f"pyqsp printed no angle list for d={d}:\n{out}")
    body = lines[-1].replace("np.float64(", "").replace(")", "").strip("[]")
    phis = [float(v) for v in body.split(",")]
    if len(phis) != d + 1:
        sys.exit(f"pyqsp returned {len(phis)} angles for d={d}")
    return phis


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--degrees", default=",".join(str(d) for d in range(3, 32, 2)))
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    lines = [f"# sign(x) approximations: pyqsp poly_sign, polyargs=d,{KAPPA}",
             "# <d> <phi_0> ... <phi_d>"]
    for d in (int(v) for v in args.degrees.split(",")):
        lines.append(f"{d} " + " ".join(repr(p) for p in angles_for(d)))
        print(f"d={d} done", file=sys.stderr)
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
