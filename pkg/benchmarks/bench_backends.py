"""Time the compiled core against the pure-Python fallback.

The fallback is timed in a child process with ``UNIFIELD_PURE=1`` so that no
compiled code is reachable from it.  Both backends must return identical
arrays; the script checks a digest of every output.

    python3 benchmarks/bench_backends.py --reps 2000
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _cases(args):
    from unifield._backend import core
    from unifield.kernel import compute_minorization, k2_kernel
    from unifield.sampler import coupling_tables

    k = k2_kernel()
    delta, phi, res = coupling_tables(compute_minorization(k), k)
    reps = np.arange(args.reps)
    zb = np.zeros((args.reps, args.size), dtype=np.int32)
    return core, {
        f"forward_field {args.size}x{args.size}": lambda: core.forward_field(
            1, reps, args.size, args.size, zb, zb, delta, phi, res),
        f"perfect_site {args.window}x{args.window}": lambda: core.perfect_site(
            1, reps, args.window, args.window, delta, phi, res, 10**6, True),
    }


def _digest(out):
    h = hashlib.sha256()
    for a in (out if isinstance(out, tuple) else (out,)):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def measure(args) -> dict:
    from unifield import _backend
    _, cases = _cases(args)
    rows = {}
    for name, fn in cases.items():
        best, out = float("inf"), None
        for _ in range(args.repeat):
            t = time.perf_counter()
            out = fn()
            best = min(best, time.perf_counter() - t)
        rows[name] = {"seconds": best, "digest": _digest(out)}
    return {"backend": _backend.NAME, "rows": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--size", type=int, default=32, help="forward box side")
    ap.add_argument("--window", type=int, default=4, help="perfect-sampler box side")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--emit", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.emit:
        json.dump(measure(args), sys.stdout)
        return

    here = measure(args)
    child = subprocess.run(
        [sys.executable, __file__, "--emit", "--reps", str(args.reps), "--size", str(args.size),
         "--window", str(args.window), "--repeat", str(args.repeat)],
        env=dict(os.environ, UNIFIELD_PURE="1"), capture_output=True, text=True, check=True)
    pure = json.loads(child.stdout)
    results = [pure] if here["backend"] == "python" else [here, pure]
    if here["backend"] == "python":
        print("compiled core not available; timing the fallback only")

    print(f"{'kernel':<24}{'backend':<10}{'seconds':>10}{'reps/s':>12}{'speedup':>9}")
    for name, ref in pure["rows"].items():
        for res in results:
            row = res["rows"][name]
            if row["digest"] != ref["digest"]:
                raise SystemExit(f"{name}: backends disagree")
            print(f"{name:<24}{res['backend']:<10}{row['seconds']:>10.3f}"
                  f"{args.reps / row['seconds']:>12.0f}{ref['seconds'] / row['seconds']:>8.1f}x")


if __name__ == "__main__":
    main()
