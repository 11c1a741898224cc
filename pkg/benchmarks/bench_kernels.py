"""Compare the numba kernels with the plain numpy / Python fallback.

Each backend runs in a fresh interpreter because the switch
(``OCTWALK_NO_NUMBA``) is read at import time.  Numba timings exclude the
first call, which compiles (or loads the on-disk cache).

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CASES = {
    # name: (setup, statement)
    "count M-dagger N=60 all": (
        "from octwalk.countkernel import count_layers\n"
        "from octwalk.stepset import from_diagram\n"
        "m = from_diagram('110111000 11100110 000110111')",
        "count_layers(m, 60, 32749, 'all')",
    ),
    "count S* N=120 excursions": (
        "from octwalk.countkernel import count_layers\n"
        "from octwalk.stepset import encode\n"
        "m = encode([(-1, -1, -1), (1, 0, 0), (0, 1, 0), (0, 0, 1)])",
        "count_layers(m, 120, 32749, 'excursions')",
    ),
    "canonical classes |S|=4": (
        "from octwalk.stepset import canonical_masks_of_size",
        "canonical_masks_of_size(4)",
    ),
    "filters 2-3 on 5000 classes": (
        "from octwalk.stepset import canonical_masks_of_size\n"
        "from octwalk.reduce import classify\n"
        "ms = canonical_masks_of_size(5)[:5000]",
        "classify(ms)",
    ),
    "group screen on 2000 classes": (
        "from octwalk.stepset import canonical_masks_of_size\n"
        "from octwalk.walkgroup import screen_many\n"
        "ms = canonical_masks_of_size(6)[:2000]",
        "screen_many(ms)",
    ),
}

RUNNER = """
import json, sys, time
setup, stmt, repeat = json.loads(sys.argv[1])
ns = {}
exec(setup, ns)
exec(stmt, ns)  # warm-up (numba compile / cache load)
best = min(
    (lambda t0: (exec(stmt, ns), time.perf_counter() - t0)[1])(time.perf_counter())
    for _ in range(repeat)
)
print(best)
"""


def run(case, numba: bool, repeat: int) -> float:
    env = dict(os.environ)
    env["OCTWALK_NO_NUMBA"] = "0" if numba else "1"
    setup, stmt = CASES[case]
    out = subprocess.run(
        [sys.executable, "-c", RUNNER, json.dumps([setup, stmt, repeat])],
        env=env, capture_output=True, text=True, check=True,
    )
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--case", action="append", choices=sorted(CASES), help="run only these cases")
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)
    results = []
    print(f"{'case':<32} {'numba s':>10} {'fallback s':>11} {'speedup':>8}")
    for case in args.case or CASES:
        t_nb = run(case, True, args.repeat)
        t_np = run(case, False, 1 if "screen" in case or "filters" in case else args.repeat)
        results.append({"case": case, "numba": t_nb, "fallback": t_np})
        print(f"{case:<32} {t_nb:>10.4f} {t_np:>11.4f} {t_np / t_nb:>7.1f}x", flush=True)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1)


if __name__ == "__main__":
    t0 = time.perf_counter()
    main()
    print(f"total {time.perf_counter() - t0:.1f} s")
