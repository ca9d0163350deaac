"""Time the frame-search kernels under both backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

The numpy timing runs in a subprocess with CONDSEQ_NO_NUMBA=1.
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKLOAD = """
import json, time
import numpy as np
from condseq import kernels
from condseq.decide import schema_instance, valid_on_frames
from condseq.formula import Neg
from condseq.order_model import canonical_orders

repeat = {repeat}
orders = canonical_orders(3)
frames = [[list(o) for o in fr] for fr in orders]
packed = kernels.pack_orders(frames)
rows = {{}}
for name in ("Flattening", "Sequentiality", "Cautious Importation"):
    prog = kernels.compile_formula(Neg(schema_instance(name)))
    targets = np.ones(len(packed[2]), np.int64)
    kernels.first_hits(prog, *packed, targets)  # warm-up and JIT
    t = time.perf_counter()
    for _ in range(repeat):
        kernels.first_hits(prog, *packed, targets)
    rows[name] = (time.perf_counter() - t) / repeat
t = time.perf_counter()
for _ in range(repeat):
    valid_on_frames(schema_instance("Flattening"), orders)
rows["valid_on_frames(Flattening)"] = (time.perf_counter() - t) / repeat
print(json.dumps({{"backend": kernels.backend(), "seconds": rows}}))
"""


def run(repeat: int, no_numba: bool) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["CONDSEQ_NO_NUMBA"] = "1"
    else:
        env.pop("CONDSEQ_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", WORKLOAD.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    results = [run(args.repeat, False), run(args.repeat, True)]
    names = list(results[0]["seconds"])
    print(f"{'kernel':34s}" + "".join(f"{r['backend']:>12s}" for r in results))
    for n in names:
        print(f"{n:34s}" + "".join(f"{r['seconds'][n] * 1e3:10.2f}ms" for r in results))


if __name__ == "__main__":
    main()
