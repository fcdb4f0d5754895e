"""Compare the compiled and numpy kernel backends.

Times each hot kernel on fixed inputs, then end-to-end index build and
query latency, once per available backend.

    python3 benchmarks/bench_backends.py [--n 20000] [--queries 200]
"""

import argparse
import time

import numpy as np

from pqt import PqtConfig, VectorSet, _backend, build_index, search_batch, synth_clustered
from pqt.linequant import pair_lookup, quantize_lambda
from pqt.tree import lists_from_slots


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    X = (rng.normal(size=(20_000, 32)) * 20).astype(np.float32)
    C = rng.normal(size=(16, 32)) * 20
    fine = rng.normal(size=(16, 16, 4)) * 20
    Xl = (rng.normal(size=(2_000, 64)) * 20).astype(np.float32)
    pi, pj = pair_lookup(16)
    cand = rng.permutation(50_000).astype(np.int64)[:4096]
    lam_q = quantize_lambda(rng.uniform(size=(50_000, 32)))
    pid = rng.integers(0, len(pi), size=(50_000, 32)).astype(np.uint16)
    A = rng.uniform(0, 100, size=(32, 16))
    table = rng.uniform(0, 100, size=(32, 16, 16))
    slots = rng.integers(0, 200_000, size=50_000)
    lists = lists_from_slots(slots, 200_000)
    order = rng.permutation(200_000).astype(np.int64)
    rows = rng.integers(0, 20_000, size=4096).astype(np.int64)
    y = X[0]
    return {
        "nearest 20000x32 vs 16": lambda k: k.nearest(X, C),
        "sq_dists 4096 rows": lambda k: k.sq_dists(X, rows, y),
        "encode_lines 2000x64, 16 parts": lambda k: k.encode_lines(Xl, fine),
        "line_distances_codes 4096 cand": lambda k: k.line_distances_codes(cand, lam_q, pid, pi, pj, A, table),
        "scatter_ids 50000": lambda k: k.scatter_ids(slots, lists.offsets),
        "gather budget 4096": lambda k: k.gather(order, lists.offsets, lists.ids, 4096),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--queries", type=int, default=200)
    args = ap.parse_args()

    names = _backend.available()
    previous = _backend.name
    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases.items():
        t = {n: best_of(lambda: fn(_backend.BACKENDS[n])) for n in names}
        row = f"{label:34s}" + "".join(f"{1e3 * t[n]:10.2f}ms" for n in names)
        if len(names) > 1:
            row += f"{t['python'] / t['cython']:11.1f}x"
        print(row)

    data = synth_clustered(args.n + args.queries, 64, 32, 20.0, seed=1)
    db, Y = VectorSet(data.data[:args.n]), data.vectors[args.n:]
    cfg = PqtConfig(dim=64, p_tree=2, k1=16, k2=8, w=8, p_line=32, seed=1)
    print()
    for name in names:
        _backend.use(name)
        t0 = time.perf_counter()
        index = build_index(db, db, cfg)
        build_s = time.perf_counter() - t0
        search_batch(index, Y[:5], 100)
        t0 = time.perf_counter()
        search_batch(index, Y, 100)
        q_ms = 1e3 * (time.perf_counter() - t0) / len(Y)
        print(f"{name:8s} build {args.n} vectors: {build_s:6.2f}s   query: {q_ms:6.3f} ms/query")
    _backend.use(previous)


if __name__ == "__main__":
    main()
