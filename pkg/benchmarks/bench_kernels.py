"""Timings for the edge kernels: compiled extension vs pure numpy.

Micro-benchmarks call both backend implementations directly on synthetic
edge lists; the epoch benchmark times full training epochs in a
subprocess so the backend choice (made at import) is honored.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--skip-epoch]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from citetrend.kernels import available_backends

SIZES = [(2_000, 8_000), (20_000, 80_000), (50_000, 200_000)]

EPOCH_SNIPPET = """
import time
from citetrend.data import bundle_presets, generate_synthetic
from citetrend.experiments import TrainConfig, label_vector, train
from citetrend.features import build_features
from citetrend.graph import label_by_percentile, split_by_year
from citetrend.kernels import backend
from citetrend.models import build_model, prepare_inputs

cfg = bundle_presets()["mid"]
graph = generate_synthetic(cfg)
split = split_by_year(graph, cfg.end_year, 10)
features = build_features(graph, split)
labels = label_by_percentile(graph, split.node_ids, 0.9)
inputs = prepare_inputs(graph, split, features)
tc = TrainConfig(epochs=20)
model = build_model("gnn", inputs.text_width, inputs.affil_width,
                    tc.model_config(), tc.seed)
t0 = time.perf_counter()
train(model, inputs, labels, tc)
dt = time.perf_counter() - t0
print(f"{backend()}: {tc.epochs} epochs in {dt:.2f}s "
      f"({1000 * dt / tc.epochs:.0f} ms/epoch)")
"""


def edge_case(n_nodes: int, n_edges: int, rng) -> tuple:
    src = np.sort(rng.integers(0, n_nodes, size=n_edges)).astype(np.int64)
    vals = rng.normal(size=n_edges)
    mat = rng.normal(size=(n_edges, 32))
    return src, vals, mat


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_micro(repeats: int) -> None:
    backends = available_backends()
    rng = np.random.default_rng(0)
    names = ["scatter_add", "scatter_max", "segment_softmax",
             "segment_softmax_grad"]
    print(f"{'kernel':24} {'edges':>9}", end="")
    for b in backends:
        print(f" {b:>12}", end="")
    if len(backends) == 2:
        print(f" {'speedup':>8}", end="")
    print()

    for n_nodes, n_edges in SIZES:
        src, vals, mat = edge_case(n_nodes, n_edges, rng)
        soft = backends["pure"].segment_softmax(vals, src, n_nodes)
        grad_in = rng.normal(size=n_edges)
        calls = {
            "scatter_add": lambda impl: impl.scatter_add(mat, src, n_nodes),
            "scatter_max": lambda impl: impl.scatter_max(mat, src, n_nodes),
            "segment_softmax": lambda impl: impl.segment_softmax(
                vals, src, n_nodes),
            "segment_softmax_grad": lambda impl: impl.segment_softmax_grad(
                soft, grad_in, src, n_nodes),
        }
        for name in names:
            print(f"{name:24} {n_edges:>9}", end="")
            per_backend = {}
            for bname, impl in backends.items():
                dt = best_of(lambda: calls[name](impl), repeats)
                per_backend[bname] = dt
                print(f" {1000 * dt:>10.3f}ms", end="")
            if len(per_backend) == 2:
                print(f" {per_backend['pure'] / per_backend['compiled']:>7.2f}x",
                      end="")
            print()
        print()


def run_epoch() -> None:
    print("training epochs (mid preset, 20 epochs, gnn):")
    for env_value in (None, "1"):
        env = dict(os.environ)
        env.pop("CITETREND_PURE_KERNELS", None)
        if env_value:
            env["CITETREND_PURE_KERNELS"] = env_value
        out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET],
                             capture_output=True, text=True, env=env)
        if out.returncode != 0:
            print(out.stderr.strip(), file=sys.stderr)
            raise SystemExit(1)
        print(" ", out.stdout.strip())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of this many runs")
    parser.add_argument("--skip-epoch", action="store_true",
                        help="only run the kernel micro-benchmarks")
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("note: compiled extension not importable; timing pure only\n")
    run_micro(args.repeats)
    if not args.skip_epoch:
        run_epoch()


if __name__ == "__main__":
    main()
