"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time per kernel for each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np
from scipy.signal import find_peaks

from csecg import _backend
from csecg.detector import DetectorConfig, bandpass, derivative, square_and_integrate
from csecg.ingest import encode_212
from csecg.pipeline import generate_synthetic_record


def workloads():
    rng = np.random.default_rng(0)
    fs = 360.0
    rec = generate_synthetic_record(72, 1800, fs, seed=1)  # 30 minutes, like a full MIT-BIH record
    x = rec.physical(0) + 0.05 * rng.standard_normal(rec.channels[0].size)
    cfg = DetectorConfig(fs)
    der = derivative(bandpass(x, cfg), cfg)
    env = square_and_integrate(der, cfg)
    cand, _ = find_peaks(env)
    learn = cfg.seconds(cfg.learning_period)
    pick_args = (env, np.abs(der), cand.astype(np.int64), cfg.seconds(cfg.refractory),
                 cfg.seconds(cfg.t_wave_window), cfg.window_samples, float(env[:learn].max() / 3),
                 float(env[:learn].mean() / 2), 0.125, 0.125, 0.25, True, 1.66, 0.25)
    raw = np.concatenate(rec.channels).astype(np.int64)
    packed = encode_212(rec.channels)
    total = sum(c.size for c in rec.channels)
    return {
        "decode_212 (30 min, 2 ch)": lambda k: k.decode_212(packed, total),
        "block_sum int d=8": lambda k: k.block_sum(raw, 8),
        "block_sum float d=2": lambda k: k.block_sum(x, 2),
        "pick_qrs (30 min)": lambda k: k.pick_qrs(*pick_args),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    else:
        print("compiled kernels not built; timing the pure-Python backend only")
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + ("   speed-up" if len(backends) > 1 else ""))
    for name, fn in workloads().items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        row = f"{name:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
        if len(times) > 1:
            row += f"   {times['python'] / times['cython']:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
