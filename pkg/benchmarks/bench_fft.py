"""Compare the compiled and numpy FFT kernels.

Usage: python benchmarks/bench_fft.py [--rows 64] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from fmlprec.spectral import KERNELS, fft, rfft_along

LENGTHS = (50, 64, 127, 128, 256, 512, 1000, 1024)


def best(fn, repeat: int) -> float:
    number = 10
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=64, help="independent transforms per call")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = sorted(KERNELS)
    gen = np.random.default_rng(0)
    print("op\tn\t" + "\t".join(f"{b} (us)" for b in backends) + ("\tspeedup" if len(backends) > 1 else ""))
    for n in LENGTHS:
        x = gen.standard_normal((args.rows, n)) + 1j * gen.standard_normal((args.rows, n))
        xr = gen.standard_normal((n, args.rows))
        for op, fn in (("fft", lambda b: fft(x, backend=b)), ("rfft", lambda b: rfft_along(xr, axis=0, backend=b))):
            times = [best(lambda: fn(b), args.repeat) * 1e6 for b in backends]
            row = f"{op}\t{n}\t" + "\t".join(f"{t:.1f}" for t in times)
            if len(times) > 1:
                row += f"\t{times[backends.index('python')] / times[backends.index('cython')]:.2f}x"
            print(row)


if __name__ == "__main__":
    main()
