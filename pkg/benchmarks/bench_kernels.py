"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20]

Both backends are imported directly, so the comparison does not depend on
which one ``stablemcd`` selected at import.
"""

import argparse
import timeit

import numpy as np

from stablemcd import _fallback

try:
    from stablemcd import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    # projection outlyingness: k directions, reference of m rows, n queries
    for k, m, n in [(1000, 90, 1), (1000, 90, 120), (1000, 450, 500), (2000, 240, 300)]:
        ref = rng.standard_normal((k, m))
        query = rng.standard_normal((k, n))
        yield f"outlyingness k={k} m={m} n={n}", "outlyingness", (query, ref)
    # a batch of rank-one swaps on a p-dimensional subset estimate
    for p, swaps in [(2, 10), (10, 10), (10, 40)]:
        Z = rng.standard_normal((200, p))
        h = 150
        mu = Z[:h].mean(axis=0)
        sigma = np.cov(Z[:h].T, bias=True).reshape(p, p)
        yield (
            f"apply_swaps p={p} swaps={swaps}",
            "apply_swaps",
            (mu, sigma, np.linalg.inv(sigma), float(h), Z[h:h + swaps], Z[:swaps]),
        )


def _copy_args(args):
    return tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = [("fallback", _fallback)] + ([("cython", _kernels)] if _kernels is not None else [])
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'case':<40}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn_name, fn_args in _cases(rng):
        times = []
        for _, mod in backends:
            fn = getattr(mod, fn_name)
            # in-place kernels get fresh buffers outside the timed region
            per = min(
                timeit.repeat(
                    "fn(*a)", setup="a = copy(args)", globals={"fn": fn, "copy": _copy_args, "args": fn_args},
                    number=1, repeat=args.repeat,
                )
            )
            times.append(per)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<40}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times) + speed)


if __name__ == "__main__":
    main()
