"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is timed on the same inputs through both backends, and the
outputs are checked to agree before any timing is reported.
"""

import argparse
import timeit

import numpy as np

from curveflow import _pykernels
from curveflow.pinch import PinchingConfig
from curveflow.sampling import random_sym_tensors, sample_unit_slice

try:
    from curveflow import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _cases(rng):
    cfg = PinchingConfig(n=5, m=1)
    Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, 4000, rng, distinct=1e-4)
    fv, fg, fh = cfg.f.value(Z), cfg.f.gradient(Z), cfg.f.hessian(Z)
    subsets = cfg.family.index_array
    inv_cm = 1.0 / cfg.c_m
    g1, gg, gh = _pykernels.pinch_batch(Z, fv, fg, fh, subsets, inv_cm, 2)
    T = random_sym_tensors(cfg.n, len(Z), rng)
    A = rng.standard_normal((8, 8))
    A = A + A.T
    x = np.linspace(0, 8, 4098)
    ue = 1 - 0.8 * np.exp(-x ** 2 / 4)
    r = rng.uniform(-3, 0.5, 100_000)
    return {
        "sym_eig (8x8)": (lambda k: k.sym_eig(A), 2000),
        "phi_all (1e5)": (lambda k: k.phi_all(r), 50),
        "pinch_batch (4000x5)": (lambda k: k.pinch_batch(Z, fv, fg, fh, subsets, inv_cm, 2), 5),
        "q_decomposed_batch (4000x5)": (lambda k: k.q_decomposed_batch(Z, fg, fh, gg, gh, T), 5),
        "profile_geometry (4096)": (lambda k: k.profile_geometry(ue, x[1] - x[0]), 500),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, (bool, np.bool_, int)):
        return bool(a) == bool(b)
    return np.allclose(np.asarray(a), np.asarray(b), rtol=1e-10, atol=1e-12)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s}")
    for name, (call, number) in _cases(rng).items():
        if not _same(call(_pykernels), call(_ckernels)):
            raise SystemExit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=number, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=number, repeat=args.repeat))
        print(f"{name:32s} {1e3 * t_py / number:12.4f} {1e3 * t_c / number:12.4f} "
              f"{t_py / t_c:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
