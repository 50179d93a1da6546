"""Smoke test for the Python bindings.

Build and install first, e.g.

    cd crates/python && maturin develop --release

then run ``python python/smoke_test.py``.
"""

import math
import sys

import mvgamma


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []

    i3 = mvgamma.CorrMatrix.identity(3)
    v = mvgamma.cdf(i3, 1.0, 1.0)
    want = (1 - math.exp(-1)) ** 3
    results.append(check("independent exponentials", abs(v["value"] - want) < 1e-12, f"{v['value']:.15f}"))

    e = mvgamma.CorrMatrix.equicorrelated(3, 0.4)
    s = mvgamma.cdf(e, 0.5, [0.8, 1.0, 1.2])
    q = mvgamma.cdf(e, 0.5, [0.8, 1.0, 1.2], method="one-factorial")
    mc = mvgamma.cdf(e, 0.5, [0.8, 1.0, 1.2], method="mixture-mc", samples=200_000, seed=1)
    results.append(check("series vs quadrature", abs(s["value"] - q["value"]) < 1e-8))
    results.append(check("series vs mixture", abs(s["value"] - mc["value"]) < 4 * mc["std_error"]))

    b = mvgamma.CorrMatrix.block4(1.0)
    results.append(check("block family divisible", mvgamma.infdiv(b)["verdict"] is True))
    results.append(check("tau 0.5 not divisible", mvgamma.infdiv(mvgamma.CorrMatrix.block4(0.5))["verdict"] is False))

    d = mvgamma.decompose(e)
    results.append(check("one-factorial loadings", all(abs(a - math.sqrt(0.4)) < 1e-12 for a in d["one_factorial"])))

    rep = mvgamma.verify(1, b, 0.5, 1.0, partition=2, tau_grid=[0.0, 0.5, 1.0], derivative=False)
    results.append(check("block theorem", rep["status"] == "pass", rep["status"]))

    lam = mvgamma.lambda_condition(0.5, 5, 0.4, 1.125)
    nc = mvgamma.normal_case_coefficients(1.5, 0.4, 5)
    results.append(check("dual route", abs(lam["lambda"] - nc["lambda"]) < 1e-6))

    t = mvgamma.taylor_t2(1.0, 1.2, n=4, r=0.3)
    results.append(check("t2 at H = O", abs(t["value"] - t["base"]) < 1e-8))

    draws = mvgamma.sample(e, 2, 1000, seed=3)
    results.append(check("sampler shape", len(draws) == 1000 and len(draws[0]) == 3))

    try:
        mvgamma.CorrMatrix([[1.0, 0.5], [0.4, 1.0]])
        results.append(check("asymmetric rejected", False))
    except mvgamma.MvgammaError as exc:
        results.append(check("asymmetric rejected", True, str(exc)))

    print(f"mvgamma {mvgamma.__version__}: {sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
