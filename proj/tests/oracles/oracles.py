"""Independent brute-force oracles used to freeze expected values in the C++ tests.

Every quantity here is computed from first principles (explicit convolution,
configuration enumeration, exact fractions) without reusing any of the
closed-form shortcuts implemented in the library.
"""
from fractions import Fraction as F
from itertools import product
import math
import sys

import numpy as np
import mpmath


def stencil(lag, n):
    if 0 <= lag < n:
        return 1
    if n <= lag < 2 * n:
        return -1
    return 0


def coeff_brute(n, N):
    """c_i for i in [1-2n, N-1] by literal convolution."""
    return {i: sum(stencil(j - i, n) for j in range(N)) for i in range(1 - 2 * n, N)}


def var_level(n, N):
    c = coeff_brute(n, N)
    return F(sum(v * v for v in c.values()), n * n)


def var_level_np(n, N):
    i = np.arange(1 - 2 * n, N, dtype=np.int64)

    def overlap(a, b):
        return np.maximum(0, np.minimum(N - 1, b) - np.maximum(0, a) + 1)

    c = overlap(i, i + n - 1) - overlap(i + n, i + 2 * n - 1)
    return F(int((c * c).sum()), n * n)


def bell(p):
    b = [1]
    for m in range(p):
        b.append(sum(math.comb(m, k) * b[k] for k in range(m + 1)))
    return b[p]


def window_beta(n, N, L):
    lo = min(-L - 2 * n + 1, N - 2 * n + 1)
    hi = max(0, N + L)
    coords = list(range(lo, hi + 1))
    p0 = 1 - F(1, n * n)
    q = F(1, 2 * n * n)
    joint = {}
    for cfg in product((-1, 0, 1), repeat=len(coords)):
        eps = dict(zip(coords, cfg))
        pr = F(1)
        for v in cfg:
            pr *= p0 if v == 0 else q

        def h(i):
            return sum(eps[i - j] for j in range(n)) - sum(eps[i - n - j] for j in range(n))

        a = tuple(h(i) for i in range(-L, 1))
        b = tuple(h(i) for i in range(N, N + L + 1))
        joint[(a, b)] = joint.get((a, b), 0) + pr
    ma, mb = {}, {}
    for (a, b), pr in joint.items():
        ma[a] = ma.get(a, 0) + pr
        mb[b] = mb.get(b, 0) + pr
    tot = F(0)
    for a, pa in ma.items():
        for b, pb in mb.items():
            tot += abs(joint.get((a, b), 0) - pa * pb)
    return tot / 2, len(coords)


def law_of_linear_form(coeffs, n):
    """Exact law of sum_i coeffs[i]*eps_i by sequential convolution."""
    p0 = 1 - F(1, n * n)
    q = F(1, 2 * n * n)
    law = {0: F(1)}
    for c in coeffs:
        nxt = {}
        for v, pr in law.items():
            for d, w in ((0, p0), (c, q), (-c, q)):
                nxt[v + d] = nxt.get(v + d, 0) + pr * w
        law = nxt
    return law


def main():
    out = sys.stdout
    print("coeff n=2 N=2", coeff_brute(2, 2), file=out)
    print("coeff n=2 N=4", coeff_brute(2, 4), file=out)
    print("var n=2 N=2", var_level(2, 2), "N=4", var_level(2, 4), "N=9", var_level(2, 9))
    print("var n=3 N=6", var_level(3, 6), "N=20", var_level(3, 20))
    lo, hi = 10.0, 0.0
    for n in (8, 16, 32, 64, 128, 256):
        for N in range(1, n + 1):
            r = float(var_level_np(n, N) * n / (N * N))
            lo, hi = min(lo, r), max(hi, r)
    print("scan var*n/N^2 over N<=n, n in 8..256: min %.6f max %.6f" % (lo, hi))
    seq = (2, 64, 65600)
    best, argN = 0.0, 0
    for N in range(4, 4097):
        s = sum(var_level_np(n, N) for n in seq)
        r = float(s) / N
        if r > best:
            best, argN = r, N
    print("sup sigma_N^2(h)/N over N in [4,4096] for (2,64,65600): %.6f at N=%d" % (best, argN))
    v3 = var_level_np(65600, 4096)
    print("level-3 variance at N=4096:", float(v3), "bound 2N^2/n3 =", 2 * 4096**2 / 65600)
    print("var n=64 N=256:", var_level_np(64, 256), float(var_level_np(64, 256)))
    # kurtosis of S_256(h_64) for the MC tolerance analysis
    c = [v for v in coeff_brute(64, 256).values() if v != 0]
    law = law_of_linear_form(c, 64)
    m2 = sum(pr * v * v for v in law for pr in [law[v]])
    m4 = sum(law[v] * v**4 for v in law)
    kurt = float(m4 / m2**2)
    print("E S^2=%s kurtosis=%.4f rel-SE of variance at 2e4 trials=%.4f" % (float(m2), kurt, math.sqrt((kurt - 1) / 2e4)))

    print("bell", [bell(p) for p in range(11)], "B25", bell(25), "B26", bell(26))
    for n in range(3, 40):
        x = F(n - 2, n)
        if x * (x**3 - F(1, 2)) > F(1, 4):
            print("N0 =", n, float(x * (x**3 - F(1, 2))))
            break
    x = F(22, 24)
    print("n=24 value", float(x * (x**3 - F(1, 2))))

    sp = 1 - (2 * F(1, 128) ** 2 + F(63, 64) ** 2) ** 16
    ab = 2 * (1 - F(63, 64) ** 16)
    print("self beta n=8 m=16: %.6f  atom bound %.6f" % (float(sp), float(ab)))

    for N in range(0, 5):
        for L in range(0, 3):
            v, M = window_beta(2, N, L)
            print("window beta n=2 N=%d L=%d M=%d value=%s (%.10f)" % (N, L, M, v, float(v)))

    # transfer divergence term for seq (2,64), k=2, K=2
    seq2 = (2, 64)
    def term(k, seqs):
        nk = seqs[k - 1]
        mu = F(1, nk * nk) * (1 - F(1, nk * nk)) ** (2 * nk - 2)
        for l, nl in enumerate(seqs, start=1):
            if l != k:
                mu *= (1 - F(1, nl * nl)) ** (2 * nl - 1)
        return sum(j * mu for j in range(1, nk + 1))
    t2 = term(2, seq2)
    t1 = term(1, seq2)
    print("divergence term k=2 seq(2,64): %.17g" % float(t2))
    print("divergence term k=1 seq(2,64): %.17g" % float(t1))

    # moments by exact convolution of the law
    for n in (2, 3, 4):
        hco = [1] * n + [-1] * n
        gco = list(range(1, n + 1)) + list(range(n - 1, 0, -1))
        lh = law_of_linear_form(hco, n)
        lg = law_of_linear_form(gco, n)
        for p in (F(1, 2), F(1), F(2), F(3), F(4)):
            eh = sum(float(pr) * abs(v) ** float(p) for v, pr in lh.items())
            eg = sum(float(pr) * abs(v) ** float(p) for v, pr in lg.items())
            print("moments n=%d p=%s E|h|^p=%.12g E|g|^p=%.12g" % (n, p, eh, eg))
        print("  exact E h^2 n=%d:" % n, sum(pr * v * v for v, pr in lh.items()))

    # B(4) for (2,64,65600) with per-level zero for N >= 2n_j
    B4 = sum(F(4, n) for n in seq if 2 * n > 4)
    print("B(4) = %.10f" % float(B4))

    mpmath.mp.dps = 80
    for d, K in (("0.1", 5), ("1", 2), ("0.5", 3)):
        dd = mpmath.mpf(d)
        vals = [int(mpmath.floor(mpmath.power(16, mpmath.power(2 + dd, k)))) for k in range(1, K + 1)]
        print("delta", d, vals)


if __name__ == "__main__":
    main()
