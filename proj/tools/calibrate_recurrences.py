"""Direct scalar recurrences used to pin the step budgets in the C++ tests.

Indexing follows the library: step n = 0, 1, ... uses the paper index n + 1
for every 1/n term, and a parameter that would equal 1 is 1 - 2**-52.
"""
import math

ALMOST_ONE = 1.0 - 2.0**-52


def cap(v):
    return ALMOST_ONE if v >= 1.0 else v


def weighted(alpha, steps, probe):
    """f_n(x) = (1 - 1/n) x + 1/n, beta_n = 1/n, x0 = 1."""
    x = 1.0
    out = {}
    low = math.inf
    first_below = None
    for n in range(steps):
        p = n + 1
        a, b = alpha(n), cap(1.0 / p)
        fx = (1.0 - 1.0 / p) * x + 1.0 / p
        x = (1.0 - b) * ((1.0 - a) * x + a * fx)
        step = n + 1
        if 1000 <= step <= 100000:
            low = min(low, x)
        if first_below is None and step >= 2 and x < 1e-2:
            first_below = step
        if step in probe:
            out[step] = x
    return out, low, first_below


def halving(steps):
    """f(x) = x/2, alpha = 0.5, beta = 1/n, x0 = 1: first step with error < 1e-3."""
    x = 1.0
    for n in range(steps):
        b = cap(1.0 / (n + 1))
        x = (1.0 - b) * (0.5 * x + 0.5 * (x / 2.0))
        if x < 1e-3:
            return n + 1, x
    return None, x


def synthesized(steps):
    """Level construction for eps(n) = 1/(n+1) against the weighted example."""
    x = 1.0
    env = math.inf
    level = None
    in_level = 0
    nonzero = 0
    bound = 0.0
    partial = 0.0
    first_below = None
    for n in range(steps):
        e = 1.0 / (n + 1)
        env = min(env, e)
        m, ex = math.frexp(env)
        k = 1 - ex if m == 0.5 else -ex
        if k != level:
            level, in_level = k, 0
            bound += math.ceil(2.0 ** (k / 2.0)) * 0.5 * 2.0**-k
        a = 0.5 if in_level < math.ceil(2.0 ** (k / 2.0)) else 0.0
        in_level += 1
        b = a / math.log(2.0 + nonzero) if a > 0 else 0.0
        if a > 0:
            nonzero += 1
        partial += a * e
        p = n + 1
        fx = (1.0 - 1.0 / p) * x + 1.0 / p
        x = (1.0 - b) * ((1.0 - a) * x + a * fx)
        if first_below is None and x < 1e-2:
            first_below = n + 1
    return first_below, partial, bound, x


if __name__ == "__main__":
    out, low, _ = weighted(lambda n: 0.5, 100000, {1000, 10000, 100000})
    print("alpha=0.5: min over [1e3,1e5] =", low, out)
    out, _, first = weighted(lambda n: 1.0 / math.sqrt(n + 1), 1000000, {10**4, 10**5, 10**6})
    print("alpha=1/sqrt(n): first step below 1e-2 =", first, out)
    print("halving:", halving(100))
    print("synthesized (first below 1e-2, partial, bound, x_end):", synthesized(1000000))
