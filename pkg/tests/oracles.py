"""Reference implementations used only by the tests.

They are deliberately written differently from the library code: slower,
more literal, and with no shared helpers.
"""

from fractions import Fraction
import math


# --- hierarchical fair share ---------------------------------------------------

class T:
    """Tiny tree: leaves carry demand, every node carries shares and optional quota."""

    def __init__(self, name, shares=1024, demand=0, quota=None, kids=()):
        self.name = name
        self.shares = shares
        self.demand = demand
        self.quota = quota
        self.kids = list(kids)


def _limit(node):
    if not node.kids:
        lim = Fraction(node.demand)
    else:
        lim = sum((_limit(k) for k in node.kids), Fraction(0))
    if node.quota is not None:
        lim = min(lim, Fraction(node.quota))
    return lim


def progressive_fill(amount, kids):
    """Raise every unsaturated child at a rate equal to its shares until the
    amount runs out; a child stops the moment it reaches its limit."""
    amount = Fraction(amount)
    given = {id(k): Fraction(0) for k in kids}
    limits = {id(k): _limit(k) for k in kids}
    running = [k for k in kids if limits[id(k)] > 0]
    while running and amount > 0:
        rate = sum(k.shares for k in running)
        # time until the first child saturates, or the amount is exhausted
        t_sat = min((limits[id(k)] - given[id(k)]) / k.shares for k in running)
        t_out = amount / rate
        t = min(t_sat, t_out)
        for k in running:
            given[id(k)] += k.shares * t
        amount -= rate * t
        running = [k for k in running if given[id(k)] < limits[id(k)]]
    return [given[id(k)] for k in kids]


def round_level(exact):
    target = math.floor(sum(exact))
    base = [math.floor(x) for x in exact]
    spare = target - sum(base)
    ranked = sorted(range(len(exact)), key=lambda i: (base[i] - exact[i], i))
    out = list(base)
    for i in ranked[:spare]:
        out[i] += 1
    return out


def oracle_allocate(root, capacity):
    grant = min(Fraction(capacity), _limit(root))
    grant = math.floor(grant)
    out = {}

    def go(node, g):
        if not node.kids:
            out[node.name] = g
            return
        parts = round_level(progressive_fill(g, node.kids))
        for k, p in zip(node.kids, parts):
            go(k, p)

    go(root, grant)
    return out


def to_cgroup(tree, period_us=100_000):
    from elastisim.cfs import CgroupNode
    return CgroupNode(tree.name, shares=tree.shares, quota_us=tree.quota,
                      period_us=period_us,
                      children=tuple(to_cgroup(k, period_us) for k in tree.kids),
                      runnable_demand_us=tree.demand if not tree.kids else 0)


def _partitions(n, max_part):
    # non-increasing integer partitions of n with at least two parts
    def rec(n, cap):
        if n == 0:
            yield []
            return
        for k in range(min(n, cap), 0, -1):
            for rest in rec(n - k, k):
                yield [k] + rest
    return [p for p in rec(n, max_part) if len(p) >= 2]


def _subtrees(n):
    """Shapes with n leaves: None is a leaf, a list is an internal node with
    two or more children. Children of equal size are kept in canonical order."""
    if n == 1:
        return [None]
    out = []
    for parts in _partitions(n, n - 1):
        choices = [list(range(len(_subtrees(k)))) for k in parts]

        def pick(i, prev_k, prev_idx, acc):
            if i == len(parts):
                out.append(list(acc))
                return
            k = parts[i]
            start = prev_idx if k == prev_k else 0
            for j in range(start, len(choices[i])):
                acc.append(_subtrees(k)[j])
                pick(i + 1, k, j, acc)
                acc.pop()

        pick(0, None, 0, [])
    return out


def tree_shapes(max_leaves):
    """Every distinct rooted shape with up to ``max_leaves`` leaves. The root
    is internal; a root with one leaf covers the single-pod case."""
    out = [[None]]
    for n in range(2, max_leaves + 1):
        out.extend(_subtrees(n))
    return out


def count_leaves(shape):
    if shape is None:
        return 1
    return sum(count_leaves(s) for s in shape)


def count_internal(shape):
    if shape is None:
        return 0
    return 1 + sum(count_internal(s) for s in shape)


def build_tree(shape, demands, shares_leaf, shares_internal):
    d = iter(demands)
    sl = iter(shares_leaf)
    si = iter(shares_internal)
    counter = iter(range(10 ** 6))

    def make(s, is_root=False):
        if s is None:
            return T(f"l{next(counter)}", shares=next(sl), demand=next(d))
        kids = [make(k) for k in s]
        return T("root" if is_root else f"g{next(counter)}",
                 shares=1024 if is_root else next(si), kids=kids)

    return make(shape, True)


# --- horizontal pod autoscaler --------------------------------------------------

def hpa_oracle(current, metric, desired, tol, lo, hi):
    """Inputs are decimal strings so the arithmetic is exact."""
    r = Fraction(metric) / Fraction(desired)
    if abs(r - 1) <= Fraction(tol):
        return current
    n = current * r
    want = n.numerator // n.denominator + (1 if n.numerator % n.denominator else 0)
    return max(lo, min(hi, want))


# --- capacity search ------------------------------------------------------------

def linear_scan(lo, hi, step, passes):
    best = None
    k = -(-lo // step)
    while k * step <= hi:
        if passes(k * step):
            best = k * step
        k += 1
    return best


# --- statistics -------------------------------------------------------------------

def mean(xs):
    return sum(Fraction(x) for x in xs) / len(xs)


def sample_sd(xs):
    m = mean(xs)
    return math.sqrt(sum((Fraction(x) - m) ** 2 for x in xs) / (len(xs) - 1))


def pearson(xs, ys):
    mx, my = mean(xs), mean(ys)
    sxy = sum((Fraction(x) - mx) * (Fraction(y) - my) for x, y in zip(xs, ys))
    sxx = sum((Fraction(x) - mx) ** 2 for x in xs)
    syy = sum((Fraction(y) - my) ** 2 for y in ys)
    return float(sxy) / math.sqrt(float(sxx) * float(syy))


def avg_ranks(xs):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def type7(xs, q):
    s = sorted(xs)
    h = (len(s) - 1) * q / 100
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def ols(xs, ys):
    """Slope and intercept by the textbook normal equations, exactly."""
    n = len(xs)
    X = [Fraction(x) for x in xs]
    Y = [Fraction(y) for y in ys]
    sx, sy = sum(X), sum(Y)
    sxx = sum(x * x for x in X)
    sxy = sum(x * y for x, y in zip(X, Y))
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    return float(slope), float((sy - slope * sx) / n)
