"""Naive reference implementations used to check the vectorized code.

Everything here is written as an explicit Python loop straight from the
definitions, with no numpy vectorization and no imports from the package
under test. Slow on purpose; these are the independent side of every
dual-route check.
"""

from __future__ import annotations

import math

NAN = float("nan")


def sma_loop(closes, window):
    n = len(closes)
    out = [NAN] * n
    for i in range(window - 1, n):
        out[i] = sum(closes[i - window + 1:i + 1]) / window
    return out


def ema_loop(closes, span):
    n = len(closes)
    out = [NAN] * n
    if n < span:
        return out
    alpha = 2.0 / (span + 1.0)
    out[span - 1] = sum(closes[:span]) / span
    for i in range(span, n):
        out[i] = alpha * closes[i] + (1.0 - alpha) * out[i - 1]
    return out


def momentum_loop(closes, lookback):
    n = len(closes)
    out = [NAN] * n
    for i in range(lookback, n):
        out[i] = closes[i] / closes[i - lookback] - 1.0
    return out


def true_range_loop(highs, lows, closes):
    n = len(closes)
    tr = [NAN] * n
    if n == 0:
        return tr
    tr[0] = highs[0] - lows[0]
    for i in range(1, n):
        tr[i] = max(highs[i] - lows[i],
                    abs(highs[i] - closes[i - 1]),
                    abs(lows[i] - closes[i - 1]))
    return tr


def atr_loop(highs, lows, closes, period):
    if len(closes) < 2:
        return [NAN] * len(closes)
    return ema_loop(true_range_loop(highs, lows, closes), period)


def forward_return_loop(closes, horizon):
    n = len(closes)
    out = [NAN] * n
    for i in range(0, n - horizon):
        out[i] = closes[i + horizon] / closes[i] - 1.0
    return out


def ffill_loop(rows):
    """rows: list of dicts with open/high/low/close (None = missing).

    Returns the filled rows that survive (leading gaps dropped), each with
    high/low widened to cover open and close.
    """
    last = {"open": None, "high": None, "low": None, "close": None}
    out = []
    for row in rows:
        filled = dict(row)
        for key in last:
            if filled.get(key) is None:
                filled[key] = last[key]
        if any(filled[key] is None for key in last):
            continue
        for key in last:
            last[key] = filled[key]
        filled["high"] = max(filled["high"], filled["open"], filled["close"])
        filled["low"] = min(filled["low"], filled["open"], filled["close"])
        out.append(filled)
    return out


def outlier_filter_loop(closes, threshold):
    """Indices of bars to KEEP under the single-pass return filter."""
    keep = []
    for i, close in enumerate(closes):
        if i == 0:
            keep.append(i)
            continue
        ret = close / closes[i - 1] - 1.0
        if abs(ret) <= threshold:
            keep.append(i)
    return keep


def weekly_buckets_loop(dates):
    """Group indices of a sorted date list into ISO-week buckets, in order."""
    buckets = []
    current_key = None
    for i, date in enumerate(dates):
        key = date.isocalendar()[:2]
        if key != current_key:
            buckets.append([])
            current_key = key
        buckets[-1].append(i)
    return buckets


def drawdown_loop(equity):
    """O(n^2) peak scan: drawdown of each point against every prior point."""
    n = len(equity)
    series = [0.0] * n
    for i in range(n):
        peak = max(equity[:i + 1])
        series[i] = equity[i] / peak - 1.0
    return (min(series) if n else 0.0), series


def mean_loop(values):
    return sum(values) / len(values)


def stdev_sample_loop(values):
    mu = mean_loop(values)
    return math.sqrt(sum((v - mu) ** 2 for v in values) / (len(values) - 1))


def sharpe_loop(returns, periods_per_year=252, risk_free=0.0):
    mu = mean_loop(returns) - risk_free / periods_per_year
    return mu / stdev_sample_loop(returns) * math.sqrt(periods_per_year)


def volatility_loop(returns, periods_per_year=252):
    return stdev_sample_loop(returns) * math.sqrt(periods_per_year)


def total_return_loop(equity):
    return equity[-1] / equity[0] - 1.0


def daily_returns_loop(equity):
    return [equity[i + 1] / equity[i] - 1.0 for i in range(len(equity) - 1)]


def win_rate_loop(pnls):
    return sum(1 for p in pnls if p > 0) / len(pnls)


def pearson_loop(x, y):
    pairs = [(a, b) for a, b in zip(x, y)
             if not (math.isnan(a) or math.isnan(b))]
    xs = [a for a, _ in pairs]
    ys = [b for _, b in pairs]
    mx, my = mean_loop(xs), mean_loop(ys)
    num = sum((a - mx) * (b - my) for a, b in pairs)
    den = math.sqrt(sum((a - mx) ** 2 for a in xs) * sum((b - my) ** 2 for b in ys))
    return num / den


def decile_loop(signal, forward, buckets=10):
    """Sort-and-chunk with stable ties; first (n mod buckets) chunks are larger."""
    pairs = [(s, f) for s, f in zip(signal, forward)
             if not (math.isnan(s) or math.isnan(f))]
    order = sorted(range(len(pairs)), key=lambda i: pairs[i][0])
    n = len(pairs)
    base, extra = divmod(n, buckets)
    out = []
    cursor = 0
    for b in range(buckets):
        size = base + (1 if b < extra else 0)
        chunk = order[cursor:cursor + size]
        cursor += size
        fwd = [pairs[i][1] for i in chunk]
        out.append((b + 1, mean_loop(fwd), len(fwd)))
    return out


def prefix_max_loop(values):
    out = []
    best = -math.inf
    for v in values:
        best = max(best, v)
        out.append(best)
    return out
