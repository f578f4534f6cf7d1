from collections import defaultdict

import numpy as np

from ._validation import month_index


def monthly_stats(members):
    """Per-calendar-month mean, population std and count.

    ``members`` is an iterable of iterables of ``(month, value)``; None values
    are skipped. Returns ``[(month, mean, std, count), ...]`` in month order.
    """
    buckets = defaultdict(list)
    for pairs in members:
        for month, value in pairs:
            if value is not None:
                buckets[month].append(float(value))
    out = []
    for month in sorted(buckets, key=month_index):
        v = np.asarray(buckets[month])
        out.append((month, float(v.mean()), float(v.std()), int(v.size)))
    return out
