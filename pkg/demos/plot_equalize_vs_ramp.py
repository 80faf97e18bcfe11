"""
Histogram equalization as a special case
========================================

A linear-ramp parameter vector turns the sorting-based matcher into plain
histogram equalization, as long as no two pixels of a channel share a value.
With ties the two part ways: equalization gives tied pixels one output
level, the matcher spreads them over consecutive ranks.
"""

import numpy as np

import phm

rng = np.random.default_rng(0)
ramp = phm.init_linear_ramp(3, 2048)

# every byte value exactly once per channel
x = np.stack([rng.permutation(256).reshape(16, 16) / 255 for _ in range(3)])
y, cache = phm.phm_forward(x, ramp)
print("distinct levels:  max |phm - equalize| =", np.abs(y - phm.equalize(x)).max() * 255, "levels")

# darken with a gamma and re-quantize, which merges many dark levels
d = np.round(x ** 2.2 * 255) / 255
y, _ = phm.phm_forward(d, ramp)
he = phm.equalize(d)
print("after gamma:      %d distinct levels in red" % len(np.unique(d[0])))
print("  occupied bins   phm %d  equalize %d" % (np.count_nonzero(phm.histogram(y[0])),
                                                 np.count_nonzero(phm.histogram(he[0]))))
print("  max |phm - equalize| =", np.abs(y - he).max() * 255, "levels")

# a concave curve instead of the ramp brightens mids; ordering is still kept
bent = phm.ParamContainer(np.sqrt(ramp.params))
z, _ = phm.phm_forward(d, bent)
print("mean intensity    input %.3f  ramp %.3f  sqrt %.3f" % (d.mean(), y.mean(), z.mean()))
order = np.argsort(d[0].ravel(), kind="stable")
print("non-decreasing along input order:", bool(np.all(np.diff(z[0].ravel()[order]) >= 0)))
