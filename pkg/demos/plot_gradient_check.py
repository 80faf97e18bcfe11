"""
Checking the matcher's backward pass
====================================

The gradient with respect to the parameter vector is a scatter of upstream
gradients through the sort permutation and the linear resampling weights.
Compare it with central differences on a small problem.
"""

import numpy as np

import phm
from phm.gradcheck import central_difference, relative_error

rng = np.random.default_rng(1)
x = rng.random((3, 7, 5))
pc = phm.ParamContainer(rng.uniform(0.1, 0.9, size=(3, 16)))

# any scalar loss will do; a random linear functional exercises every rank
w = rng.standard_normal(x.shape)


def loss():
    y, _ = phm.phm_forward(x, pc)
    return float(np.sum(w * y))


y, cache = phm.phm_forward(x, pc)
analytic = phm.phm_backward(w, cache, pc)
numeric = central_difference(loss, pc.params, eps=1e-3)

print("max relative error:", relative_error(analytic, numeric).max())

# resampled values that land outside [0, 1] are clipped and pass no gradient
pc.params[0, :4] = -0.5
y, cache = phm.phm_forward(x, pc)
print("clipped ranks in channel 0:", int((~cache.clipmask[0]).sum()))
print("gradient of the clipped knots:", phm.phm_backward(w, cache, pc)[0, :3])
