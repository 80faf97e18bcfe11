"""
Learning a preprocessing curve under adverse conditions
=======================================================

Train the tiny classifier twice on synthetic shapes, once with the
trainable matcher in front and once without, then test both on fogged,
darkened, sand-tinted and noisy copies of held-out images.

A full run (30 epochs, 200 images per class) takes a few minutes; set
``EPOCHS`` lower for a quick look.
"""

import numpy as np

from phm.data import DEGRADE_KINDS, DegradeSpec, generate_shapes_dataset, split
from phm.matcher import init_linear_ramp
from phm.train import TrainConfig, evaluate, train

EPOCHS = 30

samples = generate_shapes_dataset(num_classes=10, per_class=250, seed=0)
trainset, testset = split(samples, 0.8, seed=0)
print(len(trainset), "train /", len(testset), "test")

results = {}
for phm_enabled in (True, False):
    res = train(trainset, TrainConfig(epochs=EPOCHS, phm_enabled=phm_enabled))
    accs = {"clean": evaluate(res.model, res.params, testset, phm_enabled)}
    for kind in DEGRADE_KINDS:
        accs[kind] = evaluate(res.model, res.params, testset, phm_enabled, DegradeSpec(kind, 0.7))
    results["phm" if phm_enabled else "baseline"] = (res, accs)

for name, (res, accs) in results.items():
    adverse = np.mean([accs[k] for k in DEGRADE_KINDS])
    print(name.ljust(9), " ".join(f"{k}={v:.3f}" for k, v in accs.items()), f"adverse_mean={adverse:.3f}")

# how far did the learned curve move from the equalization ramp?
learned = results["phm"][0].params.params
print("max |learned - ramp|:", np.abs(learned - init_linear_ramp(3, 2048).params).max())

# the loss curve
for m in results["phm"][0].history[::5]:
    print(f"epoch {m.epoch:2d}  loss {m.loss:.4f}  lr {m.lr:g}")
