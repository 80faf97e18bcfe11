"""
Command-line tour
=================

Every step here is also available as a ``phm`` subcommand. We drive the
entry point in-process so the script runs anywhere the package imports.
"""

import tempfile
from pathlib import Path

from phm.cli import main

work = Path(tempfile.mkdtemp())

# a small dataset on disk, and a fogged copy of it
main(["gen-data", "--out", str(work / "data"), "--classes", "4", "--per-class", "10"])
main(["degrade", "--in", str(work / "data"), "--out", str(work / "fog"), "--kind", "fog", "--severity", "0.7"])

# classical tools on a single image
img = sorted((work / "data").glob("*/*.ppm"))[0]
main(["hist", str(img), "--csv", str(work / "hist.csv")])
main(["equalize", str(img), str(work / "he.ppm")])

# train jointly, then evaluate on the fogged copy
main(["train", "--data", str(work / "data"), "--epochs", "3", "--size", "256", "--out-dir", str(work / "run")])
main(["eval", "--model", str(work / "run" / "model.tcn1"), "--params", str(work / "run" / "params.phm1"),
      "--data", str(work / "fog"), "--out", str(work / "eval.csv")])

# kernel timings
main(["bench", "--image", "224x224", "--iters", "5"])
print("outputs in", work)
