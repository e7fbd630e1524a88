"""End-to-end run against the on-disk dataset layout, via the CLI entry points.

Writes a synthetic dataset to disk, segments it with the default
configuration (including the focused second pass), evaluates the masks
against the generator's annotations, and saves a strip of results. This is
exactly what

    flowseg synth --out demos/output/dataset
    flowseg segment demos/output/dataset --out demos/output/run
    flowseg evaluate demos/output/run/masks demos/output/dataset/annotations

does from the shell.
"""

import json
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from flowseg.cli import main
from flowseg.io import read_mask

out_dir = pathlib.Path(__file__).parent / "output"
dataset = out_dir / "dataset"
run = out_dir / "run"

assert main(["synth", "--out", str(dataset)]) == 0
assert main(["segment", str(dataset), "--out", str(run), "--dump-saliency"]) == 0
assert main(["evaluate", str(run / "masks"), str(dataset / "annotations"),
             "--out", str(out_dir / "report.csv")]) == 0

manifest = json.loads((run / "manifest.json").read_text())
print("stage timings (s):", {k: round(v, 2)
                             for k, v in manifest["timings_sec"].items()})

frames = sorted((dataset / "frames").glob("*.png"))
masks = sorted((run / "masks").glob("*.png"))
gts = sorted((dataset / "annotations").glob("*.png"))
picks = [0, 7, 14, 19]

fig, axes = plt.subplots(3, len(picks), figsize=(3.2 * len(picks), 8.2))
for col, i in enumerate(picks):
    axes[0, col].imshow(plt.imread(frames[i]))
    axes[0, col].set_title(f"frame {i}")
    axes[1, col].imshow(read_mask(gts[i]), cmap="gray")
    axes[2, col].imshow(read_mask(masks[i]), cmap="gray")
axes[0, 0].set_ylabel("input")
axes[1, 0].set_ylabel("ground truth")
axes[2, 0].set_ylabel("prediction")
for ax in axes.ravel():
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "full_pipeline.png", dpi=110)
print(f"wrote {out_dir / 'full_pipeline.png'} and {out_dir / 'report.csv'}")
