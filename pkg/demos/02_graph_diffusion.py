"""Show the diffusion graph cleaning up a badly corrupted initialization.

A noisy synthetic sequence is segmented from an initial node vector whose
entries are 20% replaced with uniform junk. Thresholding that vector directly
is hopeless; diffusing it through the composed graph recovers the object.
The factor ablation table mirrors how each connection type contributes:

* temporal (T): flow-consistent links between adjacent frames
* spatial (E): edge-aware links inside each frame
* long-range (V): visually similar superpixels across a 15-frame window

Run from the repo root; prints a table and saves a before/after figure.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from flowseg import (PipelineConfig, evaluate_sequence, normalize01,
                     run_segmentation, synth_sequence)

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

bundle = synth_sequence(noise_level=0.5, seed=7)


def corrupt(v0):
    rng = np.random.default_rng(123)
    out = v0.copy()
    pick = rng.random(v0.size) < 0.2
    out[pick] = rng.random(int(pick.sum()))
    return out


# sigma2 matches the synthetic noise floor; the library default assumes the
# much tighter residuals of real flow solvers
def segment(**toggles):
    cfg = PipelineConfig(sigma2=1.0, enable_focused=False, **toggles)
    return run_segmentation(bundle, cfg, v0_transform=corrupt)


rows = [
    ("none (thresholded v0)", dict(enable_temporal=False, enable_spatial=False,
                                   enable_longrange=False)),
    ("temporal only", dict(enable_temporal=True, enable_spatial=False,
                           enable_longrange=False)),
    ("spatial only", dict(enable_temporal=False, enable_spatial=True,
                          enable_longrange=False)),
    ("long-range only", dict(enable_temporal=False, enable_spatial=False,
                             enable_longrange=True)),
    ("all three", dict(enable_temporal=True, enable_spatial=True,
                       enable_longrange=True)),
]

print(f"{'connections':24s} {'mean J':>8s}")
results = {}
for name, toggles in rows:
    res = segment(**toggles)
    rep = evaluate_sequence(res.masks, bundle.annotations)
    results[name] = res
    print(f"{name:24s} {rep.j_mean:8.3f}")

# visualize frame 10: corrupted initialization vs diffused result
k = 10
none_res = results["none (thresholded v0)"]
full_res = results["all three"]
seg = none_res.segs[k]
offset = int(none_res.offsets[k])
v0_field = normalize01(none_res.v0)[offset + seg.labels]
v_field = normalize01(full_res.node_saliency)[offset + full_res.segs[k].labels]

fig, axes = plt.subplots(1, 5, figsize=(16, 3.4))
axes[0].imshow(bundle.frames[k])
axes[0].set_title("frame")
axes[1].imshow(v0_field, cmap="magma", vmin=0, vmax=1)
axes[1].set_title("corrupted v0 (nodes)")
axes[2].imshow(none_res.masks[k], cmap="gray")
axes[2].set_title("thresholded v0")
axes[3].imshow(v_field, cmap="magma", vmin=0, vmax=1)
axes[3].set_title("after 25 diffusion steps")
axes[4].imshow(full_res.masks[k], cmap="gray")
axes[4].set_title("diffused mask")
for ax in axes:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "graph_diffusion.png", dpi=110)
print(f"wrote {out_dir / 'graph_diffusion.png'}")
