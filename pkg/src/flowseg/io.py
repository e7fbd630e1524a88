"""Dataset input/output: .flo flow files, frames, masks, and a synthetic generator.

On-disk sequence layout::

    root/frames/%05d.png       8-bit RGB frames, indices 0..F-1
    root/flow_fwd/%05d.flo     flow i -> i+1 stored at index i (F-1 files)
    root/flow_bwd/%05d.flo     flow i+1 -> i stored at index i (F-1 files)
    root/edges/%05d.png        optional grayscale edge responses scaled to [0, 1]
    root/annotations/%05d.png  optional binary masks, >=128 reads as foreground

The .flo format is the Middlebury interchange format: a 4-byte little-endian
float sentinel 202021.25, then width and height as 4-byte little-endian signed
integers, then row-major interleaved (u, v) little-endian float32 pairs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import InputError, normalize01

FLO_SENTINEL = np.float32(202021.25)


class FloFormatError(InputError):
    """Corrupt .flo file (bad sentinel)."""


class FloTruncatedError(FloFormatError):
    """Payload shorter than the header promises."""


def read_flo(path) -> np.ndarray:
    """Read a Middlebury .flo file into an (H, W, 2) float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FloTruncatedError(f"{path}: header truncated ({len(raw)} bytes)")
    (sentinel,) = struct.unpack("<f", raw[:4])
    if np.float32(sentinel) != FLO_SENTINEL:
        raise FloFormatError(f"{path}: bad sentinel {sentinel!r}, not a .flo file")
    width, height = struct.unpack("<ii", raw[4:12])
    if width <= 0 or height <= 0:
        raise FloFormatError(f"{path}: nonsensical dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(raw) != expected:
        raise FloTruncatedError(
            f"{path}: expected {expected} bytes for {width}x{height}, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=12)
    return data.reshape(height, width, 2).copy()


def write_flo(flow: np.ndarray, path) -> None:
    """Write an (H, W, 2) flow field as a Middlebury .flo file (float32)."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    height, width = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", float(FLO_SENTINEL)))
        fh.write(struct.pack("<ii", width, height))
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_frame(path) -> np.ndarray:
    """Read an RGB image into an (H, W, 3) float array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_frame(frame: np.ndarray, path) -> None:
    arr = np.clip(np.asarray(frame) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def read_gray(path) -> np.ndarray:
    """Read a grayscale image scaled to [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def write_gray(field: np.ndarray, path) -> None:
    arr = np.clip(np.asarray(field) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def read_mask(path) -> np.ndarray:
    """Read a binary mask; any pixel value >= 128 counts as foreground."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr >= 128


def write_mask(mask: np.ndarray, path) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def write_labels(labels: np.ndarray, path) -> None:
    """Debug dump of a superpixel label map as a 16-bit single-channel PNG."""
    Image.fromarray(np.asarray(labels, dtype=np.uint16)).save(path)


@dataclass
class SequenceBundle:
    """All per-video artifacts, loaded into memory.

    frames has length F; forward_flow[i] maps frame i -> i+1 and
    backward_flow[i] maps frame i+1 -> i (both lists have length F-1).
    edge_maps and annotations are optional.
    """

    frames: list[np.ndarray]
    forward_flow: list[np.ndarray]
    backward_flow: list[np.ndarray]
    edge_maps: list[np.ndarray] | None = None
    annotations: list[np.ndarray] | None = None

    def __post_init__(self) -> None:
        n = len(self.frames)
        if n == 0:
            raise InputError("sequence has no frames")
        shape = self.frames[0].shape[:2]
        for name, lst in (
            ("frames", self.frames),
            ("forward_flow", self.forward_flow),
            ("backward_flow", self.backward_flow),
            ("edge_maps", self.edge_maps or []),
            ("annotations", self.annotations or []),
        ):
            for i, arr in enumerate(lst):
                if arr.shape[:2] != shape:
                    raise InputError(
                        f"{name}[{i}] has shape {arr.shape[:2]}, frames are {shape}"
                    )
        if len(self.forward_flow) != n - 1 or len(self.backward_flow) != n - 1:
            raise InputError(
                f"need {n - 1} flow fields per direction for {n} frames, got "
                f"{len(self.forward_flow)} forward / {len(self.backward_flow)} backward"
            )

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]


def _indexed_files(directory: Path, suffix: str) -> list[Path]:
    files = sorted(directory.glob(f"*{suffix}"))
    if not files:
        raise InputError(f"no {suffix} files in {directory}")
    return files


def load_sequence(root_dir) -> SequenceBundle:
    """Load a sequence from the on-disk layout. Flow directories are required;
    edges and annotations are optional."""
    root = Path(root_dir)
    if not root.is_dir():
        raise InputError(f"sequence directory not found: {root}")
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise InputError(f"missing frames directory: {frames_dir}")
    frames = [read_frame(p) for p in _indexed_files(frames_dir, ".png")]

    flows = {}
    for key in ("flow_fwd", "flow_bwd"):
        d = root / key
        if not d.is_dir():
            raise InputError(f"missing flow directory: {d}")
        flows[key] = [read_flo(p) for p in _indexed_files(d, ".flo")]

    edges = None
    if (root / "edges").is_dir():
        edges = [read_gray(p) for p in _indexed_files(root / "edges", ".png")]
        if len(edges) != len(frames):
            raise InputError(
                f"{len(edges)} edge maps for {len(frames)} frames in {root / 'edges'}"
            )

    annotations = None
    if (root / "annotations").is_dir():
        annotations = [read_mask(p) for p in _indexed_files(root / "annotations", ".png")]
        if len(annotations) != len(frames):
            raise InputError(
                f"{len(annotations)} annotations for {len(frames)} frames"
            )

    return SequenceBundle(frames, flows["flow_fwd"], flows["flow_bwd"], edges, annotations)


def write_sequence(bundle: SequenceBundle, root_dir) -> None:
    """Write a bundle to the on-disk layout (frames, flows, optional extras)."""
    root = Path(root_dir)
    for sub in ("frames", "flow_fwd", "flow_bwd"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(bundle.frames):
        write_frame(frame, root / "frames" / f"{i:05d}.png")
    for i, flow in enumerate(bundle.forward_flow):
        write_flo(flow, root / "flow_fwd" / f"{i:05d}.flo")
    for i, flow in enumerate(bundle.backward_flow):
        write_flo(flow, root / "flow_bwd" / f"{i:05d}.flo")
    if bundle.edge_maps is not None:
        (root / "edges").mkdir(exist_ok=True)
        for i, e in enumerate(bundle.edge_maps):
            write_gray(e, root / "edges" / f"{i:05d}.png")
    if bundle.annotations is not None:
        (root / "annotations").mkdir(exist_ok=True)
        for i, m in enumerate(bundle.annotations):
            write_mask(m, root / "annotations" / f"{i:05d}.png")


def _smooth_texture(rng: np.random.Generator, height: int, width: int,
                    base: np.ndarray, amplitude: float) -> np.ndarray:
    """Base color plus low-frequency noise; smooth so gradient-based edge maps
    stay quiet inside regions."""
    noise = rng.standard_normal((height, width, 3))
    noise = ndimage.gaussian_filter(noise, sigma=(2.0, 2.0, 0.0))
    noise *= amplitude / max(noise.std(), 1e-12)
    return np.clip(base + noise, 0.0, 1.0)


def synth_sequence(width: int = 64, height: int = 64, num_frames: int = 20,
                   square_size: int = 16, velocity: tuple[float, float] = (2.0, 0.0),
                   noise_level: float = 0.0, seed: int = 0) -> SequenceBundle:
    """Generate a textured square translating over a static textured background.

    Flow fields are the exact analytic displacement of the square (plus
    optional Gaussian noise), annotations are the exact square masks, and the
    square's texture rides along with it, so appearance, flow and masks are
    mutually consistent. Deterministic given the seed.
    """
    if num_frames < 2:
        raise InputError("need at least 2 frames")
    if square_size < 1 or square_size > min(width, height):
        raise InputError(f"square size {square_size} does not fit in {width}x{height}")

    vx, vy = float(velocity[0]), float(velocity[1])
    # center the swept volume so the trajectory fits whenever it can
    travel = np.array([vx, vy]) * (num_frames - 1)
    start = (np.array([width, height]) - square_size - travel) / 2.0
    corners = np.rint(start + np.outer(np.arange(num_frames), [vx, vy])).astype(int)
    for i, (cx, cy) in enumerate(corners):
        if cx < 0 or cy < 0 or cx + square_size > width or cy + square_size > height:
            raise InputError(
                f"square leaves frame bounds at frame {i} (corner {cx},{cy})"
            )

    rng = np.random.default_rng(seed)
    background = _smooth_texture(rng, height, width, np.array([0.25, 0.35, 0.55]), 0.04)
    patch = _smooth_texture(rng, square_size, square_size, np.array([0.75, 0.45, 0.20]), 0.04)

    frames, masks = [], []
    for cx, cy in corners:
        frame = background.copy()
        frame[cy:cy + square_size, cx:cx + square_size] = patch
        mask = np.zeros((height, width), dtype=bool)
        mask[cy:cy + square_size, cx:cx + square_size] = True
        frames.append(frame)
        masks.append(mask)

    forward, backward = [], []
    for i in range(num_frames - 1):
        disp = corners[i + 1] - corners[i]
        fwd = np.zeros((height, width, 2), dtype=np.float32)
        fwd[masks[i]] = disp.astype(np.float32)
        bwd = np.zeros((height, width, 2), dtype=np.float32)
        bwd[masks[i + 1]] = (-disp).astype(np.float32)
        if noise_level > 0:
            fwd += rng.normal(0.0, noise_level, fwd.shape).astype(np.float32)
            bwd += rng.normal(0.0, noise_level, bwd.shape).astype(np.float32)
        forward.append(fwd)
        backward.append(bwd)

    return SequenceBundle(frames, forward, backward, annotations=masks)


def fallback_edge_map(frame: np.ndarray) -> np.ndarray:
    """Gradient-magnitude edge response, normalized to [0, 1].

    Central-difference kernels per channel, magnitudes combined across
    channels. Weaker than a trained edge detector; used when the dataset
    carries no edges/ directory.
    """
    frame = np.asarray(frame, dtype=np.float64)
    gy, gx = np.gradient(frame, axis=(0, 1))
    magnitude = np.sqrt((gx**2 + gy**2).sum(axis=2))
    return normalize01(magnitude)
