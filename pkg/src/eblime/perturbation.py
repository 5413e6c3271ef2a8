"""Binary perturbation sampling, kernel weighting and mask application.

Interpretable features are either abstract mask coordinates or contiguous
image segments. Masks are i.i.d. Bernoulli(0.5) with the all-ones row
optionally pinned first, so the local model is anchored at the unmodified
input. Weights decay with distance from the all-ones mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .rng import substream

DISTANCES = ("euclidean", "cosine")


def default_theta(p: int) -> float:
    """Default kernel width, sqrt(p)/4; keeps the all-zeros mask weight
    constant across feature counts."""
    return math.sqrt(p) / 4.0


@dataclass(frozen=True)
class KernelConfig:
    """Locality kernel: weight = exp(-D^2(mask, all-ones) / theta^2)."""

    theta: float
    distance: str = "euclidean"

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise InvalidInputError(f"kernel width must be positive, got {self.theta!r}")
        if self.distance not in DISTANCES:
            raise InvalidInputError(f"distance must be one of {DISTANCES}, got {self.distance!r}")


@dataclass(frozen=True)
class FeatureSpace:
    """What a mask coordinate means.

    kind 'abstract-mask': the mask itself is the model input.
    kind 'segmented-image': coordinate j controls the pixels labelled j;
    masked-off segments are filled with ``baseline``.
    """

    kind: str
    p: int
    labels: np.ndarray | None = None
    channels: int = 1
    baseline: float = 0.0

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError("feature count must be >= 1")
        if self.kind == "abstract-mask":
            if self.labels is not None:
                raise InvalidInputError("abstract-mask space takes no label map")
        elif self.kind == "segmented-image":
            labels = np.asarray(self.labels)
            if labels.ndim != 2:
                raise InvalidInputError("label map must be 2-d (H, W)")
            present = np.unique(labels)
            if present.min() < 0 or present.max() >= self.p or present.size != self.p:
                raise InvalidInputError(
                    f"label map must use every label in [0, {self.p}) at least once"
                )
            object.__setattr__(self, "labels", labels.astype(np.int64))
        else:
            raise InvalidInputError(f"unknown feature space kind {self.kind!r}")

    @classmethod
    def abstract(cls, p: int) -> "FeatureSpace":
        return cls(kind="abstract-mask", p=p)

    @classmethod
    def image(cls, labels: np.ndarray, channels: int = 1, baseline: float = 0.0) -> "FeatureSpace":
        labels = np.asarray(labels)
        return cls(
            kind="segmented-image",
            p=int(labels.max()) + 1,
            labels=labels,
            channels=channels,
            baseline=baseline,
        )

    @property
    def instance_shape(self) -> tuple[int, ...]:
        if self.kind == "abstract-mask":
            return (self.p,)
        h, w = self.labels.shape
        return (h, w) if self.channels == 1 else (h, w, self.channels)


def generate_masks(p: int, n: int, seed: int, include_z0: bool = True) -> np.ndarray:
    """Draw an (n, p) Bernoulli(0.5) mask matrix from the 'masks' substream.

    With include_z0, row 0 is forced to all ones (the unmodified input).
    Identical (seed, n, p) always produce the identical matrix.
    """
    if n < 1 or p < 1:
        raise InvalidInputError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    rng = substream(seed, "masks")
    masks = rng.integers(0, 2, size=(n, p)).astype(np.float64)
    if include_z0:
        masks[0, :] = 1.0
    return masks


def _squared_distance(masks: np.ndarray, distance: str) -> np.ndarray:
    if distance == "euclidean":
        # binary entries: squared distance to all-ones = number of zeros
        return (masks == 0.0).sum(axis=1).astype(np.float64)
    # cosine distance to the all-ones vector; the all-zeros mask has no
    # direction and gets the maximal distance 1
    p = masks.shape[1]
    ones = masks.sum(axis=1)
    sim = np.sqrt(ones / p)
    return (1.0 - sim) ** 2


def kernel_weights(masks: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Locality weight of each mask row relative to the all-ones mask."""
    masks = np.asarray(masks, dtype=np.float64)
    d2 = _squared_distance(masks, cfg.distance)
    return np.exp(-d2 / cfg.theta**2)


def apply_mask(space: FeatureSpace, original: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Materialize one mask in the original input space.

    Abstract spaces return the mask itself; image spaces keep pixels of
    switched-on segments and fill the rest with the baseline value.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (space.p,):
        raise InvalidInputError(f"mask must have shape ({space.p},), got {mask.shape}")
    if space.kind == "abstract-mask":
        return mask.copy()
    original = np.asarray(original, dtype=np.float64)
    if original.shape != space.instance_shape:
        raise InvalidInputError(
            f"instance shape {original.shape} does not match space {space.instance_shape}"
        )
    keep = mask[space.labels].astype(bool)
    if original.ndim == 3:
        keep = keep[:, :, None]
    return np.where(keep, original, space.baseline)


def grid_segment(h: int, w: int, rows: int, cols: int) -> np.ndarray:
    """Partition an h x w image into rows x cols rectangular segments.

    Labels run row-major; along each axis the first blocks take the extra
    pixels, so block sizes differ by at most one.
    """
    if h < 1 or w < 1 or rows < 1 or cols < 1:
        raise InvalidInputError("image and grid dimensions must be >= 1")
    if rows > h or cols > w:
        raise InvalidInputError(f"grid {rows}x{cols} does not fit into image {h}x{w}")
    row_edges = _balanced_edges(h, rows)
    col_edges = _balanced_edges(w, cols)
    labels = np.empty((h, w), dtype=np.int64)
    for i in range(rows):
        for j in range(cols):
            labels[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]] = i * cols + j
    return labels


def _balanced_edges(extent: int, blocks: int) -> list[int]:
    base, extra = divmod(extent, blocks)
    sizes = [base + 1 if i < extra else base for i in range(blocks)]
    edges = [0]
    for s in sizes:
        edges.append(edges[-1] + s)
    return edges


@dataclass(frozen=True)
class PerturbationSet:
    """Masks, weights and black-box responses for one explanation task."""

    masks: np.ndarray
    weights: np.ndarray
    responses: np.ndarray
    seed: int
    includes_z0: bool
    kernel: KernelConfig

    def to_design(self):
        from .linalg import WeightedDesign

        return WeightedDesign(masks=self.masks, weights=self.weights, responses=self.responses)

    def to_json_dict(self) -> dict:
        return {
            "masks": self.masks.astype(int).tolist(),
            "weights": self.weights.tolist(),
            "responses": self.responses.tolist(),
            "seed": self.seed,
            "includes_z0": self.includes_z0,
            "kernel": {"theta": self.kernel.theta, "distance": self.kernel.distance},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PerturbationSet":
        kernel = KernelConfig(**doc["kernel"])
        return cls(
            masks=np.asarray(doc["masks"], dtype=np.float64),
            weights=np.asarray(doc["weights"], dtype=np.float64),
            responses=np.asarray(doc["responses"], dtype=np.float64),
            seed=int(doc["seed"]),
            includes_z0=bool(doc["includes_z0"]),
            kernel=kernel,
        )


def build_perturbation_set(
    space: FeatureSpace,
    original: np.ndarray | None,
    handle,
    n: int,
    seed: int,
    kernel: KernelConfig | None = None,
    include_z0: bool = True,
) -> PerturbationSet:
    """Sample masks, weight them, query the black box and bundle the result.

    The output is a pure function of (seed, n, space, original, kernel):
    rerunning with the same arguments reproduces it bit for bit.
    """
    from .blackbox import predict_batch

    kernel = kernel or KernelConfig(theta=default_theta(space.p))
    masks = generate_masks(space.p, n, seed, include_z0=include_z0)
    weights = kernel_weights(masks, kernel)
    if space.kind == "abstract-mask":
        instances = masks
    else:
        instances = np.stack([apply_mask(space, original, m) for m in masks])
    responses = predict_batch(handle, instances)
    return PerturbationSet(
        masks=masks,
        weights=weights,
        responses=responses,
        seed=seed,
        includes_z0=include_z0,
        kernel=kernel,
    )


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary (P5) PGM file into floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        tokens.append(data[start:i])
    if tokens[0] != b"P5":
        raise InvalidInputError(f"not a binary PGM (P5) file: {path}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise InvalidInputError("only 8-bit PGM supported")
    i += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=i)
    return pixels.reshape(h, w).astype(np.float64) / maxval


def read_image(path) -> np.ndarray:
    """Read a PGM or PNG image as floats in [0, 1] (grayscale (H, W) or RGB)."""
    spath = str(path)
    if spath.lower().endswith(".pgm"):
        return read_pgm(path)
    if spath.lower().endswith(".png"):
        from PIL import Image

        img = Image.open(path)
        arr = np.asarray(img, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 4:
            arr = arr[:, :, :3]
        return arr / 255.0
    raise InvalidInputError(f"unsupported image format: {path}")


def write_pgm(image: np.ndarray, path) -> None:
    """Write a grayscale image with values in [0, 1] as binary 8-bit PGM."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise InvalidInputError("PGM output requires a 2-d grayscale image")
    h, w = image.shape
    data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_segment_csv(labels: np.ndarray, path) -> None:
    """Export a segment label map as rows of comma-separated integers."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(labels):
            fh.write(",".join(str(int(v)) for v in row))
            fh.write("\n")
