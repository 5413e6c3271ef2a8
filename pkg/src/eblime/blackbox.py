"""Uniform batched prediction over builtin synthetic models and external
subprocess models.

Builtin models are deterministic closed forms with known ground truth, used
by the evaluation harness. External models speak a newline-delimited JSON
protocol over stdin/stdout:

    adapter -> client on start : {"type": "hello", "protocol": 1}
    client  -> adapter         : {"type": "predict", "id": <u64>,
                                  "instances": [[<f64> ...] ...]}
    adapter -> client          : {"type": "prediction", "id": <u64>,
                                  "values": [<f64> ...]}
    client  -> adapter on end  : {"type": "shutdown"}

instances are row-major flattened tensors; ids must echo exactly; any
{"type": "error", ...} line aborts the explanation.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import AdapterProtocolError, InvalidInputError
from .perturbation import grid_segment

PROTOCOL_VERSION = 1
RANGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class InputSpace:
    """Shape contract of a model: ('abstract-mask', (p,)) or ('image', (H, W[, C]))."""

    kind: str
    shape: tuple[int, ...]


class BlackBoxHandle:
    """Base prediction interface; concrete handles implement predict_batch."""

    def __init__(self, kind: str, space: InputSpace, batch_limit: int = 4096):
        self.kind = kind
        self.space = space
        self.batch_limit = int(batch_limit)

    def predict_batch(self, instances: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def predict_batch(handle: BlackBoxHandle, instances) -> np.ndarray:
    """Predict a batch, preserving order; one probability per instance."""
    if isinstance(instances, (list, tuple)):
        instances = np.stack([np.asarray(x, dtype=np.float64) for x in instances])
    else:
        instances = np.asarray(instances, dtype=np.float64)
    if instances.shape[1:] != handle.space.shape:
        raise InvalidInputError(
            f"instance shape {instances.shape[1:]} does not match model input {handle.space.shape}"
        )
    values = handle.predict_batch(instances)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (instances.shape[0],):
        raise AdapterProtocolError(
            f"model returned {values.shape} values for {instances.shape[0]} instances"
        )
    return values


class BuiltinModel(BlackBoxHandle):
    """Deterministic in-process model wrapping a vectorized batch function."""

    def __init__(self, name: str, space: InputSpace, fn, ground_truth=None):
        super().__init__(kind=f"builtin:{name}", space=space, batch_limit=1 << 20)
        self._fn = fn
        self.ground_truth = ground_truth

    def predict_batch(self, instances: np.ndarray) -> np.ndarray:
        values = np.asarray(self._fn(instances), dtype=np.float64)
        return np.clip(values, 0.0, 1.0)


def make_linear_model(beta_star: np.ndarray, intercept: float = 0.0, name: str = "linear") -> BuiltinModel:
    """Clipped-linear model over abstract masks: clip(c + mask . beta*, 0, 1)."""
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta_star.ndim != 1 or not np.any(beta_star != 0.0):
        raise InvalidInputError("ground-truth coefficients need at least one nonzero entry")
    p = beta_star.size

    def fn(masks):
        return np.clip(intercept + masks @ beta_star, 0.0, 1.0)

    return BuiltinModel(name, InputSpace("abstract-mask", (p,)), fn, ground_truth=beta_star)


def make_logistic_model(beta_star: np.ndarray, intercept: float = 0.0, name: str = "logistic") -> BuiltinModel:
    """Logistic model over abstract masks: expit(c + mask . beta*)."""
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta_star.ndim != 1:
        raise InvalidInputError("coefficients must be a vector")
    p = beta_star.size

    def fn(masks):
        return expit(intercept + masks @ beta_star)

    return BuiltinModel(name, InputSpace("abstract-mask", (p,)), fn, ground_truth=beta_star)


def mask_hash_offsets(masks: np.ndarray, seed: int) -> np.ndarray:
    """Standard-normal offset per distinct mask, from a splitmix64 hash.

    Deterministic in (mask, seed), so models built on it stay compatible
    with the exhaustive enumeration oracle while behaving like black boxes
    with idiosyncratic per-mask structure.
    """
    masks = np.asarray(masks, dtype=np.uint64)
    p = masks.shape[1]
    if p > 63:
        raise InvalidInputError("hash offsets support at most 63 features")
    ints = masks @ (np.uint64(1) << np.arange(p, dtype=np.uint64))
    x = ints ^ np.uint64((seed * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    from scipy.special import ndtri

    return ndtri((x.astype(np.float64) + 0.5) / 2.0**64)


def make_rough_logistic_model(
    beta_star: np.ndarray,
    intercept: float = 0.0,
    roughness: float = 0.0,
    seed: int = 0,
    name: str = "rough-logistic",
) -> BuiltinModel:
    """Logistic model with deterministic per-mask logit offsets.

    The offsets stand in for the interaction structure of a real
    classifier over mask space: the model is not additive in the mask, yet
    every prediction is a pure function of the mask, so exhaustive ground
    truth remains exact.
    """
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta_star.ndim != 1:
        raise InvalidInputError("coefficients must be a vector")
    p = beta_star.size

    def fn(masks):
        logits = intercept + masks @ beta_star
        if roughness > 0.0:
            logits = logits + roughness * mask_hash_offsets(masks, seed)
        return expit(logits)

    return BuiltinModel(name, InputSpace("abstract-mask", (p,)), fn, ground_truth=beta_star)


def make_mean_mask_model(p: int, name: str = "mean-mask") -> BuiltinModel:
    """Prediction = mean of the instance values; used for adapter round-trips."""

    def fn(masks):
        return masks.reshape(masks.shape[0], -1).mean(axis=1)

    return BuiltinModel(name, InputSpace("abstract-mask", (p,)), fn)


def make_defect_model(
    h: int,
    w: int,
    rows: int,
    cols: int,
    defect_segments,
    steepness: float = 4.0,
    name: str = "defect",
) -> BuiltinModel:
    """Synthetic 'with defect' classifier on grid-segmented images.

    The prediction is a logistic function of the mean intensity over the
    defect segments, rescaled so a fully bright defect area gives
    expit(steepness) and a fully masked one expit(-steepness).
    """
    defect = sorted(int(s) for s in defect_segments)
    if not defect:
        raise InvalidInputError("defect segment set must be nonempty")
    if min(defect) < 0 or max(defect) >= rows * cols:
        raise InvalidInputError(f"defect segments must lie in [0, {rows * cols})")
    labels = grid_segment(h, w, rows, cols)
    pixel_mask = np.isin(labels, defect)

    def fn(images):
        flat = images.reshape(images.shape[0], h, w, -1)
        mean_intensity = flat[:, pixel_mask, :].mean(axis=(1, 2))
        return expit(steepness * (2.0 * mean_intensity - 1.0))

    model = BuiltinModel(name, InputSpace("image", (h, w)), fn, ground_truth=None)
    model.defect_segments = frozenset(defect)
    model.grid = (rows, cols)
    return model


def _scaled_ramp(p: int) -> np.ndarray:
    beta = np.arange(1, p + 1, dtype=np.float64)
    return beta / beta.sum()


def resolve_builtin(name: str):
    """Builtin model catalog for the CLI.

    Returns (handle, default feature space, default original instance).
    Recognized names: linear-p<p>, logistic-p<p>, mean-mask-p<p>,
    defect-<rows>x<cols>.
    """
    from .perturbation import FeatureSpace

    if name.startswith("linear-p"):
        p = _parse_count(name, "linear-p")
        handle = make_linear_model(_scaled_ramp(p), name=name)
        return handle, FeatureSpace.abstract(p), np.ones(p)
    if name.startswith("logistic-p"):
        p = _parse_count(name, "logistic-p")
        handle = make_logistic_model(8.0 * _scaled_ramp(p), intercept=-4.0, name=name)
        return handle, FeatureSpace.abstract(p), np.ones(p)
    if name.startswith("mean-mask-p"):
        p = _parse_count(name, "mean-mask-p")
        return make_mean_mask_model(p, name=name), FeatureSpace.abstract(p), np.ones(p)
    if name.startswith("defect-"):
        rows, cols = _parse_grid(name, "defect-")
        h, w = 8 * rows, 8 * cols
        center = (rows // 2) * cols + cols // 2
        handle = make_defect_model(h, w, rows, cols, {center}, name=name)
        labels = grid_segment(h, w, rows, cols)
        space = FeatureSpace.image(labels)
        original = np.where(np.isin(labels, [center]), 1.0, 0.25)
        return handle, space, original
    raise InvalidInputError(f"unknown builtin model {name!r}")


def _parse_count(name: str, prefix: str) -> int:
    try:
        p = int(name[len(prefix):])
    except ValueError:
        raise InvalidInputError(f"malformed builtin model name {name!r}") from None
    if p < 1:
        raise InvalidInputError(f"feature count must be >= 1 in {name!r}")
    return p


def _parse_grid(name: str, prefix: str) -> tuple[int, int]:
    try:
        rows, cols = name[len(prefix):].split("x")
        return int(rows), int(cols)
    except ValueError:
        raise InvalidInputError(f"malformed builtin model name {name!r}") from None


class SubprocessModel(BlackBoxHandle):
    """Client side of the adapter protocol; one subprocess per handle.

    The subprocess is started lazily, handshaken once, and requests are
    pipelined with monotonically increasing ids. Any protocol violation
    raises AdapterProtocolError with the offending payload in the message.
    """

    def __init__(self, command: str, space: InputSpace, batch_limit: int = 1024):
        super().__init__(kind=f"exec:{command}", space=space, batch_limit=batch_limit)
        self.command = command
        self._proc: subprocess.Popen | None = None
        self._next_id = 0

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is not None:
            if self._proc.poll() is not None:
                raise AdapterProtocolError(
                    f"adapter exited early with code {self._proc.returncode}"
                )
            return self._proc
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterProtocolError(f"failed to start adapter {self.command!r}: {exc}") from exc
        hello = self._read_message()
        if hello.get("type") != "hello" or hello.get("protocol") != PROTOCOL_VERSION:
            raise AdapterProtocolError(f"bad handshake from adapter: {hello!r}")
        return self._proc

    def _read_message(self) -> dict:
        line = self._proc.stdout.readline()
        if line == "":
            code = self._proc.poll()
            raise AdapterProtocolError(f"adapter closed its output (exit code {code!r})")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterProtocolError(f"adapter sent malformed JSON: {line!r}") from exc
        if not isinstance(msg, dict):
            raise AdapterProtocolError(f"adapter sent a non-object message: {line!r}")
        if msg.get("type") == "error":
            raise AdapterProtocolError(f"adapter reported an error: {msg!r}")
        return msg

    def _send(self, msg: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterProtocolError(f"adapter pipe broke: {exc}") from exc

    def predict_batch(self, instances: np.ndarray) -> np.ndarray:
        self._ensure_started()
        flat = instances.reshape(instances.shape[0], -1)
        out = np.empty(flat.shape[0])
        for start in range(0, flat.shape[0], self.batch_limit):
            chunk = flat[start : start + self.batch_limit]
            self._next_id += 1
            request_id = self._next_id
            self._send(
                {"type": "predict", "id": request_id, "instances": chunk.tolist()}
            )
            reply = self._read_message()
            if reply.get("type") != "prediction":
                raise AdapterProtocolError(f"expected a prediction, got {reply!r}")
            if reply.get("id") != request_id:
                raise AdapterProtocolError(
                    f"id mismatch: sent {request_id}, received {reply!r}"
                )
            values = reply.get("values")
            if not isinstance(values, list) or len(values) != chunk.shape[0]:
                raise AdapterProtocolError(
                    f"expected {chunk.shape[0]} values, got {reply!r}"
                )
            arr = np.asarray(values, dtype=np.float64)
            if not np.isfinite(arr).all():
                raise AdapterProtocolError(f"non-finite prediction values: {reply!r}")
            low, high = arr.min(), arr.max()
            if low < -RANGE_TOLERANCE or high > 1.0 + RANGE_TOLERANCE:
                raise AdapterProtocolError(
                    f"prediction outside [0, 1] beyond tolerance: {reply!r}"
                )
            out[start : start + chunk.shape[0]] = np.clip(arr, 0.0, 1.0)
        return out

    def close(self) -> None:
        if self._proc is None:
            return
        proc, self._proc = self._proc, None
        try:
            if proc.poll() is None:
                proc.stdin.write(json.dumps({"type": "shutdown"}) + "\n")
                proc.stdin.flush()
        except (BrokenPipeError, OSError):
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
