"""Server side of the explainer's model subprocess protocol.

One JSON document per line, UTF-8, over stdin/stdout:

    server -> client on start : {"type": "hello", "protocol": 1}
    client -> server          : {"type": "predict", "id": <u64>,
                                 "instances": [[<f64> ...] ...]}
    server -> client          : {"type": "prediction", "id": <u64>,
                                 "values": [<f64> ...]}
    client -> server on end   : {"type": "shutdown"}

The request id is echoed verbatim. A failing prediction produces an
{"type": "error", ...} line and the loop keeps serving; only shutdown (or
EOF) ends it. stdout carries protocol lines exclusively; diagnostics go to
stderr.
"""

from __future__ import annotations

import json
import math
import sys
import traceback

PROTOCOL_VERSION = 1


def _emit(stream, message: dict) -> None:
    stream.write(json.dumps(message) + "\n")
    stream.flush()


def serve(predict_fn, input_shape=None, stdin=None, stdout=None, stderr=None) -> int:
    """Answer predict requests with ``predict_fn`` until shutdown.

    predict_fn takes a list of flattened instances (lists of floats) and
    returns one probability in [0, 1] per instance. ``input_shape``, when
    given, is used to reject rows of the wrong flattened length. Returns
    the process exit code (0 on a clean shutdown or EOF).
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    expected_len = None
    if input_shape is not None:
        expected_len = 1
        for dim in input_shape:
            expected_len *= int(dim)

    _emit(stdout, {"type": "hello", "protocol": PROTOCOL_VERSION})
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            _emit(stdout, {"type": "error", "id": None,
                           "message": f"malformed request line: {line[:200]!r}"})
            continue
        if not isinstance(msg, dict):
            _emit(stdout, {"type": "error", "id": None,
                           "message": "request must be a JSON object"})
            continue
        mtype = msg.get("type")
        if mtype == "shutdown":
            return 0
        if mtype != "predict":
            _emit(stdout, {"type": "error", "id": msg.get("id"),
                           "message": f"unsupported request type {mtype!r}"})
            continue
        request_id = msg.get("id")
        instances = msg.get("instances")
        if not isinstance(instances, list) or not all(isinstance(r, list) for r in instances):
            _emit(stdout, {"type": "error", "id": request_id,
                           "message": "instances must be a list of flattened rows"})
            continue
        if expected_len is not None and any(len(r) != expected_len for r in instances):
            _emit(stdout, {"type": "error", "id": request_id,
                           "message": f"expected rows of length {expected_len}"})
            continue
        try:
            values = [float(v) for v in predict_fn(instances)]
            if len(values) != len(instances):
                raise ValueError(
                    f"predict returned {len(values)} values for {len(instances)} instances"
                )
            for v in values:
                if not math.isfinite(v) or v < 0.0 or v > 1.0:
                    raise ValueError(f"prediction {v!r} outside [0, 1]")
        except Exception:
            _emit(stdout, {"type": "error", "id": request_id,
                           "message": traceback.format_exc()})
            continue
        _emit(stdout, {"type": "prediction", "id": request_id, "values": values})
    print("input closed without shutdown; exiting", file=stderr)
    return 0
