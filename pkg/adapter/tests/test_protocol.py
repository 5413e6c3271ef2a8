"""Protocol loop behavior with in-memory streams."""

import io
import json

import pytest

from eblime_adapter import mean_mask, serve
from eblime_adapter.cli import load_predict, main
from eblime_adapter.models import linear_ramp, logistic_ramp, resolve


def run_serve(lines, predict_fn=mean_mask, input_shape=None):
    stdin = io.StringIO("".join(line + "\n" for line in lines))
    stdout = io.StringIO()
    stderr = io.StringIO()
    code = serve(predict_fn, input_shape=input_shape, stdin=stdin, stdout=stdout, stderr=stderr)
    messages = [json.loads(line) for line in stdout.getvalue().splitlines()]
    return code, messages, stderr.getvalue()


def predict_line(request_id, instances):
    return json.dumps({"type": "predict", "id": request_id, "instances": instances})


SHUTDOWN = json.dumps({"type": "shutdown"})


class TestServe:
    def test_hello_first_then_clean_shutdown(self):
        code, messages, _ = run_serve([SHUTDOWN])
        assert code == 0
        assert messages == [{"type": "hello", "protocol": 1}]

    def test_id_echo_and_values(self):
        code, messages, _ = run_serve(
            [predict_line(7, [[0.0, 1.0], [1.0, 1.0]]), SHUTDOWN]
        )
        assert code == 0
        assert messages[1] == {"type": "prediction", "id": 7, "values": [0.5, 1.0]}

    def test_response_order_matches_request_order(self):
        lines = [predict_line(i, [[float(i % 2)]]) for i in range(5)] + [SHUTDOWN]
        _, messages, _ = run_serve(lines)
        assert [m["id"] for m in messages[1:]] == list(range(5))

    def test_malformed_line_reports_error_and_continues(self):
        code, messages, _ = run_serve(
            ["this is not json", predict_line(1, [[1.0]]), SHUTDOWN]
        )
        assert code == 0
        assert messages[1]["type"] == "error"
        assert "malformed" in messages[1]["message"]
        assert messages[2] == {"type": "prediction", "id": 1, "values": [1.0]}

    def test_predict_exception_reports_traceback_and_continues(self):
        def explode(instances):
            raise RuntimeError("synthetic failure")

        stdin_lines = [predict_line(3, [[1.0]]), SHUTDOWN]
        code, messages, _ = run_serve(stdin_lines, predict_fn=explode)
        assert code == 0
        assert messages[1]["type"] == "error"
        assert messages[1]["id"] == 3
        assert "synthetic failure" in messages[1]["message"]

    def test_out_of_range_value_is_an_error(self):
        code, messages, _ = run_serve(
            [predict_line(1, [[1.0]]), SHUTDOWN], predict_fn=lambda rows: [1.5]
        )
        assert messages[1]["type"] == "error"
        assert "outside" in messages[1]["message"]

    def test_wrong_value_count_is_an_error(self):
        code, messages, _ = run_serve(
            [predict_line(1, [[1.0], [0.0]]), SHUTDOWN], predict_fn=lambda rows: [0.5]
        )
        assert messages[1]["type"] == "error"

    def test_shape_validation(self):
        code, messages, _ = run_serve(
            [predict_line(1, [[1.0, 0.0, 1.0]]), SHUTDOWN], input_shape=(2,)
        )
        assert messages[1]["type"] == "error"
        assert "length 2" in messages[1]["message"]

    def test_eof_without_shutdown_exits_cleanly(self):
        code, messages, stderr = run_serve([predict_line(1, [[1.0]])])
        assert code == 0
        assert messages[-1]["type"] == "prediction"
        assert "without shutdown" in stderr

    def test_unknown_request_type(self):
        code, messages, _ = run_serve([json.dumps({"type": "ping", "id": 9}), SHUTDOWN])
        assert messages[1]["type"] == "error"
        assert messages[1]["id"] == 9


class TestModels:
    def test_mean_mask(self):
        assert mean_mask([[1.0, 0.0, 0.0, 1.0]]) == [0.5]

    def test_linear_ramp_full_mask_sums_to_one(self):
        predict = linear_ramp(10)
        assert predict([[1.0] * 10]) == [1.0]

    def test_logistic_ramp_bounds(self):
        predict = logistic_ramp(6)
        low = predict([[0.0] * 6])[0]
        high = predict([[1.0] * 6])[0]
        assert 0.0 < low < 0.05 < 0.95 < high < 1.0

    def test_resolve_rejects_unknown(self):
        with pytest.raises(ValueError):
            resolve("nope", 3)


class TestCli:
    def test_builtin_requires_p(self, capsys):
        with pytest.raises(SystemExit):
            main(["--model", "mean-mask"])

    def test_load_predict_validates_spec(self):
        with pytest.raises(SystemExit):
            load_predict("no-colon")
        fn = load_predict("eblime_adapter.models:mean_mask")
        assert fn([[0.0, 1.0]]) == [0.5]
