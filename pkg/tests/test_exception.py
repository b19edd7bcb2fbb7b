import json
import pytest
from fractions import Fraction

from monoflow.core import FlowNetworkException, FlowNetworkWarning
from monoflow.util import INF, format_quantity, json_number, parse_quantity


def test_exception_message_and_exit_code():
    e = FlowNetworkException(FlowNetworkException.FLOW_NUMERICAL_ABORT, "Step size underflow.", t=1.5)
    assert "FLOW_NUMERICAL_ABORT" in str(e)
    assert e.exit_code == 4
    data = e.asdict()
    assert data["error"]["name"] == "FLOW_NUMERICAL_ABORT"
    assert data["error"]["details"] == {"t": 1.5}
    json.dumps(data)


@pytest.mark.parametrize("code,exit_code", [
    (FlowNetworkException.FLOW_PARSE_ERROR, 2),
    (FlowNetworkException.FLOW_BAD_PARAMETER, 2),
    (FlowNetworkException.FLOW_VALIDATION_ERROR, 3),
    (FlowNetworkException.FLOW_DOMAIN_ERROR, 4),
    (FlowNetworkException.FLOW_PROPERTY_FAILURE, 5),
    (FlowNetworkException.FLOW_ERROR, 1),
])
def test_exit_codes(code, exit_code):
    assert FlowNetworkException(code).exit_code == exit_code


def test_unknown_code():
    e = FlowNetworkException(-99, "odd")
    assert "unexpected error code" in str(e)
    assert e.name == "FlowNetworkException"


def test_warning_is_user_warning():
    with pytest.warns(UserWarning):
        import warnings
        warnings.warn("x", FlowNetworkWarning)


def test_parse_quantity():
    assert parse_quantity(2) == Fraction(2)
    assert parse_quantity("1/6") == Fraction(1, 6)
    assert parse_quantity("0.5") == 0.5
    assert parse_quantity("inf") is INF
    assert parse_quantity(float("inf")) is INF
    assert INF > 10 ** 12
    with pytest.raises(FlowNetworkException):
        parse_quantity("inf", allow_unbounded=False)
    with pytest.raises(FlowNetworkException):
        parse_quantity(-1)
    with pytest.raises(FlowNetworkException):
        parse_quantity("abc")
    with pytest.raises(FlowNetworkException):
        parse_quantity(True)


def test_format_quantity():
    assert format_quantity(Fraction(1, 6)) == "1/6"
    assert format_quantity(Fraction(3)) == 3
    assert format_quantity(INF) == "inf"
    assert json_number(float("-inf")) == "-inf"
    assert json_number(None) is None
