import re
from typing import List

import rich_click as click

from monoflow.core import FlowNetworkException
from monoflow.util import parse_quantity


class QuantityParamType(click.ParamType):
    name = "quantity:n,p/q,x.y,inf"

    def __init__(self, allow_unbounded: bool = True) -> None:
        self.allow_unbounded = allow_unbounded

    def convert(self, value, param, ctx):
        try:
            return parse_quantity(value, allow_unbounded=self.allow_unbounded, what=param.name if param else "value")
        except FlowNetworkException as e:
            self.fail(e.msg, param, ctx)


class PositiveFloatParamType(click.ParamType):
    name = "float>0"

    def convert(self, value, param, ctx):
        if isinstance(value, float):
            return value
        try:
            result = float(value)
        except ValueError:
            self.fail(f"{value} is not a number", param, ctx)
            return
        if not result > 0:
            self.fail(f"{value} is not positive", param, ctx)
        return result


class SeedParamType(click.ParamType):
    name = "u64"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            seed = value
        else:
            try:
                seed = int(value, 0)
            except ValueError:
                self.fail(f"{value} is not a valid seed", param, ctx)
                return
        if not 0 <= seed < 2 ** 64:
            self.fail(f"{value} is not an unsigned 64 bit integer", param, ctx)
        return seed


class DeltaGridParamType(click.ParamType):
    """Either a comma separated list ``0,0.1,0.5`` or a range ``start:stop:step`` (stop included)."""

    name = "grid:a,b,c|start:stop:step"

    _range = re.compile(r"^\s*([^:]+):([^:]+):([^:]+)\s*$")

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return list(value)
        m = self._range.match(value)
        try:
            if m:
                start, stop, step = (float(g) for g in m.groups())
                if step <= 0 or stop < start:
                    self.fail(f"{value} is not a valid range", param, ctx)
                points: List[float] = []
                k = 0
                while start + k * step <= stop + 1e-12 * max(1.0, abs(stop)):
                    points.append(round(start + k * step, 12))
                    k += 1
                return points
            return [float(v) for v in value.split(",") if v.strip()]
        except ValueError:
            self.fail(f"{value} is not a valid grid", param, ctx)
