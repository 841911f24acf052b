"""
Scalar functions of rescaled time given as sympy expressions in `t`
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Union

import numpy as np
import sympy

from core.exceptions import ConfigError

T_SYMBOL = sympy.Symbol("t", real=True)
_LOCALS = {"t": T_SYMBOL, "pi": sympy.pi, "inf": sympy.oo, "e": sympy.E}

ArrayLike = Union[float, np.ndarray]


def parse_number(text: Any) -> float:
    """Parse a config number: plain floats, `inf`, or constant expressions such as `pi/3`"""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    try:
        value = sympy.sympify(str(text).strip(), locals=_LOCALS)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ConfigError(f"Cannot parse number '{text}': {e}")
    if value.free_symbols:
        raise ConfigError(f"Expected a constant, got expression '{text}'")
    try:
        return float(value)
    except TypeError as e:
        raise ConfigError(f"Cannot parse number '{text}': {e}")


@dataclass(frozen=True)
class ScalarFunction:
    """A smooth real function of t, e.g. e21 = "1 - 0.5*t" or b1 = "1" """

    expression: str
    _expr: Any = field(init=False, repr=False, compare=False)
    _fn: Callable = field(init=False, repr=False, compare=False)
    _dfn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            expr = sympy.sympify(str(self.expression), locals=_LOCALS)
        except (sympy.SympifyError, SyntaxError, TypeError) as e:
            raise ConfigError(f"Cannot parse expression '{self.expression}': {e}")
        unknown = expr.free_symbols - {T_SYMBOL}
        if unknown:
            names = ", ".join(sorted(str(s) for s in unknown))
            raise ConfigError(f"Expression '{self.expression}' uses unknown symbols: {names}")
        object.__setattr__(self, "_expr", expr)
        object.__setattr__(self, "_fn", sympy.lambdify(T_SYMBOL, expr, modules="numpy"))
        object.__setattr__(self, "_dfn", sympy.lambdify(T_SYMBOL, sympy.diff(expr, T_SYMBOL), modules="numpy"))

    @classmethod
    def constant(cls, value: float) -> "ScalarFunction":
        return cls(repr(float(value)))

    @property
    def is_constant(self) -> bool:
        return not self._expr.free_symbols

    @property
    def value(self) -> float:
        """Value of a constant function"""
        if not self.is_constant:
            raise ValueError(f"'{self.expression}' depends on t")
        return float(self._expr)

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self._broadcast(self._fn, t)

    def derivative(self, t: ArrayLike) -> ArrayLike:
        return self._broadcast(self._dfn, t)

    @staticmethod
    def _broadcast(fn: Callable, t: ArrayLike) -> ArrayLike:
        t_arr = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(fn(t_arr), dtype=float), t_arr.shape)
        if out.ndim == 0:
            return float(out)
        return np.array(out)
