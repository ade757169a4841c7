"""Luckiness functions: nonnegative weights on parameter space."""

from dataclasses import dataclass
from fractions import Fraction
import math
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

KINDS = ("constant-one", "indicator-box", "custom")


@dataclass(frozen=True)
class Luckiness:
    """``scale * base(theta)`` where base is 1, the indicator of the closed box
    ``[lower, upper]``, or a user function of (M, K) parameter rows.

    Custom functions must return nonnegative values; ``support`` (a box
    outside which the function vanishes) is optional and only narrows
    integration domains.
    """

    kind: str = "constant-one"
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    fn: Optional[Callable] = None
    scale: float = 1.0
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"luckiness kind must be one of {KINDS}")
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ValueError("luckiness scale must be finite and >= 0")
        if self.kind == "indicator-box":
            if self.lower is None or self.upper is None:
                raise ValueError("indicator-box needs lower and upper")
            lo = tuple(float(v) for v in np.atleast_1d(self.lower))
            hi = tuple(float(v) for v in np.atleast_1d(self.upper))
            if len(lo) != len(hi) or any(l > h for l, h in zip(lo, hi)) or any(map(math.isnan, lo + hi)):
                raise ValueError("indicator-box needs lower <= upper on every axis")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom luckiness needs fn")

    # -- constructors ------------------------------------------------------

    @classmethod
    def one(cls):
        return cls()

    @classmethod
    def box(cls, lower, upper):
        return cls("indicator-box", lower, upper)

    @classmethod
    def custom(cls, fn, lower=None, upper=None, label=None):
        return cls("custom", lower, upper, fn, label=label)

    @classmethod
    def parse(cls, text):
        """``"one"``, ``"box:lo,hi"`` (1-D) or ``"box:lo1,lo2;hi1,hi2"``."""
        text = (text or "one").strip()
        if text in ("one", "constant-one", "1"):
            return cls()
        if text.startswith("box:"):
            body = text[4:]
            try:
                if ";" in body:
                    lo_s, hi_s = body.split(";")
                    lo = [float(v) for v in lo_s.split(",")]
                    hi = [float(v) for v in hi_s.split(",")]
                else:
                    lo_v, hi_v = (float(v) for v in body.split(","))
                    lo, hi = [lo_v], [hi_v]
                return cls.box(lo, hi)
            except ValueError as exc:
                raise ConfigError(f"bad luckiness box {text!r}: {exc}", "luckiness") from None
        raise ConfigError(f"unknown luckiness spec {text!r}", "luckiness")

    def scaled(self, c):
        return Luckiness(self.kind, self.lower, self.upper, self.fn, self.scale * float(c), self.label)

    # -- evaluation --------------------------------------------------------

    def __call__(self, theta):
        # a 1-D input is one parameter vector; batches are (M, K)
        T = np.atleast_2d(np.asarray(theta, dtype=float))
        if self.kind == "constant-one":
            out = np.ones(T.shape[0])
        elif self.kind == "indicator-box":
            lo = np.asarray(self.lower)
            hi = np.asarray(self.upper)
            out = np.all((T >= lo) & (T <= hi), axis=1).astype(float)
        else:
            out = np.asarray(self.fn(T), dtype=float).reshape(T.shape[0])
            if np.any(out < 0) or np.any(np.isnan(out)):
                raise ValueError("custom luckiness returned a negative or NaN value")
        out = self.scale * out
        return float(out[0]) if np.ndim(theta) <= 1 else out

    def exact(self, key):
        """Weight at an exact parameter key (tuple of Fractions), as a Fraction."""
        scale = Fraction(self.scale)
        if self.kind == "constant-one":
            return scale
        if self.kind == "indicator-box":
            inside = all(lo <= t <= hi for t, lo, hi in zip(key, self.lower, self.upper))
            return scale if inside else Fraction(0)
        value = float(np.asarray(self.fn(np.array([[float(t) for t in key]]))).ravel()[0])
        if value < 0 or math.isnan(value):
            raise ValueError("custom luckiness returned a negative or NaN value")
        return scale * Fraction(value)

    def support(self, lower, upper):
        """Intersection of the luckiness support with the box ``[lower, upper]``."""
        lo = np.array(lower, dtype=float, ndmin=1)
        hi = np.array(upper, dtype=float, ndmin=1)
        if self.lower is not None and self.upper is not None:
            lo = np.maximum(lo, self.lower)
            hi = np.minimum(hi, self.upper)
        return lo, hi

    @property
    def ident(self):
        if self.label:
            return self.label
        if self.kind == "constant-one":
            base = "one"
        elif self.kind == "indicator-box":
            if len(self.lower) == 1:
                base = f"box:{self.lower[0]!r},{self.upper[0]!r}"
            else:
                base = "box:" + ",".join(map(repr, self.lower)) + ";" + ",".join(map(repr, self.upper))
        else:
            base = "custom"
        return base if self.scale == 1.0 else f"{self.scale!r}*{base}"

    def to_dict(self):
        d = {"kind": self.kind, "id": self.ident, "scale": self.scale}
        if self.lower is not None:
            d["lower"] = list(self.lower)
            d["upper"] = list(self.upper)
        return d


def luckiness_eval(v, theta):
    """``v(theta)`` for one parameter vector (or scalar)."""
    return v(np.atleast_1d(np.asarray(theta, dtype=float)))
