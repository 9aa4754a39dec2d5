"""Built-in source/sink families.

The grammar is closed (no free-form expressions) so that scenario files are
reproducible::

    zero
    sine1d k                          sin(2 pi k x)
    sine2d kx ky                      sin(2 pi kx x) sin(2 pi ky y)
    dipole x+ y+ x- y- sigma amp      amp * (G(x+, y+) - G(x-, y-))   (2D)
    dipole x+ x- sigma amp            amp * (G(x+) - G(x-))           (1D)

where G is an unnormalised Gaussian bump of width sigma. Sources are not
assumed exactly zero-mean; the projections subtract the numerically
computed mean.
"""
from dataclasses import dataclass

import numpy as np

FAMILIES = {"zero": (0,), "sine1d": (1,), "sine2d": (2,), "dipole": (4, 6)}


class SourceError(ValueError):
    pass


@dataclass(frozen=True)
class SourceSpec:
    family: str
    params: tuple = ()
    func: object = None  # only for programmatic sources, never from files

    def __post_init__(self):
        if self.func is not None:
            if self.family != "callable":
                raise SourceError("func is only allowed with family='callable'")
            return
        if self.family not in FAMILIES:
            raise SourceError(f"unknown source family {self.family!r}; "
                              f"expected one of {sorted(FAMILIES)}")
        params = tuple(float(p) for p in self.params)
        if len(params) not in FAMILIES[self.family]:
            raise SourceError(f"source {self.family!r} takes {FAMILIES[self.family]} "
                              f"parameters, got {len(params)}")
        if self.family == "dipole" and params[-2] <= 0:
            raise SourceError("dipole width sigma must be positive")
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, spec):
        """Build from ``"family p1 p2 ..."`` or ``{"family": ..., "params": [...]}``."""
        if isinstance(spec, SourceSpec):
            return spec
        if isinstance(spec, str):
            tokens = spec.split()
            if not tokens:
                raise SourceError("empty source string")
            return cls(tokens[0], tuple(tokens[1:]))
        if isinstance(spec, dict):
            extra = set(spec) - {"family", "params"}
            if extra or "family" not in spec:
                raise SourceError(f"bad source object {spec!r}")
            return cls(spec["family"], tuple(spec.get("params", ())))
        raise SourceError(f"cannot interpret source {spec!r}")

    @classmethod
    def from_callable(cls, f):
        return cls("callable", (), f)

    def to_dict(self):
        if self.func is not None:
            raise SourceError("programmatic sources cannot be serialised")
        return {"family": self.family, "params": list(self.params)}

    def supports(self, dim):
        if self.family == "sine2d":
            return dim == 2
        if self.family == "dipole":
            return len(self.params) == (4 if dim == 1 else 6)
        return True

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        dim = 1 if y is None else 2
        if not self.supports(dim):
            raise SourceError(f"source {self.family!r} with {len(self.params)} "
                              f"parameters is not defined in {dim}D")
        if self.func is not None:
            return np.asarray(self.func(x) if y is None else self.func(x, y), dtype=float)
        p = self.params
        if self.family == "zero":
            return np.zeros(np.broadcast(x, x if y is None else y).shape)
        if self.family == "sine1d":
            out = np.sin(2 * np.pi * p[0] * x)
            return out if y is None else out * np.ones_like(np.asarray(y, dtype=float))
        if self.family == "sine2d":
            return np.sin(2 * np.pi * p[0] * x) * np.sin(2 * np.pi * p[1] * y)
        # dipole
        if y is None:
            xp, xm, sigma, amp = p
            g = lambda c: np.exp(-((x - c) ** 2) / (2 * sigma ** 2))
            return amp * (g(xp) - g(xm))
        xp, yp, xm, ym, sigma, amp = p
        y = np.asarray(y, dtype=float)
        g = lambda cx, cy: np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma ** 2))
        return amp * (g(xp, yp) - g(xm, ym))

    def __str__(self):
        if self.func is not None:
            return "callable"
        return " ".join([self.family] + [repr(v) for v in self.params])
