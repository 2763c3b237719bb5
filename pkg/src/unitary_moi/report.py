"""Check reports shared by the identity, calculus and Taylor suites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

ABS_FLOOR = 1e-12


@dataclass
class CheckReport:
    identity: str
    p: float
    residual_abs: float
    residual_rel: float
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "identity": self.identity,
            "p": _num(self.p),
            "residual_abs": _num(self.residual_abs),
            "residual_rel": _num(self.residual_rel),
            "pass": bool(self.passed),
            "seed": self.seed,
        }
        out.update({k: _jsonable(v) for k, v in self.details.items()})
        return out

    def __bool__(self):
        return self.passed


def residual_report(identity: str, p: float, residual_abs: float, scale: float,
                    tol: float, seed=None, **details) -> CheckReport:
    """Relative check ``residual_abs <= tol * scale`` with absolute floor :data:`ABS_FLOOR`."""
    rel = residual_abs / scale if scale > 0 else (0.0 if residual_abs == 0 else math.inf)
    passed = bool(rel <= tol or residual_abs <= ABS_FLOOR)
    return CheckReport(identity, p, float(residual_abs), float(rel), passed, seed, dict(details))


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, float):
        return _num(v)
    return v
