"""Result records shared by the solvers and the sweep harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

PROP2_COLUMNS = ("eps", "err_psi_l2", "err_dzpsi_l2", "err_dxdz_l2", "err_g_h0", "err_g_h025", "err_dzz_l2")
STATIONARY_COLUMNS = ("eps", "h1_err", "drift", "psi_l2", "dzpsi_l2", "newton_iters")
EVOLUTION_COLUMNS = ("eps", "sup_u_err", "sup_ut_err", "cvpsi_psi", "cvpsi_dz")


@dataclass(frozen=True)
class ErrorRecord:
    """Error norms for one eps value; unused fields stay None."""

    eps: float
    err_psi_l2: float | None = None
    err_dzpsi_l2: float | None = None
    err_dxdz_l2: float | None = None
    err_g_h0: float | None = None
    err_g_h025: float | None = None
    err_dzz_l2: float | None = None
    sup_u_err: float | None = None
    sup_ut_err: float | None = None
    cvpsi_pair: tuple[float, float] | None = None
    h1_err: float | None = None
    drift: float | None = None
    psi_pair: tuple[float, float] | None = None
    newton_iters: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be finite and >= 0, got {self.eps}")
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            for x in val if isinstance(val, tuple) else (val,):
                if not (math.isfinite(x) and x >= 0):
                    raise ValueError(f"{f.name} must be finite and >= 0, got {x}")

    def row(self, columns) -> list:
        out = []
        for c in columns:
            if c == "cvpsi_psi":
                out.append(None if self.cvpsi_pair is None else self.cvpsi_pair[0])
            elif c == "cvpsi_dz":
                out.append(None if self.cvpsi_pair is None else self.cvpsi_pair[1])
            elif c == "psi_l2":
                out.append(None if self.psi_pair is None else self.psi_pair[0])
            elif c == "dzpsi_l2":
                out.append(None if self.psi_pair is None else self.psi_pair[1])
            else:
                out.append(getattr(self, c))
        return out


@dataclass(frozen=True)
class RateFit:
    name: str
    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r2: float
    below_floor: bool = False
    excluded: tuple[float, ...] = ()
