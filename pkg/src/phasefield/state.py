from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class NonFiniteStateError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class FieldState:
    """Nodal temperature on the container and phase on the medium at time ``t``.

    ``phi_dot`` is the most recent discrete time derivative of the phase,
    zero before the first step.
    """

    t: float
    u: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        pd = np.zeros_like(self.phi) if self.phi_dot is None else np.asarray(self.phi_dot, dtype=float)
        object.__setattr__(self, "phi_dot", pd)

    def check(self, n_u: int | None = None, n_omega: int | None = None) -> None:
        if n_u is not None and self.u.shape != (n_u,):
            raise ValueError(f"u has shape {self.u.shape}, expected ({n_u},)")
        if n_omega is not None and self.phi.shape != (n_omega,):
            raise ValueError(f"phi has shape {self.phi.shape}, expected ({n_omega},)")
        if self.phi_dot.shape != self.phi.shape:
            raise ValueError("phi_dot and phi shapes differ")
        for name in ("u", "phi", "phi_dot"):
            v = getattr(self, name)
            bad = np.nonzero(~np.isfinite(v))[0]
            if bad.size:
                raise NonFiniteStateError(
                    f"non-finite {name} at node {bad[0]} (t={self.t:.6g}, value={v[bad[0]]})"
                )

    def with_time(self, t: float) -> "FieldState":
        return replace(self, t=t)

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.u.copy(), self.phi.copy(), self.phi_dot.copy())
