"""Penalty families and their scalar threshold functions.

Two families are supported: the minimax concave penalty (MCP), a quadratic
spline that rises like lam*t near zero and flattens to the constant
lam**2 * gamma / 2 beyond t = lam*gamma, and the l1 (lasso) penalty lam*t.
Each family has a closed-form threshold function solving the scalar
penalized least-squares problem

    minimize_b  0.5 * (b - btilde)**2 + penalty(|b|),

which is the single-coordinate update used by the coordinate-descent solver.
"""

import math
from dataclasses import dataclass, replace

MCP = "mcp"
L1 = "l1"

_FAMILIES = (MCP, L1)


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty family plus its parameters.

    ``lam`` is the regularization level.  ``gamma`` controls the concavity
    of the MCP (small gamma is closer to hard thresholding, large gamma to
    the l1 penalty) and is ignored for the l1 family.  ``gamma > 1`` is
    required so that the MCP threshold is single-valued under a unit-norm
    design.
    """

    family: str
    lam: float
    gamma: float = 2.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}; expected one of {_FAMILIES}")
        if not self.lam >= 0.0:
            raise ValueError("lam must be nonnegative")
        if self.family == MCP and not self.gamma > 1.0:
            raise ValueError("MCP requires gamma > 1")

    def with_lambda(self, lam: float) -> "PenaltyConfig":
        """Copy of this config at a different regularization level."""
        return replace(self, lam=float(lam))


def penalty_value(t: float, cfg: PenaltyConfig) -> float:
    """Penalty value at t >= 0; zero at the origin, nondecreasing in t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam = cfg.lam
    if cfg.family == L1:
        return lam * t
    # MCP: the boundary point t == lam*gamma falls through to the plateau
    # branch; both branches agree there so the choice is inert.
    if t < lam * cfg.gamma:
        return lam * (t - t * t / (2.0 * lam * cfg.gamma))
    return 0.5 * lam * lam * cfg.gamma


def tau(cfg: PenaltyConfig) -> float:
    """Supremum of the penalty: lam**2 * gamma / 2 for MCP, +inf for l1."""
    if cfg.family == L1:
        return math.inf
    return 0.5 * cfg.lam * cfg.lam * cfg.gamma


def threshold(btilde: float, cfg: PenaltyConfig) -> float:
    """Global minimizer of 0.5*(b - btilde)**2 + penalty(|b|).

    Soft threshold for l1; for MCP the spline region lam < |btilde| <=
    lam*gamma rescales the soft threshold by 1/(1 - 1/gamma) and values
    beyond lam*gamma pass through unshrunk.  lam = 0 is the identity.
    """
    lam = cfg.lam
    a = abs(btilde)
    if a <= lam:
        return 0.0
    if cfg.family == L1:
        return math.copysign(a - lam, btilde)
    if a <= lam * cfg.gamma:
        return math.copysign((a - lam) / (1.0 - 1.0 / cfg.gamma), btilde)
    return btilde
