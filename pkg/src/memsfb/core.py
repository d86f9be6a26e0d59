"""Grids, parameter records, field containers and discrete norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

BC_KINDS = ("clamped", "pinned")
RHS_KINDS = ("free_boundary", "small_gap", "capacitive", "fringing", "force_law")

# aliases accepted from the command line and config files
RHS_ALIASES = {
    "fb": "free_boundary",
    "free-boundary": "free_boundary",
    "sg": "small_gap",
    "small-gap": "small_gap",
    "vdw": "force_law",
    "force-law": "force_law",
}

MIN_NODES = 8


@dataclass(frozen=True)
class Params:
    """Model coefficients and selectors.

    ``lam`` is the voltage parameter (``lambda`` is reserved in Python).
    ``chi``, ``delta``, ``mu`` and ``m`` only matter for the capacitive,
    fringing and force-law right-hand sides.
    """

    epsilon: float = 0.5
    lam: float = 0.0
    beta: float = 1.0
    tau: float = 1.0
    gamma: float = 0.0
    a: float = 0.0
    bc: str = "clamped"
    rhs: str = "free_boundary"
    chi: float = 0.0
    delta: float = 0.0
    mu: float = 0.0
    m: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "rhs", RHS_ALIASES.get(self.rhs, self.rhs))
        if self.bc not in BC_KINDS:
            raise ValueError(f"bc must be one of {BC_KINDS}, got {self.bc!r}")
        if self.rhs not in RHS_KINDS:
            raise ValueError(f"rhs must be one of {RHS_KINDS}, got {self.rhs!r}")
        for name in ("epsilon", "lam", "beta", "tau", "gamma", "a", "chi", "delta", "mu", "m"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
            if name != "m" and val < 0:
                raise ValueError(f"{name} must be non-negative, got {val}")
        if self.beta == 0 and self.tau == 0:
            raise ValueError("(beta, tau) must not both vanish")
        if self.rhs == "free_boundary" and self.epsilon <= 0:
            raise ValueError("free_boundary requires epsilon > 0")

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)


@dataclass(frozen=True)
class Grid1D:
    """Uniform nodes on [-1, 1] with ``n`` interior points."""

    n: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    h: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Grid1D needs at least one interior node")
        x = np.linspace(-1.0, 1.0, self.n + 2)
        x[0], x[-1] = -1.0, 1.0
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", 2.0 / (self.n + 1))

    @property
    def interior(self) -> np.ndarray:
        return self.x[1:-1]

    def refined(self) -> "Grid1D":
        """Grid with half the spacing (every old node is kept)."""
        return Grid1D(2 * self.n + 1)


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid on [-1, 1] x [0, 1]; ``nx`` and ``neta`` count interior nodes."""

    nx: int
    neta: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    eta: np.ndarray = field(init=False, repr=False, compare=False)
    hx: float = field(init=False)
    heta: float = field(init=False)

    def __post_init__(self):
        gx = Grid1D(self.nx)
        eta = np.linspace(0.0, 1.0, self.neta + 2)
        eta[0], eta[-1] = 0.0, 1.0
        eta.flags.writeable = False
        object.__setattr__(self, "x", gx.x)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "hx", gx.h)
        object.__setattr__(self, "heta", 1.0 / (self.neta + 1))

    @property
    def grid1d(self) -> Grid1D:
        return Grid1D(self.nx)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Profile:
    """Samples of a function of x at every node (boundary nodes included)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n + 2,):
            raise ValueError(f"expected {self.grid.n + 2} samples, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]


@dataclass(frozen=True, eq=False)
class DeflectionField(Profile):
    """Plate deflection u on the nodes of a Grid1D.

    With ``check=True`` the field must vanish at x = +-1 and stay above -1.
    ``check=False`` exists for diagnostic states (e.g. constant u) only.
    """

    check: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not self.check:
            return
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("deflection contains non-finite values")
        if abs(v[0]) > 1e-12 or abs(v[-1]) > 1e-12:
            raise ValueError("deflection must vanish at x = -1 and x = 1")
        if v.min() <= -1.0:
            raise ValueError(f"inadmissible deflection: min u = {v.min()} <= -1")

    @classmethod
    def zeros(cls, grid: Grid1D) -> "DeflectionField":
        return cls(grid, np.zeros(grid.n + 2))

    @classmethod
    def from_function(cls, grid: Grid1D, func, check: bool = True) -> "DeflectionField":
        vals = np.asarray(func(grid.x), dtype=float) * np.ones_like(grid.x)
        if check:
            vals[0] = vals[-1] = 0.0
        return cls(grid, vals, check=check)

    @classmethod
    def from_interior(cls, grid: Grid1D, interior) -> "DeflectionField":
        vals = np.zeros(grid.n + 2)
        vals[1:-1] = interior
        return cls(grid, vals)

    @property
    def min(self) -> float:
        return float(self.values.min())


def make_grids(n: int, neta: int) -> tuple[Grid1D, Grid2D]:
    """Build the matching plate grid and potential grid.

    Fewer than eight interior nodes in either direction is refused: the
    five-point beam stencil and the one-sided trace formula need room.
    """
    if n < MIN_NODES or neta < MIN_NODES:
        raise ValueError(f"under-resolved grid: need n, neta >= {MIN_NODES}, got n={n}, neta={neta}")
    return Grid1D(n), Grid2D(n, neta)


# ---------------------------------------------------------------------------
# difference quotients on a full node vector (boundary included)


def d1(values: np.ndarray, h: float) -> np.ndarray:
    """First derivative: centered inside, second-order one-sided at the ends."""
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return out


def d2(values: np.ndarray, h: float) -> np.ndarray:
    """Second derivative: centered inside, second-order one-sided at the ends."""
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    return out


def trapz(values: np.ndarray, h: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(h * (v.sum() - 0.5 * (v[0] + v[-1])))


def h1_seminorm_sq(values: np.ndarray, h: float) -> float:
    """Midpoint rule for the integral of u_x^2 using forward differences."""
    dv = np.diff(values) / h
    return float(h * np.dot(dv, dv))


def discrete_norms(u: Profile) -> tuple[float, float, float, float]:
    """Return (L2 norm, H1 seminorm, H2 seminorm, nodal minimum) of ``u``."""
    h = u.grid.h
    v = u.values
    l2 = math.sqrt(trapz(v * v, h))
    h1 = math.sqrt(h1_seminorm_sq(v, h))
    uxx = d2(v, h)
    h2 = math.sqrt(trapz(uxx * uxx, h))
    return l2, h1, h2, float(v.min())


def interpolate(u: Profile, grid: Grid1D) -> np.ndarray:
    """Cubic interpolation of node values onto another grid."""
    return CubicSpline(u.grid.x, u.values)(grid.x)
