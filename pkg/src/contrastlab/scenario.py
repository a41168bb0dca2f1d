"""Closed-form analysis of the reduced one-positive/(N-1)-negative scenario.

The scenario fixes a similarity row [C, -C, ..., -C]: one positive pair
at similarity C and N-1 negatives at -C, with C the single optimization
variable. For each loss variant the per-row loss and the magnitude of
its gradient have closed forms:

    div_temp   loss  = log(1 + (N-1) exp(-2C/tau))
               scale = (N-1)(2/tau) / ((N-1) + exp(2C/tau))        [d/dC]
    learnable  loss  = log(1 + (N-1) exp(-2C exp(t)))
               scale = (N-1) 2C exp(t) / ((N-1) + exp(2C exp(t)))  [d/dt]
    temp_free  loss  = -log((1+C)^2 / ((1+C)^2 + (N-1)(1-C)^2))
               scale = 4(N-1)(1-C) / ((1+C)(N(1-C)^2 + 4C))        [d/dC]

``sample_curve`` evaluates these along a grid to regenerate the data
behind the four standard diagnostic figures, and ``find_vanishing_region``
locates where a gradient-scale curve drops below a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGrid, InvalidScenario

DIV_TEMP = "div_temp"
LEARNABLE = "learnable"
TEMP_FREE = "temp_free"
VARIANTS = (DIV_TEMP, LEARNABLE, TEMP_FREE)

DEFAULT_GRID_LO = 1e-4
DEFAULT_GRID_HI = 1.0 - 1e-4
DEFAULT_GRID_POINTS = 512
DEFAULT_VANISH_THRESHOLD = 0.01

# Parameter sets of the four standard diagnostic figures. Figure 3 sweeps
# the temperature at fixed C; the others sweep C.
FIGURE_PRESETS = {
    2: {"variant": DIV_TEMP, "taus": (0.1, 0.25, 0.5, 1.0), "n": 2, "sweep": "C"},
    3: {"variant": DIV_TEMP, "cs": (0.25, 0.5, 0.75, 1.0), "n": 2, "sweep": "tau"},
    4: {"variant": DIV_TEMP, "taus": (0.25,), "ns": (2, 4, 8, 16), "sweep": "C"},
    5: {"variant": TEMP_FREE, "ns": (2, 4, 8, 16), "sweep": "C"},
}


@dataclass(frozen=True)
class ScenarioPoint:
    """One evaluation point of the reduced scenario.

    C is accepted on the closed interval [0, 1]: the closed forms extend
    continuously to both endpoints and the golden values are stated there.
    """

    variant: str
    c: float
    n: int = 2
    tau: float | None = None
    t: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidScenario(f"unknown variant {self.variant!r}")
        if not 0.0 <= self.c <= 1.0:
            raise InvalidScenario(f"C must lie in [0, 1], got {self.c!r}")
        if self.n < 2:
            raise InvalidScenario(f"N must be >= 2, got {self.n!r}")
        if self.variant == DIV_TEMP:
            if self.tau is None or self.tau <= 0:
                raise InvalidScenario(f"div_temp needs tau > 0, got {self.tau!r}")
        if self.variant == LEARNABLE and self.t is None:
            raise InvalidScenario("learnable needs a scale parameter t")


@dataclass
class CurveData:
    """A sampled scenario curve plus the parameters that fix it.

    ``grid`` holds the swept values: C values for sweep == "C", strictly
    inside (0, 1); temperatures for sweep == "tau" (then ``c`` is the
    fixed similarity half-distance and ``tau_or_t`` is None).
    """

    variant: str
    grid: np.ndarray
    values: np.ndarray
    n: int
    tau_or_t: float | None = None
    c: float | None = None
    sweep: str = "C"
    quantity: str = "grad_scale"

    def label(self) -> str:
        bits = [self.variant]
        if self.variant == DIV_TEMP and self.sweep == "C":
            bits.append(f"tau={self.tau_or_t:g}")
        if self.variant == LEARNABLE:
            bits.append(f"t={self.tau_or_t:g}")
        if self.sweep == "tau":
            bits.append(f"C={self.c:g}")
        bits.append(f"N={self.n}")
        return " ".join(bits)


def scenario_loss(p: ScenarioPoint) -> float:
    """Closed-form per-row loss at a scenario point."""
    k = p.n - 1
    if p.variant == DIV_TEMP:
        return math.log1p(k * math.exp(-2.0 * p.c / p.tau))
    if p.variant == LEARNABLE:
        return math.log1p(k * math.exp(-2.0 * p.c * math.exp(p.t)))
    r = (1.0 - p.c) / (1.0 + p.c)
    return math.log1p(k * r * r)


def scenario_grad_scale(p: ScenarioPoint) -> float:
    """Closed-form gradient magnitude at a scenario point.

    For div_temp and temp_free this is |dL/dC|; for learnable it is
    |dL/dt|, the update scale of the trainable parameter. Evaluated
    through exp of the negative argument so low temperatures cannot
    overflow.
    """
    k = p.n - 1
    if p.variant == DIV_TEMP:
        e = math.exp(-2.0 * p.c / p.tau)
        return (2.0 / p.tau) * k * e / (k * e + 1.0)
    if p.variant == LEARNABLE:
        scale = math.exp(p.t)
        e = math.exp(-2.0 * p.c * scale)
        return 2.0 * p.c * scale * k * e / (k * e + 1.0)
    one_m = 1.0 - p.c
    return 4.0 * k * one_m / ((1.0 + p.c) * (p.n * one_m * one_m + 4.0 * p.c))


def _evaluate(variant, value, n, tau_or_t, fixed_c, sweep, quantity) -> float:
    if sweep == "C":
        kwargs = {"tau": tau_or_t} if variant == DIV_TEMP else {}
        if variant == LEARNABLE:
            kwargs = {"t": tau_or_t}
        point = ScenarioPoint(variant, c=value, n=n, **kwargs)
    else:
        point = ScenarioPoint(variant, c=fixed_c, n=n, tau=value)
    fn = scenario_grad_scale if quantity == "grad_scale" else scenario_loss
    return fn(point)


def make_grid(lo: float = DEFAULT_GRID_LO, hi: float = DEFAULT_GRID_HI,
              points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform sweep grid; the default covers C in [1e-4, 1 - 1e-4]."""
    if points < 2:
        raise InvalidGrid(f"a grid needs at least 2 points, got {points}")
    if not lo < hi:
        raise InvalidGrid(f"grid bounds must satisfy lo < hi, got {lo!r}, {hi!r}")
    return np.linspace(lo, hi, points)


def sample_curve(
    variant: str,
    grid=None,
    *,
    n: int = 2,
    tau: float | None = None,
    t: float | None = None,
    c: float | None = None,
    sweep: str = "C",
    quantity: str = "grad_scale",
    points: int = DEFAULT_GRID_POINTS,
) -> CurveData:
    """Evaluate a scenario quantity along a grid.

    For sweep == "C" the grid must lie strictly inside (0, 1); for
    sweep == "tau" (div_temp only) the grid holds temperatures > 0 and
    ``c`` fixes the similarity half-distance.
    """
    if variant not in VARIANTS:
        raise InvalidScenario(f"unknown variant {variant!r}")
    if sweep not in ("C", "tau"):
        raise InvalidGrid(f"sweep must be 'C' or 'tau', got {sweep!r}")
    if quantity not in ("grad_scale", "loss"):
        raise InvalidGrid(f"quantity must be 'grad_scale' or 'loss', got {quantity!r}")
    if sweep == "tau":
        if variant != DIV_TEMP:
            raise InvalidGrid("temperature sweeps only apply to div_temp")
        if c is None:
            raise InvalidGrid("a temperature sweep needs a fixed C")
        g = make_grid(0.01, 1.0, points) if grid is None else np.asarray(grid, dtype=np.float64)
    else:
        g = make_grid(points=points) if grid is None else np.asarray(grid, dtype=np.float64)

    if g.ndim != 1 or g.size < 2:
        raise InvalidGrid(f"a grid needs at least 2 points, got shape {g.shape}")
    if np.any(np.diff(g) <= 0):
        raise InvalidGrid("grid must be strictly increasing")
    if sweep == "C" and (g[0] <= 0.0 or g[-1] >= 1.0):
        raise InvalidGrid(f"C grid must lie inside (0, 1), got [{g[0]!r}, {g[-1]!r}]")
    if sweep == "tau" and g[0] <= 0.0:
        raise InvalidGrid(f"temperature grid must be positive, got min {g[0]!r}")

    tau_or_t = t if variant == LEARNABLE else tau
    values = np.array(
        [_evaluate(variant, v, n, tau_or_t, c, sweep, quantity) for v in g]
    )
    return CurveData(
        variant=variant, grid=g, values=values, n=n,
        tau_or_t=None if sweep == "tau" else tau_or_t,
        c=c if sweep == "tau" else None, sweep=sweep, quantity=quantity,
    )


def figure_curves(figure: int, points: int = DEFAULT_GRID_POINTS) -> list[CurveData]:
    """Curves for one of the standard diagnostic figures (2, 3, 4 or 5)."""
    if figure not in FIGURE_PRESETS:
        raise InvalidGrid(f"figure must be one of {sorted(FIGURE_PRESETS)}, got {figure!r}")
    preset = FIGURE_PRESETS[figure]
    curves = []
    if figure == 2:
        for tau in preset["taus"]:
            curves.append(sample_curve(DIV_TEMP, tau=tau, n=preset["n"], points=points))
    elif figure == 3:
        for c in preset["cs"]:
            curves.append(sample_curve(DIV_TEMP, c=c, n=preset["n"], sweep="tau", points=points))
    elif figure == 4:
        for n in preset["ns"]:
            curves.append(sample_curve(DIV_TEMP, tau=preset["taus"][0], n=n, points=points))
    else:
        for n in preset["ns"]:
            curves.append(sample_curve(TEMP_FREE, n=n, points=points))
    return curves


def find_vanishing_region(
    curve: CurveData, threshold: float = DEFAULT_VANISH_THRESHOLD
) -> list[tuple[float, float]]:
    """Maximal grid intervals where the curve drops below a threshold.

    Returns (start, end) pairs in grid coordinates; an empty list when
    the curve stays at or above the threshold everywhere.
    """
    below = curve.values < threshold
    regions = []
    start = None
    for i, flag in enumerate(below):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            regions.append((float(curve.grid[start]), float(curve.grid[i - 1])))
            start = None
    if start is not None:
        regions.append((float(curve.grid[start]), float(curve.grid[-1])))
    return regions
