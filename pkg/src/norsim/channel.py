"""Voltage geometry of multi-level cells and the stochastic read model.

A cell programmed to level ``x`` targets the voltage ``L_x = l0 + x * pitch``
where ``pitch = margin + width``.  Programming lands the cell uniformly
within ``width / 2`` of the target.  A read additionally suffers two-sided
exponential tails: a fraction ``tail`` of all reads falls outside the
program window, half per side, with density decaying as ``exp(-2 a x)``
(mean excess ``1 / (2 a)``).

Voltage units are arbitrary throughout; results depend only on the
dimensionless products ``a * margin`` and ``a * width``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseModel",
    "LevelGrid",
    "RngStream",
    "derive_5level_margin",
    "four_level_grid",
    "five_level_grid",
    "read_density",
    "sample_read",
    "sample_read_conditioned",
]


@dataclass(frozen=True)
class NoiseModel:
    """Read-voltage law around each program level.

    a: tail slope parameter, 1/volt; tail density decays as exp(-2*a*x).
    tail: fraction of reads in the exponential tails, in [0, 1].
    width: program distribution width, volts, >= 0.  width == 0 collapses
        the interior to a point mass at the level voltage.
    """

    a: float
    tail: float
    width: float = 0.0

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError(f"tail slope a must be > 0, got {self.a}")
        if not 0.0 <= self.tail <= 1.0:
            raise ValueError(f"tail fraction must be in [0, 1], got {self.tail}")
        if self.width < 0.0:
            raise ValueError(f"program width must be >= 0, got {self.width}")


@dataclass(frozen=True)
class LevelGrid:
    """Equally spaced program levels ``L_x = l0 + x * (margin + width)``.

    The margin is the gap between adjacent program windows; read decision
    boundaries sit mid-gap at ``L_x + width/2 + margin/2``.
    """

    n_levels: int
    margin: float
    width: float = 0.0
    l0: float = 0.0

    def __post_init__(self):
        if self.n_levels < 2:
            raise ValueError(f"need at least 2 levels, got {self.n_levels}")
        if not self.margin > 0.0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.width < 0.0:
            raise ValueError(f"width must be >= 0, got {self.width}")

    @property
    def pitch(self) -> float:
        return self.margin + self.width

    @property
    def levels(self) -> np.ndarray:
        return self.l0 + self.pitch * np.arange(self.n_levels)

    def boundaries(self) -> np.ndarray:
        """Midpoints between adjacent levels (the margin-sense references)."""
        return self.levels[:-1] + 0.5 * self.pitch

    def level_voltage(self, level_index):
        idx = np.asarray(level_index)
        if np.any(idx < 0) or np.any(idx >= self.n_levels):
            raise ValueError(f"level index out of range 0..{self.n_levels - 1}")
        out = self.l0 + self.pitch * idx
        return float(out) if np.ndim(level_index) == 0 else out


def derive_5level_margin(delta0: float, width: float) -> float:
    """Margin of the 5-level grid that spans the same window as a 4-level
    grid with margin ``delta0``: 4*(margin + width) = 3*(delta0 + width)."""
    if not delta0 > 0.0:
        raise ValueError(f"delta0 must be > 0, got {delta0}")
    if width < 0.0:
        raise ValueError(f"width must be >= 0, got {width}")
    if 3.0 * delta0 <= width:
        raise ValueError(
            f"5-level margin would be <= 0 (3*delta0={3 * delta0} <= width={width})"
        )
    return (3.0 * delta0 - width) / 4.0


def four_level_grid(delta0: float, width: float = 0.0, l0: float = 0.0) -> LevelGrid:
    return LevelGrid(4, delta0, width, l0)


def five_level_grid(delta0: float, width: float = 0.0, l0: float = 0.0) -> LevelGrid:
    """5-level grid occupying the same voltage window as ``four_level_grid``."""
    return LevelGrid(5, derive_5level_margin(delta0, width), width, l0)


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream)``.

    Distinct (seed, stream) pairs give statistically independent sequences,
    and a given pair reproduces the identical sequence on every platform.
    A single stream must not be shared across concurrent callers.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def _check_pair(grid: LevelGrid, noise: NoiseModel) -> None:
    if abs(grid.width - noise.width) > 1e-12 * max(1.0, abs(noise.width)):
        raise ValueError(
            f"grid width {grid.width} does not match noise width {noise.width}"
        )


def read_density(v, level_index, grid: LevelGrid, noise: NoiseModel):
    """Density of the read voltage for a cell programmed to ``level_index``.

    Inside the program window the density is (1-tail)/width; outside it is
    a*tail*exp(-2*a*excess) with excess measured from the window edge.  For
    width == 0 the interior is a point mass of weight (1-tail) at the level
    voltage and the returned function covers only the tail part.
    """
    _check_pair(grid, noise)
    center = grid.level_voltage(level_index)
    d = np.abs(np.asarray(v, dtype=float) - center)
    a, t, w = noise.a, noise.tail, noise.width
    if w == 0.0:
        out = a * t * np.exp(-2.0 * a * d)
    else:
        out = np.where(
            d <= w / 2.0,
            (1.0 - t) / w,
            a * t * np.exp(-2.0 * a * np.maximum(d - w / 2.0, 0.0)),
        )
    return float(out) if np.ndim(v) == 0 and np.ndim(level_index) == 0 else out


def _sample_mixture(centers, noise: NoiseModel, gen: np.random.Generator):
    """Draw reads around ``centers`` from the full interior+tail mixture.

    Consumes a fixed number of variates per element regardless of outcome,
    so draw sequences are reproducible independent of the sampled values.
    """
    shape = np.shape(centers)
    u_mix = gen.random(shape)
    u_side = gen.random(shape)
    u_pos = gen.random(shape)
    mag = gen.exponential(1.0 / (2.0 * noise.a), shape)
    side = np.where(u_side < 0.5, -1.0, 1.0)
    interior = centers + noise.width * (u_pos - 0.5)
    tails = centers + side * (noise.width / 2.0 + mag)
    return np.where(u_mix < noise.tail, tails, interior)


def _sample_conditioned(centers, tail_mask, noise: NoiseModel, gen: np.random.Generator):
    """Draw reads with the tail/interior split forced by ``tail_mask``.

    Returns (voltages, sides) with side -1/+1 for tail draws and 0 for
    interior draws.  Interior draws require width > 0.
    """
    tail_mask = np.asarray(tail_mask, dtype=bool)
    if noise.width == 0.0 and not tail_mask.all():
        raise ValueError("interior draws are undefined for width == 0")
    shape = np.shape(centers)
    u_side = gen.random(shape)
    u_pos = gen.random(shape)
    mag = gen.exponential(1.0 / (2.0 * noise.a), shape)
    side = np.where(u_side < 0.5, -1, 1)
    tails = centers + side * (noise.width / 2.0 + mag)
    interior = centers + noise.width * (u_pos - 0.5)
    v = np.where(tail_mask, tails, interior)
    return v, np.where(tail_mask, side, 0)


def sample_read(level_index, grid: LevelGrid, noise: NoiseModel, rng: RngStream, size=None):
    """Sample read voltages from the read law.

    With probability 1-tail the read is uniform on the program window; with
    probability tail/2 per side it is the window edge plus an exponential
    excess of rate 2*a.  ``level_index`` may be a scalar or an array;
    ``size`` draws that many reads of a single scalar level.
    """
    _check_pair(grid, noise)
    centers = grid.level_voltage(level_index)
    if size is not None:
        if np.ndim(level_index) != 0:
            raise ValueError("size is only valid with a scalar level_index")
        centers = np.full(size, centers)
    v = _sample_mixture(centers, noise, rng.gen)
    return float(v) if np.ndim(v) == 0 else v


def sample_read_conditioned(
    level_index,
    grid: LevelGrid,
    noise: NoiseModel,
    force_tail: bool,
    rng: RngStream,
    size=None,
):
    """Sample from the tail-conditional (or interior-conditional) read law.

    Mixing these conditionals with weights tail/(1-tail) reproduces the
    unconditioned read law exactly.  Returns (voltage, side) where side is
    -1/+1 for tail draws and 0 for interior draws.  force_tail=False with
    width == 0 is a domain error (the interior is a point mass).
    """
    _check_pair(grid, noise)
    centers = grid.level_voltage(level_index)
    scalar = size is None and np.ndim(level_index) == 0
    if size is not None:
        if np.ndim(level_index) != 0:
            raise ValueError("size is only valid with a scalar level_index")
        centers = np.full(size, centers)
    mask = np.full(np.shape(centers), bool(force_tail))
    v, side = _sample_conditioned(centers, mask, noise, rng.gen)
    if scalar:
        return float(v), int(side)
    return v, side
