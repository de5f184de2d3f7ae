"""Spatial point processes around the base station.

Samples and interrogates the two independent homogeneous Poisson point
processes of the network model:
    - nodes, confined to the disk of radius ``r`` around the origin
    - interferers, on a finite disk window of radius ``R_w`` standing in for
      the whole plane (see ``truncation_window_radius``)

The base station sits at the origin. Every sampler takes an explicit
``numpy.random.Generator`` and has no other state, so realizations are
reproducible from the stream and safe to draw concurrently.

Realization text format::

    r=10 Rw=80.887482193696062
    N 1.25 -3.5
    I 40.1 12.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, NamedTuple, Sequence, Union

import numpy as np

if TYPE_CHECKING:
    from .channel import NetworkParams

PointsLike = Union[Sequence["Point"], np.ndarray]


class SingularityError(ValueError):
    """A point coincides with the origin or a receiver, where path loss is singular."""


class DivergentInterferenceError(ValueError):
    """Path loss exponent beta <= 2: mean interference from the plane is infinite."""


class Point(NamedTuple):
    """Position in the plane, in meters."""

    x: float
    y: float

    @property
    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def as_array(points: PointsLike) -> np.ndarray:
    """Return ``points`` as a float array of shape (n, 2)."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Realization:
    """One sampled placement of nodes and interferers.

    Attributes:
        nodes: (n, 2) node coordinates, strictly inside the disk of radius node_radius
        interferers: (m, 2) interferer coordinates inside the window disk
        node_radius: Node disk radius r
        window_radius: Interferer window radius R_w (>= node_radius)
    """

    nodes: np.ndarray = field(repr=False)
    interferers: np.ndarray = field(repr=False)
    node_radius: float
    window_radius: float

    def __post_init__(self) -> None:
        nodes = as_array(self.nodes)
        interferers = as_array(self.interferers)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "interferers", interferers)

        if not self.node_radius > 0:
            raise ValueError(f"node_radius must be > 0, got {self.node_radius}")
        if self.window_radius < self.node_radius:
            raise ValueError(
                f"window_radius ({self.window_radius}) must be >= node_radius ({self.node_radius})"
            )
        if len(nodes) and np.any(np.hypot(nodes[:, 0], nodes[:, 1]) >= self.node_radius):
            raise ValueError("every node must lie strictly inside the node disk")
        if len(interferers) and np.any(
            np.hypot(interferers[:, 0], interferers[:, 1]) > self.window_radius
        ):
            raise ValueError("every interferer must lie inside the window disk")
        for arr in (nodes, interferers):
            if len(arr) and np.any((arr[:, 0] == 0.0) & (arr[:, 1] == 0.0)):
                raise SingularityError("a point coincides with the base station at the origin")

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def interferer_count(self) -> int:
        return int(self.interferers.shape[0])

    def node_points(self) -> List[Point]:
        return [Point(float(x), float(y)) for x, y in self.nodes]

    def interferer_points(self) -> List[Point]:
        return [Point(float(x), float(y)) for x, y in self.interferers]

    def node_distances(self) -> np.ndarray:
        """Distances from the base station to every node."""
        return np.hypot(self.nodes[:, 0], self.nodes[:, 1])

    def with_nodes(self, nodes: PointsLike) -> "Realization":
        """Copy of this realization with a different node set."""
        return Realization(nodes, self.interferers, self.node_radius, self.window_radius)


def _check_intensity(lam: float, name: str = "lambda") -> None:
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"{name} must be a finite intensity >= 0, got {lam}")


def _check_radius(radius: float, name: str) -> None:
    if not math.isfinite(radius) or radius <= 0:
        raise ValueError(f"{name} must be a finite length > 0, got {radius}")


def sample_uniform_disk(count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Place ``count`` i.i.d. uniform points on the disk of ``radius``.

    Polar inverse-CDF placement (radius * sqrt(U), uniform angle). A point
    landing exactly on the origin is redrawn.
    """
    _check_radius(radius, "radius")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rho = np.minimum(radius * np.sqrt(rng.random(count)), np.nextafter(radius, 0.0))
    phi = rng.random(count) * (2.0 * math.pi)
    for i in np.flatnonzero(rho == 0.0):
        while rho[i] == 0.0:
            rho[i] = radius * math.sqrt(rng.random())
    return np.column_stack((rho * np.cos(phi), rho * np.sin(phi)))


def _sample_ppp_disk(lam: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    count = int(rng.poisson(lam * math.pi * radius * radius))
    return sample_uniform_disk(count, radius, rng)


def sample_node_process(lam: float, r: float, rng: np.random.Generator) -> np.ndarray:
    """Sample the node process on the disk b(O, r).

    The count is Poisson with mean ``lam * pi * r**2``; given the count the
    points are i.i.d. uniform on the disk.

    Args:
        lam: Node intensity per square meter (>= 0)
        r: Disk radius in meters (> 0)
        rng: Random stream; the result is a deterministic function of its state

    Returns:
        Array of shape (n, 2)

    Raises:
        ValueError: Non-finite or negative intensity/radius
    """
    _check_intensity(lam)
    _check_radius(r, "r")
    return _sample_ppp_disk(lam, r, rng)


def sample_interferer_process(
    lam: float, window_radius: float, rng: np.random.Generator
) -> np.ndarray:
    """Sample the interferer process on the window disk of radius ``window_radius``."""
    _check_intensity(lam)
    _check_radius(window_radius, "window_radius")
    return _sample_ppp_disk(lam, window_radius, rng)


def truncation_window_radius(
    lam: float, p: float, beta: float, r: float, rel_tol: float = 0.005
) -> float:
    """Radius of the interferer window that stands in for the whole plane.

    Interferers beyond ``R_w`` contribute a mean interference of at most
    ``2*pi*lam*p*(R_w - r)**(2 - beta) / (beta - 2)`` anywhere in the node
    disk. The reference is the mean in-window interference at the disk edge
    from transmitters at distance >= r/2 of the edge point, i.e. the annulus
    between r/2 and R_w - r around it. Requiring tail <= rel_tol * reference
    gives ``(R_w - r)**(2 - beta) <= rel_tol/(1 + rel_tol) * (r/2)**(2 - beta)``;
    the smallest such radius is returned, floored at 2r. The common factor
    ``2*pi*lam*p/(beta - 2)`` cancels, so the radius depends on beta, r and
    rel_tol only.

    Raises:
        DivergentInterferenceError: beta <= 2 (plane interference is infinite)
        ValueError: rel_tol outside (0, 1) or invalid lam/p/r
    """
    _check_intensity(lam)
    _check_radius(r, "r")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not beta > 2.0:
        raise DivergentInterferenceError(
            f"beta must be > 2 for finite interference, got {beta}"
        )
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must satisfy 0 < rel_tol < 1, got {rel_tol}")

    guard = 0.5 * r
    reach = guard * ((1.0 + rel_tol) / rel_tol) ** (1.0 / (beta - 2.0))
    return max(2.0 * r, r + reach)


def sample_realization(
    params: "NetworkParams", rng: np.random.Generator, rel_tol: float = 0.005
) -> Realization:
    """Sample nodes and interferers together on the truncated window."""
    window = truncation_window_radius(
        params.interferer_lam, params.p, params.beta, params.r, rel_tol
    )
    nodes = sample_node_process(params.lam, params.r, rng)
    interferers = sample_interferer_process(params.interferer_lam, window, rng)
    return Realization(nodes, interferers, params.r, window)


def ordered_squared_distances(points: PointsLike) -> np.ndarray:
    """Squared distances to the origin, sorted ascending.

    For a planar PPP of intensity lam these behave like the arrival times of a
    one-dimensional Poisson process of rate lam * pi.

    Example:
        >>> ordered_squared_distances([(3, 4), (0, 1)])
        array([ 1., 25.])
    """
    arr = as_array(points)
    return np.sort(arr[:, 0] ** 2 + arr[:, 1] ** 2)


def dump_realization(realization: Realization, path: str | Path) -> None:
    """Write ``realization`` in the plain-text format (17 significant digits)."""
    lines = [f"r={realization.node_radius:.17g} Rw={realization.window_radius:.17g}"]
    lines += [f"N {x:.17g} {y:.17g}" for x, y in realization.nodes]
    lines += [f"I {x:.17g} {y:.17g}" for x, y in realization.interferers]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str) -> tuple[float, float]:
    try:
        fields = dict(part.split("=", 1) for part in line.split())
        return float(fields["r"]), float(fields["Rw"])
    except (KeyError, ValueError) as e:
        raise ValueError(f"bad realization header {line!r} (expected 'r=<val> Rw=<val>')") from e


def load_realization(path: str | Path) -> Realization:
    """Read a realization file written by ``dump_realization`` (or by hand).

    Raises:
        FileNotFoundError: Missing file
        ValueError: Malformed header or point line (message carries the line number)
    """
    text = Path(path).read_text(encoding="utf-8")
    # (raw line number, content) with blanks and comments dropped
    lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty realization file")

    header_no, header = lines[0]
    try:
        r, window = _parse_header(header)
    except ValueError as e:
        raise ValueError(f"{path}:{header_no}: {e}") from e
    nodes: List[Iterable[float]] = []
    interferers: List[Iterable[float]] = []
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("N", "I"):
            raise ValueError(f"{path}:{lineno}: expected 'N|I <x> <y>', got {line!r}")
        try:
            point = (float(parts[1]), float(parts[2]))
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: bad coordinate in {line!r}") from e
        (nodes if parts[0] == "N" else interferers).append(point)
    return Realization(np.array(nodes), np.array(interferers), r, window)
