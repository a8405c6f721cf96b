import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import speed_of_light

from utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

_AXES = {'x': 0, 'y': 1, 'z': 2}


@dataclass(frozen=True)
class Direction:
    """Azimuth measured from +x, elevation measured from the x-y plane (radians)"""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not -math.pi <= self.azimuth < math.pi:
            raise InvalidInputError(f"Azimuth must lie in [-pi, pi), got {self.azimuth}")
        if not -math.pi / 2 <= self.elevation < math.pi / 2:
            raise InvalidInputError(f"Elevation must lie in [-pi/2, pi/2), got {self.elevation}")

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float) -> 'Direction':
        return cls.from_angles(math.radians(azimuth_deg), math.radians(elevation_deg))

    @classmethod
    def from_angles(cls, azimuth: float, elevation: float) -> 'Direction':
        """Wrap azimuth into [-pi, pi) and keep elevation below pi/2"""
        azimuth = (azimuth + math.pi) % (2 * math.pi) - math.pi
        if elevation >= math.pi / 2:
            elevation = math.nextafter(math.pi / 2, 0.0)
        return cls(azimuth, elevation)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> 'Direction':
        x, y, z = (float(v) for v in vector)
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            raise InvalidInputError("Cannot take the direction of a zero vector")
        return cls.from_angles(math.atan2(y, x), math.asin(max(-1.0, min(1.0, z / norm))))


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Element coordinates of an antenna / RIS array, one row per element"""

    element_positions: np.ndarray

    def __post_init__(self):
        positions = np.array(self.element_positions, dtype=float).reshape(-1, 3)
        positions.setflags(write=False)
        object.__setattr__(self, 'element_positions', positions)

    @property
    def count(self) -> int:
        return self.element_positions.shape[0]

    @property
    def reference(self) -> np.ndarray:
        """Corner element used as phase and distance reference"""
        return self.element_positions[0]


@dataclass(frozen=True)
class LinkGeometry:
    distance: float
    direction: Direction


@dataclass(frozen=True, eq=False)
class ScenarioGeometry:
    """
    Node placement of one scenario.

    Index 0 of the transmitter lists is the signal transmitter Tx0; indices
    1..N_I are the interferers.
    """

    wavelength: float
    rx_layout: ArrayLayout
    ris_layout: ArrayLayout
    tx_positions: np.ndarray
    direct_links: Tuple[LinkGeometry, ...]     # Tx_i -> Rx0, seen from Rx0
    incident_links: Tuple[LinkGeometry, ...]   # Tx_i -> RIS, seen from the RIS
    ris_to_rx: LinkGeometry                    # seen from Rx0 (arrival)
    rx_to_ris: LinkGeometry                    # seen from the RIS (departure)

    @property
    def transmitter_count(self) -> int:
        return self.tx_positions.shape[0]

    def node_positions(self) -> np.ndarray:
        """Reference points of Rx0, the RIS and every transmitter, in that order"""
        return np.vstack([self.rx_layout.reference, self.ris_layout.reference, self.tx_positions])

    def distance_table(self) -> np.ndarray:
        nodes = self.node_positions()
        return np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)

    def direct_response(self, index: int) -> np.ndarray:
        """f_LOS of the Tx_i -> Rx0 link, length N_R"""
        return np.conj(array_factor(self.direct_links[index].direction, self.rx_layout, self.wavelength))

    def incident_response(self, index: int) -> np.ndarray:
        """f_LOS of the Tx_i -> RIS link, length N"""
        return np.conj(array_factor(self.incident_links[index].direction, self.ris_layout, self.wavelength))

    def ris_rx_response(self) -> np.ndarray:
        """F_LOS of the RIS -> Rx0 link, N_R x N outer product of the two array factors"""
        arrival = np.conj(array_factor(self.ris_to_rx.direction, self.rx_layout, self.wavelength))
        departure = array_factor(self.rx_to_ris.direction, self.ris_layout, self.wavelength)
        return np.outer(arrival, departure)


def spherical_to_cartesian(r: float, azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return r * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])


def build_square_ura(count: int, wavelength: float, origin: Sequence[float] = (0.0, 0.0, 0.0),
                     plane: str = 'yz') -> ArrayLayout:
    """
    Square uniform rectangular array with half-wavelength pitch

    Args:
        count (int): Number of elements, a perfect square
        wavelength (float): Carrier wavelength in meters
        origin: Position of the corner element
        plane (str): Pair of axes spanned by the array, e.g. 'yz'

    Returns:
        ArrayLayout: Element positions, corner element first
    """
    side = math.isqrt(count) if count > 0 else 0
    if count <= 0 or side * side != count:
        raise InvalidInputError(f"URA element count must be a positive perfect square, got {count}")
    if wavelength <= 0.0:
        raise InvalidInputError(f"Wavelength must be positive, got {wavelength}")
    if len(plane) != 2 or plane[0] == plane[1] or any(axis not in _AXES for axis in plane):
        raise InvalidInputError(f"Plane must name two distinct axes out of x, y, z, got {plane!r}")

    pitch = wavelength / 2.0
    first, second = np.meshgrid(np.arange(side), np.arange(side), indexing='ij')
    positions = np.zeros((count, 3))
    positions[:, _AXES[plane[0]]] = pitch * first.ravel()
    positions[:, _AXES[plane[1]]] = pitch * second.ravel()
    return ArrayLayout(positions + np.asarray(origin, dtype=float))


def wave_vector(direction: Direction, wavelength: float) -> np.ndarray:
    """k(phi, theta) in rad/m"""
    cos_el = math.cos(direction.elevation)
    return (2.0 * math.pi / wavelength) * np.array([
        cos_el * math.cos(direction.azimuth),
        cos_el * math.sin(direction.azimuth),
        math.sin(direction.elevation),
    ])


def array_factor(direction: Direction, layout: ArrayLayout, wavelength: float) -> np.ndarray:
    """Row vector exp(j k^T u_m) over the elements of ``layout``"""
    if layout.count == 0:
        raise InvalidInputError("Array layout has no elements")
    return np.exp(1j * (layout.element_positions @ wave_vector(direction, wavelength)))


def ring_placements(count: int, radius_m: float,
                    rng: Optional[np.random.Generator] = None) -> List[Tuple[float, float, float]]:
    """
    Interferer placements on a horizontal ring around the origin.

    Azimuths are drawn uniformly when ``rng`` is given, evenly spaced otherwise.
    """
    if rng is None:
        azimuths = np.arange(count) * 360.0 / max(count, 1)
    else:
        azimuths = rng.uniform(-180.0, 180.0, size=count)
    return [(radius_m, float(az), 0.0) for az in azimuths]


def _link(origin: np.ndarray, target: np.ndarray) -> LinkGeometry:
    offset = target - origin
    return LinkGeometry(float(np.linalg.norm(offset)), Direction.from_vector(offset))


def place_scenario(cfg, rng: Optional[np.random.Generator] = None) -> ScenarioGeometry:
    """
    Place Rx0, the RIS and all transmitters of a scenario.

    Args:
        cfg: ScenarioConfig (spherical placements in meters / degrees)
        rng: Generator used for random ring placement of interferers

    Returns:
        ScenarioGeometry: Array layouts, transmitter positions and link table
    """
    wavelength = speed_of_light / cfg.frequency_hz
    rx_origin = spherical_to_cartesian(*cfg.rx_position)
    ris_origin = spherical_to_cartesian(*cfg.ris_position)
    rx_layout = build_square_ura(cfg.N_R, wavelength, rx_origin)
    ris_layout = build_square_ura(cfg.N, wavelength, ris_origin)

    if cfg.interferer_layout == 'ring':
        interferers = ring_placements(cfg.N_I, cfg.ring_radius_m, rng)
    else:
        if len(cfg.interferer_positions) < cfg.N_I:
            raise InvalidInputError(
                f"{cfg.N_I} interferers requested but only {len(cfg.interferer_positions)} placements given"
            )
        interferers = list(cfg.interferer_positions[:cfg.N_I])

    tx_positions = np.array([spherical_to_cartesian(*p) for p in [cfg.tx0_position] + interferers])

    nodes = np.vstack([rx_layout.reference, ris_layout.reference, tx_positions])
    gaps = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
    np.fill_diagonal(gaps, np.inf)
    if np.min(gaps) <= 1e-12:
        raise InvalidInputError("Two scenario nodes coincide")

    geometry = ScenarioGeometry(
        wavelength=wavelength,
        rx_layout=rx_layout,
        ris_layout=ris_layout,
        tx_positions=tx_positions,
        direct_links=tuple(_link(rx_layout.reference, tx) for tx in tx_positions),
        incident_links=tuple(_link(ris_layout.reference, tx) for tx in tx_positions),
        ris_to_rx=_link(rx_layout.reference, ris_layout.reference),
        rx_to_ris=_link(ris_layout.reference, rx_layout.reference),
    )
    logger.debug(
        f"Placed {len(tx_positions)} transmitters; d_alpha={geometry.ris_to_rx.distance:.3f} m"
    )
    return geometry
