"""Sobol low-discrepancy sequences and the box/ball draws built on them.

The generator follows the Joe-Kuo direction-number construction with Gray
code ordering, so point i+1 differs from point i by a single XOR.  The raw
sequence starts at the all-zeros point; callers normally skip it because a
zero draw makes a degenerate training sample.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SobolGenerator",
    "SampleSpec",
    "sobol_points",
    "sample_box",
    "sample_ball",
]

_BITS = 32
_SCALE = float(2**_BITS)

# Joe-Kuo direction numbers (new-joe-kuo-6): (degree, polynomial coefficient
# bits a, initial m values) per dimension starting at dimension 2.  Dimension
# 1 is the van der Corput sequence in base 2.
_DIRECTIONS = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
)

MAX_DIMENSION = 1 + len(_DIRECTIONS)


def _direction_vectors(dim: int) -> np.ndarray:
    """Direction integers v[k] = m[k] * 2^(_BITS-k-1), shape (dim, _BITS)."""
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    v[0] = [1 << (_BITS - k - 1) for k in range(_BITS)]
    for d in range(1, dim):
        s, a, m_init = _DIRECTIONS[d - 1]
        m = list(m_init)
        for k in range(s, _BITS):
            prev = m[k - s]
            new = prev ^ (prev << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        v[d] = [m[k] << (_BITS - k - 1) for k in range(_BITS)]
    return v


class SobolGenerator:
    """Stateful Sobol sequence in [0,1)^dim, Gray code order.

    skip counts raw points discarded before the first draw; the default of 1
    drops the initial all-zeros point, making the first draw all 0.5.
    """

    def __init__(self, dim: int, skip: int = 1):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if dim > MAX_DIMENSION:
            raise ValueError(
                f"dimension {dim} exceeds the embedded direction table "
                f"({MAX_DIMENSION} dimensions)")
        if skip < 0:
            raise ValueError("skip must be >= 0")
        self.dim = dim
        self._v = _direction_vectors(dim)
        self._state = np.zeros(dim, dtype=np.uint64)
        self._index = 0
        for _ in range(skip):
            self._advance()

    def _advance(self):
        # flip the direction indexed by the lowest zero bit of the counter
        c = 0
        idx = self._index
        while idx & 1:
            idx >>= 1
            c += 1
        self._state ^= self._v[:, c]
        self._index += 1

    def draw(self, n: int) -> np.ndarray:
        """Next n points, shape (n, dim)."""
        if n < 0:
            raise ValueError("n must be >= 0")
        out = np.empty((n, self.dim))
        for i in range(n):
            out[i] = self._state / _SCALE
            self._advance()
        return out


def sobol_points(dim: int, n: int, skip: int = 1) -> np.ndarray:
    """First n Sobol points in [0,1)^dim after discarding skip raw points."""
    return SobolGenerator(dim, skip=skip).draw(n)


@dataclass(frozen=True)
class SampleSpec:
    """Box and ball sampling parameters for one training set.

    Inputs u are drawn from center + [-box_half_width, +box_half_width]^n and
    corrections g from the ball of radius ball_radius; the dataset has
    box_draws * ball_draws rows.
    """

    box_half_width: float
    ball_radius: float
    box_draws: int
    ball_draws: int

    def __post_init__(self):
        if self.box_half_width <= 0 or self.ball_radius <= 0:
            raise ValueError("box half-width and ball radius must be positive")
        if self.box_draws < 1 or self.ball_draws < 1:
            raise ValueError("draw counts must be >= 1")


def sample_box(center: np.ndarray, half_width: float, m: int,
               skip: int = 1) -> np.ndarray:
    """m Sobol draws from center + [-half_width, half_width]^dim."""
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    s = sobol_points(center.shape[0], m, skip=skip)
    return center + half_width * (2.0 * s - 1.0)


def sample_ball(dim: int, radius: float, m: int, skip: int = 1) -> np.ndarray:
    """m Sobol draws from the Euclidean ball of given radius around 0.

    A (dim+1)-dimensional Sobol point supplies a direction (first dim
    coordinates, mapped by 2s-1 and normalized; the zero direction falls back
    to the first basis vector) and a radius radius * r^(1/dim), the uniform
    in-ball radius law.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    s = sobol_points(dim + 1, m, skip=skip)
    direction = 2.0 * s[:, :dim] - 1.0
    norms = np.linalg.norm(direction, axis=1)
    zero = norms == 0.0
    direction[zero] = 0.0
    direction[zero, 0] = 1.0
    norms[zero] = 1.0
    direction /= norms[:, None]
    radii = radius * s[:, dim] ** (1.0 / dim)
    return radii[:, None] * direction
