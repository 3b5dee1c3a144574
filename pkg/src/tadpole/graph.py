"""
Discrete tadpole graph: a ring [-L, L] glued at x = +-L to a half-line [L, inf).

The half-line is truncated at ``L_inf`` with a Dirichlet clamp. Both segments
share one uniform spacing ``h``. Unknowns are ordered as

    [u_1 .. u_{n_ring-1}, w, v_1 .. v_{n_tail-1}]

where ``u_j`` sits at ``x = -L + j h`` on the ring, ``w`` is the single
junction value (so u(L) = u(-L) = v(L) holds by construction) and ``v_i`` sits
at ``x = L + i h`` on the tail.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidGeometry, NonCommensurateTail

COMMENSURATE_TOL = 1e-9


@dataclass(frozen=True)
class TadpoleGrid:
    L: float
    L_inf: float
    h: float
    n_ring: int
    n_tail: int

    @property
    def n_unknowns(self):
        return self.n_ring - 1 + 1 + self.n_tail - 1

    @property
    def junction(self):
        return self.n_ring - 1

    @property
    def ring_slice(self):
        return slice(0, self.n_ring - 1)

    @property
    def tail_slice(self):
        return slice(self.n_ring, self.n_unknowns)

    @property
    def ring_x(self):
        """Coordinates of the ring interior unknowns."""
        return -self.L + self.h * np.arange(1, self.n_ring)

    @property
    def tail_x(self):
        """Coordinates of the tail interior unknowns."""
        return self.L + self.h * np.arange(1, self.n_tail)

    @property
    def ring_nodes(self):
        """All ring nodes from -L to L (both ends are the junction)."""
        return -self.L + self.h * np.arange(self.n_ring + 1)

    @property
    def tail_nodes(self):
        """All tail nodes from L (junction) to L_inf (clamped)."""
        return self.L + self.h * np.arange(self.n_tail + 1)

    def refined(self, factor=2):
        return build_grid(self.L, self.L_inf, self.n_ring * factor)

    def describe(self):
        return {"L": self.L, "L_inf": self.L_inf, "h": self.h,
                "n_ring": self.n_ring, "n_tail": self.n_tail,
                "n_unknowns": self.n_unknowns}


@dataclass
class GraphFunction:
    """Values on the discrete graph in the grid's unknown ordering."""

    grid: TadpoleGrid
    values: np.ndarray
    label: object = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_unknowns,):
            raise ValueError(
                f"expected {self.grid.n_unknowns} values, got {self.values.shape}")

    @classmethod
    def from_segments(cls, grid, ring, tail, label=None):
        """Build from callables (or arrays) on the ring interior, and the tail.

        ``ring`` and ``tail`` map coordinates to values. The junction value is
        taken from the tail evaluated at x = L.
        """
        ring_vals = ring(grid.ring_x) if callable(ring) else np.asarray(ring)
        if callable(tail):
            tail_all = tail(np.concatenate([[grid.L], grid.tail_x]))
        else:
            tail_all = np.asarray(tail)
        values = np.concatenate([ring_vals, tail_all])
        return cls(grid, values, label)

    @property
    def ring(self):
        """Ring interior values."""
        return self.values[self.grid.ring_slice]

    @property
    def junction(self):
        return float(self.values[self.grid.junction])

    @property
    def tail(self):
        """Tail interior values."""
        return self.values[self.grid.tail_slice]

    @property
    def ring_full(self):
        """Ring values on all nodes -L..L, junction value at both ends."""
        w = self.junction
        return np.concatenate([[w], self.ring, [w]])

    @property
    def tail_full(self):
        """Tail values on all nodes L..L_inf, clamped zero at the far end."""
        return np.concatenate([[self.junction], self.tail, [0.0]])

    def __neg__(self):
        return GraphFunction(self.grid, -self.values, self.label)


def build_grid(L, L_inf, n_ring):
    """Uniform tadpole grid with ``n_ring`` subintervals on [-L, L].

    Raises
    ------
    InvalidGeometry
        For nonpositive lengths, ``L_inf <= L`` or a bad ``n_ring``.
    NonCommensurateTail
        If ``L_inf - L`` is not an integer multiple of ``h = 2L/n_ring``.
    """
    if not (L > 0) or not np.isfinite(L):
        raise InvalidGeometry(f"ring half-length must be positive, got {L}")
    if not (L_inf > L) or not np.isfinite(L_inf):
        raise InvalidGeometry(f"need L_inf > L, got L={L}, L_inf={L_inf}")
    if int(n_ring) != n_ring or n_ring < 8 or n_ring % 2:
        raise InvalidGeometry(f"n_ring must be an even integer >= 8, got {n_ring}")
    n_ring = int(n_ring)
    h = 2.0 * L / n_ring
    ratio = (L_inf - L) / h
    n_tail = int(round(ratio))
    if abs(ratio - n_tail) > COMMENSURATE_TOL * max(1.0, ratio):
        raise NonCommensurateTail(
            f"(L_inf - L)/h = {ratio!r} is not an integer (h = {h!r})")
    if n_tail < 4:
        raise InvalidGeometry(f"tail needs at least 4 subintervals, got {n_tail}")
    return TadpoleGrid(float(L), float(L_inf), h, n_ring, n_tail)


def tail_length_for(L, n_ring, min_length):
    """Smallest commensurate L_inf with L_inf - L >= min_length."""
    h = 2.0 * L / n_ring
    return L + h * max(4, int(np.ceil(min_length / h - 1e-12)))


def assemble_laplacian(grid):
    """Sparse matrix of -Delta with the Kirchhoff vertex built in.

    Interior rows carry the central stencil ``(-f_{j-1} + 2 f_j - f_{j+1})/h^2``.
    The junction row is the degree-3 stencil ``2/(3h^2) (3w - a - b - c)`` over
    its three neighbours; the last tail row sees a zero beyond L_inf.
    """
    n = grid.n_unknowns
    J = grid.junction
    inv_h2 = 1.0 / grid.h ** 2
    rows, cols, vals = [], [], []

    def put(i, j, a):
        rows.append(i)
        cols.append(j)
        vals.append(a)

    nr = grid.n_ring - 1
    # ring interior: node 0 neighbours the junction at -L, node nr-1 at +L
    for i in range(nr):
        put(i, i, 2.0 * inv_h2)
        put(i, i - 1 if i > 0 else J, -inv_h2)
        put(i, i + 1 if i < nr - 1 else J, -inv_h2)

    c = 2.0 / 3.0 * inv_h2
    put(J, J, 3.0 * c)
    put(J, nr - 1, -c)
    put(J, 0, -c)
    put(J, J + 1, -c)

    first, last = grid.n_ring, n - 1
    for i in range(first, n):
        put(i, i, 2.0 * inv_h2)
        put(i, i - 1, -inv_h2)  # i == first reaches back to the junction
        if i < last:
            put(i, i + 1, -inv_h2)

    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def mass_weights(grid):
    """Lumped L^2 weights: h at interior nodes, 3h/2 at the junction."""
    w = np.full(grid.n_unknowns, grid.h)
    w[grid.junction] = 1.5 * grid.h
    return w


def inner(grid, f, g):
    """Discrete inner product sum_i w_i f_i conj(g_i)."""
    return np.sum(mass_weights(grid) * f * np.conj(g))


def symmetrize(matrix, weights):
    """Return W^{1/2} A W^{-1/2} as a dense array."""
    A = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    s = np.sqrt(weights)
    return (s[:, None] * A) / s[None, :]
