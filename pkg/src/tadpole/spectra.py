"""
Self-adjoint linearizations about a stationary wave and their spectra.

    L_-  = -Delta - omega - (p+1)      |phi|^{2p}
    L_+  = -Delta - omega - (2p+1)(p+1)|phi|^{2p}

Also provided are the periodic ring operators M_-/M_+ (the same potentials on
a closed ring, no tail), tracking of their even eigenvalue curves against the
line mu = -omega, and the half-line Evans function of the soliton
linearization.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import GridTooCoarse, NoBracket, NonSymmetrizable
from .graph import assemble_laplacian, build_grid, mass_weights
from .scalar_waves import omega_n
from .stationary import Branch, make_seed, newton_solve

TAGS = {"minus": "L_minus", "plus": "L_plus"}


def potential_factor(p, which):
    """(p+1) for the minus operator, (2p+1)(p+1) for the plus operator."""
    if which == "minus":
        return p + 1.0
    if which == "plus":
        return (2 * p + 1.0) * (p + 1.0)
    raise ValueError(f"which must be 'minus' or 'plus', got {which!r}")


def default_zero_tol(h):
    return 10.0 * h * h


@dataclass
class SpectrumReport:
    operator_tag: str
    omega: float
    eigenvalues: np.ndarray
    n_neg: int
    n_zero: int
    zero_tol: float
    essential_edge: float
    eigenvectors: np.ndarray = field(default=None, repr=False)
    parity: list = field(default=None)
    meta: dict = field(default_factory=dict)

    @property
    def continuum_mask(self):
        """Eigenvalues at or above the essential edge (discretized continuum)."""
        if self.essential_edge is None:
            return np.zeros(self.eigenvalues.size, dtype=bool)
        return self.eigenvalues >= self.essential_edge - self.zero_tol

    def lowest(self, k):
        return self.eigenvalues[:k]

    def counts(self):
        return {"n_neg": self.n_neg, "n_zero": self.n_zero}


def assemble_linearization(wave, which):
    """Sparse L_- or L_+ about ``wave`` in the grid's unknown ordering."""
    grid = wave.grid
    c = potential_factor(wave.p, which)
    pot = c * np.abs(wave.profile.values) ** (2 * wave.p)
    return (assemble_laplacian(grid) + sp.diags(-wave.omega - pot)).tocsr()


def _count(vals, zero_tol, edge):
    below = vals < -zero_tol
    if edge is not None:
        below &= vals < edge - zero_tol
    zero = np.abs(vals) <= zero_tol
    return int(np.sum(below)), int(np.sum(zero))


def symmetric_eigs(operator, weights, zero_tol, omega=None, operator_tag="",
                   vectors=False, edge="auto"):
    """All eigenvalues of W^{1/2} A W^{-1/2}, with negative and zero counts.

    Parameters
    ----------
    operator : sparse or dense matrix
        A, symmetric with respect to the weighted inner product.
    weights : ndarray
        Diagonal of W.
    zero_tol : float
        Eigenvalues with |lambda| <= zero_tol count as zero.
    omega : float, optional
        Frequency; sets the essential edge -omega when ``edge`` is "auto".

    Raises
    ------
    NonSymmetrizable
        If the symmetrized matrix deviates from symmetry by more than 1e-10
        relative to its largest entry.
    """
    A = operator.toarray() if sp.issparse(operator) else np.asarray(operator, dtype=float)
    s = np.sqrt(np.asarray(weights, dtype=float))
    S = (s[:, None] * A) / s[None, :]
    scale = max(1.0, float(np.max(np.abs(S))))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > 1e-10 * scale:
        raise NonSymmetrizable(f"weighted asymmetry {asym:.3e} exceeds 1e-10 x {scale:.3e}")
    S = 0.5 * (S + S.T)
    if edge == "auto":
        edge = -omega if omega is not None else None
    if vectors:
        vals, vecs = np.linalg.eigh(S)
        vecs = vecs / s[:, None]
    else:
        vals, vecs = np.linalg.eigvalsh(S), None
    n_neg, n_zero = _count(vals, zero_tol, edge)
    return SpectrumReport(operator_tag, omega, vals, n_neg, n_zero, zero_tol, edge, vecs)


def wave_spectrum(wave, which, zero_tol=None, vectors=False):
    """Spectrum of L_- or L_+ about ``wave`` with the default 10 h^2 tolerance."""
    grid = wave.grid
    zt = default_zero_tol(grid.h) if zero_tol is None else zero_tol
    return symmetric_eigs(assemble_linearization(wave, which), mass_weights(grid), zt,
                          omega=wave.omega, operator_tag=TAGS[which], vectors=vectors)


# --- periodic ring operators -------------------------------------------------

def ring_profile(n, sign, omega, p, L, n_ring):
    """Discrete ring wave on the nodes -L, -L + h, ..., L - h (periodic ordering).

    Solved by Newton on the ring interior from the continuous ring wave, so
    the result is an exact zero of the discrete periodic M_- operator. At or
    above omega_n the wave is identically zero.
    """
    if omega >= omega_n(n, L):
        return np.zeros(n_ring)
    h = 2.0 * L / n_ring
    grid = build_grid(L, L + 4 * h, n_ring)
    br = Branch("vanishing_tail", n, sign)
    seed = make_seed(br, 0.0, p, grid, omega=omega)
    wave = newton_solve(seed, omega, p, branch=br)
    return wave.profile.ring_full[:-1]


def _periodic_laplacian(m, h):
    main = np.full(m, 2.0 / h ** 2)
    off = np.full(m - 1, -1.0 / h ** 2)
    A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    A[0, -1] = A[-1, 0] = -1.0 / h ** 2
    return A


def _parity_bases(m):
    """Orthonormal bases of even and odd vectors under j -> -j (mod m)."""
    half = m // 2
    even, odd = [], []
    for j in range(half + 1):
        e = np.zeros(m)
        k = (-j) % m
        if k == j:
            e[j] = 1.0
            even.append(e)
            continue
        e[j], e[k] = 1.0, 1.0
        even.append(e / math.sqrt(2.0))
        o = np.zeros(m)
        o[j], o[k] = 1.0, -1.0
        odd.append(o / math.sqrt(2.0))
    return np.array(even).T, np.array(odd).T


def periodic_M_eigs(n, sign, omega, p, which, L=math.pi, n_ring=100, zero_tol=None):
    """Spectrum of M_- or M_+ on the closed ring with parity tags.

    Each eigenvector is either even or odd about x = 0; both subspaces are
    diagonalized separately, so the tags are exact rather than inferred.
    """
    h = 2.0 * L / n_ring
    u = ring_profile(n, sign, omega, p, L, n_ring)
    A = _periodic_laplacian(n_ring, h)
    M = A + np.diag(-omega - potential_factor(p, which) * np.abs(u) ** (2 * p))
    Qe, Qo = _parity_bases(n_ring)
    ve, we = np.linalg.eigh(Qe.T @ M @ Qe)
    vo, wo = np.linalg.eigh(Qo.T @ M @ Qo)
    vals = np.concatenate([ve, vo])
    vecs = np.concatenate([Qe @ we, Qo @ wo], axis=1)
    tags = np.array(["even"] * ve.size + ["odd"] * vo.size)
    order = np.argsort(vals, kind="stable")
    zt = default_zero_tol(h) if zero_tol is None else zero_tol
    vals = vals[order]
    n_neg, n_zero = _count(vals, zt, None)
    tag = {"minus": "M_minus", "plus": "M_plus"}[which]
    rep = SpectrumReport(tag, omega, vals, n_neg, n_zero, zt, None, vecs[:, order],
                         list(tags[order]))
    rep.meta.update({"x": -L + h * np.arange(n_ring), "wave": u, "n": n, "sign": sign})
    return rep


def parity_residual(vec, parity):
    """max |psi(x) -+ psi(-x)| for a periodic ring vector."""
    refl = np.roll(vec[::-1], 1)
    return float(np.max(np.abs(vec - refl if parity == "even" else vec + refl)))


@dataclass
class Crossing:
    curve: int
    omega_left: float
    omega_right: float
    omega_cross: float
    direction: str  # "down": mu + omega goes negative as omega decreases


@dataclass
class CrossingReport:
    n: int
    which: str
    omegas: np.ndarray
    distances: np.ndarray  # (len(omegas), n): mu_k(omega) + omega
    crossings: list
    ambiguous: list
    predicted_count: int
    tol: float


def track_crossings(n, sign, omega_grid, p, which, L=math.pi, n_ring=100, tol=1e-9,
                    strict=False, from_threshold=True):
    """Follow the n lowest even eigenvalues of M_-/M_+ against mu = -omega.

    With ``from_threshold`` the sample omega = omega_n (zero wave, where the
    constant mode lies exactly on the line) is prepended when the grid starts
    below it, so crossings that happen right at the bifurcation are seen.

    An eigenvalue curve mu_k below the line (mu_k + omega < -tol) carries one
    isolated eigenvalue of the tail-coupled problem, so the predicted count is
    the number of such curves at the last grid point. Sign changes are
    located by linear interpolation; cells where a parabola through three
    neighbouring samples has two roots are flagged as ambiguous (and raise
    GridTooCoarse when ``strict``).
    """
    omegas = np.asarray(omega_grid, dtype=float)
    wn = omega_n(n, L)
    if from_threshold and omegas.size and omegas[0] < wn:
        omegas = np.concatenate([[wn], omegas])
    if omegas.size < 2 or np.any(np.diff(omegas) >= 0):
        raise ValueError("omega_grid must be strictly descending with >= 2 samples")
    d = np.empty((omegas.size, n))
    for i, om in enumerate(omegas):
        rep = periodic_M_eigs(n, sign, om, p, which, L=L, n_ring=n_ring)
        even = rep.eigenvalues[np.array(rep.parity) == "even"]
        d[i] = even[:n] + om
    crossings, ambiguous = [], []
    s = np.where(d < -tol, -1, np.where(d > tol, 1, 0))
    for k in range(n):
        for i in range(omegas.size - 1):
            a, b = d[i, k], d[i + 1, k]
            if s[i, k] != s[i + 1, k] and s[i, k] * s[i + 1, k] <= 0 and (s[i, k] or s[i + 1, k]):
                w = a / (a - b) if a != b else 0.5
                oc = omegas[i] + w * (omegas[i + 1] - omegas[i])
                direction = "down" if b < a else "up"
                crossings.append(Crossing(k, omegas[i], omegas[i + 1], float(oc), direction))
        for i in range(1, omegas.size - 1):
            if _double_root_in_cell(omegas[i - 1:i + 2], d[i - 1:i + 2, k]):
                ambiguous.append((k, float(omegas[i - 1]), float(omegas[i + 1])))
    if ambiguous and strict:
        raise GridTooCoarse(f"possible double crossings in cells {ambiguous}")
    predicted = int(np.sum(d[-1] < -tol))
    return CrossingReport(n, which, omegas, d, crossings, ambiguous, predicted, tol)


def _double_root_in_cell(x, y):
    if np.all(y > 0) or np.all(y < 0):
        c = np.polyfit(x - x[1], y, 2)
        roots = np.roots(c)
        real = roots[np.abs(roots.imag) < 1e-14].real + x[1]
        inside = real[(real >= x.min()) & (real <= x.max())]
        return inside.size >= 2
    return False


# --- Evans function ----------------------------------------------------------

@dataclass(frozen=True)
class EvansSample:
    Lambda: float
    p: float
    a: float
    F: float


def _decaying_data(Lambda, p, a, variant, rtol):
    """(V(0), V'(0)) of the solution decaying like exp(-sqrt(1 - Lambda) z)."""
    if not Lambda < 1.0:
        raise ValueError(f"Lambda must be < 1, got {Lambda}")
    c = potential_factor(p, variant)
    kappa = math.sqrt(1.0 - Lambda)
    zmax = 40.0 / kappa

    def rhs(z, y):
        ch = math.cosh(min(p * (z + a), 700.0))
        return [y[1], (1.0 - Lambda - c / (ch * ch)) * y[0]]

    sol = solve_ivp(rhs, (zmax, 0.0), [1.0, -kappa], method="DOP853", rtol=rtol,
                    atol=1e-300)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def evans_F(Lambda, p, a=0.0, variant="plus", rtol=1e-11):
    """F = V'(0)/V(0) for the decaying solution of

        -V'' + V - c sech^2(p (z + a)) V = Lambda V,   z > 0,

    with c = (2p+1)(p+1) ("plus") or (p+1) ("minus"). Integration runs inward
    from z_max = 40/sqrt(1 - Lambda) with exponential data (DOP853).
    """
    V, dV = _decaying_data(Lambda, p, a, variant, rtol)
    return EvansSample(float(Lambda), p, a, dV / V)


def find_Lambda0(p, a=0.0, variant="plus", hi=-1e-6, lo=-1.0, lo_limit=-1e4, xtol=1e-13):
    """Zero of F on (-inf, 0): bracket by geometric widening, then Brent.

    F has poles wherever V(0) vanishes, so the bracket and the root search
    use V'(0)/|(V(0), V'(0))|, which shares the zeros of F but is continuous.
    """
    def G(lam):
        V, dV = _decaying_data(lam, p, a, variant, 1e-11)
        return dV / math.hypot(V, dV)

    g_hi = G(hi)
    g_lo = G(lo)
    while g_lo * g_hi > 0:
        lo *= 2.0
        if lo < lo_limit:
            raise NoBracket(f"F has no sign change on [{lo_limit}, {hi}] for p={p}")
        g_lo = G(lo)
    return brentq(G, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def halfline_neumann_eigs(p, variant="plus", length=40.0, h=0.005, k=1):
    """Lowest ``k`` eigenvalues of -V'' + V - c sech^2(pz) V on [0, length].

    Neumann at 0 through a ghost point, Dirichlet at ``length``. The ghost
    row (2V_0 - 2V_1)/h^2 becomes symmetric after scaling node 0 by 1/2.
    """
    c = potential_factor(p, variant)
    m = int(round(length / h))
    z = h * np.arange(m)
    diag = 2.0 / h ** 2 + 1.0 - c / np.cosh(p * z) ** 2
    off = np.full(m - 1, -1.0 / h ** 2)
    off[0] = -math.sqrt(2.0) / h ** 2
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1),
                            eigvals_only=True)


def spectrum_rows(report, k=6):
    """CSV row: omega, lowest k eigenvalues, n_neg, n_zero."""
    vals = list(report.eigenvalues[:k]) + [float("nan")] * max(0, k - report.eigenvalues.size)
    return [report.operator_tag, report.omega] + [float(v) for v in vals] + \
        [report.n_neg, report.n_zero]
