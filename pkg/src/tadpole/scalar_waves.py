"""
Ring waves with a vanishing tail: odd, 2L-periodic solutions of

    -u'' - (p+1)|u|^{2p} u = omega u   on (-L, L),   u(+-L) = 0,

with 2n - 1 interior zeros. For p = 1 they are available in closed form through
cn; for general p they are assembled from one positive arch on (0, L/n) and
reflections.

Sign convention: ``sign=+1`` is the branch whose cn representation carries a
positive prefactor, ``+A cn(Bx + K; k)``. It has u'(0) < 0 and
sign u'(L) = (-1)^(n+1).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import DomainError, NewtonDiverged, NoAmplitude, NoRoot
from .special import complete_K, jacobi_sncndn

_K_MAX = 1.0 - 1e-15


def omega_n(n, L):
    """Linear threshold pi^2 n^2 / L^2 where branch n leaves the zero state."""
    return (math.pi * n / L) ** 2


def omega_from_k(n, L, k):
    """omega = 4 n^2 (1 - 2k^2) K(k)^2 / L^2 (cubic case)."""
    if n < 1 or L <= 0:
        raise DomainError(f"need n >= 1 and L > 0, got n={n}, L={L}")
    K = complete_K(k)
    return 4.0 * n * n * (1.0 - 2.0 * k * k) * K * K / (L * L)


def k_from_omega(n, L, omega):
    """Invert ``omega_from_k`` on (0, 1); omega is strictly decreasing in k."""
    wn = omega_n(n, L)
    if not omega < wn:
        raise NoRoot(f"no cn wave for omega={omega} >= omega_n={wn}")
    f = lambda k: omega_from_k(n, L, k) - omega
    hi = 1.0 - 1e-3
    while f(hi) > 0.0:
        hi = 1.0 - (1.0 - hi) * 1e-2
        if hi > _K_MAX:
            raise NoRoot(f"omega={omega} needs k closer to 1 than {_K_MAX}")
    return brentq(f, 0.0, hi, xtol=1e-16, rtol=1e-15, maxiter=200)


@dataclass
class RingWave:
    n: int
    sign: int
    omega: float
    p: float
    L: float
    x: np.ndarray
    profile: np.ndarray
    derivative_at_L: float
    method: str
    _eval: object = field(repr=False, default=None)
    _deriv: object = field(repr=False, default=None)
    meta: dict = field(default_factory=dict)

    def evaluate(self, x):
        """Wave at arbitrary real x (periodically extended)."""
        return self._eval(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self._deriv(np.asarray(x, dtype=float))

    def energy(self, x=None):
        """Energy invariant (u')^2 + (omega + |u|^{2p}) u^2 evaluated exactly."""
        x = self.x if x is None else x
        u = self.evaluate(x)
        return self.derivative(x) ** 2 + (self.omega + np.abs(u) ** (2 * self.p)) * u * u


def _check_sign(sign):
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")


def exact_cn_wave(n, sign, omega, L, grid=None, x=None):
    """Closed-form cubic wave +-(2nkK/L) cn(2nK x/L + K; k).

    Sampled at ``grid.ring_nodes`` (or explicit ``x``). Raises NoRoot for
    omega >= omega_n.
    """
    _check_sign(sign)
    k = k_from_omega(n, L, omega)
    K = complete_K(k)
    A = sign * 2.0 * n * k * K / L
    B = 2.0 * n * K / L

    def ev(x):
        return A * jacobi_sncndn(B * x + K, k)[1]

    def dev(x):
        sn, _, dn = jacobi_sncndn(B * x + K, k)
        return -A * B * sn * dn

    if x is None:
        x = grid.ring_nodes if grid is not None else np.linspace(-L, L, 201)
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    dL = A * B * kp * (-1.0) ** (n + 1)
    return RingWave(n, sign, omega, 1.0, L, np.asarray(x), ev(np.asarray(x)), dL,
                    "cn", ev, dev, {"k": k, "K": K})


# --- period-to-energy map ----------------------------------------------------

@dataclass(frozen=True)
class PeriodMapSample:
    u0: float
    omega: float
    p: float
    E: float
    T: float


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _graded_panels(levels=44):
    # geometric refinement towards s = 1 (x = 0), where the trajectory passes
    # close to the saddle for omega < 0
    edges = [0.0, 0.5]
    for j in range(2, levels + 1):
        edges.append(1.0 - 0.5 ** j)
    edges.append(1.0)
    edges = np.array(edges)
    a, b = edges[:-1], edges[1:]
    nodes = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (a + b)[:, None]
    weights = 0.5 * (b - a)[:, None] * _GL_W[None, :]
    return nodes.ravel(), weights.ravel()


_S_NODES, _S_WEIGHTS = _graded_panels()


def energy_level(u0, omega, p):
    return (omega + u0 ** (2 * p)) * u0 * u0


def period_T(u0, omega, p):
    """Distance between consecutive zeros of the trajectory with turning point u0.

    Uses x = 1 - s^2 so both simple roots at x = 1 cancel analytically, then
    composite Gauss-Legendre on panels graded towards x = 0.
    """
    if not (u0 > 0) or not (p > 0):
        raise DomainError(f"need u0 > 0, p > 0, got u0={u0}, p={p}")
    if energy_level(u0, omega, p) <= 0:
        raise DomainError(
            f"E = (omega + u0^2p) u0^2 <= 0 for u0={u0}, omega={omega}: "
            "trajectory is not a closed orbit around the origin")
    s = _S_NODES
    s2 = s * s
    q = u0 ** (2 * p)
    # (1 - x^2)/s^2 and (1 - x^{2p+2})/s^2 with x = 1 - s^2, kept accurate near s=0
    r1 = 2.0 - s2
    r2 = -np.expm1((2 * p + 2) * np.log1p(-s2)) / s2
    integrand = 4.0 / np.sqrt(omega * r1 + q * r2)
    return float(np.dot(_S_WEIGHTS, integrand))


def period_map(u0, omega, p):
    return PeriodMapSample(u0, omega, p, energy_level(u0, omega, p), period_T(u0, omega, p))


def dT_du0(u0, omega, p):
    """Analytic derivative -2p u0^{2p-1} int (1-x^{2p+2}) / g^{3/2} dx, same quadrature."""
    s = _S_NODES
    s2 = s * s
    q = u0 ** (2 * p)
    r1 = 2.0 - s2
    r2 = -np.expm1((2 * p + 2) * np.log1p(-s2)) / s2
    g = omega * r1 + q * r2
    # dx = 2s ds and (1 - x^{2p+2}) = s^2 r2, g_x = s^2 g: s-powers cancel to 2 r2
    integrand = 2.0 * r2 / g ** 1.5
    return float(-2.0 * p * u0 ** (2 * p - 1) * np.dot(_S_WEIGHTS, integrand))


def amplitude_for_period(T, omega, p, tol=1e-12):
    """Turning-point amplitude u0 with period_T(u0) = T, by bisection."""
    if not (T > 0):
        raise NoAmplitude(f"half-length must be positive, got {T}")
    if omega > 0 and T >= math.pi / math.sqrt(omega):
        raise NoAmplitude(f"T={T} outside (0, pi/sqrt(omega)) for omega={omega}")
    floor = (-omega) ** (1.0 / (2 * p)) if omega < 0 else 0.0

    def T_of(u):
        return period_T(u, omega, p)

    hi = max(1.0, 2.0 * floor)
    while T_of(hi) > T:
        hi *= 2.0
        if hi > 1e150:
            raise NoAmplitude(f"could not bracket amplitude for T={T}")
    lo = hi
    while True:
        lo = floor + 0.5 * (lo - floor)
        if lo - floor < 1e-300 or lo <= 0:
            raise NoAmplitude(f"could not bracket amplitude for T={T}, omega={omega}")
        if T_of(lo) > T:
            break
        hi = lo
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if T_of(mid) > T:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- general-p arch ----------------------------------------------------------

@dataclass
class Arch:
    omega: float
    p: float
    T: float
    s: np.ndarray
    values: np.ndarray
    u0_seed: float
    iterations: int
    residual_norm: float

    @property
    def amplitude(self):
        return float(self.values.max())

    @property
    def slope_at_zero(self):
        return float(self._spline(0.0, 1))

    def __post_init__(self):
        self._spline = CubicSpline(self.s, self.values, bc_type="not-a-knot")

    def __call__(self, s, nu=0):
        return self._spline(s, nu)


def solve_arch(omega, p, T, m=4096, tol=1e-13, max_iter=40):
    """Positive Dirichlet solution of -u'' - (p+1)u^{2p+1} = omega u on (0, T).

    Newton on a Numerov discretisation with ``m`` subintervals, seeded by
    ``u0 sin(pi s/T)`` where u0 comes from inverting the period map.
    """
    if not (p > 0) or not (T > 0):
        raise DomainError(f"need p > 0 and T > 0, got p={p}, T={T}")
    if omega > 0 and T >= math.pi / math.sqrt(omega):
        raise NoAmplitude(f"T={T} >= pi/sqrt(omega) for omega={omega}")
    u0 = amplitude_for_period(T, omega, p)
    s = np.linspace(0.0, T, m + 1)
    h = T / m
    c = h * h / 12.0
    u = u0 * np.sin(math.pi * s[1:-1] / T)

    def g(u):
        return -omega * u - (p + 1) * np.abs(u) ** (2 * p) * u

    def dg(u):
        return -omega - (p + 1) * (2 * p + 1) * np.abs(u) ** (2 * p)

    def residual(u):
        full = np.concatenate([[0.0], u, [0.0]])
        gf = g(full)
        return (full[2:] - 2 * full[1:-1] + full[:-2]
                - c * (gf[2:] + 10 * gf[1:-1] + gf[:-2])) / h ** 2

    r = residual(u)
    rn = np.max(np.abs(r))
    # residual carries a 1/h^2, so rounding alone leaves ~ eps u0 / h^2
    floor_rn = 64.0 * np.finfo(float).eps * max(1.0, u0) / h ** 2
    it = 0
    step = np.inf
    while step > tol * max(1.0, u0) and rn > floor_rn:
        if it >= max_iter:
            raise NewtonDiverged(f"arch Newton did not converge: residual {rn:.3e}", rn, it)
        d = dg(u)
        ab = np.zeros((3, u.size))
        ab[0, 1:] = (1.0 - c * d[1:]) / h ** 2
        ab[1, :] = (-2.0 - 10.0 * c * d) / h ** 2
        ab[2, :-1] = (1.0 - c * d[:-1]) / h ** 2
        du = solve_banded((1, 1), ab, -r)
        t = 1.0
        for _ in range(12):
            trial = u + t * du
            rt = residual(trial)
            if np.max(np.abs(rt)) < max(rn, floor_rn):
                break
            t *= 0.5
        else:
            raise NewtonDiverged(f"arch Newton stalled at residual {rn:.3e}", rn, it)
        step = t * np.max(np.abs(du))
        u, r = trial, rt
        rn = np.max(np.abs(r))
        it += 1
    if u.min() < -1e-12 * u0 or u.max() < 0.5 * u0:
        raise NoAmplitude(f"arch Newton left the positive branch (max {u.max():.3e})")
    values = np.concatenate([[0.0], u, [0.0]])
    return Arch(omega, p, T, s, values, u0, it, rn)


def assemble_ring_wave(n, sign, omega, p, L, grid=None, x=None, m=4096):
    """u^{+-}_{n,omega} from a single arch on (0, L/n) and odd reflections."""
    _check_sign(sign)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not omega < omega_n(n, L):
        raise NoAmplitude(f"omega={omega} >= omega_n={omega_n(n, L)}")
    T = L / n
    arch = solve_arch(omega, p, T, m=m)

    def split(x):
        j = np.floor(x / T)
        r = x - j * T
        # odd j flips the sign; the arch itself is positive
        par = np.where(np.mod(j, 2) == 0, 1.0, -1.0)
        return r, par

    def ev(x):
        r, par = split(x)
        return -sign * par * arch(np.clip(r, 0.0, T))

    def dev(x):
        r, par = split(x)
        return -sign * par * arch(np.clip(r, 0.0, T), 1)

    if x is None:
        x = grid.ring_nodes if grid is not None else np.linspace(-L, L, 201)
    x = np.asarray(x, dtype=float)
    prof = ev(x)
    # exact odd symmetry on symmetric samples
    if np.allclose(x, -x[::-1], rtol=0, atol=1e-14 * L):
        prof = 0.5 * (prof - prof[::-1])
    E = energy_level(arch.u0_seed, omega, p)
    dL = sign * (-1.0) ** (n + 1) * math.sqrt(E)
    return RingWave(n, sign, omega, p, L, x, prof, dL, "arch", ev, dev,
                    {"arch": arch, "E": E, "u0": arch.u0_seed,
                     "iterations": arch.iterations})


def ring_wave(n, sign, omega, p, L, grid=None, x=None):
    """Closed form when p = 1, arch assembly otherwise."""
    if p == 1:
        return exact_cn_wave(n, sign, omega, L, grid=grid, x=x)
    return assemble_ring_wave(n, sign, omega, p, L, grid=grid, x=x)


def count_interior_zeros(values, atol=1e-12):
    """Sign changes of sampled values, ignoring exact zeros at the samples."""
    v = np.asarray(values)
    scale = max(np.max(np.abs(v)), 1e-300)
    nz = v[np.abs(v) > atol * scale]
    return int(np.sum(np.sign(nz[1:]) != np.sign(nz[:-1])))
