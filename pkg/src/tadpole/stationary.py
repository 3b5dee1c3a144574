"""
Stationary states of the coupled tadpole system

    -u'' - (p+1)|u|^{2p} u = omega u  on the ring,
    -v'' - (p+1)|v|^{2p} v = omega v  on the tail,

joined by continuity and the Kirchhoff flux condition u'(L) - u'(-L) = v'(L).

Three families are supported. The primary branch has no zeros and bifurcates
from u = 0 at omega = 0. Vanishing-tail branches are ring waves with v = 0.
Higher branches are translated ring waves glued to an untranslated soliton.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse.linalg import splu

from .errors import (BranchCollapsed, ContinuationStalled, DomainError, NewtonDiverged,
                     NoShift, OutOfRange, SingularJacobian)
from .graph import GraphFunction, assemble_laplacian
from .scalar_waves import omega_n, ring_wave
from .special import soliton_phi0

KINDS = ("primary", "vanishing_tail", "higher")
HIGHER_ANCHOR_EPS = 0.5


@dataclass(frozen=True)
class Branch:
    """Branch label; ``n`` and ``sign`` are ignored for the primary branch."""

    kind: str
    n: int = 0
    sign: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown branch kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "primary":
            object.__setattr__(self, "n", 0)
            object.__setattr__(self, "sign", 1)
        else:
            if int(self.n) != self.n or self.n < 1:
                raise DomainError(f"{self.kind} branch needs n >= 1, got {self.n}")
            if self.sign not in (1, -1):
                raise DomainError(f"branch sign must be +1 or -1, got {self.sign}")

    @classmethod
    def parse(cls, text):
        """Parse ``primary``, ``vanishing_tail:2:+`` or ``higher:1:-``."""
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "primary":
            if len(parts) not in (1, 3):
                raise DomainError(f"cannot parse branch {text!r}")
            return cls("primary")
        if len(parts) != 3:
            raise DomainError(f"branch {text!r} must look like kind:n:sign")
        try:
            n = int(parts[1])
        except ValueError:
            raise DomainError(f"branch index in {text!r} is not an integer") from None
        signs = {"+": 1, "-": -1, "+1": 1, "-1": -1, "1": 1}
        if parts[2] not in signs:
            raise DomainError(f"branch sign in {text!r} must be + or -")
        return cls(kind, n, signs[parts[2]])

    @property
    def coupled(self):
        """True when the tail carries a nonzero soliton."""
        return self.kind != "vanishing_tail"

    def __str__(self):
        if self.kind == "primary":
            return "primary"
        return f"{self.kind}:{self.n}:{'+' if self.sign > 0 else '-'}"


@dataclass
class StationaryWave:
    omega: float
    p: float
    branch: Branch
    profile: GraphFunction
    residual_norm: float
    iterations: int
    mass: float
    ring_mass: float
    tail_mass: float
    flux_residual: float
    tail_shift_a: float = None
    ring_shift_b: float = None
    meta: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.profile.grid

    @property
    def epsilon(self):
        return math.sqrt(-self.omega) if self.omega < 0 else float("nan")

    def summary(self):
        return {"branch": str(self.branch), "omega": self.omega, "p": self.p,
                "residual_norm": self.residual_norm, "iterations": self.iterations,
                "mass": self.mass, "ring_mass": self.ring_mass, "tail_mass": self.tail_mass,
                "flux_residual": self.flux_residual, "a": self.tail_shift_a,
                "b": self.ring_shift_b, "junction": self.profile.junction,
                "max_abs_tail": float(np.max(np.abs(self.profile.tail), initial=0.0))}


def _nonlinearity(values, p):
    return (p + 1) * np.abs(values) ** (2 * p) * values


def residual(phi, omega, p, A=None):
    """A phi - omega phi - (p+1)|phi|^{2p} phi in the grid's unknown ordering."""
    if A is None:
        A = assemble_laplacian(phi.grid)
    r = A @ phi.values - omega * phi.values - _nonlinearity(phi.values, p)
    return GraphFunction(phi.grid, r, phi.label)


def jacobian(phi, omega, p, A=None):
    """Sparse Jacobian of ``residual``: A - omega - (p+1)(2p+1)|phi|^{2p}."""
    if A is None:
        A = assemble_laplacian(phi.grid)
    d = -omega - (p + 1) * (2 * p + 1) * np.abs(phi.values) ** (2 * p)
    return (A + sp.diags(d)).tocsc()


def segment_masses(phi):
    """Ring and tail L^2 masses; the junction weight 3h/2 is split h + h/2."""
    h = phi.grid.h
    w = phi.junction
    ring = h * float(np.sum(phi.ring ** 2)) + h * w * w
    tail = 0.5 * h * w * w + h * float(np.sum(phi.tail ** 2))
    return ring, tail


def flux_residual(phi):
    """u'(L) - u'(-L) - v'(L) from second-order one-sided differences.

    The vertex stencil enforces the flux condition only up to O(h^3) in this
    measure, so it is a consistency diagnostic rather than a solver residual.
    """
    h = phi.grid.h
    ring, tail = phi.ring_full, phi.tail_full
    du_right = (3 * ring[-1] - 4 * ring[-2] + ring[-3]) / (2 * h)
    du_left = (-3 * ring[0] + 4 * ring[1] - ring[2]) / (2 * h)
    dv = (-3 * tail[0] + 4 * tail[1] - tail[2]) / (2 * h)
    return float(du_right - du_left - dv)


def _ring_block(grid, A):
    sl = grid.ring_slice
    return A[sl, sl]


def newton_solve(seed, omega, p, tol=1e-10, max_iter=50, max_halvings=8,
                 branch=None, ring_only=None):
    """Damped Newton iteration for the stationary system.

    Parameters
    ----------
    seed : GraphFunction
        Initial guess. Its ``label`` supplies the branch when ``branch`` is None.
    tol : float
        Target sup-norm of the residual.
    ring_only : bool, optional
        Keep the junction and tail frozen at zero and iterate on the ring
        interior alone. Defaults to True for vanishing-tail branches.

    Raises
    ------
    NewtonDiverged
        The residual could not be reduced within ``max_halvings`` halvings or
        ``max_iter`` iterations.
    SingularJacobian
        The sparse LU factorization of the Jacobian failed.
    BranchCollapsed
        A nonzero seed converged onto the trivial state, or a coupled seed
        onto a state with a vanishing tail.
    """
    branch = branch if branch is not None else seed.label
    if not isinstance(branch, Branch):
        branch = Branch("primary") if branch is None else Branch.parse(str(branch))
    if ring_only is None:
        ring_only = branch.kind == "vanishing_tail"
    grid = seed.grid
    if not np.all(np.isfinite(seed.values)):
        raise DomainError("seed contains non-finite values")
    A = assemble_laplacian(grid)
    phi = seed.values.copy()
    if ring_only:
        mask = np.zeros(grid.n_unknowns, dtype=bool)
        mask[grid.ring_slice] = True
        phi[~mask] = 0.0
        A_act = _ring_block(grid, A).tocsc()
    else:
        mask = np.ones(grid.n_unknowns, dtype=bool)
        A_act = A.tocsc()

    def res(x):
        return A_act @ x - omega * x - _nonlinearity(x, p)

    x = phi[mask]
    r = res(x)
    rn = float(np.max(np.abs(r), initial=0.0))
    it = 0
    while rn >= tol:
        if it >= max_iter:
            raise NewtonDiverged(f"Newton hit max_iter={max_iter} at residual {rn:.3e} "
                                 f"({branch}, omega={omega})", rn, it)
        d = -omega - (p + 1) * (2 * p + 1) * np.abs(x) ** (2 * p)
        J = (A_act + sp.diags(d)).tocsc()
        try:
            dx = splu(J).solve(-r)
        except RuntimeError as exc:
            raise SingularJacobian(f"Jacobian factorization failed ({branch}, "
                                   f"omega={omega}): {exc}", rn, it) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(f"non-finite Newton step ({branch}, omega={omega})", rn, it)
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = x + t * dx
            rt = res(trial)
            rtn = float(np.max(np.abs(rt)))
            if rtn < rn:
                break
            t *= 0.5
        else:
            raise NewtonDiverged(f"Newton step did not reduce residual {rn:.3e} "
                                 f"({branch}, omega={omega})", rn, it)
        x, r, rn = trial, rt, rtn
        it += 1

    if ring_only and branch.kind == "vanishing_tail":
        # the ring problem is odd about x = 0; remove rounding asymmetry
        x = 0.5 * (x - x[::-1])
    phi = np.zeros(grid.n_unknowns)
    phi[mask] = x
    seed_scale = float(np.max(np.abs(seed.values), initial=0.0))
    if seed_scale > 0 and np.max(np.abs(phi)) < 1e-6 * seed_scale:
        raise BranchCollapsed(f"Newton collapsed onto the zero state ({branch}, "
                              f"omega={omega})", rn, it)
    seed_tail = float(np.max(np.abs(seed.values[grid.junction:]), initial=0.0))
    if branch.coupled and seed_tail > 0 and \
            np.max(np.abs(phi[grid.junction:])) < 1e-6 * seed_tail:
        raise BranchCollapsed(f"Newton lost the tail and landed on a vanishing-tail state "
                              f"({branch}, omega={omega})", rn, it)
    return _package(GraphFunction(grid, phi, branch), omega, p, branch, it, A)


def _package(profile, omega, p, branch, iterations, A=None):
    r = residual(profile, omega, p, A)
    ring_m, tail_m = segment_masses(profile)
    wave = StationaryWave(omega=omega, p=p, branch=branch, profile=profile,
                          residual_norm=float(np.max(np.abs(r.values))),
                          iterations=iterations, mass=ring_m + tail_m,
                          ring_mass=ring_m, tail_mass=tail_m,
                          flux_residual=flux_residual(profile))
    if branch.coupled and omega < 0 and np.any(profile.values):
        try:
            wave.tail_shift_a = tail_shift(wave)
        except OutOfRange as exc:
            wave.meta["a_error"] = str(exc)
        if branch.kind == "higher":
            try:
                wave.ring_shift_b = ring_shift(wave)
            except NoShift as exc:
                wave.meta["b_error"] = str(exc)
    return wave


def zero_wave(grid, omega, p, branch=None):
    branch = branch or Branch("primary")
    return _package(GraphFunction(grid, np.zeros(grid.n_unknowns), branch), omega, p, branch, 0)


# --- seeds -------------------------------------------------------------------

def higher_shift(n, sign, epsilon, p, L, omega=None):
    """Ring shift b with u_e(L + b) = epsilon^{1/p}, u_e the ring wave at omega.

    The root nearest to 0 is taken; it lies between L and the neighbouring
    extremum, so the bracket is [0, +-L/(2n)] in the direction of u_e'(L).
    """
    omega = -epsilon ** 2 if omega is None else omega
    ue = ring_wave(n, sign, omega, p, L)
    target = epsilon ** (1.0 / p)
    direction = math.copysign(1.0, ue.derivative_at_L)
    edge = direction * 0.5 * L / n
    f = lambda b: float(ue.evaluate(L + b)) - target
    if f(edge) <= 0:
        raise NoShift(f"epsilon^(1/p)={target:.4g} exceeds the ring wave maximum "
                      f"{float(ue.evaluate(L + edge)):.4g} for {n=}, {sign=}")
    return brentq(f, 0.0, edge, xtol=1e-15, rtol=1e-15), ue


def make_seed(branch, epsilon, p, grid, omega=None):
    """Initial guess for ``newton_solve`` with ``epsilon = sqrt(-omega)``.

    ``omega`` only needs to be given for vanishing-tail branches above
    omega = 0, where epsilon has no meaning.
    """
    if isinstance(branch, str):
        branch = Branch.parse(branch)
    omega = -epsilon ** 2 if omega is None else omega
    L = grid.L
    if branch.kind == "vanishing_tail":
        ue = ring_wave(branch.n, branch.sign, omega, p, L)
        return GraphFunction.from_segments(grid, ue.evaluate, np.zeros(grid.n_tail), branch)
    if not (epsilon > 0):
        raise DomainError(f"coupled branches need epsilon > 0, got {epsilon}")
    amp = epsilon ** (1.0 / p)

    def tail(x):
        return amp * soliton_phi0(epsilon * (x - L), p)

    if branch.kind == "primary":
        return GraphFunction.from_segments(grid, lambda x: np.full_like(x, amp), tail, branch)
    b, ue = higher_shift(branch.n, branch.sign, epsilon, p, L, omega)
    return GraphFunction.from_segments(grid, lambda x: ue.evaluate(x + b), tail, branch)


def solve_wave(branch, omega, p, grid, tol=1e-10, max_iter=50, ramp_from=0.1, ramp_step=0.05):
    """Seed and solve one wave.

    The constant-plus-soliton primary seed is only accurate for small
    epsilon; started at larger epsilon, Newton can land on a different
    positive state. Primary waves with epsilon > ``ramp_from`` are therefore
    continued from omega = -ramp_from**2 in steps of at most ``ramp_step``.
    Higher waves whose direct seed fails at small epsilon are continued from
    epsilon = ``HIGHER_ANCHOR_EPS`` instead.
    """
    if isinstance(branch, str):
        branch = Branch.parse(branch)
    _check_omega(branch, omega, grid.L)
    eps = math.sqrt(-omega) if omega < 0 else 0.0
    if branch.kind == "primary" and eps > ramp_from:
        start = -ramp_from ** 2
        steps = max(2, int(math.ceil(abs(omega - start) / ramp_step)) + 1)
        return continue_branch(branch, start, omega, steps, p, grid, tol=tol,
                               max_iter=max_iter)[-1]
    seed = make_seed(branch, eps, p, grid, omega=omega)
    try:
        return newton_solve(seed, omega, p, tol=tol, max_iter=max_iter, branch=branch)
    except NewtonDiverged:
        # on a truncated tail the small-epsilon higher seed can miss; the
        # branch itself continues to small epsilon from a moderate anchor
        if branch.kind != "higher" or eps >= HIGHER_ANCHOR_EPS:
            raise
    anchor = -HIGHER_ANCHOR_EPS ** 2
    steps = max(2, int(math.ceil(abs(omega - anchor) / ramp_step)) + 1)
    return continue_branch(branch, anchor, omega, steps, p, grid, tol=tol,
                           max_iter=max_iter)[-1]


def _check_omega(branch, omega, L):
    if branch.kind == "vanishing_tail":
        if not omega < omega_n(branch.n, L):
            raise DomainError(f"{branch} needs omega < {omega_n(branch.n, L):.6g}, got {omega}")
    elif not omega < 0:
        raise DomainError(f"{branch} needs omega < 0, got {omega}")


def continue_branch(branch, omega_start, omega_end, steps, p, grid, tol=1e-10,
                    max_iter=50, min_fraction=1.0 / 64):
    """Natural-parameter continuation from ``omega_start`` to ``omega_end``.

    Every sample is seeded by the previous solution. A failed step is halved
    until it drops below ``min_fraction`` of the nominal step, at which point
    the branch computed so far is attached to ContinuationStalled.
    """
    if isinstance(branch, str):
        branch = Branch.parse(branch)
    if steps < 2:
        raise DomainError(f"continuation needs steps >= 2, got {steps}")
    _check_omega(branch, omega_start, grid.L)
    _check_omega(branch, omega_end, grid.L)
    targets = [float(t) for t in np.linspace(omega_start, omega_end, steps)]
    nominal = abs(targets[1] - targets[0])
    try:
        waves = [solve_wave(branch, omega_start, p, grid, tol=tol, max_iter=max_iter)]
    except (NewtonDiverged, ContinuationStalled) as exc:
        raise ContinuationStalled(f"first sample failed at omega={omega_start}: {exc}", []) from exc
    current, latest = omega_start, waves[0]
    for target in targets[1:]:
        step = target - current
        while current != target:
            trial = target if abs(step) >= abs(target - current) else current + step
            try:
                latest = newton_solve(latest.profile, trial, p, tol=tol,
                                      max_iter=max_iter, branch=branch)
            except NewtonDiverged as exc:
                step *= 0.5
                if abs(step) < min_fraction * nominal:
                    raise ContinuationStalled(
                        f"step fell below {min_fraction:g} of nominal near omega={current}"
                        f" ({branch}): {exc}", waves) from exc
                continue
            current = trial
        waves.append(latest)
    return waves


# --- diagnostics -------------------------------------------------------------

def extract_shifts(wave, reference=None):
    """Soliton shift a and ring shift b of a coupled wave.

    ``b`` is None except on higher branches; see ``tail_shift`` and
    ``ring_shift`` for the two fits.
    """
    a = tail_shift(wave)
    b = ring_shift(wave, reference) if wave.branch.kind == "higher" else None
    return a, b


def tail_shift(wave):
    """Solve tanh(p a) = -v'(L) / (eps v(L)) for the soliton shift a.

    This is the log-derivative of eps^{1/p} phi0(eps (x - L) + a) at the
    junction, so it does not depend on the amplitude of v.

    Raises
    ------
    OutOfRange
        If v(L) exceeds the soliton maximum eps^{1/p} by more than
        max(1e-6, h^2) relative (the discretization error allowance), or the
        log-derivative leaves (-1, 1).
    """
    if wave.omega >= 0:
        raise OutOfRange(f"shifts need omega < 0, got {wave.omega}")
    phi, p = wave.profile, wave.p
    eps = math.sqrt(-wave.omega)
    amp = eps ** (1.0 / p)
    grid = phi.grid
    tail = phi.tail_full
    sgn = math.copysign(1.0, tail[0]) if tail[0] != 0 else 1.0
    ratio = sgn * tail[0] / amp
    if ratio > 1.0 + max(1e-6, grid.h ** 2):
        raise OutOfRange(f"v(L)/eps^(1/p) = {ratio:.8f} exceeds the soliton maximum")
    h = grid.h
    dv = (-3 * tail[0] + 4 * tail[1] - tail[2]) / (2 * h)
    slope = -dv / (eps * tail[0])
    if not abs(slope) < 1.0:
        raise OutOfRange(f"log-derivative {slope:.6g} outside (-1, 1)")
    return math.atanh(slope) / p


def ring_shift(wave, reference=None):
    """Shift b minimizing the discrete L^2 distance between u and u_e(. + b)."""
    return _fit_ring_shift(wave, reference)


def _fit_ring_shift(wave, reference=None):
    br, grid = wave.branch, wave.grid
    eps = math.sqrt(-wave.omega)
    try:
        b0, ue = higher_shift(br.n, br.sign, eps, wave.p, grid.L, wave.omega)
    except NoShift:
        b0, ue = 0.0, None
    if reference is not None:
        ue = reference
    elif ue is None:
        ue = ring_wave(br.n, br.sign, wave.omega, wave.p, grid.L)
    x = grid.ring_nodes
    u = wave.profile.ring_full
    half = 0.25 * grid.L / br.n

    def dist(b):
        return float(np.sum((u - ue.evaluate(x + b)) ** 2))

    res = minimize_scalar(dist, bounds=(b0 - half, b0 + half), method="bounded",
                          options={"xatol": 1e-13})
    if not res.success:
        raise NoShift(f"ring shift fit failed: {res.message}")
    return float(res.x)


def profile_rows(wave):
    """(x, value, segment) rows; the junction appears once in each segment."""
    grid = wave.grid
    ring = wave.profile.ring_full
    tail = wave.profile.tail_full
    rows = [(float(x), float(v), "ring") for x, v in zip(grid.ring_nodes, ring)]
    rows += [(float(x), float(v), "tail") for x, v in zip(grid.tail_nodes, tail)]
    return rows
