"""
Complete elliptic integral K(k), Jacobi cn(xi; k) and the half-line soliton.

Everything here is written against the modulus ``k`` (not the parameter m = k^2).
"""

import math

import numpy as np

from .errors import DomainError

_AGM_RTOL = 1e-14
_LANDEN_CTOL = 1e-15
_MAX_AGM = 40


def _check_modulus(k):
    if not (0.0 <= k < 1.0):
        raise DomainError(f"elliptic modulus must lie in [0, 1), got {k}")


def agm(a, b):
    """Arithmetic-geometric mean and the number of iterations used."""
    it = 0
    while abs(a - b) > _AGM_RTOL * a and it < _MAX_AGM:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        it += 1
    return 0.5 * (a + b), it


def complete_K(k):
    """K(k) = pi / (2 AGM(1, sqrt(1 - k^2)))."""
    _check_modulus(k)
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    m, _ = agm(1.0, kp)
    return math.pi / (2.0 * m)


def _landen_table(k):
    # descending AGM sequence (a_n, c_n) with a_0 = 1, b_0 = k', c_0 = k
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    table = [(a, c)]
    while abs(c) > _LANDEN_CTOL and len(table) < _MAX_AGM:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        table.append((a, c))
    return table


def jacobi_sncndn(xi, k):
    """sn, cn, dn by the descending AGM / Landen recursion.

    The phase is built at the deepest level as ``2^N a_N xi`` and brought back
    with ``phi_{n-1} = (phi_n + asin(c_n/a_n sin phi_n))/2``; dn follows from
    ``dn^2 = k'^2 + k^2 cn^2``.
    """
    _check_modulus(k)
    xi = np.asarray(xi, dtype=float)
    table = _landen_table(k)
    N = len(table) - 1
    phi = (2.0 ** N) * table[N][0] * xi
    for n in range(N, 0, -1):
        a_n, c_n = table[n]
        phi = 0.5 * (phi + np.arcsin(c_n / a_n * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # dn^2 = k'^2 + k^2 cn^2 is a sum of squares, so no cancellation near cn = 0
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    dn = np.hypot(kp, k * cn)
    return sn, cn, dn


def jacobi_cn(xi, k):
    """Jacobi elliptic cosine cn(xi; k), 4K(k)-periodic, cn(0; k) = 1."""
    return jacobi_sncndn(xi, k)[1]


def _check_power(p):
    if not (p > 0):
        raise DomainError(f"nonlinearity power must be positive, got {p}")


def soliton_phi0(z, p):
    """phi0(z) = sech(p z)^(1/p): the even decaying solution with phi0(0) = 1."""
    _check_power(p)
    z = np.asarray(z, dtype=float)
    # 1/cosh via exp keeps large z underflowing gracefully
    e = np.exp(-p * np.abs(z))
    sech = 2.0 * e / (1.0 + e * e)
    return sech ** (1.0 / p)


def soliton_dphi0(z, p):
    """Derivative phi0'(z) = -tanh(p z) phi0(z)."""
    return -np.tanh(p * np.asarray(z, dtype=float)) * soliton_phi0(z, p)


def soliton_norm2(a, p, upper=np.inf):
    """int_a^upper phi0(z)^2 dz."""
    from scipy.integrate import quad

    val, _ = quad(lambda z: float(soliton_phi0(z, p)) ** 2, a, upper, limit=200)
    return val
