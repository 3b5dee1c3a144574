"""
Spectral stability of stationary waves:

    L_+ U = -lambda W,    L_- W = lambda U.

Eliminating W gives L_- L_+ U = -lambda^2 U, so each eigenvalue mu of the
product P = L_- L_+ yields the pair lambda = +-sqrt(-mu). The spectrum is
sorted into real pairs, complex quartets, discrete imaginary pairs, the
discretized continuum and the zero cluster.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NotImaginary, QRNoConvergence, SectorMismatch
from .graph import mass_weights, symmetrize
from .spectra import assemble_linearization, default_zero_tol, potential_factor

VERDICTS = ("spectrally_stable", "unstable_real", "unstable_complex", "mixed")


@dataclass
class StabilityReport:
    omega: float
    branch: object
    lambda_set: np.ndarray
    mu: np.ndarray
    classes: np.ndarray  # one tag per entry of lambda_set
    n_real_pairs: int
    n_quartets: int
    n_imag_pairs: int
    n_continuum: int
    n_zero: int
    verdict: str
    tol_re: float
    tol_im: float
    zero_tol: float
    meta: dict = field(default_factory=dict)

    @property
    def unstable(self):
        """Eigenvalues with Re lambda > tol_re outside the zero cluster."""
        m = np.isin(self.classes, ("real", "quartet")) & (self.lambda_set.real > 0)
        return self.lambda_set[m]

    @property
    def max_real_part(self):
        u = self.unstable
        return float(u.real.max()) if u.size else 0.0

    def summary(self):
        return {"omega": self.omega, "branch": str(self.branch),
                "n_real_pairs": self.n_real_pairs, "n_quartets": self.n_quartets,
                "n_imag_pairs": self.n_imag_pairs, "n_continuum": self.n_continuum,
                "n_zero": self.n_zero, "verdict": self.verdict,
                "max_real_part": self.max_real_part,
                "tolerances": {"tol_re": self.tol_re, "tol_im": self.tol_im,
                               "zero_tol": self.zero_tol}}


def _sym_operators(wave):
    w = mass_weights(wave.grid)
    Sm = symmetrize(assemble_linearization(wave, "minus"), w)
    Sp = symmetrize(assemble_linearization(wave, "plus"), w)
    return 0.5 * (Sm + Sm.T), 0.5 * (Sp + Sp.T), w


def lambdas_from_mu(mu):
    """Both roots +-sqrt(-mu), principal branch first."""
    # + 0j turns the -0 imaginary part of -(x + 0j) into +0, keeping sqrt principal
    lam = np.sqrt(-np.asarray(mu, dtype=complex) + 0j)
    return np.concatenate([lam, -lam])


def _clean_mu(mu):
    mu = np.asarray(mu, dtype=complex)
    tiny = 1e-12 * np.maximum(1.0, np.abs(mu))
    return np.where(np.abs(mu.imag) <= tiny, mu.real + 0j, mu)


def classify(lam, omega, tol_re, tol_im, zero_tol):
    """Class tag per eigenvalue: zero, real, quartet, imaginary or continuum."""
    lam = np.asarray(lam, dtype=complex)
    re, im = np.abs(lam.real), np.abs(lam.imag)
    tags = np.empty(lam.size, dtype=object)
    edge = -omega
    for i in range(lam.size):
        if abs(lam[i]) <= zero_tol:
            tags[i] = "zero"
        elif re[i] > tol_re and im[i] <= tol_im:
            tags[i] = "real"
        elif re[i] > tol_re:
            tags[i] = "quartet"
        elif im[i] >= edge - zero_tol:
            tags[i] = "continuum"
        else:
            tags[i] = "imaginary"
    return tags


def _verdict(n_real, n_quart):
    if n_real and n_quart:
        return "mixed"
    if n_real:
        return "unstable_real"
    if n_quart:
        return "unstable_complex"
    return "spectrally_stable"


def _report_from_mu(mu, omega, branch, tol_re, tol_im, zero_tol, meta=None):
    mu = _clean_mu(mu)
    lam = lambdas_from_mu(mu)
    tags = classify(lam, omega, tol_re, tol_im, zero_tol)
    count = lambda t: int(np.sum(tags == t))
    rep = StabilityReport(
        omega=omega, branch=branch, lambda_set=lam, mu=mu, classes=tags,
        n_real_pairs=count("real") // 2, n_quartets=count("quartet") // 4,
        n_imag_pairs=count("imaginary") // 2, n_continuum=count("continuum"),
        n_zero=count("zero"), verdict=_verdict(count("real"), count("quartet")),
        tol_re=tol_re, tol_im=tol_im, zero_tol=zero_tol, meta=meta or {})
    return rep


def _tolerances(h, tol_re, tol_im, zero_tol):
    d = default_zero_tol(h)
    return (d if tol_re is None else tol_re, d if tol_im is None else tol_im,
            d if zero_tol is None else zero_tol)


def stability_spectrum(wave, tol_re=None, tol_im=None, zero_tol=None, vectors=False):
    """Classified spectrum of the stability problem about ``wave``.

    Uses the symmetrized product S_- S_+ (similar to L_- L_+) and LAPACK's
    nonsymmetric eigensolver. Tolerances default to 10 h^2.

    Raises
    ------
    QRNoConvergence
        If the eigensolver fails to converge.
    """
    tol_re, tol_im, zero_tol = _tolerances(wave.grid.h, tol_re, tol_im, zero_tol)
    Sm, Sp, w = _sym_operators(wave)
    P = Sm @ Sp
    try:
        if vectors:
            mu, vecs = np.linalg.eig(P)
        else:
            mu, vecs = np.linalg.eigvals(P), None
    except np.linalg.LinAlgError as exc:
        raise QRNoConvergence(f"eigenvalue iteration failed at omega={wave.omega}: {exc}") from exc
    meta = {}
    if vectors:
        meta.update({"mu_vectors": vecs, "S_minus": Sm, "S_plus": Sp})
    return _report_from_mu(mu, wave.omega, wave.branch, tol_re, tol_im, zero_tol, meta)


def block_spectrum(wave):
    """Eigenvalues of the 2N block matrix [[0, L_-], [-L_+, 0]] assembled directly."""
    Lm = assemble_linearization(wave, "minus").toarray()
    Lp = assemble_linearization(wave, "plus").toarray()
    N = Lm.shape[0]
    B = np.zeros((2 * N, 2 * N))
    B[:N, N:] = Lm
    B[N:, :N] = -Lp
    return np.linalg.eigvals(B)


def match_spectra(a, b):
    """Optimal one-to-one pairing of two eigenvalue lists; returns |a_i - b_j|."""
    a, b = np.asarray(a), np.asarray(b)
    if a.size != b.size:
        raise SectorMismatch(f"spectra have different sizes {a.size} and {b.size}")
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return cost[r, c]


def quadruple_symmetry_defect(report):
    """Largest distance from each non-zero lambda to its -lambda, conj, -conj partners."""
    lam = report.lambda_set[report.classes != "zero"]
    if lam.size == 0:
        return 0.0
    worst = 0.0
    for image in (-lam, lam.conj(), -lam.conj()):
        d = np.abs(lam[:, None] - image[None, :]).min(axis=0)
        worst = max(worst, float(d.max()))
    return worst


# --- reduced sectors for vanishing-tail waves ---------------------------------

def _sector_operators(wave, parity):
    """L_-, L_+ and weights restricted to odd or even vectors about x = 0.

    Odd: half-ring (0, L) with Dirichlet ends, tail absent. Even: half-ring
    [0, L) with a Neumann row at x = 0, the junction and the clamped tail.
    """
    grid, p, omega = wave.grid, wave.p, wave.omega
    h = grid.h
    m = grid.n_ring // 2
    nr = grid.n_ring
    ring = wave.profile.ring_full  # nodes 0..nr, x = -L + j h
    inv = 1.0 / h ** 2
    if parity == "odd":
        idx = np.arange(m + 1, nr)  # x in (0, L)
        k = idx.size
        A = np.diag(np.full(k, 2 * inv)) + np.diag(np.full(k - 1, -inv), 1) + \
            np.diag(np.full(k - 1, -inv), -1)
        vals = ring[idx]
        weights = np.full(k, 2 * h)
    elif parity == "even":
        ridx = np.arange(m, nr)  # x in [0, L)
        k_ring = ridx.size
        n_tail = grid.n_tail - 1
        k = k_ring + 1 + n_tail
        J = k_ring
        A = np.zeros((k, k))
        A[0, 0], A[0, 1] = 2 * inv, -2 * inv
        for i in range(1, k_ring):
            A[i, i] = 2 * inv
            A[i, i - 1] = -inv
            A[i, i + 1] = -inv  # i = k_ring - 1 reaches the junction
        c = 2.0 / 3.0 * inv
        A[J, J], A[J, J - 1], A[J, J + 1] = 3 * c, -2 * c, -c
        for i in range(J + 1, k):
            A[i, i] = 2 * inv
            A[i, i - 1] = -inv
            if i < k - 1:
                A[i, i + 1] = -inv
        vals = np.concatenate([ring[ridx], [ring[-1]], wave.profile.tail])
        weights = np.concatenate([[h], np.full(k_ring - 1, 2 * h), [1.5 * h],
                                  np.full(n_tail, h)])
    else:
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    out = []
    for which in ("minus", "plus"):
        pot = potential_factor(p, which) * np.abs(vals) ** (2 * p)
        out.append(A + np.diag(-omega - pot))
    return out[0], out[1], weights


def sector_spectrum(wave, parity, tol_re=None, tol_im=None, zero_tol=None):
    tol_re, tol_im, zero_tol = _tolerances(wave.grid.h, tol_re, tol_im, zero_tol)
    Lm, Lp, w = _sector_operators(wave, parity)
    Sm, Sp = symmetrize(Lm, w), symmetrize(Lp, w)
    mu = np.linalg.eigvals(0.5 * (Sm + Sm.T) @ (0.5 * (Sp + Sp.T)))
    rep = _report_from_mu(mu, wave.omega, wave.branch, tol_re, tol_im, zero_tol)
    rep.meta["sector"] = parity
    return rep


def reduced_sector_spectra(wave, tol_re=None, tol_im=None, zero_tol=None, check=True,
                           match_tol=1e-6):
    """Odd and even sector stability spectra of a vanishing-tail wave.

    With ``check`` the union is paired against the full spectrum; the zero
    cluster is excluded from the element-wise comparison because its members
    split like the fourth root of rounding error, but its size must agree.

    Raises
    ------
    SectorMismatch
        If the union differs from the full spectrum by more than ``match_tol``.
    """
    if wave.branch.kind != "vanishing_tail" or np.any(wave.profile.tail != 0) \
            or wave.profile.junction != 0:
        raise SectorMismatch("sector reduction needs a vanishing-tail wave")
    odd = sector_spectrum(wave, "odd", tol_re, tol_im, zero_tol)
    even = sector_spectrum(wave, "even", tol_re, tol_im, zero_tol)
    if check:
        full = stability_spectrum(wave, tol_re, tol_im, zero_tol)
        defect = union_defect(full, odd, even)
        odd.meta["union_defect"] = even.meta["union_defect"] = defect
        if defect > match_tol:
            raise SectorMismatch(f"sector union differs from full spectrum by {defect:.3e}")
    return odd, even


def union_defect(full, odd, even):
    fz = full.lambda_set[full.classes != "zero"]
    uz = np.concatenate([odd.lambda_set[odd.classes != "zero"],
                         even.lambda_set[even.classes != "zero"]])
    if full.n_zero != odd.n_zero + even.n_zero:
        return math.inf
    return float(match_spectra(fz, uz).max(initial=0.0))


# --- Krein signature ---------------------------------------------------------

def krein_sign_estimate(lam, U, L_minus, L_plus, weights, tol=None, h=None):
    """Sign of <U, L_+ U> + <W, L_- W> for an imaginary eigenvalue.

    ``U`` is the P-eigenvector in the original (unsymmetrized) coordinates
    and W follows from L_+ U = -lambda W. Returns "+", "-" or "indeterminate"
    (normalized form below 10 h^2) with the normalized form itself.

    Raises
    ------
    NotImaginary
        If |Re lambda| exceeds ``tol``.
    """
    h = h if h is not None else 1.0
    tol = default_zero_tol(h) if tol is None else tol
    if abs(lam.real) > tol:
        raise NotImaginary(f"Re lambda = {lam.real:.3e} exceeds {tol:.3e}")
    if lam == 0:
        raise NotImaginary("lambda = 0 has no Krein signature")
    U = np.asarray(U, dtype=complex)
    LpU = L_plus @ U
    W = -LpU / lam
    ip = lambda f, g: np.sum(weights * f * np.conj(g))
    q = (ip(U, LpU) + ip(W, L_minus @ W)).real
    norm2 = (ip(U, U) + ip(W, W)).real
    if abs(q) < default_zero_tol(h) * norm2:
        return "indeterminate", float(q / norm2)
    return ("+" if q > 0 else "-"), float(q / norm2)


def krein_signs(wave, report=None):
    """Krein estimates for every discrete imaginary eigenvalue with Im > 0."""
    report = report or stability_spectrum(wave, vectors=True)
    if "mu_vectors" not in report.meta:
        report = stability_spectrum(wave, report.tol_re, report.tol_im, report.zero_tol,
                                    vectors=True)
    w = mass_weights(wave.grid)
    s = np.sqrt(w)
    Lm = assemble_linearization(wave, "minus")
    Lp = assemble_linearization(wave, "plus")
    vecs = report.meta["mu_vectors"]
    out = []
    for j, m in enumerate(_clean_mu(report.mu)):
        lam = complex(np.sqrt(-m + 0j))
        if lam.imag <= 0:
            continue
        tag = classify([lam], wave.omega, report.tol_re, report.tol_im, report.zero_tol)[0]
        if tag != "imaginary":
            continue
        U = vecs[:, j] / s
        sign, q = krein_sign_estimate(lam, U, Lm, Lp, w, tol=report.tol_re, h=wave.grid.h)
        out.append((lam, sign, q))
    return sorted(out, key=lambda t: t[0].imag)


# --- sweeps ------------------------------------------------------------------

@dataclass
class SweepResult:
    reports: list
    failures: list  # (omega, error message)
    transitions: list  # (omega_before, omega_after, field, before, after)
    omega_star: dict  # last omega with quartets / real pairs present


def sweep_stability(waves, tol_re=None, tol_im=None, zero_tol=None, failures=()):
    """Stability reports along a branch plus a transition log.

    ``waves`` must be ordered along the sweep. Count changes in quartets and
    real pairs between consecutive samples are logged; ``omega_star`` holds
    the last omega at which quartets (or real pairs) were still present, with
    the grid spacing as its resolution.
    """
    reports = [stability_spectrum(w, tol_re, tol_im, zero_tol) for w in waves]
    transitions = []
    for a, b in zip(reports[:-1], reports[1:]):
        for name in ("n_quartets", "n_real_pairs"):
            if getattr(a, name) != getattr(b, name):
                transitions.append((a.omega, b.omega, name, getattr(a, name), getattr(b, name)))
    omega_star = {}
    for name in ("n_quartets", "n_real_pairs"):
        present = [r.omega for r in reports if getattr(r, name) > 0]
        if present and reports and getattr(reports[-1], name) == 0:
            last = present[-1]
            i = [r.omega for r in reports].index(last)
            res = abs(reports[i + 1].omega - last) if i + 1 < len(reports) else None
            omega_star[name] = {"omega": last, "resolution": res}
    return SweepResult(reports, list(failures), transitions, omega_star)


def stability_rows(report):
    """CSV rows: omega, Re lambda, Im lambda, class tag (sorted for determinism)."""
    rows = [(report.omega, float(l.real), float(l.imag), str(t))
            for l, t in zip(report.lambda_set, report.classes)]
    return sorted(rows, key=lambda r: (r[3], r[1], r[2]))
