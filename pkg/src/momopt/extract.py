"""Recover an atomic measure ``sum_i w_i e_{xi_i}`` from truncated moments.

The support is read off multiplication operators. ``H`` is the Hankel block
with rows of degree ``<= a`` and columns of degree ``<= b + 1``; with ``B`` a
set of ``r`` columns of degree ``<= b`` spanning its column space,
``M_i = H[:, B]^+ H[:, x_i B]`` is similar to ``diag(xi_1[i], ..., xi_r[i])``.
Only moments up to degree ``a + b + 1`` enter, so a pseudo-moment sequence
whose top degree is not atomic can still be decomposed from its lower part.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import MomoptError
from .moments import MomentVector, basis, basis_index, default_rank_tol, hankel_matrix
from .polyring import add_monomials

COMPLEX_TOL = 1e-6
EIGEN_SEPARATION = 1e-8


@dataclass(frozen=True)
class ExtractedMeasure:
    points: np.ndarray       # (r, n)
    weights: np.ndarray      # (r,)
    residual: float
    degree_used: int
    rank: int
    singular_values: tuple = field(default=(), compare=False)
    moment_degree: int | None = None  # degree up to which the moments were matched

    def __len__(self):
        return len(self.weights)

    def to_list(self) -> list[dict]:
        return [{"point": [float(v) for v in p], "weight": float(w)}
                for p, w in zip(self.points, self.weights)]


class ExtractionFailure(MomoptError):
    """Raised when no atomic measure reproduces the moments within tolerance.

    ``reason`` is one of ``"NoFlatness"``, ``"ComplexPoints"`` or
    ``"ResidualTooLarge"``.
    """

    def __init__(self, reason: str, diagnostics: dict):
        self.reason = reason
        self.diagnostics = diagnostics
        res = diagnostics.get("residual")
        extra = f" (residual {res:.3e})" if res is not None else ""
        super().__init__(f"extraction failed: {reason}{extra}")


def _vandermonde(points: np.ndarray, monomials) -> np.ndarray:
    exps = np.array(monomials, dtype=int)
    return np.prod(points[None, :, :] ** exps[:, None, :], axis=2)


def verify_measure(sigma: MomentVector, measure: ExtractedMeasure, degree: int | None = None) -> float:
    """``max_{|a| <= degree} |sigma_a - sum_i w_i xi_i^a|``.

    ``degree`` defaults to the degree the measure was fitted on.
    """
    if degree is None:
        degree = measure.moment_degree or 2 * measure.degree_used
    degree = min(degree, sigma.max_degree)
    mons = basis(sigma.n, degree)
    pts = np.asarray(measure.points, dtype=float).reshape(-1, sigma.n)
    w = np.asarray(measure.weights, dtype=float)
    recon = _vandermonde(pts, mons) @ w if len(w) else np.zeros(len(mons))
    return float(np.max(np.abs(sigma.values[:len(mons)] - recon)))


def _hankel_block(sigma: MomentVector, a: int, b: int) -> np.ndarray:
    """Rectangular Hankel block: rows of degree <= a, columns of degree <= b."""
    rows, cols = basis(sigma.n, a), basis(sigma.n, b)
    idx = sigma.index
    vals = sigma.values
    return np.array([[vals[idx[add_monomials(r, c)]] for c in cols] for r in rows])


def _rank(M: np.ndarray, rank_tol) -> tuple[int, np.ndarray]:
    s = np.linalg.svd(M, compute_uv=False)
    tol = default_rank_tol(M.shape) if rank_tol is None else rank_tol
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def _joint_eigen(mult: list[np.ndarray], rng, attempts: int = 5):
    n = len(mult)
    best = None
    for _ in range(attempts):
        lam = rng.random(n)
        lam /= lam.sum()
        Ml = sum(l * M for l, M in zip(lam, mult))
        vals, P = np.linalg.eig(Ml)
        if len(vals) > 1:
            gaps = np.abs(vals[:, None] - vals[None, :])
            sep = np.min(gaps[~np.eye(len(vals), dtype=bool)])
        else:
            sep = np.inf
        if best is None or sep > best[0]:
            best = (sep, P)
        if sep >= EIGEN_SEPARATION:
            break
    P = best[1]
    Pinv = np.linalg.inv(P)
    coords = np.array([np.diag(Pinv @ M @ P) for M in mult]).T  # (r, n)
    return coords


def _block_shape(s: int) -> tuple[int, int]:
    """Row degree ``a`` and basis degree ``b`` using moments up to degree ``s``."""
    a = s // 2
    return a, s - a - 1


def _extract_block(sigma: MomentVector, s: int, r: int, residual_tol: float, rng):
    n = sigma.n
    a, b = _block_shape(s)
    H = _hankel_block(sigma, a, b + 1)
    cols = basis(n, b + 1)
    nb = len(basis(n, b))
    if nb < r:
        raise ExtractionFailure("NoFlatness", {"reason": "too few low-degree monomials"})
    U, sv, Vt = np.linalg.svd(H, full_matrices=False)
    Hr = (U[:, :r] * sv[:r]) @ Vt[:r]  # rank-r denoised block
    _, _, piv = linalg.qr(Vt[:r, :nb], pivoting=True, mode="economic")
    B = list(piv[:r])
    idx = basis_index(n, b + 1)
    HB = Hr[:, B]
    mult = []
    for i in range(n):
        e = tuple(1 if j == i else 0 for j in range(n))
        shifted = [idx[add_monomials(cols[j], e)] for j in B]
        mult.append(np.linalg.lstsq(HB, Hr[:, shifted], rcond=None)[0])
    coords = _joint_eigen(mult, rng)
    imag = np.abs(coords.imag)
    real = coords.real
    keep = np.all(imag <= COMPLEX_TOL * (1.0 + np.abs(real)), axis=1)
    if not np.any(keep):
        raise ExtractionFailure("ComplexPoints", {"max_imag": float(imag.max())})
    pts = real[keep]

    # weights from low-degree moments, then pruned and refit
    deg = min(2, s)
    while len(basis(n, deg)) <= len(pts) and deg < s:
        deg += 1
    mons = basis(n, deg)
    target = sigma.values[:len(mons)]
    w = np.linalg.lstsq(_vandermonde(pts, mons), target, rcond=None)[0]
    while np.any(w <= residual_tol):
        good = w > residual_tol
        if not np.any(good):
            raise ExtractionFailure("ResidualTooLarge", {"residual": float("inf"),
                                                          "reason": "no positive weights"})
        pts = pts[good]
        w = np.linalg.lstsq(_vandermonde(pts, mons), target, rcond=None)[0]
    m = ExtractedMeasure(pts, w, 0.0, a, len(w), tuple(sv), s)
    return replace(m, residual=verify_measure(sigma, m, s))


def flat_candidates(sigma: MomentVector, rank_tol: float | None = None) -> list[tuple[int, int]]:
    """``(s, r)`` pairs, largest ``s`` first, where the block with rows of
    degree ``<= a`` has the same rank ``r`` on columns of degree ``<= b`` and
    ``<= b + 1`` (``a + b + 1 = s``)."""
    out = []
    for s in range(sigma.max_degree, 1, -1):
        a, b = _block_shape(s)
        H = _hankel_block(sigma, a, b + 1)
        nb = len(basis(sigma.n, b))
        r, _ = _rank(H[:, :nb], rank_tol)
        r1, _ = _rank(H, rank_tol)
        if r == r1 and r > 0:
            out.append((s, r))
    return out


def extract_measure(sigma: MomentVector, rank_tol: float | None = None,
                    residual_tol: float = 1e-6, seed: int = 42) -> ExtractedMeasure:
    """Atomic measure matching ``sigma`` up to the largest usable degree.

    Candidate degrees come from :func:`flat_candidates`; if none is flat the
    top degree is tried with the rank of its low-degree columns. Success
    requires the recomputed moment residual to be ``<= residual_tol``.
    """
    if sigma.max_degree < 2:
        raise ValueError("need moments of degree at least 2")
    k = sigma.max_degree // 2
    ranks = [_rank(hankel_matrix(sigma, t).matrix, rank_tol)[0] for t in range(k + 1)]
    candidates = flat_candidates(sigma, rank_tol)
    flat = bool(candidates)
    if not flat:
        s = sigma.max_degree
        a, b = _block_shape(s)
        nb = len(basis(sigma.n, b))
        candidates = [(s, _rank(_hankel_block(sigma, a, b + 1)[:, :nb], rank_tol)[0])]
    diagnostics = {"ranks": ranks, "flat_degrees": [c[0] for c in candidates] if flat else []}
    best = None
    reason = "NoFlatness" if not flat else "ResidualTooLarge"
    for s, r in candidates:
        if r == 0:
            continue
        rng = np.random.default_rng(seed)
        try:
            m = _extract_block(sigma, s, r, residual_tol, rng)
        except ExtractionFailure as exc:
            if best is None:
                reason = exc.reason
            continue
        if best is None or m.residual < best.residual:
            best = m
        if m.residual <= residual_tol:
            return m
    if best is not None:
        diagnostics["residual"] = best.residual
        diagnostics["best"] = best
        reason = "ResidualTooLarge" if flat else reason
    raise ExtractionFailure(reason, diagnostics)
