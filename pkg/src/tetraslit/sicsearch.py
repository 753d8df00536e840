"""Search for single-plane tetrahedron measurements and assemble the POVM.

A configuration is a detection plane ``zeta`` and four reduced coordinates
``w``; the Bloch vectors ``bloch_of_w(w, zeta)`` must satisfy
``s_i . s_j = 4/3 delta_ij - 1/3``.  The slit separation only enters when the
reduced coordinates are turned into detector positions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .wavefield import PAULI, _sech, bloch_of_w, intensity_envelope, w_of

logger = logging.getLogger(__name__)

_PAIRS = np.triu_indices(4, 1)
TETRA_GRAM = 4 / 3 * np.eye(4) - 1 / 3

#: Published configurations, one row per (zeta, w1..w4).
TABLE1 = np.array(
    [
        [3.4678, -1.0287, -0.268044, 0.268044, 1.0287],
        [6.08028, -0.943335, -0.367661, 0.367661, 0.943335],
        [7.70501, -1.89747, 0.0782496, 0.332645, 0.628523],
        [8.5243, -1.30348, -0.153589, 0.363175, 0.805324],
        [8.55362, -1.124, -0.111174, 0.111174, 1.124],
        [10.6561, -0.738203, -0.487839, 0.272693, 1.140046],
    ]
)

DEFAULT_DELTA_XI = 1e-3


@dataclass(frozen=True)
class TetraSolution:
    zeta: float
    w: tuple[float, float, float, float]
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        object.__setattr__(self, "zeta", float(self.zeta))
        object.__setattr__(self, "residual", float(self.residual))
        if len(self.w) != 4:
            raise ValueError("a tetrahedron needs exactly four w values")

    @property
    def bloch_vectors(self) -> np.ndarray:
        return bloch_of_w(np.array(self.w), self.zeta)

    @property
    def gram(self) -> np.ndarray:
        s = self.bloch_vectors
        return s @ s.T

    @property
    def gram_max_error(self) -> float:
        return float(np.max(np.abs(self.gram - TETRA_GRAM)))

    def is_symmetric(self, atol: float = 1e-6) -> bool:
        """True when the configuration is invariant under ``xi -> -xi``."""
        w = np.sort(self.w)
        return bool(np.allclose(w, -w[::-1], rtol=0, atol=atol))


@dataclass(frozen=True)
class DetectorLayout:
    zeta0: float
    xi: tuple[float, float, float, float]
    delta_xi: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        if self.delta_xi <= 0:
            raise ValueError("detector half-width must be positive")
        if self.delta <= 0:
            raise ValueError("slit half-separation must be positive")

    @property
    def windows(self) -> np.ndarray:
        xi = np.array(self.xi)
        return np.stack([xi - self.delta_xi, xi + self.delta_xi], axis=1)

    @property
    def w_spread(self) -> float:
        """Change of ``w`` across one detector window."""
        return float(2 * self.delta * 2 * self.delta_xi / (1 + self.zeta0**2))


@dataclass(frozen=True)
class Povm4:
    weights: np.ndarray
    vectors: np.ndarray
    closure_residual: float = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.weights, dtype=float).reshape(4)
        s = np.asarray(self.vectors, dtype=float).reshape(4, 3)
        if np.any(c <= 0):
            raise ValueError("POVM weights must be positive")
        if not np.allclose(np.linalg.norm(s, axis=1), 1, atol=1e-9):
            raise ValueError("POVM Bloch vectors must have unit length")
        c.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "weights", c)
        object.__setattr__(self, "vectors", s)
        total = self.effects.sum(axis=0)
        object.__setattr__(self, "closure_residual", float(np.linalg.norm(total - np.eye(2))))

    @classmethod
    def ideal(cls, vectors) -> "Povm4":
        return cls(np.full(4, 0.5), vectors)

    @property
    def effects(self) -> np.ndarray:
        """The four 2x2 effect operators ``c_i (I + s_i.sigma) / 2``."""
        proj = 0.5 * (np.eye(2) + np.einsum("nk,kij->nij", self.vectors, PAULI))
        return self.weights[:, None, None] * proj

    @property
    def elements(self) -> list[tuple[float, np.ndarray]]:
        return [(float(c), s) for c, s in zip(self.weights, self.vectors)]


# --- objective -----------------------------------------------------------


def _bloch_and_derivs(zeta, w):
    """Bloch vectors of shape (..., 4, 3) and their w and zeta derivatives."""
    zeta = np.asarray(zeta, dtype=float)[..., None]
    w = np.asarray(w, dtype=float)
    sech = _sech(w)
    tanh = np.tanh(w)
    c, s = np.cos(w * zeta), np.sin(w * zeta)
    vec = np.stack([sech * c, sech * s, -tanh], axis=-1)
    d_w = np.stack([-sech * (tanh * c + zeta * s), sech * (zeta * c - tanh * s), -(sech**2)], axis=-1)
    d_zeta = np.stack([-w * sech * s, w * sech * c, np.zeros_like(w * zeta)], axis=-1)
    return vec, d_w, d_zeta


def _residuals(zeta, w):
    """The six pair residuals ``s_i . s_j + 1/3`` and their (6, 5) Jacobian."""
    vec, d_w, d_zeta = _bloch_and_derivs(zeta, w)
    i, j = _PAIRS
    si, sj = vec[..., i, :], vec[..., j, :]
    res = np.sum(si * sj, axis=-1) + 1 / 3
    jac = np.zeros(res.shape + (5,))
    jac[..., 0] = np.sum(d_zeta[..., i, :] * sj + si * d_zeta[..., j, :], axis=-1)
    rows = np.arange(6)
    jac[..., rows, 1 + i] = np.sum(d_w[..., i, :] * sj, axis=-1)
    jac[..., rows, 1 + j] = np.sum(si * d_w[..., j, :], axis=-1)
    return res, jac


def tetra_objective(zeta, w) -> float:
    """Sum over the six pairs of ``(s_i . s_j + 1/3)**2``; zero only on a regular tetrahedron."""
    s = bloch_of_w(np.asarray(w, dtype=float), zeta)
    g = s @ s.T
    return float(np.sum((g[_PAIRS] + 1 / 3) ** 2))


def objective_gradient(zeta, w) -> np.ndarray:
    """Gradient of :func:`tetra_objective` with respect to ``(zeta, w1, ..., w4)``."""
    res, jac = _residuals(zeta, np.asarray(w, dtype=float))
    return 2 * res @ jac


# --- search --------------------------------------------------------------


def _batch_objective(x):
    res, jac = _residuals(x[:, 0], x[:, 1:])
    return np.sum(res**2, axis=1), 2 * np.einsum("nr,nrk->nk", res, jac), res, jac


def _descend(x, max_iter, tol, armijo=1e-4, grad_tol=1e-9):
    """Batched gradient descent with halving backtracking.

    Each row keeps its own step length; rows stop once ``f < tol`` or the
    gradient norm drops below ``grad_tol``.
    """
    x = x.copy()
    f, g, _, _ = _batch_objective(x)
    step = np.ones(len(x))
    active = (f >= tol) & (np.linalg.norm(g, axis=1) >= grad_tol)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa, fa, ga, ta = x[idx], f[idx], g[idx], step[idx] * 2
        gg = np.sum(ga**2, axis=1)
        pending = np.ones(len(idx), dtype=bool)
        trial = xa.copy()
        ftrial = fa.copy()
        for _ in range(60):
            if not pending.any():
                break
            p = np.flatnonzero(pending)
            cand = xa[p] - ta[p, None] * ga[p]
            fc, _, _, _ = _batch_objective(cand)
            ok = fc <= fa[p] - armijo * ta[p] * gg[p]
            trial[p[ok]] = cand[ok]
            ftrial[p[ok]] = fc[ok]
            pending[p[ok]] = False
            ta[p[~ok]] *= 0.5
        moved = ~pending
        x[idx[moved]] = trial[moved]
        step[idx] = ta
        _, g_new, _, _ = _batch_objective(x[idx])
        f[idx], g[idx] = ftrial, g_new
        stalled = idx[pending]
        active[stalled] = False
        active[idx] &= (f[idx] >= tol) & (np.linalg.norm(g[idx], axis=1) >= grad_tol)
    return x, f


def _polish(x, max_iter=100, tol=1e-30):
    """Batched Levenberg-Marquardt on the six pair residuals."""
    x = x.copy()
    lam = np.full(len(x), 1e-3)
    f, _, res, jac = _batch_objective(x)
    for _ in range(max_iter):
        active = (f > tol) & (lam < 1e12)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        J, r = jac[idx], res[idx]
        jtj = np.einsum("nri,nrj->nij", J, J)
        jtr = np.einsum("nri,nr->ni", J, r)
        diag = np.einsum("nii->ni", jtj)
        A = jtj + (lam[idx, None] * (diag + 1e-12))[..., None] * np.eye(5)
        dx = -np.linalg.solve(A, jtr[..., None])[..., 0]
        cand = x[idx] + dx
        fc, _, rc, jc = _batch_objective(cand)
        ok = fc < f[idx]
        good = idx[ok]
        x[good], f[good], res[good], jac[good] = cand[ok], fc[ok], rc[ok], jc[ok]
        lam[good] = np.maximum(lam[good] / 10, 1e-12)
        lam[idx[~ok]] *= 10
    return x, f


def refine(zeta: float, w, *, gd_iter: int = 0) -> TetraSolution:
    """Polish a rough configuration into an accurate one."""
    x = np.concatenate([[zeta], np.asarray(w, dtype=float)])[None, :]
    if gd_iter:
        x, _ = _descend(x, gd_iter, 0.0)
    x, f = _polish(x)
    return canonicalize(TetraSolution(x[0, 0], tuple(x[0, 1:]), f[0]))


def canonicalize(sol: TetraSolution) -> TetraSolution:
    """Sort ``w`` ascending and pick the lexicographically smaller of the two mirror images."""
    w = np.sort(np.array(sol.w))
    mirrored = np.sort(-w)
    for a, b in zip(mirrored, w):
        if a != b:
            if a < b:
                w = mirrored
            break
    return TetraSolution(sol.zeta, tuple(w), sol.residual)


def _same(a: TetraSolution, b: TetraSolution, atol: float) -> bool:
    return abs(a.zeta - b.zeta) <= atol and np.max(np.abs(np.subtract(a.w, b.w))) <= atol


def deduplicate(solutions, atol: float = 1e-4) -> list[TetraSolution]:
    """Merge solutions equal within ``atol`` after canonicalization, keeping the lowest residual."""
    kept: list[TetraSolution] = []
    for sol in sorted((canonicalize(s) for s in solutions), key=lambda s: (s.zeta, s.w)):
        for n, other in enumerate(kept):
            if _same(sol, other, atol):
                if sol.residual < other.residual:
                    kept[n] = sol
                break
        else:
            kept.append(sol)
    return sorted(kept, key=lambda s: (s.zeta, s.w))


def search_tetrahedra(
    zeta_range: tuple[float, float],
    n_starts: int,
    seed: int,
    tol: float = 1e-12,
    *,
    w_bound: float = 3.0,
    max_iter: int = 10_000,
    gd_iter: int = 30,
    batch: int = 4096,
    dedup_atol: float = 1e-4,
) -> list[TetraSolution]:
    """Multistart search for tetrahedron configurations with ``zeta`` in ``zeta_range``.

    Starts are drawn with ``zeta ~ U(zeta_range)`` and ``w_i ~ U(-w_bound, w_bound)``.
    Each start is first relaxed by ``gd_iter`` steps of backtracking gradient
    descent on the objective, then polished with Levenberg-Marquardt on the
    six pair residuals.  Converged points outside the half-open range
    ``(lo, hi]`` are dropped.

    Returns:
        Deduplicated solutions with ``residual < tol``, sorted by ``zeta``.
        An empty list when nothing converges in range.
    """
    lo, hi = map(float, zeta_range)
    if not (0 <= lo < hi):
        raise ValueError(f"invalid zeta range {zeta_range!r}")
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    starts = np.empty((n_starts, 5))
    starts[:, 0] = rng.uniform(lo, hi, n_starts)
    starts[:, 1:] = rng.uniform(-w_bound, w_bound, (n_starts, 4))

    found = []
    for b in range(0, n_starts, batch):
        x, _ = _descend(starts[b : b + batch], min(gd_iter, max_iter), tol)
        x, f = _polish(x, max_iter=min(200, max_iter))
        ok = (f < tol) & (x[:, 0] > lo) & (x[:, 0] <= hi) & np.all(np.isfinite(x), axis=1)
        ok &= np.min(np.diff(np.sort(x[:, 1:], axis=1), axis=1), axis=1) > 1e-6
        found.extend(TetraSolution(row[0], tuple(row[1:]), fv) for row, fv in zip(x[ok], f[ok]))
    out = deduplicate(found, dedup_atol)
    logger.info("search %s: %d starts -> %d converged -> %d distinct", zeta_range, n_starts, len(found), len(out))
    return out


def reference_solution() -> TetraSolution:
    """The smallest-``zeta`` configuration, polished to machine precision."""
    return refine(TABLE1[0, 0], TABLE1[0, 1:])


# --- balancing and POVM --------------------------------------------------


def balanced_delta(zeta: float, w1: float, w2: float) -> float:
    """Slit half-separation that equalises the envelope at ``+-w1`` and ``+-w2``.

    Requires ``w1 < w2 < 0``.
    """
    if w1 == w2:
        raise ValueError("w1 == w2 leaves the slit separation undetermined")
    if not (w1 < w2 < 0):
        raise ValueError(f"need w1 < w2 < 0, got w1={w1}, w2={w2}")
    lc = np.logaddexp(w1, -w1) - np.logaddexp(w2, -w2)
    return float(0.5 * np.sqrt((1 + zeta**2) * (w1**2 - w2**2) / lc))


def balanced_delta_for(sol: TetraSolution) -> float | None:
    """Balancing separation for a mirror-symmetric solution, ``None`` otherwise."""
    if not sol.is_symmetric():
        return None
    w = np.sort(sol.w)
    return balanced_delta(sol.zeta, w[0], w[1])


def detector_positions(sol: TetraSolution, delta: float) -> np.ndarray:
    if delta <= 0:
        raise ValueError("delta must be positive")
    return np.asarray(sol.w) * (1 + sol.zeta**2) / (2 * delta)


def layout_for(sol: TetraSolution, delta: float, delta_xi: float = DEFAULT_DELTA_XI) -> DetectorLayout:
    return DetectorLayout(sol.zeta, tuple(detector_positions(sol, delta)), delta_xi, delta)


def build_povm(sol: TetraSolution, delta: float, delta_xi: float = DEFAULT_DELTA_XI) -> Povm4:
    """Four-outcome POVM realised by point detectors of half-width ``delta_xi``.

    Weights are ``I(xi_i) dxi / Sigma`` with ``Sigma = sum_i I(xi_i) dxi / 2``,
    so they always sum to 2 and all equal 1/2 when the layout is balanced.
    """
    layout = layout_for(sol, delta, delta_xi)
    if layout.w_spread >= 1e-2:
        raise ValueError(f"detector window spans dw = {layout.w_spread:.3g}; point-detector model needs < 1e-2")
    xi = np.array(layout.xi)
    acc = intensity_envelope(xi, sol.zeta, delta) * delta_xi
    weights = acc / (acc.sum() / 2)
    return Povm4(weights, bloch_of_w(w_of(xi, sol.zeta, delta), sol.zeta))


def closure_vs_delta(sol: TetraSolution, deltas, delta_xi: float = DEFAULT_DELTA_XI) -> np.ndarray:
    """Closure residual of :func:`build_povm` over a range of slit separations."""
    return np.array([build_povm(sol, d, delta_xi).closure_residual for d in np.atleast_1d(deltas)])


def envelope_spread(sol: TetraSolution, delta: float) -> float:
    """Relative spread ``(max - min) / mean`` of the envelope over the four detectors."""
    vals = intensity_envelope(detector_positions(sol, delta), sol.zeta, delta)
    return float((vals.max() - vals.min()) / vals.mean())


def solution_record(sol: TetraSolution) -> dict:
    """JSON-ready description of a solution."""
    rec = {
        "zeta": sol.zeta,
        "w": list(sol.w),
        "residual": sol.residual,
        "gram_max_error": sol.gram_max_error,
    }
    delta = balanced_delta_for(sol)
    if delta is not None:
        rec["delta_balanced"] = delta
        rec["xi"] = detector_positions(sol, delta).tolist()
    return rec


def solution_from_record(rec: dict) -> TetraSolution:
    return TetraSolution(rec["zeta"], tuple(rec["w"]), rec.get("residual", 0.0))
