"""Photon-counting simulation and qubit state reconstruction for a four-detector layout."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .sicsearch import DetectorLayout, Povm4
from .wavefield import BlochState, default_grid, detection_pdf, matrix_to_bloch

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 20


@dataclass(frozen=True)
class CountRecord:
    n: tuple[int, int, int, int]
    n_discarded: int
    n_total: int

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        if len(n) != 4 or min(n) < 0 or self.n_discarded < 0:
            raise ValueError("counts must be four non-negative integers")
        if sum(n) + self.n_discarded != self.n_total:
            raise ValueError("accepted plus discarded counts must equal the total")
        object.__setattr__(self, "n", n)

    @property
    def accepted(self) -> int:
        return sum(self.n)

    @property
    def acceptance(self) -> float:
        return self.accepted / self.n_total if self.n_total else 0.0

    @property
    def frequencies(self) -> np.ndarray:
        if self.accepted == 0:
            raise ValueError("no accepted photons")
        return np.array(self.n, dtype=float) / self.accepted

    def to_dict(self) -> dict:
        return {"n": list(self.n), "n_discarded": self.n_discarded, "n_total": self.n_total}

    @classmethod
    def from_dict(cls, d: dict) -> "CountRecord":
        return cls(tuple(d["n"]), int(d["n_discarded"]), int(d["n_total"]))


@dataclass(frozen=True)
class ReconstructionReport:
    r_hat: tuple[float, float, float]
    method: str
    projected: bool
    fidelity: float | None = None
    trace_distance: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r_hat"] = list(self.r_hat)
        return d


def _bloch(rho) -> np.ndarray:
    return rho.r if isinstance(rho, BlochState) else BlochState(rho).r


def random_bloch(rng: np.random.Generator, n: int, pure: bool = False) -> np.ndarray:
    """``n`` Bloch vectors uniform on the sphere (``pure``) or in the ball."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if not pure:
        v *= rng.uniform(size=(n, 1)) ** (1 / 3)
    return v


def ideal_probabilities(rho, povm: Povm4) -> np.ndarray:
    """Outcome probabilities ``c_i (1 + s_i . r) / 2``."""
    r = _bloch(rho)
    return povm.weights * 0.5 * (1 + povm.vectors @ r)


# --- simulation ------------------------------------------------------------


def _cdf_table(rho, layout: DetectorLayout, spacing: float):
    grid = default_grid(layout.zeta0, layout.delta, spacing)
    pdf = detection_pdf(rho, grid, layout.zeta0, layout.delta)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * spacing)])
    return grid, cdf / cdf[-1]


def sample_positions(rho, layout: DetectorLayout, n: int, seed: int, *, spacing: float = 0.005) -> np.ndarray:
    """Draw ``n`` detection positions on the layout's plane by inverse-CDF lookup.

    The cumulative distribution is tabulated on the default grid and
    interpolated linearly.  Draws are generated in fixed blocks of
    ``BLOCK_SIZE`` with block ``i`` seeded by ``(seed, i)``, so a given
    ``(seed, n)`` always yields the same sequence.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    grid, cdf = _cdf_table(rho, layout, spacing)
    out = np.empty(n)
    for i, start in enumerate(range(0, n, BLOCK_SIZE)):
        m = min(BLOCK_SIZE, n - start)
        u = np.random.default_rng([seed, i]).uniform(size=m)
        out[start : start + m] = np.interp(u, cdf, grid)
    return out


def _check_windows(layout: DetectorLayout) -> np.ndarray:
    win = layout.windows
    order = np.argsort(win[:, 0])
    if np.any(win[order][1:, 0] < win[order][:-1, 1]):
        raise ValueError("detector windows overlap")
    return win


def bin_counts(positions, layout: DetectorLayout) -> CountRecord:
    """Tally positions falling in each closed detector window; the rest are discarded."""
    win = _check_windows(layout)
    pos = np.sort(np.asarray(positions, dtype=float).ravel())
    lo = np.searchsorted(pos, win[:, 0], side="left")
    hi = np.searchsorted(pos, win[:, 1], side="right")
    n = tuple(int(v) for v in hi - lo)
    return CountRecord(n, pos.size - sum(n), pos.size)


def window_probabilities(rho, layout: DetectorLayout, order: int = 16) -> np.ndarray:
    """Probability that a photon lands in each detector window (Gauss-Legendre)."""
    win = _check_windows(layout)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (win[:, 1] - win[:, 0])
    mid = 0.5 * (win[:, 1] + win[:, 0])
    x = mid[:, None] + half[:, None] * nodes[None, :]
    return half * (detection_pdf(rho, x, layout.zeta0, layout.delta) @ weights)


def sample_counts(rho, layout: DetectorLayout, n_total: int, seed: int) -> CountRecord:
    """Counts for ``n_total`` photons, drawn directly from the window multinomial.

    Same distribution as ``bin_counts(sample_positions(...))`` without
    generating every discarded position.
    """
    q = window_probabilities(rho, layout)
    p = np.append(q, max(0.0, 1 - q.sum()))
    draw = np.random.default_rng(seed).multinomial(n_total, p / p.sum())
    return CountRecord(tuple(draw[:4]), int(draw[4]), int(n_total))


def sample_accepted_counts(rho, layout: DetectorLayout, n_accepted: int, seed: int) -> CountRecord:
    """Counts from running the source until ``n_accepted`` photons hit a detector."""
    q = window_probabilities(rho, layout)
    rng = np.random.default_rng(seed)
    n = rng.multinomial(n_accepted, q / q.sum())
    discarded = int(rng.negative_binomial(n_accepted, q.sum())) if n_accepted else 0
    return CountRecord(tuple(n), discarded, n_accepted + discarded)


# --- reconstruction --------------------------------------------------------


class RankDeficientError(ValueError):
    """The four measurement directions do not span three dimensions."""

    def __init__(self, null_directions: np.ndarray):
        self.null_directions = null_directions
        super().__init__(f"measurement is not informationally complete; blind directions {null_directions.tolist()}")


def linear_invert(p_hat, povm: Povm4) -> np.ndarray:
    """Least-squares Bloch vector from outcome frequencies.

    The frequencies are taken relative to the accepted photons, so the model
    is ``f_i = p_i / sum_j p_j`` with ``p_i = c_i (1 + s_i . r) / 2``.
    Multiplying out gives the linear system

        (f_i sum_j c_j s_j - c_i s_i) . r = c_i - f_i sum_j c_j,

    which is exact on exact data for any weights and reduces to
    ``s_i . r = 4 f_i - 1`` for a balanced tetrahedron.  The result may lie
    outside the unit ball; see :func:`project_physical`.

    Raises:
        RankDeficientError: the measurement directions are coplanar.
    """
    f = np.asarray(p_hat, dtype=float)
    f = f / f.sum()
    c, s = povm.weights, povm.vectors
    A = np.outer(f, c @ s) - c[:, None] * s
    b = c - f * c.sum()
    u, sv, vt = np.linalg.svd(A)
    rank_tol = 1e-10 * sv[0]
    if sv[-1] < rank_tol:
        raise RankDeficientError(vt[sv < rank_tol])
    return vt.T @ ((u[:, :3].T @ b) / sv)


def frame_invert(p_hat, vectors) -> np.ndarray:
    """Ideal-tetrahedron frame formula ``r = 3 sum_i p_i s_i``."""
    p = np.asarray(p_hat, dtype=float)
    return 3 * (p / p.sum()) @ np.asarray(vectors, dtype=float)


def artificially_balanced(counts: CountRecord, povm: Povm4) -> np.ndarray:
    """Frequencies after dividing each count by its detector weight."""
    scaled = np.array(counts.n, dtype=float) / povm.weights
    return scaled / scaled.sum()


def project_physical(r_hat) -> tuple[np.ndarray, bool]:
    """Rescale onto the Bloch ball; returns the vector and whether it changed."""
    r = np.asarray(r_hat, dtype=float)
    norm = np.linalg.norm(r)
    if norm <= 1:
        return r.copy(), False
    return r / norm, True


def log_likelihood(r, counts, povm: Povm4) -> float:
    """Log-likelihood of the accepted counts, conditioned on acceptance."""
    n = np.asarray(counts.n if isinstance(counts, CountRecord) else counts, dtype=float)
    p = povm.weights * (1 + povm.vectors @ np.asarray(r, dtype=float))
    p = p / p.sum()
    mask = n > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(n[mask] @ np.log(p[mask]))


def _inv_sqrt(m):
    vals, vecs = np.linalg.eigh(m)
    return (vecs / np.sqrt(vals)) @ vecs.conj().T


def mle_reconstruct(
    counts,
    povm: Povm4,
    max_iters: int = 5000,
    tol: float = 1e-12,
    *,
    return_history: bool = False,
):
    """Maximum-likelihood Bloch vector by the R-rho-R fixed-point iteration.

    The effects are first whitened by ``G^{-1/2}`` with ``G = sum_i E_i``,
    which leaves a balanced POVM untouched and makes the iteration maximise
    the acceptance-conditioned likelihood otherwise.  A step that would lower
    the likelihood is replaced by a diluted update ``(I + eps R) rho (I + eps R)``
    with ``eps`` halved until the likelihood does not decrease.

    Args:
        counts: a :class:`CountRecord` or four counts.
        povm: the measurement.
        max_iters: iteration cap.
        tol: stop once the gain in total log-likelihood falls below this.
        return_history: also return the log-likelihood after every iteration.
    """
    n = np.asarray(counts.n if isinstance(counts, CountRecord) else counts, dtype=float)
    if n.sum() < 1:
        raise ValueError("no accepted photons")
    f = n / n.sum()
    G = povm.effects.sum(axis=0)
    g_inv = _inv_sqrt(G)
    eff = g_inv @ povm.effects @ g_inv
    mask = f > 0

    def loglik(sigma):
        p = np.real(np.einsum("nij,ji->n", eff, sigma))
        if np.any(p[mask] <= 0):
            return -np.inf
        return float(n[mask] @ np.log(p[mask]))

    def r_op(sigma):
        p = np.real(np.einsum("nij,ji->n", eff, sigma))
        ratio = np.where(mask, f / np.where(p > 0, p, 1.0), 0.0)
        return np.einsum("n,nij->ij", ratio, eff)

    # maximally mixed in the original frame
    sigma = _sqrtm(G) @ (0.5 * np.eye(2)) @ _sqrtm(G)
    sigma /= np.trace(sigma).real
    ll = loglik(sigma)
    history = [ll]
    eye = np.eye(2)
    for _ in range(max_iters):
        R = r_op(sigma)
        eps = None
        new = R @ sigma @ R
        new /= np.trace(new).real
        new_ll = loglik(new)
        while new_ll < ll:
            eps = 1.0 if eps is None else eps / 2
            if eps < 1e-12:
                new, new_ll = sigma, ll
                break
            M = eye + eps * R
            new = M @ sigma @ M
            new /= np.trace(new).real
            new_ll = loglik(new)
        gain = new_ll - ll
        sigma, ll = 0.5 * (new + new.conj().T), new_ll
        history.append(ll)
        if gain < tol:
            break
    rho = g_inv @ sigma @ g_inv
    rho /= np.trace(rho).real
    r = matrix_to_bloch(rho)
    r = r / max(1.0, float(np.linalg.norm(r)))
    if return_history:
        return r, np.array(history)
    return r


def _sqrtm(m):
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


# --- figures of merit ------------------------------------------------------


def fidelity(a, b) -> float:
    """Uhlmann fidelity of two qubit states given as Bloch vectors."""
    ra, rb = _bloch(a), _bloch(b)
    mix = max(0.0, 1 - ra @ ra) * max(0.0, 1 - rb @ rb)
    return float(np.clip(0.5 * (1 + ra @ rb + np.sqrt(mix)), 0.0, 1.0))


def trace_distance(a, b) -> float:
    return float(0.5 * np.linalg.norm(_bloch(a) - _bloch(b)))


def reconstruct(counts: CountRecord, povm: Povm4, method: str = "mle", truth=None, *, balance: bool = False):
    """Estimate the state from counts and package the result as a report.

    ``method`` is ``"linear"`` or ``"mle"``.  With ``balance=True`` the
    linear estimate uses the artificially balanced frequencies and the ideal
    tetrahedron frame instead of the weighted least-squares system.
    """
    if counts.accepted == 0:
        raise ValueError("no accepted photons")
    if method == "linear":
        if balance:
            raw = frame_invert(artificially_balanced(counts, povm), povm.vectors)
        else:
            raw = linear_invert(counts.frequencies, povm)
        r, projected = project_physical(raw)
        name = "linear-inversion"
    elif method == "mle":
        r, projected, name = mle_reconstruct(counts, povm), False, "mle"
    else:
        raise ValueError(f"unknown method {method!r}")
    fid = dist = None
    if truth is not None:
        fid, dist = fidelity(r, truth), trace_distance(r, truth)
    return ReconstructionReport(tuple(float(v) for v in r), name, bool(projected), fid, dist)

