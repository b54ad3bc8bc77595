"""Sample generalized autocovariance (SGCV) matrices and their eigen-analysis.

    C(h) = (S/T)^(2d) * sum_{t=h+1}^{T} x_t x_{t-h}'

For h > 0, C(h) is not symmetric.  ``mode="symmetrize"`` (the default) takes
eigenvalues of (C + C')/2, which are real with orthonormal eigenvectors.
``mode="general"`` takes the moduli of the possibly complex eigenvalues of
C(h) itself.  The two can differ; both are ordered by magnitude.
"""
import csv
import io
from dataclasses import dataclass

import numpy as np

from ._io import fmt
from .exceptions import LagTooLarge, SymmetryError
from .panel import as_matrix

SYMMETRIZE = "symmetrize"
GENERAL = "general"
MODES = (SYMMETRIZE, GENERAL)


@dataclass(frozen=True, eq=False)
class SgcvMatrix:
    h: int
    d: int
    S: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class EigenSequence:
    lags: np.ndarray
    magnitudes: np.ndarray  # (len(lags), k), descending along axis 1
    k: int
    mode: str = SYMMETRIZE

    def at(self, h):
        return self.magnitudes[int(np.flatnonzero(self.lags == h)[0])]

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "rank", "magnitude"])
        for h, row in zip(self.lags, self.magnitudes):
            for rank, m in enumerate(row, start=1):
                w.writerow([int(h), rank, fmt(m)])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text, mode=SYMMETRIZE):
        rows = list(csv.DictReader(io.StringIO(text)))
        lags = sorted({int(r["h"]) for r in rows})
        k = max(int(r["rank"]) for r in rows)
        mags = np.zeros((len(lags), k))
        pos = {h: i for i, h in enumerate(lags)}
        for r in rows:
            mags[pos[int(r["h"])], int(r["rank"]) - 1] = float(r["magnitude"])
        return cls(np.array(lags), mags, k, mode)

    def to_svg(self, title="Largest eigenvalue magnitudes of C(h)"):
        from .svg import line_chart

        series = [(f"eigenvalue {j + 1}", self.lags, self.magnitudes[:, j]) for j in range(self.k)]
        return line_chart(series, title=title, xlabel="lag h", ylabel="|eigenvalue|")


def sgcv(panel, h, d=1, S=12):
    """SGCV matrix at lag ``h`` of a standardized, fully observed panel (no re-centering)."""
    x = as_matrix(panel)
    T = x.shape[1]
    if h < 0:
        raise ValueError(f"lag must be nonnegative, got {h}")
    if h >= T:
        raise LagTooLarge(f"lag {h} >= T={T}")
    if d < 1 or S < 2:
        raise ValueError(f"need d >= 1 and S >= 2, got d={d}, S={S}")
    scale = (S / T) ** (2 * d)
    return SgcvMatrix(h, d, S, scale * (x[:, h:] @ x[:, : T - h].T))


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return (a + a.T) / 2


def _magnitude_order(values):
    # stable: equal magnitudes keep solver order
    return np.argsort(-np.abs(values), kind="stable")


def eigen_symmetric(a, tol=1e-10):
    """Eigenpairs of a symmetric matrix ordered by |eigenvalue|, descending.

    Returns ``(eigenvalues, eigenvectors)`` with orthonormal eigenvector columns.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
        raise SymmetryError("matrix is not symmetric; symmetrize it first")
    vals, vecs = np.linalg.eigh(symmetrize(a))
    order = _magnitude_order(vals)
    return vals[order], vecs[:, order]


def top_magnitudes(c, k, mode=SYMMETRIZE):
    if mode == SYMMETRIZE:
        vals = np.linalg.eigvalsh(symmetrize(c))
    elif mode == GENERAL:
        vals = np.linalg.eigvals(c)
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    mags = np.abs(vals)
    return mags[_magnitude_order(mags)][:k]


def eigen_sequence(panel, H=36, k=5, d=1, S=12, mode=SYMMETRIZE):
    """Top-``k`` eigenvalue magnitudes of C(h) for h = 0..H."""
    x = as_matrix(panel)
    n, T = x.shape
    if H >= T:
        raise LagTooLarge(f"max lag {H} >= T={T}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    lags = np.arange(H + 1)
    mags = np.vstack([top_magnitudes(sgcv(x, int(h), d, S).matrix, k, mode) for h in lags])
    return EigenSequence(lags, mags, k, mode)
