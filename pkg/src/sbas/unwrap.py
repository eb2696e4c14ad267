"""Two-dimensional phase unwrapping.

Two unwrappers are provided: path integration (Itoh) for residue-free
fields, and coherence-weighted least squares solved as a discrete Poisson
problem with conjugate gradients.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _graph_components
from scipy.sparse.linalg import cg
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_array, check_pixel, check_same_shape, like_input
from .scene_sim import wrap

TWO_PI = 2.0 * math.pi


class UnwrapError(RuntimeError):
    """Raised when a field cannot be unwrapped with the requested method."""


def _wrapped_diff(a, axis):
    return wrap(np.diff(a, axis=axis))


def compute_residues(wrapped) -> np.ndarray:
    """Residue charge of every 2x2 plaquette.

    The loop is traversed counterclockwise with x = column and y = row,
    i.e. ``a[i,j] -> a[i,j+1] -> a[i+1,j+1] -> a[i+1,j] -> a[i,j]``.
    Returns an integer array of shape ``(height-1, width-1)``.
    """
    a = as_array(wrapped, "wrapped", ndim=2)
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError(f"residues need at least a 2x2 raster, got {a.shape}")
    dcol = _wrapped_diff(a, 1)  # a[i,j+1] - a[i,j]
    drow = _wrapped_diff(a, 0)  # a[i+1,j] - a[i,j]
    circulation = dcol[:-1, :] + drow[:, 1:] - dcol[1:, :] - drow[:, :-1]
    return np.rint(circulation / TWO_PI).astype(np.int8)


def unwrap_itoh(wrapped, column_first=False):
    """Integrate wrapped differences along the first row, then down columns.

    ``column_first=True`` integrates down the first column and then along
    rows; on residue-free input both orders agree. The origin pixel keeps
    its wrapped value.
    """
    a = as_array(wrapped, "wrapped", ndim=2)
    if a.shape[0] >= 2 and a.shape[1] >= 2:
        charges = compute_residues(a)
        if charges.any():
            raise UnwrapError(
                f"{int(np.count_nonzero(charges))} residues present; path integration is ambiguous, "
                "use unwrap_ls instead"
            )
    if column_first:
        return like_input(wrapped, unwrap_itoh(a.T).T)
    out = np.empty_like(a)
    out[0, 0] = a[0, 0]
    out[0, 1:] = a[0, 0] + np.cumsum(_wrapped_diff(a[0], 0))
    out[1:, :] = out[0] + np.cumsum(_wrapped_diff(a, 0), axis=0)
    return like_input(wrapped, out)


def reference_pixel(coherence) -> tuple[int, int]:
    """Pixel with maximum (mean) coherence; ties go to the lowest row-major index.

    ``coherence`` may be 2-D or a ``(n, height, width)`` stack.
    """
    c = as_array(coherence, "coherence", ndim=(2, 3), allow_nan=True)
    if c.ndim == 3:
        c = c.mean(axis=0)
    c = np.where(np.isnan(c), -np.inf, c)
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(c)), c.shape))


def _edge_weights(w):
    """Edge weights for column and row neighbours: product of pixel weights."""
    return w[:, :-1] * w[:, 1:], w[:-1, :] * w[1:, :]


def unwrap_ls(wrapped, coherence=None, coh_threshold=0.3, ref_pixel=None, tol=1e-8, max_iter=10_000):
    """Weighted least-squares unwrapping.

    Minimises ``sum w_e (phi_j - phi_i - wrap(a_j - a_i))**2`` over grid
    edges, with pixel weight equal to coherence (zero below
    ``coh_threshold``) and edge weight the product of its two pixel
    weights. The normal equations (a weighted graph Laplacian) are solved
    by conjugate gradients with the reference pixel held at its wrapped
    value, which removes the constant null space.

    Pixels outside the reference pixel's weighted-connected region are
    returned as NaN. Raises ``UnwrapError`` if CG does not reach relative
    residual ``tol`` within ``max_iter`` iterations.
    """
    a = as_array(wrapped, "wrapped", ndim=2)
    h, w = a.shape
    if coherence is None:
        coh = np.ones_like(a)
    else:
        coh = as_array(coherence, "coherence", ndim=2, allow_nan=True)
        check_same_shape(a, coh, names=("wrapped", "coherence"))
    weight = np.where(np.nan_to_num(coh, nan=-1.0) >= coh_threshold, np.nan_to_num(coh), 0.0)
    if not weight.any():
        raise UnwrapError(f"no pixel has coherence >= {coh_threshold}")
    ref = reference_pixel(coh) if ref_pixel is None else check_pixel(ref_pixel, a.shape)
    if weight[ref] == 0:
        raise UnwrapError(f"reference pixel {ref} is below the coherence threshold")

    idx = np.arange(h * w).reshape(h, w)
    wc, wr = _edge_weights(weight)
    gc, gr = _wrapped_diff(a, 1), _wrapped_diff(a, 0)
    tail = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    head = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    ew = np.concatenate([wc.ravel(), wr.ravel()])
    eg = np.concatenate([gc.ravel(), gr.ravel()])
    keep = ew > 0
    tail, head, ew, eg = tail[keep], head[keep], ew[keep], eg[keep]

    n = h * w
    adjacency = sp.coo_matrix((ew, (tail, head)), shape=(n, n)).tocsr()
    adjacency = adjacency + adjacency.T
    _, labels = _graph_components(adjacency, directed=False)
    ref_flat = int(idx[ref])
    region = np.flatnonzero(labels == labels[ref_flat])

    out = np.full(n, np.nan)
    out[ref_flat] = a[ref]
    if region.size > 1:
        laplacian = sp.diags(np.asarray(adjacency.sum(axis=1)).ravel()) - adjacency
        # divergence of the weighted wrapped gradient field
        rhs = np.zeros(n)
        np.add.at(rhs, head, ew * eg)
        np.add.at(rhs, tail, -ew * eg)
        free = region[region != ref_flat]
        L = laplacian.tocsr()
        A = L[free][:, free]
        b = rhs[free] - L[free][:, [ref_flat]].toarray().ravel() * a[ref]
        diag = A.diagonal()
        precond = sp.diags(1.0 / diag)
        x0 = np.full(free.size, a[ref])
        sol, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter, M=precond)
        if info != 0:
            raise UnwrapError(f"conjugate gradients did not converge in {max_iter} iterations")
        out[free] = sol
    return like_input(wrapped, out.reshape(h, w))


class ItohUnwrapper(TransformerMixin, BaseEstimator):
    """Stateless transformer around :func:`unwrap_itoh`.

    ``transform`` accepts one field ``(height, width)`` or a stack
    ``(n, height, width)``.
    """

    def __init__(self, column_first=False):
        self.column_first = column_first

    def fit(self, X, y=None):
        as_array(X, "X", ndim=(2, 3))
        return self

    def transform(self, X):
        X = as_array(X, "X", ndim=(2, 3))
        if X.ndim == 2:
            return unwrap_itoh(X, self.column_first)
        return np.stack([unwrap_itoh(x, self.column_first) for x in X])


class LeastSquaresUnwrapper(TransformerMixin, BaseEstimator):
    """Stateless transformer around :func:`unwrap_ls`.

    Pass the coherence raster(s) to ``transform``; without them all
    pixels get unit weight.
    """

    def __init__(self, coh_threshold=0.3, ref_pixel=None, tol=1e-8, max_iter=10_000):
        self.coh_threshold = coh_threshold
        self.ref_pixel = ref_pixel
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None, coherence=None):
        as_array(X, "X", ndim=(2, 3))
        return self

    def transform(self, X, coherence=None):
        X = as_array(X, "X", ndim=(2, 3))
        kw = dict(coh_threshold=self.coh_threshold, ref_pixel=self.ref_pixel, tol=self.tol, max_iter=self.max_iter)
        if X.ndim == 2:
            return unwrap_ls(X, coherence, **kw)
        if coherence is None:
            coherence = [None] * len(X)
        return np.stack([unwrap_ls(x, c, **kw) for x, c in zip(X, coherence)])


def unwrap_auto(wrapped, coherence=None, coh_threshold=0.3, ref_pixel=None, **kw):
    """Itoh when the field is residue-free, least squares otherwise.

    The Itoh result is shifted so ``ref_pixel`` keeps its wrapped value,
    matching the least-squares convention.
    """
    a = as_array(wrapped, "wrapped", ndim=2)
    if coherence is not None:
        coh = as_array(coherence, "coherence", ndim=2, allow_nan=True)
        low = np.nan_to_num(coh, nan=-1.0) < coh_threshold
    else:
        low = np.zeros(a.shape, dtype=bool)
    if not low.any() and not compute_residues(a).any():
        out = unwrap_itoh(a)
        if ref_pixel is not None:
            ref = check_pixel(ref_pixel, a.shape)
        else:
            ref = (0, 0) if coherence is None else reference_pixel(coherence)
        out = out - (out[ref] - a[ref])
        return like_input(wrapped, out)
    return unwrap_ls(wrapped, coherence, coh_threshold=coh_threshold, ref_pixel=ref_pixel, **kw)
