"""Pure-numpy kernels for the two hot loops: span max-pooling and grid
neighbor aggregation.

These are the fallback twins of the compiled kernels in ``_native``; both
backends share signatures and exact semantics (including argmax tie rules),
so either can serve the autodiff ops.
"""

import numpy as np


def span_pool_forward(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs window max over word vectors.

    out[i, j, c] = max(h[min(i,j):max(i,j)+1, c]); arg holds the lowest word
    index attaining each max, for the backward scatter.
    """
    n, d = h.shape
    out = np.empty((n, n, d), dtype=np.float64)
    arg = np.empty((n, n, d), dtype=np.int64)
    for i in range(n):
        window = h[i:]
        cummax = np.maximum.accumulate(window, axis=0)
        prev = np.empty_like(cummax)
        prev[0] = -np.inf
        prev[1:] = cummax[:-1]
        # index of the last strict improvement = first occurrence of the max
        word = np.arange(i, n)[:, None].repeat(d, axis=1)
        word[window <= prev] = -1
        run_arg = np.maximum.accumulate(word, axis=0)
        out[i, i:] = cummax
        arg[i, i:] = run_arg
        out[i:, i] = cummax
        arg[i:, i] = run_arg
    return out, arg


def span_pool_backward(arg: np.ndarray, grad_out: np.ndarray, n_words: int) -> np.ndarray:
    """Scatter-add pooled gradients back to the argmax word rows."""
    n, _, d = grad_out.shape
    chan = np.broadcast_to(np.arange(d), (n, n, d))
    lin = arg * d + chan
    flat = np.bincount(lin.ravel(), weights=grad_out.ravel(), minlength=n_words * d)
    return flat.reshape(n_words, d)


def neighbor_agg_forward(g: np.ndarray, wh: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """Weighted 4-neighbor sum on the grid graph.

    out[i,j] = g[i,j] + wh[j-1] g[i,j-1] + wh[j+1] g[i,j+1]
                      + wv[i-1] g[i-1,j] + wv[i+1] g[i+1,j]
    with border neighbors omitted; wh indexes columns, wv indexes rows.
    """
    out = g.copy()
    out[:, 1:] += wh[:-1][None, :, None] * g[:, :-1]
    out[:, :-1] += wh[1:][None, :, None] * g[:, 1:]
    out[1:, :] += wv[:-1][:, None, None] * g[:-1, :]
    out[:-1, :] += wv[1:][:, None, None] * g[1:, :]
    return out


def neighbor_agg_backward(
    g: np.ndarray, wh: np.ndarray, wv: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of neighbor_agg_forward w.r.t. g, wh, and wv."""
    grad_g = grad_out.copy()
    grad_g[:, :-1] += wh[:-1][None, :, None] * grad_out[:, 1:]
    grad_g[:, 1:] += wh[1:][None, :, None] * grad_out[:, :-1]
    grad_g[:-1, :] += wv[:-1][:, None, None] * grad_out[1:, :]
    grad_g[1:, :] += wv[1:][:, None, None] * grad_out[:-1, :]

    n = g.shape[0]
    grad_wh = np.zeros(n, dtype=np.float64)
    grad_wv = np.zeros(n, dtype=np.float64)
    if n > 1:
        grad_wh[:-1] += np.einsum("ijc,ijc->j", g[:, :-1], grad_out[:, 1:])
        grad_wh[1:] += np.einsum("ijc,ijc->j", g[:, 1:], grad_out[:, :-1])
        grad_wv[:-1] += np.einsum("ijc,ijc->i", g[:-1, :], grad_out[1:, :])
        grad_wv[1:] += np.einsum("ijc,ijc->i", g[1:, :], grad_out[:-1, :])
    return grad_g, grad_wh, grad_wv
