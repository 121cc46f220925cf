"""Relation table construction and the tri-channel grid GCN.

Each word pair (i, j) gets a feature c_ij built from both word vectors, a
span max-pool between them, and a bilinear interaction term. Three copies of
that table, reweighted by the sentiment channels' prompt scores, pass through
a grid-structured GCN and fuse into the final table.
"""

from gridaste import autodiff as ad
from gridaste.autodiff import Tensor
from gridaste.errors import ShapeError
from gridaste.prompt import CHANNEL_ROWS

import numpy as np


def build_table(hidden: Tensor, w1: Tensor, w2: Tensor) -> Tensor:
    """c_ij = relu(W2 (h_i | h_j | spanmax(h_i..j) | bilinear(h_i, h_j)))."""
    n, d = hidden.shape
    t = w1.shape[1]
    if w1.shape != (d, t, d):
        raise ShapeError(f"bilinear parameter must be ({d}, t, {d}), got {w1.shape}")
    if w2.shape[1] != 3 * d + t:
        raise ShapeError(f"table projection needs {3 * d + t} input columns, got {w2.shape[1]}")
    rows = np.repeat(np.arange(n, dtype=np.int64), n)
    cols = np.tile(np.arange(n, dtype=np.int64), n)
    h_i = ad.gather_rows(hidden, rows)
    h_j = ad.gather_rows(hidden, cols)
    pooled = ad.reshape(ad.span_max_pool(hidden), (n * n, d))
    bilinear = ad.reshape(ad.pairwise_bilinear(hidden, w1), (n * n, t))
    feats = ad.concat_lastdim([h_i, h_j, pooled, bilinear])
    c = ad.relu(ad.matmul(feats, ad.transpose(w2)))
    return ad.reshape(c, (n, n, w2.shape[0]))


def edge_weights(
    p: Tensor, channel: str, swap_axes: bool = False, single: bool = False
) -> tuple[Tensor, Tensor]:
    """Pick the channel's two prompt rows as grid edge weight vectors.

    Literal reading: a node's horizontal outgoing arcs carry the aspect-row
    probability of its own column, vertical arcs the opinion-row probability
    of its own row. swap_axes exchanges which row feeds which direction.
    """
    n = p.shape[1]
    aspect_row, opinion_row = (0, 1) if single else CHANNEL_ROWS[channel]
    wh = ad.reshape(ad.gather_rows(p, np.array([aspect_row])), (n,))
    wv = ad.reshape(ad.gather_rows(p, np.array([opinion_row])), (n,))
    if swap_axes:
        wh, wv = wv, wh
    return wh, wv


def gcn_channel(
    g0: Tensor,
    wh: Tensor,
    wv: Tensor,
    layer_ws: list[Tensor],
    out_w: Tensor,
    out_b: Tensor,
) -> Tensor:
    """L rounds of weighted 4-neighbor aggregation, then a linear output map.

    Per layer: g <- relu((g + weighted neighbor sum) W^T). Border nodes just
    have fewer neighbors.
    """
    if not layer_ws:
        raise ShapeError("gcn_channel needs at least one layer")
    g = g0
    for w in layer_ws:
        agg = ad.grid_neighbor_agg(g, wh, wv)
        g = ad.relu(ad.matmul(agg, ad.transpose(w)))
    return ad.add(ad.matmul(g, ad.transpose(out_w)), out_b)


def fuse_channels(pos: Tensor, neg: Tensor, neu: Tensor) -> Tensor:
    """Concatenate the channel tables along features, order [pos | neg | neu]."""
    if pos.shape != neg.shape or pos.shape != neu.shape:
        raise ShapeError(
            f"channel shapes differ: {pos.shape} / {neg.shape} / {neu.shape}"
        )
    return ad.concat_lastdim([pos, neg, neu])
