"""Table decoding: boundary detection with top-k pruning, then region
classification into sentiments."""

import math

import numpy as np

from gridaste import autodiff as ad
from gridaste.autodiff import Tensor
from gridaste.corpus import CLASS_TO_SENTIMENT, PADDING_CLASS, Triplet
from gridaste.errors import ConfigError


def detect(cp: Tensor, ss_w: Tensor, ss_b: Tensor, se_w: Tensor, se_b: Tensor) -> tuple[Tensor, Tensor]:
    """Two independent linear heads + sigmoid over every table cell."""
    n, _, width = cp.shape
    flat = ad.reshape(cp, (n * n, width))
    ss = ad.reshape(ad.sigmoid(ad.add(ad.matmul(flat, ad.transpose(ss_w)), ss_b)), (n, n))
    se = ad.reshape(ad.sigmoid(ad.add(ad.matmul(flat, ad.transpose(se_w)), se_b)), (n, n))
    return ss, se


def topk_candidates(scores: np.ndarray, k: float, literal: bool = False) -> list[tuple[int, int]]:
    """Positions of the m best cells, score descending, ties by (i, j).

    m = max(1, ceil(k*n)) by default; the literal reading ceil(k*n^2) is a
    config switch.
    """
    if not 0 < k <= 1:
        raise ConfigError(f"pruning threshold must be in (0, 1], got {k}")
    n = scores.shape[0]
    base = n * n if literal else n
    m = min(max(1, math.ceil(k * base)), n * n)
    flat = scores.ravel()
    rows, cols = np.divmod(np.arange(n * n), n)
    order = np.lexsort((cols, rows, -flat))
    return [(int(rows[ix]), int(cols[ix])) for ix in order[:m]]


def candidate_regions(
    starts: list[tuple[int, int]], ends: list[tuple[int, int]]
) -> list[tuple[int, int, int, int]]:
    """Valid (a, b, c, d) rectangles in S-order x E-order, first-kept dedup."""
    seen = set()
    out = []
    for a, b in starts:
        for c, d in ends:
            if a <= c and b <= d and (a, b, c, d) not in seen:
                seen.add((a, b, c, d))
                out.append((a, b, c, d))
    return out


def region_features(cp: Tensor, regions: list[tuple[int, int, int, int]]) -> Tensor:
    """R = C'[a,b] | C'[c,d] | max over the rectangle, one row per region."""
    n, _, width = cp.shape
    flat = ad.reshape(cp, (n * n, width))
    start_ix = np.array([a * n + b for a, b, _, _ in regions], dtype=np.int64)
    end_ix = np.array([c * n + d for _, _, c, d in regions], dtype=np.int64)
    return ad.concat_lastdim(
        [
            ad.gather_rows(flat, start_ix),
            ad.gather_rows(flat, end_ix),
            ad.rect_max_pool(cp, regions),
        ]
    )


def region_logits(cp: Tensor, regions, head_w: Tensor, head_b: Tensor) -> Tensor:
    return ad.add(ad.matmul(region_features(cp, regions), ad.transpose(head_w)), head_b)


def classify_regions(
    cp: Tensor,
    starts: list[tuple[int, int]],
    ends: list[tuple[int, int]],
    head_w: Tensor,
    head_b: Tensor,
) -> list[Triplet]:
    """Score every candidate rectangle; argmax class; drop Padding."""
    regions = candidate_regions(starts, ends)
    if not regions:
        return []
    logits = region_logits(cp, regions, head_w, head_b).data
    classes = logits.argmax(axis=1)
    out = []
    for (a, b, c, d), cls in zip(regions, classes):
        if cls == PADDING_CLASS:
            continue
        out.append(Triplet(aspect=(a, c), opinion=(b, d), sentiment=CLASS_TO_SENTIMENT[int(cls)]))
    return out
