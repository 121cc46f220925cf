"""Prompt attention: score each word against the mask-slot rows.

The six rows of P (aspect then opinion, per sentiment) become the grid edge
weights downstream; the heatmap view is the geometric mean of aspect and
opinion probabilities.
"""

import csv

import numpy as np

from gridaste import autodiff as ad
from gridaste.autodiff import Tensor
from gridaste.errors import ShapeError

# tau/P row pairs per sentiment channel: (aspect row, opinion row)
CHANNEL_ROWS = {"pos": (0, 1), "neg": (2, 3), "neu": (4, 5)}
CHANNELS = ("pos", "neg", "neu")


def attention_scores(hidden: Tensor, tau: Tensor, w: Tensor) -> Tensor:
    """P = softmax over words of tau . W . H^T, one row per mask slot."""
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"projection must be square, got {w.shape}")
    if hidden.shape[1] != w.shape[0] or tau.shape[1] != w.shape[0]:
        raise ShapeError(
            f"hidden width {hidden.shape[1]} / tau width {tau.shape[1]} != projection {w.shape[0]}"
        )
    logits = ad.matmul(ad.matmul(tau, w), ad.transpose(hidden))
    return ad.softmax_rows(logits)


def heatmap(p: np.ndarray, aspect_row: int, opinion_row: int) -> np.ndarray:
    """n_ij = sqrt(p_aspect[i] * p_opinion[j]); aspect indexes the rows."""
    pa = p[aspect_row]
    po = p[opinion_row]
    return np.sqrt(np.outer(pa, po))


def write_heatmap_csv(path, matrix: np.ndarray, words: list[str]) -> None:
    """Grid CSV with the sentence words as both axis headers, 6 decimals."""
    n = len(words)
    if matrix.shape != (n, n):
        raise ShapeError(f"heatmap {matrix.shape} does not match {n} words")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(words))
        for i, word in enumerate(words):
            writer.writerow([word] + [f"{v:.6f}" for v in matrix[i]])
