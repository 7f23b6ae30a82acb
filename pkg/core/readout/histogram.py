import logging
import math
from typing import Optional

import numpy as np
from scipy.stats import iqr

from core import constants
from core.models.readout import Histogram

logger = logging.getLogger(__name__)

MAX_BINS_1D = 2048
MAX_BINS_2D = 128


def freedman_diaconis_bins(
    values: np.ndarray, min_bins: int = constants.MIN_HISTOGRAM_BINS, max_bins: int = MAX_BINS_1D
) -> int:
    """Bin count from the Freedman-Diaconis width 2 IQR n^(-1/3), clipped to [min_bins, max_bins]."""
    values = np.asarray(values, dtype=float)
    span = float(values.max() - values.min()) if len(values) else 0.0
    spread = float(iqr(values)) if len(values) else 0.0
    if span <= 0 or spread <= 0:
        return min_bins
    width = 2.0 * spread * len(values) ** (-1.0 / 3.0)
    return int(min(max(math.ceil(span / width), min_bins), max(max_bins, min_bins)))


def make_histogram(
    values: np.ndarray,
    bins: Optional[int] = None,
    min_bins: int = constants.MIN_HISTOGRAM_BINS,
    edges: Optional[np.ndarray] = None,
) -> Histogram:
    values = np.asarray(values, dtype=float)
    if edges is None:
        if len(values) == 0:
            raise ValueError("cannot bin an empty sample")
        bins = bins or freedman_diaconis_bins(values, min_bins)
        edges = np.histogram_bin_edges(values, bins=bins)
    counts, edges = np.histogram(values, bins=edges)
    return Histogram(edges, counts)


def make_histogram_2d(
    u: np.ndarray,
    w: np.ndarray,
    bins: Optional[int] = None,
    min_bins: int = constants.MIN_HISTOGRAM_BINS,
    edges: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> Histogram:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape:
        raise ValueError(f"u and w differ in shape: {u.shape} vs {w.shape}")
    if edges is None:
        if len(u) == 0:
            raise ValueError("cannot bin an empty sample")
        n_u = bins or freedman_diaconis_bins(u, min_bins, MAX_BINS_2D)
        n_w = bins or freedman_diaconis_bins(w, min_bins, MAX_BINS_2D)
        edges = (np.histogram_bin_edges(u, bins=n_u), np.histogram_bin_edges(w, bins=n_w))
    counts, edges_u, edges_w = np.histogram2d(u, w, bins=edges)
    return Histogram(edges_u, counts, edges_w)


def histogram_for(values: np.ndarray, **kwargs) -> Histogram:
    """1-D histogram for shape (n,), 2-D for shape (n, 2)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        edges = kwargs.pop("edges", None)
        return make_histogram_2d(values[:, 0], values[:, 1], edges=edges, **kwargs)
    return make_histogram(values, **kwargs)


def same_binning(hist: Histogram, values: np.ndarray) -> Histogram:
    """Bin `values` on the edges of an existing histogram."""
    if hist.ndim == 2:
        return histogram_for(values, edges=(hist.edges, hist.edges_y))
    return make_histogram(values, edges=hist.edges)
