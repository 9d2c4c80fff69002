"""Multipass image stacks, sliding-window classification and decomposition maps.

Stack files come in pairs: a plain-text header of ``key: value`` lines and a
raw little-endian interleaved complex payload ordered pass, channel, row,
column (C order). Mandatory header keys are ``L``, ``C``, ``N``, ``M``,
``dtype`` and ``layout``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decomposition import h_alpha, zone_index
from .kronml import FlipFlopConfig, N_POL, per_pass_average
from .linalg import pauli_coherence, sample_covariance
from .mos import fit_all, score_fits, score_tusml, select
from .symmetry import Symmetry, project

__all__ = [
    "StackFormatError",
    "MultipassStack",
    "save_stack",
    "load_stack",
    "window_origin",
    "window_samples",
    "ClassMap",
    "classify_map",
    "DecompositionMaps",
    "decompose_map",
    "PALETTE",
    "SENTINEL",
    "render_map",
    "decode_map",
    "ZONE_PALETTE",
    "render_zones",
    "save_png",
    "region_percentages",
]

log = logging.getLogger(__name__)

SENTINEL = -1
LAYOUT = "pass,channel,row,col"
_DTYPES = {"complex64": np.dtype("<c8"), "complex128": np.dtype("<c16")}
_REQUIRED = ("L", "C", "N", "M", "dtype", "layout")


class StackFormatError(ValueError):
    """Malformed or inconsistent stack header/payload."""


@dataclass
class MultipassStack:
    """Co-registered polarimetric images, ``data[m, n, row, col]``."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 4 or self.data.shape[1] != N_POL:
            raise StackFormatError(f"expected (M, {N_POL}, L, C) data, got {self.data.shape}")

    @property
    def n_passes(self):
        return self.data.shape[0]

    @property
    def shape(self):
        """Image size ``(L, C)``."""
        return self.data.shape[2:]

    def select_passes(self, passes):
        return MultipassStack(self.data[list(passes)])


def save_stack(stack, header_path, payload_path, dtype="complex128"):
    """Write a stack as header + raw payload."""
    if dtype not in _DTYPES:
        raise StackFormatError(f"unknown dtype {dtype!r}")
    M, N, L, C = stack.data.shape
    lines = [f"L: {L}", f"C: {C}", f"N: {N}", f"M: {M}", f"dtype: {dtype}", f"layout: {LAYOUT}"]
    Path(header_path).write_text("\n".join(lines) + "\n")
    stack.data.astype(_DTYPES[dtype]).tofile(payload_path)


def _parse_header(text):
    fields = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise StackFormatError(f"header line {n} is not 'key: value': {line!r}")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise StackFormatError(f"header is missing keys: {', '.join(missing)}")
    try:
        dims = {k: int(fields[k]) for k in ("L", "C", "N", "M")}
    except ValueError as exc:
        raise StackFormatError(f"non-integer dimension in header: {exc}") from None
    if dims["N"] != N_POL:
        raise StackFormatError(f"N must be {N_POL} (HH, HV, VV), got {dims['N']}")
    if min(dims.values()) < 1:
        raise StackFormatError("dimensions must be positive")
    if fields["dtype"] not in _DTYPES:
        raise StackFormatError(f"unknown dtype {fields['dtype']!r}; expected complex64 or complex128")
    if fields["layout"].replace(" ", "") != LAYOUT:
        raise StackFormatError(f"unsupported layout {fields['layout']!r}; expected {LAYOUT!r}")
    return dims, _DTYPES[fields["dtype"]]


def load_stack(header_path, payload_path):
    """Read a stack written by :func:`save_stack` (or any tool following the format)."""
    dims, dtype = _parse_header(Path(header_path).read_text())
    shape = (dims["M"], dims["N"], dims["L"], dims["C"])
    expected = int(np.prod(shape)) * dtype.itemsize
    actual = Path(payload_path).stat().st_size
    if actual != expected:
        raise StackFormatError(f"payload size mismatch: expected {expected} bytes, found {actual}")
    data = np.fromfile(payload_path, dtype=dtype).reshape(shape)
    return MultipassStack(data.astype(complex))


def window_origin(index, size, extent):
    """Top/left corner of a window centred on ``index``, shifted inside the image."""
    if size > extent:
        raise ValueError(f"window of {size} does not fit an image dimension of {extent}")
    return np.clip(np.asarray(index) - size // 2, 0, extent - size)


def _gather(stack, rows, cols, window):
    W1, W2 = window
    L, C = stack.shape
    r0 = window_origin(rows, W1, L)
    c0 = window_origin(cols, W2, C)
    dr, dc = np.meshgrid(np.arange(W1), np.arange(W2), indexing="ij")
    rr = r0[:, None] + dr.ravel()[None, :]
    cc = c0[:, None] + dc.ravel()[None, :]
    X = stack.data[:, :, rr, cc]                  # (M, 3, P, K)
    X = np.moveaxis(X, 2, 0)                      # (P, M, 3, K)
    return X.reshape(X.shape[0], -1, W1 * W2)     # (P, 3M, K)


def window_samples(stack, row, col, W1, W2):
    """Multipass sample matrix (3M, W1*W2) of the window around ``(row, col)``.

    Column ``k`` stacks the polarimetric vectors of one pixel across passes.
    Windows touching the border are shifted inward so every pixel gets the
    full ``W1 * W2`` looks.
    """
    if W1 < 1 or W2 < 1:
        raise ValueError("window dimensions must be >= 1")
    return _gather(stack, np.array([row]), np.array([col]), (W1, W2))[0]


def _parse_window(window):
    if isinstance(window, str):
        parts = window.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"window must look like '5x5', got {window!r}")
        window = tuple(int(p) for p in parts)
    W1, W2 = window
    if W1 < 1 or W2 < 1:
        raise ValueError("window dimensions must be >= 1")
    return int(W1), int(W2)


def _classify_pixels(X, M, rule, config):
    K = X.shape[-1]
    S = sample_covariance(X)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        fits = fit_all(S, M, K, config, on_failure="mask")
        choice = select(score_fits(fits, S, K, rule))
    Cp = np.full(choice.shape + (3, 3), np.nan, dtype=complex)
    for h in Symmetry:
        sel = choice == int(h)
        Cp[sel] = fits[h].Cp[sel]
    return choice, Cp, S


def _classify_single(X, rule):
    # closed-form single-image classifier: projected SCM per hypothesis
    K = X.shape[-1]
    S = sample_covariance(X)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        choice = select(score_tusml(S, 1, K, rule))
        Cp = np.full(choice.shape + (3, 3), np.nan, dtype=complex)
        for h in Symmetry:
            sel = choice == int(h)
            Cp[sel] = project(S[sel], h, check=False)
    return choice, Cp, S


def _pixel_fn(M, rule, config, single_image):
    if single_image:
        return lambda X: _classify_single(X[:, :N_POL], rule)
    return lambda X: _classify_pixels(X, M, rule, config)


def _run_tiles(stack, window, fn, chunk, workers):
    L, C = stack.shape
    idx = np.arange(L * C)
    spans = [idx[a:a + chunk] for a in range(0, idx.size, chunk)]

    def run(span):
        rows, cols = np.divmod(span, C)
        return fn(_gather(stack, rows, cols, window))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, spans))
    return [run(s) for s in spans]


@dataclass
class ClassMap:
    """Per-pixel selected hypothesis (``SENTINEL`` where fitting failed)."""

    labels: np.ndarray
    failures: int

    @property
    def shape(self):
        return self.labels.shape


def _check_window(window, M):
    if window[0] * window[1] < N_POL * M:
        log.warning("window gives K=%d looks for a %d-dimensional sample; "
                    "no-symmetry fits are ill-conditioned", window[0] * window[1], N_POL * M)


def classify_map(stack, rule, window=(5, 5), config=None, single_image=False, chunk=4096,
                 workers=1):
    """Symmetry class of every pixel from its sliding-window neighbourhood.

    Parameters
    ----------
    stack : MultipassStack
    rule : MosRule or str
    window : (int, int) or str
        Window size ``(W1, W2)`` or ``"W1xW2"``; ``K = W1 * W2`` looks.
    config : FlipFlopConfig, optional
    single_image : bool
        Classify the first pass alone with the closed-form single-image
        classifier (projected sample covariance) instead of the flip-flop.
    chunk, workers : int
        Pixels per tile and number of tiles processed concurrently.
    """
    window = _parse_window(window)
    config = config or FlipFlopConfig()
    M = 1 if single_image else stack.n_passes
    _check_window(window, M)
    fn = _pixel_fn(M, rule, config, single_image)
    parts = _run_tiles(stack, window, lambda X: fn(X)[0], chunk, workers)
    labels = np.concatenate(parts).reshape(stack.shape).astype(np.int8)
    return ClassMap(labels=labels, failures=int(np.sum(labels == SENTINEL)))


@dataclass
class DecompositionMaps:
    """Zone (1..9, 0 = invalid), entropy and mean-alpha rasters plus the class map."""

    zones: np.ndarray
    entropy: np.ndarray
    alpha: np.ndarray
    labels: np.ndarray
    failures: int


def decompose_map(stack, rule, window=(5, 5), config=None, estimate="structured",
                  single_image=False, chunk=4096, workers=1):
    """H / alpha zone maps from the selected structured covariance of each pixel.

    With ``estimate="sample"`` the pass-averaged 3 x 3 sample covariance is used
    instead, which is the classic unstructured reference.
    """
    window = _parse_window(window)
    config = config or FlipFlopConfig()
    M = 1 if single_image else stack.n_passes
    if estimate not in ("structured", "sample"):
        raise ValueError(f"unknown estimate {estimate!r}")
    _check_window(window, M)
    classify_fn = _pixel_fn(M, rule, config, single_image)

    def fn(X):
        choice, Cp, S = classify_fn(X)
        if estimate == "sample":
            Cp = np.where((choice >= 0)[:, None, None], per_pass_average(S, M), np.nan)
        H, a = h_alpha(pauli_coherence(np.nan_to_num(Cp)), invalid="nan")
        H = np.where(choice >= 0, H, np.nan)
        a = np.where(choice >= 0, a, np.nan)
        return choice, H, a

    parts = _run_tiles(stack, window, fn, chunk, workers)
    labels = np.concatenate([p[0] for p in parts]).reshape(stack.shape).astype(np.int8)
    H = np.concatenate([p[1] for p in parts]).reshape(stack.shape)
    a = np.concatenate([p[2] for p in parts]).reshape(stack.shape)
    zones = zone_index(H, a).astype(np.int8)
    return DecompositionMaps(zones=zones, entropy=H, alpha=a, labels=labels,
                             failures=int(np.sum(labels == SENTINEL)))


PALETTE = {
    int(Symmetry.NONE): (0, 0, 0),
    int(Symmetry.REFLECTION): (0, 0, 255),
    int(Symmetry.ROTATION): (255, 0, 0),
    int(Symmetry.AZIMUTH): (255, 255, 0),
    SENTINEL: (128, 128, 128),
}


def render_map(labels):
    """RGB raster (uint8) of a class map using :data:`PALETTE`."""
    labels = np.asarray(getattr(labels, "labels", labels))
    rgb = np.empty(labels.shape + (3,), dtype=np.uint8)
    rgb[...] = PALETTE[SENTINEL]
    for k, color in PALETTE.items():
        rgb[labels == k] = color
    return rgb


def decode_map(rgb):
    """Inverse of :func:`render_map`; unknown colours raise ``ValueError``."""
    rgb = np.asarray(rgb)
    labels = np.full(rgb.shape[:2], 127, dtype=np.int8)
    for k, color in PALETTE.items():
        labels[np.all(rgb == color, axis=-1)] = k
    if np.any(labels == 127):
        raise ValueError("raster contains colours outside the palette")
    return labels


ZONE_PALETTE = {
    0: (128, 128, 128),
    1: (255, 0, 0),
    2: (0, 160, 0),
    3: (255, 0, 255),
    4: (255, 128, 0),
    5: (0, 255, 0),
    6: (0, 255, 255),
    7: (160, 0, 0),
    8: (0, 0, 255),
    9: (255, 255, 255),
}


def render_zones(zones):
    """RGB raster of a zone map (1..9, 0 rendered grey)."""
    zones = np.asarray(zones)
    rgb = np.empty(zones.shape + (3,), dtype=np.uint8)
    rgb[...] = ZONE_PALETTE[0]
    for k, color in ZONE_PALETTE.items():
        rgb[zones == k] = color
    return rgb


def save_png(rgb, path):
    """Write an RGB (or grey) uint8 raster as lossless PNG."""
    from PIL import Image

    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path, format="PNG")


def region_percentages(labels, regions, classes):
    """Share (percent) of each class value inside rectangular regions.

    Parameters
    ----------
    labels : ndarray (L, C)
    regions : dict
        ``name -> (row0, row1, col0, col1)``, half-open bounds.
    classes : sequence
        Class values to count; pixels with other values (sentinels) are
        excluded from the denominator.

    Returns
    -------
    dict name -> (percentages array, number of valid pixels)
    """
    out = {}
    classes = np.asarray(classes)
    for name, (r0, r1, c0, c1) in regions.items():
        patch = np.asarray(labels)[r0:r1, c0:c1].ravel()
        counts = np.array([(patch == c).sum() for c in classes], dtype=float)
        n = counts.sum()
        pct = 100.0 * counts / n if n else np.full(classes.size, np.nan)
        out[name] = (pct, int(n))
    return out
