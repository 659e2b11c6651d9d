"""Panel containers and frequency-domain summaries.

A panel holds one time series per spatial site. All spectral quantities are
computed on the interior canonical grid w_k = 2 pi k / n for
k = 1, ..., floor((n - 1) / 2), which excludes frequency zero and, for even
n, the folding frequency pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import dft_forward


def fourier_frequencies(n: int) -> np.ndarray:
    """Interior canonical frequencies 2 pi k / n, k = 1, ..., floor((n-1)/2)."""
    if n < 2:
        raise ValueError("series length must be at least 2, got %d" % n)
    m = (n - 1) // 2
    return 2.0 * np.pi * np.arange(1, m + 1) / n


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Observations of one scalar series at each of m spatial sites.

    Parameters
    ----------
    locations : numpy.ndarray
        Site coordinates, shape (m, d), pairwise distinct.
    observations : numpy.ndarray
        Real data, shape (m, n) with n >= 2.
    site_ids : tuple of str
        One identifier per site, unique.
    """

    locations: np.ndarray
    observations: np.ndarray
    site_ids: tuple = field(default=())

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        obs = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if loc.ndim != 2:
            raise ValueError("locations must have shape (m, d), got %s" % (loc.shape,))
        if obs.ndim != 2:
            raise ValueError("observations must have shape (m, n), got %s" % (obs.shape,))
        if loc.shape[0] != obs.shape[0]:
            raise ValueError(
                "site count mismatch: %d locations but %d series"
                % (loc.shape[0], obs.shape[0])
            )
        if obs.shape[1] < 2:
            raise ValueError("series length must be at least 2, got %d" % obs.shape[1])
        if not np.all(np.isfinite(loc)):
            raise ValueError("locations contain non-finite values")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observations contain non-finite values")
        ids = tuple(self.site_ids) if self.site_ids else tuple(
            "site%d" % i for i in range(loc.shape[0])
        )
        if len(ids) != loc.shape[0]:
            raise ValueError(
                "expected %d site ids, got %d" % (loc.shape[0], len(ids))
            )
        if len(set(ids)) != len(ids):
            raise ValueError("site ids must be unique")
        for i in range(loc.shape[0]):
            for j in range(i + 1, loc.shape[0]):
                if np.array_equal(loc[i], loc[j]):
                    raise ValueError(
                        "duplicate location for sites %r and %r" % (ids[i], ids[j])
                    )
        loc = loc.copy()
        obs = obs.copy()
        loc.flags.writeable = False
        obs.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "site_ids", ids)

    @property
    def m(self) -> int:
        return self.observations.shape[0]

    @property
    def n(self) -> int:
        return self.observations.shape[1]

    @property
    def d(self) -> int:
        return self.locations.shape[1]

    def site_means(self) -> np.ndarray:
        return self.observations.mean(axis=1)


@dataclass(frozen=True)
class SpectralPanel:
    """Fourier ordinates of a panel on the interior frequency grid.

    Attributes
    ----------
    dft : numpy.ndarray
        Complex ordinates, shape (m, M).
    frequencies : numpy.ndarray
        The interior grid, shape (M,).
    n : int
        Length of the underlying series.
    mean_removed : bool
        Whether site means were subtracted before transforming.
    """

    dft: np.ndarray
    frequencies: np.ndarray
    n: int
    mean_removed: bool

    @property
    def m(self) -> int:
        return self.dft.shape[0]

    @property
    def n_frequencies(self) -> int:
        return self.dft.shape[1]


def dft_panel(panel: TimeSeriesPanel, remove_mean: bool = True) -> SpectralPanel:
    """Transform every site series to the interior frequency grid.

    Subtracting the site mean only changes the ordinate at frequency zero,
    which the interior grid drops anyway, but is kept explicit so downstream
    consumers know the data were centered.
    """
    obs = panel.observations
    if remove_mean:
        obs = obs - obs.mean(axis=1, keepdims=True)
    n = panel.n
    m_int = (n - 1) // 2
    if m_int < 1:
        raise ValueError(
            "series length %d leaves no interior frequencies; need n >= 3" % n
        )
    k = np.arange(n // 2 + 1)
    phase = np.exp(-2j * np.pi * k / n)
    coeffs = phase * np.fft.rfft(obs, axis=1) / np.sqrt(2.0 * np.pi * n)
    return SpectralPanel(
        dft=coeffs[:, 1 : m_int + 1],
        frequencies=fourier_frequencies(n),
        n=n,
        mean_removed=bool(remove_mean),
    )


def _check_site(spectral: SpectralPanel, site: int) -> int:
    if not -spectral.m <= site < spectral.m:
        raise IndexError("site index %d out of range for %d sites" % (site, spectral.m))
    return site % spectral.m


def periodogram(spectral: SpectralPanel, site: int) -> np.ndarray:
    """Squared modulus of one site's Fourier ordinates."""
    i = _check_site(spectral, site)
    row = spectral.dft[i]
    return (row * np.conj(row)).real


def cross_periodogram(spectral: SpectralPanel, site_i: int, site_j: int) -> np.ndarray:
    """J_i(w_k) * conj(J_j(w_k)) across the interior grid."""
    i = _check_site(spectral, site_i)
    j = _check_site(spectral, site_j)
    return spectral.dft[i] * np.conj(spectral.dft[j])


def difference_periodogram(spectral: SpectralPanel, site_i: int, site_j: int) -> np.ndarray:
    """Periodogram of the site difference, |J_i(w_k) - J_j(w_k)|^2.

    The two sites must differ; the difference periodogram of a site with
    itself is identically zero and almost always a caller bug.
    """
    i = _check_site(spectral, site_i)
    j = _check_site(spectral, site_j)
    if i == j:
        raise ValueError("difference periodogram requires two distinct sites, got %d twice" % i)
    diff = spectral.dft[i] - spectral.dft[j]
    return (diff * np.conj(diff)).real


def _partition_centers(n: int, half_window: int) -> tuple[int, np.ndarray]:
    """Split the interior grid of an odd-length series into adjacent blocks
    of width 2 * half_window + 1; return the block count and center indices.
    """
    if n % 2 == 0:
        raise ValueError(
            "frequency blocks need an odd series length; drop the last "
            "observation first (length %d is even)" % n
        )
    if half_window < 1:
        raise ValueError("half_window must be at least 1, got %d" % half_window)
    half = (n - 1) // 2
    width = 2 * half_window + 1
    if half % width != 0:
        admissible = sorted(
            (q - 1) // 2
            for q in range(3, half + 1, 2)
            if half % q == 0
        )
        raise ValueError(
            "block width %d does not divide the %d interior frequencies of a "
            "length-%d series; admissible half_window values: %s"
            % (width, half, n, admissible if admissible else "none")
        )
    blocks = half // width
    centers = np.arange(blocks) * width + half_window + 1
    return blocks, centers


def smoothed_cross_spectrum(spectral: SpectralPanel, site_i: int, site_j: int,
                            half_window: int) -> np.ndarray:
    """Cross-spectrum estimate averaged over adjacent frequency blocks.

    The interior grid is split into consecutive blocks of 2 * half_window + 1
    ordinates and the cross periodogram is averaged within each block. The
    value for block l estimates the cross spectrum at the block's center
    frequency w_{j_l}.

    Returns
    -------
    numpy.ndarray
        Complex vector with one entry per block.
    """
    i = _check_site(spectral, site_i)
    j = _check_site(spectral, site_j)
    blocks, centers = _partition_centers(spectral.n, half_window)
    width = 2 * half_window + 1
    cross = spectral.dft[i] * np.conj(spectral.dft[j])
    # center index c covers ordinates k = c - K, ..., c + K; column of w_k is k - 1
    out = np.empty(blocks, dtype=complex)
    for l, c in enumerate(centers):
        out[l] = cross[c - half_window - 1 : c + half_window].mean()
    return out


def block_center_frequencies(n: int, half_window: int) -> np.ndarray:
    """Frequencies 2 pi j_l / n of the block centers used by
    smoothed_cross_spectrum."""
    _, centers = _partition_centers(n, half_window)
    return 2.0 * np.pi * centers / n
