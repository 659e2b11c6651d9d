"""Spectral simulation of panels that follow the covariance model exactly,
frequency by frequency.

At each interior frequency the Fourier vector across sites is drawn as a
complex Gaussian with the model covariance matrix; the two real-valued edge
frequencies (zero and, for even length, the folding frequency) get real
Gaussian draws. Conjugate symmetry then fixes the rest of the grid and an
inverse transform produces the real panel. Measurement error, when
requested, is added independently in the time domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covmodel import ModelParams, cov_matrix
from .numerics import cholesky_with_jitter
from .spectral import TimeSeriesPanel, fourier_frequencies

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    Parameters
    ----------
    locations : numpy.ndarray
        Site coordinates, shape (m, d), pairwise distinct.
    n : int
        Series length, at least 8.
    params : ModelParams
        Covariance model to draw from.
    seed : int
        Seed of the random stream; equal seeds give identical panels.
    include_measurement_error : bool
        Add independent N(0, nugget) noise to every observation.
    site_ids : tuple, optional
        Identifiers for the generated panel.
    """

    locations: np.ndarray
    n: int
    params: ModelParams
    seed: int = 0
    include_measurement_error: bool = False
    site_ids: tuple = ()

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        if loc.ndim != 2 or loc.shape[0] < 1:
            raise ValueError("locations must have shape (m, d), got %s" % (loc.shape,))
        if not np.all(np.isfinite(loc)):
            raise ValueError("locations contain non-finite values")
        if self.n < 8:
            raise ValueError("simulation length must be at least 8, got %d" % self.n)
        if loc.shape[1] != self.params.d:
            raise ValueError(
                "locations have dimension %d but the model has d=%d"
                % (loc.shape[1], self.params.d)
            )
        loc = loc.copy()
        loc.flags.writeable = False
        object.__setattr__(self, "locations", loc)

    @property
    def m(self) -> int:
        return self.locations.shape[0]


def simulate_panel(spec: SimulationSpec) -> TimeSeriesPanel:
    """Draw one panel from the covariance model.

    The realization is exact for the model's per-frequency structure: the
    Fourier vectors at distinct grid frequencies are independent and the
    vector at frequency w has covariance matrix C(h_ij, w) (no nugget; the
    nugget is optional time-domain noise on top).
    """
    params = spec.params
    m = spec.m
    n = spec.n
    loc = spec.locations
    dmat = np.linalg.norm(loc[:, None, :] - loc[None, :, :], axis=-1)
    if m > 1:
        off = dmat[~np.eye(m, dtype=bool)]
        if np.any(off == 0.0):
            raise ValueError("locations must be pairwise distinct")

    freqs = fourier_frequencies(n)
    m_int = freqs.size
    rng = np.random.default_rng(spec.seed)
    # fixed draw order: interior real block, interior imaginary block, edge
    # draws, then measurement noise; this keeps panels reproducible
    z_re = rng.standard_normal((m_int, m))
    z_im = rng.standard_normal((m_int, m))
    z_zero = rng.standard_normal(m)
    z_fold = rng.standard_normal(m) if n % 2 == 0 else None

    coeffs = np.zeros((m, n), dtype=complex)
    for idx, w in enumerate(freqs):
        f = cov_matrix(dmat, float(w), params, include_nugget=False)
        factor, _ = cholesky_with_jitter(f)
        zeta = (z_re[idx] + 1j * z_im[idx]) / np.sqrt(2.0)
        ordinate = factor @ zeta
        k = idx + 1
        coeffs[:, k] = ordinate
        coeffs[:, n - k] = np.conj(ordinate)

    f0 = cov_matrix(dmat, 0.0, params, include_nugget=False)
    factor0, _ = cholesky_with_jitter(f0)
    coeffs[:, 0] = factor0 @ z_zero
    if z_fold is not None:
        f_fold = cov_matrix(dmat, np.pi, params, include_nugget=False)
        factor_fold, _ = cholesky_with_jitter(f_fold)
        coeffs[:, n // 2] = factor_fold @ z_fold

    # synthesis of every site at once; symmetry is exact by construction
    y = np.fft.ifft(coeffs, axis=1) * n
    observations = np.sqrt(_TWO_PI / n) * np.roll(y, -1, axis=1)
    residue = float(np.abs(observations.imag).max())
    scale = max(1.0, float(np.abs(observations.real).max()))
    if residue > 1e-10 * scale:
        raise FloatingPointError(
            "inverse transform left an imaginary residue of %.3e" % residue
        )
    observations = observations.real.copy()

    if spec.include_measurement_error and params.nugget > 0:
        observations += rng.normal(0.0, np.sqrt(params.nugget), size=(m, n))

    ids = spec.site_ids if spec.site_ids else tuple("site%d" % i for i in range(m))
    return TimeSeriesPanel(locations=loc, observations=observations, site_ids=ids)


def simulate_white_panel(m: int, n: int, variance: float = 1.0, seed: int = 0,
                         locations=None, site_ids: tuple = ()) -> TimeSeriesPanel:
    """Panel of mutually independent Gaussian white-noise series.

    Useful as the null case of the independence test. Locations default to
    unit-spaced points on a line in the plane.
    """
    if m < 1:
        raise ValueError("need at least one site, got %d" % m)
    if n < 2:
        raise ValueError("series length must be at least 2, got %d" % n)
    if not (variance > 0 and np.isfinite(variance)):
        raise ValueError("variance must be positive, got %r" % variance)
    if locations is None:
        loc = np.column_stack([np.arange(m, dtype=float), np.zeros(m)])
    else:
        loc = np.atleast_2d(np.asarray(locations, dtype=float))
        if loc.shape[0] != m:
            raise ValueError("got %d locations for %d sites" % (loc.shape[0], m))
    rng = np.random.default_rng(seed)
    obs = rng.normal(0.0, np.sqrt(variance), size=(m, n))
    ids = site_ids if site_ids else tuple("site%d" % i for i in range(m))
    return TimeSeriesPanel(locations=loc, observations=obs, site_ids=ids)
