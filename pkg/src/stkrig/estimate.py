"""Frequency-variogram estimation of the covariance model.

Site pairs are grouped into distance bins. For a bin at distance h the
difference periodogram of each member pair is matched against the model
frequency variogram g_h(w) with the Whittle-type criterion

    Q(theta) = (1 / L) * sum_bins (1 / |bin|) * sum_pairs sum_k
               [ ln g_h(w_k; theta) + I_ij(w_k) / g_h(w_k; theta) ]

minimized over an unconstrained reparameterization of theta. Every quantity
the criterion needs from the data is the per-bin mean difference
periodogram, which is precomputed once per fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covmodel import (
    ModelParams,
    cov_freq,
    cov_zero,
    natural_names,
    pack_params,
    unpack_params,
    variogram_model,
)
from .numerics import OptimizerConfig, nelder_mead
from .spectral import SpectralPanel, TimeSeriesPanel, dft_panel, difference_periodogram

_TWO_PI = 2.0 * np.pi
_VARIOGRAM_FLOOR = 1e-300


class EvaluationError(ArithmeticError):
    """Criterion could not be evaluated at the requested parameters."""


class EstimationError(RuntimeError):
    """No restart of the optimizer produced a usable fit."""


class SingularHessianError(RuntimeError):
    """Criterion Hessian at the fit is numerically singular.

    Attributes
    ----------
    eigenvalues : numpy.ndarray
        Eigenvalues of the finite-difference Hessian, for diagnosis.
    """

    def __init__(self, message: str, eigenvalues: np.ndarray):
        super().__init__(message)
        self.eigenvalues = eigenvalues


@dataclass(frozen=True)
class DistanceBin:
    """A representative distance and the site pairs assigned to it."""

    distance: float
    pairs: tuple

    def __post_init__(self):
        if not (np.isfinite(self.distance) and self.distance > 0):
            raise ValueError("bin distance must be positive, got %r" % self.distance)
        if len(self.pairs) < 1:
            raise ValueError("a distance bin cannot be empty")
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))


@dataclass(frozen=True)
class DistanceBins:
    """Ordered collection of distance bins covering each site pair once."""

    bins: tuple

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(self.bins))
        if len(self.bins) < 1:
            raise ValueError("at least one distance bin is required")
        seen = set()
        for b in self.bins:
            for pair in b.pairs:
                if pair in seen:
                    raise ValueError("pair %r appears in more than one bin" % (pair,))
                seen.add(pair)

    def __len__(self) -> int:
        return len(self.bins)

    def __iter__(self):
        return iter(self.bins)

    def distances(self) -> np.ndarray:
        return np.array([b.distance for b in self.bins])

    def pair_counts(self) -> np.ndarray:
        return np.array([len(b.pairs) for b in self.bins])

    def summary(self) -> dict:
        return {
            "n_bins": len(self.bins),
            "distances": [float(b.distance) for b in self.bins],
            "pair_counts": [len(b.pairs) for b in self.bins],
        }


def build_distance_bins(locations, mode: str = "exact", n_bins: int | None = None,
                        tolerance: float | None = None) -> DistanceBins:
    """Group all site pairs by spatial separation.

    Parameters
    ----------
    locations : array_like
        Site coordinates, shape (m, d) with m >= 2.
    mode : str
        "exact" merges only distances equal up to the tolerance, so gridded
        designs get one bin per multiplicity class. "quantile" partitions the
        sorted pair distances into n_bins groups of near-equal pair count.
    n_bins : int, optional
        Number of groups for quantile mode.
    tolerance : float, optional
        Merge tolerance for exact mode. Defaults to 1e-9 times the largest
        pair distance.

    Returns
    -------
    DistanceBins
        Bins ordered by increasing representative distance; the
        representative is the mean of the member distances. Ties at equal
        distance from two representatives go to the smaller one.
    """
    loc = np.atleast_2d(np.asarray(locations, dtype=float))
    m = loc.shape[0]
    if m < 2:
        raise ValueError("need at least two sites to form pairs, got %d" % m)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    dists = np.array([float(np.linalg.norm(loc[i] - loc[j])) for i, j in pairs])
    if np.any(dists == 0.0):
        k = int(np.argmin(dists))
        raise ValueError("sites %d and %d are coincident" % pairs[k])
    order = np.argsort(dists, kind="stable")

    if mode == "exact":
        tol = float(tolerance) if tolerance is not None else 1e-9 * float(dists.max())
        groups = []
        current = [order[0]]
        for idx in order[1:]:
            if dists[idx] - dists[current[0]] <= tol:
                current.append(idx)
            else:
                groups.append(current)
                current = [idx]
        groups.append(current)
        reps = np.array([dists[g].mean() for g in groups])
        # honor the tie rule: each pair joins the nearest representative,
        # breaking exact midpoints toward the smaller distance
        assignment = [[] for _ in reps]
        for idx in order:
            gaps = np.abs(reps - dists[idx])
            assignment[int(np.argmin(gaps))].append(idx)
        bins = []
        for members in assignment:
            if not members:
                continue
            rep = float(dists[members].mean())
            bins.append(DistanceBin(rep, tuple(pairs[i] for i in members)))
    elif mode == "quantile":
        if n_bins is None or n_bins < 1:
            raise ValueError("quantile mode needs n_bins >= 1, got %r" % n_bins)
        chunks = [c for c in np.array_split(order, n_bins) if c.size > 0]
        bins = [
            DistanceBin(float(dists[c].mean()), tuple(pairs[i] for i in c))
            for c in chunks
        ]
    else:
        raise ValueError("mode must be 'exact' or 'quantile', got %r" % mode)
    bins.sort(key=lambda b: b.distance)
    return DistanceBins(tuple(bins))


def _binned_difference_periodograms(spectral: SpectralPanel, bins: DistanceBins,
                                    n_frequencies: int) -> np.ndarray:
    """Mean difference periodogram of each bin, shape (L, n_frequencies)."""
    out = np.empty((len(bins), n_frequencies))
    for l, b in enumerate(bins):
        acc = np.zeros(n_frequencies)
        for i, j in b.pairs:
            acc += difference_periodogram(spectral, i, j)[:n_frequencies]
        out[l] = acc / len(b.pairs)
    return out


def _criterion_terms(binned: np.ndarray, distances: np.ndarray, frequencies: np.ndarray,
                     params: ModelParams, approximate: bool = False) -> np.ndarray:
    """Per (bin, frequency) criterion terms; shape matches binned."""
    h = distances[:, None]
    w = frequencies[None, :]
    if approximate:
        # expansion of the exact terms for |rho| < 1 around the total sill
        sill = np.asarray(cov_zero(w, params)) + params.nugget / _TWO_PI
        sill = np.broadcast_to(sill, binned.shape)
        ratio = np.asarray(cov_freq(h, w, params)) / sill
        terms = np.log(sill) + ratio + binned / (2.0 * sill) * ratio
    else:
        g = np.asarray(variogram_model(h, w, params))
        g = np.maximum(g, _VARIOGRAM_FLOOR)
        terms = np.log(g) + binned / g
    if not np.all(np.isfinite(terms)):
        raise EvaluationError(
            "criterion is not finite at sigma_e2=%r, nu=%r, c_coeffs=%r, nugget=%r"
            % (params.sigma_e2, params.nu, params.c_coeffs, params.nugget)
        )
    return terms


def whittle_criterion(spectral: SpectralPanel, bins: DistanceBins, params: ModelParams,
                      n_frequencies: int | None = None, approximate: bool = False) -> float:
    """Evaluate the estimation criterion at the given parameters.

    Parameters
    ----------
    spectral : SpectralPanel
        Fourier ordinates of the observed panel.
    bins : DistanceBins
        Pair grouping; pair indices refer to the panel's site order.
    params : ModelParams
        Point at which to evaluate.
    n_frequencies : int, optional
        Use only the first n_frequencies interior ordinates. Defaults to the
        full grid.
    approximate : bool
        Evaluate the expansion-based variant instead of the exact criterion.
        Intended for comparisons only, not as a fitting objective.
    """
    m_total = spectral.n_frequencies
    m_use = m_total if n_frequencies is None else int(n_frequencies)
    if not 1 <= m_use <= m_total:
        raise ValueError(
            "n_frequencies must lie in [1, %d], got %r" % (m_total, n_frequencies)
        )
    for b in bins:
        for i, j in b.pairs:
            if not (0 <= i < spectral.m and 0 <= j < spectral.m):
                raise ValueError("bin pair %r is out of range for %d sites" % ((i, j), spectral.m))
    binned = _binned_difference_periodograms(spectral, bins, m_use)
    terms = _criterion_terms(binned, bins.distances(), spectral.frequencies[:m_use],
                             params, approximate)
    return float(terms.sum(axis=1).mean())


@dataclass(frozen=True)
class FitConfig:
    """Settings for fitting the covariance model to a panel.

    Parameters
    ----------
    n_coeffs : int
        Number of cosine terms p in the inverse-range expansion; p = 0 forces
        a frequency-flat range.
    nu_fixed : float or None
        Hold the smoothness at this value instead of estimating it.
    fit_nugget : bool
        Estimate a measurement-error variance alongside the field parameters.
    n_frequencies : int or None
        Truncate the frequency grid; None uses every interior ordinate.
    bins_mode : str
        "exact" or "quantile", passed to build_distance_bins.
    n_bins : int or None
        Bin count for quantile mode.
    bin_tolerance : float or None
        Merge tolerance for exact mode.
    remove_mean : bool
        Subtract site means before the transform.
    multistart : int
        Number of optimizer restarts from randomized starting points.
    seed : int
        Seed for the restart draws; fits are reproducible given the seed.
    optimizer : OptimizerConfig
        Simplex settings shared by all restarts.
    compute_covariance : bool
        Attach the asymptotic covariance of the estimates to the result.
        Failures there degrade to a warning rather than failing the fit.
    """

    n_coeffs: int = 1
    nu_fixed: float | None = None
    fit_nugget: bool = False
    n_frequencies: int | None = None
    bins_mode: str = "exact"
    n_bins: int | None = None
    bin_tolerance: float | None = None
    remove_mean: bool = True
    multistart: int = 5
    seed: int = 0
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(
            max_iterations=4000, tolerance_f=1e-9, tolerance_x=1e-6, initial_step=0.25
        )
    )
    compute_covariance: bool = True

    def __post_init__(self):
        if self.n_coeffs < 0:
            raise ValueError("n_coeffs must be nonnegative, got %d" % self.n_coeffs)
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1, got %d" % self.multistart)
        if self.nu_fixed is not None and not np.isfinite(self.nu_fixed):
            raise ValueError("nu_fixed must be finite, got %r" % self.nu_fixed)

    def to_dict(self) -> dict:
        return {
            "n_coeffs": self.n_coeffs,
            "nu_fixed": None if self.nu_fixed is None else float(self.nu_fixed),
            "fit_nugget": self.fit_nugget,
            "n_frequencies": self.n_frequencies,
            "bins_mode": self.bins_mode,
            "n_bins": self.n_bins,
            "bin_tolerance": self.bin_tolerance,
            "remove_mean": self.remove_mean,
            "multistart": self.multistart,
            "seed": self.seed,
            "optimizer": {
                "max_iterations": self.optimizer.max_iterations,
                "tolerance_f": self.optimizer.tolerance_f,
                "tolerance_x": self.optimizer.tolerance_x,
                "initial_step": self.optimizer.initial_step,
            },
            "compute_covariance": self.compute_covariance,
        }


@dataclass
class FitResult:
    """Outcome of a model fit.

    Attributes
    ----------
    params : ModelParams
        Estimated parameters.
    criterion : float
        Criterion value at the estimate.
    covariance : numpy.ndarray or None
        Asymptotic covariance of the natural-scale estimates, ordered as in
        param_names, or None when unavailable.
    param_names : list of str
        Names of the estimated coordinates.
    converged : bool
        Whether the winning restart met the optimizer tolerances.
    n_frequencies : int
        Number of interior ordinates used.
    bins : dict
        Distance-bin summary (distances and pair counts).
    n_restarts : int
        Restarts attempted.
    """

    params: ModelParams
    criterion: float
    covariance: np.ndarray | None
    param_names: list
    converged: bool
    n_frequencies: int
    bins: dict
    n_restarts: int

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "criterion": float(self.criterion),
            "covariance": None if self.covariance is None else
                [[float(v) for v in row] for row in np.asarray(self.covariance)],
            "param_names": list(self.param_names),
            "converged": bool(self.converged),
            "n_frequencies": int(self.n_frequencies),
            "bins": self.bins,
            "n_restarts": int(self.n_restarts),
        }


def fit(panel: TimeSeriesPanel, config: FitConfig = FitConfig()) -> FitResult:
    """Estimate the covariance model from an observed panel.

    Runs the simplex optimizer from several randomized starting points in the
    unconstrained parameterization and keeps the best finisher. The starting
    scale is read off the pooled periodogram mean; cosine coefficients start
    at independent N(0, 0.5^2) draws.

    Raises
    ------
    EstimationError
        If every restart fails to produce a finite criterion value.
    """
    spectral = dft_panel(panel, remove_mean=config.remove_mean)
    bins = build_distance_bins(
        panel.locations, mode=config.bins_mode, n_bins=config.n_bins,
        tolerance=config.bin_tolerance,
    )
    m_use = spectral.n_frequencies if config.n_frequencies is None else int(config.n_frequencies)
    if not 1 <= m_use <= spectral.n_frequencies:
        raise ValueError(
            "n_frequencies must lie in [1, %d], got %r"
            % (spectral.n_frequencies, config.n_frequencies)
        )
    binned = _binned_difference_periodograms(spectral, bins, m_use)
    freqs = spectral.frequencies[:m_use]
    dists = bins.distances()
    d = panel.d
    p = config.n_coeffs
    nu_fixed = config.nu_fixed

    if nu_fixed is not None and nu_fixed <= d / 4.0:
        raise ValueError("nu_fixed must exceed d/4 = %g, got %r" % (d / 4.0, nu_fixed))

    def objective(vec: np.ndarray) -> float:
        try:
            params = unpack_params(vec, p, d=d, nu_fixed=nu_fixed,
                                   fit_nugget=config.fit_nugget)
            terms = _criterion_terms(binned, dists, freqs, params)
        except (EvaluationError, ValueError, OverflowError, FloatingPointError):
            return np.inf
        return float(terms.sum(axis=1).mean())

    pooled = float(np.mean([np.mean(np.abs(spectral.dft[i, :m_use]) ** 2)
                            for i in range(spectral.m)]))
    log_scale = np.log(max(pooled, 1e-300))
    rng = np.random.default_rng(config.seed)
    best = None
    for _ in range(config.multistart):
        coeffs = rng.normal(0.0, 0.5, size=p + 1)
        start = [log_scale]
        if nu_fixed is None:
            start.append(0.0)
        start.extend(coeffs)
        if config.fit_nugget:
            start.append(log_scale + np.log(_TWO_PI) - np.log(10.0))
        start_vec = np.asarray(start)
        if not np.isfinite(objective(start_vec)):
            continue
        result = nelder_mead(objective, start_vec, config.optimizer)
        if best is None or result.fun < best.fun:
            best = result
    if best is None or not np.isfinite(best.fun):
        raise EstimationError(
            "all %d restarts failed to reach a finite criterion" % config.multistart
        )

    params_hat = unpack_params(best.x, p, d=d, nu_fixed=nu_fixed,
                               fit_nugget=config.fit_nugget)
    names = natural_names(p, nu_fixed=nu_fixed is not None, fit_nugget=config.fit_nugget)
    cov = None
    if config.compute_covariance:
        try:
            cov = asymptotic_covariance(
                panel, bins, params_hat, n_frequencies=m_use,
                nu_fixed=nu_fixed, fit_nugget=config.fit_nugget,
                remove_mean=config.remove_mean,
            )
        except (SingularHessianError, EvaluationError, np.linalg.LinAlgError) as err:
            warnings.warn("asymptotic covariance unavailable: %s" % err)
    return FitResult(
        params=params_hat,
        criterion=float(best.fun),
        covariance=cov,
        param_names=names,
        converged=bool(best.converged),
        n_frequencies=m_use,
        bins=bins.summary(),
        n_restarts=config.multistart,
    )


def asymptotic_covariance(panel: TimeSeriesPanel, bins: DistanceBins, params_hat: ModelParams,
                          n_frequencies: int | None = None, *, nu_fixed: float | None = None,
                          fit_nugget: bool = False, step: float = 1e-4,
                          remove_mean: bool = True) -> np.ndarray:
    """Sandwich covariance of the fitted parameters on the natural scale.

    The criterion Hessian is computed by central finite differences in the
    unconstrained coordinates, the middle term aggregates the per-frequency
    score vectors (frequencies are asymptotically uncorrelated, so scores are
    clustered by frequency), and the result is mapped to the natural scale by
    the delta method. Row and column order follows
    covmodel.natural_names(...).

    Raises
    ------
    SingularHessianError
        When the finite-difference Hessian cannot be inverted; the error
        carries its eigenvalues.
    """
    spectral = dft_panel(panel, remove_mean=remove_mean)
    m_use = spectral.n_frequencies if n_frequencies is None else int(n_frequencies)
    if not 1 <= m_use <= spectral.n_frequencies:
        raise ValueError(
            "n_frequencies must lie in [1, %d], got %r"
            % (spectral.n_frequencies, n_frequencies)
        )
    binned = _binned_difference_periodograms(spectral, bins, m_use)
    freqs = spectral.frequencies[:m_use]
    dists = bins.distances()
    p = params_hat.n_coeffs
    d = params_hat.d

    vec0 = pack_params(params_hat, nu_fixed=nu_fixed is not None, fit_nugget=fit_nugget)
    k = vec0.size

    def per_frequency(vec: np.ndarray) -> np.ndarray:
        params = unpack_params(vec, p, d=d, nu_fixed=params_hat.nu if nu_fixed is not None else None,
                               fit_nugget=fit_nugget)
        return _criterion_terms(binned, dists, freqs, params).mean(axis=0)

    # scores per frequency: central differences coordinate by coordinate
    plus_q = np.empty(k)
    minus_q = np.empty(k)
    scores = np.empty((k, m_use))
    for j in range(k):
        e = np.zeros(k)
        e[j] = step
        up = per_frequency(vec0 + e)
        down = per_frequency(vec0 - e)
        scores[j] = (up - down) / (2.0 * step)
        plus_q[j] = up.sum()
        minus_q[j] = down.sum()

    centered = scores - scores.mean(axis=1, keepdims=True)
    middle = centered @ centered.T

    q0 = float(per_frequency(vec0).sum())
    hess = np.empty((k, k))
    for j in range(k):
        hess[j, j] = (plus_q[j] - 2.0 * q0 + minus_q[j]) / step**2
    for j in range(k):
        for l in range(j + 1, k):
            ej = np.zeros(k)
            el = np.zeros(k)
            ej[j] = step
            el[l] = step
            qpp = float(per_frequency(vec0 + ej + el).sum())
            qpm = float(per_frequency(vec0 + ej - el).sum())
            qmp = float(per_frequency(vec0 - ej + el).sum())
            qmm = float(per_frequency(vec0 - ej - el).sum())
            hess[j, l] = hess[l, j] = (qpp - qpm - qmp + qmm) / (4.0 * step**2)

    eigvals = np.linalg.eigvalsh((hess + hess.T) / 2.0)
    if np.min(np.abs(eigvals)) <= 1e-12 * max(1.0, np.max(np.abs(eigvals))):
        raise SingularHessianError(
            "criterion Hessian is numerically singular; eigenvalues %s" % eigvals,
            eigvals,
        )
    hinv = np.linalg.inv(hess)
    cov_unc = hinv @ middle @ hinv
    cov_unc = (cov_unc + cov_unc.T) / 2.0

    # delta method to the natural scale
    jac = np.ones(k)
    pos = 0
    jac[pos] = params_hat.sigma_e2
    pos += 1
    if nu_fixed is None:
        jac[pos] = params_hat.nu - d / 4.0
        pos += 1
    pos += p + 1
    if fit_nugget:
        jac[pos] = params_hat.nugget
    cov_nat = cov_unc * np.outer(jac, jac)
    return (cov_nat + cov_nat.T) / 2.0
