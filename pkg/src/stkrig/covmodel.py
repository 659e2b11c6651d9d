"""Matern-type space-frequency covariance family.

The model describes a random field through, at each temporal frequency w, a
spatial covariance of Matern form whose inverse range |c(w)| varies with
frequency. With mu = 2 nu - d / 2, the cross-spectrum between sites at
spatial distance h > 0 is

    C(h, w) = sigma_e^2 / ((2 pi)^(d/2) 2^(2 nu - 1) Gamma(2 nu))
              * (h / |c(w)|)^mu * K_mu(h |c(w)|)

and its h -> 0 limit, the auto-spectrum of the noise-free field, is

    C(0, w) = sigma_e^2 Gamma(mu) / ((2 pi)^(d/2) 2^(d/2) Gamma(2 nu)
              * |c(w)|^(2 mu)).

The squared inverse range follows a log-cosine expansion
|c(w)|^2 = exp(b_0 + sum_k b_k cos(k w)), so a single coefficient b_0 gives a
frequency-flat (separable) model and higher terms bend the range across
frequencies. Measurement error enters as a nugget: an additive white-noise
variance whose flat spectral contribution sigma_n^2 / (2 pi) appears in
auto-spectra and frequency variograms but never in cross-covariances between
distinct sites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _sspec

from .numerics import log_gamma

_TWO_PI = 2.0 * np.pi
_VARIOGRAM_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the space-frequency covariance model.

    Parameters
    ----------
    sigma_e2 : float
        Innovation scale sigma_e^2 > 0.
    nu : float
        Smoothness, must exceed d / 4.
    c_coeffs : tuple of float
        Log-cosine coefficients (b_0, ..., b_p) of the squared inverse range.
    nugget : float
        Measurement error variance sigma_n^2 >= 0.
    d : int
        Spatial dimension of the site coordinates.
    eq310_constant : bool
        Compatibility switch for an alternative zero-distance constant that
        is 2 pi times the default one (d = 2 only). Leave off unless
        reproducing output of software that used that convention.
    """

    sigma_e2: float
    nu: float
    c_coeffs: tuple
    nugget: float = 0.0
    d: int = 2
    eq310_constant: bool = False

    def __post_init__(self):
        coeffs = tuple(float(b) for b in np.atleast_1d(self.c_coeffs))
        object.__setattr__(self, "c_coeffs", coeffs)
        if len(coeffs) < 1:
            raise ValueError("c_coeffs needs at least the constant term b_0")
        if not all(np.isfinite(b) for b in coeffs):
            raise ValueError("c_coeffs must be finite, got %r" % (coeffs,))
        if not (np.isfinite(self.sigma_e2) and self.sigma_e2 > 0):
            raise ValueError("sigma_e2 must be positive, got %r" % self.sigma_e2)
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("spatial dimension d must be a positive integer, got %r" % self.d)
        object.__setattr__(self, "d", int(self.d))
        if not (np.isfinite(self.nu) and self.nu > self.d / 4.0):
            raise ValueError(
                "smoothness nu must exceed d/4 = %g, got %r" % (self.d / 4.0, self.nu)
            )
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise ValueError("nugget must be nonnegative, got %r" % self.nugget)
        if self.eq310_constant and self.d != 2:
            raise ValueError("eq310_constant is defined only for d = 2")

    @property
    def n_coeffs(self) -> int:
        """Number of cosine terms p (excludes the constant b_0)."""
        return len(self.c_coeffs) - 1

    def to_dict(self) -> dict:
        out = {
            "sigma_e2": float(self.sigma_e2),
            "nu": float(self.nu),
            "c_coeffs": [float(b) for b in self.c_coeffs],
            "nugget": float(self.nugget),
            "d": int(self.d),
        }
        if self.eq310_constant:
            out["eq310_constant"] = True
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        try:
            return cls(
                sigma_e2=float(data["sigma_e2"]),
                nu=float(data["nu"]),
                c_coeffs=tuple(float(b) for b in data["c_coeffs"]),
                nugget=float(data.get("nugget", 0.0)),
                d=int(data.get("d", 2)),
                eq310_constant=bool(data.get("eq310_constant", False)),
            )
        except KeyError as missing:
            raise ValueError("model parameters missing required key %s" % missing) from None


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite values" % name)
    return arr


def _scalar_like(value: np.ndarray, *inputs):
    if all(np.isscalar(x) or np.asarray(x).ndim == 0 for x in inputs):
        return float(value)
    return value


def c_mod_sq(omega, params: ModelParams):
    """Squared inverse range |c(w)|^2 = exp(b_0 + sum_k b_k cos(k w))."""
    om = _as_float_array(omega, "omega")
    log_c2 = np.full(om.shape, params.c_coeffs[0])
    for k, bk in enumerate(params.c_coeffs[1:], start=1):
        log_c2 = log_c2 + bk * np.cos(k * om)
    return _scalar_like(np.exp(log_c2), omega)


def cov_zero(omega, params: ModelParams):
    """Zero-distance value C(0, w), the auto-spectrum of the noise-free field."""
    om = _as_float_array(omega, "omega")
    c2 = np.asarray(c_mod_sq(om, params))
    nu, d = params.nu, params.d
    mu = 2.0 * nu - d / 2.0
    if params.eq310_constant:
        value = params.sigma_e2 / (2.0 * (2.0 * nu - 1.0) * c2 ** (2.0 * nu - 1.0))
    else:
        log_const = (
            np.log(params.sigma_e2)
            - (d / 2.0) * np.log(_TWO_PI)
            - (d / 2.0) * np.log(2.0)
            + log_gamma(mu)
            - log_gamma(2.0 * nu)
        )
        value = np.exp(log_const - mu * np.log(c2))
    return _scalar_like(value, omega)


def cov_freq(h, omega, params: ModelParams):
    """Space-frequency covariance C(h, w) at spatial distance h >= 0.

    Parameters
    ----------
    h : float or array_like
        Nonnegative spatial distances. Broadcast against omega.
    omega : float or array_like
        Temporal frequencies.
    params : ModelParams

    Returns
    -------
    float or numpy.ndarray
        C(h, w), strictly positive and decreasing in h.
    """
    h_in = _as_float_array(h, "h")
    if np.any(h_in < 0):
        raise ValueError("spatial distance h must be nonnegative, got min %r" % float(h_in.min()))
    om = _as_float_array(omega, "omega")
    h_b, om_b = np.broadcast_arrays(h_in, om)
    out = np.empty(h_b.shape, dtype=float)

    zero = h_b == 0.0
    if np.any(zero):
        g0 = np.broadcast_to(np.asarray(cov_zero(om_b, params)), h_b.shape)
        out[zero] = g0[zero]
    if np.any(~zero):
        nu, d = params.nu, params.d
        mu = 2.0 * nu - d / 2.0
        hv = h_b[~zero]
        c_abs = np.sqrt(np.asarray(c_mod_sq(om_b[~zero], params)))
        x = hv * c_abs
        log_pref = (
            np.log(params.sigma_e2)
            - (d / 2.0) * np.log(_TWO_PI)
            - (2.0 * nu - 1.0) * np.log(2.0)
            - log_gamma(2.0 * nu)
        )
        # x^mu * K_mu(x) done on the exponentially scaled function so large
        # distances underflow gracefully instead of turning into 0 * inf
        kve = _sspec.kve(mu, x)
        vals = np.exp(log_pref + mu * (np.log(hv) - np.log(c_abs)) - x) * kve
        out[~zero] = vals
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("covariance evaluation produced non-finite values")
    return _scalar_like(out, h, omega)


def corr_freq(h, omega, params: ModelParams):
    """Spatial correlation at frequency w,
    rho(h, w) = (h |c(w)|)^mu K_mu(h |c(w)|) / (2^(mu - 1) Gamma(mu)).

    Equals cov_freq / cov_zero and does not depend on sigma_e2 or the nugget.
    """
    h_in = _as_float_array(h, "h")
    if np.any(h_in < 0):
        raise ValueError("spatial distance h must be nonnegative, got min %r" % float(h_in.min()))
    om = _as_float_array(omega, "omega")
    h_b, om_b = np.broadcast_arrays(h_in, om)
    out = np.ones(h_b.shape, dtype=float)
    pos = h_b > 0.0
    if np.any(pos):
        mu = 2.0 * params.nu - params.d / 2.0
        x = h_b[pos] * np.sqrt(np.asarray(c_mod_sq(om_b[pos], params)))
        kve = _sspec.kve(mu, x)
        out[pos] = np.exp(mu * np.log(x) - x - (mu - 1.0) * np.log(2.0) - log_gamma(mu)) * kve
    return _scalar_like(out, h, omega)


def st_spectral_density(wavenumber, omega, params: ModelParams):
    """Full spatio-temporal spectral density
    f(lambda, w) = sigma_e^2 / ((2 pi)^d (||lambda||^2 + |c(w)|^2)^(2 nu)).

    Parameters
    ----------
    wavenumber : array_like
        Spatial wave numbers; the last axis must have length d.
    omega : float or array_like
        Temporal frequencies, broadcast against the leading axes of
        wavenumber.
    """
    lam = _as_float_array(wavenumber, "wavenumber")
    if lam.shape[-1] != params.d:
        raise ValueError(
            "wavenumber last axis has length %d, expected d=%d" % (lam.shape[-1], params.d)
        )
    norm_sq = np.sum(lam * lam, axis=-1)
    om = _as_float_array(omega, "omega")
    c2 = np.asarray(c_mod_sq(om, params))
    value = params.sigma_e2 / (_TWO_PI ** params.d * (norm_sq + c2) ** (2.0 * params.nu))
    return _scalar_like(value, omega, norm_sq)


def variogram_model(h, omega, params: ModelParams):
    """Model frequency variogram
    g_h(w) = 2 [ C(0, w) + sigma_n^2 / (2 pi) - C(h, w) ], h > 0.

    This is the expected value of the difference periodogram of two sites a
    distance h apart. The measurement-error spectrum enters the two
    auto-spectra but not the cross term, hence the single nugget summand.
    """
    h_in = _as_float_array(h, "h")
    if np.any(h_in <= 0):
        raise ValueError(
            "frequency variogram is defined for strictly positive distances, got min %r"
            % float(h_in.min())
        )
    om = _as_float_array(omega, "omega")
    g0 = np.asarray(cov_zero(om, params)) + params.nugget / _TWO_PI
    value = 2.0 * (g0 - np.asarray(cov_freq(h_in, om, params)))
    return _scalar_like(value, h, omega)


def cov_matrix(distances, omega, params: ModelParams, include_nugget: bool = True) -> np.ndarray:
    """Spatial covariance matrix at one frequency from a distance matrix.

    Off-diagonal entries are C(h_ij, w); diagonal entries are C(0, w) plus,
    when include_nugget is set, the measurement error spectrum
    sigma_n^2 / (2 pi).
    """
    dmat = _as_float_array(distances, "distances")
    if dmat.ndim != 2 or dmat.shape[0] != dmat.shape[1]:
        raise ValueError("distances must be a square matrix, got shape %s" % (dmat.shape,))
    f = np.asarray(cov_freq(dmat, float(omega), params), dtype=float)
    f = np.atleast_2d(f)
    if include_nugget and params.nugget > 0:
        f = f + (params.nugget / _TWO_PI) * np.eye(dmat.shape[0])
    return f


def pack_params(params: ModelParams, nu_fixed: bool = False, fit_nugget: bool = False) -> np.ndarray:
    """Map model parameters to an unconstrained vector for optimization.

    Layout: [log sigma_e^2, (log(nu - d/4) unless nu is held fixed),
    b_0, ..., b_p, (log nugget when the nugget is estimated)].
    """
    vec = [np.log(params.sigma_e2)]
    if not nu_fixed:
        vec.append(np.log(params.nu - params.d / 4.0))
    vec.extend(params.c_coeffs)
    if fit_nugget:
        if params.nugget <= 0:
            raise ValueError("cannot place a zero nugget on the log scale")
        vec.append(np.log(params.nugget))
    return np.asarray(vec, dtype=float)


def unpack_params(vector, n_coeffs: int, d: int = 2, nu_fixed=None,
                  fit_nugget: bool = False) -> ModelParams:
    """Inverse of pack_params.

    Parameters
    ----------
    vector : array_like
        Unconstrained coordinates.
    n_coeffs : int
        Number of cosine terms p (the coefficient block has p + 1 entries).
    d : int
        Spatial dimension.
    nu_fixed : float or None
        When a float, nu is held at that value and the vector carries no
        smoothness coordinate.
    fit_nugget : bool
        Whether the vector ends with a log nugget coordinate.
    """
    vec = np.asarray(vector, dtype=float)
    expected = 1 + (0 if nu_fixed is not None else 1) + (n_coeffs + 1) + (1 if fit_nugget else 0)
    if vec.ndim != 1 or vec.size != expected:
        raise ValueError(
            "expected %d unconstrained coordinates, got shape %s" % (expected, (vec.shape,))
        )
    pos = 0
    sigma_e2 = float(np.exp(vec[pos]))
    pos += 1
    if nu_fixed is None:
        nu = d / 4.0 + float(np.exp(vec[pos]))
        pos += 1
    else:
        nu = float(nu_fixed)
    coeffs = tuple(float(b) for b in vec[pos : pos + n_coeffs + 1])
    pos += n_coeffs + 1
    nugget = float(np.exp(vec[pos])) if fit_nugget else 0.0
    return ModelParams(sigma_e2=sigma_e2, nu=nu, c_coeffs=coeffs, nugget=nugget, d=d)


def natural_names(n_coeffs: int, nu_fixed: bool = False, fit_nugget: bool = False) -> list:
    """Names of the natural-scale parameters in pack_params order."""
    names = ["sigma_e2"]
    if not nu_fixed:
        names.append("nu")
    names.extend("b%d" % k for k in range(n_coeffs + 1))
    if fit_nugget:
        names.append("nugget")
    return names
