"""Shared numerical kernels: special functions, the discrete Fourier transform
at canonical frequencies, a Nelder-Mead driver, and regularized Hermitian
positive definite solves.

Every routine in this module is deterministic. The transform pair uses the
normalization 1 / sqrt(2 * pi * n) so that the squared modulus of a Fourier
ordinate estimates spectral density directly, and treats the input as observed
at times t = 1, ..., n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg as _slinalg
from scipy import optimize as _sopt
from scipy import special as _sspec

# Relative diagonal loadings tried, in order, when a Cholesky factorization
# fails. Scaled by trace(A) / dim so the ladder is unit-free.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix stays non positive definite after the whole
    jitter ladder has been tried.

    Attributes
    ----------
    jitter : float
        Largest absolute diagonal loading that was attempted.
    """

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the simplex minimizer.

    Parameters
    ----------
    max_iterations : int
        Iteration cap before the search gives up.
    tolerance_f : float
        Absolute spread of objective values across the simplex at which the
        search stops.
    tolerance_x : float
        Absolute spread of vertex coordinates at which the search stops.
    initial_step : float
        Offset added to each coordinate of the start point to build the
        initial simplex.
    """

    max_iterations: int = 5000
    tolerance_f: float = 1e-10
    tolerance_x: float = 1e-8
    initial_step: float = 0.1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1, got %d" % self.max_iterations)
        if not (self.tolerance_f > 0 and np.isfinite(self.tolerance_f)):
            raise ValueError("tolerance_f must be positive and finite")
        if not (self.tolerance_x > 0 and np.isfinite(self.tolerance_x)):
            raise ValueError("tolerance_x must be positive and finite")
        if not (self.initial_step > 0 and np.isfinite(self.initial_step)):
            raise ValueError("initial_step must be positive and finite")


class NelderMeadResult(NamedTuple):
    x: np.ndarray
    fun: float
    converged: bool


class HpdSolution(NamedTuple):
    x: np.ndarray
    jitter: float


def log_gamma(x):
    """Natural log of the gamma function for positive real arguments.

    Accepts scalars or arrays; rejects non-positive or non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise ValueError("log_gamma requires at least one argument")
    if not np.all(np.isfinite(arr)):
        raise ValueError("log_gamma argument must be finite")
    if np.any(arr <= 0.0):
        raise ValueError("log_gamma argument must be positive, got min %r" % float(arr.min()))
    out = _sspec.gammaln(arr)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def bessel_k(order, x):
    """Modified Bessel function of the second kind, K_order(x).

    Uses the evenness of K in its order, so negative orders are allowed.
    Arguments must be strictly positive; results that overflow the double
    range raise OverflowError.

    Parameters
    ----------
    order : float
        Order of the function. Finite real number.
    x : float or array_like
        Strictly positive evaluation points.
    """
    if not np.isfinite(order):
        raise ValueError("bessel_k order must be finite, got %r" % order)
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise ValueError("bessel_k requires at least one evaluation point")
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_k argument must be finite")
    if np.any(arr <= 0.0):
        raise ValueError("bessel_k argument must be strictly positive, got min %r" % float(arr.min()))
    out = _sspec.kv(abs(float(order)), arr)
    if np.any(np.isinf(out)):
        raise OverflowError(
            "bessel_k overflowed for order %r at argument %r"
            % (order, float(arr[np.isinf(out)].min()))
        )
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def dft_forward(series) -> np.ndarray:
    """Discrete Fourier transform of a real series at frequencies
    w_k = 2 pi k / n for k = 0, ..., floor(n / 2).

    The series is treated as observed at t = 1, ..., n and the transform is
    J(w_k) = (2 pi n)^(-1/2) * sum_t z_t exp(-i t w_k).

    Parameters
    ----------
    series : array_like
        Real observations, length n >= 2.

    Returns
    -------
    numpy.ndarray
        Complex vector of length floor(n / 2) + 1.
    """
    z = np.asarray(series, dtype=float)
    if z.ndim != 1:
        raise ValueError("series must be one dimensional, got shape %s" % (z.shape,))
    n = z.size
    if n < 2:
        raise ValueError("series must have length at least 2, got %d" % n)
    if not np.all(np.isfinite(z)):
        raise ValueError("series contains non-finite values")
    k = np.arange(n // 2 + 1)
    # numpy indexes time from 0; the extra phase shifts it to t = 1, ..., n
    phase = np.exp(-2j * np.pi * k / n)
    return phase * np.fft.rfft(z) / np.sqrt(2.0 * np.pi * n)


def dft_inverse(coeffs, n: int) -> np.ndarray:
    """Invert a full grid of Fourier coefficients back to a real series.

    Expects coefficients at all n canonical frequencies w_k = 2 pi k / n,
    k = 0, ..., n - 1, satisfying the conjugate symmetry of a real series.
    Symmetry is checked and violations beyond a small tolerance are rejected.

    Parameters
    ----------
    coeffs : array_like
        Complex coefficients, length n, under the same normalization as
        dft_forward.
    n : int
        Length of the output series.

    Returns
    -------
    numpy.ndarray
        Real series of length n indexed by t = 1, ..., n.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 1 or c.size != n:
        raise ValueError("coeffs must be a vector of length n=%d, got shape %s" % (n, (c.shape,)))
    if n < 2:
        raise ValueError("n must be at least 2, got %d" % n)
    if not np.all(np.isfinite(c)):
        raise ValueError("coeffs contain non-finite values")
    scale = max(1.0, float(np.abs(c).max()))
    tol = 1e-8 * scale
    mirrored = np.conj(c[(-np.arange(n)) % n])
    worst = float(np.abs(c - mirrored).max())
    if worst > tol:
        raise ValueError(
            "coefficients violate conjugate symmetry by %.3e (tolerance %.3e); "
            "a real series requires J(w_{n-k}) = conj(J(w_k))" % (worst, tol)
        )
    # synthesis: z_t = sqrt(2 pi / n) * sum_k J_k exp(i t w_k), t = 1, ..., n
    y = np.fft.ifft(c) * n
    out = np.sqrt(2.0 * np.pi / n) * np.roll(y, -1)
    return out.real


def nelder_mead(objective: Callable[[np.ndarray], float], x0,
                config: OptimizerConfig = OptimizerConfig()) -> NelderMeadResult:
    """Minimize a scalar function with the downhill simplex method.

    Parameters
    ----------
    objective : callable
        Maps a parameter vector to a float. May return +inf to veto a region.
    x0 : array_like
        Start point. The objective must be finite here.
    config : OptimizerConfig
        Termination settings.

    Returns
    -------
    NelderMeadResult
        Best vertex found, its objective value, and a convergence flag. The
        returned value never exceeds the value at the start point.
    """
    start = np.atleast_1d(np.asarray(x0, dtype=float))
    if start.ndim != 1:
        raise ValueError("x0 must be a vector, got shape %s" % (start.shape,))
    f0 = float(objective(start))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the start point (value %r)" % f0)

    dim = start.size
    simplex = np.repeat(start[None, :], dim + 1, axis=0)
    for i in range(dim):
        simplex[i + 1, i] += config.initial_step

    res = _sopt.minimize(
        lambda v: float(objective(v)),
        start,
        method="Nelder-Mead",
        options={
            "maxiter": config.max_iterations,
            "maxfev": 50 * config.max_iterations,
            "fatol": config.tolerance_f,
            "xatol": config.tolerance_x,
            "initial_simplex": simplex,
        },
    )
    x = np.asarray(res.x, dtype=float)
    fun = float(res.fun)
    if fun > f0:
        x, fun = start, f0
    return NelderMeadResult(x=x, fun=fun, converged=bool(res.success))


def cholesky_with_jitter(matrix) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a Hermitian matrix, adding diagonal jitter
    from a fixed ladder when the plain factorization fails.

    Returns the factor and the absolute jitter that was added (0.0 when none
    was needed). Raises SingularMatrixError when the whole ladder fails.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %s" % (a.shape,))
    dim = a.shape[0]
    scale = float(np.abs(np.trace(a)).real) / dim
    if scale <= 0.0 or not np.isfinite(scale):
        scale = 1.0
    last = 0.0
    for level in JITTER_LADDER:
        jitter = level * scale
        last = jitter
        try:
            loaded = a if jitter == 0.0 else a + jitter * np.eye(dim)
            factor = _slinalg.cholesky(loaded, lower=True)
            return factor, jitter
        except np.linalg.LinAlgError:
            continue
        except _slinalg.LinAlgError:  # pragma: no cover - alias of the above in scipy
            continue
    raise SingularMatrixError(
        "matrix is not positive definite even with diagonal jitter %.3e" % last, last
    )


def hpd_solve(matrix, rhs) -> HpdSolution:
    """Solve A x = b for Hermitian positive definite A via Cholesky, with
    escalating diagonal jitter as a fallback for near-singular systems.

    Parameters
    ----------
    matrix : array_like
        Hermitian positive definite matrix. Hermitian symmetry is checked to
        a tolerance of 1e-10 relative to the largest entry.
    rhs : array_like
        Right hand side vector or matrix.

    Returns
    -------
    HpdSolution
        Solution and the diagonal jitter that was used (0.0 normally).
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %s" % (a.shape,))
    b = np.asarray(rhs)
    if b.shape[0] != a.shape[0]:
        raise ValueError(
            "rhs leading dimension %d does not match matrix size %d" % (b.shape[0], a.shape[0])
        )
    scale = max(1.0, float(np.abs(a).max()))
    asym = float(np.abs(a - a.conj().T).max())
    if asym > 1e-10 * scale:
        raise ValueError(
            "matrix is not Hermitian: max asymmetry %.3e exceeds tolerance %.3e"
            % (asym, 1e-10 * scale)
        )
    dim = a.shape[0]
    tr = float(np.abs(np.trace(a)).real) / dim
    if tr <= 0.0 or not np.isfinite(tr):
        tr = 1.0
    last = 0.0
    for level in JITTER_LADDER:
        jitter = level * tr
        last = jitter
        try:
            loaded = a if jitter == 0.0 else a + jitter * np.eye(dim)
            factor = _slinalg.cho_factor(loaded, lower=True)
            x = _slinalg.cho_solve(factor, b)
            return HpdSolution(x=x, jitter=jitter)
        except np.linalg.LinAlgError:
            continue
        except _slinalg.LinAlgError:  # pragma: no cover
            continue
    raise SingularMatrixError(
        "system is not positive definite even with diagonal jitter %.3e" % last, last
    )
