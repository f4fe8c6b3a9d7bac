"""Exponential families in natural / expectation coordinates.

Four families are supported: Bernoulli, Beta, multivariate Gaussian, and
Gaussian-Wishart.  Parameters are stored as flat vectors; symmetric matrix
blocks are stored as full D x D (row-major) and symmetrized on ingestion.
Domain violations are construction-time errors.

Flat layouts
------------
Bernoulli           (lam,)                                length 1
Beta                (alpha-1, beta-1)                     length 2
                    with base_measure="reciprocal": (alpha, beta)
Gaussian, dim D     (S m, vec(-S/2))                      length D + D^2
Gaussian-Wishart    ((nu-D)/2, vec(-(W^-1 + g m m^T)/2),
                     g m, -g/2)                           length 2 + D + D^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import betaln, digamma, gammaln, trigamma

__all__ = [
    "BERNOULLI",
    "BETA",
    "GAUSSIAN",
    "GAUSSIAN_WISHART",
    "DomainError",
    "NumericalError",
    "FamilyDescriptor",
    "NaturalParam",
    "ExpectationParam",
    "nat_to_mean",
    "mean_to_nat",
    "log_partition",
    "entropy",
    "kl_divergence",
    "gw_moments",
    "bernoulli_natural",
    "beta_natural",
    "gaussian_natural",
    "gw_natural",
    "beta_ab",
    "gaussian_mean_precision",
    "gw_params",
]

BERNOULLI = "bernoulli"
BETA = "beta"
GAUSSIAN = "gaussian"
GAUSSIAN_WISHART = "gaussian_wishart"

_KINDS = (BERNOULLI, BETA, GAUSSIAN, GAUSSIAN_WISHART)

# Expectation-parameter covariance blocks are allowed to be singular (the
# delta method degenerates them on purpose), but not indefinite.
_PSD_SLACK = 1e-10


class DomainError(ValueError):
    """A parameter vector violates its family's domain constraints."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge."""


@dataclass(frozen=True)
class FamilyDescriptor:
    """Identifies one of the four families plus its dimensionality.

    ``base_measure`` selects the representation of the Beta family:
    "constant" is the standard z^(a-1)(1-z)^(b-1) form with natural
    parameters (a-1, b-1); "reciprocal" uses h(z) = 1/(z(1-z)) so the
    natural parameters become (a, b).  Other families only admit
    "constant".
    """

    kind: str
    dim: int = 1
    base_measure: str = "constant"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.kind in (BERNOULLI, BETA) and self.dim != 1:
            raise ValueError(f"{self.kind} requires dim=1, got {self.dim}")
        if self.base_measure not in ("constant", "reciprocal"):
            raise ValueError(f"unknown base_measure {self.base_measure!r}")
        if self.base_measure == "reciprocal" and self.kind != BETA:
            raise ValueError("base_measure='reciprocal' applies to the Beta family only")

    @property
    def flat_size(self) -> int:
        d = self.dim
        if self.kind == BERNOULLI:
            return 1
        if self.kind == BETA:
            return 2
        if self.kind == GAUSSIAN:
            return d + d * d
        return 2 + d + d * d  # gaussian_wishart


def _as_flat(family: FamilyDescriptor, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != family.flat_size:
        raise DomainError(
            f"{family.kind} dim={family.dim} expects {family.flat_size} values, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{family.kind} parameters must be finite")
    return arr


def _symmetrize_block(family: FamilyDescriptor, arr: np.ndarray) -> np.ndarray:
    """Replace the D x D block with its symmetric part, in a copy."""
    d = family.dim
    if family.kind == GAUSSIAN:
        lo = d
    elif family.kind == GAUSSIAN_WISHART:
        lo = 1
    else:
        return arr
    block = arr[lo : lo + d * d].reshape(d, d)
    arr = arr.copy()
    arr[lo : lo + d * d] = (0.5 * (block + block.T)).reshape(-1)
    return arr


def _chol_or_none(mat: np.ndarray):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None


def _require_spd(mat: np.ndarray, what: str) -> np.ndarray:
    chol = _chol_or_none(mat)
    if chol is None:
        raise DomainError(f"{what} must be symmetric positive-definite")
    return chol


def _require_psd(mat: np.ndarray, what: str) -> None:
    eigmin = float(np.linalg.eigvalsh(mat)[0])
    scale = max(1.0, float(np.abs(mat).max()))
    if eigmin < -_PSD_SLACK * scale:
        raise DomainError(f"{what} must be positive semidefinite (min eigenvalue {eigmin:g})")


@dataclass(frozen=True)
class NaturalParam:
    """A point in the natural-parameter domain of one family."""

    family: FamilyDescriptor
    values: np.ndarray

    def __post_init__(self):
        arr = _symmetrize_block(self.family, _as_flat(self.family, self.values))
        _validate_natural(self.family, arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class ExpectationParam:
    """Expected sufficient statistics E_q[T(z)] of one family."""

    family: FamilyDescriptor
    values: np.ndarray

    def __post_init__(self):
        arr = _symmetrize_block(self.family, _as_flat(self.family, self.values))
        _validate_mean(self.family, arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


# --------------------------------------------------------------------------
# family-specific packing / unpacking
# --------------------------------------------------------------------------


def _beta_ab_from_flat(family: FamilyDescriptor, arr: np.ndarray) -> tuple[float, float]:
    if family.base_measure == "reciprocal":
        return float(arr[0]), float(arr[1])
    return float(arr[0]) + 1.0, float(arr[1]) + 1.0


def _gauss_unpack(family: FamilyDescriptor, arr: np.ndarray):
    """Return (h, S) with h = S m and S the precision matrix."""
    d = family.dim
    h = arr[:d]
    s_mat = -2.0 * arr[d:].reshape(d, d)
    return h, s_mat


def _gw_unpack(family: FamilyDescriptor, arr: np.ndarray):
    """Return (nu, gamma, m, w_inv)."""
    d = family.dim
    nu = 2.0 * arr[0] + d
    gamma = -2.0 * arr[-1]
    if gamma <= 0.0:
        raise DomainError("Gaussian-Wishart requires gamma > 0")
    gm = arr[1 + d * d : 1 + d * d + d]
    m = gm / gamma
    eta2 = arr[1 : 1 + d * d].reshape(d, d)
    w_inv = -2.0 * eta2 - gamma * np.outer(m, m)
    return nu, gamma, m, w_inv


def _validate_natural(family: FamilyDescriptor, arr: np.ndarray) -> None:
    kind = family.kind
    if kind == BERNOULLI:
        return  # finiteness already checked
    if kind == BETA:
        a, b = _beta_ab_from_flat(family, arr)
        if a <= 0.0 or b <= 0.0:
            raise DomainError(f"Beta requires alpha > 0 and beta > 0, got ({a:g}, {b:g})")
        return
    if kind == GAUSSIAN:
        _, s_mat = _gauss_unpack(family, arr)
        _require_spd(s_mat, "Gaussian precision S")
        return
    nu, gamma, _, w_inv = _gw_unpack(family, arr)
    if nu <= family.dim - 1:
        raise DomainError(f"Gaussian-Wishart requires nu > D-1, got nu={nu:g}")
    _require_spd(w_inv, "Gaussian-Wishart W^-1")


def _validate_mean(family: FamilyDescriptor, arr: np.ndarray) -> None:
    kind = family.kind
    d = family.dim
    if kind == BERNOULLI:
        if not 0.0 < arr[0] < 1.0:
            raise DomainError(f"Bernoulli mean must lie in (0,1), got {arr[0]:g}")
        return
    if kind == BETA:
        if arr[0] >= 0.0 or arr[1] >= 0.0:
            raise DomainError("Beta expectation components E[log z], E[log(1-z)] must be negative")
        return
    if kind == GAUSSIAN:
        m = arr[:d]
        ezz = arr[d:].reshape(d, d)
        _require_psd(ezz - np.outer(m, m), "Gaussian second-moment slack E[zz^T]-E[z]E[z]^T")
        return
    ez2 = arr[1 : 1 + d * d].reshape(d, d)
    _require_spd(ez2, "Gaussian-Wishart E[Z2]")
    mu3 = arr[1 + d * d : 1 + d * d + d]
    slack = arr[-1] - float(mu3 @ np.linalg.solve(ez2, mu3))
    if slack < -_PSD_SLACK * max(1.0, abs(arr[-1])):
        raise DomainError(f"Gaussian-Wishart quadratic-form slack must be nonnegative, got {slack:g}")


# --------------------------------------------------------------------------
# constructors and extractors in conventional parameters
# --------------------------------------------------------------------------


def bernoulli_natural(log_odds: float) -> NaturalParam:
    return NaturalParam(FamilyDescriptor(BERNOULLI), np.array([log_odds]))


def beta_natural(alpha: float, beta: float, base_measure: str = "constant") -> NaturalParam:
    fam = FamilyDescriptor(BETA, base_measure=base_measure)
    if base_measure == "reciprocal":
        return NaturalParam(fam, np.array([alpha, beta]))
    return NaturalParam(fam, np.array([alpha - 1.0, beta - 1.0]))


def gaussian_natural(mean, precision) -> NaturalParam:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    d = mean.size
    fam = FamilyDescriptor(GAUSSIAN, dim=d)
    flat = np.concatenate([precision @ mean, (-0.5 * precision).reshape(-1)])
    return NaturalParam(fam, flat)


def gw_natural(nu: float, gamma: float, m, w) -> NaturalParam:
    m = np.atleast_1d(np.asarray(m, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    d = m.size
    fam = FamilyDescriptor(GAUSSIAN_WISHART, dim=d)
    chol = _require_spd(w, "Gaussian-Wishart W")
    ident = np.eye(d)
    w_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, ident))
    flat = np.concatenate(
        [
            [0.5 * (nu - d)],
            (-0.5 * (w_inv + gamma * np.outer(m, m))).reshape(-1),
            gamma * m,
            [-0.5 * gamma],
        ]
    )
    return NaturalParam(fam, flat)


def beta_ab(lam: NaturalParam) -> tuple[float, float]:
    _expect_kind(lam, BETA)
    return _beta_ab_from_flat(lam.family, lam.values)


def gaussian_mean_precision(lam: NaturalParam) -> tuple[np.ndarray, np.ndarray]:
    _expect_kind(lam, GAUSSIAN)
    h, s_mat = _gauss_unpack(lam.family, lam.values)
    return np.linalg.solve(s_mat, h), s_mat


def gw_params(lam: NaturalParam) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Return (nu, gamma, m, W)."""
    _expect_kind(lam, GAUSSIAN_WISHART)
    nu, gamma, m, w_inv = _gw_unpack(lam.family, lam.values)
    w = np.linalg.inv(w_inv)
    return nu, gamma, m, 0.5 * (w + w.T)


def _expect_kind(param, kind: str) -> None:
    if param.family.kind != kind:
        raise DomainError(f"expected a {kind} parameter, got {param.family.kind}")


# --------------------------------------------------------------------------
# core operations
# --------------------------------------------------------------------------


def nat_to_mean(lam: NaturalParam) -> ExpectationParam:
    """Map natural parameters to expected sufficient statistics."""
    fam = lam.family
    kind = fam.kind
    if kind == BERNOULLI:
        lv = float(lam.values[0])
        p = 1.0 / (1.0 + math.exp(-lv)) if lv >= 0 else math.exp(lv) / (1.0 + math.exp(lv))
        # Large |lambda| rounds the sigmoid onto the boundary; keep the mean
        # inside the open interval the invariants (and the inverse) require.
        p = min(max(p, 1e-300), 1.0 - 1e-16)
        return ExpectationParam(fam, np.array([p]))
    if kind == BETA:
        a, b = _beta_ab_from_flat(fam, lam.values)
        psum = digamma(a + b)
        return ExpectationParam(fam, np.array([digamma(a) - psum, digamma(b) - psum]))
    if kind == GAUSSIAN:
        h, s_mat = _gauss_unpack(fam, lam.values)
        chol = _require_spd(s_mat, "Gaussian precision S")
        m = np.linalg.solve(s_mat, h)
        cov = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(fam.dim)))
        return ExpectationParam(fam, np.concatenate([m, (cov + np.outer(m, m)).reshape(-1)]))
    return gw_moments(lam)


def gw_moments(lam: NaturalParam) -> ExpectationParam:
    """Gaussian-Wishart sufficient-statistic expectations.

    Returns (E[log|Z2|], E[Z2], E[Z2 z1], E[z1^T Z2 z1]) laid out flat.
    """
    _expect_kind(lam, GAUSSIAN_WISHART)
    fam = lam.family
    d = fam.dim
    nu, gamma, m, w_inv = _gw_unpack(fam, lam.values)
    w = np.linalg.inv(w_inv)
    w = 0.5 * (w + w.T)
    sign, logdet_w = np.linalg.slogdet(w)
    if sign <= 0:
        raise DomainError("Gaussian-Wishart W must be positive-definite")
    e_logdet = sum(digamma(0.5 * (nu + 1 - k)) for k in range(1, d + 1)) + d * math.log(2.0) + logdet_w
    e_z2 = nu * w
    e_z2z1 = e_z2 @ m
    e_quad = float(nu * m @ w @ m) + d / gamma
    return ExpectationParam(fam, np.concatenate([[e_logdet], e_z2.reshape(-1), e_z2z1, [e_quad]]))


def mean_to_nat(mu: ExpectationParam) -> NaturalParam:
    """Invert nat_to_mean.  Beta inversion solves the digamma system by Newton."""
    fam = mu.family
    kind = fam.kind
    if kind == BERNOULLI:
        p = float(mu.values[0])
        return NaturalParam(fam, np.array([math.log(p / (1.0 - p))]))
    if kind == BETA:
        a, b = _invert_beta_moments(float(mu.values[0]), float(mu.values[1]))
        if fam.base_measure == "reciprocal":
            return NaturalParam(fam, np.array([a, b]))
        return NaturalParam(fam, np.array([a - 1.0, b - 1.0]))
    if kind == GAUSSIAN:
        d = fam.dim
        m = mu.values[:d]
        cov = mu.values[d:].reshape(d, d) - np.outer(m, m)
        chol = _chol_or_none(cov)
        if chol is None:
            raise DomainError("Gaussian expectation parameters must have SPD covariance to invert")
        s_mat = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(d)))
        s_mat = 0.5 * (s_mat + s_mat.T)
        return NaturalParam(fam, np.concatenate([s_mat @ m, (-0.5 * s_mat).reshape(-1)]))
    return _invert_gw_moments(mu)


def _invert_beta_moments(mu1: float, mu2: float, max_iter: int = 200, tol: float = 1e-12):
    """Solve psi(a)-psi(a+b)=mu1, psi(b)-psi(a+b)=mu2 for (a, b).

    Strategy: reduce to one dimension.  For a trial concentration s = a + b
    the per-component equations give a(s) = psi_inv(mu1 + psi(s)) and
    b(s) = psi_inv(mu2 + psi(s)); the self-consistency gap
    a(s) + b(s) - s changes sign exactly once, so geometric bisection over s
    brackets the solution, and a short damped Newton in (log a, log b)
    polishes it to full precision.
    """
    p, q = math.exp(mu1), math.exp(mu2)
    if p + q >= 1.0:
        raise DomainError("Beta expectation parameters lie outside the realizable moment set")

    def residual(a, b):
        psum = digamma(a + b)
        return np.array([digamma(a) - psum - mu1, digamma(b) - psum - mu2])

    def gap(s):
        psum = digamma(s)
        return _digamma_inverse(mu1 + psum) + _digamma_inverse(mu2 + psum) - s

    lo, hi = 1e-8, 1e10
    if gap(lo) <= 0.0 or gap(hi) >= 0.0:
        raise NumericalError("Beta digamma inversion could not bracket the concentration")
    for _ in range(120):
        mid = math.sqrt(lo * hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * lo:
            break
    s = math.sqrt(lo * hi)
    psum = digamma(s)
    a = _digamma_inverse(mu1 + psum)
    b = _digamma_inverse(mu2 + psum)
    r = residual(a, b)
    u, v = math.log(a), math.log(b)
    for _ in range(max_iter):
        if float(np.max(np.abs(r))) < tol:
            return math.exp(u), math.exp(v)
        a, b = math.exp(u), math.exp(v)
        tsum = trigamma(a + b)
        jac = np.array(
            [
                [(trigamma(a) - tsum) * a, -tsum * b],
                [-tsum * a, (trigamma(b) - tsum) * b],
            ]
        )
        step = np.clip(np.linalg.solve(jac, r), -2.0, 2.0)
        damp = 1.0
        for _ in range(60):
            r_new = residual(math.exp(u - damp * step[0]), math.exp(v - damp * step[1]))
            if float(np.max(np.abs(r_new))) <= float(np.max(np.abs(r))):
                break
            damp *= 0.5
        u, v, r = u - damp * step[0], v - damp * step[1], r_new
    if float(np.max(np.abs(r))) < tol:
        return math.exp(u), math.exp(v)
    raise NumericalError(
        f"Beta digamma inversion did not converge in {max_iter} iterations, "
        f"residual {float(np.max(np.abs(r))):g}"
    )


def _digamma_inverse(y: float, iters: int = 40) -> float:
    """Solve psi(x) = y for x > 0 by Newton from a two-regime initialization."""
    x = math.exp(y) + 0.5 if y >= -2.22 else -1.0 / (y + 0.5772156649015329)
    for _ in range(iters):
        delta = (digamma(x) - y) / trigamma(x)
        x_new = x - delta
        if x_new <= 0.0:
            x_new = 0.5 * x
        x = x_new
        if abs(delta) < 1e-13 * max(abs(x), 1.0):
            break
    return x


def _invert_gw_moments(mu: ExpectationParam, max_iter: int = 200, tol: float = 1e-12) -> NaturalParam:
    fam = mu.family
    d = fam.dim
    mu1 = float(mu.values[0])
    ez2 = mu.values[1 : 1 + d * d].reshape(d, d)
    mu3 = mu.values[1 + d * d : 1 + d * d + d]
    mu4 = float(mu.values[-1])
    m = np.linalg.solve(ez2, mu3)
    slack = mu4 - float(mu3 @ m)
    if slack <= 0.0:
        raise DomainError("Gaussian-Wishart quadratic-form slack must be positive to invert")
    gamma = d / slack
    sign, logdet_ez2 = np.linalg.slogdet(ez2)
    if sign <= 0:
        raise DomainError("Gaussian-Wishart E[Z2] must be positive-definite")

    # E[Z2] = nu W pins W given nu; the remaining scalar equation in nu is
    # strictly increasing with a unique root on (D-1, inf).
    def f(nu):
        return (
            sum(digamma(0.5 * (nu + 1 - k)) for k in range(1, d + 1))
            + d * math.log(2.0)
            + logdet_ez2
            - d * math.log(nu)
            - mu1
        )

    lo = d - 1.0 + 1e-9
    hi = d + 1.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("Gaussian-Wishart nu inversion failed to bracket a root")
    nu = hi
    for _ in range(max_iter):
        val = f(nu)
        if abs(val) < tol:
            break
        deriv = 0.5 * sum(trigamma(0.5 * (nu + 1 - k)) for k in range(1, d + 1)) - d / nu
        nu_new = nu - val / deriv if deriv > 0 else None
        if nu_new is None or not (lo < nu_new < 1e12):
            nu_new = 0.5 * (lo + hi)  # bisection fallback
        if f(nu_new) < 0:
            lo = nu_new
        else:
            hi = nu_new
        nu = nu_new
    else:
        raise NumericalError(f"Gaussian-Wishart nu inversion did not converge, residual {f(nu):g}")
    w = ez2 / nu
    return gw_natural(nu, gamma, m, w)


def log_partition(lam: NaturalParam) -> float:
    """Log normalizer A(lam): q(z) = h(z) exp(<T(z), lam> - A(lam))."""
    fam = lam.family
    kind = fam.kind
    if kind == BERNOULLI:
        lv = float(lam.values[0])
        return max(lv, 0.0) + math.log1p(math.exp(-abs(lv)))
    if kind == BETA:
        a, b = _beta_ab_from_flat(fam, lam.values)
        return betaln(a, b)
    if kind == GAUSSIAN:
        d = fam.dim
        h, s_mat = _gauss_unpack(fam, lam.values)
        chol = _require_spd(s_mat, "Gaussian precision S")
        logdet_s = 2.0 * float(np.sum(np.log(np.diag(chol))))
        m = np.linalg.solve(s_mat, h)
        return 0.5 * float(h @ m) - 0.5 * logdet_s + 0.5 * d * math.log(2.0 * math.pi)
    d = fam.dim
    nu, gamma, _, w_inv = _gw_unpack(fam, lam.values)
    sign, logdet_winv = np.linalg.slogdet(w_inv)
    if sign <= 0:
        raise DomainError("Gaussian-Wishart W^-1 must be positive-definite")
    return (
        -0.5 * d * math.log(gamma)
        + 0.5 * d * math.log(2.0 * math.pi)
        - 0.5 * nu * logdet_winv
        + 0.5 * nu * d * math.log(2.0)
        + 0.25 * d * (d - 1) * math.log(math.pi)
        + sum(gammaln(0.5 * (nu + 1 - k)) for k in range(1, d + 1))
    )


def _expected_log_base(lam: NaturalParam, mu: ExpectationParam) -> float:
    if lam.family.base_measure == "reciprocal":
        return -float(mu.values[0]) - float(mu.values[1])
    return 0.0


def entropy(lam: NaturalParam) -> float:
    """Differential (or discrete) entropy of q_lam."""
    mu = nat_to_mean(lam)
    return log_partition(lam) - float(lam.values @ mu.values) - _expected_log_base(lam, mu)


def kl_divergence(lam1: NaturalParam, lam2: NaturalParam) -> float:
    """KL(q_lam1 || q_lam2) in Bregman form on the log partition."""
    if lam1.family != lam2.family:
        raise DomainError(f"family mismatch: {lam1.family} vs {lam2.family}")
    mu1 = nat_to_mean(lam1)
    return (
        log_partition(lam2)
        - log_partition(lam1)
        - float((lam2.values - lam1.values) @ mu1.values)
    )
