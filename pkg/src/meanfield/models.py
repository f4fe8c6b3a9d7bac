"""Coefficient providers for the worked models.

Each provider expands the expected log-joint as a multilinear function of
every node's expectation vector, so the engine can read the update target
for node i straight off the terms multiplying that node's expectations.
All expected-log-joint values include their additive constants (Gaussian
and prior normalizers), so ELBO values are absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expfam
from .engine import GLOBAL, LOCAL, CoefficientProvider, ModelSpec, NodeState
from .expfam import NumericalError, beta_natural, bernoulli_natural, gaussian_natural, gw_natural
from .specfun import betaln, gammaln

__all__ = [
    "SimpleMixtureData",
    "TwoLevelMixtureData",
    "GMMData",
    "MatrixFactorizationData",
    "LogitNormalMixtureData",
    "SimpleMixtureProvider",
    "TwoLevelProvider",
    "GMMProvider",
    "MatrixFactorizationProvider",
    "LogitNormalProvider",
    "beta_natural_gradient",
    "build_simple_mixture",
    "build_two_level",
    "build_gmm2",
    "build_matfac",
    "build_logitnormal",
    "als_objective",
]

LOG_2PI = math.log(2.0 * math.pi)

# Symmetry-breaking perturbation applied to Bernoulli initial means.
_INIT_JITTER = 0.05


# --------------------------------------------------------------------------
# data containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimpleMixtureData:
    """One observation under a two-component mixture with known prior weight."""

    pi0: float
    pa: float
    pb: float

    def __post_init__(self):
        if not 0.0 < self.pi0 < 1.0:
            raise ValueError(f"pi0 must lie in (0,1), got {self.pi0}")
        if self.pa <= 0.0 or self.pb <= 0.0:
            raise ValueError("component likelihood values must be positive")


@dataclass(frozen=True)
class TwoLevelMixtureData:
    """Per-observation component log-likelihoods plus a Beta prior on the weight."""

    log_pa: np.ndarray
    log_pb: np.ndarray
    alpha0: float
    beta0: float

    def __post_init__(self):
        la = np.asarray(self.log_pa, dtype=float).reshape(-1)
        lb = np.asarray(self.log_pb, dtype=float).reshape(-1)
        if la.size < 1 or la.size != lb.size:
            raise ValueError("log_pa and log_pb must be equal-length, nonempty vectors")
        if self.alpha0 <= 0.0 or self.beta0 <= 0.0:
            raise ValueError("Beta prior parameters must be positive")
        object.__setattr__(self, "log_pa", la)
        object.__setattr__(self, "log_pb", lb)

    @property
    def n(self) -> int:
        return self.log_pa.size


@dataclass(frozen=True)
class GMMData:
    """Observations for the two-component Gaussian mixture with GW priors."""

    y: np.ndarray
    alpha0: float
    beta0: float
    gamma0: float
    nu0: float
    w0: np.ndarray

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if y.shape[0] < 2:
            raise ValueError("GMM needs at least two observations")
        d = y.shape[1]
        w0 = np.atleast_2d(np.asarray(self.w0, dtype=float))
        if w0.shape != (d, d):
            raise ValueError(f"W0 must be {d}x{d}")
        if self.alpha0 <= 0.0 or self.beta0 <= 0.0:
            raise ValueError("Beta prior parameters must be positive")
        if self.gamma0 <= 0.0:
            raise ValueError("gamma0 must be positive")
        if self.nu0 <= d - 1:
            raise ValueError(f"nu0 must exceed D-1 = {d - 1}")
        np.linalg.cholesky(w0)  # raises on non-SPD
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w0", 0.5 * (w0 + w0.T))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class MatrixFactorizationData:
    """Full data matrix Y fit by K-factor row/column embeddings."""

    y: np.ndarray
    k: int
    delta_u: float
    delta_v: float

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.k < 1:
            raise ValueError("number of factors must be >= 1")
        if self.delta_u <= 0.0 or self.delta_v <= 0.0:
            raise ValueError("regularization weights must be positive")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class LogitNormalMixtureData:
    """Two-level mixture data with a logit-normal prior on the weight."""

    log_pa: np.ndarray
    log_pb: np.ndarray
    m: float

    def __post_init__(self):
        la = np.asarray(self.log_pa, dtype=float).reshape(-1)
        lb = np.asarray(self.log_pb, dtype=float).reshape(-1)
        if la.size < 1 or la.size != lb.size:
            raise ValueError("log_pa and log_pb must be equal-length, nonempty vectors")
        object.__setattr__(self, "log_pa", la)
        object.__setattr__(self, "log_pb", lb)

    @property
    def n(self) -> int:
        return self.log_pa.size


# --------------------------------------------------------------------------
# Model: single-observation mixture
# --------------------------------------------------------------------------


class SimpleMixtureProvider(CoefficientProvider):
    """Single Bernoulli indicator; its coefficient is the prior-weighted log odds."""

    def coefficient(self, node_id, mus, data: SimpleMixtureData):
        if node_id != "z":
            raise KeyError(node_id)
        return np.array(
            [math.log(data.pi0 * data.pa) - math.log((1.0 - data.pi0) * data.pb)]
        )

    def expected_log_joint(self, mus, data: SimpleMixtureData):
        mu = float(mus["z"][0])
        odds = math.log(data.pi0 * data.pa) - math.log((1.0 - data.pi0) * data.pb)
        return mu * odds + math.log((1.0 - data.pi0) * data.pb)

    @property
    def conjugate_node_ids(self):
        return ("z",)


def build_simple_mixture(data: SimpleMixtureData, seed: int = 0) -> ModelSpec:
    rng = np.random.default_rng(seed)
    p = 0.5 + rng.uniform(-_INIT_JITTER, _INIT_JITTER)
    node = NodeState.make("z", bernoulli_natural(math.log(p / (1 - p))), role=LOCAL)
    return ModelSpec((node,), SimpleMixtureProvider())


# --------------------------------------------------------------------------
# Model: two-level mixture with a Beta-distributed weight
# --------------------------------------------------------------------------


def _z_ids(n: int) -> list[str]:
    return [f"z{i}" for i in range(n)]


class TwoLevelProvider(CoefficientProvider):
    """Bernoulli locals plus one Beta global.

    With ``shifted_beta`` the global node uses the reciprocal-base-measure
    representation of the Beta family; the coefficient is unchanged and the
    base-measure correction accounts for the (1, 1) shift.
    """

    def __init__(self, n: int, shifted_beta: bool = False):
        self.n = n
        self.shifted_beta = shifted_beta

    def coefficient(self, node_id, mus, data: TwoLevelMixtureData):
        mu0 = mus["pi"]
        if node_id == "pi":
            s = sum(float(mus[z][0]) for z in _z_ids(self.n))
            return np.array(
                [data.alpha0 - 1.0 + s, data.n + data.beta0 - 1.0 - s]
            )
        i = int(node_id[1:])
        return np.array(
            [(mu0[0] + data.log_pa[i]) - (mu0[1] + data.log_pb[i])]
        )

    def expected_log_joint(self, mus, data: TwoLevelMixtureData):
        mu0 = mus["pi"]
        total = (data.alpha0 - 1.0) * mu0[0] + (data.beta0 - 1.0) * mu0[1]
        total -= betaln(data.alpha0, data.beta0)
        for i, z in enumerate(_z_ids(self.n)):
            mu = float(mus[z][0])
            total += mu * (data.log_pa[i] + mu0[0]) + (1.0 - mu) * (data.log_pb[i] + mu0[1])
        return float(total)

    def base_measure_grad(self, node_id):
        if self.shifted_beta and node_id == "pi":
            return np.array([-1.0, -1.0])
        return None

    @property
    def conjugate_node_ids(self):
        return tuple(_z_ids(self.n)) + ("pi",)


def build_two_level(
    data: TwoLevelMixtureData, seed: int = 0, shifted_beta: bool = False
) -> ModelSpec:
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(data.n):
        p = 0.5 + rng.uniform(-_INIT_JITTER, _INIT_JITTER)
        nodes.append(NodeState.make(f"z{i}", bernoulli_natural(math.log(p / (1 - p))), role=LOCAL))
    base = "reciprocal" if shifted_beta else "constant"
    nodes.append(
        NodeState.make(
            "pi", beta_natural(data.alpha0, data.beta0, base_measure=base), role=GLOBAL
        )
    )
    return ModelSpec(tuple(nodes), TwoLevelProvider(data.n, shifted_beta))


# --------------------------------------------------------------------------
# Model: two-component Gaussian mixture with Gaussian-Wishart priors
# --------------------------------------------------------------------------


def expected_log_component(mu_gw: np.ndarray, y: np.ndarray, d: int) -> float:
    """E_q[log N(y | m, S^-1)] from a Gaussian-Wishart node's expectations."""
    mu1 = float(mu_gw[0])
    e_s = mu_gw[1 : 1 + d * d].reshape(d, d)
    e_sm = mu_gw[1 + d * d : 1 + d * d + d]
    mu4 = float(mu_gw[-1])
    return 0.5 * mu1 - 0.5 * float(y @ e_s @ y) + float(y @ e_sm) - 0.5 * mu4 - 0.5 * d * LOG_2PI


class GMMProvider(CoefficientProvider):
    """Bernoulli responsibilities, a Beta weight, and two Gaussian-Wishart components."""

    def __init__(self, data: GMMData):
        self.n = data.n
        self.d = data.dim
        self._w0_inv = np.linalg.inv(data.w0)
        self._w0_inv = 0.5 * (self._w0_inv + self._w0_inv.T)
        self._yy = np.einsum("ni,nj->nij", data.y, data.y)
        # Wishart prior log-normalizer, plus the Gaussian layer's constants.
        d = self.d
        log_b = (
            -0.5 * data.nu0 * float(np.linalg.slogdet(data.w0)[1])
            - 0.5 * data.nu0 * d * math.log(2.0)
            - 0.25 * d * (d - 1) * math.log(math.pi)
            - sum(gammaln(0.5 * (data.nu0 + 1 - k)) for k in range(1, d + 1))
        )
        self._prior_const = 0.5 * d * math.log(data.gamma0) - 0.5 * d * LOG_2PI + log_b

    def _resp_sums(self, mus):
        r = np.array([float(mus[z][0]) for z in _z_ids(self.n)])
        return r

    def coefficient(self, node_id, mus, data: GMMData):
        if node_id == "pi":
            s = float(self._resp_sums(mus).sum())
            return np.array([data.alpha0 - 1.0 + s, data.n + data.beta0 - 1.0 - s])
        if node_id in ("comp_a", "comp_b"):
            r = self._resp_sums(mus)
            w = r if node_id == "comp_a" else 1.0 - r
            s = float(w.sum())
            return np.concatenate(
                [
                    [0.5 * s + 0.5 * (data.nu0 - self.d)],
                    (-0.5 * np.einsum("n,nij->ij", w, self._yy) - 0.5 * self._w0_inv).reshape(-1),
                    w @ data.y,
                    [-0.5 * s - 0.5 * data.gamma0],
                ]
            )
        i = int(node_id[1:])
        mu0 = mus["pi"]
        ea = expected_log_component(mus["comp_a"], data.y[i], self.d)
        eb = expected_log_component(mus["comp_b"], data.y[i], self.d)
        return np.array([(mu0[0] + ea) - (mu0[1] + eb)])

    def expected_log_joint(self, mus, data: GMMData):
        mu0 = mus["pi"]
        r = self._resp_sums(mus)
        total = (data.alpha0 - 1.0) * mu0[0] + (data.beta0 - 1.0) * mu0[1]
        total -= betaln(data.alpha0, data.beta0)
        total += float(r.sum()) * mu0[0] + float((1.0 - r).sum()) * mu0[1]
        for i in range(self.n):
            total += r[i] * expected_log_component(mus["comp_a"], data.y[i], self.d)
            total += (1.0 - r[i]) * expected_log_component(mus["comp_b"], data.y[i], self.d)
        for comp in ("comp_a", "comp_b"):
            mu = mus[comp]
            e_s = mu[1 : 1 + self.d * self.d].reshape(self.d, self.d)
            total += 0.5 * (data.nu0 - self.d) * float(mu[0])
            total -= 0.5 * float(np.sum(self._w0_inv * e_s))
            total -= 0.5 * data.gamma0 * float(mu[-1])
            total += self._prior_const
        return float(total)

    @property
    def conjugate_node_ids(self):
        return tuple(_z_ids(self.n)) + ("pi", "comp_a", "comp_b")


def build_gmm2(data: GMMData, seed: int = 0) -> ModelSpec:
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(data.n):
        p = 0.5 + rng.uniform(-_INIT_JITTER, _INIT_JITTER)
        nodes.append(NodeState.make(f"z{i}", bernoulli_natural(math.log(p / (1 - p))), role=LOCAL))
    nodes.append(NodeState.make("pi", beta_natural(data.alpha0, data.beta0), role=GLOBAL))
    prior = gw_natural(data.nu0, data.gamma0, np.zeros(data.dim), data.w0)
    nodes.append(NodeState.make("comp_a", prior, role=GLOBAL))
    nodes.append(NodeState.make("comp_b", prior, role=GLOBAL))
    # Globals first: a locals-first sweep would overwrite the perturbed
    # responsibilities while the components are still identical, freezing the
    # model at the symmetric fixed point.
    order = ("pi", "comp_a", "comp_b") + tuple(_z_ids(data.n))
    return ModelSpec(tuple(nodes), GMMProvider(data), sweep_order=order)


# --------------------------------------------------------------------------
# Model: matrix factorization (VMP / PPCA / ALS)
# --------------------------------------------------------------------------


def _u_ids(n: int) -> list[str]:
    return [f"u{i}" for i in range(n)]


def _v_ids(d: int) -> list[str]:
    return [f"v{j}" for j in range(d)]


def _split_gauss(mu: np.ndarray, k: int):
    return mu[:k], mu[k:].reshape(k, k)


class MatrixFactorizationProvider(CoefficientProvider):
    """Gaussian row/column factors under an i.i.d. unit-noise likelihood."""

    def __init__(self, data: MatrixFactorizationData):
        self.n = data.n
        self.d = data.d
        self.k = data.k

    def coefficient(self, node_id, mus, data: MatrixFactorizationData):
        k = self.k
        if node_id.startswith("u"):
            i = int(node_id[1:])
            other_ids, weights, delta = _v_ids(self.d), data.y[i, :], data.delta_u
        else:
            j = int(node_id[1:])
            other_ids, weights, delta = _u_ids(self.n), data.y[:, j], data.delta_v
        lin = np.zeros(k)
        prec = delta * np.eye(k)
        for w, oid in zip(weights, other_ids):
            m1, m2 = _split_gauss(mus[oid], k)
            lin += w * m1
            prec += m2
        return np.concatenate([lin, (-0.5 * prec).reshape(-1)])

    def expected_log_joint(self, mus, data: MatrixFactorizationData):
        k = self.k
        u1 = np.stack([_split_gauss(mus[uid], k)[0] for uid in _u_ids(self.n)])
        u2 = np.stack([_split_gauss(mus[uid], k)[1] for uid in _u_ids(self.n)])
        v1 = np.stack([_split_gauss(mus[vid], k)[0] for vid in _v_ids(self.d)])
        v2 = np.stack([_split_gauss(mus[vid], k)[1] for vid in _v_ids(self.d)])
        total = -0.5 * float(np.sum(data.y * data.y))
        total += float(np.sum(data.y * (u1 @ v1.T)))
        total -= 0.5 * float(np.einsum("nab,dab->", u2, v2))
        total -= 0.5 * self.n * self.d * LOG_2PI
        total -= 0.5 * data.delta_u * float(np.trace(u2.sum(axis=0)))
        total -= 0.5 * data.delta_v * float(np.trace(v2.sum(axis=0)))
        total += 0.5 * self.n * k * (math.log(data.delta_u) - LOG_2PI)
        total += 0.5 * self.d * k * (math.log(data.delta_v) - LOG_2PI)
        return total

    @property
    def conjugate_node_ids(self):
        return tuple(_u_ids(self.n)) + tuple(_v_ids(self.d))


def build_matfac(
    data: MatrixFactorizationData, mode: str = "vmp", seed: int = 0
) -> ModelSpec:
    """mode: 'vmp' (full posteriors), 'ppca' (delta on columns), 'als' (delta on both)."""
    if mode not in ("vmp", "ppca", "als"):
        raise ValueError(f"unknown matrix-factorization mode {mode!r}")
    rng = np.random.default_rng(seed)
    delta_u_nodes = mode == "als"
    delta_v_nodes = mode in ("ppca", "als")
    nodes = []
    # Zero means are a stationary point of every variant, so initial means
    # get a small seeded perturbation; precisions start at the prior.
    for i in range(data.n):
        lam = gaussian_natural(0.1 * rng.standard_normal(data.k), data.delta_u * np.eye(data.k))
        nodes.append(NodeState.make(f"u{i}", lam, role=LOCAL, delta_mode=delta_u_nodes))
    for j in range(data.d):
        lam = gaussian_natural(0.1 * rng.standard_normal(data.k), data.delta_v * np.eye(data.k))
        nodes.append(NodeState.make(f"v{j}", lam, role=LOCAL, delta_mode=delta_v_nodes))
    return ModelSpec(tuple(nodes), MatrixFactorizationProvider(data))


def als_objective(state, data: MatrixFactorizationData) -> float:
    """Regularized squared loss at the current factor means."""
    u = np.stack([expfam.gaussian_mean_precision(state[uid].lam)[0] for uid in _u_ids(data.n)])
    v = np.stack([expfam.gaussian_mean_precision(state[vid].lam)[0] for vid in _v_ids(data.d)])
    resid = data.y - u @ v.T
    return 0.5 * float(np.sum(resid * resid)) + 0.5 * data.delta_u * float(
        np.sum(u * u)
    ) + 0.5 * data.delta_v * float(np.sum(v * v))


# --------------------------------------------------------------------------
# Model: non-conjugate (logit-normal) weight prior
# --------------------------------------------------------------------------


def _beta_logit_rule(a: float, b: float, nodes_per_panel: int):
    """Quadrature rule for E under Beta(a, b) in the logit domain.

    The substitution t = logit(z) turns the density into the analytic
    exp(a log sig(t) + b log sig(-t) - log B(a, b)), so composite
    Gauss-Legendre panels converge fast even where the unit-interval
    integrands have endpoint log singularities.  Returns (t, weights) with
    the density absorbed into the weights, normalized to unit mass.
    """

    def logdens(t):
        return -a * np.log1p(np.exp(-t)) - b * np.log1p(np.exp(t)) - betaln(a, b)

    mode = math.log(a / b)
    peak = logdens(mode)
    lo = mode
    while logdens(lo) > peak - 50.0:
        lo -= 1.0
    hi = mode
    while logdens(hi) > peak - 50.0:
        hi += 1.0
    panels = max(int(math.ceil((hi - lo) / 2.0)), 1)
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    wq = (half[:, None] * w[None, :]).reshape(-1) * np.exp(logdens(t))
    return t, wq / wq.sum()


def _sigmoid_open(t: np.ndarray) -> np.ndarray:
    """Sigmoid clamped into the open interval so f(z) stays finite at tail nodes.

    Beyond |t| ~ 37 the float sigmoid rounds onto {0, 1}; the quadrature
    weight there is below e^-37, so the clamp is invisible in the integrals.
    """
    z = 1.0 / (1.0 + np.exp(-t))
    return np.clip(z, 1e-300, 1.0 - 1e-16)


def beta_natural_gradient(lam, f, order: int = 40, check_tol: float = 1e-6) -> np.ndarray:
    """Natural gradient of E_q[f(z)] w.r.t. the Beta expectation parameters.

    Computed as F^-1 Cov_q(T, f) with T = (log z, log(1-z)) and F = Cov(T, T)
    the Fisher matrix, all moments by quadrature; ``order`` counts nodes per
    panel.  Doubling the node count must change the result by less than
    check_tol, else the failure is reported.
    """
    a, b = expfam.beta_ab(lam)
    if a < 1e-2 or b < 1e-2:
        raise expfam.DomainError(f"quadrature requires alpha, beta >= 0.01, got ({a:g}, {b:g})")

    def estimate(nodes_per_panel):
        t, wq = _beta_logit_rule(a, b, nodes_per_panel)
        t_stats = np.stack([-np.log1p(np.exp(-t)), -np.log1p(np.exp(t))])  # (log z, log(1-z))
        z = _sigmoid_open(t)
        fx = np.array([f(zi) for zi in z], dtype=float)
        t_mean = t_stats @ wq
        tc = t_stats - t_mean[:, None]
        fisher = (tc * wq) @ tc.T
        cov_tf = (tc * wq) @ (fx - fx @ wq)
        return np.linalg.solve(fisher, cov_tf)

    g1 = estimate(order)
    g2 = estimate(2 * order)
    if float(np.max(np.abs(g1 - g2))) > check_tol:
        raise NumericalError(
            f"quadrature for the natural gradient did not converge: {g1} vs {g2}"
        )
    return g2


class LogitNormalProvider(CoefficientProvider):
    """Two-level mixture whose weight prior is logit-normal.

    The prior factorizes as h(z) exp(f(z)) with h(z) = 1/(z(1-z)) and
    f(z) = -(logit(z) - m)^2 / 2; the non-conjugate f enters the weight
    node's coefficient through its quadrature natural gradient, acting as a
    pseudo-conjugate Beta term.  ``log_prior_core`` may override f (used by
    the conjugate cross-checks).
    """

    def __init__(self, n: int, log_prior_core=None, quad_order: int = 40):
        self.n = n
        self.log_prior_core = log_prior_core
        self.quad_order = quad_order

    def _f(self, data: LogitNormalMixtureData):
        if self.log_prior_core is not None:
            return self.log_prior_core
        m = data.m
        return lambda z: -0.5 * (math.log(z / (1.0 - z)) - m) ** 2

    def pseudo_prior(self, mu0: np.ndarray, data: LogitNormalMixtureData) -> np.ndarray:
        """(alpha_hat, beta_hat): natural gradient of the non-conjugate term."""
        lam = expfam.mean_to_nat(expfam.ExpectationParam(expfam.FamilyDescriptor(expfam.BETA), mu0))
        return beta_natural_gradient(lam, self._f(data), self.quad_order)

    def coefficient(self, node_id, mus, data: LogitNormalMixtureData):
        mu0 = mus["pi"]
        if node_id == "pi":
            s = sum(float(mus[z][0]) for z in _z_ids(self.n))
            ab_hat = self.pseudo_prior(mu0, data)
            # base measure of the prior contributes (-1, -1); likelihood
            # contributes (sum mu_i, N - sum mu_i)
            return np.array([ab_hat[0] - 1.0 + s, data.n + ab_hat[1] - 1.0 - s])
        i = int(node_id[1:])
        return np.array([(mu0[0] + data.log_pa[i]) - (mu0[1] + data.log_pb[i])])

    def expected_log_joint(self, mus, data: LogitNormalMixtureData):
        mu0 = mus["pi"]
        total = -float(mu0[0]) - float(mu0[1])  # prior base measure 1/(z(1-z))
        total -= 0.5 * LOG_2PI  # logit-normal (sigma = 1) normalizer
        lam = expfam.mean_to_nat(expfam.ExpectationParam(expfam.FamilyDescriptor(expfam.BETA), mu0))
        total += _beta_expect(lam, self._f(data), self.quad_order)
        for i, z in enumerate(_z_ids(self.n)):
            mu = float(mus[z][0])
            total += mu * (data.log_pa[i] + mu0[0]) + (1.0 - mu) * (data.log_pb[i] + mu0[1])
        return float(total)

    @property
    def conjugate_node_ids(self):
        return tuple(_z_ids(self.n))  # the weight node is non-conjugate


def _beta_expect(lam, f, order: int) -> float:
    a, b = expfam.beta_ab(lam)
    t, wq = _beta_logit_rule(a, b, order)
    z = _sigmoid_open(t)
    return float(np.array([f(zi) for zi in z]) @ wq)


def build_logitnormal(data: LogitNormalMixtureData, seed: int = 0) -> ModelSpec:
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(data.n):
        p = 0.5 + rng.uniform(-_INIT_JITTER, _INIT_JITTER)
        nodes.append(NodeState.make(f"z{i}", bernoulli_natural(math.log(p / (1 - p))), role=LOCAL))
    nodes.append(NodeState.make("pi", beta_natural(1.0, 1.0), role=GLOBAL))
    return ModelSpec(tuple(nodes), LogitNormalProvider(data.n))
