"""On-demand invariant suites backing the `check` CLI command.

Each suite returns (passed, failed, messages); messages describe failures
only.  The suites reuse the same properties the test suite pins down, at a
size that runs in a few seconds.
"""

from __future__ import annotations

import numpy as np

from . import engine, expfam, models

__all__ = ["SUITES", "run_suite"]


def _random_natural(rng, kind: str, dim: int = 1) -> expfam.NaturalParam:
    if kind == expfam.BERNOULLI:
        return expfam.bernoulli_natural(rng.uniform(-4.0, 4.0))
    if kind == expfam.BETA:
        return expfam.beta_natural(rng.uniform(0.2, 8.0), rng.uniform(0.2, 8.0))
    if kind == expfam.GAUSSIAN:
        a = rng.standard_normal((dim, dim))
        prec = a @ a.T + dim * np.eye(dim)
        return expfam.gaussian_natural(rng.standard_normal(dim), prec)
    a = rng.standard_normal((dim, dim))
    w = a @ a.T + dim * np.eye(dim)
    return expfam.gw_natural(
        dim - 1 + rng.uniform(0.5, 6.0), rng.uniform(0.3, 4.0), rng.standard_normal(dim), w
    )


def suite_roundtrip(seed: int = 0):
    rng = np.random.default_rng(seed)
    passed = failed = 0
    msgs = []
    cases = [(expfam.BERNOULLI, 1), (expfam.BETA, 1), (expfam.GAUSSIAN, 2), (expfam.GAUSSIAN_WISHART, 2)]
    for kind, dim in cases:
        for trial in range(100):
            lam = _random_natural(rng, kind, dim)
            back = expfam.mean_to_nat(expfam.nat_to_mean(lam))
            scale = np.maximum(np.abs(lam.values), 1.0)
            err = float(np.max(np.abs(back.values - lam.values) / scale))
            if err < 1e-8:
                passed += 1
            else:
                failed += 1
                msgs.append(f"roundtrip {kind} trial {trial}: relative error {err:g}")
    return passed, failed, msgs


def _model_instances(seed: int):
    rng = np.random.default_rng(seed)
    tl_data = models.TwoLevelMixtureData(
        rng.normal(size=6), rng.normal(size=6), 1.5, 2.0
    )
    mf_data = models.MatrixFactorizationData(rng.normal(size=(4, 3)), 2, 0.5, 0.8)
    gmm_data = models.GMMData(rng.normal(size=(8, 2)), 1.0, 1.0, 0.5, 3.0, np.eye(2))
    return [
        ("simple_mixture", models.build_simple_mixture(models.SimpleMixtureData(0.3, 0.8, 0.2)),
         models.SimpleMixtureData(0.3, 0.8, 0.2)),
        ("two_level", models.build_two_level(tl_data, seed=seed), tl_data),
        ("gmm2", models.build_gmm2(gmm_data, seed=seed), gmm_data),
        ("matfac_vmp", models.build_matfac(mf_data, "vmp", seed=seed), mf_data),
    ]


def _random_mean(rng, family: expfam.FamilyDescriptor) -> np.ndarray:
    return expfam.nat_to_mean(_random_natural(rng, family.kind, family.dim)).values


def suite_multilinearity(seed: int = 0, pairs: int = 10, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    passed = failed = 0
    msgs = []
    for name, model, data in _model_instances(seed):
        state = {n.id: n for n in model.nodes}
        snap = engine.mu_snapshot(state)
        for nid in model.provider.conjugate_node_ids:
            fam = state[nid].family
            for _ in range(pairs):
                mu_a = _random_mean(rng, fam)
                mu_b = _random_mean(rng, fam)
                coeff = model.provider.coefficient(nid, snap, data)
                snap_a = dict(snap, **{nid: mu_a})
                snap_b = dict(snap, **{nid: mu_b})
                lhs = model.provider.expected_log_joint(
                    snap_a, data
                ) - model.provider.expected_log_joint(snap_b, data)
                rhs = float(coeff @ (mu_a - mu_b))
                coeff_a = model.provider.coefficient(nid, snap_a, data)
                scale = max(1.0, abs(lhs))
                ok = abs(lhs - rhs) <= tol * scale and np.allclose(coeff, coeff_a, atol=tol)
                if ok:
                    passed += 1
                else:
                    failed += 1
                    msgs.append(f"multilinearity {name}/{nid}: gap {abs(lhs - rhs):g}")
    return passed, failed, msgs


def suite_monotonicity(seed: int = 0, slack: float = 1e-10):
    passed = failed = 0
    msgs = []
    for name, model, data in _model_instances(seed):
        trace = engine.fit(model, data, engine.Schedule(engine.CAVI), tol=1e-10, max_iter=200)
        elbos = trace.elbos
        drops = np.diff(elbos) < -slack * np.maximum(1.0, np.abs(elbos[:-1]))
        if drops.any():
            failed += 1
            msgs.append(f"monotonicity {name}: ELBO decreased at sweep {int(np.argmax(drops)) + 1}")
        else:
            passed += 1
    return passed, failed, msgs


SUITES = {
    "roundtrip": suite_roundtrip,
    "multilinearity": suite_multilinearity,
    "monotonicity": suite_monotonicity,
}


def run_suite(name: str):
    """Run one suite (or 'all'); returns a list of (suite, passed, failed, messages)."""
    if name == "all":
        return [(k, *fn()) for k, fn in SUITES.items()]
    if name not in SUITES:
        raise KeyError(name)
    return [(name, *SUITES[name]())]
