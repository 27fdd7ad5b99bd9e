import math

import numpy as np
import pytest

from stablebranch import rng as rngmod
from stablebranch.catalyst import BallIndicator, KernelCatalyst, NoCatalyst, OffspringLaw, PointMass
from stablebranch.kernels import ParticleArrays, StepRule, advance_particles, run_paths


def test_step_rule_validation():
    with pytest.raises(ValueError):
        StepRule(0.0)
    with pytest.raises(ValueError):
        StepRule(0.1, max_step=0.01)


def test_free_motion_law(backend):
    enc = KernelCatalyst(NoCatalyst(), 1.0, 1)
    A, X, M = run_paths([0.0], 20_000, [1.0, 2.0], 1.0, enc, StepRule(0.1, adaptive=False),
                        rngmod.stream(1))
    assert np.all(A == 0.0)
    # Cauchy with scale t/2: median of |X_t| is t/2
    assert np.median(np.abs(X[:, 1, 0])) == pytest.approx(1.0, rel=0.05)
    assert np.all(M[:, 1] >= M[:, 0]) and np.all(M[:, 1] >= np.abs(X[:, 1, 0]) - 1e-12)


def test_pcaf_of_constant_density(backend):
    enc = KernelCatalyst(BallIndicator(0.7, 1e6), 1.5, 1)
    A, _, _ = run_paths([0.0], 10, [3.0], 1.5, enc, StepRule(0.01), rngmod.stream(2))
    np.testing.assert_allclose(A[:, 0], 2.1, rtol=1e-9)


def test_adaptive_steps_match_uniform_in_mean(backend):
    spec = BallIndicator(1.0, 0.5)
    enc = KernelCatalyst(spec, 1.5, 1)
    ua, _, _ = run_paths([0.0], 4000, [2.0], 1.5, enc, StepRule(0.005, adaptive=False),
                         rngmod.stream(3))
    aa, _, _ = run_paths([0.0], 4000, [2.0], 1.5, enc, StepRule(0.005), rngmod.stream(4))
    se = math.hypot(ua.std(), aa.std()) / math.sqrt(4000)
    assert abs(ua.mean() - aa.mean()) < 4 * se


def test_deterministic_per_backend(backend):
    enc = KernelCatalyst(PointMass(1.0), 1.5, 1, 1.0)
    law = OffspringLaw({2: 1.0})
    outs = []
    for _ in range(2):
        parts = ParticleArrays.roots([0.0], 1, np.array([0.1]))
        res, nid, status = advance_particles(parts, 3.0, 1.5, enc, StepRule(0.0013), law,
                                             rngmod.stream(5, 0), rngmod.stream(5, 1))
        outs.append((res.pos.copy(), res.sc.copy(), res.ids.copy(), nid))
    for a, b in zip(*outs):
        assert np.array_equal(a, b)


def test_ids_and_lineage(backend):
    enc = KernelCatalyst(BallIndicator(2.0, 1.0), 1.5, 1, 1.0)
    law = OffspringLaw({2: 0.5, 3: 0.5})
    parts = ParticleArrays.roots([0.0], 1, np.array([0.2]))
    res, nid, status = advance_particles(parts, 2.0, 1.5, enc, StepRule(0.01), law,
                                         rngmod.stream(6, 0), rngmod.stream(6, 1), next_id=1)
    assert status == 0 and len(res) > 1
    ids = res.ids[:, 0]
    assert len(set(ids.tolist())) == len(ids) and nid > ids.max()
    assert np.all(res.ids[:, 1] >= 0)
    assert np.all(res.sc[:, 0] == 2.0)
    assert np.all(res.sc[:, 6] <= 2.0)
    assert np.all(res.sc[:, 3] < res.sc[:, 4])  # every live particle is below its threshold


def test_population_cap(backend):
    enc = KernelCatalyst(BallIndicator(5.0, 10.0), 1.5, 1, 1.0)
    law = OffspringLaw({2: 1.0})
    parts = ParticleArrays.roots([0.0], 1, np.array([0.1]))
    _, _, status = advance_particles(parts, 5.0, 1.5, enc, StepRule(0.05), law,
                                     rngmod.stream(7, 0), rngmod.stream(7, 1), cap=100)
    assert status == 1


def test_backends_agree_in_law(monkeypatch):
    from stablebranch import _backend
    enc = KernelCatalyst(BallIndicator(0.5, 1.0), 1.5, 1, 1.0)
    law = OffspringLaw({2: 1.0})
    sizes = {}
    for name in ("numba", "numpy"):
        monkeypatch.setenv(_backend.ENV_VAR, name)
        n = []
        for rep in range(600):
            parts = ParticleArrays.roots([0.0], 1, rngmod.stream(8, rep, 1).standard_exponential(1))
            res, _, _ = advance_particles(parts, 2.0, 1.5, enc, StepRule(0.01), law,
                                          rngmod.stream(8, rep, 0), rngmod.stream(8, rep, 1))
            n.append(len(res))
        sizes[name] = np.array(n)
    a, b = sizes["numba"], sizes["numpy"]
    se = math.hypot(a.std(), b.std()) / math.sqrt(a.size)
    assert abs(a.mean() - b.mean()) < 4 * se
