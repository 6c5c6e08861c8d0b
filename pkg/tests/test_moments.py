import json
import math

import numpy as np
import pytest

from crmfk.families import CrmSpec, cumulant
from crmfk.moments import (
    MomentVector,
    empirical_moments,
    moment_distance,
    moments_from_cumulants,
    relative_error_index,
    required_truncation,
    theoretical_moments,
)
from crmfk.sampler import Ensemble, Trajectory, sample_ensemble


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in _set_partitions(rest):
        yield [[first]] + p
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]


def _moments_by_partition_sum(kappas, K):
    # m_n = sum over set partitions of [n] of the product of block cumulants;
    # an independent route to the same quantity as the recursion.
    out = []
    for n in range(1, K + 1):
        total = 0.0
        for p in _set_partitions(list(range(n))):
            prod = 1.0
            for block in p:
                prod *= kappas[len(block) - 1]
            total += prod
        out.append(total)
    return np.array(out)


def test_recursion_matches_partition_sums():
    for spec in [CrmSpec.gamma_process(2.0, theta=3.0),
                 CrmSpec.generalized_gamma(1.0, 0.75),
                 CrmSpec.stable_beta(1.0, 0.5, 0.5)]:
        kappas = [cumulant(spec, i) for i in range(1, 7)]
        got = moments_from_cumulants(kappas).values
        want = _moments_by_partition_sum(kappas, 6)
        assert np.allclose(got, want, rtol=1e-12)


def test_gamma_total_mass_moments_closed_form():
    # T ~ Gamma(a, theta), so m_n = (a)_(n) / theta^n.
    a, theta = 2.0, 3.0
    mv = theoretical_moments(CrmSpec.gamma_process(a, theta=theta), K=5)
    for n in range(1, 6):
        want = math.prod(a + j for j in range(n)) / theta ** n
        assert mv[n] == pytest.approx(want, rel=1e-12)


def test_moment_vector_validation():
    with pytest.raises(ValueError):
        MomentVector(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        MomentVector(np.zeros(0))
    with pytest.raises(ValueError):
        theoretical_moments(CrmSpec.gamma_process(1.0), K=11)


def test_moment_distance_hand_value():
    t = MomentVector(np.array([4.0, 16.0]))
    e = MomentVector(np.array([1.0, 4.0]))
    # root gaps are (4 - 1) and (4 - 2): sqrt((9 + 4) / 2)
    assert moment_distance(t, e) == pytest.approx(math.sqrt(6.5), rel=1e-14)
    with pytest.raises(ValueError):
        moment_distance(t, MomentVector(np.array([1.0])))


def _toy_ensemble():
    spec = CrmSpec.gamma_process(1.0)
    rows = [np.array([3.0, 1.0, 0.5]), np.array([2.0, 1.5, 0.25])]
    trajs = [Trajectory(xi=np.arange(1.0, 4.0), jumps=r,
                        locations=np.zeros(3)) for r in rows]
    return Ensemble(spec=spec, trajectories=trajs, master_seed=0, M=3)


def test_empirical_moments_hand_computed():
    ens = _toy_ensemble()
    mv = empirical_moments(ens, M=2, K=2)
    totals = np.array([4.0, 3.5])
    assert mv[1] == pytest.approx(totals.mean(), rel=1e-15)
    assert mv[2] == pytest.approx((totals ** 2).mean(), rel=1e-15)


def test_relative_error_index_hand_computed():
    ens = _toy_ensemble()
    want = np.mean([0.5 / 4.5, 0.25 / 3.75])
    assert relative_error_index(ens) == pytest.approx(want, rel=1e-15)
    want2 = np.mean([1.0 / 4.0, 1.5 / 3.5])
    assert relative_error_index(ens, M=2) == pytest.approx(want2, rel=1e-15)


def test_empirical_moments_converge_to_theoretical():
    spec = CrmSpec.gamma_process(1.0)
    ens = sample_ensemble(spec, 200, 4000, master_seed=5)
    theo = theoretical_moments(spec, K=2)
    emp = empirical_moments(ens, K=2)
    assert emp[1] == pytest.approx(theo[1], rel=0.05)
    assert emp[2] == pytest.approx(theo[2], rel=0.15)


def test_required_truncation_consistent_with_direct_recomputation():
    spec = CrmSpec.generalized_gamma(1.0, 0.5)
    rep = required_truncation(spec, 0.2, M_max=12, n_fk=500, master_seed=11)
    ens = sample_ensemble(spec, 12, 500, master_seed=11)
    theo = theoretical_moments(spec, K=4)
    for M in [1, 4, 12]:
        direct = moment_distance(theo, empirical_moments(ens, M=M))
        assert rep.ell[M - 1] == pytest.approx(direct, rel=1e-12)
        assert rep.e[M - 1] == pytest.approx(
            relative_error_index(ens, M=M), rel=1e-12)


def test_required_truncation_resolves_or_reports_none():
    spec = CrmSpec.gamma_process(1.0)
    rep = required_truncation(spec, 0.25, M_max=30, n_fk=1500, master_seed=3)
    assert rep.resolved_M is not None
    assert rep.ell[rep.resolved_M - 1] <= 0.25
    if rep.resolved_M > 1:
        assert np.all(rep.ell[:rep.resolved_M - 1] > 0.25)

    hopeless = required_truncation(spec, 1e-9, M_max=10, n_fk=200, master_seed=3)
    assert hopeless.resolved_M is None


def test_relative_error_decreases_along_grid():
    spec = CrmSpec.gamma_process(1.0)
    rep = required_truncation(spec, 0.1, M_max=40, n_fk=1000, master_seed=8)
    assert rep.e[0] > rep.e[9] > rep.e[39]
    assert rep.e[39] < 0.02


def test_report_csv_and_json(tmp_path):
    spec = CrmSpec.gamma_process(1.0)
    rep = required_truncation(spec, 0.3, M_max=6, n_fk=100, master_seed=2)
    csv_path = tmp_path / "trunc.csv"
    rep.to_csv(csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "M,ell,e"
    assert len(lines) == 7
    row = lines[3].split(",")
    assert int(row[0]) == 3
    assert float(row[1]) == rep.ell[2]

    json_path = tmp_path / "trunc.json"
    rep.to_json(json_path)
    doc = json.loads(json_path.read_text())
    assert doc["spec"]["family"] == "gamma"
    assert doc["resolved_M"] == rep.resolved_M
    assert doc["ell"][2] == rep.ell[2]


def test_required_truncation_rejects_bad_target():
    with pytest.raises(ValueError):
        required_truncation(CrmSpec.gamma_process(1.0), 0.0, M_max=5)
