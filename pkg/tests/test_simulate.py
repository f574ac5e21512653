"""Tests for DAG simulation, mechanisms, sampling, and dataset I/O."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdcd.graphs import DiGraph, is_acyclic
from sdcd.simulate import (
    Dataset,
    INTERVENTION_SIGMA,
    Mechanism,
    NOISE_SIGMA,
    load_dataset,
    load_truth,
    random_dag,
    random_mechanisms,
    sample,
    save_dataset,
    standardize,
)


def chain_graph(d):
    return DiGraph(d, frozenset((i, i + 1) for i in range(d - 1)))


class TestRandomDag:
    @given(
        d=st.integers(min_value=1, max_value=15),
        s=st.floats(min_value=0.0, max_value=4.0),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=100, deadline=None)
    def test_always_acyclic(self, d, s, seed):
        s = min(s, float(d - 1)) if d > 1 else 0.0
        assert is_acyclic(random_dag(d, s, seed))

    def test_deterministic(self):
        assert random_dag(8, 2.0, 42).edges == random_dag(8, 2.0, 42).edges

    def test_expected_edge_count(self):
        # Undirected pair probability s/(d-1) over d(d-1)/2 pairs gives
        # s*d/2 expected edges.
        d, s = 20, 3.0
        counts = [random_dag(d, s, seed).n_edges for seed in range(300)]
        mean = np.mean(counts)
        expected = s * d / 2.0
        # std of the mean ~ sqrt(n_pairs * p * (1-p) / 300) ~ 0.3
        assert abs(mean - expected) < 1.5

    def test_rejects_out_of_range_s(self):
        with pytest.raises(ValueError):
            random_dag(5, 5.0, 0)

    def test_single_node(self):
        g = random_dag(1, 0.0, 0)
        assert g.d == 1 and g.n_edges == 0


class TestMechanisms:
    def test_parents_match_graph(self):
        g = random_dag(8, 2.0, 3)
        scm = random_mechanisms(g, 4)
        for j, mech in enumerate(scm.mechanisms):
            assert set(mech.parents) == g.parents(j)

    def test_deterministic(self):
        g = chain_graph(4)
        a = random_mechanisms(g, 9)
        b = random_mechanisms(g, 9)
        for ma, mb in zip(a.mechanisms, b.mechanisms):
            assert np.array_equal(ma.w1, mb.w1)
            assert np.array_equal(ma.w2, mb.w2)

    def test_root_mean_is_zero(self):
        scm = random_mechanisms(chain_graph(3), 0)
        assert np.all(scm.mechanisms[0].mean(np.zeros((5, 0))) == 0.0)

    def test_mean_is_bounded_by_weight_norm(self):
        # |tanh(.)| <= 1 entrywise, so |mean| <= ||w2||_1.
        scm = random_mechanisms(chain_graph(3), 1)
        mech = scm.mechanisms[1]
        vals = mech.mean(np.linspace(-50, 50, 101)[:, None])
        assert np.max(np.abs(vals)) <= np.sum(np.abs(mech.w2)) + 1e-12


class TestSample:
    def test_row_counts_and_labels(self):
        scm = random_mechanisms(random_dag(6, 2.0, 0), 1)
        data = sample(scm, 100, 30, [2, 4], seed=5)
        assert data.n == 100 + 2 * 30
        assert np.sum(data.t == 0) == 100
        assert np.sum(data.t == 1) == 30
        assert np.sum(data.t == 2) == 30
        assert data.interventions == [frozenset(), frozenset({2}), frozenset({4})]

    def test_intervened_column_statistics(self):
        # Under a hard intervention the target is N(0, 0.1) regardless of
        # its parents.
        scm = random_mechanisms(chain_graph(4), 2)
        data = sample(scm, 10, 20000, [2], seed=3)
        col = data.x[data.t == 1, 2]
        assert abs(col.mean()) < 0.01
        assert col.std() == pytest.approx(INTERVENTION_SIGMA, rel=0.05)

    def test_root_column_is_pure_noise(self):
        scm = random_mechanisms(chain_graph(3), 0)
        data = sample(scm, 20000, 0, [], seed=1)
        col = data.x[:, 0]
        assert abs(col.mean()) < 0.02
        assert col.std() == pytest.approx(NOISE_SIGMA, rel=0.05)

    def test_deterministic(self):
        scm = random_mechanisms(random_dag(5, 2.0, 7), 8)
        a = sample(scm, 50, 10, [1], seed=11)
        b = sample(scm, 50, 10, [1], seed=11)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.t, b.t)

    def test_seed_changes_data(self):
        scm = random_mechanisms(random_dag(5, 2.0, 7), 8)
        a = sample(scm, 50, 0, [], seed=1)
        b = sample(scm, 50, 0, [], seed=2)
        assert not np.array_equal(a.x, b.x)

    def test_rejects_bad_target(self):
        scm = random_mechanisms(chain_graph(3), 0)
        with pytest.raises(ValueError):
            sample(scm, 10, 10, [3], seed=0)

    def test_mechanism_effect_visible(self):
        # A strong chain mechanism should correlate parent and child.
        g = chain_graph(2)
        w1 = np.ones((1, 100))
        w2 = np.full(100, 2.0 / 100)
        scm = random_mechanisms(g, 0)
        scm.mechanisms[1] = Mechanism((0,), w1, w2)
        data = sample(scm, 5000, 0, [], seed=0)
        corr = np.corrcoef(data.x[:, 0], data.x[:, 1])[0, 1]
        assert corr > 0.5


class TestStandardize:
    def test_unit_moments(self):
        scm = random_mechanisms(random_dag(6, 2.0, 1), 2)
        data = standardize(sample(scm, 500, 100, [0, 3], seed=4))
        assert np.allclose(data.x.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(data.x.std(axis=0), 1.0, atol=1e-12)
        assert data.standardized
        assert data.constant_cols == []

    def test_idempotent(self):
        scm = random_mechanisms(random_dag(4, 1.5, 2), 3)
        once = standardize(sample(scm, 200, 0, [], seed=6))
        twice = standardize(once)
        assert np.allclose(once.x, twice.x, atol=1e-12)

    def test_constant_column_flagged_and_centered(self):
        x = np.column_stack([np.full(10, 3.0), np.arange(10, dtype=float)])
        data = standardize(Dataset(x=x, t=np.zeros(10, dtype=int),
                                   interventions=[frozenset()]))
        assert data.constant_cols == [0]
        assert np.allclose(data.x[:, 0], 0.0)
        assert data.x[:, 1].std() == pytest.approx(1.0)

    def test_rejects_single_row(self):
        data = Dataset(x=np.ones((1, 2)), t=np.zeros(1, dtype=int),
                       interventions=[frozenset()])
        with pytest.raises(ValueError):
            standardize(data)


class TestDatasetValidation:
    def test_first_regime_must_be_empty(self):
        with pytest.raises(ValueError):
            Dataset(x=np.zeros((2, 2)), t=np.zeros(2, dtype=int),
                    interventions=[frozenset({0})])

    def test_labels_in_range(self):
        with pytest.raises(ValueError):
            Dataset(x=np.zeros((2, 2)), t=np.array([0, 5]),
                    interventions=[frozenset()])


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        g = random_dag(5, 2.0, 0)
        scm = random_mechanisms(g, 1)
        data = standardize(sample(scm, 40, 10, [1, 3], seed=2))
        data.meta["s"] = 2.0
        paths = save_dataset(data, tmp_path, truth=g)
        loaded = load_dataset(paths["data"], paths["meta"])
        assert np.array_equal(loaded.x, data.x)  # .17g is exact for float64
        assert np.array_equal(loaded.t, data.t)
        assert loaded.interventions == data.interventions
        assert loaded.standardized == data.standardized
        assert loaded.meta == data.meta
        assert load_truth(paths["truth"], d=g.d) == g

    def test_data_header(self, tmp_path):
        data = Dataset(x=np.zeros((3, 2)), t=np.zeros(3, dtype=int),
                       interventions=[frozenset()])
        paths = save_dataset(data, tmp_path)
        with open(paths["data"]) as fh:
            assert fh.readline().strip() == "x0,x1,regime"

    def test_load_rejects_wrong_column_count(self, tmp_path):
        data = Dataset(x=np.zeros((3, 2)), t=np.zeros(3, dtype=int),
                       interventions=[frozenset()])
        paths = save_dataset(data, tmp_path)
        import json
        with open(paths["meta"]) as fh:
            meta = json.load(fh)
        meta["d"] = 3
        with open(paths["meta"], "w") as fh:
            json.dump(meta, fh)
        with pytest.raises(ValueError):
            load_dataset(paths["data"], paths["meta"])

    def test_load_rejects_missing_regime_header(self, tmp_path):
        p = tmp_path / "data.csv"
        p.write_text("x0,x1\n0,0\n")
        m = tmp_path / "meta.json"
        m.write_text('{"d": 2, "interventions": [[]]}')
        with pytest.raises(ValueError):
            load_dataset(p, m)
