import csv

import numpy as np
import pytest

from nsgp.active import AlConfig, acquire, fit_initial, initial_indices, run_al, run_both
from nsgp.data import Dataset, gen_jump1d, gen_synth1d
from nsgp.errors import ConfigError, EmptyPool
from nsgp.model import FULL, Prediction, Variant


def P(var_f, var_noise=None):
    var_f = np.asarray(var_f, float)
    noise = np.zeros_like(var_f) if var_noise is None else np.asarray(var_noise, float)
    return Prediction(np.zeros_like(var_f), var_f, noise)


@pytest.fixture(scope="module")
def synth():
    return gen_synth1d(0)


@pytest.fixture(scope="module")
def quick_traces(synth):
    return run_both(synth, AlConfig(epochs=30, seed=1))


class TestAcquire:
    def test_argmax(self):
        assert acquire(P([0.1, 0.5, 0.2]), "var_f") == 1

    def test_tie_goes_to_lowest_index(self):
        assert acquire(P([0.3, 0.3, 0.3]), "var_f") == 0
        assert acquire(P([0.1, 0.4, 0.4]), "var_y") == 1

    def test_epistemic_vs_overall(self):
        p = P([0.3, 0.2], [0.0, 0.5])
        assert acquire(p, "var_f") == 0
        assert acquire(p, "var_y") == 1

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            acquire(P([]), "var_f")

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            acquire(P([1.0]), "entropy")


class TestConfig:
    def test_defaults(self):
        cfg = AlConfig()
        assert cfg.initial_n == 30 and cfg.acquisitions == 50
        assert cfg.retrain == "none" and cfg.acquisition == "var_f" and cfg.variant == FULL

    @pytest.mark.parametrize("kw", [{"acquisition": "entropy"}, {"retrain": "partial"}, {"initial_n": 0}, {"acquisitions": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            AlConfig(**kw)

    def test_pool_too_small(self):
        with pytest.raises(ConfigError):
            initial_indices(60, AlConfig(initial_n=30, acquisitions=31))

    def test_initial_subset_seeded(self):
        a, b = initial_indices(200, AlConfig(seed=3)), initial_indices(200, AlConfig(seed=3))
        np.testing.assert_array_equal(a, b)
        assert len(np.unique(a)) == 30

    def test_needs_truth(self):
        d = Dataset(np.linspace(0, 1, 50), np.zeros(50))
        with pytest.raises(ConfigError):
            run_al(d, AlConfig(initial_n=5, acquisitions=2, epochs=1))


class TestRunAl:
    def test_trace_shape(self, quick_traces):
        for kind, trace in quick_traces.items():
            assert trace.acquisition == kind
            assert len(trace) == 50
            assert len(set(trace.chosen)) == 50
            assert not set(trace.chosen) & set(trace.initial.tolist())

    def test_zero_acquisitions(self, synth):
        cfg = AlConfig(acquisitions=0, epochs=5)
        trace = run_al(synth, cfg)
        assert len(trace) == 0
        assert trace.mae_auc() == 0.0
        model, scaler, _ = fit_initial(synth, cfg)
        mean = scaler.inverse_y(model.predict(synth.X).mean)
        np.testing.assert_allclose(trace.initial_mae, np.mean(np.abs(mean - synth.truth["f"])), rtol=1e-12)

    def test_arms_share_initial_fit(self, quick_traces):
        a, b = quick_traces["var_f"], quick_traces["var_y"]
        np.testing.assert_array_equal(a.initial, b.initial)
        assert a.initial_mae == b.initial_mae

    def test_acquisition_value_is_pool_max(self, synth):
        cfg = AlConfig(acquisitions=3, epochs=10)
        model, scaler, idx = fit_initial(synth, cfg)
        trace = run_al(synth, cfg, (model, scaler, idx))
        current = model.with_data(synth.X[idx], scaler.transform_y(synth.y[idx]))
        first = trace.steps[0]
        pool = np.setdiff1d(np.arange(len(synth)), idx)
        np.testing.assert_allclose(first.value, current.predict(synth.X[pool]).var_f.max(), rtol=1e-12)

    def test_var_f_never_increases_without_retraining(self, synth):
        cfg = AlConfig(acquisitions=10, epochs=10)
        model, scaler, idx = fit_initial(synth, cfg)
        trace = run_al(synth, cfg, (model, scaler, idx))
        labeled = list(idx)
        prev = model.with_data(synth.X[labeled], synth.y[labeled]).predict(synth.X).var_f
        for step in trace.steps:
            labeled.append(step.index)
            cur = model.with_data(synth.X[labeled], synth.y[labeled]).predict(synth.X).var_f
            assert np.all(cur <= prev + 1e-10)
            prev = cur

    def test_constant_noise_arms_agree(self):
        # homoskedastic noise: var_y = var_f + const, so the argmax is shared
        d = gen_jump1d(0)
        traces = run_both(d, AlConfig(variant=Variant(True, True, False), acquisitions=15, epochs=20))
        assert traces["var_f"].chosen == traces["var_y"].chosen

    def test_full_retrain(self, synth):
        trace = run_al(synth, AlConfig(acquisitions=2, epochs=5, retrain="full", retrain_epochs=3))
        assert len(trace) == 2 and np.isfinite(trace.mae).all()

    def test_deterministic(self, synth):
        cfg = AlConfig(acquisitions=5, epochs=10, seed=2)
        assert run_al(synth, cfg).chosen == run_al(synth, cfg).chosen

    def test_auc(self, quick_traces):
        t = quick_traces["var_f"]
        curve = np.concatenate([[t.initial_mae], t.mae])
        np.testing.assert_allclose(t.mae_auc(), np.trapezoid(curve) if hasattr(np, "trapezoid") else np.trapz(curve), rtol=1e-13)


class TestTraceCsv:
    def test_trace_file(self, quick_traces, tmp_path):
        t = quick_traces["var_f"]
        t.to_csv(tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["step", "chosen_x", "acquisition_value", "mae", "mse"]
        assert len(rows) == 52
        assert float(rows[1][3]) == t.initial_mae
        assert float(rows[-1][1]) == float(t.steps[-1].x[0])

    def test_predictions_file(self, quick_traces, tmp_path):
        t = quick_traces["var_y"]
        t.predictions_to_csv(tmp_path / "p.csv")
        rows = list(csv.reader(open(tmp_path / "p.csv")))
        assert rows[0] == ["x", "mean", "var_f", "var_y"]
        assert len(rows) == 201
