import io

import numpy as np
import pytest

from fixtures import stubborn_pair_dataset
from wolcecoc import decoding
from wolcecoc.coding import CodingError, CodingMatrix, make_one_vs_one
from wolcecoc.dataset import Dataset, load_builtin
from wolcecoc.learners import ClusteringDichotomizer, StumpEnsemble
from wolcecoc.owopt import risk_of
from wolcecoc.wolc import (EnsembleModel, WolcConfig, WolcError, fit_weights, history_lines,
                           initialize, load_model, patience_step, predict, save_model,
                           tie_rate, train_fixed_code, train_wolc)


@pytest.fixture(scope="module")
def stubborn_model():
    return train_wolc(stubborn_pair_dataset(0), WolcConfig())


def test_config_defaults_and_validation():
    cfg = WolcConfig()
    assert (cfg.s, cfg.Z, cfg.eta, cfg.boost_rounds) == (3, 3, 0.01, 40)
    assert cfg.max_iterations(6) == 18
    for bad in ({"s": 0}, {"Z": 0}, {"eta": 0}, {"T": 0}, {"n_regions": 1}):
        with pytest.raises(WolcError):
            WolcConfig(**bad)


def test_initialize_one_vs_all_on_iris():
    model = initialize(load_builtin("iris"))
    assert model.Q == 3
    assert all(isinstance(d, StumpEnsemble) for d in model.dichotomizers)
    assert np.allclose(model.W, decoding.uniform_weights(model.M))


def test_initialize_with_given_code():
    assert initialize(load_builtin("iris"), init_code=make_one_vs_one(3)).Q == 3
    with pytest.raises(WolcError):
        initialize(load_builtin("iris"), init_code=make_one_vs_one(4))
    with pytest.raises(CodingError):
        initialize(load_builtin("iris"), init_code=CodingMatrix([[1, -1], [1, -1], [-1, 1]]))


def test_separable_set_exits_with_zero_risk():
    X = np.array([[0.0], [0.1], [1.0], [1.1], [2.0], [2.1]])
    ds = Dataset(X, [1, 1, 2, 2, 3, 3], 3)
    model = train_wolc(ds)
    assert len(model.history) == 1
    assert model.history[0].risk <= WolcConfig().epsilon_cpa
    assert model.predict(X).tolist() == [1, 1, 2, 2, 3, 3]


def test_stubborn_pair_gets_layered_column(stubborn_model):
    h = stubborn_model.history
    assert h[0].pairs[0] == (1, 2) and h[1].pairs[0] == (1, 2)
    assert any(any(r.stubborn) for r in h[:3])


def test_risk_is_non_increasing(stubborn_model):
    n = 3 * 40 + 2 * 13
    eps = WolcConfig().epsilon_cpa
    risks = [r.risk for r in stubborn_model.history]
    assert len(risks) >= 3
    assert all(b <= a + eps * n + 1e-6 for a, b in zip(risks, risks[1:]))


def test_code_length_bound(stubborn_model):
    cfg = WolcConfig()
    assert stubborn_model.Q <= 3 + cfg.s * cfg.max_iterations(3)


def test_stubborn_flag_iff_column_existed():
    ds = stubborn_pair_dataset(1)
    model = train_wolc(ds, WolcConfig(s=1, Z=5))
    # replay the growth from the one-vs-all start
    seen = [tuple(c) for c in (2 * np.eye(3, dtype=int) - 1).T]
    for rec in model.history:
        for (i, j), flag in zip(rec.pairs, rec.stubborn):
            col = np.zeros(3, dtype=int)
            col[i - 1], col[j - 1] = 1, -1
            exists = tuple(col) in seen or tuple(-col) in seen
            assert flag == exists
            seen.append(tuple(col))


def test_model_weights_feasible_and_risk_consistent(stubborn_model):
    assert decoding.weight_problems(stubborn_model.W, stubborn_model.M) == []
    assert len(stubborn_model.dichotomizers) == stubborn_model.Q


def test_determinism(tmp_path):
    ds = stubborn_pair_dataset(2)
    a, b = train_wolc(ds), train_wolc(ds)
    save_model(a, tmp_path / "a.json")
    save_model(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert history_lines(a) == history_lines(b)


def test_model_round_trip(tmp_path, stubborn_model):
    save_model(stubborn_model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    X = stubborn_pair_dataset(5).features
    for dec in ("hd", "lb", "lw", "ow"):
        assert np.array_equal(back.predict(X, dec), stubborn_model.predict(X, dec))
    assert back.history == stubborn_model.history
    assert any(isinstance(d, ClusteringDichotomizer) for d in back.dichotomizers) == \
        any(isinstance(d, ClusteringDichotomizer) for d in stubborn_model.dichotomizers)


def test_load_rejects_other_json(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(WolcError):
        load_model(tmp_path / "x.json")


def test_patience_step():
    assert patience_step(np.inf, 5.0, 0, 0.01) == (0, True)
    assert patience_step(5.0, 4.0, 2, 0.01) == (0, True)
    assert patience_step(5.0, 4.99, 0, 0.01) == (1, False)
    assert patience_step(5.0, 5.0, 1, 0.01) == (2, False)


def test_flat_tail_keeps_earlier_snapshot(stubborn_model):
    h = stubborn_model.history
    last_improved = max(r.t for r in h if r.z == 0)
    # the returned code is the one optimized in the last improving round
    assert stubborn_model.Q == h[last_improved - 1].Q


def test_history_lines_fields(stubborn_model):
    line = history_lines(stubborn_model).splitlines()[0]
    for key in ("t=", "risk=", "Q=", "z=", "pairs=", "stubborn="):
        assert key in line


def test_trace_stream():
    buf = io.StringIO()
    train_wolc(stubborn_pair_dataset(3), WolcConfig(T=2), trace=buf)
    assert len(buf.getvalue().splitlines()) == 2


def test_zero_risk_model_predicts_training_labels():
    X = np.array([[0.0, 0], [0, 1], [1, 0], [1, 1], [2, 0], [2, 1]])
    ds = Dataset(X, [1, 1, 2, 2, 3, 3], 3)
    model = train_wolc(ds)
    assert model.train_risk <= WolcConfig().epsilon_cpa
    assert (model.predict(X, "ow") == ds.labels).all()


def test_decoders_can_disagree():
    ds = load_builtin("glass")
    model = train_wolc(ds)
    hd, ow = model.predict(ds.features, "hd"), model.predict(ds.features, "ow")
    assert (hd != ow).any()


def test_fixed_code_and_fit_weights():
    ds = load_builtin("iris")
    base = train_fixed_code(ds, make_one_vs_one(3))
    assert np.allclose(base.W, decoding.uniform_weights(base.M))
    tuned = fit_weights(base, ds)
    X_code = base.codewords(ds.features)
    tensor = decoding.build_loss_tensor(X_code, ds.labels, base.M)
    assert risk_of(tuned.W, tensor, ds.labels) <= risk_of(base.W, tensor, ds.labels) + 1e-9


def test_predict_checks_dimension():
    model = initialize(load_builtin("iris"))
    with pytest.raises(WolcError, match="4 features"):
        predict(model, np.zeros((2, 5)))


def test_tie_rate():
    assert tie_rate(np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 2.0]])) == 0.5


def test_ensemble_model_is_immutable(stubborn_model):
    assert isinstance(stubborn_model, EnsembleModel)
    with pytest.raises(ValueError):
        stubborn_model.W[0, 0] = 5.0
