import numpy as np
import pytest

from gca.encoder import encode
from gca.graph import from_edges, normalized_adjacency
from gca.oracle import sbm_generate
from gca.trainer import (
    AdamState,
    TrainConfig,
    TrainingDivergedError,
    adam_step,
    build_view_plans,
    embed,
    format_config,
    glorot_init,
    init_adam,
    init_params,
    parse_config,
    train,
    write_loss_csv,
)


def _toy_graph():
    feats = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    return from_edges(2, [(0, 1)], feats)


class TestTrainConfig:
    def test_defaults_valid(self):
        TrainConfig()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("p_e1", 1.0), ("p_e2", -0.1), ("p_f1", 1.5), ("p_tau", 0.0),
            ("p_tau", 1.0), ("tau", 0.0), ("learning_rate", 0.0),
            ("epochs", 0), ("hidden_dim", 0), ("weight_decay", -1e-5),
            ("centrality_measure", "closeness"), ("activation", "tanh"),
        ],
    )
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            TrainConfig(**{field: value})

    def test_variant_switches(self):
        base = TrainConfig()
        assert base.with_variant("gca").adaptive_topology
        assert base.with_variant("gca").adaptive_attribute
        t = base.with_variant("gca-t")
        assert (t.adaptive_topology, t.adaptive_attribute) == (False, True)
        a = base.with_variant("gca-a")
        assert (a.adaptive_topology, a.adaptive_attribute) == (True, False)
        ta = base.with_variant("gca-t-a")
        assert (ta.adaptive_topology, ta.adaptive_attribute) == (False, False)
        with pytest.raises(ValueError, match="variant"):
            base.with_variant("gca-x")


class TestConfigFile:
    def test_round_trip(self):
        config = TrainConfig(p_e1=0.35, epochs=77, activation="rrelu",
                             adaptive_topology=False, seed=9)
        assert parse_config(format_config(config)) == config

    def test_comments_and_blanks_ignored(self):
        text = "# full line comment\n\ntau = 0.5  # trailing comment\n"
        assert parse_config(text).tau == 0.5

    def test_unknown_key_is_an_error(self):
        with pytest.raises(ValueError, match="unknown key 'learningrate'"):
            parse_config("learningrate = 0.1\n")

    def test_duplicate_key_is_an_error(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_config("tau = 0.5\ntau = 0.6\n")

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config("tau 0.5\n")

    def test_bool_words(self):
        assert parse_config("adaptive_topology = FALSE\n").adaptive_topology is False
        assert parse_config("adaptive_attribute = yes\n").adaptive_attribute is True
        with pytest.raises(ValueError, match="true/false"):
            parse_config("adaptive_topology = maybe\n")


class TestGlorotInit:
    def test_single_entry_bound(self):
        vals = [glorot_init((1, 1), np.random.default_rng(s))[0, 0] for s in range(50)]
        assert all(abs(v) <= np.sqrt(3.0) for v in vals)

    def test_empirical_variance(self):
        rng = np.random.default_rng(0)
        fan_in, fan_out = 40, 60
        draws = glorot_init((fan_in, fan_out), rng)
        for _ in range(416):  # ~1e6 draws total
            draws = np.concatenate([draws.ravel(), glorot_init((fan_in, fan_out), rng).ravel()])
            if draws.size >= 1_000_000:
                break
        target = 2.0 / (fan_in + fan_out)
        assert abs(draws.var() - target) / target < 0.02

    def test_deterministic(self):
        a = glorot_init((3, 5), np.random.default_rng(7))
        b = glorot_init((3, 5), np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            glorot_init((0, 3), np.random.default_rng(0))


class TestAdam:
    def _setup(self, activation="relu"):
        params = init_params(3, 4, activation, np.random.default_rng(0))
        return params, init_adam(params)

    def test_first_step_magnitude_is_lr(self):
        params, state = self._setup()
        before = params.W1.copy()
        grads = {name: np.ones_like(arr) for name, arr in params.param_items()}
        adam_step(state, params, grads, lr=0.01)
        update = params.W1 - before
        assert np.allclose(np.abs(update), 0.01, rtol=1e-6)

    def test_zero_gradient_no_decay_is_identity(self):
        params, state = self._setup()
        before = {name: arr.copy() for name, arr in params.param_items()}
        grads = {name: np.zeros_like(arr) for name, arr in params.param_items()}
        adam_step(state, params, grads, lr=0.5, weight_decay=0.0)
        for name, arr in params.param_items():
            assert np.array_equal(arr, before[name]), name

    def test_weight_decay_hits_weights_not_biases(self):
        params, state = self._setup(activation="prelu")
        params.b1[:] = 1.0
        slopes_before = params.slopes.copy()
        b1_before = params.b1.copy()
        w1_before = params.W1.copy()
        grads = {name: np.zeros_like(arr) for name, arr in params.param_items()}
        adam_step(state, params, grads, lr=0.1, weight_decay=1e-2)
        assert np.array_equal(params.b1, b1_before)
        assert np.array_equal(params.slopes, slopes_before)
        moved = np.abs(params.W1 - w1_before)
        assert np.all(moved[np.abs(w1_before) > 1e-12] > 0)

    def test_non_finite_gradient_rejected(self):
        params, state = self._setup()
        grads = {name: np.zeros_like(arr) for name, arr in params.param_items()}
        grads["W1"][0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite gradient"):
            adam_step(state, params, grads, lr=0.1)

    def test_state_counts_steps(self):
        params, state = self._setup()
        grads = {name: np.ones_like(arr) for name, arr in params.param_items()}
        adam_step(state, params, grads, lr=0.01)
        adam_step(state, params, grads, lr=0.01)
        assert state.t == 2


class TestTrain:
    def test_toy_run_is_finite_and_reproducible(self):
        g = _toy_graph()
        config = TrainConfig(epochs=10, hidden_dim=3, seed=5, tau=0.5,
                             p_e1=0.0, p_e2=0.0, p_f1=0.0, p_f2=0.0)
        params_a, hist_a = train(g, config)
        params_b, hist_b = train(g, config)
        assert np.all(np.isfinite(hist_a)) and len(hist_a) == 10
        assert np.array_equal(hist_a, hist_b)
        for name, arr in params_a.param_items():
            assert np.array_equal(arr, dict(params_b.param_items())[name]), name

    def test_seeds_change_the_run(self):
        g = _toy_graph()
        base = TrainConfig(epochs=5, hidden_dim=3, tau=0.5)
        import dataclasses

        _, hist_a = train(g, base)
        _, hist_b = train(g, dataclasses.replace(base, seed=123))
        assert not np.array_equal(hist_a, hist_b)

    def test_divergence_reports_epoch(self):
        g = _toy_graph()
        config = TrainConfig(epochs=50, hidden_dim=3, tau=0.5,
                             learning_rate=1e150, weight_decay=0.0)
        with pytest.raises(TrainingDivergedError) as exc:
            train(g, config)
        assert exc.value.epoch >= 0
        assert "epoch" in str(exc.value)

    def test_loss_decreases_on_community_graph(self):
        rng = np.random.default_rng(0)
        g = sbm_generate(100, 2, 0.05, 0.005, 32, 0.3, rng)
        medians = []
        for seed in range(10):
            config = TrainConfig(epochs=100, seed=seed)
            _, hist = train(g, config)
            head = np.median(hist[:10])
            tail = np.median(hist[-10:])
            medians.append((head, tail))
        assert all(tail < head for head, tail in medians)

    def test_full_run_ends_below_start(self):
        rng = np.random.default_rng(0)
        g = sbm_generate(100, 2, 0.05, 0.005, 32, 0.3, rng)
        _, hist = train(g, TrainConfig(seed=0))
        assert hist[-1] < hist[0]

    def test_plans_share_centrality(self, karate):
        config = TrainConfig(p_e1=0.3, p_e2=0.3, p_f1=0.2, p_f2=0.2)
        plan1, plan2 = build_view_plans(karate, config)
        assert np.array_equal(plan1.edge_drop_probs, plan2.edge_drop_probs)
        assert np.array_equal(plan1.feature_mask_probs, plan2.feature_mask_probs)


class TestEmbed:
    def test_embeddings_are_pre_projector(self, karate):
        config = TrainConfig(epochs=3, hidden_dim=4, seed=0)
        params, _ = train(karate, config)
        h = embed(params, karate)
        h_direct, _ = encode(params, normalized_adjacency(karate), karate.features)
        assert np.array_equal(h, h_direct)
        assert h.shape == (34, 4)

    def test_deterministic(self, karate):
        config = TrainConfig(epochs=2, hidden_dim=8, seed=1)
        params, _ = train(karate, config)
        assert np.array_equal(embed(params, karate), embed(params, karate))


class TestLossCsv:
    def test_format(self, tmp_path):
        path = tmp_path / "loss.csv"
        write_loss_csv(np.array([1.5, 0.25]), str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,loss"
        assert lines[1] == "0,1.5"
        assert lines[2] == "1,0.25"
