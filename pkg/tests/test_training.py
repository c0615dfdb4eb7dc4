import numpy as np
import pytest

from crbf.complex_linalg import cg_sample, make_rng
from crbf.errors import InvalidArgumentError, NumericOverflowError, StateError
from crbf.initialization import InitConfig, NetShape, init_proposed, target_variance
from crbf.network import Layer, Network, cost, network_forward
from crbf.training import (
    ParamCoord,
    TrainConfig,
    analytic_component,
    backward,
    backward_and_update,
    compute_beta,
    fd_gradient,
    fit,
    gradients,
    mse_db,
    shallow_update,
    train_epoch,
    update_scale,
)
from crbf.verification import all_coords, random_problem, shallow_equivalence, update_direction_suite


def small_dataset(seed, n=64, P=16, R=4):
    rng = make_rng(seed)
    X = cg_sample(n, P, target_variance(P), rng)
    D = cg_sample(n, R, target_variance(R), rng)
    return X, D


def deep_net(seed, neurons=(6, 5, 4)):
    return init_proposed(NetShape.build(16, list(neurons), 4), InitConfig(), make_rng(seed))


class TestMseDb:
    @pytest.mark.parametrize("mse, db", [(1.0, 0.0), (0.1, -10.0), (0.01, -20.0), (10.0, 10.0)])
    def test_values(self, mse, db):
        assert mse_db(mse) == pytest.approx(db)

    def test_zero(self):
        assert mse_db(0.0) == float("-inf")

    @pytest.mark.parametrize("bad", [-1e-3, float("nan")])
    def test_invalid(self, bad):
        with pytest.raises(InvalidArgumentError):
            mse_db(bad)


class TestTrainConfig:
    def test_bad_quadruple(self):
        with pytest.raises(InvalidArgumentError):
            TrainConfig([(0.1, 0.1, 0.1)])

    @pytest.mark.parametrize("rate", [-0.1, float("nan"), float("inf")])
    def test_bad_rate(self, rate):
        with pytest.raises(InvalidArgumentError):
            TrainConfig([(0.1, 0.1, 0.1, rate)])

    def test_negative_epochs(self):
        with pytest.raises(InvalidArgumentError):
            TrainConfig([(0.1,) * 4], epochs=-1)

    def test_depth_mismatch(self):
        net = deep_net(0, (4, 4))
        network_forward(net, np.zeros(16, dtype=complex))
        with pytest.raises(InvalidArgumentError):
            backward_and_update(net, np.zeros(4, dtype=complex), TrainConfig([(0.1,) * 4]))


class TestBackward:
    def test_needs_forward_pass(self):
        net = deep_net(0, (4,))
        with pytest.raises(StateError):
            backward(net, np.zeros(4, dtype=complex))

    def test_update_invalidates_cache(self):
        net = deep_net(1, (4, 4))
        X, D = small_dataset(1, n=1)
        network_forward(net, X[0])
        backward_and_update(net, D[0], TrainConfig([(0.1,) * 4] * 2))
        with pytest.raises(StateError):
            backward_and_update(net, D[0], TrainConfig([(0.1,) * 4] * 2))

    def test_last_psi_is_error(self):
        net = deep_net(2)
        X, D = small_dataset(2, n=1)
        y = network_forward(net, X[0]).copy()
        state = backward(net, D[0])
        np.testing.assert_array_equal(state.psi[-1], D[0] - y)

    def test_beta(self):
        layer = Layer(W=[[1 + 0j, 1]], b=[0], gamma=[[0], [1]], sigma=[2.0, 0.5])
        from crbf.network import layer_forward

        layer_forward(layer, np.array([0j]))
        # phi = [1, exp(-2)]
        np.testing.assert_allclose(compute_beta(layer), [0.5, np.exp(-2) / 0.5])

    def test_zero_error_means_no_update(self):
        net = deep_net(3)
        X, _ = small_dataset(3, n=1)
        d = network_forward(net, X[0]).copy()
        before = net.clone()
        backward_and_update(net, d, TrainConfig([(0.5,) * 4] * 3))
        for (_, _, a), (_, _, b) in zip(net.parameters(), before.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_zero_rates_leave_parameters(self):
        net = deep_net(4)
        X, D = small_dataset(4, n=1)
        before = net.clone()
        network_forward(net, X[0])
        backward_and_update(net, D[0], TrainConfig([(0.0,) * 4] * 3))
        for (_, _, a), (_, _, b) in zip(net.parameters(), before.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_returns_pre_update_cost(self):
        net = deep_net(5)
        X, D = small_dataset(5, n=1)
        y = network_forward(net, X[0]).copy()
        J = backward_and_update(net, D[0], TrainConfig([(0.1,) * 4] * 3))
        assert J == cost(D[0], y)


class TestGradients:
    def test_single_neuron_closed_form(self):
        # one neuron at the input: phi = 1, so dJ/dw = -(d - y) and dJ/dsigma = 0
        w, b0, d = 0.4 - 0.2j, 0.1j, 1.0 + 0.5j
        net = Network(P=1, R=1, layers=[Layer(W=[[w]], b=[b0], gamma=[[0.3 + 0.3j]], sigma=[1.0])])
        network_forward(net, np.array([0.3 + 0.3j]))
        g = gradients(net, np.array([d]))[0]
        e = d - (w + b0)
        assert g["W"][0, 0] == pytest.approx(-e)
        assert g["b"][0] == pytest.approx(-e)
        assert g["sigma"][0] == 0
        assert g["gamma"][0, 0] == 0

    def test_single_neuron_sigma_closed_form(self):
        # J = 0.5 |d - w exp(-a/s)|^2 with real w, d: dJ/ds = -(d - y) w exp(-a/s) a / s^2
        w, d, s, a = 0.8, 0.1, 1.3, 0.25
        net = Network(P=1, R=1, layers=[Layer(W=[[w + 0j]], b=[0], gamma=[[0]], sigma=[s])])
        network_forward(net, np.array([0.5 + 0j]))
        y = w * np.exp(-a / s)
        expected = -(d - y) * w * np.exp(-a / s) * a / s**2
        assert gradients(net, np.array([d + 0j]))[0]["sigma"][0] == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_double_fd(self, seed):
        net, x, d = random_problem(make_rng(100 + seed))
        network_forward(net, x)
        grads = gradients(net, d)
        for coord in all_coords(net):
            a = analytic_component(grads, coord)
            n = fd_gradient(net, x, d, coord)
            # double-precision central differences carry ~3e-12 round-off
            assert abs(a - n) <= 1e-5 * abs(a) + 2e-10, coord

    def test_extended_fd_agrees_with_double(self):
        net, x, d = random_problem(make_rng(7))
        coord = ParamCoord(0, "gamma", (1, 2), "im")
        a = fd_gradient(net, x, d, coord, extended=True)
        b = fd_gradient(net, x, d, coord, extended=False)
        assert a == pytest.approx(b, rel=1e-5, abs=1e-10)

    def test_fd_restores_parameters(self):
        net, x, d = random_problem(make_rng(8))
        before = net.clone()
        fd_gradient(net, x, d, ParamCoord(1, "W", (0, 1), "im"))
        for (_, _, a), (_, _, b) in zip(net.parameters(), before.parameters()):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize(
        "coord",
        [
            ParamCoord(5, "W", (0, 0)),
            ParamCoord(0, "alpha", (0,)),
            ParamCoord(0, "W", (99, 0)),
            ParamCoord(0, "sigma", (0,), "im"),
            ParamCoord(0, "b", (0,), "xx"),
        ],
    )
    def test_bad_coord(self, coord):
        net, x, d = random_problem(make_rng(0))
        with pytest.raises(InvalidArgumentError):
            fd_gradient(net, x, d, coord)

    def test_bad_step(self):
        net, x, d = random_problem(make_rng(0))
        with pytest.raises(InvalidArgumentError):
            fd_gradient(net, x, d, ParamCoord(0, "b", (0,)), h=0)


class TestUpdateRule:
    def test_update_scale(self):
        assert update_scale(1, 0, "W") == 1.0
        assert update_scale(1, 0, "gamma") == 0.5
        assert update_scale(3, 0, "sigma") == 0.25
        assert update_scale(3, 2, "b") == 1.0
        with pytest.raises(InvalidArgumentError):
            update_scale(2, 0, "nope")

    def test_direction_matches_scaled_gradient(self):
        for _, inc, expected in update_direction_suite(seed=3):
            assert inc == pytest.approx(expected, rel=1e-6, abs=1e-12)

    def test_shallow_closed_form_matches(self):
        assert shallow_equivalence(seed=4, n_samples=30) < 1e-12

    def test_shallow_update_basic(self):
        layer = Layer(W=[[1 + 0j]], b=[0], gamma=[[0]], sigma=[1.0])
        from crbf.network import layer_forward

        layer_forward(layer, np.array([0j]))  # phi = 1, y = 1
        shallow_update(layer, np.array([2 + 0j]), (0.5, 0.25, 0.1, 0.1))
        assert layer.W[0, 0] == 1.5
        assert layer.b[0] == 0.25

    @pytest.mark.parametrize("seed", range(5))
    def test_small_step_decreases_cost(self, seed):
        net, x, d = random_problem(make_rng(200 + seed))
        J0 = cost(d, network_forward(net, x))
        backward_and_update(net, d, TrainConfig([(1e-3,) * 4] * net.depth))
        assert cost(d, network_forward(net, x)) < J0

    def test_sigma_floor_counted(self):
        layer = Layer(W=[[1 + 0j, 1]], b=[0], gamma=[[0.5], [-0.5]], sigma=[1.0, 1.0])
        net = Network(P=1, R=1, layers=[layer])
        network_forward(net, np.array([0j]))
        # target far below output, a huge sigma rate pushes both variances negative
        backward_and_update(net, np.array([-50 + 0j]), TrainConfig([(0, 0, 0, 1e3)], sigma_floor=1e-6))
        assert np.all(net.layers[0].sigma == 1e-6)
        assert net.sigma_floor_hits == 2

    def test_overflow_is_reported(self):
        net = deep_net(6, (4,))
        X, D = small_dataset(6, n=64)
        D = D * 1e200
        cfg = TrainConfig([(1e100,) * 4])
        with pytest.raises(NumericOverflowError):
            train_epoch(net, (X, D), None, cfg, make_rng(0), engine="numpy")


class TestEpochs:
    @pytest.mark.parametrize("neurons", [(8,), (6, 5), (5, 4, 4, 3)])
    def test_numba_matches_numpy(self, neurons):
        X, D = small_dataset(11, n=48)
        rates = [(0.1, 0.1, 0.4, 0.2)] * len(neurons)
        cfg = TrainConfig(rates)
        a = deep_net(12, neurons)
        b = a.clone()
        ma = train_epoch(a, (X, D), (X, D), cfg, make_rng(5), engine="numpy")
        mb = train_epoch(b, (X, D), (X, D), cfg, make_rng(5), engine="numba")
        for (_, name, pa), (_, _, pb) in zip(a.parameters(), b.parameters()):
            np.testing.assert_allclose(pb, pa, rtol=1e-10, atol=1e-12, err_msg=name)
        assert mb.train_mse == pytest.approx(ma.train_mse, rel=1e-10)
        assert mb.val_mse == pytest.approx(ma.val_mse, rel=1e-10)
        assert a.sigma_floor_hits == b.sigma_floor_hits

    def test_numba_sigma_floor_matches_numpy(self):
        X, D = small_dataset(13, n=32)
        cfg = TrainConfig([(0.1, 0.1, 0.4, 50.0)])
        a = deep_net(13, (8,))
        b = a.clone()
        train_epoch(a, (X, D), None, cfg, make_rng(0), engine="numpy")
        train_epoch(b, (X, D), None, cfg, make_rng(0), engine="numba")
        assert a.sigma_floor_hits > 0
        assert a.sigma_floor_hits == b.sigma_floor_hits
        np.testing.assert_allclose(b.layers[0].sigma, a.layers[0].sigma, rtol=1e-10)

    def test_numba_overflow(self):
        net = deep_net(6, (4,))
        X, D = small_dataset(6, n=64)
        with pytest.raises(NumericOverflowError):
            train_epoch(net, (X, D * 1e200), None, TrainConfig([(1e100,) * 4]), make_rng(0))

    def test_unknown_engine(self):
        X, D = small_dataset(0, n=4)
        with pytest.raises(InvalidArgumentError):
            train_epoch(deep_net(0, (4,)), (X, D), None, TrainConfig([(0.1,) * 4]), make_rng(0), engine="gpu")

    def test_length_mismatch(self):
        X, D = small_dataset(0, n=4)
        with pytest.raises(InvalidArgumentError):
            train_epoch(deep_net(0, (4,)), (X, D[:3]), None, TrainConfig([(0.1,) * 4]), make_rng(0))

    def test_fit_deterministic(self):
        X, D = small_dataset(20, n=64)
        cfg = TrainConfig([(0.1, 0.1, 0.4, 0.2)], epochs=5)
        runs = []
        for _ in range(2):
            net = deep_net(21, (8,))
            hist = fit(net, (X, D), (X, D), cfg, make_rng(22))
            runs.append(([m.train_mse for m in hist], net))
        assert runs[0][0] == runs[1][0]
        for (_, _, a), (_, _, b) in zip(runs[0][1].parameters(), runs[1][1].parameters()):
            np.testing.assert_array_equal(a, b)

    def test_fit_learns_fixed_mapping(self):
        X, D = small_dataset(30, n=64)
        net = deep_net(31, (16,))
        hist = fit(net, (X, D), (X, D), TrainConfig([(0.1, 0.1, 0.4, 0.2)], epochs=40), make_rng(32))
        assert len(hist) == 40
        assert hist[-1].train_mse < hist[0].train_mse
        seen = []
        fit(deep_net(31, (16,)), (X, D), None, TrainConfig([(0.1,) * 4], epochs=3), make_rng(0), callback=seen.append)
        assert [m.epoch for m in seen] == [0, 1, 2]
        assert np.isnan(seen[0].val_mse)

    def test_unshuffled_order(self):
        X, D = small_dataset(40, n=16)
        cfg = TrainConfig([(0.1,) * 4], shuffle=False)
        a, b = deep_net(41, (4,)), deep_net(41, (4,))
        train_epoch(a, (X, D), None, cfg, make_rng(1))
        train_epoch(b, (X, D), None, cfg, make_rng(2))
        np.testing.assert_array_equal(a.layers[0].W, b.layers[0].W)
