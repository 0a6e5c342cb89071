import numpy as np
import pytest

from emberlab import autodiff as ad
from emberlab import losses
from emberlab.autodiff import Tensor
from emberlab.errors import ConfigError, DimensionError
from emberlab.losses import LossWeights


RNG = np.random.default_rng(7)


def random_fields(t=2, m=4, p=4):
    """Truth/prediction pair kept clear of the indicator thresholds."""
    y = RNG.uniform(0.0, 0.7, size=(t, m, p))
    yhat = RNG.uniform(0.0, 0.7, size=(t, m, p))
    for arr in (y, yhat):
        for thr in (0.1, 0.65):
            close = np.abs(arr - thr) < 1e-3
            arr[close] += 2e-3
    return y, yhat


def grad_wrt_prediction(loss_fn, yhat0):
    t = Tensor(yhat0.copy(), requires_grad=True)
    loss_fn(t).backward()
    return t.grad.copy()


def fd_wrt_prediction(loss_fn, yhat0, step=1e-6):
    g = np.zeros_like(yhat0)
    flat = yhat0.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = loss_fn(Tensor(yhat0)).item()
        flat[i] = orig - step
        lo = loss_fn(Tensor(yhat0)).item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return g


def assert_fd_match(loss_fn, yhat0, rtol=1e-6):
    analytic = grad_wrt_prediction(loss_fn, yhat0)
    fd = fd_wrt_prediction(loss_fn, yhat0.copy())
    denom = np.maximum(np.abs(fd), 1.0)
    assert np.max(np.abs(analytic - fd) / denom) < rtol


class TestFuelTransportLoss:
    def test_constant_prediction_is_zero(self):
        y = RNG.uniform(0, 0.7, size=(3, 2, 2))
        yhat = np.repeat(RNG.uniform(0, 0.7, size=(1, 2, 2)), 3, axis=0)
        assert losses.loss_ft(y, yhat, eps=0.001).item() == 0.0

    def test_hand_value(self):
        y = np.array([0.5, 0.5]).reshape(2, 1, 1)
        yhat = np.array([0.2, 0.4]).reshape(2, 1, 1)
        assert losses.loss_ft(y, yhat, eps=0.001).item() == pytest.approx(
            0.005, abs=1e-12)

    def test_large_tolerance_masks_everything(self):
        y = np.array([0.5, 0.5]).reshape(2, 1, 1)
        yhat = np.array([0.2, 0.4]).reshape(2, 1, 1)
        assert losses.loss_ft(y, yhat, eps=0.5).item() == 0.0

    def test_single_frame_rejected(self):
        with pytest.raises(DimensionError):
            losses.loss_ft(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), eps=0.001)

    def test_gradient(self):
        y, yhat = random_fields()
        assert_fd_match(lambda t: losses.loss_ft(y, t, eps=0.001), yhat)


class TestSpreadLosses:
    def test_ros_no_burned_cells(self):
        frame = np.full((4, 4), 0.7)
        assert losses.ros(frame, frame, 2, 0, eps_b=0.1) == 0.0

    def test_ros_hand_value(self):
        frame0 = np.full((4, 4), 0.7)
        frame0[:, 0] = 0.05
        frame2 = np.full((4, 4), 0.7)
        frame2[:, :3] = 0.05
        assert losses.ros(frame2, frame0, 2, 0, eps_b=0.1) == pytest.approx(1.0)

    def test_ros_same_step_rejected(self):
        with pytest.raises(ZeroDivisionError):
            losses.ros(np.zeros((2, 2)), np.zeros((2, 2)), 3, 3, eps_b=0.1)

    def test_loss_ros_identity(self):
        y, _ = random_fields(t=4)
        assert losses.loss_ros(y, y.copy(), eps_b=0.1).item() == 0.0

    def test_ba_all_burned(self):
        assert losses.ba(np.zeros((3, 3)), eps_b=0.1) == 100.0

    def test_ba_quarter(self):
        frame = np.full((2, 2), 0.5)
        frame[0, 0] = 0.05
        assert losses.ba(frame, eps_b=0.1) == 25.0

    def test_loss_ba_hand_value(self):
        # BA(Y) = [0, 25], BA(Yhat) = [0, 35] -> (0 + 100) / 2
        y = np.full((2, 2, 2), 0.7)
        y[1, 0, 0] = 0.05
        yhat = np.full((2, 20, 20), 0.7)
        yhat[1].reshape(-1)[:140] = 0.05
        y2 = np.full((2, 20, 20), 0.7)
        y2[1].reshape(-1)[:100] = 0.05
        assert losses.loss_ba(y2, yhat, eps_b=0.1).item() == pytest.approx(50.0)


class TestBurnRegularization:
    def test_identity_is_zero(self):
        y, _ = random_fields()
        assert losses.loss_burned(y, y.copy(), eps_b=0.1).item() == 0.0
        assert losses.loss_unburned(y, y.copy(), eps_u=0.65).item() == 0.0

    def test_hand_values(self):
        y = np.array([0.05, 0.7]).reshape(1, 1, 2)
        yhat = np.array([0.25, 0.5]).reshape(1, 1, 2)
        assert losses.loss_burned(y, yhat, eps_b=0.1).item() == pytest.approx(0.04)
        assert losses.loss_unburned(y, yhat, eps_u=0.65).item() == pytest.approx(0.04)

    def test_band_only_truth_is_zero(self):
        y = np.full((2, 3, 3), 0.4)  # inside [eps_b, eps_u]
        yhat = RNG.uniform(0, 0.7, size=(2, 3, 3))
        assert losses.loss_burned(y, yhat, eps_b=0.1).item() == 0.0
        assert losses.loss_unburned(y, yhat, eps_u=0.65).item() == 0.0

    def test_gradients(self):
        y, yhat = random_fields()
        assert_fd_match(lambda t: losses.loss_burned(y, t, eps_b=0.1), yhat)
        assert_fd_match(lambda t: losses.loss_unburned(y, t, eps_u=0.65), yhat)


class TestGramLoss:
    def test_identity_is_zero(self):
        y, _ = random_fields(t=3)
        assert losses.loss_gram(y, y.copy()).item() == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        y = np.array([[[2.0]]])
        yhat = np.array([[[1.0]]])
        assert losses.loss_gram(y, yhat).item() == pytest.approx(9.0)

    def test_sign_blind(self):
        y, _ = random_fields(t=2)
        assert losses.loss_gram(y, -y).item() == pytest.approx(0.0, abs=1e-15)

    def test_gradient(self):
        y, yhat = random_fields(t=2, m=3, p=3)
        assert_fd_match(lambda t: losses.loss_gram(y, t), yhat, rtol=1e-5)


class TestLossWeights:
    def test_threshold_ordering_enforced(self):
        with pytest.raises(ConfigError):
            LossWeights(eps_b=0.5, eps_u=0.4)

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            LossWeights(lambda_ft=-1.0)


class TestTotalLoss:
    def test_degenerates_to_mse(self):
        y, yhat = random_fields()
        w = LossWeights(lambda_ft=0, lambda_ros=0, lambda_ba=0,
                        lambda_burned=0, lambda_unburned=0,
                        enable_ft=False, enable_ros=False, enable_ba=False,
                        enable_burned=False, enable_unburned=False)
        total, breakdown = losses.total_loss(y, yhat, w)
        assert total.item() == pytest.approx(np.mean((y - yhat) ** 2))
        assert breakdown["ft"] == 0.0

    def test_composition_matches_dot_product(self):
        y, yhat = random_fields(t=3)
        w = LossWeights()
        total, breakdown = losses.total_loss(y, yhat, w)
        expected = (breakdown["base"]
                    + w.lambda_ft * breakdown["ft"]
                    + w.lambda_ros * breakdown["ros"]
                    + w.lambda_ba * breakdown["ba"]
                    + w.lambda_burned * breakdown["burned"]
                    + w.lambda_unburned * breakdown["unburned"])
        assert total.item() == pytest.approx(expected, rel=1e-12)

    def test_zero_weight_enabled_is_bitwise_noop(self):
        y, yhat = random_fields(t=3)
        w_disabled = LossWeights(enable_ft=False)
        w_zero = LossWeights(lambda_ft=0.0, enable_ft=True)
        t1, _ = losses.total_loss(y, yhat.copy(), w_disabled)
        t2, _ = losses.total_loss(y, yhat.copy(), w_zero)
        assert t1.item() == t2.item()

    def test_all_terms_nonnegative_and_zero_at_identity(self):
        y, _ = random_fields(t=3)
        total, breakdown = losses.total_loss(y, y.copy(), LossWeights())
        for name, value in breakdown.items():
            assert value >= 0.0
            assert value == pytest.approx(0.0, abs=1e-15), name

    def test_base_pairing_validated(self):
        y, yhat = random_fields()
        with pytest.raises(ConfigError):
            losses.total_loss(y, yhat, LossWeights(base=losses.BASE_MDN_NLL))
        with pytest.raises(ConfigError):
            losses.total_loss(y, yhat, LossWeights(), base_loss=Tensor(1.0))

    def test_pgcl_plus_differs_by_mdn_terms(self):
        y, yhat = random_fields(t=3)
        w_mse = LossWeights()
        w_mdn = LossWeights(base=losses.BASE_MDN_NLL)
        mdn_nll = Tensor(0.8)
        pp = Tensor(0.3)
        t_pgcl, b_pgcl = losses.total_loss(y, yhat.copy(), w_mse)
        t_plus, _ = losses.total_loss(y, yhat.copy(), w_mdn,
                                      base_loss=mdn_nll, poisson_loss=pp)
        delta = (mdn_nll.item() + pp.item()) - b_pgcl["base"]
        assert t_plus.item() - t_pgcl.item() == pytest.approx(delta, rel=1e-12)

    def test_gradient_of_weighted_total(self):
        y, yhat = random_fields(t=2)
        w = LossWeights()
        assert_fd_match(lambda t: losses.total_loss(y, t, w)[0], yhat)
