import numpy as np
import pytest

from pcbls.losses import masked_pixel_ce, soft_bce, soft_ce
from pcbls.models import ModelSpec, forward, init_params, loss_and_grad, pack, unpack
from pcbls.numerics import softmax
from pcbls.soft_labels import segmentation_targets, uls, uls_matrix

from conftest import fd_gradient, grad_rel_error


class TestForward:
    def test_zero_params_linear(self):
        spec = ModelSpec("linear_softmax", (3, 4))
        logits = forward(spec, np.zeros(spec.param_count()), np.ones((2, 3)))
        assert np.array_equal(logits, np.zeros((2, 4)))

    def test_identity_weights(self):
        spec = ModelSpec("linear_softmax", (2, 2))
        params = pack([np.eye(2), np.zeros(2)])
        x = np.array([[3.0, -1.0], [0.5, 2.0]])
        assert np.array_equal(forward(spec, params, x), x)

    def test_mlp_golden_logits(self):
        # frozen from the first run at seed 12345
        spec = ModelSpec("mlp", (4, 3, 2))
        params = init_params(spec, 12345)
        x = np.array([[0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 0.5, 0.0]])
        want = np.array(
            [[0.58072981, -0.2437461], [0.31462254, -0.24178697]]
        )
        assert np.allclose(forward(spec, params, x), want, atol=1e-8)

    def test_init_is_deterministic(self):
        spec = ModelSpec("tiny_fcn", (2, 3, 3, 4))
        assert np.array_equal(init_params(spec, 7), init_params(spec, 7))
        assert not np.array_equal(init_params(spec, 7), init_params(spec, 8))

    def test_dim_mismatch(self):
        spec = ModelSpec("mlp", (4, 3, 2))
        with pytest.raises(ValueError):
            forward(spec, init_params(spec, 0), np.ones((2, 5)))

    def test_param_count_and_unpack(self):
        spec = ModelSpec("tiny_fcn", (2, 3, 4, 5))
        n = spec.param_count()
        assert n == (3 * 2 * 9 + 3) + (4 * 3 * 9 + 4) + (5 * 4 * 9 + 5)
        tensors = unpack(spec, np.arange(n, dtype=np.float64))
        assert [t.shape for t in tensors] == [
            (3, 2, 3, 3), (3,), (4, 3, 3, 3), (4,), (5, 4, 3, 3), (5,),
        ]
        assert np.array_equal(pack(tensors), np.arange(n, dtype=np.float64))


class TestSoftCe:
    def test_uniform_symmetric(self):
        loss, _ = soft_ce(np.zeros(4), np.full(4, 0.25))
        assert loss == pytest.approx(np.log(4), abs=1e-12)

    def test_one_hot_is_plain_ce(self, rng):
        logits = rng.normal(size=5)
        target = np.zeros(5)
        target[2] = 1.0
        loss, grad = soft_ce(logits, target)
        p = softmax(logits)
        assert loss == pytest.approx(-np.log(p[2]), abs=1e-12)
        assert np.allclose(grad, p - target, atol=1e-15)

    def test_gradient_formula(self, rng):
        logits = rng.normal(size=(3, 4))
        targets = uls_matrix(rng.integers(0, 4, 3), 4, 0.3)
        _, grad = soft_ce(logits, targets)
        assert np.allclose(grad, (softmax(logits, axis=1) - targets) / 3, atol=1e-15)

    def test_logit_gradient_matches_fd(self, rng):
        logits = rng.normal(size=5)
        target = uls(1, 5, 0.4)
        _, grad = soft_ce(logits, target)
        fd = fd_gradient(lambda z: soft_ce(z, target)[0], logits.copy())
        assert grad_rel_error(grad, fd) < 1e-6

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            soft_ce(np.zeros(3), np.array([0.5, 0.2, 0.1]))

    def test_uls_decomposition_identity(self, rng):
        # CE against a smoothed target splits into (1-eps) CE(one-hot) + eps CE(uniform)
        for _ in range(200):
            k = int(rng.integers(2, 8))
            y = int(rng.integers(0, k))
            eps = float(rng.uniform(0, 0.999))
            logits = rng.normal(scale=3, size=k)
            smoothed, _ = soft_ce(logits, uls(y, k, eps))
            onehot = np.zeros(k)
            onehot[y] = 1.0
            hard, _ = soft_ce(logits, onehot)
            uniform, _ = soft_ce(logits, np.full(k, 1.0 / k))
            assert smoothed == pytest.approx((1 - eps) * hard + eps * uniform, abs=1e-10)

    def test_gibbs_inequality(self, rng):
        for _ in range(30):
            k = int(rng.integers(2, 6))
            target = rng.dirichlet(np.ones(k))
            logits = rng.normal(size=k)
            loss, _ = soft_ce(logits, target)
            entropy = -(target * np.log(target)).sum()
            assert loss >= entropy - 1e-12
        # equality at the constructed point softmax(logits) == target
        target = np.array([0.5, 0.3, 0.2])
        loss, _ = soft_ce(np.log(target), target)
        entropy = -(target * np.log(target)).sum()
        assert loss == pytest.approx(entropy, abs=1e-12)

    def test_class_permutation_invariance(self, rng):
        logits = rng.normal(size=6)
        target = rng.dirichlet(np.ones(6))
        perm = rng.permutation(6)
        a, ga = soft_ce(logits, target)
        b, gb = soft_ce(logits[perm], target[perm])
        assert a == pytest.approx(b, abs=1e-12)
        assert np.allclose(ga[perm], gb, atol=1e-15)


class TestMaskedPixelCe:
    def test_all_ones_equals_unmasked_mean(self, rng):
        logits = rng.normal(size=(2, 3, 3, 4))
        targets = np.stack(
            [segmentation_targets(rng.integers(0, 4, (3, 3)), 4, epsilon=0.2) for _ in range(2)]
        )
        loss, grad = masked_pixel_ce(logits, targets, np.ones((2, 3, 3)))
        want, wgrad = soft_ce(logits.reshape(-1, 4), targets.reshape(-1, 4))
        assert loss == pytest.approx(want, abs=1e-12)
        assert np.allclose(grad.reshape(-1, 4), wgrad, atol=1e-15)

    def test_excluding_wrong_pixels_drops_loss(self):
        # two pixels: one predicted right, one predicted wrong
        logits = np.zeros((1, 1, 2, 2))
        logits[0, 0, 0] = [4.0, -4.0]  # confident class 0, correct
        logits[0, 0, 1] = [4.0, -4.0]  # confident class 0, wrong
        targets = np.zeros((1, 1, 2, 2))
        targets[0, 0, 0, 0] = 1.0
        targets[0, 0, 1, 1] = 1.0
        full, _ = masked_pixel_ce(logits, targets, np.ones((1, 1, 2)))
        only_right, _ = masked_pixel_ce(logits, targets, np.array([[[1.0, 0.0]]]))
        assert only_right < full

    def test_all_zero_mask_degenerate(self, rng):
        logits = rng.normal(size=(1, 2, 2, 3))
        targets = np.stack([segmentation_targets(rng.integers(0, 3, (2, 2)), 3)])
        loss, grad = masked_pixel_ce(logits, targets, np.zeros((1, 2, 2)))
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros_like(logits))

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            masked_pixel_ce(np.zeros((1, 2, 2, 3)), np.zeros((1, 2, 2, 3)), np.zeros((2, 2)))

    def test_non_binary_mask_rejected(self, rng):
        logits = rng.normal(size=(1, 2, 2, 3))
        targets = np.stack([segmentation_targets(rng.integers(0, 3, (2, 2)), 3)])
        with pytest.raises(ValueError):
            masked_pixel_ce(logits, targets, np.full((1, 2, 2), 0.5))


class TestSoftBce:
    def test_stationary_at_matching_target(self):
        z = np.array([0.3, -1.2, 2.0])
        t = 1.0 / (1.0 + np.exp(-z))
        _, grad = soft_bce(z, t)
        assert np.allclose(grad, 0.0, atol=1e-12)

    def test_ln2_at_zero_logit(self):
        loss, _ = soft_bce(np.array([0.0]), np.array([1.0]))
        assert loss == pytest.approx(np.log(2), abs=1e-12)

    def test_gradient_matches_fd(self, rng):
        z = rng.normal(size=6)
        t = rng.uniform(size=6)
        _, grad = soft_bce(z, t)
        fd = fd_gradient(lambda q: soft_bce(q, t)[0], z.copy())
        assert grad_rel_error(grad, fd) < 1e-6

    def test_rejects_out_of_range_target(self):
        with pytest.raises(ValueError):
            soft_bce(np.zeros(2), np.array([0.5, 1.2]))


def _random_case(rng, arch):
    if arch == "linear_softmax":
        spec = ModelSpec("linear_softmax", (4, 3))
        x = rng.normal(size=(3, 4))
    elif arch == "mlp":
        spec = ModelSpec("mlp", (4, 5, 3))
        x = rng.normal(size=(3, 4))
    else:
        spec = ModelSpec("tiny_fcn", (2, 3, 3, 3))
        x = rng.uniform(size=(1, 5, 5, 2))
    params = rng.normal(scale=0.5, size=spec.param_count())
    return spec, params, x


class TestBackwardGradientChecks:
    """Analytic parameter gradients vs central finite differences."""

    @pytest.mark.parametrize("arch", ["linear_softmax", "mlp"])
    def test_soft_ce_through_vector_models(self, rng, arch):
        for _ in range(10):
            spec, params, x = _random_case(rng, arch)
            targets = uls_matrix(rng.integers(0, 3, len(x)), 3, float(rng.uniform(0, 0.9)))
            _, grad = loss_and_grad(spec, params, x, targets, "soft_ce")
            fd = fd_gradient(lambda p: loss_and_grad(spec, p, x, targets, "soft_ce")[0], params)
            assert grad_rel_error(grad, fd) < 1e-4

    @pytest.mark.parametrize("arch", ["linear_softmax", "mlp"])
    def test_soft_bce_through_vector_models(self, rng, arch):
        for _ in range(10):
            spec, params, x = _random_case(rng, arch)
            targets = rng.uniform(size=(len(x), 3))
            _, grad = loss_and_grad(spec, params, x, targets, "soft_bce")
            fd = fd_gradient(lambda p: loss_and_grad(spec, p, x, targets, "soft_bce")[0], params)
            assert grad_rel_error(grad, fd) < 1e-4

    def test_masked_ce_through_fcn(self, rng):
        for _ in range(3):
            spec, params, x = _random_case(rng, "tiny_fcn")
            labels = rng.integers(0, 3, size=x.shape[:3])
            targets = np.stack(
                [segmentation_targets(l, 3, epsilon=0.3, sigma=0.9) for l in labels]
            )
            mask = (rng.uniform(size=x.shape[:3]) > 0.3).astype(np.float64)
            _, grad = loss_and_grad(spec, params, x, targets, "masked_pixel_ce", mask=mask)
            fd = fd_gradient(
                lambda p: loss_and_grad(spec, p, x, targets, "masked_pixel_ce", mask=mask)[0],
                params,
            )
            assert grad_rel_error(grad, fd) < 1e-4

    def test_loss_kind_validation(self, rng):
        spec, params, x = _random_case(rng, "mlp")
        with pytest.raises(ValueError):
            loss_and_grad(spec, params, x, np.ones((3, 3)) / 3, "masked_pixel_ce")
        with pytest.raises(ValueError):
            loss_and_grad(spec, params, x, np.ones((3, 3)) / 3, "nope")
