import numpy as np
import pytest

from scrambleparse import nn


def rng_():
    return np.random.default_rng(0)


def scalar_loss(Y, proj):
    """Deterministic scalar readout so layer outputs can be gradient-checked."""
    return float((Y * proj).sum())


class TestSoftmaxAndLoss:
    def test_zero_logits_uniform(self):
        p = nn.softmax(np.zeros(7))
        assert np.allclose(p, 1 / 7)

    def test_rows_sum_to_one(self):
        rng = rng_()
        logits = rng.normal(size=(50, 9)) * 10
        p = nn.softmax(logits)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert (p > 0).all()

    def test_shift_invariance_of_argmax(self):
        rng = rng_()
        z = rng.normal(size=12)
        assert np.argmax(nn.softmax(z)) == np.argmax(nn.softmax(z + 123.4))
        assert np.allclose(nn.softmax(z), nn.softmax(z + 123.4))

    def test_nll_gradient_closed_form(self):
        rng = rng_()
        logits = rng.normal(size=(4, 6))
        gold = np.array([1, 0, 5, 2])
        loss, dlogits = nn.nll_loss(logits, gold)
        probs = nn.softmax(logits)
        expect = probs.copy()
        expect[np.arange(4), gold] -= 1.0
        assert np.allclose(dlogits, expect)
        assert loss == pytest.approx(-np.log(probs[np.arange(4), gold]).sum())


class TestDropout:
    def test_p_zero_all_ones(self):
        mask = nn.dropout_mask(rng_(), (100,), 0.0, training=True)
        assert (mask == 1.0).all()

    def test_inference_all_ones(self):
        mask = nn.dropout_mask(rng_(), (100,), 0.9, training=False)
        assert (mask == 1.0).all()

    def test_empirical_drop_rate(self):
        p = 0.3
        mask = nn.dropout_mask(rng_(), (100000,), p, training=True)
        dropped = (mask == 0.0).mean()
        assert abs(dropped - p) < 0.01
        kept = mask[mask > 0]
        assert np.allclose(kept, 1.0 / (1.0 - p))

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            nn.dropout_mask(rng_(), (3,), 1.0)


class TestMLP:
    def test_zero_weights_uniform_output(self):
        mlp = nn.MLP(5, 8, 4, rng_(), "m")
        for p in mlp.params():
            p.value[...] = 0.0
        probs = mlp.predict_proba(np.ones(5))
        assert np.allclose(probs, 0.25)

    def test_probabilities_normalized_on_random_inputs(self):
        rng = rng_()
        mlp = nn.MLP(6, 10, 5, rng, "m")
        X = rng.normal(size=(30, 6))
        probs = mlp.predict_proba(X)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert (probs > 0).all()

    def test_gradient_check(self):
        rng = rng_()
        mlp = nn.MLP(4, 6, 3, rng, "m")
        X = rng.normal(size=(5, 4))
        gold = np.array([0, 2, 1, 1, 0])

        def loss_fn():
            logits, _ = mlp.forward(X, training=False)
            return nn.nll_loss(logits, gold)[0]

        for p in mlp.params():
            p.zero_grad()
        logits, cache = mlp.forward(X, training=False)
        _, dlogits = nn.nll_loss(logits, gold)
        mlp.backward(dlogits, cache)
        assert nn.check_gradients(loss_fn, mlp.params()) < 1e-4

    def test_input_gradient_via_linear(self):
        rng = rng_()
        lin = nn.Linear(3, 2, rng, "l")
        X = rng.normal(size=(4, 3))
        proj = rng.normal(size=(4, 2))
        Y, cache = lin.forward(X)
        dX = lin.backward(proj, cache)
        # finite differences on the input
        num = np.zeros_like(X)
        eps = 1e-6
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                Xp, Xm = X.copy(), X.copy()
                Xp[i, j] += eps
                Xm[i, j] -= eps
                num[i, j] = (scalar_loss(lin.forward(Xp)[0], proj)
                             - scalar_loss(lin.forward(Xm)[0], proj)) / (2 * eps)
        assert np.allclose(dX, num, atol=1e-6)


class TestLSTM:
    def test_output_shapes(self):
        rng = rng_()
        bi = nn.BiLSTM(5, 4, rng, "b")
        X = rng.normal(size=(7, 5))
        Y, _ = bi.forward(X)
        assert Y.shape == (7, 8)
        Y1, _ = bi.forward(X[:1])
        assert Y1.shape == (1, 8)

    def test_all_zero_parameters_give_zero_outputs(self):
        rng = rng_()
        bi = nn.BiLSTM(3, 4, rng, "b")
        for p in bi.params():
            p.value[...] = 0.0
        Y, _ = bi.forward(rng.normal(size=(5, 3)))
        assert np.allclose(Y, 0.0)

    def test_direction_symmetry_with_mirrored_cells(self):
        rng = rng_()
        a = nn.BiLSTM(4, 3, rng, "a")
        b = nn.BiLSTM(4, 3, rng, "b")
        # mirror: forward cell of b <- backward cell of a and vice versa
        for src, dst in zip(a.bwd.params(), b.fwd.params()):
            dst.value[...] = src.value
        for src, dst in zip(a.fwd.params(), b.bwd.params()):
            dst.value[...] = src.value
        X = rng.normal(size=(6, 4))
        Ya, _ = a.forward(X)
        Yb, _ = b.forward(X[::-1])
        H = 3
        swapped = np.concatenate([Yb[::-1][:, H:], Yb[::-1][:, :H]], axis=1)
        assert np.allclose(Ya, swapped)

    def test_gradient_check_single_direction(self):
        rng = rng_()
        cell = nn.LSTMCell(3, 4, rng, "c")
        X = rng.normal(size=(5, 3))
        proj = rng.normal(size=(5, 4))

        def loss_fn():
            return scalar_loss(cell.run(X)[0], proj)

        for p in cell.params():
            p.zero_grad()
        Hs, cache = cell.run(X)
        cell.backward(proj, cache)
        assert nn.check_gradients(loss_fn, cell.params()) < 1e-4

    def test_gradient_check_bilstm_stack_and_inputs(self):
        rng = rng_()
        stack = nn.BiLSTMStack(3, 2, 2, rng, "s")
        X = rng.normal(size=(4, 3))
        proj = rng.normal(size=(4, 4))

        def loss_fn():
            return scalar_loss(stack.forward(X)[0], proj)

        for p in stack.params():
            p.zero_grad()
        Y, caches = stack.forward(X)
        dX = stack.backward(proj, caches)
        assert nn.check_gradients(loss_fn, stack.params()) < 1e-4
        # input gradient against finite differences
        eps = 1e-6
        num = np.zeros_like(X)
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                Xp, Xm = X.copy(), X.copy()
                Xp[i, j] += eps
                Xm[i, j] -= eps
                num[i, j] = (scalar_loss(stack.forward(Xp)[0], proj)
                             - scalar_loss(stack.forward(Xm)[0], proj)) / (2 * eps)
        assert np.allclose(dX, num, atol=1e-5)

    def test_reverse_cell_uses_future_context_only(self):
        rng = rng_()
        cell = nn.LSTMCell(2, 3, rng, "c")
        X = rng.normal(size=(5, 2))
        H1, _ = cell.run(X, reverse=True)
        X2 = X.copy()
        X2[0] += 10.0  # changing the first position cannot affect later reverse states
        H2, _ = cell.run(X2, reverse=True)
        assert np.allclose(H1[1:], H2[1:])
        assert not np.allclose(H1[0], H2[0])


class TestOptimizer:
    def test_plain_sgd_reduction(self):
        p = nn.Param(np.array([1.0, -2.0]), "p")
        p.grad[...] = np.array([0.5, 0.5])
        opt = nn.MomentumSGD([p], lr=0.1, momentum=0.0, l2=0.0, clip_norm=None)
        opt.step()
        assert np.allclose(p.value, [0.95, -2.05])

    def test_momentum_accumulates_velocity(self):
        p = nn.Param(np.zeros(1), "p")
        opt = nn.MomentumSGD([p], lr=1.0, momentum=0.5, l2=0.0, clip_norm=None)
        p.grad[...] = 1.0
        opt.step()  # v = -1, theta = -1
        opt.step()  # v = -1.5, theta = -2.5
        assert np.allclose(p.value, [-2.5])

    def test_l2_pulls_towards_zero(self):
        p = nn.Param(np.array([10.0]), "p")
        opt = nn.MomentumSGD([p], lr=0.1, momentum=0.0, l2=0.5, clip_norm=None)
        opt.step()  # grad zero, l2 only: theta -= 0.1*0.5*10
        assert np.allclose(p.value, [9.5])

    def test_clipping_rescales_large_gradients(self):
        p = nn.Param(np.zeros(4), "p")
        p.grad[...] = np.array([30.0, 0.0, 40.0, 0.0])  # norm 50
        opt = nn.MomentumSGD([p], lr=1.0, momentum=0.0, l2=0.0, clip_norm=5.0)
        opt.step()
        assert np.allclose(p.value, [-3.0, 0.0, -4.0, 0.0])

    def test_nonfinite_gradient_names_parameter(self):
        p = nn.Param(np.zeros(2), "layers.W")
        p.grad[...] = np.array([np.nan, 0.0])
        opt = nn.MomentumSGD([p])
        with pytest.raises(FloatingPointError, match="layers.W"):
            opt.step()

    def test_memorization_loss_decreases_monotonically(self):
        rng = rng_()
        X = rng.normal(size=(20, 6))
        gold = rng.integers(0, 3, size=20)
        mlp = nn.MLP(6, 16, 3, rng, "m")
        opt = nn.MomentumSGD(mlp.params(), lr=0.01, momentum=0.9, l2=1e-6)
        losses = []
        for _ in range(10):
            logits, cache = mlp.forward(X, training=False)
            loss, dlogits = nn.nll_loss(logits, gold)
            losses.append(loss)
            mlp.backward(dlogits, cache)
            opt.step()
            opt.zero_grad()
        assert all(b < a for a, b in zip(losses, losses[1:]))


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = rng_()
        stack = nn.BiLSTMStack(3, 4, 2, rng, "s")
        mlp = nn.MLP(8, 5, 3, rng, "m")
        params = stack.params() + mlp.params()
        path = tmp_path / "model.spnn"
        nn.save_checkpoint(path, params, meta={"note": "test"})
        payload = nn.load_checkpoint(path)
        assert payload["meta"]["note"] == "test"
        stack2 = nn.BiLSTMStack(3, 4, 2, np.random.default_rng(99), "s")
        mlp2 = nn.MLP(8, 5, 3, np.random.default_rng(99), "m")
        nn.restore_params(stack2.params() + mlp2.params(), payload["arrays"])
        for a, b in zip(params, stack2.params() + mlp2.params()):
            assert a.value.tobytes() == b.value.tobytes()

    def test_missing_parameter_rejected(self, tmp_path):
        p = nn.Param(np.zeros(3), "only")
        path = tmp_path / "m.spnn"
        nn.save_checkpoint(path, [p], meta={})
        other = nn.Param(np.zeros(3), "different")
        with pytest.raises(ValueError, match="different"):
            nn.restore_params([other], nn.load_checkpoint(path)["arrays"])

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"WRONG" + b"?")
        with pytest.raises(ValueError, match="magic"):
            nn.load_checkpoint(path)
