import numpy as np
import pytest

from costlyfeat import net
from costlyfeat.errors import ContractViolation, ParseError, ValidationError

from oracles import central_difference, gradient_check, max_relative_error, random_mcts_batch


def zero_heads(theta):
    for name in ("Wp", "bp", "Wv", "bv"):
        getattr(theta, name)[...] = 0.0
    return theta


def test_param_count_formula():
    expected = (26 * 256 + 256) + (256 * 256 + 256) * 2 + (256 * 16 + 16) + (256 * 1 + 1)
    assert net.param_count(13, 3, 256) == expected
    assert net.init(13, 3, 256, seed=0).flat.size == expected


def test_init_deterministic_and_he_scaled():
    a, b = net.init(4, 2, 64, seed=5), net.init(4, 2, 64, seed=5)
    np.testing.assert_array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, net.init(4, 2, 64, seed=6).flat)
    big = net.init(50, 2, 400, seed=0)
    assert np.var(big.W2) == pytest.approx(2 / 400, rel=0.05)
    assert not big.b1.any() and not big.bv.any()


def test_zero_heads_give_uniform_policy_and_zero_value():
    theta = zero_heads(net.init(3, 2, 8, seed=0))
    legal = np.array([True, False, True, True, True])
    pv = net.forward(theta, np.zeros(6), legal)
    np.testing.assert_allclose(pv.probs, [0.25, 0, 0.25, 0.25, 0.25])
    assert pv.value == 0.0


def test_forward_single_legal_and_no_legal():
    theta = net.init(2, 2, 8, seed=1)
    pv = net.forward(theta, np.ones(4), np.array([False, False, False, True]))
    assert pv.probs.tolist() == [0, 0, 0, 1]
    with pytest.raises(ContractViolation):
        net.forward(theta, np.ones(4), np.zeros(4, bool))


def test_forward_shift_invariance_and_normalization():
    rng = np.random.default_rng(0)
    theta = net.init(3, 3, 16, seed=2)
    x = rng.normal(size=6)
    legal = np.array([1, 1, 0, 1, 1, 0], bool)
    base = net.forward(theta, x, legal)
    theta.bp[...] += 7.5
    shifted = net.forward(theta, x, legal)
    np.testing.assert_allclose(shifted.probs, base.probs, atol=1e-9)
    assert base.probs[legal].sum() == pytest.approx(1.0, abs=1e-6)
    assert np.all(base.probs[~legal] == 0)
    again = net.forward(theta, x, legal)
    assert np.array_equal(again.probs, shifted.probs) and again.value == shifted.value


def test_forward_batch_matches_single():
    rng = np.random.default_rng(3)
    theta = net.init(3, 2, 16, seed=3)
    X = rng.normal(size=(5, 6))
    legal = rng.random((5, 5)) > 0.3
    legal[:, 3] = True
    c = net.forward_batch(theta, X, legal)
    for i in range(5):
        pv = net.forward(theta, X[i], legal[i])
        np.testing.assert_allclose(c.probs[i], pv.probs, atol=1e-12)
        assert c.values[i] == pytest.approx(pv.value, abs=1e-12)


def test_entropy_bounds():
    rng = np.random.default_rng(1)
    for _ in range(50):
        legal = rng.random(6) > 0.4
        legal[0] = True
        probs = np.zeros(6)
        probs[legal] = rng.dirichlet(np.full(legal.sum(), 0.3))
        H = net.entropy(probs[None], legal[None])[0]
        assert -1e-12 <= H <= np.log(legal.sum()) + 1e-12


@pytest.mark.parametrize("kind", ["a2c", "mcts"])
@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(kind, seed):
    assert gradient_check(kind, seed) < 1e-4


def test_a2c_stationary_point_has_zero_gradient():
    rng = np.random.default_rng(0)
    theta = net.init(3, 2, 8, seed=0)
    batch = []
    for _ in range(3):
        x, legal = rng.normal(size=6), np.ones(5, bool)
        v = net.forward(theta, x, legal).value
        batch.append(net.A2CSample(x, legal, 1, 0.0, 0.0, v))
    assert np.max(np.abs(net.a2c_gradient(theta, batch))) < 1e-12


def test_a2c_ascent_raises_logprob():
    theta = net.init(2, 2, 8, seed=4)
    x, legal = np.array([1.0, 0.0, 0.5, 0.0]), np.ones(4, bool)
    before = net.forward(theta, x, legal).probs[2]
    g = net.a2c_gradient(theta, [net.A2CSample(x, legal, 2, 1.0, 0.0, 0.0)])
    after = net.forward(theta.with_flat(theta.flat - 1e-3 * g), x, legal).probs[2]
    assert after > before


def test_mcts_gradient_zero_at_minimum():
    theta = net.init(2, 3, 8, seed=0)
    x, legal = np.array([1.0, 0.0, -0.3, 0.0]), np.array([0, 1, 1, 1, 1], bool)
    pv = net.forward(theta, x, legal)
    g = net.mcts_gradient(theta, [net.MCTSSample(x, legal, pv.probs, pv.value)])
    assert np.max(np.abs(g)) < 1e-12


def test_mcts_target_validation():
    theta = net.init(2, 2, 4, seed=0)
    legal = np.array([1, 0, 1, 1], bool)
    with pytest.raises(ValidationError):
        net.mcts_gradient(theta, [net.MCTSSample(np.zeros(4), legal, np.array([0.5, 0, 0.4, 0]), 0.0)])
    with pytest.raises(ValidationError):
        net.mcts_gradient(theta, [net.MCTSSample(np.zeros(4), legal, np.array([0.5, 0.5, 0, 0]), 0.0)])
    with pytest.raises(ValidationError):
        net.a2c_gradient(theta, [net.A2CSample(np.full(4, np.nan), legal, 0, 1.0, 0.0, 0.0)])


def test_cross_entropy_descent_reaches_target():
    rng = np.random.default_rng(2)
    theta = net.init(2, 2, 16, seed=2)
    batch = [s._replace(z=0.0) for s in random_mcts_batch(rng, 2, 2, size=3)]
    opt = net.AdamState.zeros(theta)
    for _ in range(1500):
        theta, opt = net.apply_update(theta, net.mcts_gradient(theta, batch, 0.0), opt, 1e-2)
    for s in batch:
        q = net.forward(theta, s.state_vec, s.legal).probs
        m = s.legal & (s.pi > 0)
        assert np.sum(s.pi[m] * np.log(s.pi[m] / q[m])) < 1e-3


def test_adam_minimizes_square():
    # f(w) = w^2 on the first coordinate of a real parameter vector
    theta = net.init(1, 2, 1, seed=0)
    flat = np.zeros_like(theta.flat)
    flat[0] = 1.0
    theta = theta.with_flat(flat)
    opt = net.AdamState.zeros(theta)
    for _ in range(200):
        g = np.zeros_like(theta.flat)
        g[0] = 2 * theta.flat[0]
        theta, opt = net.apply_update(theta, g, opt, lr=0.1)
    assert abs(theta.flat[0]) < 1e-2


def test_adam_zero_gradient_and_determinism():
    theta = net.init(2, 2, 4, seed=0)
    opt = net.AdamState.zeros(theta)
    same, _ = net.apply_update(theta, np.zeros_like(theta.flat), opt)
    np.testing.assert_array_equal(same.flat, theta.flat)
    g = np.random.default_rng(0).normal(size=theta.flat.size)
    a, sa = net.apply_update(theta, g, opt)
    b, sb = net.apply_update(theta, g, opt)
    np.testing.assert_array_equal(a.flat, b.flat)
    np.testing.assert_array_equal(sa.v, sb.v)
    bad = g.copy()
    bad[0] = np.inf
    before = theta.flat.copy()
    with pytest.raises(ValidationError):
        net.apply_update(theta, bad, opt)
    np.testing.assert_array_equal(theta.flat, before)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    theta = net.init(5, 3, 16, seed=9)
    theta.flat[:] += np.random.default_rng(0).normal(size=theta.flat.size)
    path = tmp_path / "m.ckpt"
    net.save_checkpoint(theta, path, {"stage": "test"})
    back, header = net.load_checkpoint(path)
    assert back.flat.tobytes() == theta.flat.tobytes()
    assert (header["p"], header["K"], header["H"], header["seed"]) == (5, 3, 16, 9)
    assert header["meta"] == {"stage": "test"}
    assert [l["name"] for l in header["layers"]] == list(net.LAYER_NAMES)
    net.save_checkpoint(back, tmp_path / "again.ckpt", {"stage": "test"})
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ParseError):
        net.load_checkpoint(path)


def test_relative_error_helper_sanity():
    g = np.array([1.0, -2.0, 0.0])
    assert max_relative_error(g, g) == 0.0
    fd = central_difference(lambda w: float((w ** 2).sum()), np.array([1.0, -2.0, 0.5]))
    np.testing.assert_allclose(fd, [2.0, -4.0, 1.0], atol=1e-8)
