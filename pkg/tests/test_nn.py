"""MLP, bi-LSTM, Adam, ParamStore: values against independent recomputation."""

import os

import numpy as np
import pytest

import refground.kernel as K
from refground.errors import SchemaError, ShapeError, UsageError
from oracles import bilstm_reference, fd_gradient, mlp_forward, rel_err


def build_mlp_store(dims, seed):
    store = K.ParamStore()
    K.init_mlp(store, "m", dims, np.random.default_rng(seed))
    return store


def mlp_weight_pairs(store, prefix, n_layers):
    return [
        (store[f"{prefix}.w{i}"].data, store[f"{prefix}.b{i}"].data)
        for i in range(n_layers)
    ]


def test_mlp_matches_hand_forward():
    store = build_mlp_store([4, 8, 2], seed=123)
    x = np.ones(4)
    got = K.mlp_apply(store, "m", K.Tensor(x)).data
    want = mlp_forward(mlp_weight_pairs(store, "m", 2), x)
    assert np.array_equal(got, want)


def test_mlp_rows_match_per_vector_application():
    store = build_mlp_store([3, 6, 4], seed=5)
    rng = np.random.default_rng(8)
    xs = rng.uniform(-1, 1, size=(5, 3))
    batched = K.mlp_apply(store, "m", K.Tensor(xs)).data
    for i in range(5):
        single = K.mlp_apply(store, "m", K.Tensor(xs[i])).data
        assert np.allclose(batched[i], single)


def test_mlp_identity_configuration():
    store = K.ParamStore()
    store.add("id.w0", np.eye(4))
    store.add("id.b0", np.zeros(4))
    x = np.array([0.3, -0.7, 0.0, 2.0])
    assert np.array_equal(K.mlp_apply(store, "id", K.Tensor(x)).data, x)


def test_mlp_shape_error_names_layer():
    store = build_mlp_store([4, 8, 2], seed=1)
    with pytest.raises(ShapeError) as err:
        K.mlp_apply(store, "m", K.Tensor(np.ones(5)))
    assert "m.w0" in str(err.value)


def test_mlp_unknown_prefix():
    store = K.ParamStore()
    with pytest.raises(UsageError):
        K.mlp_apply(store, "nope", K.Tensor(np.ones(3)))


def test_bilstm_matches_stepwise_recurrence():
    hidden, embed = 5, 3
    store = K.ParamStore()
    K.init_bilstm(store, "enc", embed, hidden, np.random.default_rng(77))
    rng = np.random.default_rng(78)
    xs = [rng.uniform(-1, 1, size=embed) for _ in range(2)]
    contexts, summary = K.bilstm_encode(store, "enc", [K.Tensor(x) for x in xs])
    ref_ctx, ref_sum = bilstm_reference(
        store["enc.fw.w"].data,
        store["enc.fw.b"].data,
        store["enc.bw.w"].data,
        store["enc.bw.b"].data,
        xs,
        hidden,
    )
    assert len(contexts) == 2
    for got, want in zip(contexts, ref_ctx):
        assert rel_err(got.data, want) < 1e-12
    assert rel_err(summary.data, ref_sum) < 1e-12


def test_bilstm_single_token_summary_equals_context():
    store = K.ParamStore()
    K.init_bilstm(store, "enc", 4, 6, np.random.default_rng(2))
    xs = [K.Tensor(np.random.default_rng(3).uniform(-1, 1, size=4))]
    contexts, summary = K.bilstm_encode(store, "enc", xs)
    assert np.array_equal(contexts[0].data, summary.data)


def test_bilstm_empty_sequence_rejected():
    store = K.ParamStore()
    K.init_bilstm(store, "enc", 4, 4, np.random.default_rng(2))
    with pytest.raises(UsageError):
        K.bilstm_encode(store, "enc", [])


def test_bilstm_gradient_check():
    hidden, embed = 3, 2
    store = K.ParamStore()
    K.init_bilstm(store, "enc", embed, hidden, np.random.default_rng(21))
    rng = np.random.default_rng(22)
    xs = [rng.uniform(-1, 1, size=embed) for _ in range(3)]
    cot = rng.uniform(-1, 1, size=2 * hidden)

    def run():
        _, summary = K.bilstm_encode(store, "enc", [K.Tensor(x) for x in xs])
        return K.sum_all(K.mul(summary, K.Tensor(cot)))

    with K.Tape() as tape:
        loss = run()
    tape.backward(loss)

    for name in ("enc.fw.w", "enc.bw.w", "enc.fw.b", "enc.bw.b"):
        p = store[name]
        got = p.grad.copy()
        base = p.data.copy()

        def f(x, p=p, base=base):
            p.data = x.reshape(base.shape)
            out = run().item()
            p.data = base
            return out

        want = fd_gradient(lambda v: f(v), base.copy(), h=1e-5)
        assert rel_err(got, want) < 1e-5, name
        store.zero_grads()
        with K.Tape() as tape:
            loss = run()
        tape.backward(loss)


def test_adam_first_step_moves_by_lr():
    store = K.ParamStore()
    p = store.add("p", np.array(1.0))
    p.grad = np.array(1.0)
    K.adam_step(store, lr=0.01)
    assert p.data == pytest.approx(0.99, abs=1e-6)
    assert p.grad is None  # consumed


def test_adam_zero_gradient_first_step_no_move():
    store = K.ParamStore()
    p = store.add("p", np.array(2.0))
    q = store.add("q", np.array(3.0))
    p.grad = np.zeros(())
    q.grad = np.array(1.0)
    K.adam_step(store, lr=0.1)
    assert p.data == pytest.approx(2.0)
    assert q.data < 3.0


def test_adam_quadratic_bowl_converges():
    store = K.ParamStore()
    p = store.add("p", np.array(1.0))
    for _ in range(100):
        p.grad = np.array(2.0 * float(p.data))
        K.adam_step(store, lr=0.05)
    assert abs(float(p.data)) < 0.05


def test_adam_requires_some_gradient():
    store = K.ParamStore()
    store.add("p", np.array(1.0))
    with pytest.raises(UsageError):
        K.adam_step(store, lr=0.01)


def test_adam_missing_gradient_treated_as_zero():
    store = K.ParamStore()
    a = store.add("a", np.array(1.0))
    b = store.add("b", np.array(1.0))
    a.grad = np.array(0.5)
    K.adam_step(store, lr=0.01)
    assert float(b.data) == 1.0
    assert float(a.data) != 1.0


def test_param_store_duplicate_name():
    store = K.ParamStore()
    store.add("x", np.zeros(2))
    with pytest.raises(UsageError):
        store.add("x", np.zeros(2))


def test_param_store_roundtrip_exact(tmp_path):
    store = K.ParamStore()
    rng = np.random.default_rng(9)
    store.add("a", rng.standard_normal((3, 4)) * 1e-7)
    store.add("b", rng.standard_normal(5) * 1e7)
    store.add("scalar", np.array(np.pi))
    path = os.path.join(tmp_path, "ckpt.json")
    store.save(path)
    loaded = K.ParamStore.load(path)
    for name, t in store.items():
        assert np.array_equal(loaded[name].data, t.data), name
        assert loaded[name].data.shape == t.data.shape
    second = os.path.join(tmp_path, "ckpt2.json")
    loaded.save(second)
    with open(path, "rb") as f1, open(second, "rb") as f2:
        assert f1.read() == f2.read()


def test_param_store_load_rejects_garbage(tmp_path):
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        fh.write('{"format": "something-else"}')
    with pytest.raises(SchemaError):
        K.ParamStore.load(path)
    with pytest.raises(SchemaError):
        K.ParamStore.load(os.path.join(tmp_path, "missing.json"))
