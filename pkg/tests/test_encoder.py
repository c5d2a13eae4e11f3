import json

import numpy as np
import pytest
import torch

from contrastive_parsimony.encoder import (EncoderConfig, GradientTape, backward, encode, encode_logits,
                                           init_params, load_checkpoint, save_checkpoint)

from conftest import central_diff, rel_err

TINY = EncoderConfig(n_blocks=2, channels=4, kernel_size=3, dilations=(1, 2))


def series(rng, m=3, t=32):
    return rng.normal(size=(m, t))


def test_zero_projection_gives_half(rng):
    params = init_params(EncoderConfig(), rng)
    params["proj.weight"].zero_()
    out = encode(series(rng, 5, 40), params, EncoderConfig())
    assert torch.equal(out, torch.full((5, 40), 0.5, dtype=torch.float64))


def test_output_shape_and_range(rng):
    cfg = EncoderConfig()
    out = encode(series(rng, 4, 100), init_params(cfg, rng), cfg)
    assert out.shape == (4, 100)
    assert ((out > 0) & (out < 1)).all()


def test_causal_perturbation_is_exact(rng):
    cfg = EncoderConfig()
    params = init_params(cfg, rng)
    x = series(rng, 3, 64)
    base = encode(x, params, cfg)
    for k in (0, 20, 63):
        y = x.copy()
        y[:, k:] += rng.normal(size=(3, 64 - k)) * 5
        pert = encode(y, params, cfg)
        assert torch.equal(base[:, :k], pert[:, :k])
        if k < 63:
            assert not torch.equal(base[:, k:], pert[:, k:])


def test_non_causal_looks_ahead(rng):
    cfg = EncoderConfig(causal=False)
    params = init_params(cfg, rng)
    x = series(rng, 2, 50)
    y = x.copy()
    y[:, 30] += 10
    diff = (encode(x, params, cfg) != encode(y, params, cfg)).any(dim=0).nonzero().flatten()
    assert diff.min() < 30 and diff.max() > 30


def test_rows_are_independent(rng):
    cfg = EncoderConfig()
    params = init_params(cfg, rng)
    x = series(rng, 6, 40)
    full = encode(x, params, cfg)
    perm = rng.permutation(6)
    assert torch.allclose(encode(x[perm], params, cfg), full[perm], atol=1e-14, rtol=0)
    assert torch.allclose(encode(x[2:3], params, cfg), full[2:3], atol=1e-14, rtol=0)


def test_init_is_seeded():
    a = init_params(EncoderConfig(), np.random.default_rng(4))
    b = init_params(EncoderConfig(), np.random.default_rng(4))
    c = init_params(EncoderConfig(), np.random.default_rng(5))
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert not torch.equal(a["block0.weight"], c["block0.weight"])


def test_init_scale_zero(rng):
    params = init_params(EncoderConfig(init_scale=0.0), rng)
    assert all(not v.any() for v in params.values())


def test_random_init_not_constant(rng):
    cfg = EncoderConfig()
    out = encode(series(rng, 3, 80), init_params(cfg, rng), cfg)
    assert float(out.std()) > 1e-3


def test_bad_shapes(rng):
    cfg = EncoderConfig()
    params = init_params(cfg, rng)
    with pytest.raises(ValueError):
        encode(np.zeros(10), params, cfg)
    with pytest.raises(ValueError):
        encode(np.zeros((2, 10)), init_params(TINY, rng), cfg)
    with pytest.raises(ValueError):
        EncoderConfig(n_blocks=2, dilations=(1, 2, 4))


def test_receptive_field():
    assert EncoderConfig().receptive_field == 15
    assert TINY.receptive_field == 7


def test_tape_state_errors(rng):
    tape = GradientTape(init_params(TINY, rng))
    with pytest.raises(RuntimeError):
        backward(tape)
    tape.record(encode(series(rng), tape.params, TINY).sum())
    backward(tape)
    with pytest.raises(RuntimeError):
        backward(tape)


def test_unused_parameter_gets_zero(rng):
    tape = GradientTape(init_params(TINY, rng))
    tape.record(tape.params["proj.bias"].sum() * 3.0)
    g = backward(tape)
    assert float(g["proj.bias"]) == 3.0
    assert not g["block0.weight"].any()


def test_backward_is_linear_in_seed(rng):
    params = init_params(TINY, rng)
    x = series(rng)
    grads = []
    for seed in (1.0, 2.5):
        tape = GradientTape(params)
        tape.record((encode(x, tape.params, TINY) ** 2).sum())
        grads.append(backward(tape, seed))
    for k in params:
        assert torch.allclose(grads[1][k], 2.5 * grads[0][k], atol=1e-13)


def test_gradients_match_finite_differences(rng):
    params = init_params(TINY, rng)
    params["block0.bias"] = torch.as_tensor(rng.normal(size=4) * 0.1)
    params["block1.bias"] = torch.as_tensor(rng.normal(size=4) * 0.1)
    x = series(rng, 3, 32)
    w = torch.as_tensor(rng.normal(size=(3, 32)))
    tape = GradientTape(params)
    tape.record((encode(x, tape.params, TINY) * w).sum())
    g = backward(tape)
    for name in params:
        base = params[name].numpy().copy()

        def f(v, name=name):
            p = dict(params)
            p[name] = torch.as_tensor(v)
            with torch.no_grad():
                return float((encode(x, p, TINY) * w).sum())

        for flat in rng.choice(base.size, size=min(4, base.size), replace=False):
            idx = np.unravel_index(flat, base.shape)
            assert rel_err(float(g[name][idx]), central_diff(f, base, idx)) <= 1e-4, name


def test_logits_consistent(rng):
    params = init_params(TINY, rng)
    x = series(rng)
    assert torch.allclose(torch.sigmoid(encode_logits(x, params, TINY)), encode(x, params, TINY))


def test_checkpoint_round_trip(tmp_path, rng):
    params = init_params(TINY, rng)
    path = tmp_path / "ck.json"
    save_checkpoint(path, params, TINY, {"standardize_inputs": True})
    back, cfg, extra = load_checkpoint(path)
    assert cfg == TINY and extra == {"standardize_inputs": True}
    assert all(torch.equal(params[k], back[k]) for k in params)
    assert not (tmp_path / "ck.json.partial").exists()


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_checkpoint(path)
