import numpy as np

from mdgcn import (
    init_params,
    load_checkpoint,
    load_embedding,
    save_checkpoint,
    save_embedding,
)


def test_embedding_round_trip_exact(tmp_path):
    Z = np.random.default_rng(0).normal(size=(5, 9))
    path = tmp_path / "run.emb"
    save_embedding(Z, path)
    assert np.array_equal(load_embedding(path), Z)


def test_embedding_header(tmp_path):
    Z = np.zeros((3, 4))
    path = tmp_path / "run.emb"
    save_embedding(Z, path)
    assert path.read_text().splitlines()[0] == "4 3"


def test_embedding_bytes_deterministic(tmp_path):
    Z = np.random.default_rng(1).normal(size=(4, 7))
    a, b = tmp_path / "a.emb", tmp_path / "b.emb"
    save_embedding(Z, a)
    save_embedding(Z, b)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_round_trip_exact(tmp_path):
    params = init_params(3, [4, 5, 6], [4, 5], 0.25, 7, activation="tanh",
                         attention_mode="bilinear")
    config = {"seed": 7, "alpha": 0.25, "note": "roundtrip"}
    path = tmp_path / "run.ckpt"
    save_checkpoint(params, config, path)
    loaded, config2 = load_checkpoint(path)
    assert config2 == config
    assert loaded.alpha == params.alpha
    assert loaded.activation == params.activation
    assert loaded.attention_mode == params.attention_mode
    for (name_a, a), (name_b, b) in zip(params.tensors(), loaded.tensors()):
        assert name_a == name_b
        assert np.array_equal(a, b)


def test_checkpoint_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("mdgcn-checkpoint 99\n")
    try:
        load_checkpoint(path)
    except ValueError:
        pass
    else:
        raise AssertionError("expected a version error")
