import hashlib
import struct

import numpy as np
import pytest

from rahl import checkpoint
from rahl.data import Scaler
from rahl.errors import CheckpointError, ChecksumError, VersionError
from rahl.losses import LossSpec
from rahl.model import ModelConfig, init_params
from rahl.optim import adam_init, adam_step
from rahl.train import TrainConfig


def saved(tmp_path, beta=-0.25):
    cfg = TrainConfig(hidden_size=5, fc_hidden=3, loss=LossSpec.rahl(0.5), seed=4)
    params = init_params(ModelConfig(hidden_size=5, fc_hidden=3, seed=4))
    opt = {**params.as_dict(), "beta": np.array(beta)}
    adam = adam_init(opt, cfg.lr)
    rng = np.random.default_rng(0)
    adam_step(adam, opt, {k: rng.normal(size=np.shape(v)) for k, v in opt.items()})
    path = tmp_path / "model.ckpt"
    checkpoint.save(path, params, cfg, Scaler(1.0, 14.0), adam, float(opt["beta"]), extra={"column": "CQI"})
    return path, params, cfg, adam, float(opt["beta"])


def test_roundtrip_is_exact(tmp_path):
    path, params, cfg, adam, beta = saved(tmp_path)
    ck = checkpoint.load(path)
    assert ck.config == cfg
    assert ck.scaler == Scaler(1.0, 14.0)
    assert ck.beta == beta
    assert ck.extra == {"column": "CQI"}
    for k, v in params.as_dict().items():
        assert np.array_equal(getattr(ck.params, k), v)
    assert ck.adam.step == 1 and ck.adam.hyper() == adam.hyper()
    for k in adam.m:
        assert np.array_equal(ck.adam.m[k], adam.m[k])
        assert np.array_equal(ck.adam.v[k], adam.v[k])


def test_save_is_deterministic(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a, *_ = saved(tmp_path / "a")
    b, *_ = saved(tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()


def test_layout_prefix(tmp_path):
    path, *_ = saved(tmp_path)
    blob = path.read_bytes()
    magic, version, head_len = struct.unpack_from("<8sII", blob)
    assert magic == b"RAHLCKPT" and version == 1
    assert blob[16 : 16 + head_len].startswith(b"{")


@pytest.mark.parametrize("where", [20, -1, -40])
def test_flipped_byte_fails_checksum(tmp_path, where):
    path, *_ = saved(tmp_path)
    blob = bytearray(path.read_bytes())
    blob[where] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        checkpoint.load(path)


def test_truncated_file(tmp_path):
    path = tmp_path / "short.ckpt"
    path.write_bytes(b"RAHL")
    with pytest.raises(ChecksumError):
        checkpoint.load(path)


def _rewrite(path, mutate):
    body = bytearray(path.read_bytes()[:-32])
    mutate(body)
    path.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())


def test_unknown_version(tmp_path):
    path, *_ = saved(tmp_path)
    _rewrite(path, lambda body: struct.pack_into("<I", body, 8, 2))
    with pytest.raises(VersionError):
        checkpoint.load(path)


def test_wrong_magic(tmp_path):
    path, *_ = saved(tmp_path)
    _rewrite(path, lambda body: body.__setitem__(slice(0, 8), b"NOTACKPT"))
    with pytest.raises(CheckpointError):
        checkpoint.load(path)
