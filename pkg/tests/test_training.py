"""Optimizer, training-loop and checkpoint round-trip tests."""

import hashlib
import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from relwork.embedding import EmbeddingTable
from relwork.model import (
    Adam,
    AttentionConfig,
    ModelError,
    SummarizerModel,
    TargetInstance,
    TrainConfig,
    TrainingError,
    compute_gradients,
    load_checkpoint,
    save_checkpoint,
    train,
)


def build_model(d=4, widths=(2, 3), seed=0):
    rng = np.random.default_rng(seed)
    toks = ["alpha", "beta", "delta", "eps", "gamma", "zeta"]
    table = EmbeddingTable(
        dim=d, vectors={t: 0.1 * rng.normal(size=d) for t in toks}
    )
    return SummarizerModel.initialize(d, table, widths=widths, seed=seed)


def build_instance(d=4, labels=(1, 0, 0)):
    rng = np.random.default_rng(1)
    docs = (
        ("pa", (("alpha", "beta", "gamma", "delta"),
                ("beta", "gamma", "delta", "eps"))),
        ("pb", (("gamma", "delta", "eps", "zeta", "alpha"),)),
    )
    return TargetInstance(
        target_id="t0",
        docs=docs,
        target_sentences=(("alpha", "gamma", "eps", "zeta"),),
        graph_target=rng.normal(size=d),
        graph_docs=rng.normal(size=(3, d)),
        labels=labels,
    )


class TestAdam:
    def test_first_step_is_signed_unit_step(self):
        # After one step m_hat = g and v_hat = g^2, so the update is
        # close to learning_rate in magnitude regardless of |g|.
        cfg = TrainConfig(learning_rate=0.1)
        opt = Adam(cfg)
        params = {"x": np.array([1.0, 1.0])}
        opt.step(params, {"x": np.array([4.0, -0.25])})
        assert_allclose(params["x"], [0.9, 1.1], rtol=1e-6)

    def test_state_persists_across_steps(self):
        cfg = TrainConfig(learning_rate=0.1)
        opt = Adam(cfg)
        params = {"x": np.array([0.0])}
        for _ in range(3):
            opt.step(params, {"x": np.array([1.0])})
        assert opt.step_count == 3
        assert params["x"][0] < -0.29

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0).validate()
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0).validate()
        with pytest.raises(ValueError):
            TrainConfig(beta2=-0.1).validate()


class TestTrainLoop:
    def test_loss_decreases_and_labels_are_learned(self):
        model = build_model()
        inst = build_instance()
        result = train(
            model, [inst], AttentionConfig.full(),
            TrainConfig(epochs=80, learning_rate=2e-2),
        )
        assert len(result.epoch_losses) == 80
        assert result.epoch_losses[-1] < result.epoch_losses[0]
        assert result.epoch_losses[-1] < 0.05
        _, probs, _ = compute_gradients(model, AttentionConfig.full(), inst)
        assert probs[0] > 0.9
        assert probs[1] < 0.1 and probs[2] < 0.1

    def test_no_instances_rejected(self):
        with pytest.raises(ModelError):
            train(build_model(), [], AttentionConfig.full(), TrainConfig())

    def test_non_finite_loss_names_target(self):
        model = build_model()
        model.params["gate_b"][0] = np.nan
        with pytest.raises(TrainingError, match="t0"):
            train(model, [build_instance()], AttentionConfig.full(),
                  TrainConfig(epochs=1))


class TestCheckpoint:
    def test_round_trip_and_byte_identical_resave(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        manifest = tmp_path / "model.manifest"
        save_checkpoint(model, path, manifest)
        loaded = load_checkpoint(path)
        assert loaded.dim == model.dim
        assert loaded.widths == model.widths
        assert loaded.vocab == model.vocab
        for name in model.param_order:
            rounded = model.params[name].astype("<f4").astype(float)
            assert_array_equal(loaded.params[name], rounded)
        path2 = tmp_path / "again.bin"
        save_checkpoint(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_manifest_format(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        manifest = tmp_path / "model.manifest"
        save_checkpoint(model, path, manifest)
        lines = manifest.read_text(encoding="utf-8").splitlines()
        assert [line.split("\t")[0] for line in lines] == model.param_order
        for line in lines:
            name, shape, digest = line.split("\t")
            assert shape == "x".join(str(s) for s in model.params[name].shape)
            data = np.ascontiguousarray(model.params[name], dtype="<f4").tobytes()
            assert digest == hashlib.sha256(data).hexdigest()

    def test_bad_magic(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        save_checkpoint(model, path)
        blob = bytearray(path.read_bytes())
        blob[0] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelError, match="not a summarizer checkpoint"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        save_checkpoint(model, path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelError, match="version 99"):
            load_checkpoint(path)

    def test_truncation_names_tensor(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        save_checkpoint(model, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-2])
        with pytest.raises(ModelError, match="gate_b"):
            load_checkpoint(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        model = build_model()
        path = tmp_path / "model.bin"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes() + b"xyz")
        with pytest.raises(ModelError, match="trailing"):
            load_checkpoint(path)
