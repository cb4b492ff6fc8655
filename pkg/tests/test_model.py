"""Encoder and dual decoder forward passes, initialization and checkpoints."""

import numpy as np
import pytest

from errors import CheckpointError, ConfigError, ContractError, InputError
from model import (
    COUPLING_SCHEMES, DualModel, decoder_forward, dual_forward, encode, init_from_pretrained,
    load_checkpoint, save_checkpoint,
)
from model.config import ModelConfig
from subword import BOS_ID, PAD_ID

from conftest import tiny_config, tiny_model

SRC = np.array([[5, 6, 7, 2]])


def random_prefix(rng, length, vocab=12):
    return np.concatenate([[BOS_ID], rng.integers(4, vocab, size=length - 1)])[None, :]


class TestConfig:
    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigError):
            ModelConfig(d_model=10, heads=4)

    def test_unknown_coupling(self):
        with pytest.raises(ConfigError):
            ModelConfig(coupling="mixed")

    def test_unknown_setting(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"d_model": 8, "colour": "red"})

    def test_round_trip_through_dict(self):
        config = tiny_config(cross_attn_position="before-encdec")
        assert ModelConfig.from_dict(config.to_dict()) == config


class TestForward:
    def test_output_shapes(self, dual_model):
        enc = encode(dual_model, SRC)
        logits1, logits2 = dual_forward(dual_model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 6]])
        assert logits1.shape == (1, 3, 12)
        assert logits2.shape == (1, 3, 12)

    def test_same_seed_same_parameters(self):
        a, b = tiny_model(), tiny_model()
        for (name, x), (_, y) in zip(a.named_parameters(), b.named_parameters()):
            np.testing.assert_array_equal(x.data, y.data, err_msg=name)

    def test_prefix_must_start_with_bos(self, dual_model):
        enc = encode(dual_model, SRC)
        with pytest.raises(InputError):
            dual_forward(dual_model, enc, [[4, 5]], [[BOS_ID, 5]])

    def test_target_id_outside_vocabulary(self, dual_model):
        enc = encode(dual_model, SRC)
        with pytest.raises(InputError):
            dual_forward(dual_model, enc, [[BOS_ID, 12]], [[BOS_ID, 5]])

    def test_empty_source(self, dual_model):
        with pytest.raises(InputError):
            encode(dual_model, [[PAD_ID, PAD_ID]])

    def test_source_outside_vocabulary(self, dual_model):
        with pytest.raises(InputError):
            encode(dual_model, [[40, 2]])

    def test_too_long_for_positions(self):
        model = tiny_model(max_positions=4)
        with pytest.raises(InputError):
            encode(model, [[5, 6, 7, 8, 2]])

    def test_unknown_coupling_scheme(self, dual_model):
        enc = encode(dual_model, SRC)
        with pytest.raises(ContractError):
            dual_forward(dual_model, enc, [[BOS_ID]], [[BOS_ID]], coupling="attend-worst")

    def test_cross_attending_decoder_cannot_run_alone(self, dual_model):
        enc = encode(dual_model, SRC)
        with pytest.raises(ContractError):
            decoder_forward(dual_model, enc, [[BOS_ID]])

    def test_single_model_has_no_partner(self):
        model = tiny_model(coupling="single")
        enc = encode(model, SRC)
        with pytest.raises(ContractError):
            dual_forward(model, enc, [[BOS_ID]], [[BOS_ID]])
        with pytest.raises(ContractError):
            decoder_forward(model, enc, [[BOS_ID]], side=2)

    def test_padding_does_not_change_real_positions(self, dual_model):
        enc = encode(dual_model, SRC)
        short = dual_forward(dual_model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 6, 7]])
        padded = dual_forward(dual_model, enc, [[BOS_ID, 4, 5, PAD_ID]], [[BOS_ID, 6, 7, PAD_ID]])
        for a, b in zip(short, padded):
            np.testing.assert_allclose(a.data, b.data[:, :3], atol=1e-12)


class TestCausality:
    """Decoder 1 at step t sees decoder 2 strictly before t, and vice versa."""

    @pytest.mark.parametrize("position", ["after-encdec", "before-encdec"])
    @pytest.mark.parametrize("layers", [1, 2])
    def test_other_prefix_future_is_invisible(self, position, layers):
        model = tiny_model(cross_attn_position=position, dec_layers=layers)
        enc = encode(model, SRC)
        rng = np.random.default_rng(11)
        length = 6
        for _ in range(3):
            prefix1, prefix2 = random_prefix(rng, length), random_prefix(rng, length)
            base1, base2 = (t.data for t in dual_forward(model, enc, prefix1, prefix2))
            for j in range(1, length):
                changed2 = prefix2.copy()
                changed2[0, j] = 4 + (changed2[0, j] - 4 + 1) % 8
                shifted1, _ = dual_forward(model, enc, prefix1, changed2)
                assert np.array_equal(shifted1.data[:, :j + 1], base1[:, :j + 1])

                changed1 = prefix1.copy()
                changed1[0, j] = 4 + (changed1[0, j] - 4 + 1) % 8
                _, shifted2 = dual_forward(model, enc, changed1, prefix2)
                assert np.array_equal(shifted2.data[:, :j + 1], base2[:, :j + 1])

    def test_other_prefix_past_is_visible(self, dual_model):
        enc = encode(dual_model, SRC)
        base, _ = dual_forward(dual_model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 6, 7]])
        shifted, _ = dual_forward(dual_model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 9, 7]])
        assert not np.allclose(base.data[:, 2], shifted.data[:, 2])

    def test_independent_decoders_do_not_interact(self):
        model = tiny_model(coupling="independent")
        enc = encode(model, SRC)
        base, _ = dual_forward(model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 6, 7]])
        shifted, _ = dual_forward(model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 9, 10]])
        np.testing.assert_array_equal(base.data, shifted.data)

    def test_own_future_is_invisible(self, dual_model):
        enc = encode(dual_model, SRC)
        base, _ = dual_forward(dual_model, enc, [[BOS_ID, 4, 5, 6]], [[BOS_ID, 7, 8, 9]])
        shifted, _ = dual_forward(dual_model, enc, [[BOS_ID, 4, 5, 11]], [[BOS_ID, 7, 8, 9]])
        assert np.array_equal(base.data[:, :3], shifted.data[:, :3])


class TestCouplingSchemes:
    def test_schemes_agree_on_a_single_row(self, dual_model):
        enc = encode(dual_model, SRC)
        outputs = [dual_forward(dual_model, enc, [[BOS_ID, 4]], [[BOS_ID, 6]], coupling=scheme)[0].data
                   for scheme in COUPLING_SCHEMES]
        for other in outputs[1:]:
            np.testing.assert_allclose(other, outputs[0], atol=1e-12)

    def test_attend_best_reads_row_zero(self, dual_model):
        enc = encode(dual_model, SRC)
        prefix1 = [[BOS_ID, 4], [BOS_ID, 4]]
        a, _ = dual_forward(dual_model, enc, prefix1, [[BOS_ID, 6], [BOS_ID, 7]], coupling="attend-best")
        b, _ = dual_forward(dual_model, enc, prefix1, [[BOS_ID, 6], [BOS_ID, 9]], coupling="attend-best")
        np.testing.assert_array_equal(a.data, b.data)


class TestCrossAttentionBranch:
    @pytest.mark.parametrize("position", ["after-encdec", "before-encdec"])
    def test_zero_value_projection_matches_independent(self, position):
        dual = tiny_model(cross_attn_position=position, dec_layers=2)
        for name, tensor in dual.params.items():
            if name.endswith(".cross_attn.wv"):
                tensor.data = np.zeros_like(tensor.data)
        independent = DualModel(tiny_config(coupling="independent", cross_attn_position=position, dec_layers=2),
                                params={k: v for k, v in dual.params.items() if ".cross_" not in k})
        prefix1, prefix2 = [[BOS_ID, 4, 5, 6], [BOS_ID, 7, PAD_ID, PAD_ID]], [[BOS_ID, 9, 8, 7], [BOS_ID, 4, 4, 5]]
        src = np.array([[5, 6, 7, 2], [8, 9, 2, PAD_ID]])
        coupled = dual_forward(dual, encode(dual, src), prefix1, prefix2)
        plain = dual_forward(independent, encode(independent, src), prefix1, prefix2)
        for a, b in zip(coupled, plain):
            np.testing.assert_array_equal(a.data, b.data)


class TestDecoderSwap:
    def test_swap_exchanges_outputs(self, dual_model):
        enc = encode(dual_model, SRC)
        logits1, logits2 = dual_forward(dual_model, enc, [[BOS_ID, 4, 5]], [[BOS_ID, 6, 7]])
        swapped = dual_model.swap_decoders()
        s1, s2 = dual_forward(swapped, enc, [[BOS_ID, 6, 7]], [[BOS_ID, 4, 5]])
        np.testing.assert_allclose(s1.data, logits2.data, atol=1e-12)
        np.testing.assert_allclose(s2.data, logits1.data, atol=1e-12)

    def test_single_model_cannot_swap(self):
        with pytest.raises(ContractError):
            tiny_model(coupling="single").swap_decoders()

    def test_clone_is_independent(self, dual_model):
        twin = dual_model.clone()
        name, tensor = twin.named_parameters()[0]
        tensor.data += 1.0
        assert not np.array_equal(dict(dual_model.named_parameters())[name].data, tensor.data)


class TestPretrainedInit:
    def test_copies_encoder_and_decoders(self):
        pretrained = tiny_model(coupling="single", seed=9)
        model = init_from_pretrained(pretrained, tiny_config(coupling="dual"))
        np.testing.assert_array_equal(model.params["enc.embed"].data, pretrained.params["enc.embed"].data)
        for side in (1, 2):
            np.testing.assert_array_equal(model.params[f"dec{side}.layers.0.ffn.w1"].data,
                                          pretrained.params["dec1.layers.0.ffn.w1"].data)
            np.testing.assert_array_equal(model.params[f"dec{side}.embed"].data,
                                          pretrained.params["dec1.embed"].data)

    def test_cross_attention_keeps_fresh_initialization(self):
        pretrained = tiny_model(coupling="single", seed=9)
        config = tiny_config(coupling="dual")
        model = init_from_pretrained(pretrained, config)
        fresh = DualModel(config)
        for name in fresh.params:
            if name.startswith("dec1.") and ".cross_" in name:
                np.testing.assert_array_equal(model.params[name].data, fresh.params[name].data)

    @pytest.mark.parametrize("tie_mode", ["per-decoder", "all-four"])
    def test_decoders_start_identical(self, tie_mode):
        pretrained = tiny_model(coupling="single", seed=9, dec_layers=2)
        model = init_from_pretrained(pretrained, tiny_config(coupling="dual", dec_layers=2, tie_mode=tie_mode))
        names = [name for name in model.params if name.startswith("dec1.")]
        assert any(".cross_attn." in name for name in names)
        for name in names:
            np.testing.assert_array_equal(model.params[name].data,
                                          model.params["dec2." + name[len("dec1."):]].data, err_msg=name)
        np.testing.assert_array_equal(model.embedding_matrix(1).data, model.embedding_matrix(2).data)

    def test_silenced_cross_attention_reproduces_pretrained_output(self):
        pretrained = tiny_model(coupling="single", seed=9)
        model = init_from_pretrained(pretrained, tiny_config(coupling="dual"))
        for name, tensor in model.params.items():
            if name.endswith(".cross_attn.wv"):
                tensor.data = np.zeros_like(tensor.data)
        prefix1, prefix2 = [[BOS_ID, 4, 5, 6]], [[BOS_ID, 9, 8, 7]]
        logits1, logits2 = dual_forward(model, encode(model, SRC), prefix1, prefix2)
        enc = encode(pretrained, SRC)
        np.testing.assert_allclose(logits1.data, decoder_forward(pretrained, enc, prefix1).data, atol=1e-12)
        np.testing.assert_allclose(logits2.data, decoder_forward(pretrained, enc, prefix2).data, atol=1e-12)

    def test_source_must_be_single(self):
        with pytest.raises(CheckpointError):
            init_from_pretrained(tiny_model(), tiny_config())

    def test_architecture_mismatch(self):
        with pytest.raises(CheckpointError):
            init_from_pretrained(tiny_model(coupling="single"), tiny_config(d_ff=64))


class TestCheckpoint:
    def test_round_trip(self, tmp_path, dual_model):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(dual_model, path, extra={"step": 7})
        restored = load_checkpoint(path, expected=dual_model.config)
        for (name, x), (_, y) in zip(dual_model.named_parameters(), restored.named_parameters()):
            np.testing.assert_array_equal(x.data, y.data, err_msg=name)
        enc = encode(restored, SRC)
        a = dual_forward(dual_model, encode(dual_model, SRC), [[BOS_ID, 4]], [[BOS_ID, 5]])[0].data
        b = dual_forward(restored, enc, [[BOS_ID, 4]], [[BOS_ID, 5]])[0].data
        np.testing.assert_array_equal(a, b)

    def test_shared_embeddings_survive(self, tmp_path):
        model = tiny_model(tie_mode="all-four")
        path = str(tmp_path / "tied.ckpt")
        save_checkpoint(model, path)
        restored = load_checkpoint(path)
        assert restored.embedding_matrix(1) is restored.embedding_matrix(2)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / "absent.ckpt"))

    def test_truncated_file(self, tmp_path, dual_model):
        path = tmp_path / "model.ckpt"
        save_checkpoint(dual_model, str(path))
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_architecture_mismatch(self, tmp_path, dual_model):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(dual_model, path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expected=tiny_config(d_model=32))

    def test_coupling_mismatch(self, tmp_path, dual_model):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(dual_model, path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expected=tiny_config(coupling="independent"))

    def test_shared_matrix_stays_shared_after_reload(self, tmp_path):
        model = tiny_model(tie_mode="all-four")
        path = str(tmp_path / "tied.ckpt")
        save_checkpoint(model, path)
        restored = load_checkpoint(path)
        enc = encode(restored, SRC)
        before = [t.data.copy() for t in dual_forward(restored, enc, [[BOS_ID, 5]], [[BOS_ID, 5]])]
        restored.params["dec.embed"].data[5] = 7.0
        for view in (restored.embedding_matrix(1), restored.embedding_matrix(2),
                     restored.output_matrix(1), restored.output_matrix(2)):
            np.testing.assert_array_equal(view.data[5], np.full(16, 7.0))
        after = dual_forward(restored, enc, [[BOS_ID, 5]], [[BOS_ID, 5]])
        for old, new in zip(before, after):
            assert not np.allclose(old[:, :, 5], new.data[:, :, 5])
