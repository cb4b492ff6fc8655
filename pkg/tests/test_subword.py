"""Subword model training, encoding and persistence."""

import pytest

from errors import ConfigError, InputError
from subword import BOS_ID, EOS_ID, PAD_ID, UNK_ID, SubwordModel, bpe_train


class TestTraining:
    def test_merges_follow_pair_frequency(self):
        model = bpe_train(["ab ab ab", "abc"], num_merges=5)
        assert model.merges == [("a", "b"), ("ab", "c")]

    def test_stops_when_no_pairs_remain(self):
        model = bpe_train(["a b c"], num_merges=10)
        assert model.merges == []
        assert model.alphabet == ["a", "b", "c"]

    def test_ties_break_lexicographically(self):
        model = bpe_train(["cd ab"], num_merges=1)
        assert model.merges == [("a", "b")]

    def test_empty_corpus(self):
        with pytest.raises(InputError):
            bpe_train(["", "   "], num_merges=3)

    def test_negative_merges(self):
        with pytest.raises(InputError):
            bpe_train(["ab"], num_merges=-1)

    def test_deterministic(self):
        corpus = ["the cat sat", "the hat", "that cat"]
        assert bpe_train(corpus, 6).merges == bpe_train(corpus, 6).merges


class TestEncoding:
    def test_round_trip(self):
        model = bpe_train(["ab ab ab", "abc"], num_merges=5)
        ids = model.encode("ab abc")
        assert len(ids) == 2
        assert model.decode(ids) == "ab abc"

    def test_unknown_characters_map_to_unk(self):
        model = bpe_train(["ab"], num_merges=0)
        ids = model.encode("axb")
        assert ids[1] == UNK_ID
        assert UNK_ID not in model.encode("ab")

    def test_word_final_unknown_keeps_word_boundary(self):
        model = bpe_train(["ab ba"], num_merges=1)
        ids = model.encode("a☃ b")
        assert UNK_ID not in ids
        assert model.decode(ids) == "a<unk> b"
        assert model.decode(model.encode("☃ ☃b")) == "<unk> <unk>b"

    def test_word_final_unknown_survives_reload(self, tmp_path):
        model = bpe_train(["ab ba"], num_merges=1, tags=["<2x>"])
        path = str(tmp_path / "model.bpe")
        model.save(path)
        restored = SubwordModel.load(path)
        assert restored.id_to_token == model.id_to_token
        assert restored.decode(restored.encode("b☃ a")) == "b<unk> a"

    def test_decode_drops_control_symbols(self):
        model = bpe_train(["ab ab"], num_merges=1)
        ids = [BOS_ID] + model.encode("ab") + [EOS_ID, PAD_ID]
        assert model.decode(ids) == "ab"

    def test_decode_rejects_unknown_id(self):
        model = bpe_train(["ab"], num_merges=1)
        with pytest.raises(InputError):
            model.decode([len(model)])


class TestTags:
    def test_tags_follow_base_specials(self):
        model = bpe_train(["<2de> ab", "ab"], num_merges=1, tags=["<2de>", "<2fr>"])
        assert model.specials[4:] == ["<2de>", "<2fr>"]
        assert model.tag_id("<2fr>") == 5

    def test_tag_is_one_token(self):
        model = bpe_train(["ab"], num_merges=1, tags=["<2de>"])
        ids = model.encode("<2de> ab")
        assert ids[0] == model.tag_id("<2de>")
        assert model.decode(ids) == "<2de> ab"

    def test_tags_never_enter_the_alphabet(self):
        model = bpe_train(["<2de> ab"], num_merges=3, tags=["<2de>"])
        assert "<" not in model.alphabet

    def test_undeclared_tag(self):
        model = bpe_train(["ab"], num_merges=1)
        with pytest.raises(ConfigError):
            model.tag_id("<2de>")

    def test_duplicate_tags(self):
        with pytest.raises(ConfigError):
            SubwordModel([], ["a"], tags=["<x>", "<x>"])


class TestPersistence:
    def test_save_and_load(self, tmp_path):
        model = bpe_train(["the cat sat", "the hat"], num_merges=4, tags=["<A>"])
        path = tmp_path / "sub.bpe"
        model.save(str(path))
        restored = SubwordModel.load(str(path))
        assert restored.merges == model.merges
        assert restored.id_to_token == model.id_to_token
        assert restored.encode("the cat") == model.encode("the cat")

    def test_load_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "other.txt"
        path.write_text("hello\n", encoding="utf-8")
        with pytest.raises(InputError):
            SubwordModel.load(str(path))

    def test_load_rejects_truncated_file(self, tmp_path):
        model = bpe_train(["the cat"], num_merges=2)
        path = tmp_path / "sub.bpe"
        model.save(str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        path.write_text("\n".join(lines[:3]) + "\n", encoding="utf-8")
        with pytest.raises(InputError):
            SubwordModel.load(str(path))
