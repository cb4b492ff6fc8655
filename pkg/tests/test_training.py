"""Batching, joint loss, the training loop and multilingual pre-training."""

import math

import numpy as np
import pytest

from data_processor import bucket_batches, check_disjoint, frame_target, make_batch, split_dev
from datakit.corpus import Bitext, TriSample
from errors import ConfigError, InputError
from model import decoder_forward, encode, init_from_pretrained
from numcore import log_softmax
import search
from search import Hypothesis
from subword import BOS_ID, EOS_ID, PAD_ID, bpe_train
from training import TrainConfig, joint_loss, load_metrics, pretrain_multilingual, side_losses, token_accuracy, train
from training import trainer

from conftest import copy_reverse_samples, tiny_config, tiny_model


def quick_config(**overrides):
    values = dict(batch_tokens=64, max_steps=6, eval_interval=3, patience=3, peak_lr=1e-3,
                  warmup_steps=4, label_smoothing=0.1, seed=2)
    values.update(overrides)
    return TrainConfig(**values)


def select_on_training_set(monkeypatch, samples):
    """Keep the parameters with the lowest training-set loss instead of dev loss."""
    monkeypatch.setitem(trainer.EVALUATORS, "loss",
                        lambda model, dev, config: trainer.dev_loss(model, samples, config))


class TestFraming:
    def test_targets_are_shifted_by_one(self):
        inputs, outputs = frame_target([5, 6])
        assert inputs == [BOS_ID, 5, 6]
        assert outputs == [5, 6, EOS_ID]

    def test_wait_inserts_ignored_placeholders(self):
        inputs, outputs = frame_target([5, 6], wait=2)
        assert inputs == [BOS_ID, PAD_ID, PAD_ID, 5, 6]
        assert outputs == [PAD_ID, PAD_ID, 5, 6, EOS_ID]

    def test_batch_pads_both_sides_to_one_length(self):
        batch = make_batch([TriSample((5, 2), (5, 6), (7,))], wait_k1=2)
        np.testing.assert_array_equal(batch.inputs1, [[BOS_ID, PAD_ID, PAD_ID, 5, 6]])
        np.testing.assert_array_equal(batch.outputs1, [[PAD_ID, PAD_ID, 5, 6, EOS_ID]])
        np.testing.assert_array_equal(batch.inputs2, [[BOS_ID, 7, PAD_ID, PAD_ID, PAD_ID]])
        np.testing.assert_array_equal(batch.outputs2, [[7, EOS_ID, PAD_ID, PAD_ID, PAD_ID]])
        assert batch.num_tokens == 3 + 2

    def test_empty_batch(self):
        with pytest.raises(InputError):
            make_batch([])


class TestBucketing:
    def test_every_sample_once_within_budget(self):
        samples = copy_reverse_samples(count=20, length=3) + copy_reverse_samples(count=10, length=6, seed=1)
        batches = bucket_batches(samples, batch_tokens=24, rng=np.random.default_rng(0))
        assert sum(len(b) for b in batches) == len(samples)
        for group in batches:
            longest = max(max(len(s.src), len(s.tgt1) + 1, len(s.tgt2) + 1) for s in group)
            assert longest * len(group) <= 24

    def test_sample_over_budget(self):
        with pytest.raises(ConfigError):
            bucket_batches(copy_reverse_samples(count=2, length=6), batch_tokens=5)

    def test_wait_counts_toward_length(self):
        samples = copy_reverse_samples(count=2, length=4)
        bucket_batches(samples, batch_tokens=5)
        with pytest.raises(ConfigError):
            bucket_batches(samples, batch_tokens=5, wait_k2=1)


class TestDevSplit:
    def test_seeded_and_disjoint(self):
        samples = copy_reverse_samples(count=40)
        train_a, dev_a = split_dev(samples, 0.25, seed=4)
        train_b, dev_b = split_dev(samples, 0.25, seed=4)
        assert dev_a == dev_b and train_a == train_b
        assert len(dev_a) == 10
        check_disjoint(train_a, dev_a)

    def test_fraction_bounds(self):
        with pytest.raises(ConfigError):
            split_dev(copy_reverse_samples(count=4), 0.0, seed=1)

    def test_overlap_detected(self):
        samples = copy_reverse_samples(count=4)
        with pytest.raises(InputError):
            check_disjoint(samples, samples[:1])


class TestJointLoss:
    def test_sum_normalization_scales_token_mean(self, dual_model):
        batch = make_batch(copy_reverse_samples(count=3, length=4))
        token = side_losses(dual_model, batch, normalization="token")
        total = side_losses(dual_model, batch, normalization="sum")
        for side, outputs in ((1, batch.outputs1), (2, batch.outputs2)):
            count = int((outputs != PAD_ID).sum())
            assert total[side].item() == pytest.approx(token[side].item() * count)

    def test_zero_weight_sample_is_ignored(self, dual_model):
        samples = copy_reverse_samples(count=2, length=4)
        weighted = [samples[0], TriSample(samples[1].src, samples[1].tgt1, samples[1].tgt2, weight=0.0)]
        both = joint_loss(dual_model, make_batch(weighted), normalization="sum").item()
        alone = joint_loss(dual_model, make_batch(samples[:1]), normalization="sum").item()
        assert both == pytest.approx(alone, rel=1e-10)

    def test_single_decoder_uses_first_target(self):
        model = tiny_model(coupling="single")
        losses = side_losses(model, make_batch(copy_reverse_samples(count=2)))
        assert list(losses) == [1]

    def test_unknown_normalization(self, dual_model):
        with pytest.raises(InputError):
            joint_loss(dual_model, make_batch(copy_reverse_samples(count=1)), normalization="mean")

    def test_uniform_prediction_costs_log_vocabulary(self, dual_model):
        for side in (1, 2):
            dual_model.params[f"dec{side}.embed"].data = np.zeros((12, 16))
        losses = side_losses(dual_model, make_batch(copy_reverse_samples(count=3, length=4)))
        for side in (1, 2):
            assert losses[side].item() == pytest.approx(np.log(12.0), rel=1e-12)

    def test_independent_loss_is_sum_of_separate_decoders(self):
        model = tiny_model(coupling="independent")
        samples = copy_reverse_samples(count=3, length=4) + copy_reverse_samples(count=2, length=2, seed=4)
        expected = 0.0
        for side in (1, 2):
            total, count = 0.0, 0
            for sample in samples:
                target = list(sample.tgt1 if side == 1 else sample.tgt2)
                enc = encode(model, [list(sample.src)])
                logits = decoder_forward(model, enc, [[BOS_ID] + target], side=side)
                log_probs = log_softmax(logits, axis=-1).data[0]
                total -= sum(log_probs[i, t] for i, t in enumerate(target + [EOS_ID]))
                count += len(target) + 1
            expected += total / count
        assert joint_loss(model, make_batch(samples)).item() == pytest.approx(expected, rel=1e-10)

    def test_batch_order_does_not_matter(self, dual_model):
        samples = copy_reverse_samples(count=6, length=4)
        forward = joint_loss(dual_model, make_batch(samples)).item()
        backward = joint_loss(dual_model, make_batch(samples[::-1])).item()
        assert backward == pytest.approx(forward, abs=1e-12)

    def test_swapped_decoders_swap_side_losses(self, dual_model):
        samples = copy_reverse_samples(count=4, length=4)
        flipped = [TriSample(s.src, s.tgt2, s.tgt1) for s in samples]
        losses = side_losses(dual_model, make_batch(samples))
        swapped = side_losses(dual_model.swap_decoders(), make_batch(flipped))
        assert swapped[1].item() == pytest.approx(losses[2].item(), rel=1e-10)
        assert swapped[2].item() == pytest.approx(losses[1].item(), rel=1e-10)

    @pytest.mark.parametrize("coupling", ["dual", "independent"])
    @pytest.mark.parametrize("mode", ["scratch", "finetune"])
    def test_training_lowers_loss(self, coupling, mode):
        samples = copy_reverse_samples(count=8, length=4)
        if mode == "finetune":
            model = init_from_pretrained(tiny_model(coupling="single", seed=5), tiny_config(coupling=coupling))
        else:
            model = tiny_model(coupling=coupling)
        batch = make_batch(samples)
        before = joint_loss(model, batch).item()
        result = train(model, samples, copy_reverse_samples(count=2, length=4, seed=9),
                       quick_config(mode=mode, finetune_lr=1e-3, max_steps=20, eval_interval=10,
                                    patience=5, label_smoothing=0.0))
        result.model.eval()
        assert joint_loss(result.model, batch).item() < before

    def test_token_accuracy_per_side(self, dual_model):
        dual_model.train()
        accuracy = token_accuracy(dual_model, make_batch(copy_reverse_samples(count=4)))
        assert set(accuracy) == {1, 2}
        assert all(0.0 <= value <= 1.0 for value in accuracy.values())
        assert dual_model.training


class TestTrainConfig:
    @pytest.mark.parametrize("overrides", [
        {"patience": 0}, {"mode": "resume"}, {"selection_metric": "ter"},
        {"wait_k1": 1, "wait_k2": 1}, {"label_smoothing": 1.0}, {"eval_interval": 0},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            TrainConfig(**overrides)

    def test_finetune_uses_fixed_rate(self):
        state = TrainConfig(mode="finetune", finetune_lr=8e-5).optimizer_state()
        assert state.mode == "fixed"
        assert state.peak_lr == 8e-5

    def test_unknown_setting(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"epochs": 3})


class TestTrainingLoop:
    def test_stops_after_patience_without_improvement(self, monkeypatch):
        monkeypatch.setitem(trainer.EVALUATORS, "loss", lambda model, dev, config: 1.0)
        snapshots = []
        model = tiny_model()
        result = train(model, copy_reverse_samples(count=8), copy_reverse_samples(count=2, seed=9),
                       quick_config(max_steps=100, eval_interval=1, patience=4),
                       on_improve=lambda m, record: snapshots.append(m.state_arrays()))
        assert result.stopped_early
        assert len(result.history) == 5
        assert result.best_step == 1
        assert result.steps == 5
        assert len(snapshots) == 1
        for name, array in model.state_arrays().items():
            np.testing.assert_array_equal(array, snapshots[0][name])

    def test_deterministic(self):
        train_set, dev_set = copy_reverse_samples(count=12), copy_reverse_samples(count=3, seed=5)
        runs = []
        for _ in range(2):
            result = train(tiny_model(dropout=0.1), train_set, dev_set, quick_config())
            runs.append(result)
        strip = [[{k: v for k, v in r.items() if k != "wall_ms"} for r in run.history] for run in runs]
        assert strip[0] == strip[1]
        first, second = (run.model.state_arrays() for run in runs)
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_metrics_log(self, tmp_path):
        path = str(tmp_path / "logs" / "metrics.jsonl")
        records = []
        result = train(tiny_model(), copy_reverse_samples(count=8), copy_reverse_samples(count=2, seed=9),
                       quick_config(), metrics_path=path, on_record=records.append)
        frame = load_metrics(path)
        assert list(frame["step"]) == [3, 6]
        assert {"step", "train_loss", "dev_loss", "lr", "wall_ms"} <= set(frame.columns)
        assert records == result.history

    def test_dev_bleu_scores_single_decoder_without_eos(self, monkeypatch):
        dev = copy_reverse_samples(count=4, length=5)
        refs = {tuple(s.src): list(s.tgt1) for s in dev}
        monkeypatch.setattr(search, "greedy_decode",
                            lambda model, src, config=None, side=1: Hypothesis(refs[tuple(src)] + [EOS_ID], done=True))
        model = tiny_model(coupling="single")
        assert trainer.dev_bleu(model, dev, quick_config()) == pytest.approx(-100.0)

    def test_missing_metrics_log_is_empty(self, tmp_path):
        assert load_metrics(str(tmp_path / "absent.jsonl")).empty

    def test_overlapping_dev_set(self):
        samples = copy_reverse_samples(count=4)
        with pytest.raises(InputError):
            train(tiny_model(), samples, samples[:1], quick_config())

    def test_empty_training_set(self):
        with pytest.raises(InputError):
            train(tiny_model(), [], copy_reverse_samples(count=1), quick_config())

    @pytest.mark.slow
    @pytest.mark.parametrize("coupling", ["dual", "independent"])
    def test_overfits_toy_task(self, monkeypatch, coupling):
        drawn = copy_reverse_samples(count=36)
        samples = drawn[:32]
        select_on_training_set(monkeypatch, samples)
        model = tiny_model(coupling=coupling, d_model=32, d_ff=64, heads=4, enc_layers=2, dec_layers=2)
        result = train(model, samples, drawn[32:],
                       quick_config(max_steps=2000, eval_interval=50, patience=2000, peak_lr=3e-3,
                                    warmup_steps=100, label_smoothing=0.0, batch_tokens=64))
        assert result.steps <= 2000
        assert result.history[-1]["train_loss"] < 0.1 * result.history[0]["train_loss"]
        accuracy = token_accuracy(result.model, make_batch(samples))
        assert min(accuracy.values()) >= 0.99


def toy_bitexts():
    src = ["ab ba", "aab b", "ba ab a", "bb a", "a ab", "b ba b", "ab ab", "ba b"]
    return Bitext(src, [s.upper() for s in src]), Bitext(src, [s[::-1] for s in src])


class TestPretraining:
    def test_trains_single_decoder(self):
        bitext1, bitext2 = toy_bitexts()
        src_model = bpe_train(bitext1.src, 3, tags=["<2x>", "<2y>"])
        tgt_model = bpe_train(bitext1.tgt + bitext2.tgt, 3)
        result = pretrain_multilingual(bitext1, bitext2, src_model, tgt_model, ("<2x>", "<2y>"),
                                       tiny_config(), quick_config(max_steps=2, eval_interval=1, dev_fraction=0.25))
        assert result.model.config.coupling == "single"
        assert result.model.config.src_vocab_size == len(src_model)
        assert len(result.history) == 2

    def test_tags_must_differ(self):
        bitext1, bitext2 = toy_bitexts()
        src_model = bpe_train(bitext1.src, 3, tags=["<2x>"])
        with pytest.raises(ConfigError):
            pretrain_multilingual(bitext1, bitext2, src_model, src_model, ("<2x>", "<2x>"),
                                  tiny_config(), quick_config())

    def test_tags_must_be_declared(self):
        bitext1, bitext2 = toy_bitexts()
        src_model = bpe_train(bitext1.src, 3, tags=["<2x>"])
        with pytest.raises(ConfigError):
            pretrain_multilingual(bitext1, bitext2, src_model, src_model, ("<2x>", "<2y>"),
                                  tiny_config(), quick_config())

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_finetuning_reaches_threshold_before_scratch(self, seed):
        copy_tag, reverse_tag, threshold = 12, 13, 2.0
        architecture = dict(src_vocab_size=14, tgt_vocab_size=14, d_model=32, d_ff=64, heads=4,
                            enc_layers=2, dec_layers=2, seed=seed)
        bodies = copy_reverse_samples(count=240, seed=50 + seed)
        tagged = []
        for sample in bodies:
            tagged.append(TriSample((copy_tag,) + sample.src, sample.tgt1, sample.tgt1))
            tagged.append(TriSample((reverse_tag,) + sample.src, sample.tgt2, sample.tgt2))
        pretrained = train(tiny_model(coupling="single", **architecture), tagged[:440], tagged[440:],
                           quick_config(max_steps=1500, eval_interval=100, patience=5, peak_lr=3e-3,
                                        warmup_steps=100, label_smoothing=0.0, seed=seed)).model

        drawn = copy_reverse_samples(count=40, seed=seed)
        train_set, dev_set = drawn[:32], drawn[32:]

        def steps_to_threshold(model, mode):
            reached = []

            def note(record):
                if record["dev_loss"] <= threshold:
                    reached.append(record["step"])

            train(model, train_set, dev_set,
                  quick_config(mode=mode, finetune_lr=1e-3, max_steps=1500, eval_interval=25, patience=1000,
                               peak_lr=1e-3, warmup_steps=100, label_smoothing=0.0, seed=seed),
                  on_record=note)
            return reached[0] if reached else math.inf

        finetuned = steps_to_threshold(init_from_pretrained(pretrained, tiny_config(**architecture)), "finetune")
        scratch = steps_to_threshold(tiny_model(**architecture), "scratch")
        assert finetuned < scratch


def ambiguous_bidi_samples(count, seed):
    """
    Every source appears twice, once per variant of its first target token,
    and the second target is always the reversal of the first.
    """
    samples = []
    for sample in copy_reverse_samples(count=count, vocab=10, seed=seed):
        for marker in (10, 11):
            tgt1 = (marker,) + sample.tgt1
            samples.append(TriSample(sample.src, tgt1, tuple(reversed(tgt1))))
    return samples


class TestConsistencyDirection:
    @pytest.mark.slow
    def test_coupled_decoders_agree_more_than_independent_ones(self, monkeypatch):
        from evaluation import consistency_score
        from search import SearchConfig, greedy_dual_decode

        def as_text(ids):
            return " ".join(str(t) for t in ids)

        wins = 0
        for seed in range(5):
            drawn = ambiguous_bidi_samples(28, seed)
            samples, dev = drawn[:48], drawn[48:]
            select_on_training_set(monkeypatch, samples)
            scores = {}
            for coupling in ("dual", "independent"):
                model = tiny_model(coupling=coupling, d_model=32, d_ff=64, heads=4, enc_layers=2, dec_layers=2,
                                   seed=seed)
                result = train(model, samples, dev,
                               quick_config(max_steps=1200, eval_interval=100, patience=1000, peak_lr=3e-3,
                                            warmup_steps=100, label_smoothing=0.0, batch_tokens=96, seed=seed))
                config = SearchConfig(beam_size=1, max_len=8)
                pairs = [greedy_dual_decode(result.model, src, config) for src in sorted({s.src for s in samples})]
                scores[coupling] = consistency_score([as_text(p.output1) for p in pairs],
                                                     [as_text(p.output2) for p in pairs])
            wins += scores["dual"] > scores["independent"]
        assert wins >= 4
