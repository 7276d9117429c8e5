from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
import torch

from esgclarity.clarity import (
    ClarityModel,
    SoftPrompt,
    evaluate_clarity,
    finetune_encoder_contrastive,
    generate_contrastive_pairs,
    load_encoder,
    parameter_digest,
    train_head,
    train_prompt_tuned,
)
from esgclarity.clarity.model import CONTRASTIVE_HEAD, PROMPT_TUNED
from esgclarity.errors import MissingClass, NonFiniteLoss, SingleClassSet
from esgclarity.labels import CLARITY_ORDER, ClarityLabel

S, A, G = ClarityLabel.SPECIFIC, ClarityLabel.AMBIGUOUS, ClarityLabel.GENERIC


def toy_labeled(n_per: int = 4) -> list[tuple[str, ClarityLabel]]:
    items = []
    for i in range(n_per):
        items.append((f"at least {i} percent of assets are excluded by rule", S))
        items.append((f"the adviser may consider factors {i} at its discretion", A))
        items.append((f"scores for index {i} come from the data vendor", G))
    random.Random(0).shuffle(items)
    return items


class TestPairGeneration:
    def test_two_by_two_counts_and_subset_of_brute_force(self):
        labeled = [("s1", S), ("s2", S), ("a1", A), ("a2", A)]
        batch = generate_contrastive_pairs(labeled, r_per_item=1, seed=0)
        positives = [p for p in batch.pairs if p[2] == 1.0]
        negatives = [p for p in batch.pairs if p[2] == 0.0]
        assert len(positives) == 4 and len(negatives) == 4
        label_of = dict(labeled)
        valid_pos = {
            (a, b) for (a, la), (b, lb) in itertools.permutations(labeled, 2) if la == lb
        }
        valid_neg = {
            (a, b) for (a, la), (b, lb) in itertools.permutations(labeled, 2) if la != lb
        }
        assert {(a, b) for a, b, _ in positives} <= valid_pos
        assert {(a, b) for a, b, _ in negatives} <= valid_neg
        del label_of

    def test_single_class_strict_raises(self):
        with pytest.raises(SingleClassSet):
            generate_contrastive_pairs([("x", S), ("y", S)], r_per_item=1)

    def test_single_class_lenient_flags(self):
        batch = generate_contrastive_pairs(
            [("x", S), ("y", S)], r_per_item=1, strict=False
        )
        assert batch.single_class
        assert all(t == 1.0 for _, _, t in batch.pairs)

    def test_same_seed_identical(self):
        labeled = toy_labeled()
        b1 = generate_contrastive_pairs(labeled, r_per_item=3, seed=7)
        b2 = generate_contrastive_pairs(labeled, r_per_item=3, seed=7)
        assert b1 == b2

    def test_target_matches_label_equality_brute_force(self):
        labeled = toy_labeled()
        label_of = dict(labeled)
        batch = generate_contrastive_pairs(labeled, r_per_item=5, seed=3)
        for a, b, target in batch.pairs:
            assert target == float(label_of[a] == label_of[b])
            assert a != b  # distinct texts here, so no self-pairs

    def test_replacement_tops_up_small_pools(self):
        labeled = [("s1", S), ("s2", S), ("a1", A)]
        batch = generate_contrastive_pairs(labeled, r_per_item=4, seed=0)
        pos_from_s1 = [p for p in batch.pairs if p[0] == "s1" and p[2] == 1.0]
        assert len(pos_from_s1) == 4  # pool of 1 partner, sampled with replacement


class TestEncoders:
    def test_name_seeded_determinism(self):
        e1 = load_encoder("local:sentence-micro")
        e2 = load_encoder("local:sentence-micro")
        assert e1.parameter_digest == e2.parameter_digest

    def test_distinct_names_distinct_weights(self):
        assert (
            load_encoder("local:sentence-micro").parameter_digest
            != load_encoder("local:mlm-micro").parameter_digest
        )

    def test_sentence_family_unit_norm(self):
        enc = load_encoder("local:sentence-micro")
        emb = enc.embed(["hello world", "another sentence"])
        assert emb.shape == (2, enc.dim)
        assert np.allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-6)

    def test_embed_deterministic(self):
        enc = load_encoder("local:sentence-micro")
        a = enc.embed(["the same text"])
        b = enc.embed(["the same text"])
        assert np.array_equal(a, b)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            load_encoder("local:nope")


class TestContrastiveFinetune:
    def test_zero_epochs_digest_unchanged(self):
        enc = load_encoder("local:sentence-micro")
        batch = generate_contrastive_pairs(toy_labeled(), r_per_item=1, seed=0)
        tuned = finetune_encoder_contrastive(enc, batch, epochs=0)
        assert tuned.parameter_digest == enc.parameter_digest

    def test_loss_decreases_and_digest_changes(self):
        enc = load_encoder("local:sentence-micro")
        labeled = toy_labeled(4)  # 12 sentences
        batch = generate_contrastive_pairs(labeled, r_per_item=4, seed=0)
        tuned = finetune_encoder_contrastive(enc, batch, epochs=1, learning_rate=5e-3)
        # trace endpoints are whole-pair-set losses before/after training
        assert tuned.epoch_losses[-1] < tuned.epoch_losses[0]
        assert tuned.parameter_digest != enc.parameter_digest
        assert tuned.dim == enc.dim

    def test_input_encoder_not_mutated(self):
        enc = load_encoder("local:sentence-micro")
        before = enc.compute_digest()
        batch = generate_contrastive_pairs(toy_labeled(), r_per_item=2, seed=0)
        finetune_encoder_contrastive(enc, batch, epochs=1)
        assert enc.compute_digest() == before

    def test_non_finite_loss_raises(self):
        enc = load_encoder("local:sentence-micro")
        with torch.no_grad():
            enc.net.emb.weight[1:] = float("nan")
        batch = generate_contrastive_pairs(toy_labeled(), r_per_item=1, seed=0)
        with pytest.raises(NonFiniteLoss):
            finetune_encoder_contrastive(enc, batch, epochs=1)

    def test_frozen_encoder_rejected(self):
        enc = load_encoder("local:mlm-micro")
        batch = generate_contrastive_pairs(toy_labeled(), r_per_item=1, seed=0)
        with pytest.raises(ValueError):
            finetune_encoder_contrastive(enc, batch, epochs=1)


class TestTrainHead:
    def test_beats_uniform_baseline_on_train(self):
        enc = load_encoder("local:sentence-micro")
        labeled = toy_labeled(6)
        model = train_head(enc, labeled, seed=0)
        rep = evaluate_clarity(model, labeled)
        assert rep.accuracy >= 1 / 3

    def test_separable_clusters_match_nearest_centroid_oracle(self, cluster_encoder):
        encoder, labeled = cluster_encoder
        train, holdout = labeled[:60], labeled[60:]
        model = train_head(encoder, train, seed=0)
        rep = evaluate_clarity(model, holdout)
        assert rep.accuracy == 1.0
        centroids = {}
        for label in CLARITY_ORDER:
            vecs = [encoder.table[t] for t, l in train if l == label]
            centroids[label] = np.mean(vecs, axis=0)
        for text, _ in holdout:
            pred, _ = model.predict(text)
            vec = encoder.table[text]
            oracle = min(centroids, key=lambda c: np.linalg.norm(vec - centroids[c]))
            assert pred == oracle

    def test_missing_class_raises(self):
        enc = load_encoder("local:sentence-micro")
        labeled = [("a", S), ("b", S), ("c", A), ("d", A)]
        with pytest.raises(MissingClass):
            train_head(enc, labeled, seed=0)


class TestPromptTuned:
    def test_frozen_digest_bit_identical(self):
        enc = load_encoder("local:mlm-micro")
        before = enc.compute_digest()
        model = train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=4,
                                   epochs=2, seed=0)
        assert enc.compute_digest() == before
        assert model.encoder.parameter_digest == before

    def test_trainable_parameter_count_formula(self):
        enc = load_encoder("local:mlm-base")  # hidden width 768
        model = train_prompt_tuned(enc, toy_labeled(2), num_virtual_tokens=20,
                                   epochs=0, seed=0)
        assert model.training_meta["trainable_parameters"] == 20 * 768 + (768 * 3 + 3)
        assert model.training_meta["trainable_parameters"] == 17_667

    def test_zero_epochs_still_well_formed(self):
        enc = load_encoder("local:mlm-micro")
        model = train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=4,
                                   epochs=0, seed=0)
        _, probs = model.predict("anything at all")
        assert probs.shape == (3,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)
        assert (probs >= 0).all()

    def test_missing_class_raises(self):
        enc = load_encoder("local:mlm-micro")
        with pytest.raises(MissingClass):
            train_prompt_tuned(enc, [("a", S), ("b", A)], num_virtual_tokens=2, epochs=1)

    def test_finetunable_encoder_rejected(self):
        enc = load_encoder("local:sentence-micro")
        with pytest.raises(ValueError):
            train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=2, epochs=0)

    def test_prompt_initialized_from_embedding_rows(self):
        enc = load_encoder("local:mlm-micro")
        model = train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=3,
                                   epochs=0, seed=1)
        emb = enc.net.emb.weight.detach().numpy()
        for row in model.prompt.embeddings:
            assert any(np.allclose(row, emb[i]) for i in range(emb.shape[0]))


class TestClarityModel:
    def test_distribution_sums_to_one(self):
        enc = load_encoder("local:sentence-micro")
        model = train_head(enc, toy_labeled(), seed=0)
        for text in ["short", "a much longer sentence with many words in it", ""]:
            _, probs = model.predict(text)
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_prediction_deterministic(self):
        enc = load_encoder("local:sentence-micro")
        model = train_head(enc, toy_labeled(), seed=0)
        l1, p1 = model.predict("the same sentence")
        l2, p2 = model.predict("the same sentence")
        assert l1 == l2
        assert np.array_equal(p1, p2)

    def test_argmax_invariant_under_positive_scaling(self):
        enc = load_encoder("local:sentence-micro")
        model = train_head(enc, toy_labeled(), seed=0)
        texts = [t for t, _ in toy_labeled(2)]
        before = [model.predict(t)[0] for t in texts]
        model.head_weights = model.head_weights * 3.7
        model.head_bias = model.head_bias * 3.7
        after = [model.predict(t)[0] for t in texts]
        assert before == after

    def test_tie_breaks_by_canonical_order(self):
        enc = load_encoder("local:sentence-micro")
        model = train_head(enc, toy_labeled(), seed=0)
        model.head_weights = np.zeros_like(model.head_weights)
        model.head_bias = np.zeros_like(model.head_bias)
        label, probs = model.predict("ties everywhere")
        assert label == S  # first in canonical order
        assert np.allclose(probs, 1 / 3)

    def test_invariant_prompt_iff_prompt_tuned(self):
        enc = load_encoder("local:sentence-micro")
        with pytest.raises(ValueError):
            ClarityModel(
                kind=PROMPT_TUNED, encoder=enc,
                head_weights=np.zeros((3, enc.dim)), head_bias=np.zeros(3),
                prompt=None,
            )
        frozen = load_encoder("local:mlm-micro")
        with pytest.raises(ValueError):
            ClarityModel(
                kind=CONTRASTIVE_HEAD, encoder=frozen,
                head_weights=np.zeros((3, frozen.dim)), head_bias=np.zeros(3),
                prompt=SoftPrompt(1, np.zeros((1, frozen.dim))),
            )

    def test_save_load_round_trip_contrastive(self, tmp_path):
        enc = load_encoder("local:sentence-micro")
        batch = generate_contrastive_pairs(toy_labeled(), r_per_item=2, seed=0)
        tuned = finetune_encoder_contrastive(enc, batch, epochs=1)
        model = train_head(tuned, toy_labeled(), seed=0)
        model.save(tmp_path / "m")
        loaded = ClarityModel.load(tmp_path / "m")
        texts = ["alpha beta", "the adviser may consider"]
        for t in texts:
            l1, p1 = model.predict(t)
            l2, p2 = loaded.predict(t)
            assert l1 == l2
            assert np.allclose(p1, p2)
        assert loaded.version == model.version

    def test_save_load_round_trip_prompt(self, tmp_path):
        enc = load_encoder("local:mlm-micro")
        model = train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=3,
                                   epochs=1, seed=0)
        model.save(tmp_path / "m")
        loaded = ClarityModel.load(tmp_path / "m")
        for t in ["one sentence", "another sentence entirely"]:
            assert np.allclose(model.predict(t)[1], loaded.predict(t)[1])

    def test_tampered_artifact_digest_mismatch(self, tmp_path):
        enc = load_encoder("local:mlm-micro")
        model = train_prompt_tuned(enc, toy_labeled(), num_virtual_tokens=2,
                                   epochs=0, seed=0)
        d = model.save(tmp_path / "m")
        manifest = (d / "manifest.json").read_text().replace(
            model.encoder.parameter_digest, "0" * 64
        )
        (d / "manifest.json").write_text(manifest)
        with pytest.raises(ValueError, match="digest mismatch"):
            ClarityModel.load(d)
