import math
from pathlib import Path

import numpy as np
import pytest

import contrabias as cb

ROOT = Path(__file__).resolve().parents[2]


def test_scores():
    assert cb.bias_score(0.625) == pytest.approx(25.0)
    assert cb.bias_score(0.5) == 0.0
    assert cb.kl_bias_score(0.625) == pytest.approx(0.0316, abs=5e-4)
    assert cb.kl_bias_score(1.0) == pytest.approx(math.log(2))
    assert cb.stereotype_probability(5, 8) == 0.625
    assert cb.macro_f1(2, 1, 1, 2) == pytest.approx(2 / 3)


def test_errors_carry_code():
    with pytest.raises(cb.ContrabiasError) as info:
        cb.stereotype_probability(0, 0)
    assert info.value.code == "EmptyEvaluation"


def test_embed_is_unit_norm_and_deterministic():
    texts = ["the river is wide", "a stone house"]
    a = cb.embed(texts)
    assert a.shape == (2, 384)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(a, cb.embed(texts))


def test_corpus_and_delta_sim():
    path = str(ROOT / "data" / "synthetic_corpus.jsonl")
    stats = cb.corpus_stats(path)
    assert stats["overall"]["contexts"] == 120
    assert sum(c["total"] for c in stats["per_category"].values()) == stats["overall"]["total"]
    report = cb.delta_sim(path)
    assert report["delta_sim"] == pytest.approx(abs(report["mu_intra"] - report["mu_inter"]))


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 5))
    labels = ["stereotype", "stereotype", "anti_stereotype"] * 2
    ctx = ["a"] * 3 + ["b"] * 3
    value, grad = cb.compute_loss(x, labels, ctx, "nt_xent", temperature=0.5)
    eps = 1e-6
    for i, j in [(0, 0), (2, 3), (5, 4)]:
        up, down = x.copy(), x.copy()
        up[i, j] += eps
        down[i, j] -= eps
        fd = (cb.compute_loss(up, labels, ctx, "nt_xent", temperature=0.5)[0]
              - cb.compute_loss(down, labels, ctx, "nt_xent", temperature=0.5)[0]) / (2 * eps)
        assert grad[i, j] == pytest.approx(fd, abs=1e-6)
    assert value > 0


def test_prompt_and_parse():
    prompt = cb.render_prompt("The <MASK> family lived here.", "caste")
    assert "The <MASK> family lived here." in prompt
    assert "pertaining to caste" in prompt
    assert cb.parse_completion('{"predicted_sentence": "The rich family lived here."}') == "The rich family lived here."
    assert cb.parse_completion("no json here") is None
    assert cb.classify("the rich family", "the rich family", "the poor family") == "stereotype"


def test_tsne_shape():
    pts = np.random.default_rng(1).normal(size=(12, 4))
    y = cb.tsne(pts, perplexity=3, iterations=100, seed=2)
    assert y.shape == (12, 2)
    with pytest.raises(cb.ContrabiasError):
        cb.tsne(pts[:3], perplexity=5)
