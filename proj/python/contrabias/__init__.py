"""Python access to the contrabias core: scoring, losses, embeddings, t-SNE."""

from ._core import (
    ContrabiasError,
    bias_score,
    classify,
    compute_loss,
    corpus_stats,
    delta_sim,
    embed,
    kl_bias_score,
    macro_f1,
    parse_completion,
    render_prompt,
    stereotype_probability,
    tsne,
)

__all__ = [
    "ContrabiasError",
    "bias_score",
    "classify",
    "compute_loss",
    "corpus_stats",
    "delta_sim",
    "embed",
    "kl_bias_score",
    "macro_f1",
    "parse_completion",
    "render_prompt",
    "stereotype_probability",
    "tsne",
]
