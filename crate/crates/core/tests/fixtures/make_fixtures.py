"""Regenerate the frozen test fixtures.

Writes a tiny randomly initialised BERT (safetensors + config + vocab) and the
hidden states / attentions the reference implementation produces for a few
token sequences, plus reference WordPiece tokenizations of sample sentences.
"""
import json
import os
import shutil

import torch
from tokenizers import BertWordPieceTokenizer
from transformers import BertConfig, BertModel

HERE = os.path.dirname(os.path.abspath(__file__))
VOCAB = os.path.join(HERE, "..", "..", "data", "vocab.txt")
OUT = os.path.join(HERE, "tiny-bert")

SENTENCES = [
    "She gave him a book.",
    "The artist painted the wall red.",
    "He fought his way to the top.",
    "\"Pushed the CART into the garage!\"",
    "go",
    "Naïve café owners sold zymurgy kits.",
]


def main():
    os.makedirs(OUT, exist_ok=True)
    shutil.copy(VOCAB, os.path.join(OUT, "vocab.txt"))
    tok = BertWordPieceTokenizer(VOCAB, lowercase=True)
    vocab_size = sum(1 for _ in open(VOCAB, encoding="utf-8"))

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=vocab_size,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
        type_vocab_size=2,
        hidden_act="gelu",
        layer_norm_eps=1e-12,
        attn_implementation="eager",
    )
    model = BertModel(config, add_pooling_layer=False).eval()
    with torch.no_grad():
        for p in model.parameters():
            p.normal_(0.0, 0.5)
    model.save_pretrained(OUT, safe_serialization=True)

    tokenizations = []
    expected = []
    for s in SENTENCES:
        enc = tok.encode(s)
        tokenizations.append({"text": s, "tokens": enc.tokens, "ids": enc.ids})
        ids = torch.tensor([enc.ids])
        with torch.no_grad():
            out = model(input_ids=ids, output_hidden_states=True, output_attentions=True)
        expected.append(
            {
                "text": s,
                "ids": enc.ids,
                "hidden_states": [h[0].tolist() for h in out.hidden_states],
                "attentions": [a[0].tolist() for a in out.attentions],
            }
        )
    with open(os.path.join(HERE, "wordpiece_reference.json"), "w", encoding="utf-8") as f:
        json.dump(tokenizations, f, ensure_ascii=False, indent=1)
    with open(os.path.join(OUT, "expected.json"), "w", encoding="utf-8") as f:
        json.dump(expected, f)


if __name__ == "__main__":
    main()
