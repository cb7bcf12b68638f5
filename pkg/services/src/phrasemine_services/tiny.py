"""Offline miniature checkpoints for tests and smoke runs.

No network, no pretrained weights: a whole-word WordPiece tokenizer is built
from a given vocabulary and paired with a small randomly initialized model,
then saved as a normal checkpoint directory that AutoModel/AutoTokenizer can
load. Random weights are useless linguistically but are exactly what protocol
conformance and memorization tests need.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
from tokenizers.processors import TemplateProcessing
from transformers import (
    BartConfig,
    BartForConditionalGeneration,
    BertConfig,
    BertModel,
    PreTrainedTokenizerFast,
)

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def build_wordpiece_tokenizer(words: list[str]) -> PreTrainedTokenizerFast:
    """Lowercasing WordPiece over whole words; punctuation splits off, so a
    hyphenated word becomes several pieces just like a real subword vocab."""
    vocab = {tok: i for i, tok in enumerate(SPECIALS)}
    for word in sorted({w.lower() for w in words}):
        for piece in word.replace("-", " - ").split():
            vocab.setdefault(piece, len(vocab))
    tk = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]", continuing_subword_prefix="##"))
    tk.normalizer = normalizers.BertNormalizer(lowercase=True)
    tk.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=tk,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


DEFAULT_WORDS = [
    "sensor", "selection", "energy-efficient", "ambulatory", "medical",
    "monitoring", "neural", "network", "market", "growth", "policy", "rate",
    "graph", "mining", "data", "model", "deep", "learning", "for", "the",
    "of", "and", ",", ".",
]


def build_tiny_masked_lm(
    out_dir: str | Path,
    words: list[str] | None = None,
    *,
    seed: int = 7,
    hidden_size: int = 32,
    num_layers: int = 2,
) -> Path:
    """Save a small random BERT-style encoder plus tokenizer; returns the dir."""
    out_dir = Path(out_dir)
    tokenizer = build_wordpiece_tokenizer(words or DEFAULT_WORDS)
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(tokenizer),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=2,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=128,
    )
    model = BertModel(config)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir


def build_tiny_seq2seq(
    out_dir: str | Path,
    train_file: str | Path,
    *,
    seed: int = 13,
    d_model: int = 64,
) -> Path:
    """Save a small random encoder-decoder whose vocabulary covers a train
    file's sources and targets; returns the dir."""
    words: set[str] = set()
    with open(train_file, "r", encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            words.update(obj["source"].split())
            words.update(obj["target"].split())
    tokenizer = build_wordpiece_tokenizer(sorted(words) + [","])
    torch.manual_seed(seed)
    config = BartConfig(
        vocab_size=len(tokenizer),
        d_model=d_model,
        encoder_layers=2,
        decoder_layers=2,
        encoder_attention_heads=2,
        decoder_attention_heads=2,
        encoder_ffn_dim=d_model * 2,
        decoder_ffn_dim=d_model * 2,
        max_position_embeddings=256,
        pad_token_id=tokenizer.pad_token_id,
        bos_token_id=tokenizer.cls_token_id,
        eos_token_id=tokenizer.sep_token_id,
        decoder_start_token_id=tokenizer.cls_token_id,
    )
    model = BartForConditionalGeneration(config)
    out_dir = Path(out_dir)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir
