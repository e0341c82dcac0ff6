import os

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.pre_tokenizers import WhitespaceSplit
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "pt", "has", "was", "seen", "stable", "today",
    "pain", "##kill", "##er", "##a", "##b", "fever", "aspirin", "lab", "##test",
]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """A tiny randomly-initialized BERT saved locally (no network)."""
    out = tmp_path_factory.mktemp("tiny-bert")
    wordpiece = Tokenizer(WordPiece({t: i for i, t in enumerate(VOCAB)}, unk_token="[UNK]"))
    wordpiece.pre_tokenizer = WhitespaceSplit()
    wordpiece.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", VOCAB.index("[CLS]")), ("[SEP]", VOCAB.index("[SEP]"))],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=wordpiece,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    )
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=32,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model.save_pretrained(str(out))
    tokenizer.save_pretrained(str(out))
    return str(out)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Two-document corpus in the txt/ layout; 'painkiller' splits into
    three pieces, 'paina'/'painb' into two."""
    root = tmp_path_factory.mktemp("corpus")
    txt = root / "txt"
    txt.mkdir()
    (txt / "doc-a.txt").write_text(
        "pt has paina today\npainkiller was seen\n", encoding="utf-8"
    )
    (txt / "doc-b.txt").write_text("fever stable\n", encoding="utf-8")
    return str(root)
