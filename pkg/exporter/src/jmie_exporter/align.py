"""Subword-piece to whitespace-token alignment."""

from __future__ import annotations


class TokenizerAlignmentFailure(ValueError):
    pass


def alignment_from_word_ids(word_ids, n_tokens: int) -> list:
    """Group piece positions by the corpus token they belong to.

    ``word_ids`` comes from a fast tokenizer run with
    ``is_split_into_words=True``: one entry per piece, None for special
    tokens. The result maps every corpus token to >= 1 piece positions, and
    the groups partition the non-special piece sequence.
    """
    groups: list[list[int]] = [[] for _ in range(n_tokens)]
    for position, word_id in enumerate(word_ids):
        if word_id is None:
            continue
        if not 0 <= word_id < n_tokens:
            raise TokenizerAlignmentFailure(f"piece maps to unknown token index {word_id}")
        groups[word_id].append(position)
    for index, pieces in enumerate(groups):
        if not pieces:
            raise TokenizerAlignmentFailure(f"token {index} produced no subword pieces")
    return groups


def align_sentence(tokenizer, tokens):
    """Tokenize one pre-split sentence; returns (encoding, piece groups)."""
    encoding = tokenizer(list(tokens), is_split_into_words=True, return_tensors="pt")
    return encoding, alignment_from_word_ids(encoding.word_ids(0), len(tokens))
