"""Reader/writer for i2b2-style annotation files.

Formats handled:
  text   one sentence per line, tokens separated by single spaces
  .con   c="<text>" L:S L:E||t="<type>"
  .ast   c="<text>" L:S L:E||t="<type>"||a="<assertion>"
  .rel   c="<text1>" L:S1 L:E1||r="<rel>"||c="<text2>" L:S2 L:E2

L is a 1-based line (= sentence) number; S/E are 0-based token offsets with E
inclusive. Quoted text must match the referenced tokens case-insensitively.
Cross-sentence relations are dropped with a logged count; every other
irregularity is a hard error (silent offset drift corrupts all three stages).
"""

from __future__ import annotations

import logging
import os
import re

from .types import (
    AnnotatedDocument,
    AssertionLabel,
    ConceptSpan,
    RelationTriple,
)

logger = logging.getLogger("jmie.corpus")


class ParseError(ValueError):
    """Base class for annotation-file errors."""


class MalformedLine(ParseError):
    def __init__(self, path: str, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")


class IndexOutOfRange(ParseError):
    pass


class ConceptTextMismatch(ParseError):
    pass


class DanglingAnnotation(ParseError):
    pass


_CONCEPT_REF = r'c="(.*)" (\d+):(\d+) (\d+):(\d+)'
_CON_RE = re.compile(rf'^{_CONCEPT_REF}\|\|t="([^"|]+)"$')
_AST_RE = re.compile(rf'^{_CONCEPT_REF}\|\|t="([^"|]+)"\|\|a="([^"|]+)"$')
_REL_RE = re.compile(rf'^{_CONCEPT_REF}\|\|r="([^"|]+)"\|\|{_CONCEPT_REF}$')


def _read_lines(stream) -> list[str]:
    data = stream.read() if hasattr(stream, "read") else stream
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.replace("\r\n", "\n").split("\n")


def _check_ref(sentences, text, line1, tok1, line2, tok2, path, lineno):
    """Resolve one quoted concept reference to (sent_index, start, end)."""
    if line1 != line2:
        raise MalformedLine(path, lineno, f"concept spans lines {line1} and {line2}")
    sent_index = line1 - 1
    if not (0 <= sent_index < len(sentences)):
        raise IndexOutOfRange(f"{path}:{lineno}: line {line1} outside document")
    sent = sentences[sent_index]
    if not (0 <= tok1 <= tok2 < len(sent)):
        raise IndexOutOfRange(
            f"{path}:{lineno}: tokens {tok1}..{tok2} outside sentence of length {len(sent)}"
        )
    actual = " ".join(sent[tok1 : tok2 + 1])
    if actual.lower() != text.lower():
        raise ConceptTextMismatch(
            f"{path}:{lineno}: quoted {text!r} does not match tokens {actual!r}"
        )
    return sent_index, tok1, tok2


def parse_document(text_file, con_file, ast_file, rel_file, doc_id: str = "doc",
                   gold: bool = True) -> AnnotatedDocument:
    """Parse one report plus its three annotation files into a document.

    Accepts byte/str streams or raw bytes/str for each file. Empty annotation
    inputs yield a document with zero annotations. ``gold=False`` skips the
    gold-only invariants (one assertion per problem, relation categories) so
    system predictions, which legitimately violate them, can be reloaded.
    """
    raw_sentences = _read_lines(text_file)
    # A trailing newline produces one final empty line, not an empty sentence.
    if raw_sentences and raw_sentences[-1] == "":
        raw_sentences.pop()
    sentences = tuple(tuple(line.split()) for line in raw_sentences)

    concepts = []
    concept_index: dict[tuple, ConceptSpan] = {}
    for lineno, line in enumerate(_read_lines(con_file), start=1):
        line = line.strip()
        if not line:
            continue
        m = _CON_RE.match(line)
        if not m:
            raise MalformedLine(f"{doc_id}.con", lineno, f"unparseable concept line: {line!r}")
        text, l1, s, l2, e, ctype = m.group(1), *map(int, m.group(2, 3, 4, 5)), m.group(6)
        sent_index, start, end = _check_ref(sentences, text, l1, s, l2, e, f"{doc_id}.con", lineno)
        span = ConceptSpan(sent_index, start, end, ctype)
        concepts.append(span)
        concept_index[(sent_index, start, end, ctype)] = span

    def _resolve(sent_index, start, end, ctype, path, lineno):
        span = concept_index.get((sent_index, start, end, ctype))
        if span is None:
            raise DanglingAnnotation(
                f"{path}:{lineno}: no concept {ctype!r} at {sent_index + 1}:{start}..{end}"
            )
        return span

    assertions = []
    for lineno, line in enumerate(_read_lines(ast_file), start=1):
        line = line.strip()
        if not line:
            continue
        m = _AST_RE.match(line)
        if not m:
            raise MalformedLine(f"{doc_id}.ast", lineno, f"unparseable assertion line: {line!r}")
        text, l1, s, l2, e = m.group(1), *map(int, m.group(2, 3, 4, 5))
        ctype, alabel = m.group(6), m.group(7)
        ref = _check_ref(sentences, text, l1, s, l2, e, f"{doc_id}.ast", lineno)
        span = _resolve(*ref, ctype, f"{doc_id}.ast", lineno)
        assertions.append(AssertionLabel(span, alabel))

    relations = []
    dropped_cross_sentence = 0
    for lineno, line in enumerate(_read_lines(rel_file), start=1):
        line = line.strip()
        if not line:
            continue
        m = _REL_RE.match(line)
        if not m:
            raise MalformedLine(f"{doc_id}.rel", lineno, f"unparseable relation line: {line!r}")
        text1, a1, b1, a2, b2 = m.group(1), *map(int, m.group(2, 3, 4, 5))
        rlabel = m.group(6)
        text2, c1, d1, c2, d2 = m.group(7), *map(int, m.group(8, 9, 10, 11))
        if a1 != c1:
            dropped_cross_sentence += 1
            continue
        ref1 = _check_ref(sentences, text1, a1, b1, a2, b2, f"{doc_id}.rel", lineno)
        ref2 = _check_ref(sentences, text2, c1, d1, c2, d2, f"{doc_id}.rel", lineno)
        subj = _find_by_span(concept_index, ref1, f"{doc_id}.rel", lineno)
        obj = _find_by_span(concept_index, ref2, f"{doc_id}.rel", lineno)
        relations.append(RelationTriple(subj, rlabel, obj))
    if dropped_cross_sentence:
        logger.warning(
            "%s: dropped %d cross-sentence relation(s) at ingestion",
            doc_id,
            dropped_cross_sentence,
        )

    doc = AnnotatedDocument(doc_id, sentences, concepts, assertions, relations)
    if gold:
        doc.validate_gold()
    return doc


def _find_by_span(concept_index, ref, path, lineno):
    """Relation lines omit concept types; match on the span alone."""
    matches = [v for k, v in concept_index.items() if k[:3] == ref]
    if not matches:
        raise DanglingAnnotation(f"{path}:{lineno}: no concept at {ref[0] + 1}:{ref[1]}..{ref[2]}")
    return matches[0]


def _quote(doc: AnnotatedDocument, span: ConceptSpan) -> str:
    text = " ".join(doc.sentences[span.sent_index][span.start_tok : span.end_tok + 1])
    return text.lower()


def _ref(doc: AnnotatedDocument, span: ConceptSpan) -> str:
    line = span.sent_index + 1
    return f'c="{_quote(doc, span)}" {line}:{span.start_tok} {line}:{span.end_tok}'


def serialize_document(doc: AnnotatedDocument) -> tuple[str, str, str, str]:
    """Emit (text, con, ast, rel) file contents in the deterministic order:
    annotations sorted by line, then start offset."""
    text = "".join(" ".join(sent) + "\n" for sent in doc.sentences)
    con_lines = [
        f'{_ref(doc, c)}||t="{c.ctype}"'
        for c in sorted(doc.concepts, key=lambda c: (c.sent_index, c.start_tok, c.end_tok, c.ctype))
    ]
    ast_lines = [
        f'{_ref(doc, a.concept)}||t="{a.concept.ctype}"||a="{a.label}"'
        for a in sorted(
            doc.assertions,
            key=lambda a: (a.concept.sent_index, a.concept.start_tok, a.concept.end_tok),
        )
    ]
    rel_lines = [
        f'{_ref(doc, r.subject)}||r="{r.label}"||{_ref(doc, r.object)}'
        for r in sorted(
            doc.relations,
            key=lambda r: (
                r.subject.sent_index,
                r.subject.start_tok,
                r.object.start_tok,
                r.label,
            ),
        )
    ]
    join = lambda lines: "".join(line + "\n" for line in lines)
    return text, join(con_lines), join(ast_lines), join(rel_lines)


def load_document(txt_path: str, con_path=None, ast_path=None, rel_path=None,
                  gold: bool = True) -> AnnotatedDocument:
    doc_id = os.path.splitext(os.path.basename(txt_path))[0]

    def read(path):
        if path is None or not os.path.exists(path):
            return b""
        with open(path, "rb") as f:
            return f.read()

    with open(txt_path, "rb") as f:
        text = f.read()
    return parse_document(
        text, read(con_path), read(ast_path), read(rel_path), doc_id=doc_id, gold=gold
    )


def list_corpus_files(root: str) -> list[tuple]:
    """(txt, con, ast, rel) path tuples for every document under ``root``.

    Supports the i2b2 layout (txt/, concept/, ast/, rel/ subdirectories with
    matching basenames) and a flat layout (<id>.txt plus optional <id>.con,
    <id>.ast, <id>.rel side by side).
    """
    txt_dir = os.path.join(root, "txt")
    out = []
    if os.path.isdir(txt_dir):
        for name in sorted(os.listdir(txt_dir)):
            if not name.endswith(".txt"):
                continue
            stem = name[: -len(".txt")]
            out.append(
                (
                    os.path.join(txt_dir, name),
                    os.path.join(root, "concept", stem + ".con"),
                    os.path.join(root, "ast", stem + ".ast"),
                    os.path.join(root, "rel", stem + ".rel"),
                )
            )
        return out
    for name in sorted(os.listdir(root)):
        if not name.endswith(".txt"):
            continue
        stem = os.path.join(root, name[: -len(".txt")])
        out.append((stem + ".txt", stem + ".con", stem + ".ast", stem + ".rel"))
    return out


def load_corpus_dir(root: str, jobs: int = 1, gold: bool = True) -> list[AnnotatedDocument]:
    """Load every document under ``root``; missing annotation files mean zero
    annotations of that kind. Parsing is pure per document, so ``jobs`` > 1
    parses files concurrently (document order is preserved)."""
    files = list_corpus_files(root)
    if jobs > 1 and len(files) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda paths: load_document(*paths, gold=gold), files))
    return [load_document(*paths, gold=gold) for paths in files]


def save_corpus_dir(documents, root: str) -> None:
    """Serialize documents into the i2b2 directory layout under ``root``."""
    for sub in ("txt", "concept", "ast", "rel"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    for doc in documents:
        text, con, ast, rel = serialize_document(doc)
        for sub, ext, payload in (
            ("txt", ".txt", text),
            ("concept", ".con", con),
            ("ast", ".ast", ast),
            ("rel", ".rel", rel),
        ):
            with open(os.path.join(root, sub, doc.doc_id + ext), "w", encoding="utf-8") as f:
                f.write(payload)
