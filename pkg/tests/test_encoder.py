import numpy as np
import pytest

from jmie import autodiff as ad
from jmie.corpus import AnnotatedDocument
from jmie.encoder import (
    BadMagic,
    BiLstmParams,
    EmbeddingTable,
    EmptyFile,
    MissingEmbeddingEntry,
    PrecomputedEmbeddings,
    RaggedLine,
    SentenceEncoder,
    TokenCountMismatch,
    bilstm_forward,
    load_precomputed,
    load_word_vectors,
    write_jemb,
)
from jmie.encoder.lstm import LstmDirection


# ------------------------------------------------------------- word vectors


def write_vec_file(tmp_path, lines):
    path = tmp_path / "vectors.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def test_load_word_vectors_adds_unk_and_pad(tmp_path):
    path = write_vec_file(tmp_path, ["alpha 0.5 -1.25 2.0", "beta 1.5 0.75 -4.0"])
    table = load_word_vectors(path)
    assert table.dim == 3
    assert table.matrix.data.shape == (4, 3)
    unk_row = table.matrix.data[table.vocab["<unk>"]]
    np.testing.assert_allclose(unk_row, [1.0, -0.25, -1.0], atol=1e-7)
    np.testing.assert_array_equal(table.matrix.data[table.vocab["<pad>"]], np.zeros(3))


def test_known_token_round_trips_via_float32(tmp_path):
    # 0.1 is not exactly representable; the table must hold float32(0.1) widened
    path = write_vec_file(tmp_path, ["alpha 0.1 0.2 0.3", "beta 1 2 3"])
    table = load_word_vectors(path)
    ids = table.lookup_ids(["alpha"])
    got = table.matrix.data[ids[0]]
    want = np.array(["0.1", "0.2", "0.3"], dtype=np.float32).astype(np.float64)
    np.testing.assert_array_equal(got, want)


def test_oov_resolves_to_unk(tmp_path):
    path = write_vec_file(tmp_path, ["alpha 1 2", "beta 3 4"])
    table = load_word_vectors(path)
    assert table.lookup_ids(["gamma"])[0] == table.vocab["<unk>"]


def test_ragged_and_empty_vector_files(tmp_path):
    with pytest.raises(RaggedLine):
        load_word_vectors(write_vec_file(tmp_path, ["alpha 1 2", "beta 3"]))
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(EmptyFile):
        load_word_vectors(str(empty))


def test_table_from_corpus_is_deterministic():
    doc = AnnotatedDocument("d", [("b", "a"), ("c",)])
    t1 = EmbeddingTable.from_corpus([doc], 8, np.random.default_rng(3))
    t2 = EmbeddingTable.from_corpus([doc], 8, np.random.default_rng(3))
    np.testing.assert_array_equal(t1.matrix.data, t2.matrix.data)
    np.testing.assert_array_equal(t1.matrix.data[t1.pad_id], np.zeros(8))


# ------------------------------------------------------------------- JEMB1


def test_jemb_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    docs = {
        "doc-a": [rng.normal(size=(3, 5)).astype(np.float32), rng.normal(size=(1, 5)).astype(np.float32)],
        "doc-b": [rng.normal(size=(4, 5)).astype(np.float32)],
    }
    path = str(tmp_path / "emb.jemb")
    write_jemb(path, 5, docs)
    loaded = load_precomputed(path)
    assert loaded.dim == 5 and len(loaded) == 3
    np.testing.assert_array_equal(loaded.get("doc-a", 1), docs["doc-a"][1].astype(np.float64))
    np.testing.assert_array_equal(loaded.get("doc-b", 0), docs["doc-b"][0].astype(np.float64))


def test_jemb_empty_payload(tmp_path):
    path = str(tmp_path / "empty.jemb")
    write_jemb(path, 4, {})
    assert len(load_precomputed(path)) == 0


def test_jemb_bad_magic(tmp_path):
    path = tmp_path / "bad.jemb"
    path.write_bytes(b"WRONG" + b"\x00" * 12)
    with pytest.raises(BadMagic):
        load_precomputed(str(path))


def test_token_count_cross_check(tmp_path):
    path = str(tmp_path / "emb.jemb")
    write_jemb(path, 2, {"d": [np.zeros((3, 2), dtype=np.float32)]})
    emb = load_precomputed(path)
    doc = AnnotatedDocument("d", [("a", "b", "c")])
    emb.check_against([doc])  # matches
    bad_doc = AnnotatedDocument("d", [("a", "b")])
    with pytest.raises(TokenCountMismatch):
        emb.check_against([bad_doc])
    with pytest.raises(MissingEmbeddingEntry):
        emb.get("other", 0)


# ----------------------------------------------------------------- BiLSTM


def scalar_lstm_reference(x, wx, wh, b, reverse=False):
    """Step-by-step reference of the standard LSTM equations (numpy only)."""
    n, _ = x.shape
    hidden = wh.shape[0]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    out = np.zeros((n, hidden))
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        z = x[t] @ wx + h @ wh + b
        i = sig(z[0:hidden])
        f = sig(z[hidden : 2 * hidden])
        g = np.tanh(z[2 * hidden : 3 * hidden])
        o = sig(z[3 * hidden : 4 * hidden])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def test_zero_weights_give_zero_output():
    h = 3
    zero_dir = lambda: LstmDirection(
        ad.constant(np.zeros((2, 4 * h))), ad.constant(np.zeros((h, 4 * h))), ad.constant(np.zeros(4 * h))
    )
    params = BiLstmParams(2, h, zero_dir(), zero_dir())
    x = ad.constant(np.ones((1, 2)))
    out = bilstm_forward(x, params)
    np.testing.assert_array_equal(out.data, np.zeros((1, 2 * h)))


def test_bilstm_matches_scalar_reference():
    rng = np.random.default_rng(42)
    n, d, h = 3, 4, 5
    params = BiLstmParams.init(rng, d, h)
    x = rng.uniform(-1, 1, size=(n, d))
    out = bilstm_forward(ad.constant(x), params).data
    fwd = scalar_lstm_reference(
        x, params.forward.wx.data, params.forward.wh.data, params.forward.b.data
    )
    bwd = scalar_lstm_reference(
        x, params.backward.wx.data, params.backward.wh.data, params.backward.b.data, reverse=True
    )
    want = np.concatenate([fwd, bwd], axis=1)
    assert np.abs(out - want).max() <= 1e-10


def test_directional_symmetry():
    # swapping the two directions' parameters and reversing the tokens
    # yields the row-reversed output with its halves swapped
    rng = np.random.default_rng(7)
    n, d, h = 4, 3, 4
    params = BiLstmParams.init(rng, d, h)
    swapped = BiLstmParams(d, h, params.backward, params.forward)
    x = rng.uniform(-1, 1, size=(n, d))
    out = bilstm_forward(ad.constant(x), params).data
    out_swapped = bilstm_forward(ad.constant(x[::-1].copy()), swapped).data
    recovered = np.concatenate([out_swapped[::-1, h:], out_swapped[::-1, :h]], axis=1)
    np.testing.assert_allclose(out, recovered, atol=1e-12)


def test_lstm_gradients_match_finite_differences(rng):
    from conftest import check_gradients

    n, d, h = 3, 3, 2
    params = BiLstmParams.init(rng, d, h)
    x = ad.constant(rng.uniform(-1, 1, size=(n, d)))
    w = ad.constant(rng.uniform(-1, 1, size=(n, 2 * h)))
    check_gradients(
        lambda: ad.tsum(ad.mul(bilstm_forward(x, params), w)),
        params.named_params(),
        rtol=1e-6,
    )


# ---------------------------------------------------------------- encoder


def make_trainable_encoder(dropout=0.0):
    rng = np.random.default_rng(5)
    doc = AnnotatedDocument("d", [("one", "two", "three")])
    table = EmbeddingTable.from_corpus([doc], 6, rng)
    lstm = BiLstmParams.init(rng, 6, 4)
    return SentenceEncoder("trainable_lstm", table=table, lstm=lstm, dropout=dropout), doc


def test_trainable_encoder_shapes():
    enc, doc = make_trainable_encoder()
    out = enc.encode(doc.sentences[0])
    assert out.data.shape == (3, 8)
    assert enc.output_dim == 8


def test_precomputed_mode_returns_file_matrix(tmp_path):
    mat = np.arange(12, dtype=np.float32).reshape(3, 4)
    path = str(tmp_path / "e.jemb")
    write_jemb(path, 4, {"d": [mat]})
    enc = SentenceEncoder("precomputed", precomputed=load_precomputed(path), dropout=0.0)
    out = enc.encode(("a", "b", "c"), doc_id="d", sent_index=0)
    np.testing.assert_array_equal(out.data, mat.astype(np.float64))
    assert enc.named_params() == {}


def test_precomputed_plus_lstm(tmp_path):
    rng = np.random.default_rng(1)
    mat = rng.normal(size=(2, 4)).astype(np.float32)
    path = str(tmp_path / "e.jemb")
    write_jemb(path, 4, {"d": [mat]})
    lstm = BiLstmParams.init(rng, 4, 3)
    enc = SentenceEncoder("precomputed+lstm", precomputed=load_precomputed(path), lstm=lstm, dropout=0.0)
    out = enc.encode(("a", "b"), doc_id="d", sent_index=0)
    assert out.data.shape == (2, 6)
    assert set(enc.named_params()) == set(lstm.named_params())


def test_frozen_embeddings_excluded_from_params():
    enc, _ = make_trainable_encoder()
    assert "embeddings" in enc.named_params()
    enc.freeze_embeddings = True
    assert "embeddings" not in enc.named_params()
