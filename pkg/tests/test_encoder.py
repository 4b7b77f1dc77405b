import numpy as np
import pytest

from opsrag.encoder import (
    EncoderModel,
    Featurizer,
    RemoteEncoder,
    embed,
    encode_texts,
    featurize,
    load_model,
    normalize_text,
    save_model,
    similarity,
)
from opsrag.errors import BackendUnavailable, CorruptFile, EmptyInput


@pytest.fixture(scope="module")
def model():
    return EncoderModel.initialize(hash_dims=1 << 12, embed_dim=48, seed=5)


class TestEmbed:
    def test_repeated_calls_identical(self, model):
        a = embed(model, "rotate the signing keys quarterly")
        b = embed(model, "rotate the signing keys quarterly")
        assert np.array_equal(a, b)

    def test_unit_norm(self, model):
        for text in ("a", "short", "a much longer sentence about failover drills"):
            assert abs(np.linalg.norm(embed(model, text)) - 1.0) < 1e-6

    def test_empty_after_normalization_rejected(self, model):
        with pytest.raises(EmptyInput):
            embed(model, "   \n\t ")

    def test_whitespace_normalization(self, model):
        assert np.array_equal(embed(model, "a  b\n c"), embed(model, "a b c"))

    def test_disjoint_buckets_orthogonal_under_identity_projection(self):
        # With an identity projection the embedding is the normalized feature
        # vector itself, so texts hashing to disjoint buckets are orthogonal.
        dims = 1 << 10
        m = EncoderModel(
            hash_dims=dims,
            ngram_range=(3, 5),
            embed_dim=dims,
            temperature=0.05,
            projection=np.eye(dims, dtype=np.float32),
        )
        t1, t2 = "alpha bravo", "zulu xray"
        idx1, _ = featurize(t1, m.ngram_range, dims)
        idx2, _ = featurize(t2, m.ngram_range, dims)
        assert not set(idx1.tolist()) & set(idx2.tolist()), "fixture texts must not collide"
        assert abs(similarity(embed(m, t1), embed(m, t2))) < 1e-12

    def test_scale_invariance_of_features(self, model):
        # Multiplying raw counts by any positive constant cannot change the
        # embedding: normalization absorbs scale at both stages.
        idx, val = featurize("canary rollout", model.ngram_range, model.hash_dims)
        raw = model.projection[:, idx].astype(np.float64) @ val
        scaled = model.projection[:, idx].astype(np.float64) @ (val * 37.0)
        np.testing.assert_allclose(
            raw / np.linalg.norm(raw), scaled / np.linalg.norm(scaled), atol=1e-12
        )

    def test_encode_texts_matches_embed(self, model):
        texts = ["first text", "second text", "third text"]
        batch = encode_texts(model, texts)
        for i, t in enumerate(texts):
            assert np.array_equal(batch[i], embed(model, t))


class TestSimilarity:
    def test_self_similarity_is_one(self, model):
        u = embed(model, "identical")
        assert similarity(u, u) == pytest.approx(1.0, abs=1e-9)

    def test_antipodal_is_minus_one(self, model):
        u = embed(model, "anything")
        assert similarity(u, -u) == pytest.approx(-1.0, abs=1e-9)

    def test_bounded_and_symmetric(self, model):
        rng = np.random.default_rng(0)
        for _ in range(100):
            u = rng.standard_normal(8)
            v = rng.standard_normal(8)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            assert abs(similarity(u, v)) <= 1 + 1e-9
            assert similarity(u, v) == pytest.approx(similarity(v, u))


class TestFeaturizer:
    def test_cache_returns_same_objects(self, model):
        f = Featurizer.for_model(model)
        a = f.features("cached text")
        b = f.features("cached text")
        assert a[0] is b[0] and a[1] is b[1]

    def test_normalize_text(self):
        assert normalize_text("  a \n b\t c  ") == "a b c"


class TestPersistence:
    def test_save_load_round_trip_bit_exact(self, model, tmp_path):
        path = tmp_path / "enc.rgem"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.hash_dims == model.hash_dims
        assert loaded.ngram_range == model.ngram_range
        assert loaded.embed_dim == model.embed_dim
        assert loaded.temperature == pytest.approx(model.temperature)
        assert np.array_equal(loaded.projection, model.projection)
        # a second save writes the identical byte stream
        path2 = tmp_path / "enc2.rgem"
        save_model(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_embeddings_survive_round_trip(self, model, tmp_path):
        path = tmp_path / "enc.rgem"
        save_model(model, path)
        loaded = load_model(path)
        text = "identical embeddings after reload"
        assert np.array_equal(embed(model, text), embed(loaded, text))

    def test_truncated_file_rejected(self, model, tmp_path):
        path = tmp_path / "enc.rgem"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(CorruptFile):
            load_model(path)

    def test_bad_magic_rejected(self, model, tmp_path):
        path = tmp_path / "enc.rgem"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptFile):
            load_model(path)


class TestRemoteEncoder:
    def test_embeds_via_http(self, chat_server):
        def reply(payload):
            vecs = [[float(len(t)), 1.0, 0.0] for t in payload["input"]]
            return 200, {"data": [{"embedding": v} for v in vecs]}

        chat_server.reply_fn = reply
        port = chat_server.server_address[1]
        enc = RemoteEncoder(url=f"http://127.0.0.1:{port}/embed", model="m")
        out = enc.embed_many(["abc", "defgh"])
        assert out.shape == (2, 3)
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0)

    def test_malformed_response_raises(self, chat_server):
        chat_server.reply_fn = lambda payload: (200, {"nope": []})
        port = chat_server.server_address[1]
        enc = RemoteEncoder(url=f"http://127.0.0.1:{port}/embed", model="m")
        with pytest.raises(BackendUnavailable):
            enc.embed("text")

    def test_http_error_raises(self, chat_server):
        chat_server.reply_fn = lambda payload: (500, {"error": "boom"})
        port = chat_server.server_address[1]
        enc = RemoteEncoder(url=f"http://127.0.0.1:{port}/embed", model="m")
        with pytest.raises(BackendUnavailable):
            enc.embed("text")
