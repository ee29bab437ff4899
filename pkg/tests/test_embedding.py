import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsru import tensor as T
from fsru.embedding import (EmbeddingParams, ImageSample, TextSample, embed_image, embed_patches,
                            embed_text, embed_text_ids, sinusoidal_positions)
from fsru.tensor import gradcheck


def pe_oracle(pos, d):
    row = []
    for c in range(d):
        angle = pos / 10000 ** ((c - c % 2) / d)
        row.append(math.sin(angle) if c % 2 == 0 else math.cos(angle))
    return np.array(row)


@pytest.fixture
def params(rng):
    return EmbeddingParams.init(rng, vocab_size=10, patch_dim=4, d=6)


class TestText:
    def test_all_padding_is_zero(self, params):
        out = embed_text(TextSample([], m_max=5), params)
        np.testing.assert_array_equal(out.data, np.zeros((5, 6)))

    def test_single_token_at_origin(self, params):
        out = embed_text(TextSample([0], m_max=3), params).data
        np.testing.assert_array_equal(sinusoidal_positions(1, 6)[0], [0, 1, 0, 1, 0, 1])
        np.testing.assert_allclose(out[0], params.word_table.data[0] + [0, 1, 0, 1, 0, 1])
        np.testing.assert_array_equal(out[1:], 0)

    def test_swapped_positions_differ_by_positional_code(self, params):
        a = embed_text(TextSample([3, 7], m_max=2), params).data
        b = embed_text(TextSample([7, 3], m_max=2), params).data
        delta = pe_oracle(0, 6) - pe_oracle(1, 6)
        np.testing.assert_allclose(a[0] - b[1], delta, atol=1e-12)
        np.testing.assert_allclose(a[1] - b[0], -delta, atol=1e-12)

    def test_positional_table_matches_oracle(self):
        table = sinusoidal_positions(7, 8)
        for pos in range(7):
            np.testing.assert_allclose(table[pos], pe_oracle(pos, 8), atol=1e-12)

    def test_unknown_token(self, params):
        with pytest.raises(ValueError, match="unknown token"):
            embed_text(TextSample([10], m_max=3), params)

    def test_too_long(self):
        with pytest.raises(ValueError):
            TextSample([1, 2, 3], m_max=2)

    def test_padding_ignores_token_values(self, params):
        ids = np.array([[1, 99, 99]])
        out = embed_text_ids(ids, np.array([[1.0, 0.0, 0.0]]), params).data
        np.testing.assert_array_equal(out[0, 1:], 0)

    def test_batched_matches_single(self, params):
        ids = np.array([[1, 2, 3], [4, 5, 0]])
        mask = np.array([[1.0, 1, 1], [1, 1, 0]])
        batch = embed_text_ids(ids, mask, params).data
        np.testing.assert_allclose(batch[1], embed_text(TextSample([4, 5], 3), params).data)


@given(st.permutations(list(range(5))))
def test_permutation_changes_rows_only_through_positions(perm):
    params = EmbeddingParams.init(np.random.default_rng(0), 10, 4, 6)
    ids = [2, 5, 1, 9, 4]
    base = embed_text(TextSample(ids, 5), params).data
    moved = embed_text(TextSample([ids[p] for p in perm], 5), params).data
    pe = sinusoidal_positions(5, 6)
    for new_pos, old_pos in enumerate(perm):
        np.testing.assert_allclose(moved[new_pos] - pe[new_pos], base[old_pos] - pe[old_pos],
                                   atol=1e-12)


class TestImage:
    def test_zero_image(self, params):
        out = embed_image(ImageSample(np.zeros((6, 4)), 2, 3), params)
        np.testing.assert_array_equal(out.data, np.zeros((6, 6)))

    def test_one_hot_patch_spreads_to_three_rows(self):
        d = 4
        params = EmbeddingParams.init(np.random.default_rng(0), 3, d, d)
        params.patch_proj.data = np.eye(d)
        params.conv_kernel.data = np.abs(params.conv_kernel.data) + 0.1
        patches = np.zeros((8, d))
        patches[5, 0] = 1.0
        out = embed_patches(patches, params).data
        nonzero = sorted(np.flatnonzero(np.abs(out).sum(axis=1) > 0))
        assert nonzero == [4, 5, 6]

    def test_matches_dot_product_oracle(self, rng, params):
        patches = rng.uniform(size=(6, 4))
        params.conv_bias.data = rng.normal(size=6)
        out = embed_patches(patches, params).data
        proj = params.patch_proj.data
        K, b = params.conv_kernel.data, params.conv_bias.data
        n = patches.shape[0]
        for i in range(n):
            for c in range(6):
                acc = b[c]
                for tap, src in enumerate((i - 1, i, i + 1)):
                    row = patches[src % n] @ proj
                    acc += sum(row[j] * K[tap, j, c] for j in range(6))
                assert out[i, c] == pytest.approx(max(acc, 0.0), abs=1e-12)

    def test_wrong_patch_length(self, params):
        with pytest.raises(ValueError, match="patch vectors"):
            embed_patches(np.zeros((6, 5)), params)

    def test_grid_must_match(self):
        with pytest.raises(ValueError, match="grid"):
            ImageSample(np.zeros((5, 4)), 2, 3)

    def test_non_finite_pixels(self):
        bad = np.zeros((6, 4))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ImageSample(bad, 2, 3)


def test_embedding_gradients(rng, params):
    ids = np.array([[1, 2, 3, 0], [4, 4, 9, 1]])
    mask = np.array([[1.0, 1, 1, 0], [1, 1, 1, 1]])
    patches = rng.uniform(size=(2, 6, 4))
    params.conv_bias.data = rng.normal(size=6) * 0.1
    w_t, w_v = rng.normal(size=(2, 4, 6)), rng.normal(size=(2, 6, 6))

    def loss():
        a = T.sum_(T.mul(embed_text_ids(ids, mask, params), w_t))
        return T.add(a, T.sum_(T.mul(embed_patches(patches, params), w_v)))

    for r in gradcheck(loss, params.named()):
        assert r.passed, r
