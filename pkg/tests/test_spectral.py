import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsru import tensor as T
from fsru.fft import fft_array
from fsru.spectral import (SpectralBlockParams, SpectrumPair, cosine_weights, csc,
                           effective_filter, sparsity, spectral_block, spectral_stages, spectrum,
                           spectrum_dump, usc)
from fsru.tensor import ComplexTensor, Tensor, gradcheck


def loop_dft(x):
    L = x.shape[0]
    return np.array([[sum(x[i, c] * np.exp(-2j * np.pi * k * i / L) for i in range(L))
                      for c in range(x.shape[1])] for k in range(L)])


def make_params(rng, m=8, n=4, d=3, k=2, **kw):
    return SpectralBlockParams.init(rng, k, m, n, d, **kw)


class TestSpectrum:
    def test_constant_rows_only_dc(self):
        X = spectrum(Tensor(np.full((8, 2), 3.0))).numpy()
        np.testing.assert_allclose(X[0], [24, 24])
        assert np.max(np.abs(X[1:])) < 1e-12

    def test_single_tone(self):
        L = 16
        x = np.zeros((L, 2))
        x[:, 1] = np.cos(2 * np.pi * 2 * np.arange(L) / L)
        X = spectrum(Tensor(x)).numpy()[:, 1]
        hot = np.flatnonzero(np.abs(X) > 1e-9)
        assert list(hot) == [2, L - 2]

    def test_random_matches_loop_oracle(self, rng):
        x = rng.normal(size=(8, 3))
        assert np.max(np.abs(spectrum(Tensor(x)).numpy() - loop_dft(x))) < 1e-9


class TestUSC:
    def test_k1_is_zero(self, rng):
        X = ComplexTensor.from_numpy(rng.normal(size=(4, 2)) + 1j)
        bank = Tensor(rng.normal(size=(1, 4, 2)))
        np.testing.assert_array_equal(usc(X, bank).data, np.zeros((4, 2)))

    def test_k2_reduction(self, rng):
        Z = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        bank = rng.normal(size=(2, 4, 2))
        got = usc(ComplexTensor.from_numpy(Z), Tensor(bank)).data
        expected = math.sqrt(2) / (2 * 4) * np.abs(Z) ** 2 * (bank[0] - bank[1])
        np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_all_ones_bank_k4_cancels(self, rng):
        brute = sum(math.cos((2 * i - 1) * math.pi / 8) for i in range(1, 5))
        assert abs(brute) < 1e-12
        X = ComplexTensor.from_numpy(rng.normal(size=(8, 3)) * 5)
        np.testing.assert_array_equal(usc(X, Tensor(np.ones((4, 8, 3)))).data, 0.0)

    def test_pass_through_without_bank(self, rng):
        Z = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        np.testing.assert_allclose(usc(ComplexTensor.from_numpy(Z), None).data, np.abs(Z) ** 2 / 4)

    def test_empty_bank(self):
        with pytest.raises(ValueError, match="empty filter bank"):
            cosine_weights(0)
        with pytest.raises(ValueError, match="empty filter bank"):
            usc(ComplexTensor.from_numpy(np.ones((4, 2))), Tensor(np.zeros((0, 4, 2))))
        with pytest.raises(ValueError, match="empty filter bank"):
            SpectralBlockParams.init(np.random.default_rng(0), 0, 4, 4, 2)

    def test_bank_shape_must_match(self):
        with pytest.raises(T.ShapeError):
            usc(ComplexTensor.from_numpy(np.ones((4, 2))), Tensor(np.ones((2, 4, 3))))

    def test_init_starts_near_identity(self, rng):
        for k in (2, 4, 8):
            p = make_params(rng, k=k)
            np.testing.assert_allclose(effective_filter(p.bank_t).data, 1.0, atol=0.1)


@given(st.integers(1, 64))
def test_cosine_weight_identity(k):
    w = cosine_weights(k)
    assert abs(w.sum()) <= 1e-12
    ref = [math.cos((2 * i - 1) * math.pi / (2 * k)) for i in range(1, k + 1)]
    np.testing.assert_allclose(w, ref, atol=1e-15)


@given(st.integers(1, 16), st.floats(-3, 3))
def test_all_equal_bank_cancels_exactly(k, value):
    X = ComplexTensor.from_numpy(np.arange(8.0).reshape(4, 2) + 1j)
    assert np.all(usc(X, Tensor(np.full((k, 4, 2), value))).data == 0.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_phase_invariance(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(8, 3)))
    bank = Tensor(rng.normal(size=(2, 8, 3)))
    a = usc(ComplexTensor.from_numpy(Z), bank).data
    b = usc(ComplexTensor.from_numpy(Z * phase), bank).data
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_power_spectrum_symmetric(seed):
    x = np.random.default_rng(seed).normal(size=(8, 2))
    P = T.abs_sq(spectrum(Tensor(x))).data
    for k in range(1, 8):
        np.testing.assert_allclose(P[k], P[8 - k], rtol=1e-10, atol=1e-12)


class TestCSC:
    def test_zero_theta_gives_bias(self, rng):
        p = make_params(rng)
        p.theta_v.data[:] = 0.0
        p.conv_t_b.data = rng.normal(size=3)
        pair = SpectrumPair(Tensor(rng.normal(size=(8, 3))), Tensor(rng.normal(size=(4, 3))))
        out = csc(pair, p)
        np.testing.assert_allclose(out.text.data, pair.text.data * p.conv_t_b.data)

    def test_constant_other_modality(self, rng):
        p = make_params(rng)
        p.theta_v.data[:] = 1.0
        c = np.array([2.0, -1.0, 0.5])
        pair = SpectrumPair(Tensor(rng.normal(size=(8, 3))), Tensor(np.tile(c, (4, 1))))
        np.testing.assert_allclose(csc(pair, p).text.data, c * pair.text.data)

    def test_loop_oracle(self, rng):
        p = make_params(rng, full_conv=True)
        for t in p.named().values():
            t.data = rng.normal(size=t.shape)
        Xt, Xv = rng.normal(size=(8, 3)), rng.normal(size=(4, 3))
        out = csc(SpectrumPair(Tensor(Xt), Tensor(Xv)), p)
        for X_self, X_other, theta, W, b, got in (
                (Xt, Xv, p.theta_v.data, p.conv_t_w.data, p.conv_t_b.data, out.text.data),
                (Xv, Xt, p.theta_t.data, p.conv_v_w.data, p.conv_v_b.data, out.image.data)):
            L, d = X_other.shape
            pooled = [sum(X_other[i, c] * theta[i, c] for i in range(L)) / L for c in range(d)]
            filt = [b[e] + sum(pooled[c] * W[c, e] for c in range(d)) for e in range(d)]
            for i in range(X_self.shape[0]):
                for e in range(d):
                    assert got[i, e] == pytest.approx(X_self[i, e] * filt[e], abs=1e-12)

    def test_identity_when_ablated(self, rng):
        p = make_params(rng, use_csc=False)
        pair = SpectrumPair(Tensor(rng.normal(size=(8, 3))), Tensor(rng.normal(size=(4, 3))))
        assert csc(pair, p) is pair


@given(st.integers(0, 2 ** 32 - 1))
def test_other_modality_enters_only_through_its_token_mean(seed):
    rng = np.random.default_rng(seed)
    p = make_params(rng)
    p.theta_v.data[:] = 1.0
    Xt, Xv = rng.normal(size=(8, 3)), rng.normal(size=(4, 3))
    delta = rng.normal(size=(4, 3))
    delta -= delta.mean(axis=0)
    a = csc(SpectrumPair(Tensor(Xt), Tensor(Xv)), p).text.data
    b = csc(SpectrumPair(Tensor(Xt), Tensor(Xv + delta)), p).text.data
    np.testing.assert_allclose(a, b, atol=1e-12)


class TestBlock:
    def test_zero_in_zero_out(self, rng):
        y_t, y_v = spectral_block(np.zeros((8, 3)), np.zeros((4, 3)), make_params(rng))
        assert np.all(y_t.data == 0) and np.all(y_v.data == 0)

    def test_shapes_preserved_with_batch(self, rng):
        y_t, y_v = spectral_block(rng.normal(size=(2, 8, 3)), rng.normal(size=(2, 4, 3)),
                                  make_params(rng))
        assert y_t.shape == (2, 8, 3) and y_v.shape == (2, 4, 3)

    def test_single_tone_stays_in_its_bins(self, rng):
        L = 8
        x_t = np.zeros((L, 3))
        x_t[:, 0] = np.cos(2 * np.pi * 3 * np.arange(L) / L)
        stages = spectral_stages(x_t, rng.normal(size=(4, 3)), make_params(rng))
        comp = stages["usc"].text.data[:, 0]
        assert list(np.flatnonzero(np.abs(comp) > 1e-9)) == [3, L - 3]
        out = np.abs(fft_array(stages["out"].text.data[:, :1], axis=0)[:, 0])
        assert list(np.flatnonzero(out > 1e-9)) == [3, L - 3]

    def test_real_part_kept(self, rng):
        stages = spectral_stages(rng.normal(size=(8, 3)), rng.normal(size=(4, 3)),
                                 make_params(rng))
        back = np.fft.ifft(stages["csc"].text.data, axis=0)
        np.testing.assert_allclose(stages["out"].text.data, back.real, atol=1e-12)

    def test_symmetric_filters_leave_no_imaginary_part(self, rng):
        p = make_params(rng)
        for bank in (p.bank_t, p.bank_v):
            bank.data = 0.5 * (bank.data + np.roll(bank.data[:, ::-1], 1, axis=1))
        stages = spectral_stages(rng.normal(size=(8, 3)), rng.normal(size=(4, 3)), p)
        back = np.fft.ifft(stages["csc"].text.data, axis=0)
        assert np.max(np.abs(back.imag)) < 1e-12

    @pytest.mark.parametrize("variant", [{}, {"use_usc": False}, {"use_csc": False},
                                         {"full_conv": True}, {"k": 4}])
    def test_block_gradients(self, rng, variant):
        k = variant.pop("k", 2)
        p = make_params(rng, m=4, n=4, d=2, k=k, **variant)
        x_t = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        x_v = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        w_t, w_v = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))

        def loss():
            y_t, y_v = spectral_block(x_t, x_v, p)
            return T.add(T.sum_(T.mul(y_t, w_t)), T.sum_(T.mul(y_v, w_v)))

        params = dict(p.named(), x_t=x_t, x_v=x_v)
        for r in gradcheck(loss, params):
            assert r.passed, r


def test_sparsity_diagnostic():
    assert sparsity(np.array([1.0, 0.0, 0.001, 0.5])) == 0.5
    assert sparsity(np.zeros(4)) == 0.0


def test_spectrum_dump(rng):
    text = spectrum_dump(rng.normal(size=(4, 2)), rng.normal(size=(2, 2)),
                         make_params(rng, m=4, n=2, d=2))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["modality", "stage", "token_bin", "channel", "value"]
    assert {r["stage"] for r in rows} == {"raw", "usc", "csc"}
    assert len(rows) == 3 * (4 * 2 + 2 * 2)
