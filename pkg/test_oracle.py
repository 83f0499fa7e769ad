"""
Тесты медленных эталонов.

Эталоны сверяются с замкнутыми формулами и между собой; сравнение
с быстрыми реализациями - на общих случайных входах.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.modules.afc_types import ConfigError
from app.modules.layers import PolyActivation, alias_free_poly
from app.modules.oracle import (
    naive_dft,
    naive_idft,
    oracle_alias_free_poly,
    oracle_shift,
    reference_lowpass_mask,
    reference_upsample_mask,
    sinc_reconstruct
)
from app.modules.spectral import dft, fractional_shift_1d, ideal_lpf_1d, lowpass_mask, upsample_mask


def test_naive_dft_examples():
    assert_allclose(naive_dft([1, 0, 0, 0]), [1, 1, 1, 1], atol=1e-12)
    assert_allclose(naive_dft([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-12)


def test_naive_dft_matches_fft():
    x = np.random.default_rng(0).standard_normal(16)
    assert np.max(np.abs(naive_dft(x) - dft(x))) < 1e-10
    assert_allclose(naive_idft(naive_dft(x)).real, x, atol=1e-12)


def test_reference_masks_match_spectral():
    """Маски, записанные через модуль частоты, совпадают с основными."""
    for n in (2, 3, 4, 5, 8, 15, 16):
        for cutoff in (1.0, 0.5, 0.25):
            assert reference_lowpass_mask(n, cutoff).tolist() == lowpass_mask(n, cutoff).tolist()
        for factor in (2, 3):
            assert reference_upsample_mask(n, factor).tolist() == upsample_mask(n, factor).tolist()


def test_sinc_reconstruct_examples():
    """Константа и косинус в промежуточных точках."""
    assert sinc_reconstruct(np.full(6, 2.5), 0.37) == pytest.approx(2.5, abs=1e-12)
    n = 8
    x = np.cos(2 * np.pi * np.arange(n) / n)
    assert sinc_reconstruct(x, 0.5) == pytest.approx(np.cos(2 * np.pi * 0.5 / n), abs=1e-12)
    assert_allclose(sinc_reconstruct(x, np.arange(n)), x, atol=1e-12)


def test_oracle_shift_examples():
    x = np.random.default_rng(1).standard_normal(8)
    assert_allclose(oracle_shift(x, 0), x, atol=1e-12)
    assert_allclose(oracle_shift(x, 1), np.roll(x, 1), atol=1e-12)


def test_oracle_shift_round_trip_and_agreement():
    """Сдвиг на Δ и -Δ - тождество; совпадение с fractional_shift_1d."""
    rng = np.random.default_rng(2)
    for n in (4, 5, 16):
        x = ideal_lpf_1d(rng.standard_normal(n), 1)
        assert np.max(np.abs(oracle_shift(oracle_shift(x, 0.3), -0.3) - x)) < 1e-9
        assert np.max(np.abs(oracle_shift(x, 2 / 3) - fractional_shift_1d(x, 2, 3))) < 1e-9


def test_oracle_poly_identity_and_constant():
    """Тождественный полином и постоянный вход."""
    x = ideal_lpf_1d(np.random.default_rng(3).standard_normal(16), 1)
    identity = PolyActivation.uniform((0.0, 1.0, 0.0), 1, scale=1.0)
    assert np.max(np.abs(oracle_alias_free_poly(x, identity) - x)) < 1e-9

    poly = PolyActivation.uniform((0.5, -1.0, 2.0), 1, scale=1.0)
    assert_allclose(oracle_alias_free_poly(np.full(8, 3.0), poly), np.full(8, 0.5 - 3.0 + 18.0), atol=1e-9)


@pytest.mark.parametrize('scale', [1.0, 7.0])
def test_oracle_poly_matches_alias_free_poly(scale):
    rng = np.random.default_rng(int(scale))
    for _ in range(5):
        x = rng.standard_normal((1, 16, 16))
        poly = PolyActivation(rng.standard_normal((1, 3)), scale)
        assert np.max(np.abs(oracle_alias_free_poly(x, poly) - alias_free_poly(x, poly))) < 1e-8


def test_oracle_poly_saturates_in_oversampling():
    """Рост F с 8 до 32 не меняет результат."""
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 8, 8))
    poly = PolyActivation(rng.standard_normal((2, 3)), 1.0)
    coarse = oracle_alias_free_poly(x, poly, factor=8)
    fine = oracle_alias_free_poly(x, poly, factor=32)
    assert np.max(np.abs(coarse - fine)) < 1e-9


@pytest.mark.parametrize('factor', [4, 7])
def test_oracle_poly_rejects_factor(factor):
    poly = PolyActivation.uniform((0.0, 1.0, 0.0), 1)
    with pytest.raises(ConfigError):
        oracle_alias_free_poly(np.ones(8), poly, factor=factor)
