"""
Медленные независимые эталоны для проверки spectral и layers.

Эталоны не используют код модуля spectral: ДПФ считается прямым
суммированием, восстановление непрерывного сигнала - замкнутой формулой
тригонометрической интерполяции (периодический sinc, ядро Дирихле).
"""

import logging
from functools import lru_cache
from typing import Union

import numpy as np

from .afc_types import ConfigError, DomainError, ShapeError
from .types import ComplexArray, FloatArray, Signal1D, Tensor3D


logger = logging.getLogger(__name__)

DEFAULT_OVERSAMPLING = 16


@lru_cache(maxsize=64)
def _dft_matrix(n: int, inverse: bool) -> ComplexArray:
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    matrix = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    if inverse:
        matrix /= n
    matrix.setflags(write=False)
    return matrix


def naive_dft(x: ComplexArray) -> ComplexArray:
    """
    ДПФ прямым суммированием, O(N^2).

    Args:
        x: Вектор длины N >= 1

    Returns:
        X[k] = sum_n x[n] exp(-2j*pi*k*n/N)
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size < 1:
        raise ShapeError(f"Ожидался непустой вектор, получена форма {x.shape}")
    return _dft_matrix(x.size, False) @ x


def naive_idft(spectrum: ComplexArray) -> ComplexArray:
    """Обратное ДПФ прямым суммированием, с множителем 1/N."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if spectrum.ndim != 1 or spectrum.size < 1:
        raise ShapeError(f"Ожидался непустой вектор, получена форма {spectrum.shape}")
    return _dft_matrix(spectrum.size, True) @ spectrum


def naive_circular_convolve(x: FloatArray, h: FloatArray) -> FloatArray:
    """Циклическая свёртка прямым суммированием: y[n] = sum_m h[m] x[n - m]."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = x.size
    index = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return x[index] @ h


def reference_lowpass_mask(n: int, cutoff: float) -> FloatArray:
    """
    Маска ФНЧ по модулю частоты бина.

    Бин k соответствует частоте f = min(k, N - k); он проходит, если
    f < N*c/2. Это та же маска, что и в spectral, но записанная через
    симметричную частоту.
    """
    k = np.arange(n)
    freq = np.minimum(k, n - k)
    return (freq < n * cutoff / 2 - 1e-12).astype(np.float64)


def reference_upsample_mask(n: int, factor: int) -> FloatArray:
    """
    Восстанавливающая маска по модулю частоты бина частой сетки.

    Частоты |f| < N/2 проходят, частота ровно N/2 (только для чётного N)
    получает вес 1/2.
    """
    if factor < 2:
        raise DomainError(f"Коэффициент должен быть >= 2, получено {factor}")
    k = np.arange(n * factor)
    freq = np.minimum(k, n * factor - k)
    mask = (2 * freq < n).astype(np.float64)
    mask[2 * freq == n] = 0.5
    return mask


def naive_lpf(x: Signal1D, cutoff: float) -> Signal1D:
    """Идеальный ФНЧ через прямое ДПФ."""
    x = np.asarray(x, dtype=np.float64)
    return naive_idft(naive_dft(x) * reference_lowpass_mask(x.size, cutoff)).real


def naive_downsample(x: Signal1D, factor: int) -> Signal1D:
    """Downsample через прямое ДПФ: ФНЧ 1/s и каждый s-й отсчёт."""
    return naive_lpf(x, 1.0 / factor)[::factor]


def _interpolation_terms(n: int, t: FloatArray) -> ComplexArray:
    """
    Матрица базисных гармоник интерполянта размера (len(t), N).

    Строка j содержит множители при X[k], дающие z(t_j) с учётом
    симметричного диапазона частот; член Найквиста - косинус.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    k = np.arange(n)
    freq = np.where(k <= n // 2, k, k - n).astype(np.float64)
    terms = np.exp(2j * np.pi * np.outer(t, freq) / n)
    if n % 2 == 0:
        terms[:, n // 2] = np.cos(np.pi * t)
    return terms / n


def sinc_reconstruct(x: Signal1D, t: Union[float, FloatArray]) -> Union[float, FloatArray]:
    """
    Значение периодического интерполянта в непрерывной точке t.

    Интерполянт - единственный тригонометрический полином с частотами
    |k| <= N/2, проходящий через отсчёты; компонента Найквиста считается
    чистым косинусом.

    Args:
        x: Один период сигнала
        t: Позиция (в отсчётах), скаляр или массив

    Returns:
        z(t) той же формы, что и t
    """
    x = np.asarray(x, dtype=np.float64)
    spectrum = naive_dft(x)
    values = (_interpolation_terms(x.size, t) @ spectrum).real
    if np.ndim(t) == 0:
        return float(values[0])
    return values.reshape(np.shape(t))


def oracle_shift(x: Signal1D, delta: float) -> Signal1D:
    """
    Дробный сдвиг по определению: out[n] = z(n - Δ).

    Args:
        x: Один период сигнала
        delta: Сдвиг в отсчётах (вещественный)
    """
    x = np.asarray(x, dtype=np.float64)
    return sinc_reconstruct(x, np.arange(x.size) - float(delta))


@lru_cache(maxsize=64)
def _dense_operators(n: int, factor: int):
    """
    Операторы перехода на частую сетку и обратно.

    Возвращает (E, P): E размера (F*N, N) вычисляет интерполянт на частой
    сетке, P размера (N, F*N) оставляет полосу |k| < N/2 исходной сетки
    и берёт каждый F-й отсчёт.
    """
    fine = n * factor
    dense = np.arange(fine) / factor
    expand = (_interpolation_terms(n, dense) @ _dft_matrix(n, False)).real
    band = reference_lowpass_mask(fine, 1.0 / factor)
    project = (_dft_matrix(fine, True) * band[None, :]) @ _dft_matrix(fine, False)
    project = project.real[::factor]
    expand.setflags(write=False)
    project.setflags(write=False)
    return expand, project


def _poly_values(y: FloatArray, coeffs: FloatArray, scale: float) -> FloatArray:
    a0, a1, a2 = coeffs
    scaled = scale * y
    return scale * (a0 + a1 * scaled + a2 * scaled * scaled)


def oracle_alias_free_poly(
    x: Union[Signal1D, Tensor3D],
    poly,
    factor: int = DEFAULT_OVERSAMPLING
) -> Union[Signal1D, Tensor3D]:
    """
    Эталон alias-free полиномиальной активации через частую сетку.

    Непрерывная область моделируется сеткой, в factor раз более частой:
    интерполянт вычисляется на ней, к нему поточечно применяется полином,
    затем остаётся полоса |k| < N/2 исходной сетки и берутся исходные
    точки. Для тензора (C, H, W) интерполяция и проекция выполняются по
    обеим осям, полином - поточечно в 2D.

    Args:
        x: Сигнал (N,) или карта признаков (C, H, W)
        poly: PolyActivation; для одномерного сигнала берётся канал 0
        factor: Коэффициент передискретизации F

    Returns:
        Результат той же формы, что и x

    Raises:
        ConfigError: Если F нечётный или меньше 2(d+1)
    """
    minimum = 2 * (poly.degree + 1)
    if factor < minimum or factor % poly.upsample_factor:
        raise ConfigError(
            f"Коэффициент передискретизации {factor} должен быть кратен "
            f"{poly.upsample_factor} и не меньше {minimum}",
            key='factor'
        )
    x = np.asarray(x, dtype=np.float64)
    coeffs = np.asarray(poly.coefficients, dtype=np.float64)
    if x.ndim == 1:
        expand, project = _dense_operators(x.size, factor)
        return project @ _poly_values(expand @ x, coeffs[0], poly.scale)
    if x.ndim != 3:
        raise ShapeError(f"Ожидалась форма (N,) или (C, H, W), получена {x.shape}")
    if coeffs.shape[0] != x.shape[0]:
        raise ShapeError(f"Коэффициентов {coeffs.shape[0]}, каналов {x.shape[0]}")
    expand_h, project_h = _dense_operators(x.shape[1], factor)
    expand_w, project_w = _dense_operators(x.shape[2], factor)
    result = np.empty_like(x)
    for channel in range(x.shape[0]):
        dense = expand_h @ x[channel] @ expand_w.T
        activated = _poly_values(dense, coeffs[channel], poly.scale)
        result[channel] = project_h @ activated @ project_w.T
    logger.debug("Эталон активации: форма %s, F=%d", x.shape, factor)
    return result
