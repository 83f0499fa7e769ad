"""
Модуль точной передискретизации периодических сигналов в домене ДПФ.

Этот модуль предоставляет идеальный ФНЧ, целочисленные upsample/downsample
и дробные циклические сдвиги для одномерных сигналов и, раздельно по
строкам и столбцам, для карт признаков (C, H, W).

Соглашения:
    - прямое ДПФ без нормировки, обратное с множителем 1/N;
    - вся арифметика в float64;
    - сдвиг на Δ переносит содержимое вперёд: out[n] = z(n - Δ),
      как numpy.roll.
"""

from fractions import Fraction
from functools import lru_cache, partial
from typing import Tuple

import numpy as np
from scipy import fft as sp_fft

from .afc_types import DomainError, ShapeError
from .types import (
    AxisOperation,
    ComplexArray,
    DftMask,
    FloatArray,
    RationalLike,
    RationalShift,
    Signal1D,
    Tensor3D,
    as_fraction
)


def as_signal(x: FloatArray) -> Signal1D:
    """
    Проверка и приведение одномерного сигнала.

    Args:
        x: Отсчёты одного периода

    Returns:
        Массив float64 длины N >= 1

    Raises:
        ShapeError: Если массив не одномерный или пустой
        DomainError: Если есть нечисловые значения
    """
    signal = np.asarray(x, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 1:
        raise ShapeError(f"Ожидался одномерный сигнал, получена форма {signal.shape}")
    if not np.all(np.isfinite(signal)):
        raise DomainError("Сигнал содержит нечисловые значения")
    return signal


def as_tensor3d(t: FloatArray) -> Tensor3D:
    """
    Проверка и приведение карты признаков (C, H, W).

    Raises:
        ShapeError: Если форма не (C, H, W) с положительными размерами
        DomainError: Если есть нечисловые значения
    """
    tensor = np.asarray(t, dtype=np.float64)
    if tensor.ndim != 3 or min(tensor.shape) < 1:
        raise ShapeError(f"Ожидалась форма (C, H, W), получена {tensor.shape}")
    if not np.all(np.isfinite(tensor)):
        raise DomainError("Карта признаков содержит нечисловые значения")
    return tensor


def _check_factor(factor: int) -> int:
    if int(factor) != factor or factor < 2:
        raise DomainError(f"Коэффициент передискретизации должен быть целым >= 2, получено {factor}")
    return int(factor)


@lru_cache(maxsize=256)
def _lowpass_gains(n: int, cutoff: Fraction) -> Tuple[float, ...]:
    edge = Fraction(n) * cutoff / 2
    # Строгие сравнения: бин на границе N*c/2 обнуляется
    return tuple(1.0 if (k < edge or k > n - edge) else 0.0 for k in range(n))


def lowpass_mask(n: int, cutoff: RationalLike) -> DftMask:
    """
    Маска идеального ФНЧ для длины N и относительной частоты среза.

    Бин k проходит, если k < N*c/2 или k > N - N*c/2.

    Args:
        n: Длина сигнала N >= 1
        cutoff: Относительная частота среза c из (0, 1]

    Returns:
        Маска длины N со значениями 0/1

    Raises:
        ShapeError: Если N < 1
        DomainError: Если c вне (0, 1]
    """
    if n < 1:
        raise ShapeError(f"Длина сигнала должна быть >= 1, получено {n}")
    c = as_fraction(cutoff)
    if c <= 0 or c > 1:
        raise DomainError(f"Частота среза должна лежать в (0, 1], получено {c}")
    mask = np.array(_lowpass_gains(int(n), c), dtype=np.float64)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=256)
def _upsample_gains(n: int, factor: int) -> Tuple[float, ...]:
    size = n * factor
    gains = np.zeros(size, dtype=np.float64)
    half = n // 2
    if n % 2 == 0:
        gains[:half] = 1.0
        gains[size - half + 1:] = 1.0
        # Бин Найквиста делится поровну между +π/T и -π/T
        gains[half] = 0.5
        gains[size - half] = 0.5
    else:
        gains[:half + 1] = 1.0
        if half > 0:
            gains[size - half:] = 1.0
    return tuple(gains.tolist())


def upsample_mask(n: int, factor: int) -> DftMask:
    """
    Восстанавливающий фильтр для upsample в factor раз.

    Для чётного N бин Найквиста (k = N/2 и его зеркало k = N(I - 1/2))
    получает вес 1/2. Для нечётного N проходят бины |k| <= floor(N/2).

    Args:
        n: Длина исходного сигнала N >= 1
        factor: Коэффициент I >= 2

    Returns:
        Маска длины N*I

    Raises:
        DomainError: Если I < 2
    """
    factor = _check_factor(factor)
    if n < 1:
        raise ShapeError(f"Длина сигнала должна быть >= 1, получено {n}")
    mask = np.array(_upsample_gains(int(n), factor), dtype=np.float64)
    mask.setflags(write=False)
    return mask


def dft(x: FloatArray, axis: int = -1) -> ComplexArray:
    """Быстрое ДПФ без нормировки вдоль оси axis."""
    return sp_fft.fft(np.asarray(x, dtype=np.float64), axis=axis)


def apply_mask(x: FloatArray, mask: DftMask, axis: int = -1) -> FloatArray:
    """
    Умножение спектра на маску вдоль оси и возврат вещественной части.

    Маски сопряжённо-симметричны, поэтому мнимая часть результата -
    это только ошибка округления.
    """
    shape = [1] * x.ndim
    shape[axis] = mask.size
    spectrum = sp_fft.fft(x, axis=axis) * mask.reshape(shape)
    return sp_fft.ifft(spectrum, axis=axis).real


def ideal_lpf(x: FloatArray, cutoff: RationalLike, axis: int = -1) -> FloatArray:
    """Идеальный ФНЧ вдоль оси axis произвольного массива."""
    x = np.asarray(x, dtype=np.float64)
    return apply_mask(x, lowpass_mask(x.shape[axis], cutoff), axis)


def upsample(x: FloatArray, factor: int, axis: int = -1) -> FloatArray:
    """
    Upsample вдоль оси: вставка нулей и восстанавливающий фильтр.

    Результат домножается на factor, чтобы исходные отсчёты
    сохранялись на грубой сетке.
    """
    factor = _check_factor(factor)
    moved = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    n = moved.shape[-1]
    stuffed = np.zeros(moved.shape[:-1] + (n * factor,), dtype=np.float64)
    stuffed[..., ::factor] = moved
    result = factor * apply_mask(stuffed, upsample_mask(n, factor), -1)
    return np.moveaxis(result, -1, axis)


def downsample(x: FloatArray, factor: int, axis: int = -1) -> FloatArray:
    """
    Downsample вдоль оси: ФНЧ с срезом 1/s и взятие каждого s-го отсчёта.

    Raises:
        ShapeError: Если длина оси не делится на s
    """
    factor = _check_factor(factor)
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    if n % factor:
        raise ShapeError(f"Длина {n} не делится на коэффициент {factor}")
    filtered = ideal_lpf(x, Fraction(1, factor), axis)
    moved = np.moveaxis(filtered, axis, -1)[..., ::factor]
    return np.moveaxis(moved, -1, axis)


def fractional_shift(x: FloatArray, m: int, n: int = 1, axis: int = -1) -> FloatArray:
    """
    Циклический сдвиг на m/n отсчётов вдоль оси.

    Целый сдвиг - точный roll. Дробный сдвиг выполняется как upsample в n
    раз, roll на m и downsample в n раз; бин Найквиста чётной длины при
    этом отбрасывается.

    Raises:
        DomainError: Если n < 1
    """
    if n < 1:
        raise DomainError(f"Знаменатель сдвига должен быть >= 1, получено {n}")
    x = np.asarray(x, dtype=np.float64)
    delta = Fraction(int(m), int(n))
    if delta.denominator == 1:
        return np.roll(x, delta.numerator, axis=axis)
    up = upsample(x, delta.denominator, axis)
    up = np.roll(up, delta.numerator, axis=axis)
    return downsample(up, delta.denominator, axis)


# Одномерные варианты с проверкой входа

def ideal_lpf_1d(x: Signal1D, cutoff: RationalLike) -> Signal1D:
    """
    Идеальный ФНЧ одномерного сигнала.

    Args:
        x: Сигнал длины N
        cutoff: Частота среза из (0, 1]

    Returns:
        IDFT(DFT(x) * lowpass_mask(N, cutoff)), длина N
    """
    return ideal_lpf(as_signal(x), cutoff)


def upsample_1d(x: Signal1D, factor: int) -> Signal1D:
    """Upsample одномерного сигнала в factor раз (длина N*factor)."""
    return upsample(as_signal(x), factor)


def downsample_1d(x: Signal1D, factor: int) -> Signal1D:
    """Downsample одномерного сигнала в factor раз (длина N/factor)."""
    return downsample(as_signal(x), factor)


def fractional_shift_1d(x: Signal1D, m: int, n: int = 1) -> Signal1D:
    """Дробный циклический сдвиг одномерного сигнала на m/n отсчётов."""
    return fractional_shift(as_signal(x), m, n)


# Двумерные операции

def apply_separable_2d(kernel: AxisOperation, t: Tensor3D) -> Tensor3D:
    """
    Раздельное применение одномерной операции к строкам, затем к столбцам.

    Args:
        kernel: Операция вдоль оси (см. AxisOperation)
        t: Карта признаков (C, H, W)

    Returns:
        Карта признаков с тем же числом каналов
    """
    rows = kernel(as_tensor3d(t), axis=-1)
    return kernel(rows, axis=-2)


def fractional_shift_2d(t: Tensor3D, shift: RationalShift) -> Tensor3D:
    """
    Дробный циклический сдвиг карты признаков.

    Сдвиг dx применяется вдоль строк (ось W), dy вдоль столбцов (ось H).
    Операторы коммутируют, порядок не важен.
    """
    tensor = as_tensor3d(t)
    tensor = fractional_shift(tensor, shift.dx.numerator, shift.dx.denominator, axis=-1)
    return fractional_shift(tensor, shift.dy.numerator, shift.dy.denominator, axis=-2)


def sanitize(t: Tensor3D) -> Tensor3D:
    """
    Обнуление бинов Найквиста по обеим осям (ФНЧ со срезом 1).

    После этого вход удовлетворяет предпосылке ограниченности спектра,
    и дробные сдвиги обратимы.
    """
    return apply_separable_2d(partial(ideal_lpf, cutoff=1), t)
