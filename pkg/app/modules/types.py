"""
Типы и интерфейсы для численных модулей.

Этот файл содержит псевдонимы типов массивов и протоколы, которые
используются в spectral, layers и network для статической типизации
и автодополнения в IDE.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import (
    Any,
    Dict,
    Protocol,
    Tuple,
    Union,
    runtime_checkable
)

import numpy as np
import numpy.typing as npt


# Базовые типы массивов
FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

# Один период периодического сигнала, длина N >= 1
Signal1D = FloatArray
# Карта признаков (C, H, W)
Tensor3D = FloatArray
# Множители по бинам ДПФ
DftMask = FloatArray

RationalLike = Union[Fraction, int, float, str, Tuple[int, int]]

# Знаменатель, до которого округляются дроби, заданные числом с плавающей точкой
MAX_FLOAT_DENOMINATOR = 10 ** 6


def as_fraction(value: RationalLike) -> Fraction:
    """
    Приведение значения к несократимой дроби.

    Args:
        value: Дробь, целое, число с плавающей точкой, строка вида "m/n"
            или пара (m, n). Число с плавающей точкой заменяется ближайшей
            дробью со знаменателем не больше MAX_FLOAT_DENOMINATOR, так что
            0.1 становится ровно 1/10

    Returns:
        Несократимая дробь
    """
    if isinstance(value, tuple):
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, float):
        return Fraction(value).limit_denominator(MAX_FLOAT_DENOMINATOR)
    return Fraction(value)


@dataclass(frozen=True)
class RationalShift:
    """
    Двумерный сдвиг (m1/n1, m2/n2) в пикселях.

    Дроби хранятся точно и всегда несократимы (так устроен Fraction).

    Attributes:
        dy: Сдвиг по строкам (ось H)
        dx: Сдвиг по столбцам (ось W)
    """

    dy: Fraction
    dx: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, 'dy', as_fraction(self.dy))
        object.__setattr__(self, 'dx', as_fraction(self.dx))

    @classmethod
    def parse(cls, text: str) -> 'RationalShift':
        """
        Разбор строки "m1/n1,m2/n2".

        Raises:
            ValueError: Если строка не содержит двух дробей
        """
        parts = [part.strip() for part in text.split(',')]
        if len(parts) != 2:
            raise ValueError(f"Ожидалось 'm1/n1,m2/n2', получено {text!r}")
        return cls(Fraction(parts[0]), Fraction(parts[1]))

    def scaled(self, factor: int) -> 'RationalShift':
        """Сдвиг в координатах сетки, прореженной в factor раз."""
        return RationalShift(self.dy / factor, self.dx / factor)

    def __neg__(self) -> 'RationalShift':
        return RationalShift(-self.dy, -self.dx)

    def __add__(self, other: 'RationalShift') -> 'RationalShift':
        return RationalShift(self.dy + other.dy, self.dx + other.dx)

    def is_zero(self) -> bool:
        return self.dy == 0 and self.dx == 0

    def __str__(self) -> str:
        return f"{self.dy},{self.dx}"


@runtime_checkable
class AxisOperation(Protocol):
    """
    Протокол одномерной операции, применяемой вдоль оси массива.

    Реализации обязаны либо сохранять длину оси, либо равномерно
    масштабировать её (upsample/downsample).
    """

    def __call__(self, x: FloatArray, axis: int = -1) -> FloatArray:
        """Применение операции вдоль оси axis."""
        ...


@runtime_checkable
class LayerProtocol(Protocol):
    """
    Протокол слоя сети.

    Слой неизменяем после построения, прямой проход чистый.
    """

    name: str

    def __call__(self, x: Tensor3D) -> Tensor3D:
        """Прямой проход."""
        ...

    def parameters(self) -> Dict[str, FloatArray]:
        """Именованные параметры слоя."""
        ...


@dataclass(frozen=True)
class LayerTap:
    """
    Выход слоя, захваченный при прямом проходе.

    Attributes:
        name: Имя слоя
        output: Выход слоя (C, H, W)
        cumulative_stride: Произведение страйдов до этого слоя включительно
    """

    name: str
    output: Tensor3D
    cumulative_stride: int


# Дополнительные типы для конфигурации
ConfigDict = Dict[str, Any]
