"""
Слои alias-free сети и их базовые (с алиасингом) аналоги.

Модуль содержит циклическую свёртку, BlurPool, полиномиальные активации
(поточечную, alias-free с передискретизацией и LPF-Poly), два варианта
LayerNorm, GeLU, глобальный пулинг и линейную голову. Все функции
чистые: входы не изменяются.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable, Tuple

import numpy as np
from scipy.special import erf

from .afc_types import DomainError, NormMode, ShapeError
from .spectral import (
    apply_separable_2d,
    as_tensor3d,
    downsample,
    ideal_lpf,
    upsample
)
from .types import FloatArray, RationalLike, Tensor3D, as_fraction


logger = logging.getLogger(__name__)

DEFAULT_ACTIVATION_SCALE = 7.0
DEFAULT_NORM_EPS = 1e-6
GELU_FIT_BOUND = math.sqrt(2.0)
GELU_FIT_POINTS = 1001
LPF_POLY_CUTOFF = Fraction(3, 4)


@dataclass(frozen=True, eq=False)
class PolyActivation:
    """
    Параметры полиномиальной активации Poly_c(x) = c * Poly_2(c * x).

    Attributes:
        coefficients: Коэффициенты (a0, a1, a2) по каналам, форма (C, 3)
        scale: Масштаб c > 0
        degree: Степень полинома (поддерживается только 2)
    """

    coefficients: FloatArray
    scale: float = DEFAULT_ACTIVATION_SCALE
    degree: int = 2

    def __post_init__(self) -> None:
        coeffs = np.array(self.coefficients, dtype=np.float64, ndmin=2)
        if self.degree != 2:
            raise DomainError(f"Поддерживается только степень 2, получено {self.degree}")
        if coeffs.ndim != 2 or coeffs.shape[1] != self.degree + 1:
            raise ShapeError(f"Ожидались коэффициенты формы (C, 3), получено {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("Коэффициенты содержат нечисловые значения")
        if not self.scale > 0:
            raise DomainError(f"Масштаб должен быть положительным, получено {self.scale}")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coefficients', coeffs)
        object.__setattr__(self, 'scale', float(self.scale))

    @property
    def channels(self) -> int:
        """Число каналов."""
        return self.coefficients.shape[0]

    @property
    def upsample_factor(self) -> int:
        """Целый коэффициент upsample: (d+1)/2, округлённый вверх."""
        return math.ceil((self.degree + 1) / 2)

    @classmethod
    def uniform(
        cls,
        coeffs: Tuple[float, float, float],
        channels: int,
        scale: float = DEFAULT_ACTIVATION_SCALE
    ) -> 'PolyActivation':
        """Одинаковые коэффициенты во всех каналах."""
        return cls(np.tile(np.asarray(coeffs, dtype=np.float64), (channels, 1)), scale)

    @classmethod
    def from_gelu(
        cls,
        channels: int,
        scale: float = DEFAULT_ACTIVATION_SCALE
    ) -> 'PolyActivation':
        """Инициализация приближением GeLU на [-sqrt(2), sqrt(2)]."""
        return cls.uniform(fit_gelu_coeffs(), channels, scale)


@dataclass(frozen=True, eq=False)
class ConvWeights:
    """
    Веса циклической свёртки (страйд всегда 1).

    Attributes:
        kernel: Ядро (C_out, C_in / groups, k_h, k_w)
        bias: Смещение длины C_out
        groups: Число групп
    """

    kernel: FloatArray
    bias: FloatArray
    groups: int = 1

    def __post_init__(self) -> None:
        kernel = np.asarray(self.kernel, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if kernel.ndim != 4:
            raise ShapeError(f"Ядро должно быть четырёхмерным, получено {kernel.shape}")
        if bias.shape != (kernel.shape[0],):
            raise ShapeError(f"Смещение {bias.shape} не согласовано с ядром {kernel.shape}")
        if self.groups < 1 or kernel.shape[0] % self.groups:
            raise ShapeError(f"C_out={kernel.shape[0]} не делится на groups={self.groups}")
        if not (np.all(np.isfinite(kernel)) and np.all(np.isfinite(bias))):
            raise DomainError("Веса свёртки содержат нечисловые значения")
        object.__setattr__(self, 'kernel', kernel)
        object.__setattr__(self, 'bias', bias)

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1] * self.groups

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]


@dataclass(frozen=True, eq=False)
class NormParams:
    """
    Параметры LayerNorm.

    Attributes:
        gamma: Масштаб по каналам
        beta: Сдвиг по каналам
        eps: Добавка под корнем
        mode: Попиксельная (базовая) или послойная (alias-free) нормировка
    """

    gamma: FloatArray
    beta: FloatArray
    eps: float = DEFAULT_NORM_EPS
    mode: NormMode = NormMode.PER_LAYER_SCALE

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if gamma.ndim != 1 or gamma.shape != beta.shape:
            raise ShapeError(f"gamma {gamma.shape} и beta {beta.shape} должны быть векторами одной длины")
        if not self.eps > 0:
            raise DomainError(f"eps должен быть положительным, получено {self.eps}")
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'mode', NormMode(self.mode))

    @classmethod
    def identity(cls, channels: int, mode: NormMode = NormMode.PER_LAYER_SCALE) -> 'NormParams':
        """gamma = 1, beta = 0."""
        return cls(np.ones(channels), np.zeros(channels), mode=mode)


def _channel_view(values: FloatArray) -> FloatArray:
    return values[:, None, None]


def _check_channels(x: Tensor3D, channels: int) -> None:
    if x.shape[0] != channels:
        raise ShapeError(f"Число каналов {x.shape[0]} не совпадает с параметрами ({channels})")


# Свёртки и пулинг

def circular_conv2d(x: Tensor3D, weights: ConvWeights) -> Tensor3D:
    """
    Взаимная корреляция с циклическим продолжением, страйд 1.

    Центр ядра - отсчёт (k_h // 2, k_w // 2). Ядро больше карты признаков
    допустимо: оно наматывается на период.

    Args:
        x: Вход (C_in, H, W)
        weights: Веса свёртки

    Returns:
        Выход (C_out, H, W)

    Raises:
        ShapeError: Если число входных каналов не совпадает с весами
    """
    x = as_tensor3d(x)
    channels, height, width = x.shape
    if channels != weights.in_channels:
        raise ShapeError(f"Вход имеет {channels} каналов, свёртка ожидает {weights.in_channels}")
    groups = weights.groups
    c_out, c_in_group, k_h, k_w = weights.kernel.shape
    grouped = x.reshape(groups, c_in_group, height, width)
    kernel = weights.kernel.reshape(groups, c_out // groups, c_in_group, k_h, k_w)
    out = np.zeros((groups, c_out // groups, height, width), dtype=np.float64)
    pad_h, pad_w = k_h // 2, k_w // 2
    for u in range(k_h):
        for v in range(k_w):
            shifted = np.roll(grouped, (pad_h - u, pad_w - v), axis=(2, 3))
            out += np.einsum('goc,gchw->gohw', kernel[:, :, :, u, v], shifted)
    return out.reshape(c_out, height, width) + _channel_view(weights.bias)


def blurpool(x: Tensor3D, stride: int) -> Tensor3D:
    """
    BlurPool: идеальный ФНЧ со срезом 1/s и прореживание в s раз.

    Raises:
        ShapeError: Если H или W не делится на s
    """
    x = as_tensor3d(x)
    if x.shape[1] % stride or x.shape[2] % stride:
        raise ShapeError(f"Размер {x.shape[1:]} не делится на страйд {stride}")
    return apply_separable_2d(partial(downsample, factor=stride), x)


def global_avg_pool(x: Tensor3D) -> FloatArray:
    """Среднее по пространству для каждого канала."""
    return as_tensor3d(x).mean(axis=(1, 2))


def linear_head(v: FloatArray, weight: FloatArray, bias: FloatArray) -> FloatArray:
    """Аффинное отображение в логиты: W v + b."""
    v = np.asarray(v, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 2 or weight.shape[1] != v.shape[0] or weight.shape[0] != np.shape(bias)[0]:
        raise ShapeError(f"Голова {weight.shape} не согласована с вектором {v.shape}")
    return weight @ v + bias


# Активации

def gelu(x: FloatArray) -> FloatArray:
    """Точная GeLU: x * Phi(x) через функцию ошибок."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def fit_poly_coeffs(
    func: Callable[[FloatArray], FloatArray],
    degree: int = 2,
    bound: float = GELU_FIT_BOUND,
    points: int = GELU_FIT_POINTS
) -> Tuple[float, ...]:
    """
    Подбор полинома методом наименьших квадратов на равномерной сетке.

    Args:
        func: Приближаемая функция
        degree: Степень полинома
        bound: Полуширина отрезка [-bound, bound]
        points: Число узлов сетки

    Returns:
        Коэффициенты (a0, a1, ..., a_degree)
    """
    grid = np.linspace(-bound, bound, points)
    coeffs = np.polynomial.polynomial.polyfit(grid, func(grid), degree)
    residual = np.max(np.abs(np.polynomial.polynomial.polyval(grid, coeffs) - func(grid)))
    logger.debug("Полином степени %d на [-%g, %g]: максимальная ошибка %.3e", degree, bound, bound, residual)
    return tuple(float(value) for value in coeffs)


def fit_gelu_coeffs() -> Tuple[float, float, float]:
    """Коэффициенты Poly_2, приближающие GeLU на [-sqrt(2), sqrt(2)]."""
    a0, a1, a2 = fit_poly_coeffs(gelu)
    return a0, a1, a2


def _apply_poly(x: FloatArray, poly: PolyActivation) -> FloatArray:
    coeffs = poly.coefficients
    c = poly.scale
    scaled = c * x
    return c * (
        _channel_view(coeffs[:, 0])
        + _channel_view(coeffs[:, 1]) * scaled
        + _channel_view(coeffs[:, 2]) * scaled * scaled
    )


def poly_eval(x: Tensor3D, poly: PolyActivation) -> Tensor3D:
    """
    Поточечное вычисление c * (a0 + a1 * c x + a2 * (c x)^2) по каналам.

    Raises:
        ShapeError: Если число каналов не совпадает с коэффициентами
    """
    x = as_tensor3d(x)
    _check_channels(x, poly.channels)
    return _apply_poly(x, poly)


def poly_coeff_gradient(
    x: Tensor3D,
    poly: PolyActivation,
    upstream: Tensor3D
) -> FloatArray:
    """
    Градиент sum(upstream * poly_eval(x)) по коэффициентам.

    Args:
        x: Вход активации
        poly: Параметры активации
        upstream: Градиент по выходу активации

    Returns:
        Массив (C, 3): (g0, g1, g2) для каждого канала
    """
    x = as_tensor3d(x)
    upstream = as_tensor3d(upstream)
    _check_channels(x, poly.channels)
    if upstream.shape != x.shape:
        raise ShapeError(f"Формы входа {x.shape} и градиента {upstream.shape} различаются")
    c = poly.scale
    g0 = c * upstream.sum(axis=(1, 2))
    g1 = c ** 2 * (upstream * x).sum(axis=(1, 2))
    g2 = c ** 3 * (upstream * x * x).sum(axis=(1, 2))
    return np.stack([g0, g1, g2], axis=1)


def alias_free_poly(x: Tensor3D, poly: PolyActivation) -> Tensor3D:
    """
    Alias-free полиномиальная активация.

    Шаги:
        1. upsample в I раз по обеим осям (I = (d+1)/2 вверх, для d=2 это 2);
        2. поточечный полином;
        3. идеальный ФНЧ со срезом 1/I;
        4. прореживание в I раз.

    Полоса, сохраняемая на шаге 3, та же, что у ФНЧ 2/(d+1) на частоте
    (d+1)/2: |k| < N/2 исходной сетки.
    """
    x = as_tensor3d(x)
    _check_channels(x, poly.channels)
    factor = poly.upsample_factor
    dense = apply_separable_2d(partial(upsample, factor=factor), x)
    activated = _apply_poly(dense, poly)
    filtered = apply_separable_2d(partial(ideal_lpf, cutoff=Fraction(1, factor)), activated)
    # Спектр уже ограничен, поэтому downsample сводится к прореживанию
    return filtered[:, ::factor, ::factor]


def lpf_poly(
    x: Tensor3D,
    poly: PolyActivation,
    cutoff: RationalLike = LPF_POLY_CUTOFF
) -> Tensor3D:
    """
    LPF-Poly: c * (a0 + a1 * y + a2 * y * LPF(y)), y = c x.

    Передискретизации нет; выход alias-free в полосе |θ| <= π(1 - cutoff),
    поэтому за ним должен следовать BlurPool со срезом не выше 1 - cutoff.

    Raises:
        DomainError: Если cutoff вне (0, 1)
    """
    x = as_tensor3d(x)
    _check_channels(x, poly.channels)
    cutoff = as_fraction(cutoff)
    if cutoff <= 0 or cutoff >= 1:
        raise DomainError(f"Срез LPF-Poly должен лежать в (0, 1), получено {cutoff}")
    coeffs = poly.coefficients
    c = poly.scale
    scaled = c * x
    smooth = apply_separable_2d(partial(ideal_lpf, cutoff=cutoff), scaled)
    return c * (
        _channel_view(coeffs[:, 0])
        + _channel_view(coeffs[:, 1]) * scaled
        + _channel_view(coeffs[:, 2]) * scaled * smooth
    )


# Нормализация

def af_layernorm(x: Tensor3D, params: NormParams) -> Tensor3D:
    """
    Alias-free LayerNorm.

    Центрирование по каналам в каждом пикселе, масштаб - одно стандартное
    отклонение на весь слой.

    Raises:
        DomainError: Если режим параметров не per_layer_scale
    """
    x = as_tensor3d(x)
    if params.mode is not NormMode.PER_LAYER_SCALE:
        raise DomainError(f"af_layernorm требует режим per_layer_scale, получено {params.mode.value}")
    _check_channels(x, params.gamma.size)
    centered = x - x.mean(axis=0, keepdims=True)
    sigma = np.sqrt(np.mean(centered * centered) + params.eps)
    return _channel_view(params.gamma) * centered / sigma + _channel_view(params.beta)


def layernorm_pixelwise(x: Tensor3D, params: NormParams) -> Tensor3D:
    """
    Базовый LayerNorm: центрирование и масштаб отдельно в каждом пикселе.

    Raises:
        DomainError: Если режим параметров не per_pixel
    """
    x = as_tensor3d(x)
    if params.mode is not NormMode.PER_PIXEL:
        raise DomainError(f"layernorm_pixelwise требует режим per_pixel, получено {params.mode.value}")
    _check_channels(x, params.gamma.size)
    centered = x - x.mean(axis=0, keepdims=True)
    variance = np.mean(centered * centered, axis=0, keepdims=True)
    return _channel_view(params.gamma) * centered / np.sqrt(variance + params.eps) + _channel_view(params.beta)


def layernorm(x: Tensor3D, params: NormParams) -> Tensor3D:
    """Выбор варианта LayerNorm по режиму параметров."""
    if params.mode is NormMode.PER_PIXEL:
        return layernorm_pixelwise(x, params)
    return af_layernorm(x, params)
