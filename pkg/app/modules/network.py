"""
Модуль построения небольших сетей в стиле ConvNeXt.

Этот модуль собирает базовый (с алиасингом) и alias-free варианты сети,
а также промежуточные ступени лестницы модификаций, со случайными весами
из фиксированного зерна. Прямой проход может сохранять выходы слоёв
(LayerTap) вместе с накопленным страйдом.
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from .afc_types import (
    ActivationKind,
    ConfigError,
    NetworkSpecDict,
    NormMode,
    ShapeError,
    Variant
)
from .layers import (
    DEFAULT_ACTIVATION_SCALE,
    ConvWeights,
    NormParams,
    PolyActivation,
    alias_free_poly,
    blurpool,
    circular_conv2d,
    gelu,
    global_avg_pool,
    layernorm,
    linear_head,
    lpf_poly,
    poly_eval
)
from .spectral import as_tensor3d
from .types import FloatArray, LayerProtocol, LayerTap, Tensor3D


logger = logging.getLogger(__name__)

DEPTHWISE_KERNEL = 7
DOWNSAMPLE_KERNEL = 2
DOWNSAMPLE_STRIDE = 2
IMAGE_SIZES = (16, 32, 64)


@dataclass(frozen=True)
class NetworkSpec:
    """
    Описание сети.

    Attributes:
        variant: Вариант сети (ступень лестницы модификаций)
        in_channels: Число каналов входа
        image_size: Размер стороны квадратного входа H = W
        stem_stride: Страйд первого слоя
        widths: Ширины стадий
        depths: Число блоков в стадиях
        classes: Число классов
        seed: Зерно генератора весов
        activation_scale: Масштаб c полиномиальных активаций
        init_std: Стандартное отклонение весов свёрток и головы
        expansion: Коэффициент расширения в блоках
    """

    variant: Variant = Variant.AFC
    in_channels: int = 3
    image_size: int = 32
    stem_stride: int = 4
    widths: Tuple[int, ...] = (8, 16)
    depths: Tuple[int, ...] = (1, 1)
    classes: int = 10
    seed: int = 0
    activation_scale: float = DEFAULT_ACTIVATION_SCALE
    init_std: float = 0.02
    expansion: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, 'variant', Variant(self.variant))
        object.__setattr__(self, 'widths', tuple(int(w) for w in self.widths))
        object.__setattr__(self, 'depths', tuple(int(d) for d in self.depths))
        if not self.widths or len(self.widths) != len(self.depths):
            raise ConfigError("widths и depths должны быть непустыми списками одной длины", key='widths')
        if min(self.widths) < 1 or min(self.depths) < 0:
            raise ConfigError("Ширины должны быть положительными", key='widths')
        for key in ('in_channels', 'image_size', 'stem_stride', 'classes', 'expansion'):
            if getattr(self, key) < 1:
                raise ConfigError("Значение должно быть положительным", key=key)
        if self.init_std < 0 or not self.activation_scale > 0:
            raise ConfigError("Недопустимый масштаб инициализации", key='init_std')
        if self.image_size not in IMAGE_SIZES:
            raise ConfigError(
                f"Размер входа должен быть одним из {IMAGE_SIZES}, получено {self.image_size}",
                key='image_size'
            )
        if self.image_size % self.total_stride:
            raise ConfigError(
                f"Размер {self.image_size} не делится на суммарный страйд {self.total_stride}",
                key='image_size'
            )

    @property
    def total_stride(self) -> int:
        """Произведение всех страйдов до глобального пулинга."""
        return self.stem_stride * DOWNSAMPLE_STRIDE ** (len(self.widths) - 1)

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return (self.in_channels, self.image_size, self.image_size)

    def to_dict(self) -> NetworkSpecDict:
        """Словарь с ключами, совпадающими с полями."""
        data: Dict[str, Any] = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, Variant):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            data[item.name] = value
        return data  # type: ignore[return-value]

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: Optional[str] = None) -> 'NetworkSpec':
        """
        Создание спецификации из словаря YAML-документа.

        Raises:
            ConfigError: При неизвестных ключах или недопустимых значениях
        """
        if not isinstance(data, dict):
            raise ConfigError("Ожидался словарь", path=path)
        known = {item.name for item in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError("Неизвестный ключ", path=path, key=str(key))
        try:
            return cls(**data)
        except ConfigError as error:
            raise ConfigError(str(error.args[0]), path=path, key=error.key) from error
        except (TypeError, ValueError) as error:
            raise ConfigError(str(error), path=path) from error

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'NetworkSpec':
        """Чтение спецификации из YAML-файла."""
        with open(path, encoding='utf-8') as handle:
            return cls.from_dict(yaml.safe_load(handle) or {}, path=str(path))

    def dump(self, path: Union[str, Path]) -> None:
        """Запись спецификации в YAML-файл."""
        with open(path, 'w', encoding='utf-8') as handle:
            yaml.safe_dump(self.to_dict(), handle, sort_keys=True)


# Слои

class Layer:
    """
    Базовый слой сети.

    Attributes:
        name: Полное имя слоя, префикс имён параметров
    """

    name: str

    def __call__(self, x: Tensor3D) -> Tensor3D:
        raise NotImplementedError

    def parameters(self) -> Dict[str, FloatArray]:
        return {}


@dataclass(frozen=True, eq=False)
class Conv(Layer):
    """Циклическая свёртка; страйд > 1 только в базовом варианте."""

    name: str
    weights: ConvWeights
    stride: int = 1

    def __call__(self, x: Tensor3D) -> Tensor3D:
        out = circular_conv2d(x, self.weights)
        if self.stride > 1:
            out = out[:, ::self.stride, ::self.stride]
        return out

    def parameters(self) -> Dict[str, FloatArray]:
        return {f"{self.name}.weight": self.weights.kernel, f"{self.name}.bias": self.weights.bias}


@dataclass(frozen=True, eq=False)
class BlurPool(Layer):
    name: str
    stride: int

    def __call__(self, x: Tensor3D) -> Tensor3D:
        return blurpool(x, self.stride)


@dataclass(frozen=True, eq=False)
class Activation(Layer):
    """Активация одного из видов ActivationKind."""

    name: str
    kind: ActivationKind
    poly: Optional[PolyActivation] = None

    def __call__(self, x: Tensor3D) -> Tensor3D:
        if self.kind is ActivationKind.GELU:
            return gelu(as_tensor3d(x))
        if self.kind is ActivationKind.POLY:
            return poly_eval(x, self.poly)
        if self.kind is ActivationKind.ALIAS_FREE_POLY:
            return alias_free_poly(x, self.poly)
        return lpf_poly(x, self.poly)

    def parameters(self) -> Dict[str, FloatArray]:
        if self.poly is None:
            return {}
        return {f"{self.name}.coefficients": self.poly.coefficients}


@dataclass(frozen=True, eq=False)
class Norm(Layer):
    name: str
    params: NormParams

    def __call__(self, x: Tensor3D) -> Tensor3D:
        return layernorm(x, self.params)

    def parameters(self) -> Dict[str, FloatArray]:
        return {f"{self.name}.gamma": self.params.gamma, f"{self.name}.beta": self.params.beta}


@dataclass(frozen=True, eq=False)
class GlobalPool(Layer):
    """Глобальный средний пулинг; выход (C, 1, 1)."""

    name: str

    def __call__(self, x: Tensor3D) -> Tensor3D:
        return global_avg_pool(x)[:, None, None]


@dataclass(frozen=True, eq=False)
class Linear(Layer):
    """Линейная голова; вход и выход (C, 1, 1)."""

    name: str
    weight: FloatArray
    bias: FloatArray

    def __call__(self, x: Tensor3D) -> Tensor3D:
        return linear_head(as_tensor3d(x)[:, 0, 0], self.weight, self.bias)[:, None, None]

    def parameters(self) -> Dict[str, FloatArray]:
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}


@dataclass(frozen=True, eq=False)
class Sequential(Layer):
    """
    Последовательность слоёв.

    Attributes:
        name: Имя группы
        children: Вложенные слои
        residual: Прибавлять ли вход к выходу (блок ConvNeXt)
        tap_children: Сохранять ли выходы вложенных слоёв
    """

    name: str
    children: Tuple[Layer, ...] = field(default_factory=tuple)
    residual: bool = False
    tap_children: bool = False

    def __call__(self, x: Tensor3D) -> Tensor3D:
        return _run(self, x, None, 1)

    def parameters(self) -> Dict[str, FloatArray]:
        params: Dict[str, FloatArray] = {}
        for child in self.children:
            params.update(child.parameters())
        return params


def _run(layer: LayerProtocol, x: Tensor3D, taps: Optional[List[LayerTap]], input_size: int) -> Tensor3D:
    if isinstance(layer, Sequential):
        inner_taps = taps if layer.tap_children else None
        out = x
        for child in layer.children:
            out = _run(child, out, inner_taps, input_size)
        if layer.residual:
            out = x + out
    else:
        out = layer(x)
    if taps is not None:
        taps.append(LayerTap(layer.name, out, input_size // out.shape[-1]))
    return out


@dataclass(frozen=True, eq=False)
class Network:
    """
    Построенная сеть.

    Attributes:
        spec: Спецификация, по которой сеть построена
        layers: Слои верхнего уровня в порядке прохода
    """

    spec: NetworkSpec
    layers: Tuple[LayerProtocol, ...]

    def parameters(self) -> Dict[str, FloatArray]:
        """Все параметры в порядке построения."""
        params: Dict[str, FloatArray] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params

    def parameter_count(self, suffix: Optional[str] = None) -> int:
        """Число скалярных параметров, при suffix - только с этим окончанием имени."""
        return int(sum(
            value.size for name, value in self.parameters().items()
            if suffix is None or name.endswith(suffix)
        ))

    def __call__(self, x: Tensor3D) -> FloatArray:
        logits, _ = forward(self, x)
        return logits


class _Initializer:
    """Источник параметров: явные значения или выборка из генератора."""

    def __init__(self, spec: NetworkSpec, overrides: Optional[Dict[str, FloatArray]]):
        self.rng = np.random.default_rng(spec.seed)
        self.std = spec.init_std
        self.overrides = overrides or {}
        self.used: List[str] = []

    def take(self, name: str, default: FloatArray) -> FloatArray:
        self.used.append(name)
        if name not in self.overrides:
            return default
        value = np.asarray(self.overrides[name], dtype=np.float64)
        if value.shape != default.shape:
            raise ShapeError(f"Параметр {name}: форма {value.shape}, ожидалась {default.shape}")
        return value

    def normal(self, name: str, shape: Tuple[int, ...]) -> FloatArray:
        # Выборка делается всегда, чтобы порядок генератора не зависел от overrides
        return self.take(name, self.rng.normal(0.0, self.std, size=shape))

    def constant(self, name: str, shape: Tuple[int, ...], value: float) -> FloatArray:
        return self.take(name, np.full(shape, value, dtype=np.float64))


def _conv(init: _Initializer, name: str, c_out: int, c_in: int, kernel: int,
          groups: int = 1, stride: int = 1) -> Conv:
    weight = init.normal(f"{name}.weight", (c_out, c_in // groups, kernel, kernel))
    bias = init.constant(f"{name}.bias", (c_out,), 0.0)
    return Conv(name, ConvWeights(weight, bias, groups), stride)


def _norm(init: _Initializer, name: str, channels: int, mode: NormMode) -> Norm:
    gamma = init.constant(f"{name}.gamma", (channels,), 1.0)
    beta = init.constant(f"{name}.beta", (channels,), 0.0)
    return Norm(name, NormParams(gamma, beta, mode=mode))


def _activation(init: _Initializer, name: str, channels: int, kind: ActivationKind,
                scale: float) -> Activation:
    if kind is ActivationKind.GELU:
        return Activation(name, kind)
    default = PolyActivation.from_gelu(channels, scale).coefficients
    coeffs = init.take(f"{name}.coefficients", np.array(default))
    return Activation(name, kind, PolyActivation(coeffs, scale))


def build_network(
    spec: NetworkSpec,
    params: Optional[Dict[str, FloatArray]] = None
) -> Network:
    """
    Построение сети по спецификации.

    Базовый вариант: свёртка 4x4 со страйдом 4; блоки [depthwise 7x7 ->
    попиксельный LN -> pointwise x4 -> GeLU -> pointwise]; downsample
    [LN -> свёртка 2x2 со страйдом 2]; голова [пулинг -> LN -> линейный
    слой]. Каждая ступень лестницы добавляет одну модификацию, вариант
    afc включает их все: BlurPool вместо страйдов, LPF-Poly перед первым
    BlurPool, alias-free LayerNorm, полином с передискретизацией.

    Args:
        spec: Спецификация сети
        params: Явные значения параметров по именам (например, загруженные)

    Returns:
        Неизменяемая сеть

    Raises:
        ConfigError: При несогласованных размерах
        ShapeError: Если форма явного параметра не совпадает с ожидаемой
    """
    variant = spec.variant
    use_blurpool = variant.includes(Variant.BLURPOOL)
    mode = NormMode.PER_LAYER_SCALE if variant.includes(Variant.AF_NORM) else NormMode.PER_PIXEL
    if variant.includes(Variant.AFC):
        block_act = ActivationKind.ALIAS_FREE_POLY
    elif variant.includes(Variant.POLY):
        block_act = ActivationKind.POLY
    else:
        block_act = ActivationKind.GELU

    init = _Initializer(spec, params)
    layers: List[Layer] = []

    width = spec.widths[0]
    stem_conv = _conv(init, 'stem.conv', width, spec.in_channels, spec.stem_stride,
                      stride=1 if use_blurpool else spec.stem_stride)
    stem: List[Layer] = [stem_conv]
    if variant.includes(Variant.FIRST_ACT):
        stem.append(_activation(init, 'stem.act', width, ActivationKind.LPF_POLY, spec.activation_scale))
    if use_blurpool:
        stem.append(BlurPool('stem.blurpool', spec.stem_stride))
    layers.append(Sequential('stem', tuple(stem)))

    for stage, (stage_width, depth) in enumerate(zip(spec.widths, spec.depths)):
        if stage > 0:
            prefix = f"stage{stage}.downsample"
            down: List[Layer] = [
                _norm(init, f"{prefix}.norm", width, mode),
                _conv(init, f"{prefix}.conv", stage_width, width, DOWNSAMPLE_KERNEL,
                      stride=1 if use_blurpool else DOWNSAMPLE_STRIDE)
            ]
            if use_blurpool:
                down.append(BlurPool(f"{prefix}.blurpool", DOWNSAMPLE_STRIDE))
            layers.append(Sequential(prefix, tuple(down)))
            width = stage_width
        hidden = width * spec.expansion
        for index in range(depth):
            prefix = f"stage{stage}.block{index}"
            block = (
                _conv(init, f"{prefix}.dwconv", width, width, DEPTHWISE_KERNEL, groups=width),
                _norm(init, f"{prefix}.norm", width, mode),
                _conv(init, f"{prefix}.pwconv1", hidden, width, 1),
                _activation(init, f"{prefix}.act", hidden, block_act, spec.activation_scale),
                _conv(init, f"{prefix}.pwconv2", width, hidden, 1),
            )
            layers.append(Sequential(prefix, block, residual=True, tap_children=True))

    layers.append(GlobalPool('head.pool'))
    layers.append(_norm(init, 'head.norm', width, mode))
    layers.append(Linear(
        'head.linear',
        init.normal('head.linear.weight', (spec.classes, width)),
        init.constant('head.linear.bias', (spec.classes,), 0.0)
    ))

    unknown = set(init.overrides) - set(init.used)
    if unknown:
        raise ShapeError(f"Параметры не принадлежат сети: {sorted(unknown)}")
    network = Network(spec, tuple(layers))
    logger.debug("Построена сеть %s: %d параметров", variant.value, network.parameter_count())
    return network


def forward(
    net: Network,
    x: Tensor3D,
    capture: bool = False
) -> Tuple[FloatArray, List[LayerTap]]:
    """
    Прямой проход.

    Args:
        net: Сеть
        x: Вход формы spec.input_shape
        capture: Сохранять ли выходы слоёв

    Returns:
        Логиты длины classes и список LayerTap (пустой без capture)

    Raises:
        ShapeError: Если форма входа не совпадает со спецификацией
    """
    x = as_tensor3d(x)
    if x.shape != net.spec.input_shape:
        raise ShapeError(f"Вход {x.shape}, сеть ожидает {net.spec.input_shape}")
    taps: Optional[List[LayerTap]] = [] if capture else None
    out = x
    for layer in net.layers:
        out = _run(layer, out, taps, net.spec.image_size)
    return out[:, 0, 0], taps or []


# Сохранение весов

def save_weights(net: Network, path: Union[str, Path]) -> Path:
    """
    Запись весов в плоский файл float64 little-endian и JSON-описание рядом.

    Returns:
        Путь к JSON-описанию (<path>.json)
    """
    path = Path(path)
    tensors = []
    offset = 0
    chunks = []
    for name, value in net.parameters().items():
        tensors.append({'name': name, 'shape': list(value.shape), 'offset': offset})
        chunks.append(np.ascontiguousarray(value, dtype='<f8').tobytes())
        offset += int(value.size)
    path.write_bytes(b''.join(chunks))
    sidecar = path.with_name(path.name + '.json')
    document = {'schema': 1, 'dtype': '<f8', 'spec': net.spec.to_dict(), 'tensors': tensors}
    sidecar.write_text(json.dumps(document, sort_keys=True, indent=2), encoding='utf-8')
    return sidecar


def load_weights(path: Union[str, Path]) -> Network:
    """
    Восстановление сети из файла весов и JSON-описания.

    Raises:
        ConfigError: Если описание повреждено или не согласовано с файлом
    """
    path = Path(path)
    sidecar = path.with_name(path.name + '.json')
    try:
        document = json.loads(sidecar.read_text(encoding='utf-8'))
        spec = NetworkSpec.from_dict(document['spec'], path=str(sidecar))
        flat = np.frombuffer(path.read_bytes(), dtype='<f8')
        params = {}
        for entry in document['tensors']:
            size = int(np.prod(entry['shape'], dtype=np.int64))
            start = entry['offset']
            params[entry['name']] = flat[start:start + size].reshape(entry['shape']).astype(np.float64)
    except (KeyError, ValueError) as error:
        raise ConfigError(f"Повреждённое описание весов: {error}", path=str(sidecar)) from error
    return build_network(spec, params)

