"""
Типы данных предметной области alias-free сетей.

Этот файл содержит перечисления, типизированные словари отчётов
и конфигураций, а также иерархию исключений.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, TypedDict


class Variant(str, Enum):
    """
    Варианты сети.

    Порядок членов повторяет лестницу модификаций: каждый следующий
    вариант включает все изменения предыдущего.
    """
    BASELINE = "baseline"
    POLY = "poly"
    BLURPOOL = "blurpool"
    FIRST_ACT = "first_act"
    AF_NORM = "af_norm"
    AFC = "afc"

    @property
    def rank(self) -> int:
        """Позиция варианта в лестнице модификаций."""
        return list(Variant).index(self)

    def includes(self, step: 'Variant') -> bool:
        """Включает ли вариант модификацию step."""
        return self.rank >= step.rank


class NormMode(str, Enum):
    """Режим нормализации LayerNorm."""
    PER_PIXEL = "per_pixel"
    PER_LAYER_SCALE = "per_layer_scale"


class GridKind(str, Enum):
    """Типы сеток сдвигов."""
    INTEGER = "integer"
    HALF = "half"
    FRAC = "frac"


class Experiment(str, Enum):
    """Эксперименты командной строки."""
    VERIFY_SPECTRAL = "verify-spectral"
    EQUIVARIANCE = "equivariance"
    CONSISTENCY = "consistency"
    ADVERSARIAL = "adversarial"
    GRADCHECK = "gradcheck"
    ABLATION = "ablation"


class ActivationKind(str, Enum):
    """Виды активаций в слоях сети."""
    GELU = "gelu"
    POLY = "poly"
    ALIAS_FREE_POLY = "alias_free_poly"
    LPF_POLY = "lpf_poly"


# Строки отчётов
class LayerDiffRow(TypedDict):
    """Строка CSV отчёта эквивариантности."""
    layer: str
    variant: str
    mean_diff: float


class CheckResult(TypedDict):
    """Результат одной проверки набора верификации."""
    check: str
    max_deviation: float
    tolerance: float
    cases: int
    passed: bool


class FailingCase(TypedDict, total=False):
    """Сериализованный случай, нарушивший допуск."""
    check: str
    size: int
    trial: int
    seed: int
    deviation: float
    params: Dict[str, Any]
    signal: List[float]


class GridParams(TypedDict, total=False):
    """Параметры сетки сдвигов в YAML-документе."""
    kind: str
    bound: int


class NetworkSpecDict(TypedDict, total=False):
    """YAML-документ спецификации сети."""
    variant: str
    in_channels: int
    image_size: int
    stem_stride: int
    widths: List[int]
    depths: List[int]
    classes: int
    seed: int
    activation_scale: float
    init_std: float
    expansion: int


# Исключения
class AliasFreeError(Exception):
    """Базовая ошибка библиотеки."""

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        self.error_code = error_code


class DomainError(AliasFreeError):
    """Ошибка - аргумент вне области определения."""
    pass


class ShapeError(AliasFreeError):
    """Ошибка - несовместимые размеры или формы."""
    pass


class ConfigError(AliasFreeError):
    """Ошибка конфигурации с указанием файла и ключа."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        key: Optional[str] = None
    ):
        super().__init__(message, error_code='config')
        self.path = path
        self.key = key

    def __str__(self) -> str:
        prefix = ''
        if self.path:
            prefix += f"{self.path}: "
        if self.key:
            prefix += f"{self.key}: "
        return prefix + super().__str__()


class VerificationError(AliasFreeError):
    """Ошибка - проверка не уложилась в допуск."""

    def __init__(self, message: str, check: str, case: Optional[FailingCase] = None):
        super().__init__(message, error_code='verification')
        self.check = check
        self.case = case
