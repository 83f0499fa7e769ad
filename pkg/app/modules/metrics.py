"""
Количественные метрики сдвиговой эквивариантности и инвариантности.

Модуль содержит послойную разность выходов, отчёт эквивариантности,
сетки сдвигов (целые, полупиксельные, дробные), согласованность
предсказаний и точность при состязательном выборе сдвига из сетки.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import partial
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from .afc_types import DomainError, GridKind, LayerDiffRow, ShapeError
from .network import Network, NetworkSpec, build_network, forward
from .spectral import apply_separable_2d, fractional_shift_2d, sanitize, upsample
from .types import FloatArray, RationalShift, Tensor3D


logger = logging.getLogger(__name__)

DIFF_EPS = 1e-9

T = TypeVar('T')
R = TypeVar('R')


def _map(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Отображение с сохранением порядка; при workers > 1 - в пуле потоков."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _as_inputs(x: Union[Tensor3D, Sequence[Tensor3D]]) -> List[Tensor3D]:
    if isinstance(x, np.ndarray) and x.ndim == 3:
        return [x]
    inputs = list(x)
    if not inputs:
        raise DomainError("Список входов пуст")
    return inputs


def predict(logits: FloatArray) -> int:
    """Предсказанный класс; при равенстве логитов - наименьший индекс."""
    return int(np.argmax(logits))


def make_inputs(count: int, shape: Tuple[int, int, int], seed: int) -> List[Tensor3D]:
    """
    Синтетические входы: гауссов шум без бинов Найквиста.

    Args:
        count: Число входов
        shape: Форма (C, H, W)
        seed: Зерно генератора

    Returns:
        Список из count тензоров
    """
    if count < 1:
        raise DomainError(f"Число входов должно быть >= 1, получено {count}")
    rng = np.random.default_rng(seed)
    return [sanitize(rng.standard_normal(shape)) for _ in range(count)]


# Послойная разность

def layer_diff(y0: Tensor3D, y1: Tensor3D, eps: float = DIFF_EPS) -> float:
    """
    Средняя относительная разность двух выходов слоя.

    diff = mean(|y0 - y1| / (max(|y0|, |y1|) + eps))

    Raises:
        ShapeError: Если формы различаются
    """
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    if y0.shape != y1.shape:
        raise ShapeError(f"Формы {y0.shape} и {y1.shape} различаются")
    denominator = np.maximum(np.abs(y0), np.abs(y1)) + eps
    return float(np.mean(np.abs(y0 - y1) / denominator))


@dataclass(frozen=True)
class EquivarianceReport:
    """
    Отчёт послойной эквивариантности.

    Attributes:
        variant: Вариант сети
        shift: Использованный сдвиг входа
        samples: Число усреднённых входов
        layers: Пары (имя слоя, средняя разность) в порядке прохода
    """

    variant: str
    shift: RationalShift
    samples: int
    layers: Tuple[Tuple[str, float], ...]

    @property
    def max_diff(self) -> float:
        return max((value for _, value in self.layers), default=0.0)

    def rows(self) -> List[LayerDiffRow]:
        return [
            LayerDiffRow(layer=name, variant=self.variant, mean_diff=value)
            for name, value in self.layers
        ]


def _to_input_resolution(t: Tensor3D, stride: int) -> Tensor3D:
    if stride == 1:
        return t
    return apply_separable_2d(partial(upsample, factor=stride), t)


def _sample_diffs(net: Network, delta: RationalShift, x: Tensor3D) -> List[Tuple[str, float]]:
    _, reference = forward(net, x, capture=True)
    _, shifted = forward(net, fractional_shift_2d(x, delta), capture=True)
    diffs = []
    for ref_tap, shift_tap in zip(reference, shifted):
        ref_up = _to_input_resolution(ref_tap.output, ref_tap.cumulative_stride)
        shift_up = _to_input_resolution(shift_tap.output, shift_tap.cumulative_stride)
        diffs.append((ref_tap.name, layer_diff(fractional_shift_2d(ref_up, delta), shift_up)))
    return diffs


def equivariance_report(
    net: Network,
    x: Union[Tensor3D, Sequence[Tensor3D]],
    delta: RationalShift,
    workers: int = 1
) -> EquivarianceReport:
    """
    Послойная эквивариантность относительно сдвига входа.

    Для каждого входа выполняются два прохода (x и сдвинутый x), оба
    выхода каждого слоя возвращаются к разрешению входа upsample в
    cumulative_stride раз, опорный выход сдвигается на delta, после
    чего считается layer_diff. Разности усредняются по входам.

    Args:
        net: Сеть
        x: Вход или список входов
        delta: Сдвиг входа
        workers: Число потоков

    Returns:
        EquivarianceReport
    """
    inputs = _as_inputs(x)
    per_sample = _map(partial(_sample_diffs, net, delta), inputs, workers)
    names = [name for name, _ in per_sample[0]]
    means = np.mean([[value for _, value in sample] for sample in per_sample], axis=0)
    report = EquivarianceReport(
        variant=net.spec.variant.value,
        shift=delta,
        samples=len(inputs),
        layers=tuple(zip(names, (float(value) for value in means)))
    )
    logger.info("Эквивариантность %s, сдвиг %s: max diff %.3e", report.variant, delta, report.max_diff)
    return report


# Сетки сдвигов

@dataclass(frozen=True)
class ShiftGrid:
    """
    Набор сдвигов для состязательной оценки.

    Attributes:
        kind: Тип сетки
        bound: Граница B (или k для дробной сетки)
        shifts: Различные ненулевые сдвиги
    """

    kind: GridKind
    bound: int
    shifts: Tuple[RationalShift, ...]

    def __len__(self) -> int:
        return len(self.shifts)

    def __iter__(self) -> Iterator[RationalShift]:
        return iter(self.shifts)

    @classmethod
    def parse(cls, text: str) -> 'ShiftGrid':
        """
        Разбор строки вида "integer:B", "half:B" или "frac:k".

        Raises:
            ValueError: Если строка не соответствует формату
        """
        kind, _, bound = text.partition(':')
        return make_grid(GridKind(kind.strip()), int(bound))

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.bound}"


def _axis_values(kind: GridKind, bound: int) -> List[Fraction]:
    if kind is GridKind.INTEGER:
        return [Fraction(i) for i in range(1, bound + 1)]
    if kind is GridKind.HALF:
        return [Fraction(i, 2) for i in range(1, bound + 1)]
    return sorted({Fraction(m, n) for n in range(1, bound + 1) for m in range(1, n + 1)})


def make_grid(kind: Union[GridKind, str], bound: int) -> ShiftGrid:
    """
    Построение сетки сдвигов.

    integer: (i, j), 1 <= i, j <= B;
    half: (i/2, j/2), 1 <= i, j <= B;
    frac: (m1/n1, m2/n2), 1 <= m <= n <= k, без повторов после сокращения.

    Raises:
        DomainError: Если граница меньше 1
    """
    kind = GridKind(kind)
    if bound < 1:
        raise DomainError(f"Граница сетки должна быть >= 1, получено {bound}")
    values = _axis_values(kind, bound)
    shifts = tuple(
        shift for shift in (RationalShift(dy, dx) for dy in values for dx in values)
        if not shift.is_zero()
    )
    return ShiftGrid(kind, bound, shifts)


# Согласованность и состязательная точность

@dataclass(frozen=True)
class ConsistencyReport:
    """
    Результат оценки согласованности.

    Attributes:
        consistency: Доля входов с неизменным предсказанием
        shifts: Сдвиг, применённый к каждому входу
        max_logit_deviation: Максимальное отклонение логитов
    """

    consistency: float
    shifts: Tuple[RationalShift, ...]
    max_logit_deviation: float

    @property
    def samples(self) -> int:
        return len(self.shifts)


def _draw_shifts(
    shift: Union[RationalShift, ShiftGrid],
    count: int,
    seed: Optional[int]
) -> List[RationalShift]:
    if isinstance(shift, RationalShift):
        return [shift] * count
    if not len(shift):
        raise DomainError("Сетка сдвигов пуста")
    rng = np.random.default_rng(seed)
    drawn = [shift.shifts[index] for index in rng.integers(len(shift), size=count)]
    logger.debug("Сдвиги по входам: %s", ', '.join(str(item) for item in drawn))
    return drawn


def _consistency_case(net: Network, case: Tuple[Tensor3D, RationalShift]) -> Tuple[bool, float]:
    x, shift = case
    before = net(x)
    after = net(fractional_shift_2d(x, shift))
    return predict(before) == predict(after), float(np.max(np.abs(before - after)))


def consistency_report(
    net: Network,
    inputs: Sequence[Tensor3D],
    shift: Union[RationalShift, ShiftGrid],
    seed: Optional[int] = None,
    workers: int = 1
) -> ConsistencyReport:
    """
    Согласованность предсказаний при сдвиге.

    Args:
        net: Сеть
        inputs: Входы без бинов Найквиста
        shift: Фиксированный сдвиг или сетка, из которой для каждого
            входа выбирается случайный сдвиг
        seed: Зерно выбора сдвигов из сетки
        workers: Число потоков

    Raises:
        DomainError: Если список входов пуст
    """
    inputs = _as_inputs(inputs)
    shifts = _draw_shifts(shift, len(inputs), seed)
    results = _map(partial(_consistency_case, net), list(zip(inputs, shifts)), workers)
    agreed = sum(1 for same, _ in results if same)
    return ConsistencyReport(
        consistency=agreed / len(inputs),
        shifts=tuple(shifts),
        max_logit_deviation=max(deviation for _, deviation in results)
    )


def consistency(
    net: Network,
    inputs: Sequence[Tensor3D],
    shift: Union[RationalShift, ShiftGrid],
    seed: Optional[int] = None,
    workers: int = 1
) -> float:
    """Доля входов, предсказание которых не изменилось после сдвига."""
    return consistency_report(net, inputs, shift, seed, workers).consistency


def _check_labels(net: Network, inputs: Sequence[Tensor3D], labels: Sequence[int]) -> None:
    if len(labels) != len(inputs):
        raise ShapeError(f"Меток {len(labels)}, входов {len(inputs)}")
    for label in labels:
        if not 0 <= int(label) < net.spec.classes:
            raise DomainError(f"Метка {label} вне [0, {net.spec.classes})")


def clean_accuracy(net: Network, inputs: Sequence[Tensor3D], labels: Sequence[int], workers: int = 1) -> float:
    """Доля верно классифицированных несдвинутых входов."""
    inputs = _as_inputs(inputs)
    _check_labels(net, inputs, labels)
    predictions = _map(lambda x: predict(net(x)), inputs, workers)
    return sum(1 for pred, label in zip(predictions, labels) if pred == int(label)) / len(inputs)


def _robust_case(net: Network, grid: ShiftGrid, case: Tuple[Tensor3D, int]) -> bool:
    x, label = case
    if predict(net(x)) != label:
        return False
    return all(predict(net(fractional_shift_2d(x, shift))) == label for shift in grid)


def adversarial_accuracy(
    net: Network,
    inputs: Sequence[Tensor3D],
    labels: Sequence[int],
    grid: ShiftGrid,
    workers: int = 1
) -> float:
    """
    Точность при худшем сдвиге из сетки.

    Вход засчитывается, только если предсказание совпадает с меткой
    для несдвинутого входа и для каждого сдвига сетки.

    Raises:
        DomainError: Если метка вне диапазона классов
        ShapeError: Если число меток не совпадает с числом входов
    """
    inputs = _as_inputs(inputs)
    _check_labels(net, inputs, labels)
    cases = list(zip(inputs, (int(label) for label in labels)))
    robust = _map(partial(_robust_case, net, grid), cases, workers)
    accuracy = sum(robust) / len(inputs)
    logger.info("Состязательная точность %s на сетке %s: %.4f", net.spec.variant.value, grid, accuracy)
    return accuracy


def reference_labels(spec: NetworkSpec, inputs: Sequence[Tensor3D], seed: int) -> List[int]:
    """
    Метки от второй, замороженной сети с другим зерном.

    Разметчик строится по spec с заменой зерна; так точность определена
    без набора данных.
    """
    labeler = build_network(replace(spec, seed=seed))
    return [predict(labeler(x)) for x in _as_inputs(inputs)]
