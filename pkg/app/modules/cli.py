"""
Командная строка экспериментов.

Запускает проверки спектральных ядер и градиентов, отчёты
эквивариантности, согласованности, состязательной точности и лестницы
модификаций. Параметры берутся из значений по умолчанию, затем из
YAML-файла (--config), затем из флагов.

Коды выхода:
    0 - все утверждения выбранного набора выполнены;
    1 - хотя бы одно утверждение нарушено;
    2 - ошибка конфигурации (сообщение "путь: ключ: текст").
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .afc_types import AliasFreeError, ConfigError, Experiment, GridKind, GridParams, Variant
from .metrics import (
    ShiftGrid,
    adversarial_accuracy,
    clean_accuracy,
    consistency_report,
    equivariance_report,
    make_grid,
    make_inputs,
    reference_labels
)
from .network import IMAGE_SIZES, NetworkSpec, build_network
from .types import ConfigDict, RationalShift
from .verification import (
    DEFAULT_SIZES,
    DEFAULT_TRIALS,
    GRADIENT_CASES,
    MASK_KERNELS,
    SuiteReport,
    run_gradcheck,
    run_spectral_suite
)


logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1
INPUTS_NOTE = "seeded Gaussian images, Nyquist-sanitized by an ideal low-pass filter with cutoff 1"
EQUIVARIANCE_TOLERANCE = 1e-4
LOGIT_TOLERANCE = 1e-6
FORMATS = ('json', 'csv')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def _grid_text(value: Any) -> str:
    if isinstance(value, dict):
        params: GridParams = value  # type: ignore[assignment]
        value = f"{params['kind']}:{params['bound']}"
    text = str(value)
    ShiftGrid.parse(text)
    return text


def _shift(value: Any) -> RationalShift:
    if isinstance(value, RationalShift):
        return value
    return RationalShift.parse(str(value))


def _variants(value: Any) -> Tuple[Variant, ...]:
    if isinstance(value, (str, Variant)):
        value = [value]
    variants = tuple(Variant(item) for item in value)
    if not variants:
        raise ValueError("Список вариантов пуст")
    return variants


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Конфигурация эксперимента.

    Attributes:
        experiment: Запускаемый эксперимент
        network: Спецификация сети; вариант заменяется на каждый из variants
        variants: Варианты сети, для которых выполняется эксперимент
        samples: Число входов
        seed: Зерно входов, сдвигов и проверок
        grid: Сетка сдвигов ("integer:B", "half:B" или "frac:k")
        delta: Сдвиг для отчёта эквивариантности
        out: Путь отчёта; без него отчёт пишется в stdout
        format: Формат отчёта (json или csv)
        sizes: Длины сигналов для verify-spectral
        trials: Число случайных сигналов на длину
        cases: Число случаев gradcheck
        workers: Число потоков
        corrupt_kernel: Маска, портящаяся перед сравнением (проверка пути отказа)
    """

    experiment: Experiment = Experiment.VERIFY_SPECTRAL
    network: NetworkSpec = field(default_factory=NetworkSpec)
    variants: Tuple[Variant, ...] = (Variant.BASELINE, Variant.AFC)
    samples: int = 64
    seed: int = 0
    grid: str = 'frac:4'
    delta: RationalShift = field(default_factory=lambda: RationalShift.parse('1/2,1/2'))
    out: Optional[str] = None
    format: str = 'json'
    sizes: Tuple[int, ...] = DEFAULT_SIZES
    trials: int = DEFAULT_TRIALS
    cases: int = GRADIENT_CASES
    workers: int = 1
    corrupt_kernel: Optional[str] = None

    def __post_init__(self) -> None:
        self._coerce('experiment', Experiment)
        self._coerce('variants', _variants)
        self._coerce('delta', _shift)
        self._coerce('grid', _grid_text)
        self._coerce('sizes', lambda values: tuple(int(value) for value in values))
        for key in ('samples', 'seed', 'trials', 'cases', 'workers'):
            self._coerce(key, int)
        for key in ('samples', 'trials', 'cases', 'workers'):
            if getattr(self, key) < 1:
                raise ConfigError("Значение должно быть >= 1", key=key)
        if self.seed < 0:
            raise ConfigError("Зерно должно быть неотрицательным", key='seed')
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigError("Длины должны быть положительными", key='sizes')
        if self.format not in FORMATS:
            raise ConfigError(f"Формат должен быть одним из {FORMATS}", key='format')
        if self.corrupt_kernel is not None and self.corrupt_kernel not in MASK_KERNELS:
            raise ConfigError(f"Маска должна быть одной из {MASK_KERNELS}", key='corrupt_kernel')

    def _coerce(self, key: str, convert: Callable[[Any], Any]) -> None:
        try:
            object.__setattr__(self, key, convert(getattr(self, key)))
        except (TypeError, ValueError, ArithmeticError, AliasFreeError) as error:
            raise ConfigError(str(error), key=key) from error

    @property
    def shift_grid(self) -> ShiftGrid:
        return ShiftGrid.parse(self.grid)

    def spec_for(self, variant: Variant) -> NetworkSpec:
        return replace(self.network, variant=variant)

    def to_dict(self) -> ConfigDict:
        """Параметры, влияющие на результат (без out и workers)."""
        return {
            'experiment': self.experiment.value,
            'network': self.network.to_dict(),
            'variants': [variant.value for variant in self.variants],
            'samples': self.samples,
            'seed': self.seed,
            'grid': self.grid,
            'delta': str(self.delta),
            'format': self.format,
            'sizes': list(self.sizes),
            'trials': self.trials,
            'cases': self.cases,
            'corrupt_kernel': self.corrupt_kernel,
        }

    @classmethod
    def from_dict(cls, data: ConfigDict, path: Optional[str] = None) -> 'ExperimentConfig':
        """
        Создание конфигурации из словаря YAML-документа.

        Raises:
            ConfigError: При неизвестных ключах или недопустимых значениях
        """
        if not isinstance(data, dict):
            raise ConfigError("Ожидался словарь", path=path)
        known = {item.name for item in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError("Неизвестный ключ", path=path, key=str(key))
        values = dict(data)
        if 'network' in values and not isinstance(values['network'], NetworkSpec):
            try:
                values['network'] = NetworkSpec.from_dict(values['network'])
            except ConfigError as error:
                key = f"network.{error.key}" if error.key else 'network'
                raise ConfigError(str(error.args[0]), path=path, key=key) from error
        try:
            return cls(**values)
        except ConfigError as error:
            raise ConfigError(str(error.args[0]), path=path, key=error.key) from error

    @classmethod
    def load(cls, path: str) -> ConfigDict:
        """
        Чтение YAML-документа конфигурации (без проверки ключей).

        Raises:
            ConfigError: Если файл не читается или не является YAML-словарём
        """
        try:
            with open(path, encoding='utf-8') as handle:
                data = yaml.safe_load(handle) or {}
        except OSError as error:
            raise ConfigError(error.strerror or str(error), path=path) from error
        except yaml.YAMLError as error:
            raise ConfigError(f"Некорректный YAML: {error}", path=path) from error
        if not isinstance(data, dict):
            raise ConfigError("Ожидался словарь", path=path)
        return data


@dataclass
class CommandResult:
    """
    Результат команды.

    Attributes:
        results: Содержимое JSON-отчёта
        header: Заголовок CSV
        rows: Строки CSV
        failed: Имена нарушенных утверждений
    """

    results: Dict[str, Any] = field(default_factory=dict)
    header: List[str] = field(default_factory=list)
    rows: List[List[Any]] = field(default_factory=list)
    failed: List[str] = field(default_factory=list)


def _suite_result(suite: SuiteReport) -> CommandResult:
    result = CommandResult(
        results={'checks': suite.checks, 'failures': suite.failures},
        header=['check', 'max_deviation', 'tolerance', 'cases', 'passed']
    )
    for check in suite.checks:
        result.rows.append([check[column] for column in result.header])
        if not check['passed']:
            result.failed.append(check['check'])
    return result


def cmd_verify_spectral(config: ExperimentConfig) -> CommandResult:
    """Спектральные ядра против эталонов на длинах config.sizes."""
    suite = run_spectral_suite(config.sizes, config.trials, config.seed, config.corrupt_kernel)
    return _suite_result(suite)


def cmd_gradcheck(config: ExperimentConfig) -> CommandResult:
    """Градиент по коэффициентам полинома против конечных разностей."""
    return _suite_result(run_gradcheck(config.cases, config.seed))


def _inputs(config: ExperimentConfig) -> list:
    return make_inputs(config.samples, config.network.input_shape, config.seed)


def cmd_equivariance(config: ExperimentConfig) -> CommandResult:
    """Послойная эквивариантность при сдвиге config.delta."""
    inputs = _inputs(config)
    result = CommandResult(header=['layer', 'variant', 'mean_diff'])
    for variant in config.variants:
        report = equivariance_report(build_network(config.spec_for(variant)), inputs, config.delta, config.workers)
        result.results[variant.value] = {
            'layers': report.rows(),
            'max_diff': report.max_diff,
            'samples': report.samples,
            'shift': str(report.shift),
        }
        result.rows.extend([row['layer'], row['variant'], row['mean_diff']] for row in report.rows())
        if variant.includes(Variant.AFC) and report.max_diff >= EQUIVARIANCE_TOLERANCE:
            result.failed.append(f"equivariance:{variant.value}")
    return result


def cmd_consistency(config: ExperimentConfig) -> CommandResult:
    """Согласованность при случайном сдвиге из сетки config.grid."""
    inputs = _inputs(config)
    grid = config.shift_grid
    result = CommandResult(header=['variant', 'grid', 'consistency', 'max_logit_deviation'])
    for variant in config.variants:
        net = build_network(config.spec_for(variant))
        report = consistency_report(net, inputs, grid, seed=config.seed, workers=config.workers)
        result.results[variant.value] = {
            'consistency': report.consistency,
            'max_logit_deviation': report.max_logit_deviation,
            'shifts': [str(shift) for shift in report.shifts],
        }
        result.rows.append([variant.value, str(grid), report.consistency, report.max_logit_deviation])
        if variant.includes(Variant.AFC) and (
            report.consistency != 1.0 or report.max_logit_deviation >= LOGIT_TOLERANCE
        ):
            result.failed.append(f"consistency:{variant.value}")
    return result


def cmd_adversarial(config: ExperimentConfig) -> CommandResult:
    """
    Точность при худшем сдвиге из сетки.

    Метки - предсказания замороженной afc-сети с зерном network.seed + 1.
    """
    inputs = _inputs(config)
    grid = config.shift_grid
    labels = reference_labels(config.spec_for(Variant.AFC), inputs, config.network.seed + 1)
    result = CommandResult(header=['variant', 'grid', 'clean_accuracy', 'adversarial_accuracy'])
    for variant in config.variants:
        net = build_network(config.spec_for(variant))
        clean = clean_accuracy(net, inputs, labels, config.workers)
        adversarial = adversarial_accuracy(net, inputs, labels, grid, config.workers)
        result.results[variant.value] = {'clean_accuracy': clean, 'adversarial_accuracy': adversarial}
        result.rows.append([variant.value, str(grid), clean, adversarial])
        if variant.includes(Variant.AFC) and adversarial != clean:
            result.failed.append(f"adversarial:{variant.value}")
    result.results['labels'] = labels
    return result


def cmd_ablation(config: ExperimentConfig) -> CommandResult:
    """Целая и полупиксельная согласованность для каждой ступени лестницы."""
    inputs = _inputs(config)
    bound = config.shift_grid.bound
    grids = {'integer': make_grid(GridKind.INTEGER, bound), 'half': make_grid(GridKind.HALF, bound)}
    result = CommandResult(header=['variant', 'integer_consistency', 'half_consistency'])
    for variant in Variant:
        net = build_network(config.spec_for(variant))
        values = {
            name: consistency_report(net, inputs, grid, seed=config.seed, workers=config.workers).consistency
            for name, grid in grids.items()
        }
        result.results[variant.value] = values
        result.rows.append([variant.value, values['integer'], values['half']])
        if variant.includes(Variant.AFC) and min(values.values()) != 1.0:
            result.failed.append(f"ablation:{variant.value}")
    return result


COMMANDS: Dict[Experiment, Callable[[ExperimentConfig], CommandResult]] = {
    Experiment.VERIFY_SPECTRAL: cmd_verify_spectral,
    Experiment.EQUIVARIANCE: cmd_equivariance,
    Experiment.CONSISTENCY: cmd_consistency,
    Experiment.ADVERSARIAL: cmd_adversarial,
    Experiment.GRADCHECK: cmd_gradcheck,
    Experiment.ABLATION: cmd_ablation,
}


# Отчёты

def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Значение {type(value).__name__} не сериализуется")


def render_report(config: ExperimentConfig, result: CommandResult) -> str:
    """Текст отчёта в формате config.format."""
    if config.format == 'csv':
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(result.header)
        writer.writerows(result.rows)
        return buffer.getvalue()
    document = {
        'schema': REPORT_SCHEMA,
        'experiment': config.experiment.value,
        'config': config.to_dict(),
        'inputs': INPUTS_NOTE,
        'passed': not result.failed,
        'failed': result.failed,
        'results': result.results,
    }
    return json.dumps(document, sort_keys=True, indent=2, default=_json_default) + '\n'


def write_report(config: ExperimentConfig, text: str) -> None:
    """
    Запись отчёта в config.out или в stdout.

    Raises:
        ConfigError: Если путь недоступен для записи
    """
    if config.out is None:
        sys.stdout.write(text)
        return
    try:
        Path(config.out).write_text(text, encoding='utf-8')
    except OSError as error:
        raise ConfigError(error.strerror or str(error), path=config.out, key='out') from error


# Разбор аргументов

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='afc',
        description="Проверки и эксперименты alias-free свёрточных сетей."
    )
    parser.add_argument('experiment', nargs='?', choices=[item.value for item in Experiment],
                        help="Эксперимент (по умолчанию verify-spectral)")
    parser.add_argument('--config', help="YAML-файл конфигурации")
    parser.add_argument('--seed', type=int, help="Зерно входов, сдвигов и проверок")
    parser.add_argument('--samples', type=int, help="Число входов")
    parser.add_argument('--size', type=int, choices=IMAGE_SIZES, help="Размер входа H = W")
    parser.add_argument('--variant', choices=[item.value for item in Variant],
                        help="Только этот вариант сети")
    parser.add_argument('--grid', help="Сетка сдвигов: integer:B, half:B или frac:k")
    parser.add_argument('--delta', help="Сдвиг m1/n1,m2/n2")
    parser.add_argument('--out', help="Путь отчёта")
    parser.add_argument('--format', choices=FORMATS, help="Формат отчёта")
    parser.add_argument('--sizes', type=int, nargs='+', help="Длины сигналов для verify-spectral")
    parser.add_argument('--trials', type=int, help="Случайных сигналов на длину")
    parser.add_argument('--cases', type=int, help="Случаев gradcheck")
    parser.add_argument('--workers', type=int, help="Число потоков")
    parser.add_argument('--log-level', default='WARNING', choices=LOG_LEVELS)
    parser.add_argument('--corrupt-kernel', choices=MASK_KERNELS, help=argparse.SUPPRESS)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Слияние значений: умолчания < YAML-файл < флаги.

    Raises:
        ConfigError: При ошибках в файле или флагах
    """
    data: ConfigDict = ExperimentConfig.load(args.config) if args.config else {}
    path = args.config
    flags: ConfigDict = {}
    for key in ('experiment', 'seed', 'samples', 'grid', 'delta', 'out', 'format',
                'sizes', 'trials', 'cases', 'workers', 'corrupt_kernel'):
        value = getattr(args, key)
        if value is not None:
            flags[key] = value
    if args.variant is not None:
        flags['variants'] = [args.variant]
    if args.size is not None:
        network = data.get('network') or {}
        if not isinstance(network, dict):
            raise ConfigError("Ожидался словарь", path=path, key='network')
        flags['network'] = {**network, 'image_size': args.size}
    # Файл проверяется отдельно, чтобы ошибка указывала на него
    ExperimentConfig.from_dict(data, path=path)
    try:
        return ExperimentConfig.from_dict({**data, **flags})
    except ConfigError as error:
        raise ConfigError(str(error.args[0]), path='<flags>', key=error.key) from error


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа командной строки.

    Returns:
        Код выхода
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        config = resolve_config(args)
        logger.info("Эксперимент %s, зерно %d", config.experiment.value, config.seed)
        result = COMMANDS[config.experiment](config)
        write_report(config, render_report(config, result))
    except ConfigError as error:
        print(str(error), file=sys.stderr)
        return 2
    if result.failed:
        print(f"FAILED: {', '.join(result.failed)}", file=sys.stderr)
        return 1
    print(f"{config.experiment.value}: passed", file=sys.stderr)
    return 0
