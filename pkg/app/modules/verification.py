"""
Наборы проверок спектральных ядер и градиентов против эталонов.

Каждая проверка прогоняет случайные сигналы из генератора с фиксированным
зерном и сравнивает быструю реализацию с медленным эталоном из oracle.
Результат - максимальное отклонение по всем случаям и первый случай,
нарушивший допуск (для воспроизведения).
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import oracle, spectral
from .afc_types import CheckResult, FailingCase, VerificationError
from .layers import PolyActivation, alias_free_poly, poly_coeff_gradient, poly_eval
from .types import FloatArray


logger = logging.getLogger(__name__)

DEFAULT_SIZES = (2, 3, 4, 5, 8, 15, 16, 32)
DEFAULT_TRIALS = 100
SPECTRAL_TOLERANCE = 1e-9
POLY_TOLERANCE = 1e-8
GRADIENT_TOLERANCE = 1e-6
GRADIENT_STEP = 1e-5
GRADIENT_CASES = 50
POLY_SHAPE = (1, 16, 16)
POLY_SCALES = (1.0, 7.0)
MASK_KERNELS = ('lowpass', 'upsample')
CUTOFFS = (Fraction(1), Fraction(3, 4), Fraction(1, 2), Fraction(1, 3), Fraction(1, 4))
FACTORS = (2, 3, 4)


@dataclass
class _Check:
    """Накопитель результатов одной проверки."""

    name: str
    tolerance: float
    cases: int = 0
    max_deviation: float = 0.0
    failure: Optional[FailingCase] = None

    def record(self, deviation: float, **case) -> None:
        self.cases += 1
        self.max_deviation = max(self.max_deviation, deviation)
        if deviation >= self.tolerance and self.failure is None:
            signal = case.pop('signal', None)
            self.failure = FailingCase(check=self.name, deviation=deviation, **case)
            if signal is not None:
                self.failure['signal'] = np.asarray(signal, dtype=np.float64).ravel().tolist()
            logger.warning("Проверка %s: отклонение %.3e в случае %s", self.name, deviation, case)

    def result(self) -> CheckResult:
        return CheckResult(
            check=self.name,
            max_deviation=self.max_deviation,
            tolerance=self.tolerance,
            cases=self.cases,
            passed=self.failure is None
        )


@dataclass
class SuiteReport:
    """
    Итог набора проверок.

    Attributes:
        checks: Результаты по проверкам в порядке выполнения
        failures: Первые нарушившие допуск случаи
    """

    checks: List[CheckResult] = field(default_factory=list)
    failures: List[FailingCase] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check['passed'] for check in self.checks)

    def add(self, check: _Check) -> None:
        self.checks.append(check.result())
        if check.failure is not None:
            self.failures.append(check.failure)

    def raise_for_failure(self) -> None:
        """
        Raises:
            VerificationError: С первым нарушившим допуск случаем
        """
        if self.failures:
            case = self.failures[0]
            raise VerificationError(f"Проверка {case['check']} не пройдена", case['check'], case)


def _max_abs(a: FloatArray, b: FloatArray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _nyquist_clean(x: FloatArray) -> FloatArray:
    return oracle.naive_lpf(x, 1)


def _check_masks(sizes: Sequence[int], corrupt_kernel: Optional[str]) -> List[_Check]:
    checks = {name: _Check(f"mask:{name}", SPECTRAL_TOLERANCE) for name in MASK_KERNELS}
    kernels: Dict[str, Tuple[Callable, Callable, Sequence]] = {
        'lowpass': (spectral.lowpass_mask, oracle.reference_lowpass_mask, CUTOFFS),
        'upsample': (spectral.upsample_mask, oracle.reference_upsample_mask, FACTORS),
    }
    for name, (kernel, reference, params) in kernels.items():
        for n in sizes:
            for param in params:
                mask = np.array(kernel(n, param))
                if name == corrupt_kernel:
                    mask[0] = 1.0 - mask[0]
                expected = reference(n, float(param) if name == 'lowpass' else param)
                checks[name].record(_max_abs(mask, expected), size=n, params={'param': str(param)})
    return list(checks.values())


def run_spectral_suite(
    sizes: Sequence[int] = DEFAULT_SIZES,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    corrupt_kernel: Optional[str] = None
) -> SuiteReport:
    """
    Сравнение спектральных операций с эталонами на случайных сигналах.

    Проверки: ДПФ, маски фильтров, ФНЧ (через ДПФ и через циклическую
    свёртку с импульсной характеристикой), upsample против интерполянта,
    downsample, дробный сдвиг против интерполянта, возврат после
    upsample/downsample и alias-free активация против частой сетки.

    Args:
        sizes: Длины сигналов
        trials: Число случайных сигналов на длину
        seed: Зерно генератора
        corrupt_kernel: Имя маски ('lowpass' или 'upsample'), один бин
            которой портится перед сравнением; для проверки пути отказа

    Returns:
        SuiteReport
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    for check in _check_masks(sizes, corrupt_kernel):
        report.add(check)

    dft = _Check('dft', SPECTRAL_TOLERANCE)
    lpf = _Check('ideal_lpf', SPECTRAL_TOLERANCE)
    lpf_conv = _Check('ideal_lpf:convolution', SPECTRAL_TOLERANCE)
    up = _Check('upsample', SPECTRAL_TOLERANCE)
    down = _Check('downsample', SPECTRAL_TOLERANCE)
    shift = _Check('fractional_shift', SPECTRAL_TOLERANCE)
    round_trip = _Check('round_trip', SPECTRAL_TOLERANCE)

    for n in sizes:
        for trial in range(trials):
            x = rng.standard_normal(n)
            case = {'size': n, 'trial': trial, 'seed': seed, 'signal': x}

            dft.record(float(np.max(np.abs(spectral.dft(x) - oracle.naive_dft(x)))), **dict(case))

            cutoff = CUTOFFS[trial % len(CUTOFFS)]
            fast = spectral.ideal_lpf_1d(x, cutoff)
            lpf.record(_max_abs(fast, oracle.naive_lpf(x, float(cutoff))),
                       params={'cutoff': str(cutoff)}, **dict(case))
            impulse = oracle.naive_idft(oracle.reference_lowpass_mask(n, float(cutoff))).real
            lpf_conv.record(_max_abs(fast, oracle.naive_circular_convolve(x, impulse)),
                            params={'cutoff': str(cutoff)}, **dict(case))

            factor = FACTORS[trial % len(FACTORS)]
            grid = np.arange(n * factor) / factor
            up.record(_max_abs(spectral.upsample_1d(x, factor), oracle.sinc_reconstruct(x, grid)),
                      params={'factor': factor}, **dict(case))

            for s in FACTORS:
                if n % s == 0:
                    down.record(_max_abs(spectral.downsample_1d(x, s), oracle.naive_downsample(x, s)),
                                params={'factor': s}, **dict(case))

            clean = _nyquist_clean(x)
            denominator = int(rng.integers(1, 5))
            numerator = int(rng.integers(-2 * denominator, 2 * denominator + 1))
            shifted = spectral.fractional_shift_1d(clean, numerator, denominator)
            shift.record(_max_abs(shifted, oracle.oracle_shift(clean, numerator / denominator)),
                         params={'m': numerator, 'n': denominator}, **{**case, 'signal': clean})

            back = spectral.downsample_1d(spectral.upsample_1d(clean, factor), factor)
            round_trip.record(_max_abs(back, clean), params={'factor': factor}, **{**case, 'signal': clean})

    for check in (dft, lpf, lpf_conv, up, down, shift, round_trip):
        report.add(check)
    report.add(_check_alias_free_poly(rng, trials, seed))
    logger.info("Спектральный набор: %d проверок, пройден: %s", len(report.checks), report.passed)
    return report


def _check_alias_free_poly(rng: np.random.Generator, trials: int, seed: int) -> _Check:
    check = _Check('alias_free_poly', POLY_TOLERANCE)
    for trial in range(trials):
        x = rng.standard_normal(POLY_SHAPE)
        scale = POLY_SCALES[trial % len(POLY_SCALES)]
        poly = PolyActivation(rng.standard_normal((POLY_SHAPE[0], 3)), scale)
        fast = alias_free_poly(x, poly)
        check.record(_max_abs(fast, oracle.oracle_alias_free_poly(x, poly)), size=POLY_SHAPE[1],
                     trial=trial, seed=seed, params={'scale': scale})
    return check


def _loss(x: FloatArray, coefficients: FloatArray, scale: float, upstream: FloatArray) -> float:
    return float(np.sum(upstream * poly_eval(x, PolyActivation(coefficients, scale))))


def run_gradcheck(
    cases: int = GRADIENT_CASES,
    seed: int = 0,
    step: float = GRADIENT_STEP
) -> SuiteReport:
    """
    Проверка poly_coeff_gradient центральными конечными разностями.

    Отклонение меряется как |g - g_fd| / max(1, |g|, |g_fd|).
    """
    rng = np.random.default_rng(seed)
    check = _Check('poly_coeff_gradient', GRADIENT_TOLERANCE)
    for trial in range(cases):
        channels = int(rng.integers(1, 4))
        size = int(rng.integers(2, 9))
        scale = POLY_SCALES[trial % len(POLY_SCALES)]
        x = rng.standard_normal((channels, size, size))
        upstream = rng.standard_normal(x.shape)
        coefficients = rng.standard_normal((channels, 3))
        analytic = poly_coeff_gradient(x, PolyActivation(coefficients, scale), upstream)
        numeric = np.zeros_like(analytic)
        for index in np.ndindex(*coefficients.shape):
            plus = coefficients.copy()
            minus = coefficients.copy()
            plus[index] += step
            minus[index] -= step
            numeric[index] = (_loss(x, plus, scale, upstream) - _loss(x, minus, scale, upstream)) / (2 * step)
        denominator = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        check.record(float(np.max(np.abs(analytic - numeric) / denominator)),
                     trial=trial, seed=seed, params={'scale': scale, 'shape': list(x.shape)})
    report = SuiteReport()
    report.add(check)
    return report
