"""
Модули приложения.

Этот пакет содержит спектральные ядра, эталоны, слои, сети, метрики
и командную строку alias-free свёрточных сетей.
"""

from .spectral import (
    lowpass_mask,
    upsample_mask,
    ideal_lpf_1d,
    upsample_1d,
    downsample_1d,
    fractional_shift_1d,
    apply_separable_2d,
    fractional_shift_2d,
    sanitize
)
from .oracle import (
    naive_dft,
    naive_idft,
    naive_circular_convolve,
    sinc_reconstruct,
    oracle_shift,
    oracle_alias_free_poly
)
from .layers import (
    PolyActivation,
    ConvWeights,
    NormParams,
    circular_conv2d,
    blurpool,
    alias_free_poly,
    lpf_poly,
    poly_eval,
    poly_coeff_gradient,
    af_layernorm,
    layernorm_pixelwise,
    gelu,
    fit_poly_coeffs,
    fit_gelu_coeffs
)
from .network import (
    NetworkSpec,
    Network,
    build_network,
    forward,
    save_weights,
    load_weights
)
from .metrics import (
    ShiftGrid,
    EquivarianceReport,
    ConsistencyReport,
    layer_diff,
    equivariance_report,
    make_grid,
    make_inputs,
    consistency,
    consistency_report,
    adversarial_accuracy,
    clean_accuracy,
    reference_labels
)
from .verification import SuiteReport, run_spectral_suite, run_gradcheck
from .cli import ExperimentConfig, main
from .types import (
    Signal1D,
    Tensor3D,
    DftMask,
    RationalShift,
    LayerTap,
    AxisOperation,
    LayerProtocol
)
from .afc_types import (
    Variant,
    NormMode,
    GridKind,
    Experiment,
    ActivationKind,
    AliasFreeError,
    DomainError,
    ShapeError,
    ConfigError,
    VerificationError
)

__all__ = [
    # Спектральные ядра
    'lowpass_mask',
    'upsample_mask',
    'ideal_lpf_1d',
    'upsample_1d',
    'downsample_1d',
    'fractional_shift_1d',
    'apply_separable_2d',
    'fractional_shift_2d',
    'sanitize',

    # Эталоны
    'naive_dft',
    'naive_idft',
    'naive_circular_convolve',
    'sinc_reconstruct',
    'oracle_shift',
    'oracle_alias_free_poly',

    # Слои
    'PolyActivation',
    'ConvWeights',
    'NormParams',
    'circular_conv2d',
    'blurpool',
    'alias_free_poly',
    'lpf_poly',
    'poly_eval',
    'poly_coeff_gradient',
    'af_layernorm',
    'layernorm_pixelwise',
    'gelu',
    'fit_poly_coeffs',
    'fit_gelu_coeffs',

    # Сети
    'NetworkSpec',
    'Network',
    'build_network',
    'forward',
    'save_weights',
    'load_weights',

    # Метрики
    'ShiftGrid',
    'EquivarianceReport',
    'ConsistencyReport',
    'layer_diff',
    'equivariance_report',
    'make_grid',
    'make_inputs',
    'consistency',
    'consistency_report',
    'adversarial_accuracy',
    'clean_accuracy',
    'reference_labels',

    # Проверки и командная строка
    'SuiteReport',
    'run_spectral_suite',
    'run_gradcheck',
    'ExperimentConfig',
    'main',

    # Типы
    'Signal1D',
    'Tensor3D',
    'DftMask',
    'RationalShift',
    'LayerTap',
    'AxisOperation',
    'LayerProtocol',

    # Перечисления и ошибки
    'Variant',
    'NormMode',
    'GridKind',
    'Experiment',
    'ActivationKind',
    'AliasFreeError',
    'DomainError',
    'ShapeError',
    'ConfigError',
    'VerificationError'
]
