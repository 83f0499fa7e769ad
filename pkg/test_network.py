"""
Тесты построения сети, прямого прохода и сохранения весов.
"""

import json
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from app.modules.afc_types import ConfigError, ShapeError, Variant
from app.modules.metrics import make_inputs
from app.modules.network import IMAGE_SIZES, NetworkSpec, build_network, forward, load_weights, save_weights
from app.modules.spectral import fractional_shift_2d
from app.modules.types import LayerProtocol, RationalShift


SMALL = NetworkSpec(image_size=16)
HALF = RationalShift(Fraction(1, 2), Fraction(1, 2))


def test_same_seed_same_weights():
    first = build_network(SMALL).parameters()
    second = build_network(SMALL).parameters()
    assert list(first) == list(second)
    assert all(np.array_equal(first[name], second[name]) for name in first)
    other = build_network(replace(SMALL, seed=1)).parameters()
    assert not np.array_equal(first['stem.conv.weight'], other['stem.conv.weight'])


def test_afc_logits_shape():
    """Вход 32x32, ширины [8, 16]: логиты длины classes, конечные."""
    net = build_network(NetworkSpec())
    x = make_inputs(1, net.spec.input_shape, seed=0)[0]
    logits, taps = forward(net, x)
    assert logits.shape == (10,)
    assert np.all(np.isfinite(logits))
    assert taps == []


def test_parameter_audit():
    """Свёртки и нормы одинаковы; afc добавляет 3 коэффициента на канал активации."""
    baseline = build_network(replace(SMALL, variant=Variant.BASELINE)).parameters()
    afc = build_network(SMALL).parameters()
    shared = {name: value for name, value in afc.items() if not name.endswith('.coefficients')}
    assert list(shared) == list(baseline)
    assert all(np.array_equal(shared[name], baseline[name]) for name in shared)

    activation_channels = 8 + 8 * 4 + 16 * 4
    coefficients = sum(value.size for name, value in afc.items() if name.endswith('.coefficients'))
    assert coefficients == 3 * activation_channels
    assert build_network(SMALL).parameter_count() == build_network(
        replace(SMALL, variant=Variant.BASELINE)
    ).parameter_count() + 3 * activation_channels


@pytest.mark.parametrize('variant', list(Variant))
def test_zero_input_gives_head_bias(variant):
    spec = replace(SMALL, variant=variant, init_std=0.0)
    bias = np.linspace(-1.0, 1.0, spec.classes)
    net = build_network(spec, {'head.linear.bias': bias})
    logits, _ = forward(net, np.zeros(spec.input_shape))
    np.testing.assert_allclose(logits, bias)


def test_forward_is_deterministic():
    net = build_network(replace(SMALL, variant=Variant.BASELINE))
    x = make_inputs(1, net.spec.input_shape, seed=1)[0]
    assert np.array_equal(forward(net, x)[0], forward(net, x)[0])


def test_forward_shape_mismatch():
    net = build_network(SMALL)
    with pytest.raises(ShapeError):
        forward(net, np.zeros((3, 32, 32)))


def test_taps_and_strides():
    net = build_network(SMALL)
    x = make_inputs(1, net.spec.input_shape, seed=2)[0]
    _, taps = forward(net, x, capture=True)
    strides = {tap.name: tap.cumulative_stride for tap in taps}
    assert list(strides) == [
        'stem',
        'stage0.block0.dwconv', 'stage0.block0.norm', 'stage0.block0.pwconv1',
        'stage0.block0.act', 'stage0.block0.pwconv2', 'stage0.block0',
        'stage1.downsample',
        'stage1.block0.dwconv', 'stage1.block0.norm', 'stage1.block0.pwconv1',
        'stage1.block0.act', 'stage1.block0.pwconv2', 'stage1.block0',
        'head.pool', 'head.norm', 'head.linear',
    ]
    assert strides['stem'] == 4
    assert strides['stage0.block0'] == 4
    assert strides['stage1.block0.act'] == 8
    assert strides['head.linear'] == 16
    assert taps[-1].output.shape == (10, 1, 1)


@pytest.mark.parametrize('shift', [
    HALF,
    RationalShift(Fraction(1, 3), Fraction(-5, 8)),
    RationalShift(3, 1),
])
def test_afc_logits_are_shift_invariant(shift):
    net = build_network(NetworkSpec())
    for x in make_inputs(2, net.spec.input_shape, seed=3):
        before = net(x)
        after = net(fractional_shift_2d(x, shift))
        assert np.max(np.abs(before - after)) < 1e-6
        assert np.argmax(before) == np.argmax(after)


@pytest.fixture(scope='module')
def baseline_net():
    return build_network(replace(NetworkSpec(), variant=Variant.BASELINE))


def test_baseline_logits_change_under_half_pixel_shift(baseline_net):
    """Базовая сеть - отрицательный контроль: логиты меняются почти на каждом входе."""
    changed = 0
    for x in make_inputs(100, baseline_net.spec.input_shape, seed=4):
        before = baseline_net(x)
        after = baseline_net(fractional_shift_2d(x, HALF))
        changed += np.max(np.abs(before - after)) > 1e-2 * np.max(np.abs(before))
    assert changed >= 95


@pytest.mark.parametrize('variant', list(Variant))
def test_every_variant_runs(variant):
    net = build_network(replace(SMALL, variant=variant))
    logits = net(make_inputs(1, net.spec.input_shape, seed=5)[0])
    assert np.all(np.isfinite(logits))


def test_variant_structure():
    """Ступени лестницы добавляют BlurPool и полиномиальные активации."""
    names = {variant: list(build_network(replace(SMALL, variant=variant)).parameters()) for variant in Variant}
    assert 'stem.act.coefficients' not in names[Variant.BLURPOOL]
    assert 'stem.act.coefficients' in names[Variant.FIRST_ACT]
    assert 'stage0.block0.act.coefficients' not in names[Variant.BASELINE]
    assert 'stage0.block0.act.coefficients' in names[Variant.POLY]

    baseline = build_network(replace(SMALL, variant=Variant.BASELINE))
    blur = build_network(replace(SMALL, variant=Variant.BLURPOOL))
    assert baseline.layers[0].children[0].stride == 4
    assert blur.layers[0].children[0].stride == 1
    assert blur.layers[0].children[-1].stride == 4


def test_spec_validation():
    with pytest.raises(ConfigError) as error:
        NetworkSpec(image_size=20)
    assert error.value.key == 'image_size'
    with pytest.raises(ConfigError) as error:
        NetworkSpec(image_size=48, widths=(8,), depths=(1,))
    assert error.value.key == 'image_size'
    assert all(NetworkSpec(image_size=size).image_size == size for size in IMAGE_SIZES)
    with pytest.raises(ConfigError):
        NetworkSpec(widths=(8, 16), depths=(1,))
    with pytest.raises(ConfigError) as error:
        NetworkSpec.from_dict({'image_size': 16, 'colour': 'red'}, path='net.yaml')
    assert str(error.value).startswith('net.yaml: colour: ')


def test_spec_yaml_round_trip(tmp_path):
    spec = NetworkSpec(variant=Variant.BASELINE, image_size=16, widths=(4, 8), depths=(2, 1), seed=7)
    path = tmp_path / 'net.yaml'
    spec.dump(path)
    assert NetworkSpec.load(path) == spec
    assert 'stem_stride: 4' in path.read_text(encoding='utf-8')


def test_weights_round_trip(tmp_path):
    net = build_network(replace(SMALL, seed=11))
    path = tmp_path / 'weights.bin'
    sidecar = save_weights(net, path)
    assert path.stat().st_size == 8 * net.parameter_count()

    document = json.loads(sidecar.read_text(encoding='utf-8'))
    assert document['dtype'] == '<f8'
    assert document['tensors'][0]['name'] == 'stem.conv.weight'

    restored = load_weights(path)
    assert restored.spec == net.spec
    x = make_inputs(1, net.spec.input_shape, seed=6)[0]
    assert np.array_equal(restored(x), net(x))


def test_unknown_parameter_override():
    with pytest.raises(ShapeError):
        build_network(SMALL, {'stem.conv.weight': np.zeros((1, 1, 1, 1))})
    with pytest.raises(ShapeError):
        build_network(SMALL, {'missing.weight': np.zeros(1)})


def test_layers_follow_protocol():
    net = build_network(SMALL)
    assert all(isinstance(layer, LayerProtocol) for layer in net.layers)
    assert all(isinstance(child, LayerProtocol) for child in net.layers[0].children)


def test_shift_group_law():
    """Сумма сдвигов - один сдвиг, обратный сдвиг возвращает вход."""
    a = RationalShift(Fraction(1, 3), Fraction(-5, 8))
    b = RationalShift(Fraction(2, 3), Fraction(1, 8))
    assert a + b == RationalShift(1, Fraction(-1, 2))
    assert a + -a == RationalShift(0, 0)
    assert (a + -a).is_zero()

    x = make_inputs(1, SMALL.input_shape, seed=7)[0]
    np.testing.assert_allclose(
        fractional_shift_2d(fractional_shift_2d(x, a), b),
        fractional_shift_2d(x, a + b),
        atol=1e-9
    )
    np.testing.assert_allclose(fractional_shift_2d(fractional_shift_2d(x, a), -a), x, atol=1e-9)
