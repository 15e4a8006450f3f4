"""Model families and the empirical-power harness."""

import numpy as np
import pytest

from critsurf import (
    FAMILIES,
    DataError,
    InputError,
    ModelSpec,
    compute_ranks,
    empirical_power,
    generate,
    models_from_config,
    register_family,
)


EXPECTED_FAMILIES = {
    "independent-uniform",
    "linear",
    "root",
    "step",
    "logarithmic",
    "w-shaped",
    "heteroscedastic-linear",
    "heteroscedastic-reciprocal",
    "random-effect-linear",
    "random-effect-quadratic",
    "random-effect-reciprocal",
}


def test_registry_ships_expected_families():
    assert EXPECTED_FAMILIES <= set(FAMILIES)


def test_generate_is_deterministic_per_seed():
    model = ModelSpec(name="m", family="linear", parameters={"noise": 0.3})
    a = generate(model, 50, seed=4)
    b = generate(model, 50, seed=4)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    c = generate(model, 50, seed=5)
    assert not np.array_equal(a.y, c.y)


def test_generate_uses_model_seed_as_default():
    model = ModelSpec(name="m", family="root", seed=11)
    a = generate(model, 30)
    b = generate(model, 30, seed=11)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_all_families_produce_finite_samples():
    for family in EXPECTED_FAMILIES:
        sample = generate(ModelSpec(name=family, family=family), 200, seed=1)
        assert sample.n == 200  # Sample validation guarantees finiteness


def test_unknown_family_lists_options():
    with pytest.raises(InputError) as excinfo:
        generate(ModelSpec(name="m", family="no-such-model"), 20, seed=0)
    assert "linear" in str(excinfo.value) and "w-shaped" in str(excinfo.value)


def test_parameter_validation():
    with pytest.raises(InputError, match="no parameter"):
        generate(ModelSpec(name="m", family="linear", parameters={"bogus": 1.0}), 20, seed=0)
    with pytest.raises(InputError, match="nonnegative"):
        generate(ModelSpec(name="m", family="linear", parameters={"noise": -0.1}), 20, seed=0)
    with pytest.raises(InputError, match="positive"):
        generate(ModelSpec(name="m", family="logarithmic", parameters={"offset": 0.0}), 20, seed=0)
    with pytest.raises(InputError, match="number"):
        generate(ModelSpec(name="m", family="linear", parameters={"noise": "big"}), 20, seed=0)
    with pytest.raises(InputError):
        generate(ModelSpec(name="m", family="linear"), 1, seed=0)


def test_noiseless_linear_is_comonotone():
    model = ModelSpec(name="m", family="linear", parameters={"noise": 0.0})
    sample = generate(model, 80, seed=9)
    ranks = compute_ranks(sample, seed=0)
    assert np.array_equal(ranks.r, ranks.s)


def test_w_shape_has_negligible_linear_correlation():
    model = ModelSpec(name="m", family="w-shaped", parameters={"noise": 0.0})
    sample = generate(model, 1000, seed=13)
    assert abs(np.corrcoef(sample.x, sample.y)[0, 1]) < 0.1


def test_register_family_roundtrip():
    def constant_pair(rng, n, params):
        x = rng.uniform(size=n)
        return x, x * params["gain"]

    register_family("test-custom-gain", constant_pair, {"gain": (2.0, None)})
    try:
        sample = generate(ModelSpec(name="m", family="test-custom-gain"), 25, seed=2)
        assert np.allclose(sample.y, 2.0 * sample.x)
        with pytest.raises(InputError, match="already registered"):
            register_family("test-custom-gain", constant_pair)
    finally:
        del FAMILIES["test-custom-gain"]


# ---------------------------------------------------------------------------
# empirical power
# ---------------------------------------------------------------------------


def test_power_result_fields(cs60):
    model = ModelSpec(name="null", family="independent-uniform")
    result = empirical_power(model, cs60, 200, seed=3)
    assert result.n == 60
    assert result.repetitions == 200
    assert 0 <= result.rejections <= 200
    assert result.power == result.rejections / 200
    expected_hw = 1.96 * np.sqrt(result.power * (1 - result.power) / 200)
    assert result.mc_half_width == pytest.approx(expected_hw, abs=1e-15)


def test_power_is_seed_deterministic(cs60):
    model = ModelSpec(name="lin", family="linear", parameters={"noise": 1.0})
    a = empirical_power(model, cs60, 150, seed=8)
    b = empirical_power(model, cs60, 150, seed=8)
    assert a.rejections == b.rejections


def test_null_model_size_within_mc_noise(cs60):
    model = ModelSpec(name="null", family="independent-uniform")
    result = empirical_power(model, cs60, 500, seed=21)
    se = np.sqrt(0.05 * 0.95 / 500)
    assert abs(result.power - 0.05) <= 4 * se + 0.01  # granularity slack at 4e3 replicates


def test_noiseless_linear_power_is_one(cs60):
    model = ModelSpec(name="lin0", family="linear", parameters={"noise": 0.0})
    result = empirical_power(model, cs60, 120, seed=2)
    assert result.power == 1.0


def test_power_grows_with_sample_size(cs25, cs100, cs400):
    # noisy linear alternative at fixed signal-to-noise, one inversion
    # within twice the Monte-Carlo half width allowed
    model = ModelSpec(name="lin", family="linear", parameters={"noise": 1.0})
    results = [empirical_power(model, cs, 400, seed=6) for cs in (cs25, cs100, cs400)]
    powers = [r.power for r in results]
    inversions = [
        (i, powers[i] - powers[i + 1])
        for i in range(2)
        if powers[i] > powers[i + 1]
    ]
    assert len(inversions) <= 1
    assert all(gap <= 2 * results[i].mc_half_width for i, gap in inversions)
    assert powers[2] > powers[0]


def test_custom_test_hook(cs60):
    model = ModelSpec(name="null", family="independent-uniform")
    never = empirical_power(model, cs60, 100, seed=1, test=lambda sample: False)
    assert never.power == 0.0
    always = empirical_power(model, cs60, 100, seed=1, test=lambda sample: True)
    assert always.power == 1.0
    # e.g. a plug-in comparator: reject when |pearson| is large
    pearson = empirical_power(
        ModelSpec(name="lin", family="linear", parameters={"noise": 0.0}),
        cs60,
        100,
        seed=1,
        test=lambda sample: abs(np.corrcoef(sample.x, sample.y)[0, 1]) > 0.5,
    )
    assert pearson.power == 1.0


def test_power_rejects_too_few_repetitions(cs60):
    with pytest.raises(InputError, match="repetitions"):
        empirical_power(ModelSpec(name="m", family="linear"), cs60, 99, seed=0)


# ---------------------------------------------------------------------------
# model config parsing
# ---------------------------------------------------------------------------


def test_models_from_config_single_and_list():
    single = models_from_config('{"name": "a", "family": "linear"}')
    assert len(single) == 1 and single[0].family == "linear"
    many = models_from_config(
        '[{"name": "a", "family": "linear", "parameters": {"noise": 0.2}},'
        ' {"name": "b", "family": "w-shaped", "seed": 3}]'
    )
    assert [m.name for m in many] == ["a", "b"]
    assert many[0].parameters == {"noise": 0.2}
    assert many[1].seed == 3


@pytest.mark.parametrize(
    "text,needle",
    [
        ("{ not json", "JSON"),
        ('{"family": "linear"}', "name"),
        ('{"name": "a"}', "family"),
        ('{"name": "a", "family": 3}', "family"),
        ('{"name": "a", "family": "nope"}', "unknown family"),
        ('{"name": "a", "family": "linear", "parameters": {"zz": 1}}', "zz"),
        ('{"name": "a", "family": "linear", "parameters": 5}', "parameters"),
        ('{"name": "a", "family": "linear", "seed": "x"}', "seed"),
        ('{"name": "a", "family": "linear", "extra": 1}', "extra"),
        ('[{"name": "a", "family": "linear"}, 4]', "model #2"),
    ],
)
def test_models_from_config_names_bad_field(text, needle):
    with pytest.raises(DataError, match=needle):
        models_from_config(text)
