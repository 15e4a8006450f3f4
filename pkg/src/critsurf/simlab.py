"""Bivariate data generators and the empirical-power harness.

The registry ships generic model families (simple regression with
several mean shapes, heteroscedastic regression, and latent
random-effect couplings).  The exact formulas are package defaults,
documented per family; studies that need other alternatives can
register their own generator or pass a custom test callable to the
harness, which also serves as the hook for comparing against an
external competitor statistic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .calibrate import CriticalSurfaces
from .depcore import Sample
from .errors import DataError, InputError
from .localtest import run_test

__all__ = [
    "ModelSpec",
    "PowerResult",
    "FAMILIES",
    "register_family",
    "generate",
    "empirical_power",
    "models_from_config",
]


@dataclass(frozen=True)
class ModelSpec:
    """A named sampling rule: family plus parameter overrides."""

    name: str
    family: str
    parameters: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass(frozen=True, slots=True)
class PowerResult:
    """Rejection frequency of the test under one model."""

    model: ModelSpec
    n: int
    repetitions: int
    rejections: int
    power: float
    mc_half_width: float

    def __post_init__(self) -> None:
        if not 0 <= self.rejections <= self.repetitions:
            raise InputError("rejections must lie in [0, repetitions]")


def _standard_normal_pair(rng, n):
    return rng.standard_normal(n), rng.standard_normal(n)


def _gen_independent_uniform(rng, n, p):
    return rng.uniform(size=n), rng.uniform(size=n)


def _gen_linear(rng, n, p):
    x = rng.uniform(size=n)
    return x, p["slope"] * x + p["noise"] * rng.standard_normal(n)


def _gen_root(rng, n, p):
    x = rng.uniform(size=n)
    return x, np.sqrt(x) + p["noise"] * rng.standard_normal(n)


def _gen_step(rng, n, p):
    x = rng.uniform(size=n)
    return x, p["height"] * (x > 0.5) + p["noise"] * rng.standard_normal(n)


def _gen_logarithmic(rng, n, p):
    x = rng.uniform(size=n)
    return x, np.log(x + p["offset"]) + p["noise"] * rng.standard_normal(n)


def _gen_w_shaped(rng, n, p):
    # mean curve ||4x-2|-1|: a W with zeros at 1/4 and 3/4, symmetric
    # about x = 1/2, so the population linear correlation vanishes
    x = rng.uniform(size=n)
    return x, np.abs(np.abs(4.0 * x - 2.0) - 1.0) + p["noise"] * rng.standard_normal(n)


def _gen_heteroscedastic_linear(rng, n, p):
    x = rng.uniform(size=n)
    return x, (p["base"] + p["scale"] * x) * rng.standard_normal(n)


def _gen_heteroscedastic_reciprocal(rng, n, p):
    x = rng.uniform(size=n)
    return x, rng.standard_normal(n) / (x + p["offset"])


def _gen_random_effect_linear(rng, n, p):
    z = rng.standard_normal(n)
    e1, e2 = _standard_normal_pair(rng, n)
    return z + p["noise"] * e1, z + p["noise"] * e2


def _gen_random_effect_quadratic(rng, n, p):
    z = rng.standard_normal(n)
    e1, e2 = _standard_normal_pair(rng, n)
    return z + p["noise"] * e1, z**2 + p["noise"] * e2


def _gen_random_effect_reciprocal(rng, n, p):
    # y explodes where the latent effect is near zero, i.e. where x sits
    # near the middle of its range: the dependence lives at the center
    # of the copula square rather than in its corners
    z = rng.standard_normal(n)
    e1, e2 = _standard_normal_pair(rng, n)
    denom = z + p["noise"] * e2
    denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
    return z + p["noise"] * e1, 1.0 / denom


_NONNEG = "nonnegative"
_POSITIVE = "positive"

# family -> (generator, {parameter: (default, constraint)})
FAMILIES = {
    "independent-uniform": (_gen_independent_uniform, {}),
    "linear": (_gen_linear, {"slope": (1.0, None), "noise": (0.5, _NONNEG)}),
    "root": (_gen_root, {"noise": (0.25, _NONNEG)}),
    "step": (_gen_step, {"height": (1.0, None), "noise": (0.5, _NONNEG)}),
    "logarithmic": (
        _gen_logarithmic,
        {"offset": (0.05, _POSITIVE), "noise": (0.5, _NONNEG)},
    ),
    "w-shaped": (_gen_w_shaped, {"noise": (0.2, _NONNEG)}),
    "heteroscedastic-linear": (
        _gen_heteroscedastic_linear,
        {"base": (0.2, _POSITIVE), "scale": (1.0, _NONNEG)},
    ),
    "heteroscedastic-reciprocal": (
        _gen_heteroscedastic_reciprocal,
        {"offset": (0.25, _POSITIVE)},
    ),
    "random-effect-linear": (_gen_random_effect_linear, {"noise": (0.5, _NONNEG)}),
    "random-effect-quadratic": (_gen_random_effect_quadratic, {"noise": (0.5, _NONNEG)}),
    "random-effect-reciprocal": (
        _gen_random_effect_reciprocal,
        {"noise": (0.25, _NONNEG)},
    ),
}


def register_family(name: str, generator, parameters: dict | None = None) -> None:
    """Add a user-defined family: generator(rng, n, params) -> (x, y)."""
    if name in FAMILIES:
        raise InputError(f"family {name!r} is already registered")
    FAMILIES[name] = (generator, dict(parameters or {}))


def _resolve_parameters(model: ModelSpec) -> tuple:
    if model.family not in FAMILIES:
        raise InputError(
            f"unknown family {model.family!r}; valid options: "
            f"{', '.join(sorted(FAMILIES))}"
        )
    generator, schema = FAMILIES[model.family]
    params = {name: default for name, (default, _) in schema.items()}
    for name, value in model.parameters.items():
        if name not in schema:
            raise InputError(
                f"family {model.family!r} has no parameter {name!r}; "
                f"valid options: {', '.join(sorted(schema)) or '(none)'}"
            )
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InputError(f"parameter {name!r} must be a number, got {value!r}")
        value = float(value)
        constraint = schema[name][1]
        if constraint == _NONNEG and value < 0:
            raise InputError(f"parameter {name!r} must be nonnegative, got {value}")
        if constraint == _POSITIVE and value <= 0:
            raise InputError(f"parameter {name!r} must be positive, got {value}")
        if not math.isfinite(value):
            raise InputError(f"parameter {name!r} must be finite, got {value}")
        params[name] = value
    return generator, params


def generate(model: ModelSpec, n: int, seed=None) -> Sample:
    """Draw n pairs from the model family, deterministically per seed.

    ``seed`` falls back to ``model.seed`` when omitted.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InputError(f"need an integer n >= 2, got {n!r}")
    generator, params = _resolve_parameters(model)
    rng = np.random.default_rng(model.seed if seed is None else seed)
    x, y = generator(rng, int(n), params)
    return Sample(x, y)


def empirical_power(
    model: ModelSpec,
    cs: CriticalSurfaces,
    repetitions: int,
    seed=None,
    test=None,
) -> PowerResult:
    """Rejection frequency over independent repetitions.

    Each repetition draws a fresh sample of size ``cs.config.n`` with a
    seed split per repetition index, so results do not depend on
    execution order or worker count.  ``test`` replaces the default
    critical-surface test with a custom callable Sample -> bool, the
    plug-in point for comparator statistics.
    """
    if not isinstance(repetitions, (int, np.integer)) or repetitions < 100:
        raise InputError(f"need repetitions >= 100, got {repetitions!r}")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    base_key = tuple(root.spawn_key)
    rejections = 0
    for i in range(repetitions):
        # counter-based, side-effect free split per repetition index
        gen_seed = np.random.SeedSequence(entropy=root.entropy, spawn_key=base_key + (i, 0))
        test_seed = np.random.SeedSequence(entropy=root.entropy, spawn_key=base_key + (i, 1))
        sample = generate(model, cs.config.n, seed=gen_seed)
        if test is None:
            rejected = run_test(sample, cs, seed=test_seed).reject_global
        else:
            rejected = bool(test(sample))
        rejections += rejected
    power = rejections / repetitions
    half_width = 1.96 * math.sqrt(power * (1.0 - power) / repetitions)
    return PowerResult(
        model=model,
        n=cs.config.n,
        repetitions=int(repetitions),
        rejections=rejections,
        power=power,
        mc_half_width=half_width,
    )


def models_from_config(text: str) -> list[ModelSpec]:
    """Parse a JSON model registry: one object or a list of objects.

    Each object needs ``name`` and ``family`` plus optional
    ``parameters`` (mapping) and ``seed``.  Problems are reported with
    the offending field named.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model config is not valid JSON: {exc}") from exc
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list):
        raise DataError("model config must be a JSON object or list of objects")
    models = []
    for idx, entry in enumerate(payload):
        where = f"model #{idx + 1}"
        if not isinstance(entry, dict):
            raise DataError(f"{where} is not a JSON object")
        for fieldname in ("name", "family"):
            if fieldname not in entry:
                raise DataError(f"{where} is missing field '{fieldname}'")
            if not isinstance(entry[fieldname], str):
                raise DataError(f"{where}: field '{fieldname}' must be a string")
        parameters = entry.get("parameters", {})
        if not isinstance(parameters, dict):
            raise DataError(f"{where}: field 'parameters' must be an object")
        seed = entry.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise DataError(f"{where}: field 'seed' must be an integer")
        unknown = set(entry) - {"name", "family", "parameters", "seed"}
        if unknown:
            raise DataError(f"{where} has unknown field '{sorted(unknown)[0]}'")
        model = ModelSpec(
            name=entry["name"],
            family=entry["family"],
            parameters=parameters,
            seed=seed,
        )
        try:
            _resolve_parameters(model)
        except InputError as exc:
            raise DataError(f"{where}: {exc}") from exc
        models.append(model)
    return models
