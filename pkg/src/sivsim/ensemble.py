"""Synthetic populations of SiV- emitters in two orientation classes.

Each emitter gets a class, a Gaussian transverse strain and a target line-C
position (class mean plus Gaussian scatter). The axial strain is then solved
so that line C lands exactly on the target, which keeps the within-class
position spread equal to ``within_class_spread`` whatever the transverse
strain does to the doublet splittings.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError
from .overlap import LineRecord
from .rates import RateParams, effective_linewidth
from .structure import (AXIAL_QUADRATIC_COEFF, CLASS_AXIAL_SHIFT, EmitterModel,
                        strained_model)

#: Seed whose 20-emitter sample reproduces the adjacent-gap counts of the
#: measured site survey (11 gaps below 94 MHz, 4 below 28.2 MHz).
FIXTURE_SEED = 17
DEFAULT_WITHIN_CLASS_SPREAD = 250e6


@dataclass(frozen=True)
class EnsembleConfig:
    n_emitters: int = 20
    class_gap: float = CLASS_AXIAL_SHIFT["set2"] - CLASS_AXIAL_SHIFT["set1"]
    within_class_spread: float = DEFAULT_WITHIN_CLASS_SPREAD
    transverse_strain_spread: float = 2e9
    class_fraction: float = 0.5
    seed: int = FIXTURE_SEED
    base_shift: float = CLASS_AXIAL_SHIFT["set1"]
    temperature: float = 4.0
    excited_scale: float = 1.0
    ground_kappa: float = 0.0
    excited_kappa: float = AXIAL_QUADRATIC_COEFF
    rates: RateParams = field(default_factory=RateParams)

    def __post_init__(self):
        if self.n_emitters < 1:
            raise DomainError("n_emitters must be >= 1")
        if self.within_class_spread < 0 or self.transverse_strain_spread < 0:
            raise DomainError("spreads must be >= 0")
        if not 0 <= self.class_fraction <= 1:
            raise DomainError("class_fraction must lie in [0, 1]")


@dataclass
class EnsembleSample:
    emitters: list
    line_records: list
    config: EnsembleConfig | None = None

    def positions(self, orientation_class=None):
        return np.array([r.position for r in self.line_records
                         if orientation_class in (None, r.orientation_class)])

    def ground_splittings(self):
        return np.array([m.ground_levels().splitting for m in self.emitters])


def generate(config: EnsembleConfig) -> EnsembleSample:
    rng = np.random.Generator(np.random.Philox(config.seed))
    n = config.n_emitters
    u_class = rng.random(n)
    z_pos = rng.standard_normal(n)
    z_trans = rng.standard_normal(n)

    kw = dict(excited_scale=config.excited_scale, ground_kappa=config.ground_kappa,
              excited_kappa=config.excited_kappa, rates=config.rates)
    k_net = config.excited_kappa * config.excited_scale ** 2 - config.ground_kappa
    if k_net <= 0:
        raise DomainError("axial strain must shift line C upward (net coefficient > 0)")
    unstrained_c = strained_model(**kw).line_offset("C")

    emitters, records = [], []
    for i in range(n):
        cls = "set2" if u_class[i] < config.class_fraction else "set1"
        mean = config.base_shift + (config.class_gap if cls == "set2" else 0.0)
        target = unstrained_c + mean + config.within_class_spread * z_pos[i]
        eps_t = config.transverse_strain_spread * z_trans[i]
        residual = target - strained_model(0.0, eps_t, **kw).line_offset("C")
        eps_a = math.sqrt(max(residual, 0.0) / k_net)
        m = strained_model(eps_a, eps_t, orientation_class=cls, **kw)
        emitters.append(m)
        records.append(LineRecord(f"siv{i + 1:02d}", cls, float(m.line_offset("C")),
                                  float(effective_linewidth(m, config.temperature, "C"))))
    return EnsembleSample(emitters, records, config)


def class_separation(sample: EnsembleSample) -> float:
    """Mean line-C position of set2 minus that of set1 (Hz)."""
    a, b = sample.positions("set1"), sample.positions("set2")
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("both orientation classes must be present")
    return float(b.mean() - a.mean())


def ground_splitting_spread(sample: EnsembleSample) -> float:
    """Half of the max-min range of the ground splitting (C - D) across emitters."""
    s = sample.ground_splittings()
    return 0.5 * float(s.max() - s.min())


def model_to_dict(m: EmitterModel) -> dict:
    return asdict(m)
