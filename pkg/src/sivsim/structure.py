"""Fine structure of the SiV- zero-phonon line.

Both the ground and the excited state are orbital doublets split by
spin-orbit coupling. Transverse strain mixes the two branches and only
enters off-diagonally, so the doublet splitting grows as
``sqrt(lambda**2 + 4 * eps_t**2)``. Axial strain is even under inversion and
shifts both branches together by ``kappa * eps_a**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import rates as _rates
from .errors import DomainError
from .rates import LINE_LABELS, LINE_LEVELS, E_LOWER, E_UPPER, G_LOWER, RateParams
from .units import ZPL_REFERENCE_HZ, check_temperature

GROUND_SPIN_ORBIT = 46.68e9
EXCITED_SPIN_ORBIT = 258.1e9
AXIAL_QUADRATIC_COEFF = 1.0e-9  # per Hz
DEBYE_WALLER = 0.70
ORIENTATION_CLASSES = ("set1", "set2")
#: Line-C shift produced by the default axial strain of each orientation class.
CLASS_AXIAL_SHIFT = {"set1": 1.0e9, "set2": 6.0e9}


@dataclass(frozen=True)
class DoubletParams:
    spin_orbit: float
    axial_strain: float = 0.0
    transverse_strain: float = 0.0
    axial_quadratic_coeff: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.spin_orbit) and self.spin_orbit > 0):
            raise DomainError("spin_orbit splitting must be positive")
        for name in ("axial_strain", "transverse_strain", "axial_quadratic_coeff"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class DoubletLevels:
    lower: float
    upper: float
    splitting: float


def doublet_eigenvalues(p: DoubletParams) -> DoubletLevels:
    shift = p.axial_quadratic_coeff * p.axial_strain ** 2
    splitting = math.hypot(p.spin_orbit, 2.0 * p.transverse_strain)
    return DoubletLevels(shift - 0.5 * splitting, shift + 0.5 * splitting, splitting)


@dataclass(frozen=True)
class EmitterModel:
    ground: DoubletParams = field(default_factory=lambda: DoubletParams(GROUND_SPIN_ORBIT))
    excited: DoubletParams = field(default_factory=lambda: DoubletParams(
        EXCITED_SPIN_ORBIT, axial_quadratic_coeff=AXIAL_QUADRATIC_COEFF))
    zpl_reference: float = ZPL_REFERENCE_HZ
    orientation_class: str = "set1"
    rates: RateParams = field(default_factory=RateParams)
    debye_waller: float = DEBYE_WALLER

    def __post_init__(self):
        if self.orientation_class not in ORIENTATION_CLASSES:
            raise DomainError(f"orientation_class must be one of {ORIENTATION_CLASSES}")
        if not 0.0 < self.debye_waller <= 1.0:
            raise DomainError("debye_waller must lie in (0, 1]")

    def ground_levels(self) -> DoubletLevels:
        return doublet_eigenvalues(self.ground)

    def excited_levels(self) -> DoubletLevels:
        return doublet_eigenvalues(self.excited)

    def level_offsets(self):
        """Level energies (Hz) indexed by the rate-model state constants."""
        g, e = self.ground_levels(), self.excited_levels()
        return (g.lower, g.upper, e.lower, e.upper)

    def line_offset(self, label):
        if label not in LINE_LEVELS:
            raise DomainError(f"unknown line label {label!r}")
        levels = self.level_offsets()
        e, g = LINE_LEVELS[label]
        return levels[e] - levels[g]

    def with_rates(self, **changes):
        return replace(self, rates=replace(self.rates, **changes))


def strained_model(axial_strain=0.0, transverse_strain=0.0, *, excited_scale=1.0,
                   orientation_class="set1", ground_kappa=0.0,
                   excited_kappa=AXIAL_QUADRATIC_COEFF, **kwargs) -> EmitterModel:
    """Model with ground-state strain and excited strain scaled by ``excited_scale``."""
    ground = DoubletParams(GROUND_SPIN_ORBIT, axial_strain, transverse_strain, ground_kappa)
    excited = DoubletParams(EXCITED_SPIN_ORBIT, excited_scale * axial_strain,
                            excited_scale * transverse_strain, excited_kappa)
    return EmitterModel(ground=ground, excited=excited,
                        orientation_class=orientation_class, **kwargs)


def net_axial_coeff(model: EmitterModel) -> float:
    """Coefficient K with line shift ``K * eps_a**2`` for the model's strain scaling."""
    eg, ee = model.ground.axial_strain, model.excited.axial_strain
    scale = ee / eg if eg else 1.0
    return model.excited.axial_quadratic_coeff * scale ** 2 - model.ground.axial_quadratic_coeff


def default_model(orientation_class="set1", **kwargs) -> EmitterModel:
    """Calibrated emitter with the default axial strain of its orientation class."""
    eps = math.sqrt(CLASS_AXIAL_SHIFT[orientation_class] / AXIAL_QUADRATIC_COEFF)
    return strained_model(eps, orientation_class=orientation_class, **kwargs)


@dataclass(frozen=True)
class Line:
    label: str
    offset: float
    fwhm: float
    weight: float


@dataclass(frozen=True)
class TransitionTable:
    lines: tuple
    zpl_reference: float = ZPL_REFERENCE_HZ

    def __getitem__(self, label) -> Line:
        for line in self.lines:
            if line.label == label:
                return line
        raise KeyError(label)

    @property
    def ground_splitting(self):
        return self["C"].offset - self["D"].offset

    @property
    def excited_splitting(self):
        return self["A"].offset - self["C"].offset


def transition_table(model: EmitterModel, temperature) -> TransitionTable:
    check_temperature(temperature)
    weights = _rates.line_weights(model, temperature)
    lines = tuple(
        Line(lab, float(model.line_offset(lab)),
             float(_rates.effective_linewidth(model, temperature, lab)), float(weights[lab]))
        for lab in LINE_LABELS)
    return TransitionTable(lines, model.zpl_reference)


def line_shift_between(m1: EmitterModel, m2: EmitterModel, label="C") -> float:
    """Signed shift (Hz) of ``label`` from emitter ``m1`` to emitter ``m2``."""
    return (m2.zpl_reference - m1.zpl_reference) + (m2.line_offset(label) - m1.line_offset(label))

