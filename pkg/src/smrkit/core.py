"""Materials, layers and stacks for one-dimensional BAW resonator models.

All lengths are metres, densities kg/m^3, velocities m/s. A ``Stack`` lists
its layers from the top surface down to the substrate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from smrkit.exceptions import InputError


@dataclass(frozen=True)
class Material:
    """Isotropic acoustic material, optionally piezoelectric.

    Attributes:
        name: Identifier used in stack files.
        density: Mass density (kg/m^3).
        velocity: Longitudinal phase velocity (m/s). For a piezoelectric this
            is the stiffened velocity.
        q_mech: Mechanical quality factor; ``math.inf`` means lossless.
        e33: Piezoelectric stress constant (C/m^2), piezo materials only.
        eps33: Clamped permittivity (F/m), piezo materials only.
    """

    name: str
    density: float
    velocity: float
    q_mech: float = math.inf
    e33: float | None = None
    eps33: float | None = None

    def __post_init__(self):
        if not self.name:
            raise InputError("material needs a name")
        for attr in ("density", "velocity", "q_mech"):
            value = getattr(self, attr)
            if not value > 0 or math.isnan(value):
                raise InputError(f"material {self.name}: {attr} must be > 0, got {value!r}")
        if (self.e33 is None) != (self.eps33 is None):
            raise InputError(f"material {self.name}: e33 and eps33 must be given together")
        if self.eps33 is not None and not self.eps33 > 0:
            raise InputError(f"material {self.name}: eps33 must be > 0, got {self.eps33!r}")

    @property
    def is_piezo(self) -> bool:
        return self.e33 is not None

    @property
    def complex_velocity(self) -> complex:
        # viscous loss model: v * (1 + j/(2Q))
        return self.velocity * complex(1.0, 0.5 / self.q_mech)

    @property
    def complex_impedance(self) -> complex:
        return self.density * self.complex_velocity


def acoustic_impedance(m: Material) -> float:
    """Specific acoustic impedance rho*v in kg m^-2 s^-1 (rayl)."""
    return m.density * m.velocity


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float

    def __post_init__(self):
        if not self.thickness > 0 or math.isinf(self.thickness):
            raise InputError(
                f"layer of {self.material.name}: thickness must be positive and finite, "
                f"got {self.thickness!r}"
            )


@dataclass(frozen=True)
class Stack:
    """Layered resonator, layers ordered top to bottom.

    ``top_load`` is ``None`` for a mechanically free top surface, otherwise a
    semi-infinite material above the first layer. ``substrate`` terminates the
    bottom as a semi-infinite medium.
    """

    layers: tuple[Layer, ...]
    piezo_index: int
    area: float
    substrate: Material
    top_load: Material | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not 0 <= self.piezo_index < len(self.layers):
            raise InputError(
                f"piezo_index {self.piezo_index} out of range for {len(self.layers)} layers"
            )

    @property
    def piezo(self) -> Layer:
        return self.layers[self.piezo_index]

    @property
    def mirror(self) -> tuple[Layer, ...]:
        """Layers below the bottom electrode (the one directly under the piezo)."""
        return self.layers[self.piezo_index + 2 :]

    @property
    def mirror_pairs(self) -> float:
        return len(self.mirror) / 2

    def with_layer(self, index: int, **changes) -> Stack:
        """Copy of the stack with one layer's fields replaced."""
        layers = list(self.layers)
        layers[index] = replace(layers[index], **changes)
        return replace(self, layers=tuple(layers))

    def with_uniform_q(self, q_mech: float) -> Stack:
        """Copy with every material (substrate and top load included) set to ``q_mech``."""

        def requal(m):
            return None if m is None else replace(m, q_mech=q_mech)

        layers = tuple(replace(la, material=requal(la.material)) for la in self.layers)
        return replace(self, layers=layers, substrate=requal(self.substrate), top_load=requal(self.top_load))

    def flipped(self) -> Stack:
        """Upside-down copy; requires a loaded top so the terminations can swap."""
        if self.top_load is None:
            raise InputError("cannot flip a stack with a free top surface")
        n = len(self.layers)
        return Stack(
            layers=self.layers[::-1],
            piezo_index=n - 1 - self.piezo_index,
            area=self.area,
            substrate=self.top_load,
            top_load=self.substrate,
        )

    def materials(self) -> dict[str, Material]:
        """All materials referenced by the stack, keyed by name."""
        found: dict[str, Material] = {}
        items = [la.material for la in self.layers] + [self.substrate]
        if self.top_load is not None:
            items.append(self.top_load)
        for m in items:
            if m.name in found and found[m.name] != m:
                raise InputError(f"two different materials share the name {m.name!r}")
            found[m.name] = m
        return found


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    message: str
    layer: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = field(default_factory=tuple)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return bool(self.issues)

    def __len__(self) -> int:
        return len(self.issues)


def validate_stack(s: Stack) -> ValidationReport:
    """Check a stack for physical consistency.

    Returns a report instead of raising. Errors make the stack unusable for
    simulation; warnings flag suspicious but computable designs (for example
    a mirror with two identical neighbours, which has no impedance contrast).
    """
    issues: list[Issue] = []
    if not s.layers:
        issues.append(Issue("error", "stack has no layers"))
        return ValidationReport(tuple(issues))
    if not (s.area > 0 and math.isfinite(s.area)):
        issues.append(Issue("error", f"electrode area must be > 0, got {s.area!r}"))
    piezo = s.piezo.material
    if piezo.e33 is None:
        issues.append(Issue("error", f"piezo layer {piezo.name} lacks e33", s.piezo_index))
    if piezo.eps33 is None:
        issues.append(Issue("error", f"piezo layer {piezo.name} lacks eps33", s.piezo_index))
    for i, la in enumerate(s.layers):
        if i != s.piezo_index and la.material.is_piezo:
            # allowed (e.g. a passive AlN seed layer), but it is not excited
            issues.append(Issue("warning", f"layer {i} ({la.material.name}) is piezoelectric but not driven", i))

    offset = s.piezo_index + 2
    mirror = s.mirror
    for j in range(1, len(mirror)):
        a, b = mirror[j - 1].material, mirror[j].material
        if acoustic_impedance(a) == acoustic_impedance(b):
            issues.append(
                Issue("warning", f"mirror layers {offset + j - 1} and {offset + j} have no impedance contrast", offset + j)
            )
    names = {la.material.name for la in mirror}
    if len(names) > 2:
        issues.append(Issue("warning", f"mirror uses {len(names)} materials, expected 2: {sorted(names)}"))
    for j in range(2, len(mirror)):
        if mirror[j].material.name != mirror[j - 2].material.name:
            issues.append(Issue("warning", f"mirror does not alternate at layer {offset + j}", offset + j))
            break
    return ValidationReport(tuple(issues))


def require_valid(s: Stack) -> None:
    report = validate_stack(s)
    if not report.ok:
        raise InputError("invalid stack: " + "; ".join(i.message for i in report.errors))
