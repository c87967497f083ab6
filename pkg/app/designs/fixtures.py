from typing import Sequence, Tuple

import numpy as np

from app.core.exceptions import UnsupportedLevelCount, ValidationError
from app.designs.models import FactorKind, FactorRole
from app.designs.schemas import FactorSpec, PlanningMatrix, SlidingDesign, SlidingSpec
from app.designs.service import resolve_settings, with_geometry


SLID_LABELS = {
    2: ("low", "high"),
    3: ("low", "median", "high"),
}

# Welding experiment: OA(18, 2^1 3^7) with column H collapsed to two levels
WELDING_ROWS = (
    ("2", "low", "6", "10", "15", "50", "85", "3/8"),
    ("2", "low", "12", "18", "20", "55", "90", "1/4"),
    ("2", "low", "18", "26", "25", "60", "95", "3/8"),
    ("2", "median", "6", "10", "20", "55", "95", "3/8"),
    ("2", "median", "12", "18", "25", "60", "85", "3/8"),
    ("2", "median", "18", "26", "15", "50", "90", "1/4"),
    ("2", "high", "6", "18", "15", "60", "90", "3/8"),
    ("2", "high", "12", "26", "20", "50", "95", "3/8"),
    ("2", "high", "18", "10", "25", "55", "85", "1/4"),
    ("4", "low", "6", "26", "25", "55", "90", "3/8"),
    ("4", "low", "12", "10", "15", "60", "95", "1/4"),
    ("4", "low", "18", "18", "20", "50", "85", "3/8"),
    ("4", "median", "6", "18", "25", "50", "95", "1/4"),
    ("4", "median", "12", "26", "15", "55", "85", "3/8"),
    ("4", "median", "18", "10", "20", "60", "90", "3/8"),
    ("4", "high", "6", "26", "20", "60", "85", "1/4"),
    ("4", "high", "12", "10", "25", "50", "90", "3/8"),
    ("4", "high", "18", "18", "15", "55", "95", "3/8"),
)

WELD_TIME_TABLE = {
    "2": (32.0, 36.0, 40.0),
    "4": (18.0, 22.0, 26.0),
}

# Coded center s + t*x_A and half-width r of the weld time table
WELDING_GEOMETRY = (0.0, -7.0 / 11.0, 4.0 / 11.0)


def _three_level(name: str, settings: Tuple[float, ...], description: str) -> FactorSpec:
    return FactorSpec(
        name=name,
        levels=tuple(f"{x:g}" for x in settings),
        settings=settings,
        description=description,
    )


def welding_factors() -> Tuple[FactorSpec, ...]:
    return (
        FactorSpec(
            name="A",
            role=FactorRole.PARENT,
            levels=("2", "4"),
            settings=(2.0, 4.0),
            description="pulse rate",
        ),
        FactorSpec(
            name="B",
            role=FactorRole.SLID,
            levels=SLID_LABELS[3],
            parent="A",
            description="weld time",
        ),
        _three_level("C", (6.0, 12.0, 18.0), "cool time"),
        _three_level("D", (10.0, 18.0, 26.0), "hold time"),
        _three_level("E", (15.0, 20.0, 25.0), "squeeze time"),
        _three_level("F", (50.0, 55.0, 60.0), "air pressure"),
        _three_level("G", (85.0, 90.0, 95.0), "current percentage"),
        FactorSpec(
            name="H",
            levels=("1/4", "3/8"),
            settings=(0.25, 0.375),
            description="tip size",
        ),
    )


def build_welding_fixture(with_geometry: bool = False) -> SlidingDesign:
    """
    The 18-run welding design with weld time (B) sliding on pulse rate (A)
    """
    factors = welding_factors()
    names = [f.name for f in factors]
    planning = PlanningMatrix(
        runs=len(WELDING_ROWS),
        columns={name: tuple(row[i] for row in WELDING_ROWS) for i, name in enumerate(names)},
    )
    if with_geometry:
        s, t, r = WELDING_GEOMETRY
        sliding = SlidingSpec(parent="A", slid="B", table=WELD_TIME_TABLE, s=s, t=t, r=r)
    else:
        sliding = SlidingSpec(parent="A", slid="B", table=WELD_TIME_TABLE)
    return resolve_settings(planning, factors, (sliding,))


def build_nested_design(
    parent_settings: Sequence[float],
    center: Tuple[float, float],
    half_width: float,
    n_slid: int = 3,
    replicates: int = 1,
    tilt: float = 0.0,
    parent: str = "A",
    slid: str = "B",
) -> SlidingDesign:
    """
    Full nested sliding design: every parent level crossed with every slid level.

    Slid settings at parent setting a are c0 + c1*a + half_width*(tilt*x_A(a) + z_k),
    z_k equally spaced in [-1, 1]; `tilt` moves the centers off the c0 + c1*a line
    by that many half-widths per coded parent unit.
    """
    if n_slid not in SLID_LABELS:
        raise UnsupportedLevelCount(f"Slid factor needs 2 or 3 levels, got {n_slid}")
    if replicates < 1:
        raise ValidationError("Replicates must be at least 1")
    if not half_width > 0:
        raise ValidationError("Half-width must be positive")

    settings = tuple(float(a) for a in parent_settings)
    if len(settings) < 2:
        raise ValidationError("A nested design needs at least 2 parent levels")
    lo, hi = min(settings), max(settings)

    parent_labels = tuple(f"{a:g}" for a in settings)
    slid_labels = SLID_LABELS[n_slid]
    z = np.linspace(-1.0, 1.0, n_slid)
    c0, c1 = center

    table = {}
    for label, a in zip(parent_labels, settings):
        x = -1.0 + 2.0 * (a - lo) / (hi - lo)
        table[label] = tuple(float(v) for v in c0 + c1 * a + half_width * (tilt * x + z))

    factors = (
        FactorSpec(name=parent, role=FactorRole.PARENT, levels=parent_labels, settings=settings),
        FactorSpec(name=slid, kind=FactorKind.QUANTITATIVE, role=FactorRole.SLID,
                   levels=slid_labels, parent=parent),
    )
    runs = [(p, b) for p in parent_labels for b in slid_labels for _ in range(replicates)]
    planning = PlanningMatrix(
        runs=len(runs),
        columns={parent: tuple(p for p, _ in runs), slid: tuple(b for _, b in runs)},
    )
    design = resolve_settings(planning, factors, (SlidingSpec(parent=parent, slid=slid, table=table),))
    return with_geometry(design)
