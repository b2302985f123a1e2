from __future__ import annotations

import numpy as np
import pytest

from physparts.asset import (
    DescriptionSet,
    KinematicConstraint,
    MaterialSpec,
    ObjectAsset,
    Part,
)
from physparts.fixtures import box


def make_material(name: str = "plastic", density: float = 1.2) -> MaterialSpec:
    return MaterialSpec(name=name, youngs_modulus=2.0, poisson_ratio=0.35,
                        density=density)


def make_part(pid: int, lo, hi, name: str | None = None, rank: int = 1,
              material: MaterialSpec | None = None) -> Part:
    return Part(
        id=pid,
        name=name or f"part {pid}",
        mesh=box(lo, hi),
        material=material or make_material(),
        affordance_rank=rank,
        descriptions=DescriptionSet(),
    )


def two_box_asset() -> ObjectAsset:
    """Two touching unit-scale boxes, no constraints: the minimal valid asset."""
    return ObjectAsset(
        object_name="two boxes",
        category="test",
        absolute_scale=(10.0, 10.0, 10.0),
        parts=(
            make_part(1, (-1.0, -1.0, -1.0), (0.0, 1.0, 1.0)),
            make_part(2, (0.0, -1.0, -1.0), (1.0, 1.0, 1.0), rank=2),
        ),
    )


def unit_direction(rng: np.random.Generator) -> tuple:
    v = rng.standard_normal(3)
    v = v / np.linalg.norm(v)
    return tuple(float(x) for x in v)


def random_constraint(rng: np.random.Generator, n_parts: int) -> KinematicConstraint:
    kind = rng.choice(["A", "B", "C", "D", "E", "CB"])
    if kind in ("A", "E"):
        return KinematicConstraint(kind=str(kind))
    child, parent = rng.choice(np.arange(1, n_parts + 1), size=2, replace=False)
    direction = unit_direction(rng) if kind in ("B", "C", "CB") else None
    pivot = tuple(rng.uniform(-1, 1, 3)) if kind in ("C", "D", "CB") else None
    lo = float(rng.uniform(-1, 0))
    rng_field = (lo, float(rng.uniform(lo, 1)))
    return KinematicConstraint(
        kind=str(kind), parent_part=int(parent), child_part=int(child),
        direction=direction, pivot=pivot, range=rng_field,
    )


def random_valid_asset(rng: np.random.Generator) -> ObjectAsset:
    n = int(rng.integers(1, 5))
    parts = []
    for pid in range(1, n + 1):
        lo = rng.uniform(-1.0, 0.0, 3)
        hi = lo + rng.uniform(0.05, 1.0 - lo.max(), 3).clip(0.05, None)
        hi = np.minimum(hi, 1.0)
        parts.append(make_part(
            pid, tuple(lo), tuple(hi), rank=int(rng.integers(1, 11)),
            material=MaterialSpec(
                name="m", youngs_modulus=float(rng.uniform(0, 300)),
                poisson_ratio=float(rng.uniform(-0.9, 0.5)),
                density=float(rng.uniform(0, 20)),
            )))
    constraints = []
    if n >= 2 and rng.random() < 0.7:
        constraints.append(random_constraint(rng, n))
    return ObjectAsset(
        object_name="random", category="test",
        absolute_scale=tuple(float(x) for x in rng.uniform(1, 500, 3)),
        parts=tuple(parts), constraints=tuple(constraints),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
