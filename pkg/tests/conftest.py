import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from theatreplan.core import CostParams, Instance, Surgery
from theatreplan.instances import GenSpec, generate


def tiny_instance(
    durations,
    due_days,
    surgeons,
    num_days=1,
    regular=4,
    overtime=2,
    rooms=1,
    availability=None,
    num_surgeons=None,
    slot_minutes=60,
):
    """Hand-rolled small instance for unit tests."""
    n_surg = num_surgeons or max(surgeons)
    total = regular + overtime
    if availability is None:
        availability = tuple(tuple(total for _ in range(num_days)) for _ in range(n_surg))
    surgeries = tuple(
        Surgery(id=i + 1, duration=durations[i], due_day=due_days[i], surgeon=surgeons[i])
        for i in range(len(durations))
    )
    rooms_per_day = (rooms,) * num_days if isinstance(rooms, int) else tuple(rooms)
    return Instance(
        surgeries=surgeries,
        num_days=num_days,
        regular_slots=regular,
        overtime_slots=overtime,
        rooms_per_day=rooms_per_day,
        surgeon_availability=availability,
        costs=CostParams(),
        slot_minutes=slot_minutes,
    )


def oracle_suite_instance(seed: int) -> Instance:
    """One member of the brute-force-checkable suite:
    <= 6 surgeries, <= 2 days, |T| <= 12 coarse slots."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 7))
    num_days = int(rng.integers(1, 3))
    regular = 9
    overtime = 3
    durations = [int(rng.integers(2, 7)) for _ in range(n)]
    due_days = [int(rng.integers(1, 5)) for _ in range(n)]
    n_surgeons = int(rng.integers(2, 4))
    surgeons = [int(rng.integers(1, n_surgeons + 1)) for _ in range(n)]
    availability = tuple(
        tuple(int(rng.integers(6, 13)) for _ in range(num_days)) for _ in range(n_surgeons)
    )
    rooms = int(rng.integers(1, 3))
    surgeries = tuple(
        Surgery(id=i + 1, duration=durations[i], due_day=due_days[i], surgeon=surgeons[i])
        for i in range(n)
    )
    return Instance(
        surgeries=surgeries,
        num_days=num_days,
        regular_slots=regular,
        overtime_slots=overtime,
        rooms_per_day=(rooms,) * num_days,
        surgeon_availability=availability,
        costs=CostParams(),
        slot_minutes=40,
    )


@pytest.fixture
def small_gen_instance():
    return generate(GenSpec(num_surgeries=12, num_days=3, rooms_per_day=2, seed=11))
