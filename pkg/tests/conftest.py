import numpy as np
import pytest

from popcast import InteractionEvent, make_log


def random_log(
    rng: np.random.Generator,
    max_users: int = 10,
    max_items: int = 10,
    max_day: int = 30,
    max_events: int = 50,
    with_ratings: bool = False,
):
    """Small random log for oracle comparisons; dedup may shrink it."""
    n_events = int(rng.integers(1, max_events + 1))
    events = []
    for _ in range(n_events):
        rating = int(rng.integers(1, 6)) if with_ratings else None
        events.append(
            InteractionEvent(
                user_id=int(rng.integers(0, max_users)),
                item_id=int(rng.integers(0, max_items)),
                day=int(rng.integers(0, max_day + 1)),
                rating=rating,
            )
        )
    return make_log(events)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
