"""Grid world checks: neighborhoods, occupancy, the proximity field and
product respawn."""

import numpy as np
import pytest
import scipy.stats

from consumerlab.space import (ConsumptionSpace, GridLocation, ProductInstance,
                               ProductState, manhattan)


def make_space(width=20, height=20, radius=5, products=()):
    space = ConsumptionSpace(width, height, radius)
    for k, (x, y) in enumerate(products):
        space.place_product(ProductInstance(k, 0, GridLocation(x, y)))
    space.rebuild_field()
    return space


# ---------------------------------------------------------------------------
# neighborhoods


def test_interior_cell_has_four_neighbors_in_nesw_order():
    space = make_space()
    nbs = space.von_neumann_neighbors(GridLocation(5, 5))
    assert nbs == [GridLocation(5, 4), GridLocation(6, 5),
                   GridLocation(5, 6), GridLocation(4, 5)]


def test_corner_cell_has_two_neighbors():
    space = make_space()
    assert len(space.von_neumann_neighbors(GridLocation(0, 0))) == 2
    assert len(space.von_neumann_neighbors(GridLocation(19, 19))) == 2


def test_edge_cell_has_three_neighbors():
    space = make_space()
    assert len(space.von_neumann_neighbors(GridLocation(0, 7))) == 3


# ---------------------------------------------------------------------------
# movement and occupancy


def test_move_into_empty_neighbor_accepted():
    space = make_space()
    space.place_consumer(0, GridLocation(3, 3))
    assert space.move_consumer(0, GridLocation(3, 4)) is True
    assert space.consumer_locations[0] == GridLocation(3, 4)
    assert space.consumer_at(GridLocation(3, 3)) is None


def test_move_into_occupied_cell_rejected():
    space = make_space()
    space.place_consumer(0, GridLocation(3, 3))
    space.place_consumer(1, GridLocation(3, 4))
    assert space.move_consumer(0, GridLocation(3, 4)) is False
    assert space.consumer_locations[0] == GridLocation(3, 3)


def test_move_to_current_location_is_accepted_noop():
    space = make_space()
    space.place_consumer(0, GridLocation(3, 3))
    assert space.move_consumer(0, GridLocation(3, 3)) is True
    assert space.consumer_locations[0] == GridLocation(3, 3)


def test_move_to_non_adjacent_cell_raises():
    space = make_space()
    space.place_consumer(0, GridLocation(3, 3))
    with pytest.raises(ValueError):
        space.move_consumer(0, GridLocation(5, 3))


def test_two_products_cannot_share_a_cell():
    space = make_space(products=[(4, 4)])
    with pytest.raises(ValueError):
        space.place_product(ProductInstance(9, 1, GridLocation(4, 4)))


# ---------------------------------------------------------------------------
# proximity field


def test_field_is_one_on_product_cell():
    space = make_space(products=[(10, 10)])
    assert space.field_at(GridLocation(10, 10)) == 1.0


def test_field_is_zero_beyond_radius():
    space = make_space(products=[(10, 10)], radius=5)
    assert space.field_at(GridLocation(10, 16)) == 0.0
    assert space.field_at(GridLocation(2, 2)) == 0.0


def test_field_linear_decay_in_manhattan_distance():
    space = make_space(products=[(10, 10)], radius=5)
    assert space.field_at(GridLocation(10, 12)) == pytest.approx(1.0 - 2.0 / 5.0)
    assert space.field_at(GridLocation(12, 12)) == pytest.approx(1.0 - 4.0 / 5.0)


def test_field_max_composition_of_two_products():
    space = make_space(products=[(5, 5), (8, 5)], radius=5)
    # midpoint cell: distance 2 to one product, 1 to the other; max wins
    loc = GridLocation(7, 5)
    expected = max(1.0 - 2.0 / 5.0, 1.0 - 1.0 / 5.0)
    assert space.field_at(loc) == pytest.approx(expected)


def test_greedy_ascent_reaches_a_product_within_initial_distance():
    # brute-force path check over every positive-field start cell
    space = make_space(width=20, height=20, radius=6,
                       products=[(4, 4), (15, 9), (9, 17)])
    product_cells = {GridLocation(4, 4), GridLocation(15, 9), GridLocation(9, 17)}
    for x in range(20):
        for y in range(20):
            start = GridLocation(x, y)
            if space.field_at(start) <= 0.0:
                continue
            budget = min(manhattan(start, p) for p in product_cells)
            loc = start
            for _ in range(budget):
                if loc in product_cells:
                    break
                loc = space.ascend(loc)
            assert loc in product_cells, f"ascent stalled from {start}"


def test_ascend_tie_break_is_deterministic_nesw():
    # two products equidistant east and west; enumerate neighbor values
    space = make_space(width=21, height=21, radius=6,
                       products=[(6, 10), (14, 10)])
    loc = GridLocation(10, 10)
    values = {nb: space.field_at(nb) for nb in space.von_neumann_neighbors(loc)}
    best = max(values.values())
    expected = next(nb for nb in space.von_neumann_neighbors(loc)
                    if values[nb] == best)
    assert space.ascend(loc) == expected
    # east comes before west in N,E,S,W order
    assert expected == GridLocation(11, 10)


def test_ascend_plateau_returns_location():
    space = make_space(products=[])
    assert space.ascend(GridLocation(5, 5)) == GridLocation(5, 5)


def test_descend_single_product_moves_away():
    space = make_space(products=[(10, 10)], radius=8)
    nxt = space.descend(GridLocation(10, 11))
    assert space.field_at(nxt) < space.field_at(GridLocation(10, 11))


def test_descend_plateau_returns_location():
    space = make_space(products=[])
    assert space.descend(GridLocation(2, 2)) == GridLocation(2, 2)


# ---------------------------------------------------------------------------
# respawn


def test_respawn_sigma_zero_stays_in_place():
    space = make_space(products=[(10, 10)])
    rng = np.random.default_rng(0)
    loc = space.respawn_product(0, rng, sigma=0.0)
    assert loc == GridLocation(10, 10)
    assert space.products[0].state is ProductState.AVAILABLE


def test_respawn_sigma_zero_probes_when_cell_taken():
    space = make_space(products=[(10, 10)])
    rng = np.random.default_rng(0)
    space.products[0].state = ProductState.BEING_CONSUMED
    # a second product parked on the respawn target forces the linear probe
    space.place_product(ProductInstance(1, 0, GridLocation(10, 11)))
    space.rebuild_field()
    # relocate first product onto its own cell is fine (it vacates first);
    # park it where the probe must skip the occupied cell
    loc = space.respawn_product(0, rng, sigma=0.0)
    assert loc == GridLocation(10, 10)


def test_respawn_always_lands_in_bounds():
    space = make_space(width=30, height=30, radius=5, products=[(1, 1)])
    rng = np.random.default_rng(42)
    for _ in range(10_000):
        loc = space.respawn_product(0, rng, sigma=10.0)
        assert 0 <= loc.x < 30 and 0 <= loc.y < 30


def test_respawn_offsets_pass_ks_against_gaussian():
    rng = np.random.default_rng(7)
    sigma = 10.0
    draws = np.array([ConsumptionSpace.draw_offsets(rng, sigma)
                      for _ in range(5000)]).ravel()
    result = scipy.stats.kstest(draws, "norm", args=(0.0, sigma))
    assert result.pvalue > 0.01


def test_respawn_never_stacks_products():
    space = make_space(width=10, height=10, radius=3,
                       products=[(k % 10, k // 10) for k in range(30)])
    rng = np.random.default_rng(3)
    for pid in range(30):
        space.respawn_product(pid, rng, sigma=2.0)
        space.audit(expected_products=30)


# ---------------------------------------------------------------------------
# incremental field maintenance


def test_incremental_field_update_is_bit_exact():
    space = make_space(width=40, height=40, radius=12,
                       products=[(5, 5), (20, 20), (35, 6), (8, 30)])
    rng = np.random.default_rng(11)
    for _ in range(50):
        pid = int(rng.integers(0, 4))
        space.respawn_product(pid, rng, sigma=9.0)
        incremental = space.field.copy()
        space.rebuild_field()
        assert np.array_equal(incremental, space.field)


def test_rebuild_with_no_products_zeroes_field():
    space = make_space(products=[(3, 3)])
    del space.products[0]
    del space._product_at[GridLocation(3, 3)]
    space.rebuild_field()
    assert not space.field.any()
