"""Bounded grid world: consumer occupancy, product placement, and the
product proximity field that reduces foraging to gradient ascent/descent.

Locations are (x, y) with 0 <= x < width, 0 <= y < height. Neighbor order
is fixed N, E, S, W with north at y - 1; movement and tie-breaking depend
on that order, so it must never change.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class GridLocation(NamedTuple):
    x: int
    y: int


class ProductState(enum.Enum):
    AVAILABLE = "available"
    BEING_CONSUMED = "being-consumed"


@dataclass
class ProductInstance:
    instance_id: int
    type_id: int
    location: GridLocation
    state: ProductState = ProductState.AVAILABLE


def manhattan(a: GridLocation, b: GridLocation) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


class ConsumptionSpace:
    """Grid with at most one consumer and at most one product per cell
    (a consumer and a product may share a cell)."""

    def __init__(self, width: int, height: int, proximity_radius: int = 12):
        if width < 1 or height < 1:
            raise ValueError("grid dimensions must be positive")
        if proximity_radius < 1:
            raise ValueError("proximity radius must be positive")
        self.width = width
        self.height = height
        self.radius = proximity_radius
        self.field = np.zeros((height, width))
        self.consumer_locations: dict[int, GridLocation] = {}
        self._consumer_at: dict[GridLocation, int] = {}
        self.products: dict[int, ProductInstance] = {}
        self._product_at: dict[GridLocation, int] = {}

    # -- geometry -----------------------------------------------------------

    def in_bounds(self, loc: GridLocation) -> bool:
        return 0 <= loc.x < self.width and 0 <= loc.y < self.height

    def von_neumann_neighbors(self, loc: GridLocation) -> list[GridLocation]:
        """In-bounds orthogonal neighbors in fixed N, E, S, W order."""
        x, y = loc
        out = []
        if y > 0:
            out.append(GridLocation(x, y - 1))
        if x < self.width - 1:
            out.append(GridLocation(x + 1, y))
        if y < self.height - 1:
            out.append(GridLocation(x, y + 1))
        if x > 0:
            out.append(GridLocation(x - 1, y))
        return out

    # -- occupancy ----------------------------------------------------------

    def consumer_at(self, loc: GridLocation) -> int | None:
        return self._consumer_at.get(loc)

    def product_at(self, loc: GridLocation) -> int | None:
        return self._product_at.get(loc)

    def place_consumer(self, consumer_id: int, loc: GridLocation) -> None:
        if not self.in_bounds(loc):
            raise ValueError(f"{loc} out of bounds")
        if loc in self._consumer_at:
            raise ValueError(f"cell {loc} already holds a consumer")
        if consumer_id in self.consumer_locations:
            raise ValueError(f"consumer {consumer_id} already placed")
        self.consumer_locations[consumer_id] = loc
        self._consumer_at[loc] = consumer_id

    def move_consumer(self, consumer_id: int, to: GridLocation) -> bool:
        """Move a consumer to an adjacent cell.

        Returns True when accepted; a cell occupied by another consumer
        rejects the move and leaves the position unchanged. Moving to the
        current location is an accepted no-op. A non-adjacent target is a
        caller bug and raises.
        """
        current = self.consumer_locations[consumer_id]
        if to == current:
            return True
        if manhattan(current, to) != 1 or not self.in_bounds(to):
            raise ValueError(f"{to} is not a von Neumann neighbor of {current}")
        if to in self._consumer_at:
            return False
        del self._consumer_at[current]
        self._consumer_at[to] = consumer_id
        self.consumer_locations[consumer_id] = to
        return True

    def place_product(self, instance: ProductInstance) -> None:
        if not self.in_bounds(instance.location):
            raise ValueError(f"{instance.location} out of bounds")
        if instance.location in self._product_at:
            raise ValueError(f"cell {instance.location} already holds a product")
        self.products[instance.instance_id] = instance
        self._product_at[instance.location] = instance.instance_id

    # -- proximity field ----------------------------------------------------

    def _paint_window(self, x0: int, x1: int, y0: int, y1: int) -> None:
        # recompute field(c) = max over products of max(0, 1 - manhattan/R)
        # for every cell in the (inclusive) window
        if not self.products:
            self.field[y0:y1 + 1, x0:x1 + 1] = 0.0
            return
        px = np.array([p.location.x for p in self.products.values()])
        py = np.array([p.location.y for p in self.products.values()])
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        dx = np.abs(xs[None, :, None] - px[None, None, :])
        dy = np.abs(ys[:, None, None] - py[None, None, :])
        contrib = 1.0 - (dx + dy) / self.radius
        np.maximum(contrib, 0.0, out=contrib)
        self.field[y0:y1 + 1, x0:x1 + 1] = contrib.max(axis=2)

    def rebuild_field(self) -> None:
        """Recompute the whole proximity field from product locations."""
        self._paint_window(0, self.width - 1, 0, self.height - 1)

    def _window_around(self, loc: GridLocation) -> tuple[int, int, int, int]:
        r = self.radius
        return (max(0, loc.x - r), min(self.width - 1, loc.x + r),
                max(0, loc.y - r), min(self.height - 1, loc.y + r))

    def _max_in_product(self, loc: GridLocation) -> None:
        # fold one product's contribution into the field (max composition)
        x0, x1, y0, y1 = self._window_around(loc)
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        dist = np.abs(xs[None, :] - loc.x) + np.abs(ys[:, None] - loc.y)
        contrib = 1.0 - dist / self.radius
        np.maximum(contrib, 0.0, out=contrib)
        np.maximum(self.field[y0:y1 + 1, x0:x1 + 1], contrib,
                   out=self.field[y0:y1 + 1, x0:x1 + 1])

    def relocate_product(self, instance_id: int, to: GridLocation) -> None:
        """Move a product and update the field incrementally (bit-identical
        to a full rebuild)."""
        if not self.in_bounds(to):
            raise ValueError(f"{to} out of bounds")
        inst = self.products[instance_id]
        if to == inst.location:
            return
        if to in self._product_at:
            raise ValueError(f"cell {to} already holds a product")
        old = inst.location
        del self._product_at[old]
        self._product_at[to] = instance_id
        inst.location = to
        self._paint_window(*self._window_around(old))
        self._max_in_product(to)

    def field_at(self, loc: GridLocation) -> float:
        return float(self.field[loc.y, loc.x])

    # -- gradient movement targets -------------------------------------------

    def ascend(self, loc: GridLocation) -> GridLocation:
        """Neighbor with the largest field value, ties resolved by N, E, S, W
        order; returns `loc` when no neighbor strictly improves."""
        field = self.field
        best = field[loc.y, loc.x]
        best_loc = loc
        for nb in self.von_neumann_neighbors(loc):
            v = field[nb.y, nb.x]
            if v > best:
                best = v
                best_loc = nb
        return best_loc

    def descend(self, loc: GridLocation) -> GridLocation:
        """Neighbor with the smallest field value, same tie rule; returns
        `loc` when no neighbor strictly decreases."""
        field = self.field
        best = field[loc.y, loc.x]
        best_loc = loc
        for nb in self.von_neumann_neighbors(loc):
            v = field[nb.y, nb.x]
            if v < best:
                best = v
                best_loc = nb
        return best_loc

    # -- respawn --------------------------------------------------------------

    @staticmethod
    def draw_offsets(rng: np.random.Generator, sigma: float) -> tuple[float, float]:
        """Per-axis Gaussian displacement (mean 0, sd sigma), pre-rounding."""
        return float(rng.normal(0.0, sigma)), float(rng.normal(0.0, sigma))

    def respawn_product(self, instance_id: int, rng: np.random.Generator,
                        sigma: float) -> GridLocation:
        """Move a consumed product to old location + rounded Gaussian offsets,
        clamped to the grid. Cells already holding a product are re-drawn up
        to 100 times, then a row-major linear probe finds the next free cell.
        The instance becomes available again."""
        inst = self.products[instance_id]
        old = inst.location
        target = old
        for _ in range(100):
            ox, oy = self.draw_offsets(rng, sigma)
            target = GridLocation(
                min(self.width - 1, max(0, old.x + int(round(ox)))),
                min(self.height - 1, max(0, old.y + int(round(oy)))))
            if self._product_at.get(target) in (None, instance_id):
                break
        else:
            target = self._linear_probe(target, instance_id)
        self.relocate_product(instance_id, target)
        inst.state = ProductState.AVAILABLE
        return target

    def _linear_probe(self, start: GridLocation, instance_id: int) -> GridLocation:
        total = self.width * self.height
        idx = start.y * self.width + start.x
        for k in range(1, total + 1):
            j = (idx + k) % total
            loc = GridLocation(j % self.width, j // self.width)
            if self._product_at.get(loc) in (None, instance_id):
                return loc
        raise RuntimeError("no free cell for product respawn")

    # -- audits ----------------------------------------------------------------

    def audit(self, expected_consumers: int | None = None,
              expected_products: int | None = None) -> None:
        """Check occupancy consistency; raises AssertionError on violation."""
        assert len(self._consumer_at) == len(self.consumer_locations), \
            "two consumers share a cell"
        for cid, loc in self.consumer_locations.items():
            assert self._consumer_at.get(loc) == cid, f"occupancy desync for {cid}"
            assert self.in_bounds(loc), f"consumer {cid} out of bounds"
        assert len(self._product_at) == len(self.products), \
            "two products share a cell"
        for pid, inst in self.products.items():
            assert self._product_at.get(inst.location) == pid, \
                f"product map desync for {pid}"
            assert self.in_bounds(inst.location), f"product {pid} out of bounds"
        if expected_consumers is not None:
            assert len(self.consumer_locations) == expected_consumers, \
                "consumer count drifted"
        if expected_products is not None:
            assert len(self.products) == expected_products, \
                "product count drifted"
