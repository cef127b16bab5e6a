"""Consumer agents: situation rules, foraging, consumption and social
influence.

A consumer holds a value vector (its ideal signature), two learning maps,
an expectation state and a handful of frustration counters. Each cycle it
evaluates which situations are active and fires exactly one primary
action, chosen by a fixed priority order:

    Dissatisfied > SearchForAFriend > InteractSocially > Bored >
    ChangeLocation > ChangeValues > ConsumeLocally

Overlapping situations may be active at once; the priority order resolves
conflicts. All randomness flows through the run's cycle stream, so equal
seeds give identical action traces.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .cognition import AttractivenessState, SelfOrganizingMap
from .products import valuation
from .space import GridLocation, ProductState, manhattan

if TYPE_CHECKING:  # pragma: no cover
    from .harness import World


class Expectation(enum.Enum):
    NEUTRAL = "neutral"
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"
    SOCIAL_NAVIGATION = "social-navigation"


class Situation(enum.Enum):
    CONSUME_LOCALLY = "consume-locally"
    INTERACT_SOCIALLY = "interact-socially"
    BORED = "bored"
    DISSATISFIED = "dissatisfied"
    CHANGE_LOCATION = "change-location"
    CHANGE_VALUES = "change-values"
    SEARCH_FOR_A_FRIEND = "search-for-a-friend"


# situations that persist across cycles once activated (they are switched
# on by Bored/Dissatisfied and switched off when their work is done)
_PERSISTENT = (Situation.CHANGE_LOCATION, Situation.CHANGE_VALUES)


@dataclass
class ActiveConsumption:
    instance_id: int
    remaining: int
    predicted_utility: float


@dataclass
class Consumer:
    id: int
    location: GridLocation
    ideal: np.ndarray
    perception: SelfOrganizingMap
    attract: AttractivenessState
    expectation: Expectation = Expectation.NEUTRAL
    active_situations: set = field(default_factory=set)
    boredom_count: int = 0
    dissatisfaction_count: int = 0
    failed_search_count: int = 0
    consuming: ActiveConsumption | None = None
    recent_utilities: deque = field(default_factory=lambda: deque(maxlen=10))
    units_consumed: int = 0
    utility_total: float = 0.0
    # social navigation state
    nav_target: GridLocation | None = None
    nav_prior: Expectation | None = None
    nav_budget: int = 0
    # alternation toggles
    change_location_next: bool = True
    approach_next: bool = False
    escape_budget: int = 0


def evaluate_situations(consumer: Consumer, world: "World") -> set:
    """Run the situation production rules against the consumer's state and
    local observables. ConsumeLocally is active by default; previously
    activated change situations persist until they complete."""
    cfg = world.config
    sits = {Situation.CONSUME_LOCALLY}
    sits.update(s for s in consumer.active_situations if s in _PERSISTENT)
    if sum(consumer.recent_utilities) < 0.0:
        sits.add(Situation.DISSATISFIED)
    if consumer.boredom_count >= cfg.boredom_limit:
        sits.add(Situation.BORED)
    if world.social:
        frustrated = (consumer.dissatisfaction_count >= cfg.frustration_limit
                      or consumer.failed_search_count >= cfg.frustration_limit)
        if consumer.consuming is None and frustrated:
            sits.add(Situation.INTERACT_SOCIALLY)
        g = world.network
        if (g.degree(consumer.id) <= 2
                and g.mean_strength(consumer.id) < cfg.tie_strength_floor):
            sits.add(Situation.SEARCH_FOR_A_FRIEND)
    consumer.active_situations = sits
    return sits


def act(consumer: Consumer, world: "World", rng: np.random.Generator) -> None:
    """Fire the consumer's one primary action for this cycle."""
    sits = consumer.active_situations
    if Situation.DISSATISFIED in sits:
        _fire_dissatisfied(consumer, world)
        return
    if consumer.consuming is not None:
        consumer.consuming.remaining -= 1
        if consumer.consuming.remaining <= 0:
            complete_consumption(consumer, world)
            return
        if Situation.SEARCH_FOR_A_FRIEND in sits:
            _fire_referral(consumer, world, rng)
        return
    if Situation.SEARCH_FOR_A_FRIEND in sits:
        _fire_referral(consumer, world, rng)
        return
    if consumer.expectation is Expectation.SOCIAL_NAVIGATION:
        _navigation_step(consumer, world)
        return
    if Situation.INTERACT_SOCIALLY in sits:
        interact_socially(consumer, world, rng)
        return
    if Situation.BORED in sits:
        _fire_bored(consumer, world)
        return
    if Situation.CHANGE_LOCATION in sits:
        _escape_step(consumer, world, rng)
        return
    if Situation.CHANGE_VALUES in sits:
        _perturb_values(consumer, world, rng)
        return
    _forage(consumer, world, rng)


# ---------------------------------------------------------------------------
# consumption


def try_begin_consumption(consumer: Consumer, instance, world: "World") -> bool:
    """Start consuming the product under the consumer's feet.

    Begins only when the attractiveness map approves the signature AND the
    signature sits within the valuation gate of the consumer's ideal. A
    decline bumps the failed-search counter, schedules an escape from this
    product's neighborhood and, when the product fell short of the
    threshold, erodes the threshold a little toward the prediction
    (aspiration adaptation: standards that nothing nearby meets sink
    toward what is actually on offer; without this the threshold ratchets
    monotonically upward and foraging starves).
    """
    cfg = world.config
    signature = world.types[instance.type_id].signature
    predicted = consumer.attract.predict_utility(signature)
    if predicted >= consumer.attract.threshold \
            and valuation(consumer.ideal, signature) <= cfg.max_valuation_gap:
        instance.state = ProductState.BEING_CONSUMED
        consumer.consuming = ActiveConsumption(
            instance.instance_id, cfg.consumption_cycles, predicted)
        consumer.boredom_count = 0
        consumer.failed_search_count = 0
        return True
    if predicted < consumer.attract.threshold:
        gap = predicted - consumer.attract.threshold
        consumer.attract.threshold = max(
            -1.0, consumer.attract.threshold
            + cfg.threshold_rate * cfg.decline_relaxation * gap)
    consumer.failed_search_count += 1
    consumer.active_situations.add(Situation.CHANGE_LOCATION)
    consumer.escape_budget = cfg.escape_cycles
    return False


def complete_consumption(consumer: Consumer, world: "World") -> float:
    """Finish the active consumption: realize the type's utility, update
    expectation against the begin-time prediction, train both maps, adapt
    the threshold, shift the ideal, and queue the product's respawn."""
    cfg = world.config
    active = consumer.consuming
    instance = world.space.products[active.instance_id]
    ptype = world.types[instance.type_id]
    realized = ptype.utility
    consumer.consuming = None
    consumer.expectation = (Expectation.OPTIMISTIC
                            if realized >= active.predicted_utility
                            else Expectation.PESSIMISTIC)
    consumer.perception.train(ptype.signature)
    consumer.attract.learn(ptype.signature, realized)
    consumer.attract.update_threshold(realized)
    if realized > 0.0:
        adjust_values(consumer, ptype.signature, cfg.experience_rate, toward=True)
    elif realized < 0.0:
        adjust_values(consumer, ptype.signature, cfg.experience_rate, toward=False)
    consumer.recent_utilities.append(realized)
    consumer.units_consumed += 1
    consumer.utility_total += realized
    world.queue_respawn(active.instance_id)
    return realized


def adjust_values(consumer: Consumer, target, eta: float, toward: bool) -> None:
    """Move the ideal a fraction eta toward (or away from) a target
    signature; components are clamped at zero."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    delta = eta * (np.asarray(target, dtype=float) - consumer.ideal)
    moved = consumer.ideal + delta if toward else consumer.ideal - delta
    consumer.ideal = np.maximum(moved, 0.0)


# ---------------------------------------------------------------------------
# social behavior


def categorize_neighbors(consumer: Consumer, network, consumers) -> dict[str, int]:
    """Label direct social neighbors.

    most_similar / most_dissimilar rank by valuation distance between
    ideals; most_admired / least_admired rank by trailing mean realized
    utility (neighbors with no history are left out of the admiration
    ranking). All ties break toward the lower consumer id. Returns an
    empty mapping when the consumer has no ties.
    """
    neighbor_ids = sorted(network.neighbors(consumer.id))
    if not neighbor_ids:
        return {}
    by_distance = [(valuation(consumer.ideal, consumers[b].ideal), b)
                   for b in neighbor_ids]
    labels = {
        "most_similar": min(by_distance)[1],
        "most_dissimilar": -max((d, -b) for d, b in by_distance)[1],
    }
    by_utility = [(sum(consumers[b].recent_utilities) / len(consumers[b].recent_utilities), b)
                  for b in neighbor_ids if consumers[b].recent_utilities]
    if by_utility:
        labels["most_admired"] = -max((u, -b) for u, b in by_utility)[1]
        labels["least_admired"] = min(by_utility)[1]
    return labels


def interact_socially(consumer: Consumer, world: "World",
                      rng: np.random.Generator) -> bool:
    """One social influence event with a single neighbor (the most admired,
    falling back to the most similar).

    The effect alternates per agent between value influence (pull the
    ideal toward the neighbor's) and spatial approach (navigate toward the
    neighbor's current location). Either way the tie strengthens and the
    frustration counters reset. No neighbors: no-op.
    """
    cfg = world.config
    labels = categorize_neighbors(consumer, world.network, world.consumers)
    if not labels:
        return False
    target_id = labels.get("most_admired", labels["most_similar"])
    neighbor = world.consumers[target_id]
    if consumer.approach_next:
        consumer.nav_prior = consumer.expectation
        consumer.expectation = Expectation.SOCIAL_NAVIGATION
        consumer.nav_target = neighbor.location
        consumer.nav_budget = 4 * max(1, manhattan(consumer.location, neighbor.location)) + 8
    else:
        adjust_values(consumer, neighbor.ideal, cfg.social_rate, toward=True)
    consumer.approach_next = not consumer.approach_next
    world.network.strengthen(consumer.id, target_id, cfg.tie_boost)
    consumer.dissatisfaction_count = 0
    consumer.failed_search_count = 0
    return True


def _fire_referral(consumer: Consumer, world: "World",
                   rng: np.random.Generator) -> None:
    from .network import referral

    referral(world.network, consumer.id, rng,
             strength=world.config.referral_strength)


def _navigation_step(consumer: Consumer, world: "World") -> None:
    # greedy step toward the navigation target; ends on adjacency or when
    # the step budget runs out (the target may be unreachable)
    target = consumer.nav_target
    if manhattan(consumer.location, target) <= 1 or consumer.nav_budget <= 0:
        _exit_navigation(consumer)
        return
    consumer.nav_budget -= 1
    space = world.space
    current = manhattan(consumer.location, target)
    for nb in space.von_neumann_neighbors(consumer.location):
        if manhattan(nb, target) < current and space.consumer_at(nb) is None:
            space.move_consumer(consumer.id, nb)
            consumer.location = nb
            return
    # boxed in this cycle; try again next cycle


def _exit_navigation(consumer: Consumer) -> None:
    consumer.expectation = consumer.nav_prior or Expectation.NEUTRAL
    consumer.nav_target = None
    consumer.nav_prior = None
    consumer.nav_budget = 0


# ---------------------------------------------------------------------------
# dissatisfaction, boredom, change


def _reverse_expectation(expectation: Expectation) -> Expectation:
    if expectation is Expectation.OPTIMISTIC:
        return Expectation.PESSIMISTIC
    if expectation is Expectation.PESSIMISTIC:
        return Expectation.OPTIMISTIC
    return expectation


def _fire_dissatisfied(consumer: Consumer, world: "World") -> None:
    # stop current actions, reverse expectations, then decide what to do
    # instead (location change or value change, alternating per agent)
    consumer.dissatisfaction_count += 1
    if consumer.consuming is not None:
        instance = world.space.products[consumer.consuming.instance_id]
        instance.state = ProductState.AVAILABLE
        consumer.consuming = None
    if consumer.expectation is Expectation.SOCIAL_NAVIGATION:
        prior = consumer.nav_prior or Expectation.NEUTRAL
        _exit_navigation(consumer)
        consumer.expectation = _reverse_expectation(prior)
    else:
        consumer.expectation = _reverse_expectation(consumer.expectation)
    consumer.recent_utilities.clear()
    _activate_change(consumer, world)


def _fire_bored(consumer: Consumer, world: "World") -> None:
    consumer.boredom_count = 0
    _activate_change(consumer, world)


def _activate_change(consumer: Consumer, world: "World") -> None:
    if consumer.change_location_next:
        consumer.active_situations.add(Situation.CHANGE_LOCATION)
        consumer.escape_budget = world.config.escape_cycles
    else:
        consumer.active_situations.add(Situation.CHANGE_VALUES)
    consumer.change_location_next = not consumer.change_location_next


def _escape_step(consumer: Consumer, world: "World",
                 rng: np.random.Generator) -> None:
    # walk down the proximity gradient and keep going for the whole budget;
    # flat stretches fall back to a random step. Running the full budget
    # (rather than stopping at the first zero-field cell) is what carries
    # the agent out of the current product's basin instead of leaving it on
    # the rim to be recaptured by the same gradient.
    space = world.space
    consumer.escape_budget -= 1
    nb = space.descend(consumer.location)
    if nb == consumer.location or space.consumer_at(nb) is not None:
        nb = _random_free_neighbor(consumer, world, rng)
    if nb is not None and nb != consumer.location:
        if space.move_consumer(consumer.id, nb):
            consumer.location = nb
    if consumer.escape_budget <= 0:
        consumer.active_situations.discard(Situation.CHANGE_LOCATION)
        consumer.escape_budget = 0


def _perturb_values(consumer: Consumer, world: "World",
                    rng: np.random.Generator) -> None:
    # self-directed value drift: small uniform nudge per component
    magnitude = world.config.perturb_magnitude
    offsets = rng.uniform(-magnitude, magnitude, size=consumer.ideal.shape)
    consumer.ideal = np.maximum(consumer.ideal + offsets, 0.0)
    consumer.active_situations.discard(Situation.CHANGE_VALUES)


# ---------------------------------------------------------------------------
# foraging


def _random_free_neighbor(consumer: Consumer, world: "World",
                          rng: np.random.Generator) -> GridLocation | None:
    space = world.space
    free = [nb for nb in space.von_neumann_neighbors(consumer.location)
            if space.consumer_at(nb) is None]
    if not free:
        return None
    return free[int(rng.integers(0, len(free)))]


def _forage(consumer: Consumer, world: "World", rng: np.random.Generator) -> None:
    # local foraging: consume what's underfoot if it appeals, otherwise
    # climb the proximity gradient (random-walking across plateaus)
    space = world.space
    pid = space.product_at(consumer.location)
    if pid is not None:
        instance = space.products[pid]
        if instance.state is ProductState.AVAILABLE:
            if try_begin_consumption(consumer, instance, world):
                return
            # declined; the escape scheduled by the decline starts next cycle
            return
        # a product someone else is consuming is treated as absent
    nb = space.ascend(consumer.location)
    if nb == consumer.location or space.consumer_at(nb) is not None:
        # plateau, or the uphill cell is taken (local competition): jostle
        # sideways instead of retrying the same blocked cell forever
        nb = _random_free_neighbor(consumer, world, rng)
        if nb is None:
            return
    if space.move_consumer(consumer.id, nb):
        consumer.location = nb
