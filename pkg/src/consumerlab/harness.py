"""World assembly and the experiment engine: seeded initialization, the
cycle loop, paired social/non-social runs, batches, per-run metrics and
run CSV export.

Determinism contract: a (seed, config) pair fully determines every byte
this module produces. One master seed spawns five named substreams
(types, placement, map init, network, cycle loop) so that the social flag
cannot desynchronize the shared initialization of a pair.
"""

from __future__ import annotations

import hashlib
import struct
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import stats
from .agents import Consumer, Expectation, act, evaluate_situations
from .cognition import AttractivenessState, SelfOrganizingMap
from .network import TieGraph, watts_strogatz
from .products import (ProductType, generate_type_set, landscape_distances,
                       signature_matrix)
from .serialize import fmt_float, write_csv
from .space import ConsumptionSpace, GridLocation, ProductInstance

SIGNATURE_DIM = 6


class ConfigError(ValueError):
    """Invalid run configuration; `problems` lists the offending keys."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration: " + "; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class RunConfig:
    """Every tunable in one place. Defaults reproduce the reference setup:
    a 165 x 165 grid, 40 consumers, 10 product types replicated five times,
    10,000 cycles sampled every 20."""

    seed: int = 1
    social: bool = True
    cycles: int = 10_000
    sample_every: int = 20
    width: int = 165
    height: int = 165
    n_consumers: int = 40
    n_types: int = 10
    replicas_per_type: int = 5
    # product model
    utility_slope: float = 1.0
    min_type_distance: float = 0.25
    max_type_attempts: int = 10_000
    maxima_radius: float = 0.0        # 0 = scaled mean nearest-neighbor distance
    relax_step: float = 0.01
    relax_tol: float = 1e-8
    relax_max_iter: int = 10_000
    overlap_angle: float = 0.1
    overlap_weight: float = 1.0
    # consumption space
    proximity_radius: int = 12
    respawn_sigma: float = 10.0
    # cognition
    perception_rows: int = 8
    perception_cols: int = 8
    conception_nodes: int = 16
    som_alpha: float = 0.3
    som_alpha_decay: float = 0.999
    som_alpha_floor: float = 0.01
    som_radius_decay: float = 0.999
    som_radius_floor: float = 0.5
    som_weight_low: float = 0.0
    som_weight_high: float = 2.0
    threshold_rate: float = 0.1
    # agent rules
    boredom_limit: int = 150
    frustration_limit: int = 5
    tie_strength_floor: float = 0.2
    max_valuation_gap: float = 1.0
    consumption_cycles: int = 5
    utility_window: int = 10
    experience_rate: float = 0.1
    social_rate: float = 0.2
    perturb_magnitude: float = 0.1
    escape_cycles: int = 25
    decline_relaxation: float = 0.1   # threshold erosion per decline, x threshold_rate
    # social network
    ws_degree: int = 4
    ws_beta: float = 0.1
    tie_boost: float = 0.1
    tie_decay: float = 0.001
    tie_removal_floor: float = 0.05
    initial_tie_strength: float = 0.5
    referral_strength: float = 0.5
    # analysis
    coverage_cell_width: float = 0.05
    transient_cycles: int = 1500

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    def validate(self) -> list[str]:
        """Return a list of problems (empty when the config is usable)."""
        problems = []
        if self.cycles < 1:
            problems.append("cycles must be >= 1")
        if self.sample_every < 1:
            problems.append("sample_every must be >= 1")
        elif self.cycles % self.sample_every != 0:
            problems.append("cycles must be divisible by sample_every")
        if self.width < 1 or self.height < 1:
            problems.append("width/height must be positive")
        if self.n_consumers < 1:
            problems.append("n_consumers must be >= 1")
        if self.n_types < 1 or self.replicas_per_type < 1:
            problems.append("n_types/replicas_per_type must be >= 1")
        cells = self.width * self.height
        if self.n_consumers > cells:
            problems.append("n_consumers exceeds grid capacity")
        if self.n_types * self.replicas_per_type > cells:
            problems.append("product instances exceed grid capacity")
        if self.proximity_radius < 1:
            problems.append("proximity_radius must be >= 1")
        if self.respawn_sigma < 0:
            problems.append("respawn_sigma must be >= 0")
        for key in ("experience_rate", "social_rate", "threshold_rate"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                problems.append(f"{key} must be in [0, 1]")
        if self.ws_degree % 2 != 0 or self.ws_degree < 2:
            problems.append("ws_degree must be even and >= 2")
        if self.ws_degree >= self.n_consumers:
            problems.append("ws_degree must be < n_consumers")
        if not 0.0 <= self.ws_beta <= 1.0:
            problems.append("ws_beta must be in [0, 1]")
        if self.consumption_cycles < 1:
            problems.append("consumption_cycles must be >= 1")
        if self.utility_window < 1:
            problems.append("utility_window must be >= 1")
        if self.coverage_cell_width <= 0:
            problems.append("coverage_cell_width must be positive")
        if self.min_type_distance < 0:
            problems.append("min_type_distance must be >= 0")
        return problems

    def density_warnings(self) -> list[str]:
        """Results are sensitive to spatial density; warn when more than 50%
        away from the reference 90 entities per 165^2 cells."""
        reference = 90.0 / (165.0 * 165.0)
        density = (self.n_consumers + self.n_types * self.replicas_per_type) \
            / (self.width * self.height)
        if not 0.5 * reference <= density <= 1.5 * reference:
            return [f"entity density {density:.5f} is outside +/-50% of the "
                    f"reference {reference:.5f}; behavior may not transfer"]
        return []


# rng substream names, in spawn order
_STREAMS = ("types", "placement", "som", "network", "cycle")


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    """Derive the five named substreams from a master seed."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(child)
            for name, child in zip(_STREAMS, children)}


_PLACEMENT_RETRIES = 10_000


class World:
    """A fully initialized simulation: grid, products, consumers, ties."""

    def __init__(self, config: RunConfig):
        problems = config.validate()
        if problems:
            raise ConfigError(problems)
        self.config = config
        self.social = config.social
        streams = spawn_streams(config.seed)
        self.rng = streams["cycle"]

        self.types: list[ProductType] = generate_type_set(
            config.n_types, config.min_type_distance, streams["types"],
            max_attempts=config.max_type_attempts, slope=config.utility_slope,
            step=config.relax_step, tol=config.relax_tol,
            max_iter=config.relax_max_iter, min_separation=config.overlap_angle,
            separation_weight=config.overlap_weight)

        self.space = ConsumptionSpace(config.width, config.height,
                                      config.proximity_radius)
        self._place_products(streams["placement"])
        self._place_consumers(streams["placement"], streams["som"])
        self.space.rebuild_field()
        self.network = watts_strogatz(
            config.n_consumers, config.ws_degree, config.ws_beta,
            streams["network"], config.initial_tie_strength)
        self.cycle = 0
        self.consumption_events = 0
        self._pending_respawns: list[int] = []

    # -- initialization ------------------------------------------------------

    def _random_cell(self, rng) -> GridLocation:
        return GridLocation(int(rng.integers(0, self.config.width)),
                            int(rng.integers(0, self.config.height)))

    def _place_products(self, rng) -> None:
        instance_id = 0
        for ptype in self.types:
            for _ in range(self.config.replicas_per_type):
                for _ in range(_PLACEMENT_RETRIES):
                    loc = self._random_cell(rng)
                    if self.space.product_at(loc) is None:
                        self.space.place_product(ProductInstance(
                            instance_id, ptype.type_id, loc))
                        instance_id += 1
                        break
                else:
                    raise ConfigError(["product placement failed; density too high"])

    def _place_consumers(self, rng_place, rng_som) -> None:
        cfg = self.config
        # every consumer starts from the same ideal: the componentwise mean
        # of the type signatures
        shared_ideal = signature_matrix(self.types).mean(axis=0)
        som_kwargs = dict(alpha0=cfg.som_alpha, alpha_decay=cfg.som_alpha_decay,
                          alpha_floor=cfg.som_alpha_floor,
                          radius_decay=cfg.som_radius_decay,
                          radius_floor=cfg.som_radius_floor)
        self.consumers: list[Consumer] = []
        for cid in range(cfg.n_consumers):
            for _ in range(_PLACEMENT_RETRIES):
                loc = self._random_cell(rng_place)
                if self.space.consumer_at(loc) is None:
                    break
            else:
                raise ConfigError(["consumer placement failed; density too high"])
            self.space.place_consumer(cid, loc)
            perception = SelfOrganizingMap.random_init(
                cfg.perception_rows, cfg.perception_cols, SIGNATURE_DIM,
                rng_som, cfg.som_weight_low, cfg.som_weight_high, **som_kwargs)
            conception = SelfOrganizingMap.random_init(
                cfg.conception_nodes, 1, SIGNATURE_DIM + 1,
                rng_som, cfg.som_weight_low, cfg.som_weight_high, **som_kwargs)
            self.consumers.append(Consumer(
                id=cid, location=loc, ideal=shared_ideal.copy(),
                perception=perception,
                attract=AttractivenessState(conception, threshold=0.0,
                                            adapt_rate=cfg.threshold_rate),
                recent_utilities=deque(maxlen=cfg.utility_window)))

    # -- cycle loop -----------------------------------------------------------

    def queue_respawn(self, instance_id: int) -> None:
        self._pending_respawns.append(instance_id)
        self.consumption_events += 1

    def step(self) -> None:
        """One clock cycle: tie decay (social runs), agents act in a freshly
        permuted order, adjacency strengthens ties (social runs), consumed
        products respawn."""
        cfg = self.config
        self.cycle += 1
        if self.social:
            self.network.decay_all(cfg.tie_decay, cfg.tie_removal_floor)
        order = self.rng.permutation(cfg.n_consumers)
        for idx in order:
            consumer = self.consumers[int(idx)]
            evaluate_situations(consumer, self)
            act(consumer, self, self.rng)
            if consumer.consuming is None:
                consumer.boredom_count += 1
        if self.social:
            self._strengthen_contacts()
        for instance_id in self._pending_respawns:
            self.space.respawn_product(instance_id, self.rng, cfg.respawn_sigma)
        self._pending_respawns.clear()

    def _strengthen_contacts(self) -> None:
        # physical contact: von Neumann adjacency, once per pair per cycle
        space = self.space
        pairs = set()
        for consumer in self.consumers:
            for nb in space.von_neumann_neighbors(consumer.location):
                other = space.consumer_at(nb)
                if other is not None:
                    a, b = consumer.id, other
                    pairs.add((a, b) if a < b else (b, a))
        for a, b in sorted(pairs):
            self.network.strengthen(a, b, self.config.tie_boost)

    # -- integrity -------------------------------------------------------------

    def audit(self) -> None:
        cfg = self.config
        self.space.audit(cfg.n_consumers, cfg.n_types * cfg.replicas_per_type)
        for consumer in self.consumers:
            assert self.space.consumer_locations[consumer.id] == consumer.location, \
                f"consumer {consumer.id} location desync"
            assert np.all(np.isfinite(consumer.ideal)), \
                f"consumer {consumer.id} ideal not finite"
            assert np.all(consumer.ideal >= 0.0), \
                f"consumer {consumer.id} ideal went negative"
        if self.social:
            self.network.audit()

    def state_checksum(self) -> str:
        """Digest of types, placements, consumer state (including map
        weights) and the tie graph; used to verify pair identity."""
        h = hashlib.sha256()
        for t in self.types:
            h.update(struct.pack("<ii", t.type_id, t.topology.edge_count))
            for i, j in t.topology.edges:
                h.update(struct.pack("<ii", i, j))
            h.update(np.ascontiguousarray(t.signature).tobytes())
            h.update(struct.pack("<d", t.utility))
        for pid in sorted(self.space.products):
            inst = self.space.products[pid]
            h.update(struct.pack("<iiii", pid, inst.type_id,
                                 inst.location.x, inst.location.y))
        for c in self.consumers:
            h.update(struct.pack("<iii", c.id, c.location.x, c.location.y))
            h.update(np.ascontiguousarray(c.ideal).tobytes())
            h.update(struct.pack("<d", c.attract.threshold))
            h.update(struct.pack("<i", list(Expectation).index(c.expectation)))
            h.update(np.ascontiguousarray(c.perception.weights).tobytes())
            h.update(np.ascontiguousarray(c.attract.som.weights).tobytes())
        h.update(self.network.checksum().encode())
        return h.hexdigest()


def prime_consumers(world: World) -> None:
    """Expose every consumer to each product type in type-id order:
    perceive, assess (once the map has learned anything), then one learning
    step on both maps with the type's signature and utility."""
    for consumer in world.consumers:
        for ptype in world.types:
            consumer.perception.perceive(ptype.signature)
            if consumer.attract.som.steps > 0:
                consumer.attract.assess(ptype.signature)
            consumer.perception.train(ptype.signature)
            consumer.attract.learn(ptype.signature, ptype.utility)


def init_world(config: RunConfig) -> World:
    world = World(config)
    prime_consumers(world)
    return world


# ---------------------------------------------------------------------------
# samples, metrics, results


@dataclass
class PeriodSample:
    """Per-period record: consumption deltas since the previous sample and a
    copy of every consumer's ideal vector."""

    cycle: int
    units: list[int]
    utility: list[float]
    ideals: np.ndarray          # (n_consumers, 6)
    total_units: int
    total_utility: float


def make_sample(cycle: int, units: list[int], utility: list[float],
                ideals: np.ndarray) -> PeriodSample:
    return PeriodSample(cycle, units, utility, ideals,
                        sum(units), sum(utility))


@dataclass
class RunMetrics:
    mean_units: float
    mean_utility: float
    utility_per_unit: Optional[float]   # None when nothing was consumed
    mean_coverage: float
    mean_path_length: float
    trend_slope: float
    trend_slope_p: float


METRIC_NAMES = ("mean_units", "mean_utility", "utility_per_unit",
                "mean_coverage", "mean_path_length")


def value_coverage(trajectory, cell_width: float) -> int:
    """Distinct cells of an axis-aligned 6-D lattice (edge `cell_width`)
    visited by a sampled ideal-vector trajectory."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < 1:
        raise ValueError("trajectory must be a non-empty (n, d) array")
    if cell_width <= 0.0:
        raise ValueError("cell_width must be positive")
    cells = np.floor(traj / cell_width).astype(np.int64)
    return int(np.unique(cells, axis=0).shape[0])


def value_path_length(trajectory) -> float:
    """Sum of Euclidean distances between consecutive sampled ideals."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < 1:
        raise ValueError("trajectory must be a non-empty (n, d) array")
    if traj.shape[0] == 1:
        return 0.0
    diffs = np.diff(traj, axis=0)
    return float(np.sqrt((diffs * diffs).sum(axis=1)).sum())


def run_metrics(samples: list[PeriodSample], config: RunConfig) -> RunMetrics:
    """Per-run summary statistics. The trend regression discards samples in
    the transient window (first `transient_cycles` cycles)."""
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    n_consumers = len(samples[0].units)
    total_units = np.array([s.total_units for s in samples], dtype=float)
    total_utility = np.array([s.total_utility for s in samples], dtype=float)
    overall_units = sum(s.total_units for s in samples)
    overall_utility = sum(s.total_utility for s in samples)
    per_consumer = [np.array([s.ideals[i] for s in samples])
                    for i in range(n_consumers)]
    coverage = [value_coverage(traj, config.coverage_cell_width)
                for traj in per_consumer]
    paths = [value_path_length(traj) for traj in per_consumer]
    steady = [k for k, s in enumerate(samples) if s.cycle > config.transient_cycles]
    if len(steady) >= 2:
        xs = np.array([samples[k].cycle for k in steady], dtype=float)
        ys = total_units[steady]
        slope, _ = stats.linreg_slope(xs, ys)
        slope_p = stats.slope_zero_test(xs, ys).p_value
    else:
        slope, slope_p = 0.0, 1.0
    return RunMetrics(
        mean_units=float(np.mean(total_units)),
        mean_utility=float(np.mean(total_utility)),
        utility_per_unit=(overall_utility / overall_units
                          if overall_units > 0 else None),
        mean_coverage=float(np.mean(coverage)),
        mean_path_length=float(np.mean(paths)),
        trend_slope=slope,
        trend_slope_p=slope_p)


@dataclass
class RunResult:
    config: RunConfig
    init_checksum: str
    network_checksum_start: str
    network_checksum_end: str
    samples: list[PeriodSample]
    fdc: Optional[float]
    consumption_events: int
    metrics: RunMetrics


@dataclass
class PairResult:
    seed: int
    social: RunResult
    nonsocial: RunResult


def run(config: RunConfig, audit_every: int = 0) -> RunResult:
    """Execute one full simulation and collect samples every
    `sample_every` cycles."""
    world = init_world(config)
    init_checksum = world.state_checksum()
    net_start = world.network.checksum()
    n = config.n_consumers
    last_units = [0] * n
    last_utility = [0.0] * n
    samples: list[PeriodSample] = []
    for cycle in range(1, config.cycles + 1):
        world.step()
        if audit_every and cycle % audit_every == 0:
            world.audit()
        if cycle % config.sample_every == 0:
            units = [world.consumers[i].units_consumed - last_units[i]
                     for i in range(n)]
            utility = [world.consumers[i].utility_total - last_utility[i]
                       for i in range(n)]
            ideals = np.array([world.consumers[i].ideal for i in range(n)])
            samples.append(make_sample(cycle, units, utility, ideals))
            last_units = [world.consumers[i].units_consumed for i in range(n)]
            last_utility = [world.consumers[i].utility_total for i in range(n)]
    radius = config.maxima_radius if config.maxima_radius > 0 else None
    try:
        _, distances = landscape_distances(world.types, radius)
        run_fdc = stats.fdc([t.utility for t in world.types], distances)
    except ValueError:
        run_fdc = None
    return RunResult(
        config=config,
        init_checksum=init_checksum,
        network_checksum_start=net_start,
        network_checksum_end=world.network.checksum(),
        samples=samples,
        fdc=run_fdc,
        consumption_events=world.consumption_events,
        metrics=run_metrics(samples, config))


def run_pair(seed: int, base_config: RunConfig, audit_every: int = 0) -> PairResult:
    """Two runs sharing one seed, differing only in the social flag. The
    initial states must agree bit-exactly; a checksum mismatch is an
    internal determinism fault."""
    social = run(base_config.with_overrides(seed=seed, social=True),
                 audit_every=audit_every)
    nonsocial = run(base_config.with_overrides(seed=seed, social=False),
                    audit_every=audit_every)
    if social.init_checksum != nonsocial.init_checksum:
        raise RuntimeError(
            f"pair determinism fault for seed {seed}: initial checksums differ")
    return PairResult(seed=seed, social=social, nonsocial=nonsocial)


def _pair_worker(args: tuple[int, RunConfig]) -> PairResult:
    seed, config = args
    return run_pair(seed, config)


def batch(n_pairs: int, seed_base: int, config: RunConfig,
          workers: int = 1) -> list[PairResult]:
    """Run `n_pairs` independent pairs at seeds seed_base, seed_base+1, ...
    Results come back in seed order regardless of worker count."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    seeds = [seed_base + i for i in range(n_pairs)]
    if workers <= 1:
        return [run_pair(seed, config) for seed in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_pair_worker, [(s, config) for s in seeds]))


# ---------------------------------------------------------------------------
# run CSV and summary CSV

RUN_CSV_HEADER = ["cycle", "consumer_id", "units", "utility",
                  "i0", "i1", "i2", "i3", "i4", "i5"]

SUMMARY_HEADER = ["seed", "social", "fdc", "mean_units", "mean_utility",
                  "utility_per_unit", "mean_coverage", "mean_path_length",
                  "trend_slope", "trend_slope_p"]


def run_file_name(seed: int, social: bool) -> str:
    return f"run_{seed}_{'social' if social else 'nonsocial'}.csv"


def write_run_csv(result: RunResult, path: str) -> None:
    rows = []
    for sample in result.samples:
        for cid in range(len(sample.units)):
            row = [str(sample.cycle), str(cid), str(sample.units[cid]),
                   fmt_float(sample.utility[cid])]
            row.extend(fmt_float(float(v)) for v in sample.ideals[cid])
            rows.append(row)
    write_csv(path, RUN_CSV_HEADER, rows)


def read_run_samples(path: str) -> list[PeriodSample]:
    """Rebuild period samples from a run CSV; consumption totals are
    recomputed exactly as the simulation computed them."""
    groups: dict[int, tuple[list[int], list[float], list[np.ndarray]]] = {}
    order: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != RUN_CSV_HEADER:
            raise ValueError(f"{path}: unexpected run CSV header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            cycle = int(parts[0])
            if cycle not in groups:
                groups[cycle] = ([], [], [])
                order.append(cycle)
            units, utility, ideals = groups[cycle]
            units.append(int(parts[2]))
            utility.append(float(parts[3]))
            ideals.append(np.array([float(v) for v in parts[4:10]]))
    samples = []
    for cycle in order:
        units, utility, ideals = groups[cycle]
        samples.append(make_sample(cycle, units, utility, np.array(ideals)))
    return samples


def summary_row(result: RunResult) -> list[str]:
    m = result.metrics
    return [
        str(result.config.seed),
        "true" if result.config.social else "false",
        "undefined" if result.fdc is None else fmt_float(result.fdc),
        fmt_float(m.mean_units),
        fmt_float(m.mean_utility),
        "undefined" if m.utility_per_unit is None else fmt_float(m.utility_per_unit),
        fmt_float(m.mean_coverage),
        fmt_float(m.mean_path_length),
        fmt_float(m.trend_slope),
        fmt_float(m.trend_slope_p),
    ]


def write_summary_csv(results: list[RunResult], path: str) -> None:
    write_csv(path, SUMMARY_HEADER, [summary_row(r) for r in results])
