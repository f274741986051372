"""Differential evolution over the edge-type usefulness vector.

The genome is the ten-component usefulness vector, kept inside the unit
box.  Fitness asks how well the personalized walk reproduces each
training target's observed reference ordering: every reference pays its
rank displacement in the top-n recommendation list, or a fixed penalty
when it misses the list entirely, and fitness is the inverse of one
plus the total cost, so a perfect reproduction scores one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import HeteroGraph, NodeId, PAPER, check_usefulness, recommend_top_n

logger = logging.getLogger(__name__)


@dataclass
class Individual:
    genome: np.ndarray
    fitness: float | None = None

    def copy(self) -> "Individual":
        return Individual(self.genome.copy(), self.fitness)


@dataclass
class EvolutionConfig:
    population_size: int = 24
    generations: int = 100
    scale_factor: float = 0.5
    crossover_rate: float = 0.9
    penalty: float | None = None  # None: ten times the target's reference count
    seed: int = 0

    def validate(self) -> None:
        if self.population_size < 4:
            raise ValueError("population size must be at least 4")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover rate must be in [0, 1]")
        if self.scale_factor <= 0.0:
            raise ValueError("scale factor must be positive")
        if self.penalty is not None and self.penalty <= 0.0:
            raise ValueError("penalty must be positive")


def ranking_cost(
    eud,
    targets,
    graph: HeteroGraph,
    penalty: float | None = None,
    damping: float = 0.85,
) -> float:
    """Total rank displacement of the observed references.

    targets is a list of (target paper id, ordered reference ids).  For
    each target the walk recommends as many papers as it has references;
    reference j (0-based) at recommended rank r costs |j - r|, and a
    reference outside the list costs the penalty (ten times the
    reference count when unset).
    """
    eud = check_usefulness(eud)
    operator = graph.transition_operator(eud)
    total = 0.0
    for target_id, ref_ids in targets:
        n = len(ref_ids)
        if n == 0:
            continue
        rec = recommend_top_n(
            graph, eud, NodeId(PAPER, target_id), n,
            damping=damping, operator=operator,
        )
        rank = {pid: r for r, pid in enumerate(rec.paper_ids)}
        miss = penalty if penalty is not None else 10.0 * n
        for j, rid in enumerate(ref_ids):
            total += abs(j - rank[rid]) if rid in rank else miss
    return total


def fitness(
    eud,
    targets,
    graph: HeteroGraph,
    penalty: float | None = None,
    damping: float = 0.85,
) -> float:
    """Inverse of one plus the total ranking cost; one means perfect."""
    return 1.0 / (1.0 + ranking_cost(eud, targets, graph, penalty, damping))


def de_mutate(r1: Individual, r2: Individual, r3: Individual, scale: float) -> np.ndarray:
    """Difference mutation r1 + scale * (r2 - r3), clamped to the unit box."""
    if r1 is r2 or r1 is r3 or r2 is r3:
        raise ValueError("mutation requires three distinct individuals")
    variant = r1.genome + scale * (r2.genome - r3.genome)
    return np.clip(variant, 0.0, 1.0)


def de_crossover(
    variant: np.ndarray, trial: np.ndarray, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Per-component binomial mix: take the variant where the draw is <= rate."""
    draws = rng.random(len(trial))
    return np.where(draws <= rate, variant, trial)


@dataclass
class EvolveResult:
    best: Individual
    history: list[float]  # best-so-far fitness after init and each generation


def _grouped(graph, targets):
    """Normalize the (graph, targets) input to a list of group pairs.

    A single snapshot covers the common case; a mapping of year to
    snapshot with (target id, reference ids, year) targets supports
    corpora whose targets need different historical cutoffs.
    """
    if isinstance(graph, HeteroGraph):
        return [(graph, [(t, list(r)) for t, r in targets])]
    groups = {}
    for target_id, ref_ids, year in targets:
        groups.setdefault(year, []).append((target_id, list(ref_ids)))
    missing = [y for y in groups if y not in graph]
    if missing:
        raise ValueError(f"no graph snapshot for years {sorted(missing)}")
    return [(graph[year], groups[year]) for year in sorted(groups)]


def evolve(graph, targets, config: EvolutionConfig) -> EvolveResult:
    """Tune the usefulness vector by differential evolution.

    Candidate replaces incumbent when its fitness is at least as high,
    so the best fitness never decreases across generations.
    """
    config.validate()
    groups = _grouped(graph, targets)

    def evaluate(genome: np.ndarray) -> float:
        cost = sum(
            ranking_cost(genome, ts, g, config.penalty) for g, ts in groups
        )
        return 1.0 / (1.0 + cost)

    rng = np.random.default_rng(config.seed)
    pop_size = config.population_size
    population = [
        Individual(rng.random(10)) for _ in range(pop_size)
    ]
    for ind in population:
        ind.fitness = evaluate(ind.genome)
    best = max(population, key=lambda ind: ind.fitness).copy()
    history = [best.fitness]

    for generation in range(config.generations):
        for i in range(pop_size):
            picks = []
            while len(picks) < 3:
                j = int(rng.integers(pop_size))
                if j != i and j not in picks:
                    picks.append(j)
            r1, r2, r3 = (population[j] for j in picks)
            variant = de_mutate(r1, r2, r3, config.scale_factor)
            hybrid = de_crossover(variant, population[i].genome, config.crossover_rate, rng)
            hybrid_fitness = evaluate(hybrid)
            if hybrid_fitness >= population[i].fitness:
                population[i] = Individual(hybrid, hybrid_fitness)
                if hybrid_fitness > best.fitness:
                    best = population[i].copy()
        history.append(best.fitness)
        logger.info(
            "generation %d/%d: best fitness %.6f",
            generation + 1, config.generations, best.fitness,
        )
    return EvolveResult(best=best, history=history)
