//! A small evolutionary search driven by pairwise comparisons, and the
//! cost model for training every candidate network from scratch.
//!
//! Selection only ever sees a [`Comparator`]. True fitness is read after
//! each generation for the log, never while choosing parents or survivors.

use std::cell::Cell;
use std::fmt;

use rand::seq::index;
use rand::Rng;

use crate::dataset::{FeatureVector, SyntheticSpace};
use crate::error::{Error, Result};
use crate::evaluation::{Order, PairRanker};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub batches_per_epoch: u64,
    pub train_steps_per_individual: u64,
    pub hours_per_individual: f64,
    pub total_days: f64,
}

/// Wall-clock cost of training `individuals` networks, `gpus` at a time.
pub fn estimate_cost(
    samples: u64,
    batch_size: u64,
    epochs: u64,
    minutes_per_epoch: f64,
    individuals: u64,
    gpus: u64,
) -> Result<CostEstimate> {
    if samples == 0 || batch_size == 0 || epochs == 0 || individuals == 0 || gpus == 0 {
        return Err(Error::InvalidArgument(
            "cost inputs must be positive".into(),
        ));
    }
    if !(minutes_per_epoch > 0.0 && minutes_per_epoch.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "minutes per epoch must be positive, got {minutes_per_epoch}"
        )));
    }
    let batches_per_epoch = samples.div_ceil(batch_size);
    let hours_per_individual = epochs as f64 * minutes_per_epoch / 60.0;
    Ok(CostEstimate {
        batches_per_epoch,
        train_steps_per_individual: epochs * batches_per_epoch,
        hours_per_individual,
        total_days: individuals as f64 * hours_per_individual / 24.0 / gpus as f64,
    })
}

/// Per-position inclusive integer bounds of a genotype.
pub trait SearchSpace {
    fn bounds(&self) -> &[(i32, i32)];

    fn contains(&self, genotype: &[i32]) -> bool {
        let bounds = self.bounds();
        genotype.len() == bounds.len()
            && genotype
                .iter()
                .zip(bounds)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }
}

/// A search space whose true fitness can be measured.
pub trait FitnessOracle: SearchSpace {
    fn fitness(&self, genotype: &FeatureVector) -> f64;
}

impl SearchSpace for SyntheticSpace {
    fn bounds(&self) -> &[(i32, i32)] {
        SyntheticSpace::bounds(self)
    }
}

impl FitnessOracle for SyntheticSpace {
    fn fitness(&self, genotype: &FeatureVector) -> f64 {
        self.performance(genotype)
    }
}

/// Counts fitness reads while armed.
pub struct Tripwire<'a> {
    inner: &'a dyn FitnessOracle,
    armed: Cell<bool>,
    reads: Cell<usize>,
}

impl<'a> Tripwire<'a> {
    pub fn new(inner: &'a dyn FitnessOracle) -> Self {
        Tripwire {
            inner,
            armed: Cell::new(false),
            reads: Cell::new(0),
        }
    }

    pub fn arm(&self) {
        self.armed.set(true);
    }

    pub fn disarm(&self) {
        self.armed.set(false);
    }

    /// Reads made while armed.
    pub fn reads(&self) -> usize {
        self.reads.get()
    }
}

impl SearchSpace for Tripwire<'_> {
    fn bounds(&self) -> &[(i32, i32)] {
        self.inner.bounds()
    }
}

impl FitnessOracle for Tripwire<'_> {
    fn fitness(&self, genotype: &FeatureVector) -> f64 {
        if self.armed.get() {
            self.reads.set(self.reads.get() + 1);
        }
        self.inner.fitness(genotype)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: FeatureVector,
    /// Filled in only when the log measures a population.
    pub true_fitness: Option<f64>,
}

impl Individual {
    pub fn new(genotype: FeatureVector) -> Self {
        Individual {
            genotype,
            true_fitness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Individual>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// How two individuals are ordered during selection.
pub enum Comparator<'a> {
    Oracle(&'a dyn FitnessOracle),
    Predictor(&'a dyn PairRanker),
}

/// A comparator that counts its invocations.
pub struct Selector<'a> {
    comparator: &'a Comparator<'a>,
    calls: Cell<usize>,
}

impl<'a> Selector<'a> {
    pub fn new(comparator: &'a Comparator<'a>) -> Self {
        Selector {
            comparator,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    /// FIRST when `a` wins; ties go to `a`.
    pub fn compare(&self, a: &Individual, b: &Individual) -> Result<Order> {
        self.calls.set(self.calls.get() + 1);
        match self.comparator {
            Comparator::Oracle(oracle) => Ok(
                if oracle.fitness(&a.genotype) >= oracle.fitness(&b.genotype) {
                    Order::First
                } else {
                    Order::Second
                },
            ),
            Comparator::Predictor(ranker) => ranker.order(&a.genotype, &b.genotype),
        }
    }
}

/// Index into `members` of the winner among `k` distinct uniformly drawn
/// candidates, decided by a chain of `k - 1` comparisons in draw order.
pub fn tournament_select<R: Rng + ?Sized>(
    members: &[Individual],
    selector: &Selector<'_>,
    k: usize,
    rng: &mut R,
) -> Result<usize> {
    if k < 2 || k > members.len() {
        return Err(Error::InvalidArgument(format!(
            "tournament size {k} needs 2 <= k <= {}",
            members.len()
        )));
    }
    let drawn = index::sample(rng, members.len(), k).into_vec();
    chain(members, selector, &drawn)
}

/// Index of the left-fold winner over the whole population.
pub fn elitism_select(members: &[Individual], selector: &Selector<'_>) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let all: Vec<usize> = (0..members.len()).collect();
    chain(members, selector, &all)
}

fn chain(members: &[Individual], selector: &Selector<'_>, candidates: &[usize]) -> Result<usize> {
    let mut winner = candidates[0];
    for &c in &candidates[1..] {
        if selector.compare(&members[winner], &members[c])? == Order::Second {
            winner = c;
        }
    }
    Ok(winner)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-gene probability of a uniform reset.
    pub mutation: f64,
    /// Probability that a parent pair is recombined rather than copied.
    pub crossover: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 20,
            generations: 30,
            mutation: 0.1,
            crossover: 0.9,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig(format!(
                "population must be at least 2, got {}",
                self.population
            )));
        }
        for (name, rate) in [("mutation", self.mutation), ("crossover", self.crossover)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} rate {rate} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Distinct genotypes the search creates: the initial population plus
    /// one batch of offspring per generation.
    pub fn individuals_created(&self) -> usize {
        self.population * (self.generations + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    pub best: f64,
    pub median: f64,
    pub genetic_calls: usize,
    pub environmental_calls: usize,
}

impl fmt::Display for GenerationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "generation={} best={} median={} genetic_calls={} environmental_calls={}",
            self.generation, self.best, self.median, self.genetic_calls, self.environmental_calls
        )
    }
}

/// Populations and comparator counts of a search, before any measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Generation 0 is the random initial population.
    pub populations: Vec<Population>,
    pub genetic_calls: Vec<usize>,
    pub environmental_calls: Vec<usize>,
    pub final_calls: usize,
    pub best: Individual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Individual,
    pub log: Vec<GenerationLog>,
    pub trajectory: Trajectory,
}

impl SearchOutcome {
    pub fn log_lines(&self) -> String {
        let mut out: String = self.log.iter().map(|l| format!("{l}\n")).collect();
        out.push_str(&format!(
            "final best={} final_calls={}\n",
            self.best.true_fitness.unwrap_or(f64::NAN),
            self.trajectory.final_calls
        ));
        out
    }
}

/// Runs the evolutionary loop. Only the comparator is consulted.
pub fn evolve_trajectory(
    config: &SearchConfig,
    space: &dyn SearchSpace,
    comparator: &Comparator<'_>,
) -> Result<Trajectory> {
    config.validate()?;
    let bounds = space.bounds();
    if bounds.is_empty() {
        return Err(Error::InvalidArgument("search space has no genes".into()));
    }
    let mut rng = rng::stream(config.seed, 0xE7A5);
    let n = config.population;
    let mut members: Vec<Individual> = (0..n)
        .map(|_| Individual::new(random_genotype(bounds, &mut rng)))
        .collect();
    let mut populations = vec![Population {
        members: members.clone(),
    }];
    let mut genetic_calls = vec![0];
    let mut environmental_calls = vec![0];

    for _ in 0..config.generations {
        let genetic = Selector::new(comparator);
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = tournament_select(&members, &genetic, 2, &mut rng)?;
            let b = tournament_select(&members, &genetic, 2, &mut rng)?;
            let (mut x, mut y) = (members[a].genotype.to_vec(), members[b].genotype.to_vec());
            if rng.random_bool(config.crossover) {
                for g in 0..x.len() {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut x[g], &mut y[g]);
                    }
                }
            }
            for child in [x, y] {
                if offspring.len() < n {
                    offspring.push(Individual::new(mutate(
                        child,
                        bounds,
                        config.mutation,
                        &mut rng,
                    )));
                }
            }
        }

        let environmental = Selector::new(comparator);
        let mut pool = members;
        pool.extend(offspring);
        let mut next = Vec::with_capacity(n);
        let elite = elitism_select(&pool, &environmental)?;
        next.push(pool.remove(elite));
        while next.len() < n {
            let w = tournament_select(&pool, &environmental, 2, &mut rng)?;
            next.push(pool.remove(w));
        }
        members = next;
        populations.push(Population {
            members: members.clone(),
        });
        genetic_calls.push(genetic.calls());
        environmental_calls.push(environmental.calls());
    }

    let last = Selector::new(comparator);
    let best = members[elitism_select(&members, &last)?].clone();
    Ok(Trajectory {
        populations,
        genetic_calls,
        environmental_calls,
        final_calls: last.calls(),
        best,
    })
}

/// Measures every logged population with `oracle`.
pub fn measure(trajectory: Trajectory, oracle: &dyn FitnessOracle) -> SearchOutcome {
    let mut trajectory = trajectory;
    let mut log = Vec::with_capacity(trajectory.populations.len());
    for (g, pop) in trajectory.populations.iter_mut().enumerate() {
        for m in &mut pop.members {
            m.true_fitness = Some(oracle.fitness(&m.genotype));
        }
        let mut values: Vec<f64> = pop.members.iter().filter_map(|m| m.true_fitness).collect();
        values.sort_by(f64::total_cmp);
        log.push(GenerationLog {
            generation: g,
            best: values[values.len() - 1],
            median: median_sorted(&values),
            genetic_calls: trajectory.genetic_calls[g],
            environmental_calls: trajectory.environmental_calls[g],
        });
    }
    trajectory.best.true_fitness = Some(oracle.fitness(&trajectory.best.genotype));
    SearchOutcome {
        best: trajectory.best.clone(),
        log,
        trajectory,
    }
}

/// Runs the search, then measures it.
pub fn evolve(
    config: &SearchConfig,
    space: &dyn FitnessOracle,
    comparator: &Comparator<'_>,
) -> Result<SearchOutcome> {
    let trajectory = evolve_trajectory(config, space, comparator)?;
    Ok(measure(trajectory, space))
}

/// Equal-budget reference: as many uniform random genotypes as the search
/// creates, with the final pick made by the same comparator.
pub fn random_sampling(
    config: &SearchConfig,
    space: &dyn FitnessOracle,
    comparator: &Comparator<'_>,
) -> Result<Individual> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, 0x5A3D);
    let members: Vec<Individual> = (0..config.individuals_created())
        .map(|_| Individual::new(random_genotype(space.bounds(), &mut rng)))
        .collect();
    let selector = Selector::new(comparator);
    let mut best = members[elitism_select(&members, &selector)?].clone();
    best.true_fitness = Some(space.fitness(&best.genotype));
    Ok(best)
}

fn random_genotype(bounds: &[(i32, i32)], rng: &mut StreamRng) -> FeatureVector {
    bounds
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect::<Vec<_>>()
        .into()
}

fn mutate(
    mut genes: Vec<i32>,
    bounds: &[(i32, i32)],
    rate: f64,
    rng: &mut StreamRng,
) -> FeatureVector {
    for (g, &(lo, hi)) in genes.iter_mut().zip(bounds) {
        if rng.random_bool(rate) {
            *g = rng.random_range(lo..=hi);
        }
    }
    genes.into()
}

fn median_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Table(Vec<(i32, i32)>);

    impl SearchSpace for Table {
        fn bounds(&self) -> &[(i32, i32)] {
            &self.0
        }
    }

    impl FitnessOracle for Table {
        fn fitness(&self, g: &FeatureVector) -> f64 {
            g.iter().map(|&v| f64::from(v)).sum()
        }
    }

    struct AlwaysSecond;

    impl PairRanker for AlwaysSecond {
        fn order(&self, _: &FeatureVector, _: &FeatureVector) -> Result<Order> {
            Ok(Order::Second)
        }
    }

    fn ind(v: i32) -> Individual {
        Individual::new(vec![v].into())
    }

    #[test]
    fn cost_matches_reference_figures() {
        let c = estimate_cost(50_000, 128, 500, 2.0, 1000, 1).unwrap();
        assert_eq!(c.batches_per_epoch, 391);
        assert_eq!(c.train_steps_per_individual, 195_500);
        assert!((c.hours_per_individual - 50.0 / 3.0).abs() < 1e-12);
        assert!((c.total_days - 1000.0 * 50.0 / 3.0 / 24.0).abs() < 1e-9);
        let c20 = estimate_cost(50_000, 128, 500, 2.0, 1000, 20).unwrap();
        assert!((c20.total_days * 20.0 - c.total_days).abs() < 1e-9);
        assert!(estimate_cost(0, 128, 500, 2.0, 1, 1).is_err());
        assert!(estimate_cost(1, 128, 500, 0.0, 1, 1).is_err());
    }

    #[test]
    fn oracle_compare_prefers_first_on_ties() {
        let space = Table(vec![(0, 9)]);
        let cmp = Comparator::Oracle(&space);
        let s = Selector::new(&cmp);
        assert_eq!(s.compare(&ind(9), &ind(1)).unwrap(), Order::First);
        assert_eq!(s.compare(&ind(4), &ind(4)).unwrap(), Order::First);
        assert_eq!(s.compare(&ind(1), &ind(9)).unwrap(), Order::Second);
        let stub = Comparator::Predictor(&AlwaysSecond);
        assert_eq!(
            Selector::new(&stub).compare(&ind(9), &ind(1)).unwrap(),
            Order::Second
        );
    }

    #[test]
    fn selection_call_counts() {
        let space = Table(vec![(0, 9)]);
        let cmp = Comparator::Oracle(&space);
        let members: Vec<Individual> = [3, 7, 1, 7, 5].into_iter().map(ind).collect();
        let s = Selector::new(&cmp);
        assert_eq!(elitism_select(&members, &s).unwrap(), 1);
        assert_eq!(s.calls(), 4);
        let s = Selector::new(&cmp);
        let mut rng = rng::seeded(3);
        tournament_select(&members, &s, 4, &mut rng).unwrap();
        assert_eq!(s.calls(), 3);
        assert!(tournament_select(&members, &s, 6, &mut rng).is_err());
        let pair = [ind(2), ind(8)];
        assert_eq!(tournament_select(&pair, &s, 2, &mut rng).unwrap(), 1);
    }

    #[test]
    fn population_size_and_bounds_hold() {
        let space = Table(vec![(0, 3), (-2, 2), (5, 5)]);
        let cmp = Comparator::Oracle(&space);
        let config = SearchConfig {
            population: 7,
            generations: 5,
            mutation: 0.5,
            crossover: 1.0,
            seed: 4,
        };
        let out = evolve(&config, &space, &cmp).unwrap();
        assert_eq!(out.log.len(), 6);
        for pop in &out.trajectory.populations {
            assert_eq!(pop.len(), 7);
            assert!(pop.members.iter().all(|m| space.contains(&m.genotype)));
        }
        for l in &out.log[1..] {
            assert_eq!(l.genetic_calls, 7 + 1);
            assert_eq!(l.environmental_calls, 13 + 6);
        }
        for w in out.log.windows(2) {
            assert!(w[1].best >= w[0].best);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let space = Table(vec![(0, 3)]);
        let cmp = Comparator::Oracle(&space);
        for config in [
            SearchConfig {
                population: 1,
                ..Default::default()
            },
            SearchConfig {
                mutation: 1.5,
                ..Default::default()
            },
            SearchConfig {
                crossover: -0.1,
                ..Default::default()
            },
        ] {
            assert!(evolve(&config, &space, &cmp).is_err());
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0, 5.0]), 2.5);
    }
}
