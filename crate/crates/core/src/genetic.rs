//! Genetic search over the weight simplex for the weighted consensus of a
//! sorted ensemble with the highest CPCC against the Euclidean matrix.
//!
//! One generation: the `elitism` fittest chromosomes are copied unchanged,
//! and the rest of the population is filled with children of
//! tournament-selected parents (whole-arithmetic crossover, then Gaussian
//! mutation with clamping and renormalization). The initial population
//! counts as the first generation, so `generations = 100` evaluates the
//! initial population plus 99 offspring populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cpcc::{cpcc, CpccReference};
use crate::dendrogram::Dendrogram;
use crate::ensemble::{generate_ensemble_from, EnsembleConfig};
use crate::error::{Error, Result};
use crate::fusion::{sort_ensemble, weighted_consensus, SortedEnsemble};
use crate::matrix::{euclidean_dissimilarity, DataMatrix, DissimilarityMatrix};
use crate::ultrametric::{dendrogram_from_ultrametric, subdominant_ultrametric};

/// Tolerance on the weight sum of a chromosome.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Random stream reserved for the GA; ensemble members use streams `0..L`.
pub const GA_STREAM: u64 = 1 << 32;

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome {
    weights: Vec<f64>,
}

impl Chromosome {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let c = Self { weights };
        if !c.is_valid() {
            return Err(Error::Contract(format!(
                "weights {:?} are not a point on the simplex",
                c.weights
            )));
        }
        Ok(c)
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        !self.weights.is_empty()
            && self.weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            && (self.weights.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
    }

    /// Divides by the sum; falls back to uniform when nothing is left.
    fn renormalized(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 1e-300 {
            weights.iter_mut().for_each(|w| *w /= total);
            Self { weights }
        } else {
            Self::uniform(weights.len())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_sigma: 0.05,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if self.population_size == 0 {
            return Err(Error::Config("population size must be positive".into()));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be positive".into()));
        }
        if !rate_ok(self.crossover_rate) || !rate_ok(self.mutation_rate) {
            return Err(Error::Config(format!(
                "rates must lie in [0, 1] (crossover {}, mutation {})",
                self.crossover_rate, self.mutation_rate
            )));
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "mutation sigma {} is invalid",
                self.mutation_sigma
            )));
        }
        if self.elitism > self.population_size {
            return Err(Error::Config(format!(
                "elitism {} exceeds population size {}",
                self.elitism, self.population_size
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(GA_STREAM);
        rng
    }
}

/// `population_size` chromosomes with genes drawn uniform on (0, 1), then
/// normalized.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &GaConfig,
    len: usize,
    rng: &mut R,
) -> Vec<Chromosome> {
    (0..cfg.population_size)
        .map(|_| loop {
            let genes: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            if genes.iter().sum::<f64>() >= 1e-300 {
                break Chromosome::renormalized(genes);
            }
        })
        .collect()
}

/// Scores chromosomes against a fixed sorted ensemble and reference.
///
/// The consensus is linear in the weights, so its CPCC only needs the
/// centered cross-products of the sorted matrices (`L x L`) and their
/// covariances with the reference (`L`). Both are computed once; a score
/// then costs `O(L^2)` instead of a pass over every pair. Scores agree
/// with [`fitness`] up to rounding.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator {
    len: usize,
    /// Row-major `L x L` centered cross-products.
    cross: Vec<f64>,
    /// Centered cross-products with the reference.
    target: Vec<f64>,
    reference_sum_sq: f64,
    reference_constant: bool,
}

/// Relative standard deviation below which a consensus counts as constant.
const CONSTANT_CONSENSUS: f64 = 1e-12;

impl FitnessEvaluator {
    pub fn new(sorted: &SortedEnsemble, e: &DissimilarityMatrix) -> Result<Self> {
        if sorted.n() != e.n() {
            return Err(Error::Structure(format!(
                "ensemble over {} points, reference over {}",
                sorted.n(),
                e.n()
            )));
        }
        let reference = CpccReference::new(e);
        let len = sorted.len();
        let pairs = reference.pairs() as f64;
        let means: Vec<f64> = sorted
            .matrices()
            .iter()
            .map(|m| m.entries().iter().sum::<f64>() / pairs)
            .collect();
        let mut cross = vec![0.0; len * len];
        let mut target = vec![0.0; len];
        let mut centered = vec![0.0; len];
        for (p, &r) in reference.centered().iter().enumerate() {
            for k in 0..len {
                centered[k] = sorted.matrices()[k].entries()[p] - means[k];
            }
            for j in 0..len {
                let cj = centered[j];
                target[j] += cj * r;
                for k in j..len {
                    cross[j * len + k] += cj * centered[k];
                }
            }
        }
        for j in 0..len {
            for k in 0..j {
                cross[j * len + k] = cross[k * len + j];
            }
        }
        Ok(Self {
            len,
            cross,
            target,
            reference_sum_sq: reference.sum_sq(),
            reference_constant: reference.is_constant(),
        })
    }

    pub fn evaluate(&self, c: &Chromosome) -> f64 {
        assert_eq!(c.len(), self.len, "chromosome length mismatch");
        if self.reference_constant {
            return 0.0;
        }
        let w = c.weights();
        let mut var = 0.0;
        let mut scale = 0.0;
        let mut num = 0.0;
        for j in 0..self.len {
            let row = &self.cross[j * self.len..(j + 1) * self.len];
            var += w[j] * row.iter().zip(w).map(|(x, wk)| x * wk).sum::<f64>();
            scale += w[j] * row[j].sqrt();
            num += w[j] * self.target[j];
        }
        if var <= (CONSTANT_CONSENSUS * scale).powi(2) {
            return 0.0;
        }
        (num / (var * self.reference_sum_sq).sqrt()).abs().min(1.0)
    }

    pub fn evaluate_all(&self, population: &[Chromosome]) -> Vec<f64> {
        population.iter().map(|c| self.evaluate(c)).collect()
    }
}

/// CPCC of the weighted consensus defined by `c` against `e`, evaluated
/// directly on the consensus matrix.
pub fn fitness(c: &Chromosome, sorted: &SortedEnsemble, e: &DissimilarityMatrix) -> Result<f64> {
    if c.len() != sorted.len() {
        return Err(Error::Contract(format!(
            "chromosome of length {} for {} matrices",
            c.len(),
            sorted.len()
        )));
    }
    cpcc(&weighted_consensus(sorted, c.weights())?, e)
}

fn tournament<R: Rng + ?Sized>(fitnesses: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..fitnesses.len());
    let b = rng.random_range(0..fitnesses.len());
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if fitnesses[hi] > fitnesses[lo] {
        hi
    } else {
        lo
    }
}

/// Indices of two parents, each the winner of a size-2 tournament.
/// Ties go to the lower index.
pub fn select<R: Rng + ?Sized>(
    population: &[Chromosome],
    fitnesses: &[f64],
    rng: &mut R,
) -> (usize, usize) {
    assert!(!population.is_empty(), "selection from an empty population");
    assert_eq!(population.len(), fitnesses.len());
    (tournament(fitnesses, rng), tournament(fitnesses, rng))
}

/// `(lambda * a + (1 - lambda) * b, (1 - lambda) * a + lambda * b)`.
pub fn blend(a: &Chromosome, b: &Chromosome, lambda: f64) -> (Chromosome, Chromosome) {
    let mix = |x: f64, y: f64, t: f64| t * x + (1.0 - t) * y;
    let c1 = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(&x, &y)| mix(x, y, lambda))
        .collect();
    let c2 = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(&x, &y)| mix(x, y, 1.0 - lambda))
        .collect();
    (Chromosome { weights: c1 }, Chromosome { weights: c2 })
}

/// Whole-arithmetic crossover applied with probability `rate`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rate: f64,
    rng: &mut R,
) -> (Chromosome, Chromosome) {
    if rng.random::<f64>() < rate {
        blend(a, b, rng.random::<f64>())
    } else {
        (a.clone(), b.clone())
    }
}

/// With probability `rate`, perturbs every gene by `N(0, sigma)`, clamps
/// at zero and renormalizes.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, rate: f64, sigma: f64, rng: &mut R) -> Chromosome {
    if rng.random::<f64>() >= rate || sigma == 0.0 {
        return c.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let genes = c
        .weights
        .iter()
        .map(|w| (w + noise.sample(rng)).max(0.0))
        .collect();
    Chromosome::renormalized(genes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_chromosome: Chromosome,
    /// `cpcc(consensus_matrix, e)`, evaluated directly.
    pub best_fitness: f64,
    pub consensus_matrix: DissimilarityMatrix,
    /// Best fitness of each generation, starting with the initial one, as
    /// scored by [`FitnessEvaluator`].
    pub fitness_trace: Vec<f64>,
}

/// Best index by fitness, lowest index on ties.
fn argmax(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fitnesses.iter().enumerate() {
        if f > fitnesses[best] {
            best = i;
        }
    }
    best
}

pub fn evolve(
    sorted: &SortedEnsemble,
    e: &DissimilarityMatrix,
    cfg: &GaConfig,
) -> Result<GaResult> {
    cfg.validate()?;
    let evaluator = FitnessEvaluator::new(sorted, e)?;
    let mut rng = cfg.rng();
    let k = cfg.population_size;

    let mut population = init_population(cfg, sorted.len(), &mut rng);
    let mut fitnesses = evaluator.evaluate_all(&population);
    let mut best_idx = argmax(&fitnesses);
    let mut best = (population[best_idx].clone(), fitnesses[best_idx]);
    let mut trace = Vec::with_capacity(cfg.generations);
    trace.push(fitnesses[best_idx]);

    for _ in 1..cfg.generations {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
        let mut next: Vec<Chromosome> = order[..cfg.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < k {
            let (i, j) = select(&population, &fitnesses, &mut rng);
            let (c1, c2) = crossover(&population[i], &population[j], cfg.crossover_rate, &mut rng);
            next.push(mutate(&c1, cfg.mutation_rate, cfg.mutation_sigma, &mut rng));
            if next.len() < k {
                next.push(mutate(&c2, cfg.mutation_rate, cfg.mutation_sigma, &mut rng));
            }
        }
        debug_assert!(next.iter().all(Chromosome::is_valid));
        population = next;
        fitnesses = evaluator.evaluate_all(&population);
        best_idx = argmax(&fitnesses);
        if fitnesses[best_idx] > best.1 {
            best = (population[best_idx].clone(), fitnesses[best_idx]);
        }
        trace.push(fitnesses[best_idx]);
    }

    let consensus_matrix = weighted_consensus(sorted, best.0.weights())?;
    let best_fitness = cpcc(&consensus_matrix, e)?;
    Ok(GaResult {
        best_chromosome: best.0,
        best_fitness,
        consensus_matrix,
        fitness_trace: trace,
    })
}

/// JSON export of a GA run: weights, fitness, trace and the configuration
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaExport {
    pub seed: u64,
    pub config: GaConfig,
    pub ensemble: Option<EnsembleConfig>,
    pub best_weights: Vec<f64>,
    pub best_fitness: f64,
    pub fitness_trace: Vec<f64>,
}

impl GaExport {
    pub fn new(result: &GaResult, config: &GaConfig, ensemble: Option<&EnsembleConfig>) -> Self {
        Self {
            seed: config.seed,
            config: *config,
            ensemble: ensemble.copied(),
            best_weights: result.best_chromosome.weights().to_vec(),
            best_fitness: result.best_fitness,
            fitness_trace: result.fitness_trace.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneticFusion {
    pub ga: GaResult,
    /// Subdominant ultrametric of the GA consensus.
    pub recovered: DissimilarityMatrix,
    pub dendrogram: Dendrogram,
    pub cpcc_raw: f64,
    pub cpcc_ultrametric: f64,
}

/// Sort, evolve and recover the consensus tree for an existing ensemble.
pub fn genetic_fuse(
    members: &[DissimilarityMatrix],
    e: &DissimilarityMatrix,
    cfg: &GaConfig,
) -> Result<GeneticFusion> {
    let sorted = sort_ensemble(members)?;
    let ga = evolve(&sorted, e, cfg)?;
    let recovered = subdominant_ultrametric(&ga.consensus_matrix);
    let dendrogram = dendrogram_from_ultrametric(&recovered)?;
    let cpcc_ultrametric = cpcc(&recovered, e)?;
    Ok(GeneticFusion {
        cpcc_raw: ga.best_fitness,
        ga,
        recovered,
        dendrogram,
        cpcc_ultrametric,
    })
}

/// Bagged ensemble, sorted secondary ensemble, GA weights, ultrametric
/// recovery and the consensus dendrogram, end to end.
pub fn genetic_fuse_pipeline(
    data: &DataMatrix,
    ecfg: &EnsembleConfig,
    gcfg: &GaConfig,
) -> Result<GeneticFusion> {
    let e = euclidean_dissimilarity(data);
    let ensemble = generate_ensemble_from(&e, ecfg)?;
    let members: Vec<DissimilarityMatrix> =
        ensemble.into_iter().map(|m| m.completed_matrix).collect();
    genetic_fuse(&members, &e, gcfg)
}
