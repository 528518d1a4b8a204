//! Genetic search over phase vectors for the cooperative AMR.
//!
//! Operators: tournament selection, uniform crossover, additive Gaussian
//! mutation with wrap-around, elitism. Every child draws from its own
//! ChaCha8 stream `generation * population + index`, so runs are
//! reproducible under parallel fitness evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::{AmrEngine, Scenario};
use crate::channel::{ChannelEnsemble, PhaseVector};
use crate::error::{invalid, Error, Result};
use crate::info::InfoCurve;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1/N`.
    pub mutation_rate: Option<f64>,
    /// Initial mutation standard deviation in radians.
    pub mutation_scale: f64,
    pub mutation_decay: f64,
    pub elitism: usize,
    pub tournament: usize,
    /// Stop after this many generations without an improvement above
    /// `stall_tol` bits.
    pub stall_generations: usize,
    pub stall_tol: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            max_generations: 200,
            crossover_rate: 0.8,
            mutation_rate: None,
            mutation_scale: 0.3,
            mutation_decay: 0.99,
            elitism: 2,
            tournament: 3,
            stall_generations: 30,
            stall_tol: 1e-6,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population < 4 {
            return Err(invalid("population", "must be at least 4"));
        }
        if self.elitism >= self.population {
            return Err(invalid("elitism", "must be smaller than the population"));
        }
        if self.tournament == 0 {
            return Err(invalid("tournament", "must be positive"));
        }
        if !unit(self.crossover_rate) {
            return Err(invalid("crossover_rate", "must lie in [0, 1]"));
        }
        if self.mutation_rate.is_some_and(|r| !unit(r)) {
            return Err(invalid("mutation_rate", "must lie in [0, 1]"));
        }
        if !(self.mutation_scale >= 0.0) || !unit(self.mutation_decay) {
            return Err(invalid("mutation_scale", "scale must be non-negative and decay in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaResult<T> {
    pub best: PhaseVector<T>,
    pub fitness: T,
    pub trace: Vec<GenerationRow>,
    /// True when the stall criterion ended the run.
    pub stalled: bool,
}

/// Cooperative AMR of `theta`; a nulled user scores 0.
pub fn fitness<T: Real, C: InfoCurve<T> + ?Sized>(
    theta: &PhaseVector<T>,
    e: &ChannelEnsemble<T>,
    engine: &AmrEngine<'_, T, C>,
) -> Result<T> {
    match engine.amr(e, theta, Scenario::Cooperative) {
        Err(Error::NulledUser { .. }) => Ok(T::zero()),
        r => r,
    }
}

struct Individual<T> {
    genes: Vec<T>,
    fitness: T,
}

fn child_rng(seed: u64, generation: usize, population: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation * population + index) as u64);
    rng
}

fn tournament<'p, T: Real>(pop: &'p [Individual<T>], size: usize, rng: &mut ChaCha8Rng) -> &'p Individual<T> {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.fitness > best.fitness {
            best = c;
        }
    }
    best
}

pub fn ga_optimize<T: Real, C: InfoCurve<T> + ?Sized>(
    e: &ChannelEnsemble<T>,
    engine: &AmrEngine<'_, T, C>,
    cfg: &GaConfig,
) -> Result<GaResult<T>> {
    cfg.validate()?;
    let n = e.antennas();
    let np = cfg.population;
    let rate = cfg.mutation_rate.unwrap_or(1.0 / n as f64);
    let evaluate = |genes: Vec<T>| -> Result<Individual<T>> {
        let p = PhaseVector::new(genes);
        let fitness = fitness(&p, e, engine)?;
        Ok(Individual {
            genes: p.thetas().to_vec(),
            fitness,
        })
    };
    let sort = |pop: &mut Vec<Individual<T>>| {
        pop.sort_by(|a, b| b.fitness.partial_cmp(&a.fitness).unwrap_or(std::cmp::Ordering::Equal))
    };
    let row = |generation: usize, pop: &[Individual<T>]| GenerationRow {
        generation,
        best: pop[0].fitness.as_f64(),
        mean: pop.iter().map(|i| i.fitness.as_f64()).sum::<f64>() / pop.len() as f64,
    };

    let mut pop = (0..np)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(cfg.seed, 0, np, i);
            evaluate(PhaseVector::<T>::random(n, &mut rng).thetas().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    sort(&mut pop);
    let mut trace = vec![row(0, &pop)];
    let mut incumbent = pop[0].fitness;
    let mut stall = 0;
    let mut stalled = false;
    let mut scale = cfg.mutation_scale;

    for generation in 1..=cfg.max_generations {
        let children = (cfg.elitism..np)
            .into_par_iter()
            .map(|i| {
                let mut rng = child_rng(cfg.seed, generation, np, i);
                let a = tournament(&pop, cfg.tournament, &mut rng);
                let b = tournament(&pop, cfg.tournament, &mut rng);
                let cross = rng.random::<f64>() < cfg.crossover_rate;
                let genes = (0..n)
                    .map(|g| {
                        let mut v = if cross && rng.random::<bool>() { b.genes[g] } else { a.genes[g] };
                        if rng.random::<f64>() < rate {
                            let z: f64 = rng.sample(StandardNormal);
                            v += T::lit(z * scale);
                        }
                        v
                    })
                    .collect();
                evaluate(genes)
            })
            .collect::<Result<Vec<_>>>()?;
        pop.truncate(cfg.elitism);
        pop.extend(children);
        sort(&mut pop);
        trace.push(row(generation, &pop));
        scale *= cfg.mutation_decay;

        if pop[0].fitness > incumbent + T::lit(cfg.stall_tol) {
            stall = 0;
        } else {
            stall += 1;
        }
        incumbent = incumbent.max(pop[0].fitness);
        if stall >= cfg.stall_generations {
            stalled = true;
            break;
        }
    }
    Ok(GaResult {
        best: PhaseVector::new(pop[0].genes.clone()),
        fitness: pop[0].fitness,
        trace,
        stalled,
    })
}
