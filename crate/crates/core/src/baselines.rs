//! Gradient-free comparison attackers: Gaussian vertex noise and a genetic
//! search over clamped per-coordinate offsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::attack::{objective, project_linf, AttackConfig, SceneContext, Surrogates};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// Adds independent N(0, sigma²) noise to every vertex coordinate.
pub fn gn_attack(benign: &TriMesh, sigma: f64, seed: u64) -> Result<TriMesh> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = benign.vertices().iter().map(|p| p.map(|c| c + normal.sample(&mut rng))).collect();
    benign.with_vertices(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-coordinate offset bound, meters.
    pub bound: f64,
    pub mutation_sigma: f64,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub tournament: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 40,
            bound: 0.02,
            mutation_sigma: 0.005,
            mutation_rate: 0.1,
            crossover_rate: 0.8,
            elitism: 1,
            tournament: 3,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population < 2 {
            return bad(format!("population must be at least 2, got {}", self.population));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return bad(format!("bound must be positive, got {}", self.bound));
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return bad(format!("mutation sigma must be non-negative, got {}", self.mutation_sigma));
        }
        for (k, p) in [("mutation rate", self.mutation_rate), ("crossover rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{k} must be in [0,1], got {p}"));
            }
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population".into());
        }
        if self.tournament == 0 {
            return bad("tournament size must be at least 1".into());
        }
        Ok(())
    }
}

/// Result of a genetic search.
#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub mesh: TriMesh,
    pub best_fitness: f64,
    /// Best fitness after initialization and after every generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

impl GaOutcome {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("generation,best_fitness\n");
        for (g, f) in self.trace.iter().enumerate() {
            s.push_str(&format!("{g},{f}\n"));
        }
        s
    }
}

type Genome = Vec<f64>;

fn fitness(g: &Genome, benign: &TriMesh, ctx: &SceneContext, c: &AttackConfig, s: &Surrogates, eot_seed: u64) -> f64 {
    let pos: Vec<[f64; 3]> = benign.vertices().iter().enumerate().map(|(i, v)| [0, 1, 2].map(|k| v[k] + g[3 * i + k])).collect();
    let value = benign.with_vertices(pos).and_then(|m| objective(&m, benign, ctx, c, s, eot_seed));
    match value {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

fn evaluate_all(pop: &[Genome], benign: &TriMesh, ctx: &SceneContext, c: &AttackConfig, s: &Surrogates, eot_seed: u64) -> Vec<f64> {
    pop.par_iter().map(|g| fitness(g, benign, ctx, c, s, eot_seed)).collect()
}

/// Genetic search minimizing the attack objective. Fitness uses one EoT seed
/// for the whole run, so fitness values are comparable across generations.
pub fn ga_attack(
    benign: &TriMesh,
    ctx: &SceneContext,
    attack: &AttackConfig,
    ga: &GaConfig,
    s: &Surrogates,
    seed: u64,
) -> Result<GaOutcome> {
    ga.validate()?;
    attack.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eot_seed: u64 = rng.gen();
    let n = benign.vertices().len() * 3;
    let b = ga.bound;
    let mut pop: Vec<Genome> = (0..ga.population).map(|_| (0..n).map(|_| rng.gen_range(-b..=b)).collect()).collect();
    let mut fit = evaluate_all(&pop, benign, ctx, attack, s, eot_seed);
    let mut evaluations = pop.len();
    let best_of = |fit: &[f64]| (0..fit.len()).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).expect("population ≥ 2");
    let mut trace = vec![fit[best_of(&fit)]];
    let mutation = Normal::new(0.0, ga.mutation_sigma).map_err(|e| Error::Config(e.to_string()))?;

    for _ in 0..ga.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..ga.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..ga.elitism].iter().map(|&i| fit[i]).collect();
        let pick = |rng: &mut ChaCha8Rng| -> usize {
            (0..ga.tournament).map(|_| rng.gen_range(0..pop.len())).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).expect("k ≥ 1")
        };
        let mut children = Vec::with_capacity(ga.population - ga.elitism);
        while children.len() < ga.population - ga.elitism {
            let (pa, pb) = (pick(&mut rng), pick(&mut rng));
            let mut child = pop[pa].clone();
            if rng.gen::<f64>() < ga.crossover_rate {
                for (c, o) in child.iter_mut().zip(&pop[pb]) {
                    if rng.gen::<bool>() {
                        *c = *o;
                    }
                }
            }
            for c in child.iter_mut() {
                if rng.gen::<f64>() < ga.mutation_rate {
                    *c = (*c + mutation.sample(&mut rng)).clamp(-b, b);
                }
            }
            children.push(child);
        }
        let child_fit = evaluate_all(&children, benign, ctx, attack, s, eot_seed);
        evaluations += children.len();
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;
        trace.push(fit[best_of(&fit)]);
    }
    let best = best_of(&fit);
    let pos: Vec<[f64; 3]> =
        benign.vertices().iter().enumerate().map(|(i, v)| [0, 1, 2].map(|k| v[k] + pop[best][3 * i + k])).collect();
    let mesh = project_linf(&pos, benign, b)?;
    Ok(GaOutcome { mesh, best_fitness: fit[best], trace, evaluations })
}
