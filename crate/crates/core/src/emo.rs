//! The electromagnetism-like mechanism: uniform initialization, coordinate
//! local search, fitness-derived charges, superposed Coulomb-style forces and
//! bounded movement, iterated until a termination rule fires.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ObjectiveSpec, Particle, Population, UniformSource};

/// How many step-length draws the movement phase takes per particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaScope {
    /// A fresh draw for every coordinate of every moved particle.
    #[default]
    PerCoordinate,
    /// One draw per moved particle, shared by all of its coordinates.
    PerParticle,
}

/// Parameters of a single EMO / OBEMO run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmoParams {
    pub population_size: usize,
    /// Local-search iteration bound (`ITER`); each coordinate gets at most
    /// `ITER - 1` perturbation attempts.
    pub local_search_iters: usize,
    /// Local-search step as a fraction of the widest box side.
    pub local_search_delta: f64,
    pub max_iterations: usize,
    pub stagnation_tolerance: f64,
    /// Number of consecutive iterations over which the best value must move
    /// by at least `stagnation_tolerance`.
    pub stagnation_window: usize,
    pub target_value: Option<f64>,
    pub lambda_scope: LambdaScope,
}

impl Default for EmoParams {
    fn default() -> Self {
        Self {
            population_size: 50,
            local_search_iters: 4,
            local_search_delta: 0.001,
            max_iterations: 2000,
            stagnation_tolerance: 1e-4,
            stagnation_window: 10,
            target_value: None,
            lambda_scope: LambdaScope::PerCoordinate,
        }
    }
}

impl EmoParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::invalid("population_size must be at least 2"));
        }
        if self.local_search_iters < 1 {
            return Err(Error::invalid("local_search_iters must be at least 1"));
        }
        if !(self.local_search_delta > 0.0 && self.local_search_delta < 1.0) {
            return Err(Error::invalid("local_search_delta must lie in (0, 1)"));
        }
        if self.stagnation_tolerance.is_nan() || self.stagnation_tolerance <= 0.0 {
            return Err(Error::invalid("stagnation_tolerance must be positive"));
        }
        if self.stagnation_window < 1 {
            return Err(Error::invalid("stagnation_window must be at least 1"));
        }
        if matches!(self.target_value, Some(t) if t.is_nan()) {
            return Err(Error::invalid("target_value must not be NaN"));
        }
        Ok(())
    }
}

/// Total force on one particle and its unit-norm direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceVector {
    pub components: Vec<f64>,
    /// Unit Euclidean norm, or all zeros when `components` vanishes.
    pub normalized: Vec<f64>,
}

impl ForceVector {
    pub fn from_components(components: Vec<f64>) -> Self {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        let normalized = if norm > 0.0 && norm.is_finite() {
            components.iter().map(|c| c / norm).collect()
        } else {
            vec![0.0; components.len()]
        };
        Self {
            components,
            normalized,
        }
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best value of the initial population, before the first iteration.
    pub initial_best: f64,
    /// Best-so-far value after each completed iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: u64,
}

/// Samples `m` particles uniformly in the box and evaluates them.
pub fn initialize<R: UniformSource + ?Sized>(
    objective: &mut ObjectiveSpec,
    m: usize,
    rng: &mut R,
) -> Result<Population> {
    if m < 2 {
        return Err(Error::invalid("population size must be at least 2"));
    }
    let members = (0..m)
        .map(|_| {
            let x = objective.space().sample(rng);
            let f = objective.evaluate_feasible(&x);
            Particle::new(x, f)
        })
        .collect();
    Population::new(members)
}

/// Coordinate-wise stochastic local search over every particle.
///
/// The step length is `delta * max_d (u_d - l_d)`. For each coordinate a
/// single draw fixes the direction (positive when above 0.5) and each attempt
/// redraws the magnitude. The first improving attempt is kept and ends the
/// search on that coordinate.
pub fn local_search<R: UniformSource + ?Sized>(
    pop: &mut Population,
    params: &EmoParams,
    rng: &mut R,
    objective: &mut ObjectiveSpec,
) {
    let space = objective.space().clone();
    let length = params.local_search_delta * space.max_width();
    let iters = params.local_search_iters;
    for particle in pop.members_mut() {
        for d in 0..space.dims() {
            let direction = rng.uniform();
            let mut counter = 1;
            while counter < iters {
                let step = rng.uniform() * length;
                let original = particle.position[d];
                let trial = if direction > 0.5 {
                    original + step
                } else {
                    original - step
                };
                particle.position[d] = trial.clamp(space.lower()[d], space.upper()[d]);
                let f = objective.evaluate_feasible(&particle.position);
                if f < particle.fitness {
                    particle.fitness = f;
                    counter = iters - 1;
                } else {
                    particle.position[d] = original;
                }
                counter += 1;
            }
        }
    }
    pop.refresh_best();
}

/// Assigns `q_p = exp(-n (f_p - f_best) / sum_h (f_h - f_best))`.
///
/// When every particle ties with the best the ratio is 0/0 and all charges
/// are set to 1.
pub fn compute_charges(pop: &mut Population) {
    let n = pop.best().position.len() as f64;
    let best = pop.best().fitness;
    let denominator: f64 = pop.members().iter().map(|p| p.fitness - best).sum();
    let degenerate = !(denominator > 0.0 && denominator.is_finite());
    for p in pop.members_mut() {
        p.charge = if degenerate {
            1.0
        } else {
            (-n * (p.fitness - best) / denominator).exp()
        };
    }
}

/// Superposes pairwise forces: attraction toward fitter particles, repulsion
/// from the rest, scaled by the charge product over the squared distance.
/// Coincident pairs contribute nothing.
pub fn compute_forces(pop: &Population) -> Vec<ForceVector> {
    let members = pop.members();
    let dims = members[0].position.len();
    let mut diff = vec![0.0; dims];
    members
        .iter()
        .enumerate()
        .map(|(p, gp)| {
            let mut total = vec![0.0; dims];
            for (h, gh) in members.iter().enumerate() {
                if h == p {
                    continue;
                }
                let mut dist2 = 0.0;
                for ((dv, a), b) in diff.iter_mut().zip(&gh.position).zip(&gp.position) {
                    *dv = a - b;
                    dist2 += *dv * *dv;
                }
                if dist2 == 0.0 {
                    continue;
                }
                let mut scale = gp.charge * gh.charge / dist2;
                if gh.fitness >= gp.fitness {
                    scale = -scale;
                }
                for (t, dv) in total.iter_mut().zip(&diff) {
                    *t += dv * scale;
                }
            }
            ForceVector::from_components(total)
        })
        .collect()
}

/// Moves every particle except the current best a random fraction of the way
/// toward the upper (positive force) or lower (non-positive force) boundary.
pub fn move_particles<R: UniformSource + ?Sized>(
    pop: &mut Population,
    forces: &[ForceVector],
    scope: LambdaScope,
    rng: &mut R,
    objective: &mut ObjectiveSpec,
) -> Result<()> {
    if forces.len() != pop.len() {
        return Err(Error::invalid(format!(
            "{} force vectors for {} particles",
            forces.len(),
            pop.len()
        )));
    }
    let space = objective.space().clone();
    let best = pop.best_index();
    for (p, (particle, force)) in pop.members_mut().iter_mut().zip(forces).enumerate() {
        if p == best {
            continue;
        }
        let mut lambda = match scope {
            LambdaScope::PerParticle => rng.uniform(),
            LambdaScope::PerCoordinate => 0.0,
        };
        let mut changed = false;
        for (d, g) in particle.position.iter_mut().enumerate() {
            if scope == LambdaScope::PerCoordinate {
                lambda = rng.uniform();
            }
            let f = force.normalized[d];
            let (l, u) = (space.lower()[d], space.upper()[d]);
            let moved = if f > 0.0 {
                *g + lambda * f * (u - *g)
            } else {
                *g + lambda * f * (*g - l)
            };
            // Feasible by construction up to rounding.
            let moved = moved.clamp(l, u);
            if moved.to_bits() != g.to_bits() {
                *g = moved;
                changed = true;
            }
        }
        if changed {
            particle.fitness = objective.evaluate_feasible(&particle.position);
        }
    }
    pop.refresh_best();
    Ok(())
}

/// Iteration loop shared by EMO and OBEMO. `after_move` runs at the end of
/// each iteration, after the movement phase.
pub(crate) fn drive<R, I, H>(
    objective: &mut ObjectiveSpec,
    params: &EmoParams,
    rng: &mut R,
    init: I,
    mut after_move: H,
) -> Result<RunRecord>
where
    R: UniformSource + ?Sized,
    I: FnOnce(&mut ObjectiveSpec, &mut R) -> Result<Population>,
    H: FnMut(&mut Population, &mut ObjectiveSpec, &mut R) -> Result<()>,
{
    params.validate()?;
    let mut pop = init(objective, rng)?;
    let initial_best = pop.best().fitness;
    let mut best_so_far = initial_best;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut termination = Termination::new(params, initial_best);

    while iterations < params.max_iterations {
        local_search(&mut pop, params, rng, objective);
        compute_charges(&mut pop);
        let forces = compute_forces(&pop);
        move_particles(&mut pop, &forces, params.lambda_scope, rng, objective)?;
        after_move(&mut pop, objective, rng)?;

        iterations += 1;
        best_so_far = best_so_far.min(pop.best().fitness);
        trace.push(best_so_far);
        if termination.should_stop(best_so_far) {
            break;
        }
    }

    let best = pop.best();
    Ok(RunRecord {
        best_position: best.position.clone(),
        best_fitness: best.fitness,
        initial_best,
        trace,
        iterations,
        evaluations: objective.evaluations(),
    })
}

/// Stagnation and target rules, checked after every completed iteration.
struct Termination {
    tolerance: f64,
    window: usize,
    target: Option<f64>,
    history: Vec<f64>,
}

impl Termination {
    fn new(params: &EmoParams, initial_best: f64) -> Self {
        Self {
            tolerance: params.stagnation_tolerance,
            window: params.stagnation_window,
            target: params.target_value,
            history: vec![initial_best],
        }
    }

    fn should_stop(&mut self, best: f64) -> bool {
        self.history.push(best);
        if let Some(target) = self.target {
            // Minimization: reaching or undershooting the target counts.
            if best - target < self.tolerance {
                return true;
            }
        }
        let k = self.history.len() - 1;
        if k >= self.window {
            let earlier = self.history[k - self.window];
            if earlier - best < self.tolerance {
                return true;
            }
        }
        false
    }
}

/// Runs standard EMO from a uniform random population.
pub fn run_emo<R: UniformSource + ?Sized>(
    objective: &mut ObjectiveSpec,
    params: &EmoParams,
    rng: &mut R,
) -> Result<RunRecord> {
    let m = params.population_size;
    drive(
        objective,
        params,
        rng,
        |obj, rng| initialize(obj, m, rng),
        |_, _, _| Ok(()),
    )
}
