//! Shared domain types: the feasible box, particles, populations, counted
//! objective functions and seeded uniform streams.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Axis-aligned feasible box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("search space needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "bound lengths differ: {} lower vs {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::invalid(format!(
                    "dimension {d}: lower bound {l} must be finite and strictly below upper bound {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lower, upper]` on every one of `dims` coordinates.
    pub fn uniform(dims: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dims], vec![upper; dims])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest side length of the box, `max_d (u_d - l_d)`.
    pub fn max_width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Projects `x` coordinate-wise onto the box.
    pub fn clamp(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let mut out = x.to_vec();
        self.clamp_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn clamp_in_place(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub(crate) fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::invalid(format!(
                "expected a {}-dimensional point, got {}",
                self.dims(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Draws a point uniformly from the box.
    pub fn sample<R: UniformSource + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + rng.uniform() * (u - l))
            .collect()
    }
}

/// A candidate solution with its cached objective value and charge.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub fitness: f64,
    /// Only meaningful after charge computation.
    pub charge: f64,
}

impl Particle {
    pub fn new(position: Vec<f64>, fitness: f64) -> Self {
        Self {
            position,
            fitness,
            charge: 0.0,
        }
    }
}

/// An ordered set of particles with the index of the fittest one.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<Particle>,
    best_index: usize,
}

impl Population {
    pub fn new(members: Vec<Particle>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "a population needs at least 2 particles, got {}",
                members.len()
            )));
        }
        let mut pop = Self {
            members,
            best_index: 0,
        };
        pop.refresh_best();
        Ok(pop)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Particle] {
        &self.members
    }

    pub(crate) fn members_mut(&mut self) -> &mut [Particle] {
        &mut self.members
    }

    pub fn into_members(self) -> Vec<Particle> {
        self.members
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best(&self) -> &Particle {
        &self.members[self.best_index]
    }

    /// Re-selects the argmin of fitness; the lowest index wins ties.
    pub fn refresh_best(&mut self) {
        let mut best = 0;
        for (i, p) in self.members.iter().enumerate().skip(1) {
            if p.fitness < self.members[best].fitness {
                best = i;
            }
        }
        self.best_index = best;
    }
}

/// Pure objective `f: R^n -> R`.
pub type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A named objective over a box, with a per-instance evaluation counter.
///
/// Cloning shares the evaluator and copies the counter; use
/// [`ObjectiveSpec::fresh`] to obtain an instance with a zeroed counter for a
/// new run.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    space: SearchSpace,
    evaluator: Arc<ObjectiveFn>,
    known_minimum: f64,
    evaluations: u64,
}

impl ObjectiveSpec {
    pub fn new<F>(name: impl Into<String>, space: SearchSpace, known_minimum: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            space,
            evaluator: Arc::new(f),
            known_minimum,
            evaluations: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> usize {
        self.space.dims()
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn known_minimum(&self) -> f64 {
        self.known_minimum
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn fresh(&self) -> Self {
        Self {
            evaluations: 0,
            ..self.clone()
        }
    }

    /// Evaluates `f(x)` for an in-box point and counts the call.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.space.check_dims(x)?;
        if !self.space.contains(x) {
            return Err(Error::invalid(format!(
                "point lies outside the search box of {}",
                self.name
            )));
        }
        self.evaluations += 1;
        Ok((self.evaluator)(x))
    }

    /// Evaluates without bounds checks or counting. Intended for oracles and
    /// diagnostics, never for engines.
    pub fn raw(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    /// Evaluates a point the engine has already confined to the box.
    pub(crate) fn evaluate_feasible(&mut self, x: &[f64]) -> f64 {
        debug_assert!(
            self.space.contains(x),
            "engine produced an infeasible point"
        );
        self.evaluations += 1;
        (self.evaluator)(x)
    }
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("known_minimum", &self.known_minimum)
            .field("evaluations", &self.evaluations)
            .finish()
    }
}

/// Source of uniform draws on `[0, 1)`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

/// Seeded uniform stream; identical seeds give bit-identical draw sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl UniformSource for RngStream {
    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Replays a fixed list of draws. Panics when exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedDraws {
    draws: Vec<f64>,
    next: usize,
}

impl ScriptedDraws {
    pub fn new(draws: impl Into<Vec<f64>>) -> Self {
        Self {
            draws: draws.into(),
            next: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl UniformSource for ScriptedDraws {
    fn uniform(&mut self) -> f64 {
        let v = *self
            .draws
            .get(self.next)
            .unwrap_or_else(|| panic!("scripted draws exhausted after {} values", self.next));
        self.next += 1;
        v
    }
}
