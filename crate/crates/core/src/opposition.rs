//! Opposition-based learning: box reflection of points and populations,
//! elitist selection over a population and its opposite, and the OBEMO
//! driver that applies both at initialization and after every movement.

use serde::{Deserialize, Serialize};

use crate::emo::{self, EmoParams, RunRecord};
use crate::error::{Error, Result};
use crate::model::{ObjectiveSpec, Particle, Population, SearchSpace, UniformSource};

/// Which opposition steps a run applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OppositionConfig {
    pub use_opposed_init: bool,
    pub use_generation_jump: bool,
    /// Probability of jumping in a given iteration. At 1.0 no draw is taken.
    pub jump_probability: f64,
}

impl Default for OppositionConfig {
    fn default() -> Self {
        Self {
            use_opposed_init: true,
            use_generation_jump: true,
            jump_probability: 1.0,
        }
    }
}

impl OppositionConfig {
    pub fn disabled() -> Self {
        Self {
            use_opposed_init: false,
            use_generation_jump: false,
            jump_probability: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return Err(Error::invalid("jump_probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Reflects `x` through the box center: `u_i + l_i - x_i`.
pub fn opposite_point(space: &SearchSpace, x: &[f64]) -> Result<Vec<f64>> {
    space.check_dims(x)?;
    if !space.contains(x) {
        return Err(Error::invalid("cannot oppose a point outside the box"));
    }
    Ok(reflect(space, x))
}

fn reflect(space: &SearchSpace, x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x
        .iter()
        .zip(space.lower().iter().zip(space.upper()))
        .map(|(v, (l, u))| u + l - v)
        .collect();
    // u + l - x can round a hair past a bound.
    space.clamp_in_place(&mut out);
    out
}

/// Opposite of every member, evaluated. Same size and order as `pop`.
pub fn opposed_population(
    space: &SearchSpace,
    pop: &Population,
    objective: &mut ObjectiveSpec,
) -> Result<Population> {
    let members = pop
        .members()
        .iter()
        .map(|p| {
            let x = opposite_point(space, &p.position)?;
            let f = objective.evaluate(&x)?;
            Ok(Particle::new(x, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Population::new(members)
}

/// Keeps the `keep` fittest particles of `pop ∪ opposed`.
///
/// Ties prefer members of `pop`, then the lower index. Survivors keep their
/// union order (all of `pop` first), so a selection in which no opposite
/// particle wins returns `pop` unchanged. The result must still hold at
/// least two particles.
pub fn obl_select(pop: &Population, opposed: &Population, keep: usize) -> Result<Population> {
    let union: Vec<&Particle> = pop.members().iter().chain(opposed.members()).collect();
    if keep < 1 {
        return Err(Error::invalid("must keep at least one particle"));
    }
    if keep > union.len() {
        return Err(Error::invalid(format!(
            "cannot keep {keep} of {} particles",
            union.len()
        )));
    }
    let mut ranking: Vec<usize> = (0..union.len()).collect();
    // Stable: equal fitness keeps union order, i.e. originals before opposites.
    ranking.sort_by(|&a, &b| union[a].fitness.total_cmp(&union[b].fitness));
    let mut chosen = ranking[..keep].to_vec();
    chosen.sort_unstable();
    Population::new(chosen.into_iter().map(|i| union[i].clone()).collect())
}

/// Uniform initialization refined by opposition: draws `m` particles, adds
/// their opposites and keeps the `m` fittest. Costs `2m` evaluations.
pub fn opposition_init<R: UniformSource + ?Sized>(
    objective: &mut ObjectiveSpec,
    m: usize,
    rng: &mut R,
) -> Result<Population> {
    let random = emo::initialize(objective, m, rng)?;
    let space = objective.space().clone();
    let opposed = opposed_population(&space, &random, objective)?;
    obl_select(&random, &opposed, m)
}

/// Replaces the population with the fittest half of itself and its opposite.
pub fn generation_jump(pop: &Population, objective: &mut ObjectiveSpec) -> Result<Population> {
    let space = objective.space().clone();
    let opposed = opposed_population(&space, pop, objective)?;
    obl_select(pop, &opposed, pop.len())
}

/// Runs OBEMO. With both opposition steps disabled this reproduces
/// [`emo::run_emo`] exactly for the same draw stream.
pub fn run_obemo<R: UniformSource + ?Sized>(
    objective: &mut ObjectiveSpec,
    params: &EmoParams,
    opp: &OppositionConfig,
    rng: &mut R,
) -> Result<RunRecord> {
    opp.validate()?;
    let m = params.population_size;
    let opposed_init = opp.use_opposed_init;
    let jump = opp.use_generation_jump;
    let jump_probability = opp.jump_probability;
    emo::drive(
        objective,
        params,
        rng,
        |obj, rng| {
            if opposed_init {
                opposition_init(obj, m, rng)
            } else {
                emo::initialize(obj, m, rng)
            }
        },
        |pop, obj, rng| {
            if !jump {
                return Ok(());
            }
            if jump_probability < 1.0 && rng.uniform() >= jump_probability {
                return Ok(());
            }
            *pop = generation_jump(pop, obj)?;
            Ok(())
        },
    )
}
