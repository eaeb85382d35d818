//! One end-to-end trial: truth, operator, noisy measurements, split,
//! gradient descent, selection.

use serde::{Deserialize, Serialize};

use crate::diagnostics::TruthHook;
use crate::error::Result;
use crate::operators::{build_completion_operator, build_gaussian_operator, SensingOperator};
use crate::recovery::{run_gd, GdConfig, IterateHook, Trajectory};
use crate::rng::{self, derive_seed, RngSpec};
use crate::truth::{gaussian_noise, generate_ground_truth, GroundTruth};
use crate::validation::{
    select_iterate, selection_bound, split_measurements, ConcentrationHook, SelectionBound, SelectionResult,
    TheoryTerms, ValidationHook,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Sensing,
    Completion,
}

impl Problem {
    pub fn build_operator(self, n: usize, m: usize, rng: &RngSpec) -> Result<SensingOperator> {
        match self {
            Problem::Sensing => build_gaussian_operator(n, m, rng),
            Problem::Completion => build_completion_operator(n, m, rng),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Sensing => "sensing",
            Problem::Completion => "completion",
        }
    }
}

/// Gradient-descent settings shared by every trial of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdTemplate {
    /// Factor columns; `None` means `r = n`.
    #[serde(default)]
    pub r: Option<usize>,
    pub eta: f64,
    pub alpha: f64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl GdTemplate {
    /// `η = 0.5`, `T = 500`, `α = 10⁻⁶` (sensing) or `10⁻³` (completion).
    pub fn standard(problem: Problem) -> Self {
        Self {
            r: None,
            eta: 0.5,
            alpha: match problem {
                Problem::Sensing => 1e-6,
                Problem::Completion => 1e-3,
            },
            iterations: 500,
            record_every: 1,
        }
    }

    pub fn config(&self, n: usize, init_seed: u64) -> GdConfig {
        let mut c = GdConfig::new(
            self.r.unwrap_or(n),
            self.eta,
            self.alpha,
            self.iterations,
            RngSpec::new(init_seed, rng::INIT),
        );
        c.record_every = self.record_every;
        c
    }
}

/// Seeds of the five independent streams of a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub ground_truth: u64,
    pub operator: u64,
    pub noise: u64,
    pub split: u64,
    pub init: u64,
}

impl TrialSeeds {
    /// Every stream seed is `derive_seed(base, stream label, coords)`.
    pub fn derive(base: u64, coords: &[u64]) -> Self {
        Self {
            ground_truth: derive_seed(base, rng::GROUND_TRUTH, coords),
            operator: derive_seed(base, rng::OPERATOR, coords),
            noise: derive_seed(base, rng::NOISE, coords),
            split: derive_seed(base, rng::SPLIT, coords),
            init: derive_seed(base, rng::INIT, coords),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub problem: Problem,
    pub n: usize,
    pub m: usize,
    pub m_val: usize,
    pub r_star: usize,
    pub sigma2: f64,
    pub gd: GdTemplate,
    pub seeds: TrialSeeds,
    /// Evaluate phase quantities every this many recorded iterations.
    pub phase_every: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub truth: GroundTruth,
    pub trajectory: Trajectory,
    pub selection: SelectionResult,
    /// Largest validation concentration deviation over the recorded iterates.
    pub delta_val: f64,
    pub bound: SelectionBound,
    pub theory: TheoryTerms,
    pub m_train: usize,
}

impl TrialOutcome {
    pub fn error_at_t_hat(&self) -> f64 {
        self.selection.error_at_t_hat.expect("truth hook always runs")
    }

    pub fn error_at_t_tilde(&self) -> f64 {
        self.selection.error_at_t_tilde.expect("truth hook always runs")
    }
}

pub fn run_trial(spec: &TrialSpec) -> Result<TrialOutcome> {
    let s = &spec.seeds;
    let truth = generate_ground_truth(spec.n, spec.r_star, &RngSpec::new(s.ground_truth, rng::GROUND_TRUTH))?;
    let op = spec
        .problem
        .build_operator(spec.n, spec.m, &RngSpec::new(s.operator, rng::OPERATOR))?;
    let sigma = spec.sigma2.sqrt();
    let noise = gaussian_noise(spec.m, sigma, &RngSpec::new(s.noise, rng::NOISE));
    let mut y = op.apply(&truth.x_nat)?;
    for (yi, ei) in y.iter_mut().zip(&noise) {
        *yi += ei;
    }
    let split = split_measurements(&op, &y, spec.m_val, &RngSpec::new(s.split, rng::SPLIT))?;
    let noise_val = split.spec.val_part(&noise);

    let config = spec.gd.config(spec.n, s.init);
    let mut val_hook = ValidationHook::new(&split.val_op, &split.val_y);
    let mut truth_hook = match spec.phase_every {
        Some(every) => TruthHook::with_phases(&truth, every),
        None => TruthHook::new(&truth),
    };
    let mut conc_hook = ConcentrationHook::new(&split.val_op, &noise_val, &truth.x_nat, sigma);
    let trajectory = {
        let mut hooks: [&mut dyn IterateHook; 3] = [&mut val_hook, &mut truth_hook, &mut conc_hook];
        run_gd(&split.train_op, &split.train_y, &config, &mut hooks)?
    };
    let selection = select_iterate(&trajectory)?;
    let delta_val = conc_hook.max_deviation;
    let sigma2_eff = spec.sigma2 * split.val_op.m() as f64 / split.val_op.normalization();
    let bound = selection_bound(
        selection.error_at_t_hat.expect("truth hook always runs"),
        selection.error_at_t_tilde.expect("truth hook always runs"),
        delta_val,
        sigma2_eff,
    );
    let theory = TheoryTerms::new(
        spec.n,
        truth.true_rank,
        truth.kappa,
        split.spec.m_train,
        split.spec.m_val,
    );
    Ok(TrialOutcome {
        truth,
        trajectory,
        selection,
        delta_val,
        bound,
        theory,
        m_train: split.spec.m_train,
    })
}
