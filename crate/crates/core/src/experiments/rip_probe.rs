//! Empirical restricted-isometry probe of one operator.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::RipConfig;
use super::report::Assertion;
use crate::error::Result;
use crate::matrix::SymMatrix;
use crate::operators::{
    check_perturbation_bounds, estimate_rip, read_operator, write_operator, OperatorKind, PerturbationCheck,
    SensingOperator,
};
use crate::rng::{self, RngSpec};

pub const RATIOS_FILE: &str = "rip_ratios.csv";
const PERTURBATION_TRIALS: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RipLevel {
    pub k: usize,
    pub trials: usize,
    pub delta_hat: f64,
    pub median_deviation: f64,
    pub perturbation: Vec<PerturbationCheck>,
    /// Largest `implied_delta` over the perturbation checks.
    pub perturbation_delta: f64,
}

#[derive(Clone, Debug)]
pub struct RipOutcome {
    pub operator: SensingOperator,
    pub levels: Vec<RipLevel>,
    ratios: Vec<(usize, Vec<f64>)>,
}

#[derive(Serialize)]
struct RipSummary<'a> {
    kind: OperatorKind,
    n: usize,
    m: usize,
    operator_seed: u64,
    levels: &'a [RipLevel],
}

pub fn run_rip_probe(cfg: &RipConfig) -> Result<RipOutcome> {
    let base = RngSpec::new(cfg.seed, rng::RIP);
    let operator = match &cfg.load_operator {
        Some(path) => read_operator(BufReader::new(File::open(path)?))?,
        None => {
            let seed = rng::derive_seed(cfg.seed, rng::OPERATOR, &[]);
            cfg.problem
                .build_operator(cfg.n, cfg.m, &RngSpec::new(seed, rng::OPERATOR))?
        }
    };
    let n = operator.n();
    let mut levels = Vec::new();
    let mut ratios = Vec::new();
    for &k in &cfg.ranks {
        let k = k.clamp(1, n);
        let est = estimate_rip(&operator, k, cfg.trials, &base)?;
        let mut rng = base.derive("perturbation", &[k as u64]).rng();
        let mut perturbation = Vec::with_capacity(PERTURBATION_TRIALS);
        for _ in 0..PERTURBATION_TRIALS {
            let g = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
            let x = SymMatrix::gram_of(&g);
            let z = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            perturbation.push(check_perturbation_bounds(&operator, &x, &z, k)?);
        }
        let perturbation_delta = perturbation
            .iter()
            .map(PerturbationCheck::implied_delta)
            .fold(0.0, f64::max);
        levels.push(RipLevel {
            k,
            trials: est.trials,
            delta_hat: est.delta_hat,
            median_deviation: est.median_deviation(),
            perturbation,
            perturbation_delta,
        });
        ratios.push((k, est.ratios));
    }
    Ok(RipOutcome {
        operator,
        levels,
        ratios,
    })
}

impl RipOutcome {
    pub fn summary(&self) -> impl Serialize + '_ {
        RipSummary {
            kind: self.operator.kind(),
            n: self.operator.n(),
            m: self.operator.m(),
            operator_seed: self.operator.seed(),
            levels: &self.levels,
        }
    }

    /// Dense Gaussian operators must look like isometries (`δ̂ < 1`) at every
    /// probed rank; completion masks are reported without assertions.
    pub fn assertions(&self) -> Vec<Assertion> {
        if self.operator.kind() != OperatorKind::DenseGaussian {
            return Vec::new();
        }
        self.levels
            .iter()
            .map(|l| {
                Assertion::new(
                    &format!("rip_informative_k{}", l.k),
                    l.delta_hat < 1.0,
                    format!("delta_hat = {:.4} over {} trials", l.delta_hat, l.trials),
                )
            })
            .collect()
    }

    pub fn write_artifacts(&self, dir: &Path, save_operator: Option<&str>) -> Result<()> {
        let mut f = BufWriter::new(File::create(dir.join(RATIOS_FILE))?);
        writeln!(f, "k,trial,ratio")?;
        for (k, rs) in &self.ratios {
            for (i, r) in rs.iter().enumerate() {
                writeln!(f, "{k},{i},{r}")?;
            }
        }
        f.flush()?;
        if let Some(name) = save_operator {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            write_operator(&self.operator, &mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}
