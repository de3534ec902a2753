//! Operating-characteristics studies.
//!
//! Each replicate is a pure function of `(spec, index)`: its data come from
//! the substream `(spec.seed, index)`. Studies are split into a per-replicate
//! step and an accumulator so callers can evaluate replicates in any order
//! (or in parallel) and fold them in index order for bit-identical output.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{mh_fit, misspecification_limit, EffectEstimate};
use crate::exact_test::{
    null_distribution, p_value, statistic, ExactConfig, NullDistribution, TestMethod,
};
use crate::gic::{model_gic, GicConfig, GicRanking};
use crate::partition::{enumerate_models, EnumerationLimits, Partition, Strategy};
use crate::rng::{binomial, substream, DEFAULT_SEED};
use crate::scale::EffectScale;
use crate::special::normal_quantile;
use crate::table::{Basket, BasketTable};

/// Generating truth for a scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", content = "values", rename_all = "kebab-case")
)]
pub enum Truth {
    /// Response rates directly.
    Rates(Vec<f64>),
    /// `pi_k = pi0_k + d_k`.
    RiskDifference(Vec<f64>),
    /// `pi_k = pi0_k * r_k`.
    RiskRatio(Vec<f64>),
}

fn default_replicates() -> u64 {
    2_000
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_strategy() -> Strategy {
    Strategy::TwoSubclass
}
fn default_min_patients() -> u64 {
    10
}
fn default_alpha() -> f64 {
    0.05
}
fn default_test_alpha() -> f64 {
    0.025
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioSpec {
    pub label: String,
    pub sizes: Vec<u64>,
    pub null_rates: Vec<f64>,
    pub truth: Truth,
    #[cfg_attr(feature = "serde", serde(default = "default_replicates"))]
    pub replicates: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_seed"))]
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_strategy"))]
    pub strategy: Strategy,
    #[cfg_attr(feature = "serde", serde(default = "default_min_patients"))]
    pub min_subclass_patients: u64,
    /// Two-sided level of confidence intervals.
    #[cfg_attr(feature = "serde", serde(default = "default_alpha"))]
    pub alpha: f64,
    /// One-sided level of the global tests.
    #[cfg_attr(feature = "serde", serde(default = "default_test_alpha"))]
    pub test_alpha: f64,
}

impl ScenarioSpec {
    pub fn new(
        label: impl Into<String>,
        sizes: Vec<u64>,
        null_rates: Vec<f64>,
        truth: Truth,
    ) -> Self {
        ScenarioSpec {
            label: label.into(),
            sizes,
            null_rates,
            truth,
            replicates: default_replicates(),
            seed: default_seed(),
            strategy: default_strategy(),
            min_subclass_patients: default_min_patients(),
            alpha: default_alpha(),
            test_alpha: default_test_alpha(),
        }
    }

    pub fn num_baskets(&self) -> usize {
        self.sizes.len()
    }

    /// Generating response rates, validated to lie in (0, 1).
    pub fn true_rates(&self) -> Result<Vec<f64>> {
        let k = self.sizes.len();
        let values = match &self.truth {
            Truth::Rates(v) | Truth::RiskDifference(v) | Truth::RiskRatio(v) => v,
        };
        if values.len() != k {
            return Err(Error::InvalidArgument(alloc::format!(
                "scenario `{}`: truth has {} values for {k} sizes",
                self.label,
                values.len()
            )));
        }
        let rates: Vec<f64> = match &self.truth {
            Truth::Rates(v) => v.clone(),
            Truth::RiskDifference(d) => self.null_rates.iter().zip(d).map(|(p, d)| p + d).collect(),
            Truth::RiskRatio(r) => self.null_rates.iter().zip(r).map(|(p, r)| p * r).collect(),
        };
        if let Some(&bad) = rates.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "scenario `{}`: truth implies rate {bad} outside (0, 1)",
                self.label
            )));
        }
        Ok(rates)
    }

    /// Checks every field; returns the true rates on success.
    pub fn validate(&self) -> Result<Vec<f64>> {
        if self.sizes.is_empty() {
            return Err(Error::EmptyTable);
        }
        if self.null_rates.len() != self.sizes.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "scenario `{}`: null_rates has {} values for {} sizes",
                self.label,
                self.null_rates.len(),
                self.sizes.len()
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "scenario `{}`: replicates must be positive",
                self.label
            )));
        }
        for (name, a) in [("alpha", self.alpha), ("test_alpha", self.test_alpha)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "scenario `{}`: {name} {a} outside (0, 1)",
                    self.label
                )));
            }
        }
        self.design_table()?;
        self.true_rates()
    }

    /// Table of the design with no responders; carries sizes and null rates.
    pub fn design_table(&self) -> Result<BasketTable> {
        if self.null_rates.len() != self.sizes.len() {
            return Err(Error::LengthMismatch {
                expected: self.sizes.len(),
                got: self.null_rates.len(),
            });
        }
        BasketTable::new(
            self.sizes
                .iter()
                .zip(&self.null_rates)
                .enumerate()
                .map(|(i, (&n, &p0))| Basket::new(alloc::format!("{}", i + 1), 0, n, p0))
                .collect(),
        )
    }
}

/// Replicate `index` of the scenario with precomputed true rates.
fn draw_table(spec: &ScenarioSpec, rates: &[f64], index: u64) -> BasketTable {
    let mut rng = substream(spec.seed, index);
    let baskets = spec
        .sizes
        .iter()
        .zip(&spec.null_rates)
        .zip(rates)
        .enumerate()
        .map(|(i, ((&n, &p0), &p))| {
            let y = binomial(&mut rng, n, p);
            Basket::new(alloc::format!("{}", i + 1), y, n, p0)
        })
        .collect();
    // Counts are in range and the design was validated.
    BasketTable::new(baskets).expect("validated design")
}

/// Simulated dataset for replicate `index`.
pub fn generate_dataset(spec: &ScenarioSpec, index: u64) -> Result<BasketTable> {
    let rates = spec.validate()?;
    Ok(draw_table(spec, &rates, index))
}

/// The estimators compared in an estimation study.
pub const STUDY_SCALES: [EffectScale; 3] = [EffectScale::RD, EffectScale::RR, EffectScale::IW_RR];

/// Outcome of one estimator on one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateEstimate {
    pub point: f64,
    pub covered: bool,
    pub wald_reject: bool,
    pub exact_reject: bool,
}

/// One replicate of an estimation study, one entry per [`STUDY_SCALES`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReplicate {
    pub outcomes: [core::result::Result<ReplicateEstimate, Error>; 3],
}

/// Fixed quantities shared by all replicates of an estimation study.
#[derive(Debug, Clone)]
pub struct EstimationStudy {
    spec: ScenarioSpec,
    rates: Vec<f64>,
    truths: [f64; 3],
    weights: [Vec<f64>; 3],
    nulls: [NullDistribution; 3],
    z_test: f64,
}

impl EstimationStudy {
    /// Precomputes the limits and the exact null laws (Monte Carlo with
    /// 10,000 draws if the exact lattice is too large).
    pub fn new(spec: &ScenarioSpec) -> Result<EstimationStudy> {
        let rates = spec.validate()?;
        let design = spec.design_table()?;
        let mut truths = [0.0; 3];
        let mut weights: [Vec<f64>; 3] = Default::default();
        let mut nulls = Vec::with_capacity(3);
        for (i, &scale) in STUDY_SCALES.iter().enumerate() {
            truths[i] = misspecification_limit(&design, &rates, scale)?;
            // The RD estimator is paired with the unweighted statistic.
            let w = match scale {
                EffectScale::RiskDifference => vec![1.0; design.len()],
                s => s.weights(&design)?,
            };
            let dist =
                match null_distribution(&design, &w, TestMethod::Exact(ExactConfig::default())) {
                    Err(Error::LatticeOverflow { .. }) => null_distribution(
                        &design,
                        &w,
                        TestMethod::MonteCarlo {
                            reps: 10_000,
                            seed: spec.seed ^ 0x9e37_79b9_7f4a_7c15,
                        },
                    )?,
                    other => other?,
                };
            nulls.push(dist);
            weights[i] = w;
        }
        let nulls: [NullDistribution; 3] = nulls.try_into().expect("three scales");
        Ok(EstimationStudy {
            spec: spec.clone(),
            rates,
            truths,
            weights,
            nulls,
            z_test: normal_quantile(1.0 - spec.test_alpha),
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn truths(&self) -> [f64; 3] {
        self.truths
    }

    fn evaluate(&self, table: &BasketTable, i: usize) -> Result<ReplicateEstimate> {
        let scale = STUDY_SCALES[i];
        let fit: EffectEstimate = mh_fit(table, scale, self.spec.alpha)?;
        let null = scale.null_value();
        let t = statistic(table, &self.weights[i])?;
        Ok(ReplicateEstimate {
            point: fit.point,
            covered: fit.contains(self.truths[i]),
            wald_reject: fit.point - self.z_test * fit.std_error() > null,
            exact_reject: p_value(&self.nulls[i], t) <= self.spec.test_alpha,
        })
    }

    pub fn replicate(&self, index: u64) -> EstimationReplicate {
        let table = draw_table(&self.spec, &self.rates, index);
        EstimationReplicate {
            outcomes: [0, 1, 2].map(|i| self.evaluate(&table, i)),
        }
    }

    pub fn accumulator(&self) -> EstimationAccumulator {
        EstimationAccumulator {
            truths: self.truths,
            sums: [EstimatorSums::default(); 3],
            replicates: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct EstimatorSums {
    ok: u64,
    failures: u64,
    estimate: f64,
    covered: u64,
    wald: u64,
    exact: u64,
}

/// Running totals of an estimation study.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationAccumulator {
    truths: [f64; 3],
    sums: [EstimatorSums; 3],
    replicates: u64,
}

impl EstimationAccumulator {
    pub fn add(&mut self, rep: &EstimationReplicate) {
        self.replicates += 1;
        for (s, outcome) in self.sums.iter_mut().zip(&rep.outcomes) {
            match outcome {
                Ok(o) => {
                    s.ok += 1;
                    s.estimate += o.point;
                    s.covered += o.covered as u64;
                    s.wald += o.wald_reject as u64;
                    s.exact += o.exact_reject as u64;
                }
                Err(_) => s.failures += 1,
            }
        }
    }

    pub fn finish(&self, label: &str) -> EstimationMetrics {
        let estimators = STUDY_SCALES
            .iter()
            .zip(&self.sums)
            .zip(self.truths)
            .map(|((scale, s), truth)| {
                let ok = s.ok.max(1) as f64;
                EstimatorMetrics {
                    estimator: alloc::format!("MH-{}", scale.name()),
                    truth,
                    mean: if s.ok == 0 { f64::NAN } else { s.estimate / ok },
                    coverage: s.covered as f64 / ok,
                    wald_rejection: s.wald as f64 / ok,
                    exact_rejection: s.exact as f64 / ok,
                    completed: s.ok,
                    failures: s.failures,
                }
            })
            .collect();
        EstimationMetrics {
            label: label.into(),
            replicates: self.replicates,
            estimators,
        }
    }
}

/// Summary of one estimator. Rates are fractions of completed replicates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorMetrics {
    pub estimator: String,
    /// Large-strata limit of the estimator under the scenario.
    pub truth: f64,
    pub mean: f64,
    /// Coverage of the two-sided Wald interval.
    pub coverage: f64,
    /// Rejection rate of the one-sided Wald test.
    pub wald_rejection: f64,
    /// Rejection rate of the exact test on the matching statistic.
    pub exact_rejection: f64,
    pub completed: u64,
    pub failures: u64,
}

impl EstimatorMetrics {
    pub fn bias(&self) -> f64 {
        self.mean - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimationMetrics {
    pub label: String,
    pub replicates: u64,
    pub estimators: Vec<EstimatorMetrics>,
}

impl EstimationMetrics {
    pub fn get(&self, scale: EffectScale) -> Option<&EstimatorMetrics> {
        let name = alloc::format!("MH-{}", scale.name());
        self.estimators.iter().find(|e| e.estimator == name)
    }
}

pub fn run_estimation_study(spec: &ScenarioSpec) -> Result<EstimationMetrics> {
    let study = EstimationStudy::new(spec)?;
    let mut acc = study.accumulator();
    for i in 0..spec.replicates {
        acc.add(&study.replicate(i));
    }
    Ok(acc.finish(&spec.label))
}

/// Per-basket result of one identification replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReplicate {
    /// `pi0_k + D` of basket `k`'s subclass in the selected model.
    pub fitted: Vec<f64>,
    /// Subclass interval lies entirely above zero.
    pub rejected: Vec<bool>,
    pub selected: Partition,
}

/// Fixed quantities shared by all replicates of an identification study.
#[derive(Debug, Clone)]
pub struct IdentificationStudy {
    spec: ScenarioSpec,
    rates: Vec<f64>,
    models: Vec<Partition>,
    config: GicConfig,
}

impl IdentificationStudy {
    pub fn new(spec: &ScenarioSpec) -> Result<IdentificationStudy> {
        let rates = spec.validate()?;
        let design = spec.design_table()?;
        let models = enumerate_models(
            &design,
            spec.strategy,
            spec.min_subclass_patients,
            EnumerationLimits::default(),
        )?;
        if models.is_empty() {
            return Err(Error::InvalidArgument(alloc::format!(
                "scenario `{}`: no candidate model satisfies the subclass minimum",
                spec.label
            )));
        }
        Ok(IdentificationStudy {
            spec: spec.clone(),
            rates,
            models,
            config: GicConfig {
                alpha: spec.alpha,
                ..GicConfig::default()
            },
        })
    }

    pub fn models(&self) -> &[Partition] {
        &self.models
    }

    pub fn true_rates(&self) -> &[f64] {
        &self.rates
    }

    /// Selects the minimum-GIC model on the RD scale. Fails if any candidate
    /// model cannot be scored.
    pub fn replicate(&self, index: u64) -> Result<IdentificationReplicate> {
        let table = draw_table(&self.spec, &self.rates, index);
        let results = self
            .models
            .iter()
            .map(|p| model_gic(&table, p, EffectScale::RD, self.config))
            .collect::<Result<Vec<_>>>()?;
        let ranking = GicRanking::from_results(results, self.spec.strategy, 0.0);
        let best = ranking.best().expect("at least one model");
        let k = table.len();
        let mut fitted = vec![0.0; k];
        let mut rejected = vec![false; k];
        for s in &best.subclasses {
            for &m in &s.members {
                fitted[m] = self.spec.null_rates[m] + s.estimate.point;
                rejected[m] = s.estimate.ci_low > 0.0;
            }
        }
        Ok(IdentificationReplicate {
            fitted,
            rejected,
            selected: best.partition.clone(),
        })
    }

    pub fn accumulator(&self) -> IdentificationAccumulator {
        let k = self.rates.len();
        IdentificationAccumulator {
            rates: self.rates.clone(),
            sum: vec![0.0; k],
            sum_sq_err: vec![0.0; k],
            rejections: vec![0; k],
            ok: 0,
            failures: 0,
        }
    }
}

/// Running totals of an identification study.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationAccumulator {
    rates: Vec<f64>,
    sum: Vec<f64>,
    sum_sq_err: Vec<f64>,
    rejections: Vec<u64>,
    ok: u64,
    failures: u64,
}

impl IdentificationAccumulator {
    pub fn add(&mut self, rep: &Result<IdentificationReplicate>) {
        match rep {
            Ok(r) => {
                self.ok += 1;
                for k in 0..self.rates.len() {
                    let e = r.fitted[k] - self.rates[k];
                    self.sum[k] += r.fitted[k];
                    self.sum_sq_err[k] += e * e;
                    self.rejections[k] += r.rejected[k] as u64;
                }
            }
            Err(_) => self.failures += 1,
        }
    }

    pub fn finish(&self, label: &str, strategy: Strategy) -> IdentificationMetrics {
        let ok = self.ok.max(1) as f64;
        let baskets = (0..self.rates.len())
            .map(|k| {
                let mean = if self.ok == 0 {
                    f64::NAN
                } else {
                    self.sum[k] / ok
                };
                BasketMetrics {
                    true_rate: self.rates[k],
                    estimate: mean,
                    bias_x100: 100.0 * (mean - self.rates[k]),
                    mse_x100: 100.0 * self.sum_sq_err[k] / ok,
                    reject_pct: 100.0 * self.rejections[k] as f64 / ok,
                }
            })
            .collect();
        IdentificationMetrics {
            label: label.into(),
            strategy,
            replicates: self.ok + self.failures,
            failures: self.failures,
            baskets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasketMetrics {
    pub true_rate: f64,
    /// Mean fitted rate.
    pub estimate: f64,
    pub bias_x100: f64,
    pub mse_x100: f64,
    /// Percentage of replicates declaring the basket effective.
    pub reject_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentificationMetrics {
    pub label: String,
    pub strategy: Strategy,
    pub replicates: u64,
    pub failures: u64,
    pub baskets: Vec<BasketMetrics>,
}

pub fn run_identification_study(spec: &ScenarioSpec) -> Result<IdentificationMetrics> {
    let study = IdentificationStudy::new(spec)?;
    let mut acc = study.accumulator();
    for i in 0..spec.replicates {
        acc.add(&study.replicate(i));
    }
    Ok(acc.finish(&spec.label, spec.strategy))
}
