//! Builds the reports behind `analyze`, `test`, `gof` and `models`.

use basket_core::{
    basket_effects, clopper_pearson, exact_test, gof_test_with, mh_fit, summarize_models,
    BasketTable, EffectEstimate, EffectScale, Error, ExactConfig, GofVariant, NullMethod,
    RankOptions, RankingSummary, TestMethod,
};
use serde::Serialize;

/// A value or the message of the error that prevented it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome<T> {
    Value(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Outcome::Value(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

impl<T> From<Result<T, Error>> for Outcome<T> {
    fn from(r: Result<T, Error>) -> Self {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasketRow {
    pub label: String,
    pub y: u64,
    pub n: u64,
    pub pi0: f64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rd: f64,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub scale: String,
    pub estimate: Outcome<EffectEstimate>,
}

/// How the null law for a test is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Exact, falling back to Monte Carlo when the lattice is too large.
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestOptions {
    pub method: MethodChoice,
    pub reps: u64,
    pub seed: u64,
    pub add_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestValue {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(flatten)]
    pub method: NullMethod,
    /// True when the exact law was requested but too large.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    /// `T` for unit weights, `T_iw` for inverse-null weights, `T_w` otherwise.
    pub name: String,
    pub scale: String,
    pub result: Outcome<TestValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofValue {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofRow {
    pub scale: String,
    pub result: Outcome<GofValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubclassRow {
    /// 1-based basket numbers.
    pub baskets: Vec<usize>,
    pub labels: Vec<String>,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub rank: usize,
    pub model: String,
    pub gic: f64,
    pub loglik: f64,
    pub bias: f64,
    pub near_optimal: bool,
    pub homogeneous: bool,
    /// Least effective first.
    pub subclasses: Vec<SubclassRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub scale: String,
    pub strategy: String,
    pub total_models: usize,
    pub min_gic: f64,
    pub window: f64,
    pub near_optimal_count: usize,
    pub models: Vec<ModelRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub baskets: Vec<BasketRow>,
    pub estimates: Vec<EstimateRow>,
    pub tests: Vec<TestRow>,
    pub gof: Vec<GofRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingReport>,
}

pub fn basket_rows(table: &BasketTable, alpha: f64) -> Vec<BasketRow> {
    let rd = basket_effects(table, EffectScale::RD);
    let rr = basket_effects(table, EffectScale::RR);
    table
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let (lo, hi) = clopper_pearson(b.responders, b.patients, alpha);
            BasketRow {
                label: b.label.clone(),
                y: b.responders,
                n: b.patients,
                pi0: b.null_rate,
                rate: b.rate(),
                ci_low: lo,
                ci_high: hi,
                rd: rd[k],
                rr: rr[k],
            }
        })
        .collect()
}

pub fn estimate_rows(table: &BasketTable, scales: &[EffectScale], alpha: f64) -> Vec<EstimateRow> {
    scales
        .iter()
        .map(|&s| EstimateRow {
            scale: s.name().into(),
            estimate: mh_fit(table, s, alpha).into(),
        })
        .collect()
}

fn statistic_name(scale: EffectScale) -> &'static str {
    match scale.name() {
        "RD" | "RR" | "OR" => "T",
        "iwRR" | "iwOR" => "T_iw",
        _ => "T_w",
    }
}

/// The weighted-sum test for one scale. RD uses unit weights.
pub fn run_test(
    table: &BasketTable,
    scale: EffectScale,
    options: TestOptions,
) -> Result<TestValue, Error> {
    let weights = scale.weights(table)?;
    let mc = TestMethod::MonteCarlo {
        reps: options.reps,
        seed: options.seed,
    };
    let (result, fallback) = match options.method {
        MethodChoice::MonteCarlo => (exact_test(table, &weights, mc)?, false),
        MethodChoice::Exact => {
            match exact_test(table, &weights, TestMethod::Exact(ExactConfig::default())) {
                Err(Error::LatticeOverflow { .. }) => (exact_test(table, &weights, mc)?, true),
                other => (other?, false),
            }
        }
    };
    let mut p_value = result.p_value;
    if options.add_one {
        if let NullMethod::MonteCarlo { .. } = result.method {
            let dist = basket_core::null_distribution(table, &weights, mc)?;
            p_value = basket_core::p_value_add_one(&dist, result.statistic);
        }
    }
    Ok(TestValue {
        statistic: result.statistic,
        p_value,
        method: result.method,
        fallback,
    })
}

/// One test per distinct statistic among `scales`.
pub fn test_rows(
    table: &BasketTable,
    scales: &[EffectScale],
    options: TestOptions,
) -> Vec<TestRow> {
    let mut rows = Vec::new();
    let mut seen: Vec<(&str, Option<Vec<f64>>)> = Vec::new();
    for &s in scales {
        let key = (statistic_name(s), s.weights(table).ok());
        if seen.contains(&key) {
            continue;
        }
        rows.push(TestRow {
            name: key.0.into(),
            scale: s.name().into(),
            result: run_test(table, s, options).into(),
        });
        seen.push(key);
    }
    rows
}

pub fn gof_rows(table: &BasketTable, scales: &[EffectScale], variant: GofVariant) -> Vec<GofRow> {
    scales
        .iter()
        .map(|&s| GofRow {
            scale: s.name().into(),
            result: gof_test_with(table, s, variant)
                .map(|g| GofValue {
                    statistic: g.statistic,
                    df: g.df,
                    p_value: g.p_value,
                })
                .into(),
        })
        .collect()
}

pub fn ranking_report(
    table: &BasketTable,
    scale: EffectScale,
    options: RankOptions,
    top: usize,
    last: usize,
) -> Result<RankingReport, Error> {
    let summary = summarize_models(table, scale, options, top, last)?;
    Ok(ranking_from_summary(table, scale, &summary))
}

pub fn ranking_from_summary(
    table: &BasketTable,
    scale: EffectScale,
    summary: &RankingSummary,
) -> RankingReport {
    let labels = table.baskets();
    let models = summary
        .entries
        .iter()
        .map(|e| ModelRow {
            rank: e.rank,
            model: e.result.partition.model_string(),
            gic: e.result.gic,
            loglik: e.result.loglik,
            bias: e.result.bias,
            near_optimal: e.near_optimal,
            homogeneous: e.result.partition.num_classes() == 1,
            subclasses: e
                .result
                .subclasses
                .iter()
                .map(|s| SubclassRow {
                    baskets: s.member_labels(),
                    labels: s.members.iter().map(|&i| labels[i].label.clone()).collect(),
                    estimate: s.estimate.point,
                    ci_low: s.estimate.ci_low,
                    ci_high: s.estimate.ci_high,
                    gic: s.gic,
                })
                .collect(),
        })
        .collect();
    RankingReport {
        scale: scale.name().into(),
        strategy: summary.strategy.name().into(),
        total_models: summary.total_models,
        min_gic: summary.min_gic,
        window: summary.near_optimal_window,
        near_optimal_count: summary.near_optimal_count,
        models,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions<'a> {
    pub scales: &'a [EffectScale],
    pub alpha: f64,
    pub test: TestOptions,
    pub gof: GofVariant,
    /// Scale and settings for the model ranking, if requested.
    pub ranking: Option<(EffectScale, RankOptions, usize, usize)>,
}

/// Everything for one dataset. Estimation failures are recorded in the
/// report; only a failing model enumeration is an error.
pub fn analyze(table: &BasketTable, options: AnalysisOptions<'_>) -> Result<AnalysisReport, Error> {
    let ranking = match options.ranking {
        Some((scale, rank, top, last)) => Some(ranking_report(table, scale, rank, top, last)?),
        None => None,
    };
    Ok(AnalysisReport {
        alpha: options.alpha,
        baskets: basket_rows(table, options.alpha),
        estimates: estimate_rows(table, options.scales, options.alpha),
        tests: test_rows(table, options.scales, options.test),
        gof: gof_rows(table, options.scales, options.gof),
        ranking,
    })
}
