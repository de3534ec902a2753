//! One-sample Mantel-Haenszel estimators.
//!
//! Every scale is a ratio of sums `sum R_k / sum S_k`, the root of the
//! estimating equation `U(d) = sum R_k - d * sum S_k`:
//!
//! | scale | `R_k`                    | `S_k`                      |
//! |-------|--------------------------|----------------------------|
//! | RD    | `y_k - n_k pi0_k`        | `n_k`                      |
//! | RR    | `w_k y_k`                | `w_k n_k pi0_k`            |
//! | OR    | `w_k (1 - pi0_k) y_k`    | `w_k pi0_k (n_k - y_k)`    |
//!
//! Variances are the dually consistent sandwich estimators built from the
//! unbiased per-basket binomial variance `n/(n-1) p(1-p)`. Confidence
//! intervals are plain Wald intervals on the natural scale.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scale::EffectScale;
use crate::special::{beta_quantile, normal_quantile};
use crate::table::BasketTable;

/// Per-basket numerator and denominator contributions with the weights that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MhComponents {
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MhComponents {
    pub fn sum_numerators(&self) -> f64 {
        self.numerators.iter().sum()
    }

    pub fn sum_denominators(&self) -> f64 {
        self.denominators.iter().sum()
    }

    pub fn estimate(&self) -> Result<f64> {
        let s = self.sum_denominators();
        if s <= 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        Ok(self.sum_numerators() / s)
    }

    /// Estimating function `U(d)`.
    pub fn score(&self, effect: f64) -> f64 {
        self.numerators
            .iter()
            .zip(&self.denominators)
            .map(|(r, s)| r - effect * s)
            .sum()
    }
}

/// Point estimate with its Wald interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EffectEstimate {
    pub scale: EffectScale,
    pub point: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    /// Total patients contributing to the estimate.
    pub n_effective: u64,
}

impl EffectEstimate {
    pub fn std_error(&self) -> f64 {
        libm::sqrt(self.variance)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Components from (possibly fractional) responder counts.
pub(crate) fn components_from<I>(rows: I, scale: EffectScale) -> MhComponents
where
    I: IntoIterator<Item = (f64, f64, f64, f64)>,
{
    let mut numerators = Vec::new();
    let mut denominators = Vec::new();
    let mut weights = Vec::new();
    for (y, n, p0, w) in rows {
        let (r, s) = match scale {
            EffectScale::RiskDifference => (y - n * p0, n),
            EffectScale::RiskRatio(_) => (w * y, w * n * p0),
            EffectScale::OddsRatio(_) => (w * (1.0 - p0) * y, w * p0 * (n - y)),
        };
        numerators.push(r);
        denominators.push(s);
        weights.push(w);
    }
    MhComponents {
        numerators,
        denominators,
        weights,
    }
}

pub fn mh_components(table: &BasketTable, scale: EffectScale) -> Result<MhComponents> {
    let weights = scale.weights(table)?;
    Ok(components_from(
        table
            .iter()
            .zip(weights)
            .map(|(b, w)| (b.responders as f64, b.patients as f64, b.null_rate, w)),
        scale,
    ))
}

/// Basket-specific effects with the observed rate in place of the true one.
/// An odds ratio for a basket where everyone responded is `+inf`.
pub fn basket_effects(table: &BasketTable, scale: EffectScale) -> Vec<f64> {
    table
        .iter()
        .map(|b| scale.effect_of(b.rate(), b.null_rate))
        .collect()
}

pub fn mh_estimate(table: &BasketTable, scale: EffectScale) -> Result<f64> {
    mh_components(table, scale)?.estimate()
}

/// Unbiased estimate of `pi (1 - pi)` from `y` of `n`: `n/(n-1) p(1-p)`.
pub fn unbiased_rate_variance(y: u64, n: u64) -> f64 {
    debug_assert!(n >= 2);
    let p = y as f64 / n as f64;
    n as f64 / (n as f64 - 1.0) * p * (1.0 - p)
}

/// Variance of the MH estimate. `point` is only read on the odds-ratio
/// scale, whose score variance depends on the fitted effect.
pub fn mh_variance(table: &BasketTable, scale: EffectScale, point: f64) -> Result<f64> {
    let comps = mh_components(table, scale)?;
    variance_from_components(table, scale, &comps, point)
}

fn variance_from_components(
    table: &BasketTable,
    scale: EffectScale,
    comps: &MhComponents,
    point: f64,
) -> Result<f64> {
    let mut numerator = 0.0;
    for (b, &w) in table.iter().zip(&comps.weights) {
        if b.patients < 2 {
            return Err(Error::SingletonBasket(b.label.clone()));
        }
        let n = b.patients as f64;
        // n^2/(n-1) p(1-p) = n * unbiased_rate_variance
        let base = n * unbiased_rate_variance(b.responders, b.patients);
        let factor = match scale {
            EffectScale::RiskDifference => 1.0,
            EffectScale::RiskRatio(_) => w * w,
            EffectScale::OddsRatio(_) => {
                let g = 1.0 + (point - 1.0) * b.null_rate;
                w * w * g * g
            }
        };
        numerator += factor * base;
    }
    let s = comps.sum_denominators();
    if s <= 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(numerator / (s * s))
}

/// Two-sided Wald interval `point -/+ z_{1-alpha/2} sqrt(variance)`.
pub fn wald_ci(point: f64, variance: f64, alpha: f64) -> (f64, f64) {
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * libm::sqrt(variance.max(0.0));
    (point - half, point + half)
}

/// Point estimate, variance and Wald interval in one pass.
pub fn mh_fit(table: &BasketTable, scale: EffectScale, alpha: f64) -> Result<EffectEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let comps = mh_components(table, scale)?;
    let point = comps.estimate()?;
    let variance = variance_from_components(table, scale, &comps, point)?;
    let (ci_low, ci_high) = wald_ci(point, variance, alpha);
    Ok(EffectEstimate {
        scale,
        point,
        variance,
        ci_low,
        ci_high,
        alpha,
        n_effective: table.total_patients(),
    })
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(y: u64, n: u64, alpha: f64) -> (f64, f64) {
    let (yf, nf) = (y as f64, n as f64);
    let low = if y == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, yf, nf - yf + 1.0)
    };
    let high = if y >= n {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, yf + 1.0, nf - yf)
    };
    (low, high)
}

/// Large-strata limit of the MH estimator when the true basket rates are
/// `true_rates`: `sum E[R_k] / sum E[S_k]`. For RD this is the
/// sample-size-weighted mean RD; for RR the `w n pi0`-weighted mean RR.
pub fn misspecification_limit(
    table: &BasketTable,
    true_rates: &[f64],
    scale: EffectScale,
) -> Result<f64> {
    if true_rates.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: true_rates.len(),
        });
    }
    if let Some(&bad) = true_rates.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidArgument(alloc::format!(
            "true rate {bad} outside (0, 1)"
        )));
    }
    let weights = scale.weights(table)?;
    components_from(
        table
            .iter()
            .zip(true_rates)
            .zip(weights)
            .map(|((b, &p), w)| {
                let n = b.patients as f64;
                (n * p, n, b.null_rate, w)
            }),
        scale,
    )
    .estimate()
}
