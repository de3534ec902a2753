//! Chi-squared test of effect homogeneity across baskets.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::mh_estimate;
use crate::scale::EffectScale;
use crate::special::chi_squared_sf;
use crate::table::BasketTable;

/// Form of the residual denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GofVariant {
    /// `sum (y - n p)^2 / (n p)`.
    #[default]
    Standard,
    /// Binomial Pearson form `sum (y - n p)^2 / (n p (1 - p))`.
    Pearson,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Rates implied by the common effect, one per basket.
    pub fitted_rates: Vec<f64>,
}

/// Homogeneity test with `df = K - 1` against the MH common effect.
pub fn gof_test(table: &BasketTable, scale: EffectScale) -> Result<GofResult> {
    gof_test_with(table, scale, GofVariant::Standard)
}

pub fn gof_test_with(
    table: &BasketTable,
    scale: EffectScale,
    variant: GofVariant,
) -> Result<GofResult> {
    if table.len() < 2 {
        return Err(Error::TooFewBaskets {
            required: 2,
            got: table.len(),
        });
    }
    let effect = mh_estimate(table, scale)?;
    let mut fitted_rates = Vec::with_capacity(table.len());
    let mut statistic = 0.0;
    for b in table {
        let rate = scale.link(b.null_rate).rate(effect);
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::DegenerateFit {
                label: b.label.clone(),
                rate,
            });
        }
        let expected = b.patients as f64 * rate;
        let resid = b.responders as f64 - expected;
        let denom = match variant {
            GofVariant::Standard => expected,
            GofVariant::Pearson => expected * (1.0 - rate),
        };
        statistic += resid * resid / denom;
        fitted_rates.push(rate);
    }
    let df = table.len() - 1;
    Ok(GofResult {
        statistic,
        df,
        p_value: chi_squared_sf(statistic, df as f64).clamp(0.0, 1.0),
        fitted_rates,
    })
}
