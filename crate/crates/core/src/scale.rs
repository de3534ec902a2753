//! Effect scales, weight policies and the rate links used by the likelihood.

use crate::error::{Error, Result};
use crate::table::{Basket, BasketTable};
use alloc::vec::Vec;

/// How ratio-scale baskets are weighted when the basket carries no weight of
/// its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum WeightPolicy {
    /// `w_k = 1`.
    Constant,
    /// `w_k = 1 / pi0_k`.
    InverseNull,
    /// Every basket must carry its own weight.
    Supplied,
}

/// Effect measure against the basket-specific null rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "scale", content = "weights"))]
pub enum EffectScale {
    /// `pi_k - pi0_k`; always constant weights.
    #[cfg_attr(feature = "serde", serde(rename = "RD"))]
    RiskDifference,
    /// `pi_k / pi0_k`.
    #[cfg_attr(feature = "serde", serde(rename = "RR"))]
    RiskRatio(WeightPolicy),
    /// `odds(pi_k) / odds(pi0_k)`.
    #[cfg_attr(feature = "serde", serde(rename = "OR"))]
    OddsRatio(WeightPolicy),
}

impl EffectScale {
    pub const RD: EffectScale = EffectScale::RiskDifference;
    pub const RR: EffectScale = EffectScale::RiskRatio(WeightPolicy::Constant);
    pub const IW_RR: EffectScale = EffectScale::RiskRatio(WeightPolicy::InverseNull);
    pub const OR: EffectScale = EffectScale::OddsRatio(WeightPolicy::Constant);

    /// Effect value meaning "no effect": 0 for RD, 1 for the ratios.
    pub fn null_value(self) -> f64 {
        match self {
            EffectScale::RiskDifference => 0.0,
            _ => 1.0,
        }
    }

    /// Short display name, e.g. `MH-iwRR`.
    pub fn name(self) -> &'static str {
        match self {
            EffectScale::RiskDifference => "RD",
            EffectScale::RiskRatio(WeightPolicy::InverseNull) => "iwRR",
            EffectScale::RiskRatio(_) => "RR",
            EffectScale::OddsRatio(WeightPolicy::InverseNull) => "iwOR",
            EffectScale::OddsRatio(_) => "OR",
        }
    }

    /// Resolved weight for one basket. User weights win over the policy;
    /// RD ignores both.
    pub fn weight_for(self, basket: &Basket) -> Result<f64> {
        let policy = match self {
            EffectScale::RiskDifference => return Ok(1.0),
            EffectScale::RiskRatio(p) | EffectScale::OddsRatio(p) => p,
        };
        if let Some(w) = basket.weight {
            return Ok(w);
        }
        match policy {
            WeightPolicy::Constant => Ok(1.0),
            WeightPolicy::InverseNull => Ok(1.0 / basket.null_rate),
            WeightPolicy::Supplied => Err(Error::MissingWeight(basket.label.clone())),
        }
    }

    pub fn weights(self, table: &BasketTable) -> Result<Vec<f64>> {
        table.iter().map(|b| self.weight_for(b)).collect()
    }

    /// Per-basket effect of a response rate `rate` against `null_rate`.
    pub fn effect_of(self, rate: f64, null_rate: f64) -> f64 {
        match self {
            EffectScale::RiskDifference => rate - null_rate,
            EffectScale::RiskRatio(_) => rate / null_rate,
            EffectScale::OddsRatio(_) => {
                if rate >= 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 - null_rate) * rate / (null_rate * (1.0 - rate))
                }
            }
        }
    }

    pub fn link(self, null_rate: f64) -> LinkFunction {
        LinkFunction {
            scale: self,
            null_rate,
        }
    }
}

/// The map `h_k` from a common effect to basket `k`'s response rate, with
/// its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFunction {
    scale: EffectScale,
    null_rate: f64,
}

impl LinkFunction {
    pub fn rate(&self, effect: f64) -> f64 {
        let p0 = self.null_rate;
        match self.scale {
            EffectScale::RiskDifference => p0 + effect,
            EffectScale::RiskRatio(_) => p0 * effect,
            EffectScale::OddsRatio(_) => p0 * effect / (1.0 - p0 + p0 * effect),
        }
    }

    pub fn derivative(&self, effect: f64) -> f64 {
        let p0 = self.null_rate;
        match self.scale {
            EffectScale::RiskDifference => 1.0,
            EffectScale::RiskRatio(_) => p0,
            EffectScale::OddsRatio(_) => {
                let d = 1.0 - p0 + p0 * effect;
                p0 * (1.0 - p0) / (d * d)
            }
        }
    }
}
