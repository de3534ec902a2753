//! Generalized information criterion for basket subclass models.
//!
//! Within a subclass every basket shares one effect `D`, fitted by the MH
//! estimator, and basket `k` responds at rate `h_k(D)`. The criterion is the
//! negative binomial log-likelihood at the fit plus a bias correction
//! `(sum S)^-1 sum (R_k - D S_k) { y_k h'/h - (n_k - y_k) h'/(1 - h) }`
//! that accounts for the fit being an M-estimate rather than the MLE.
//! The GIC of a partition is the sum over its subclasses.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{mh_components, mh_fit, EffectEstimate};
use crate::partition::{for_each_model, masks_of, EnumerationLimits, Partition, Strategy};
use crate::scale::EffectScale;
use crate::table::BasketTable;

const CLAMP: f64 = 1e-12;

/// Link derivative used inside the bias correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BiasConvention {
    /// Unit derivative on every scale. Matches the published reference
    /// rankings on both the RD and the inverse-weighted RR scale.
    #[default]
    Published,
    /// The derivative of the scale's link, `h'_k(D)`.
    LinkDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GicConfig {
    pub bias: BiasConvention,
    /// Level of the per-subclass Wald intervals.
    pub alpha: f64,
}

impl Default for GicConfig {
    fn default() -> Self {
        GicConfig {
            bias: BiasConvention::Published,
            alpha: 0.05,
        }
    }
}

/// Fit of one subclass.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SubclassFit {
    /// 0-based basket indices, ascending.
    pub members: Vec<usize>,
    pub estimate: EffectEstimate,
    pub gic: f64,
    pub loglik: f64,
    pub bias: f64,
}

impl SubclassFit {
    /// 1-based member labels as used in model strings.
    pub fn member_labels(&self) -> Vec<usize> {
        self.members.iter().map(|i| i + 1).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GicResult {
    pub partition: Partition,
    pub gic: f64,
    pub loglik: f64,
    pub bias: f64,
    pub subclasses: Vec<SubclassFit>,
}

impl GicResult {
    /// Subclass holding basket `index`.
    pub fn subclass_of(&self, index: usize) -> Option<&SubclassFit> {
        self.subclasses.iter().find(|s| s.members.contains(&index))
    }
}

/// Log-likelihood and bias of a single-class model for `table`.
fn likelihood_terms(
    table: &BasketTable,
    scale: EffectScale,
    effect: f64,
    numerators: &[f64],
    denominators: &[f64],
    convention: BiasConvention,
) -> Result<(f64, f64)> {
    let mut loglik = 0.0;
    let mut bias = 0.0;
    for ((b, &r), &s) in table.iter().zip(numerators).zip(denominators) {
        let link = scale.link(b.null_rate);
        let raw = link.rate(effect);
        let y = b.responders as f64;
        let fails = (b.patients - b.responders) as f64;
        // Out-of-range fits are tolerated only where the offending log term
        // carries a zero count.
        if !(raw >= CLAMP || b.responders == 0) || !(raw <= 1.0 - CLAMP || fails == 0.0) {
            return Err(Error::DegenerateFit {
                label: b.label.clone(),
                rate: raw,
            });
        }
        let h = raw.clamp(CLAMP, 1.0 - CLAMP);
        let dh = match convention {
            BiasConvention::Published => 1.0,
            BiasConvention::LinkDerivative => link.derivative(effect),
        };
        let mut score = 0.0;
        if b.responders > 0 {
            loglik += y * libm::log(h);
            score += y * dh / h;
        }
        if fails > 0.0 {
            loglik += fails * libm::log(1.0 - h);
            score -= fails * dh / (1.0 - h);
        }
        bias += (r - effect * s) * score;
    }
    let total: f64 = denominators.iter().sum();
    Ok((loglik, bias / total))
}

/// GIC of `table` treated as a single subclass.
pub fn subclass_gic(
    table: &BasketTable,
    scale: EffectScale,
    config: GicConfig,
) -> Result<SubclassFit> {
    subclass_fit(table, (0..table.len()).collect(), scale, config)
}

fn subclass_fit(
    slice: &BasketTable,
    members: Vec<usize>,
    scale: EffectScale,
    config: GicConfig,
) -> Result<SubclassFit> {
    let comps = mh_components(slice, scale)?;
    let estimate = mh_fit(slice, scale, config.alpha)?;
    let (loglik, bias) = likelihood_terms(
        slice,
        scale,
        estimate.point,
        &comps.numerators,
        &comps.denominators,
        config.bias,
    )?;
    Ok(SubclassFit {
        members,
        estimate,
        gic: -loglik + bias,
        loglik,
        bias,
    })
}

/// GIC of a partition: the sum of its subclasses' criteria. Subclasses are
/// returned in canonical order.
pub fn model_gic(
    table: &BasketTable,
    partition: &Partition,
    scale: EffectScale,
    config: GicConfig,
) -> Result<GicResult> {
    if partition.num_baskets() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: partition.num_baskets(),
        });
    }
    let mut subclasses = Vec::with_capacity(partition.num_classes());
    for members in partition.classes() {
        let slice = table.subset(&members)?;
        subclasses.push(subclass_fit(&slice, members, scale, config)?);
    }
    let loglik = subclasses.iter().map(|s| s.loglik).sum();
    let bias = subclasses.iter().map(|s| s.bias).sum();
    let gic = subclasses.iter().map(|s| s.gic).sum();
    Ok(GicResult {
        partition: partition.clone(),
        gic,
        loglik,
        bias,
        subclasses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    pub strategy: Strategy,
    pub min_subclass_patients: u64,
    pub window: f64,
    pub limits: EnumerationLimits,
    pub gic: GicConfig,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            strategy: Strategy::TwoSubclass,
            min_subclass_patients: 10,
            window: 1.0,
            limits: EnumerationLimits::default(),
            gic: GicConfig::default(),
        }
    }
}

/// Models ordered by ascending GIC.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GicRanking {
    pub results: Vec<GicResult>,
    pub strategy: Strategy,
    pub near_optimal_window: f64,
}

impl GicRanking {
    /// Sorts scored models: ascending GIC, ties by canonical partition.
    /// Subclasses within each model are put least effective first.
    pub fn from_results(
        mut results: Vec<GicResult>,
        strategy: Strategy,
        window: f64,
    ) -> GicRanking {
        results.sort_by(|a, b| {
            a.gic
                .total_cmp(&b.gic)
                .then_with(|| a.partition.cmp(&b.partition))
        });
        for r in &mut results {
            r.subclasses
                .sort_by(|a, b| a.estimate.point.total_cmp(&b.estimate.point));
        }
        GicRanking {
            results,
            strategy,
            near_optimal_window: window,
        }
    }

    pub fn best(&self) -> Option<&GicResult> {
        self.results.first()
    }

    pub fn min_gic(&self) -> f64 {
        self.best().map_or(f64::NAN, |r| r.gic)
    }

    pub fn is_near_optimal(&self, rank: usize) -> bool {
        self.results
            .get(rank)
            .is_some_and(|r| r.gic - self.min_gic() <= self.near_optimal_window)
    }

    /// Number of models within the window of the minimum.
    pub fn near_optimal_count(&self) -> usize {
        (0..self.results.len())
            .filter(|&i| self.is_near_optimal(i))
            .count()
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// Subclass fits keyed by basket bit mask. Every subclass is fitted once
/// however many partitions contain it.
struct FitCache<'a> {
    table: &'a BasketTable,
    scale: EffectScale,
    config: GicConfig,
    fits: BTreeMap<u64, SubclassFit>,
}

impl<'a> FitCache<'a> {
    fn new(table: &'a BasketTable, scale: EffectScale, config: GicConfig) -> Self {
        FitCache {
            table,
            scale,
            config,
            fits: BTreeMap::new(),
        }
    }

    fn fit(&mut self, mask: u64) -> Result<&SubclassFit> {
        if !self.fits.contains_key(&mask) {
            let members: Vec<usize> = (0..self.table.len())
                .filter(|i| mask >> i & 1 == 1)
                .collect();
            let slice = self.table.subset(&members)?;
            let fit = subclass_fit(&slice, members, self.scale, self.config)?;
            self.fits.insert(mask, fit);
        }
        Ok(&self.fits[&mask])
    }

    fn gic(&mut self, assignment: &[usize], classes: usize) -> Result<f64> {
        let mut total = 0.0;
        for mask in masks_of(assignment, classes) {
            total += self.fit(mask)?.gic;
        }
        Ok(total)
    }

    fn result(&mut self, assignment: &[usize], classes: usize) -> Result<GicResult> {
        let mut subclasses = Vec::with_capacity(classes);
        for mask in masks_of(assignment, classes) {
            subclasses.push(self.fit(mask)?.clone());
        }
        Ok(GicResult {
            partition: Partition::from_rgs(assignment, classes),
            gic: subclasses.iter().map(|s| s.gic).sum(),
            loglik: subclasses.iter().map(|s| s.loglik).sum(),
            bias: subclasses.iter().map(|s| s.bias).sum(),
            subclasses,
        })
    }
}

/// Scores every candidate model and ranks them.
pub fn rank_models(
    table: &BasketTable,
    scale: EffectScale,
    options: RankOptions,
) -> Result<GicRanking> {
    let mut cache = FitCache::new(table, scale, options.gic);
    let mut results = Vec::new();
    for_each_model(
        table,
        options.strategy,
        options.min_subclass_patients,
        options.limits,
        |a, classes| {
            results.push(cache.result(a, classes)?);
            Ok(())
        },
    )?;
    Ok(GicRanking::from_results(
        results,
        options.strategy,
        options.window,
    ))
}

/// A model with its 1-based rank.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankedModel {
    pub rank: usize,
    pub near_optimal: bool,
    pub result: GicResult,
}

/// Selected ranks of a ranking, computed without keeping every model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankingSummary {
    pub strategy: Strategy,
    pub total_models: usize,
    pub min_gic: f64,
    pub near_optimal_window: f64,
    pub near_optimal_count: usize,
    /// Ascending by rank.
    pub entries: Vec<RankedModel>,
}

impl RankingSummary {
    /// The single-subclass model, if it is a candidate and was selected.
    pub fn homogeneous(&self) -> Option<&RankedModel> {
        self.entries
            .iter()
            .find(|e| e.result.partition.num_classes() == 1)
    }
}

/// The `top` best and `last` worst models plus the single-subclass model.
/// Memory grows with the number of candidates only by one `f64` each.
pub fn summarize_models(
    table: &BasketTable,
    scale: EffectScale,
    options: RankOptions,
    top: usize,
    last: usize,
) -> Result<RankingSummary> {
    let mut cache = FitCache::new(table, scale, options.gic);
    let mut gics = Vec::new();
    for_each_model(
        table,
        options.strategy,
        options.min_subclass_patients,
        options.limits,
        |a, classes| {
            gics.push(cache.gic(a, classes)?);
            Ok(())
        },
    )?;
    let total = gics.len();
    // Enumeration order is canonical order, so it breaks ties.
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&i, &j| gics[i].total_cmp(&gics[j]).then(i.cmp(&j)));
    let min_gic = order.first().map_or(f64::NAN, |&i| gics[i]);
    let near = |g: f64| g - min_gic <= options.window;
    let near_optimal_count = gics.iter().filter(|&&g| near(g)).count();

    let mut rank_of = BTreeMap::new();
    for (r, &i) in order.iter().enumerate() {
        if r < top || r + last >= total {
            rank_of.insert(i, r);
        }
    }
    let mut entries = Vec::with_capacity(rank_of.len() + 1);
    let mut index = 0usize;
    for_each_model(
        table,
        options.strategy,
        options.min_subclass_patients,
        options.limits,
        |a, classes| {
            let rank = match rank_of.get(&index) {
                Some(&r) => Some(r),
                None if classes == 1 => order.iter().position(|&i| i == index),
                None => None,
            };
            if let Some(r) = rank {
                let mut result = cache.result(a, classes)?;
                result
                    .subclasses
                    .sort_by(|x, y| x.estimate.point.total_cmp(&y.estimate.point));
                entries.push(RankedModel {
                    rank: r + 1,
                    near_optimal: near(result.gic),
                    result,
                });
            }
            index += 1;
            Ok(())
        },
    )?;
    entries.sort_by_key(|e| e.rank);
    Ok(RankingSummary {
        strategy: options.strategy,
        total_models: total,
        min_gic,
        near_optimal_window: options.window,
        near_optimal_count,
        entries,
    })
}
