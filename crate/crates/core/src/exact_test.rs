//! Conditional exact test of the global null `pi_k = pi0_k` for every basket.
//!
//! The statistic is the weighted responder sum `T_w = sum w_k y_k`. Under the
//! null it is a weighted sum of independent binomials; its law is obtained
//! either exactly, by convolving the basket pmfs on a common integer lattice,
//! or by Monte Carlo.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{binomial, substream};
use crate::special::binomial_pmf;
use crate::table::BasketTable;

/// How a null distribution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "method", rename_all = "kebab-case"))]
pub enum NullMethod {
    Exact,
    MonteCarlo { reps: u64, seed: u64 },
}

/// Settings for the exact lattice convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactConfig {
    /// Largest number of lattice points the convolution may allocate.
    pub lattice_limit: u64,
    /// Largest denominator accepted when reading a weight as a fraction.
    pub max_denominator: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            lattice_limit: 1_000_000,
            max_denominator: 10_000,
        }
    }
}

/// Requested construction of the null law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Exact(ExactConfig),
    MonteCarlo { reps: u64, seed: u64 },
}

/// Law of `T_w` under the global null.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    support: Vec<f64>,
    pmf: Vec<f64>,
    /// `upper_tail[i] = P(T >= support[i])`, summed from the top.
    upper_tail: Vec<f64>,
    /// Monte Carlo hit counts per support point (empty for exact laws).
    counts: Vec<u64>,
    method: NullMethod,
}

impl NullDistribution {
    fn from_parts(support: Vec<f64>, pmf: Vec<f64>, counts: Vec<u64>, method: NullMethod) -> Self {
        let mut upper_tail = vec![0.0; pmf.len()];
        let mut acc = 0.0;
        for i in (0..pmf.len()).rev() {
            acc += pmf[i];
            upper_tail[i] = acc;
        }
        NullDistribution {
            support,
            pmf,
            upper_tail,
            counts,
            method,
        }
    }

    /// Empirical law from simulated statistics. Values equal up to rounding
    /// share a support point.
    pub fn from_draws(mut draws: Vec<f64>, seed: u64) -> NullDistribution {
        let reps = draws.len() as u64;
        draws.sort_by(f64::total_cmp);
        let mut support: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for d in draws {
            match support.last() {
                Some(&last) if same_point(last, d) => *counts.last_mut().unwrap() += 1,
                _ => {
                    support.push(d);
                    counts.push(1);
                }
            }
        }
        let pmf = counts.iter().map(|&c| c as f64 / reps as f64).collect();
        NullDistribution::from_parts(support, pmf, counts, NullMethod::MonteCarlo { reps, seed })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn method(&self) -> NullMethod {
        self.method
    }

    /// Index of the first support point counted as `>= t`.
    fn first_at_or_above(&self, t: f64) -> usize {
        let tol = tolerance(t);
        self.support.partition_point(|&s| s < t - tol)
    }
}

fn tolerance(t: f64) -> f64 {
    1e-9 * libm::fabs(t).max(1.0)
}

fn same_point(a: f64, b: f64) -> bool {
    libm::fabs(a - b) <= 1e-12 * libm::fabs(a).max(libm::fabs(b)).max(1.0)
}

/// `T_w = sum w_k y_k`.
pub fn statistic(table: &BasketTable, weights: &[f64]) -> Result<f64> {
    check_weights(table, weights)?;
    Ok(table
        .iter()
        .zip(weights)
        .map(|(b, w)| w * b.responders as f64)
        .sum())
}

fn check_weights(table: &BasketTable, weights: &[f64]) -> Result<()> {
    if weights.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(alloc::format!(
            "test weight {w} must be positive and finite"
        )));
    }
    Ok(())
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Best rational approximation `p/q` with `q <= max_den`, accepted only if
/// it reproduces `x` to near machine precision.
fn as_fraction(x: f64, max_den: u64) -> Option<(u128, u128)> {
    let (mut h0, mut h1) = (0u128, 1u128);
    let (mut k0, mut k1) = (1u128, 0u128);
    let mut r = x;
    for _ in 0..64 {
        let a = libm::floor(r);
        if a > 1e18 {
            break;
        }
        let ai = a as u128;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den as u128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        if libm::fabs(approx - x) <= 1e-12 * x {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Integer lattice weights and the value of one lattice step.
fn lattice(table: &BasketTable, weights: &[f64], config: ExactConfig) -> Result<(Vec<u128>, f64)> {
    let overflow = |needed: u128| Error::LatticeOverflow {
        needed,
        limit: config.lattice_limit,
    };
    let mut fracs = Vec::with_capacity(weights.len());
    for &w in weights {
        fracs.push(as_fraction(w, config.max_denominator).ok_or(overflow(u128::MAX))?);
    }
    let mut lcm: u128 = 1;
    for &(_, q) in &fracs {
        lcm = (lcm / gcd(lcm, q))
            .checked_mul(q)
            .ok_or(overflow(u128::MAX))?;
    }
    let mut ints: Vec<u128> = Vec::with_capacity(fracs.len());
    for &(p, q) in &fracs {
        ints.push(p.checked_mul(lcm / q).ok_or(overflow(u128::MAX))?);
    }
    let g = ints.iter().fold(0u128, |acc, &v| gcd(acc, v));
    for v in &mut ints {
        *v /= g;
    }
    let mut needed: u128 = 1;
    for (b, &w) in table.iter().zip(&ints) {
        needed = w
            .checked_mul(b.patients as u128)
            .and_then(|x| x.checked_add(needed))
            .ok_or(overflow(u128::MAX))?;
    }
    if needed > config.lattice_limit as u128 {
        return Err(overflow(needed));
    }
    Ok((ints, g as f64 / lcm as f64))
}

/// Exact null law by dynamic-programming convolution of the basket pmfs.
pub fn null_distribution_exact(
    table: &BasketTable,
    weights: &[f64],
    config: ExactConfig,
) -> Result<NullDistribution> {
    check_weights(table, weights)?;
    let (steps, unit) = lattice(table, weights, config)?;
    let mut mass = vec![1.0f64];
    let mut reachable = vec![true];
    for (b, &step) in table.iter().zip(&steps) {
        let step = step as usize;
        let n = b.patients as usize;
        let pmf = binomial_pmf(b.patients, b.null_rate);
        let len = mass.len() + step * n;
        let mut next_mass = vec![0.0f64; len];
        let mut next_reach = vec![false; len];
        for (j, (&m, &r)) in mass.iter().zip(&reachable).enumerate() {
            if !r {
                continue;
            }
            for (y, &p) in pmf.iter().enumerate() {
                let idx = j + step * y;
                next_mass[idx] += m * p;
                next_reach[idx] = true;
            }
        }
        mass = next_mass;
        reachable = next_reach;
    }
    let mut support = Vec::new();
    let mut pmf = Vec::new();
    for (j, (&m, &r)) in mass.iter().zip(&reachable).enumerate() {
        if r {
            support.push(j as f64 * unit);
            pmf.push(m);
        }
    }
    Ok(NullDistribution::from_parts(
        support,
        pmf,
        Vec::new(),
        NullMethod::Exact,
    ))
}

/// One simulated null statistic from replicate `index` of stream `seed`.
pub fn mc_draw(table: &BasketTable, weights: &[f64], seed: u64, index: u64) -> f64 {
    let mut rng = substream(seed, index);
    table
        .iter()
        .zip(weights)
        .map(|(b, w)| w * binomial(&mut rng, b.patients, b.null_rate) as f64)
        .sum()
}

/// Empirical null law from `reps` simulated statistics.
pub fn null_distribution_mc(
    table: &BasketTable,
    weights: &[f64],
    reps: u64,
    seed: u64,
) -> Result<NullDistribution> {
    check_weights(table, weights)?;
    if reps == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs reps > 0".into()));
    }
    let draws = (0..reps)
        .map(|i| mc_draw(table, weights, seed, i))
        .collect();
    Ok(NullDistribution::from_draws(draws, seed))
}

pub fn null_distribution(
    table: &BasketTable,
    weights: &[f64],
    method: TestMethod,
) -> Result<NullDistribution> {
    match method {
        TestMethod::Exact(config) => null_distribution_exact(table, weights, config),
        TestMethod::MonteCarlo { reps, seed } => null_distribution_mc(table, weights, reps, seed),
    }
}

/// Upper one-tailed p-value `P(T_w >= t_obs)`, observed point included.
/// For Monte Carlo laws this is the plain proportion of draws `>= t_obs`.
pub fn p_value(dist: &NullDistribution, t_obs: f64) -> f64 {
    let i = dist.first_at_or_above(t_obs);
    if i == 0 {
        return 1.0;
    }
    match dist.method {
        NullMethod::Exact => dist.upper_tail.get(i).copied().unwrap_or(0.0).min(1.0),
        NullMethod::MonteCarlo { reps, .. } => {
            let hits: u64 = dist.counts[i..].iter().sum();
            hits as f64 / reps as f64
        }
    }
}

/// Add-one Monte Carlo p-value `(hits + 1) / (reps + 1)`, which is valid at
/// every level. Identical to [`p_value`] for exact laws.
pub fn p_value_add_one(dist: &NullDistribution, t_obs: f64) -> f64 {
    match dist.method {
        NullMethod::Exact => p_value(dist, t_obs),
        NullMethod::MonteCarlo { reps, .. } => {
            let i = dist.first_at_or_above(t_obs);
            let hits: u64 = dist.counts[i..].iter().sum();
            (hits + 1) as f64 / (reps + 1) as f64
        }
    }
}

/// Observed statistic with its p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExactTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: NullMethod,
}

impl ExactTestResult {
    /// Rejection at one-sided level `alpha` (`p <= alpha`).
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

pub fn exact_test(
    table: &BasketTable,
    weights: &[f64],
    method: TestMethod,
) -> Result<ExactTestResult> {
    let t = statistic(table, weights)?;
    let dist = null_distribution(table, weights, method)?;
    Ok(ExactTestResult {
        statistic: t,
        p_value: p_value(&dist, t),
        method: dist.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Basket;

    fn table(rows: &[(u64, u64, f64)]) -> BasketTable {
        BasketTable::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(y, n, p))| Basket::new(alloc::format!("b{i}"), y, n, p))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_fair_basket() {
        let t = table(&[(1, 2, 0.5)]);
        let d = null_distribution_exact(&t, &[1.0], ExactConfig::default()).unwrap();
        assert_eq!(d.support(), &[0.0, 1.0, 2.0]);
        for (a, b) in d.pmf().iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p_value(&d, 0.0), 1.0);
        assert!((p_value(&d, 1.0) - 0.75).abs() < 1e-15);
        assert!((p_value(&d, 2.0) - 0.25).abs() < 1e-15);
        assert_eq!(p_value(&d, 2.5), 0.0);
    }

    #[test]
    fn statistic_sums_weighted_responders() {
        let t = table(&[(2, 7, 0.15), (6, 14, 0.15), (0, 3, 0.2)]);
        assert_eq!(statistic(&t, &[1.0, 1.0, 1.0]).unwrap(), 8.0);
        let z = table(&[(0, 7, 0.15), (0, 4, 0.3)]);
        assert_eq!(statistic(&z, &[2.0, 5.0]).unwrap(), 0.0);
        assert!(statistic(&t, &[1.0]).is_err());
        assert!(statistic(&t, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn fractions_from_inverse_null_rates() {
        assert_eq!(as_fraction(1.0 / 0.15, 10_000), Some((20, 3)));
        assert_eq!(as_fraction(1.0 / 0.35, 10_000), Some((20, 7)));
        assert_eq!(as_fraction(4.0, 10_000), Some((4, 1)));
        assert_eq!(as_fraction(core::f64::consts::PI, 10_000), None);
    }

    #[test]
    fn mixed_weights_use_common_lattice() {
        // w = (1/0.3, 1/0.25) = (10/3, 4): lattice steps 5 and 6 of 2/3.
        let t = table(&[(1, 2, 0.3), (0, 1, 0.25)]);
        let w = [1.0 / 0.3, 1.0 / 0.25];
        let d = null_distribution_exact(&t, &w, ExactConfig::default()).unwrap();
        let expect = [0.0, 10.0 / 3.0, 4.0, 20.0 / 3.0, 22.0 / 3.0, 32.0 / 3.0];
        assert_eq!(d.support().len(), expect.len());
        for (a, b) in d.support().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let s: f64 = d.pmf().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn irrational_weights_overflow() {
        let t = table(&[(1, 5, 0.3)]);
        let err = null_distribution_exact(&t, &[core::f64::consts::E], ExactConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::LatticeOverflow { .. }));
        let tiny = ExactConfig {
            lattice_limit: 5,
            ..ExactConfig::default()
        };
        assert!(matches!(
            null_distribution_exact(&t, &[1.0], tiny),
            Err(Error::LatticeOverflow { needed: 6, .. })
        ));
    }

    #[test]
    fn monte_carlo_counts() {
        let t = table(&[(1, 4, 0.3), (2, 6, 0.2)]);
        let d = null_distribution_mc(&t, &[1.0, 1.0], 500, 11).unwrap();
        let s: f64 = d.pmf().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(p_value(&d, 0.0), 1.0);
        let p = p_value(&d, 3.0);
        let p1 = p_value_add_one(&d, 3.0);
        assert!((p1 - (p * 500.0 + 1.0) / 501.0).abs() < 1e-12);
        assert_eq!(d, null_distribution_mc(&t, &[1.0, 1.0], 500, 11).unwrap());
        assert!(null_distribution_mc(&t, &[1.0, 1.0], 0, 11).is_err());
    }
}
