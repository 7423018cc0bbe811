//! The noise semigroup `U_t`, its generator, Bernoulli measures on the
//! subset lattice, and Monte-Carlo resampling estimates of sensitivity.
//!
//! `U_t` damps the level-`n` part of a random variable by `e^{-nt}`. The
//! same operator arises by averaging the projections `E_A` over a random
//! subset `A` that keeps each atom independently with probability
//! `p = e^{-t}`; [`noise_operator`] computes the spectral form and
//! [`noise_operator_averaged`] the subset-enumeration form, kept as a
//! cross-check oracle for small `m`.
//!
//! Time `t` is the canonical parameter throughout; the retention
//! probability `p = e^{-t}` is derived where needed.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
// Resolves float math through libm in no_std builds; redundant when the
// graph links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::efron_stein::{cond_expect, level_decomposition, level_weights};
use crate::rng::{CounterRng, SubStream};
use crate::space::{RandomVariable, SubsetIndex};
use crate::Error;

/// Mass sums of a subset measure must match 1 within this tolerance.
pub const MEASURE_SUM_TOL: f64 = 1e-12;

/// Largest `m` for which full `2^m` subset enumerations are permitted
/// (the averaging oracle and Bernoulli measure materialization).
pub const MAX_ENUM_FACTORS: usize = 12;

fn check_time(t: f64) -> Result<(), Error> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime { t })
    }
}

fn check_prob(p: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange {
            name: "p",
            value: p,
        })
    }
}

/// Bernoulli subset mass `p^{|A|} (1-p)^{m-|A|}`.
pub fn bernoulli_mass(a: SubsetIndex, p: f64, m: usize) -> Result<f64, Error> {
    check_prob(p)?;
    if !a.is_subset_of(SubsetIndex::full(m)) {
        return Err(Error::SubsetOutOfRange {
            bits: a.bits(),
            factors: m,
        });
    }
    let n = a.count() as i32;
    Ok(p.powi(n) * (1.0 - p).powi(m as i32 - n))
}

/// Draw a subset of `{0..m-1}` including each atom independently with
/// probability `p`.
pub fn sample_bernoulli(p: f64, m: usize, rng: &mut CounterRng) -> Result<SubsetIndex, Error> {
    check_prob(p)?;
    let mut bits = 0u64;
    for k in 0..m {
        if rng.next_f64() < p {
            bits |= 1u64 << k;
        }
    }
    Ok(SubsetIndex::from_bits(bits))
}

/// A finitely supported probability measure on subsets of `m` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMeasure {
    atoms: usize,
    support: BTreeMap<SubsetIndex, f64>,
}

impl SubsetMeasure {
    /// Validate weights: nonnegative, summing to 1 within
    /// [`MEASURE_SUM_TOL`], every subset within `{0..m-1}`.
    pub fn new(atoms: usize, support: BTreeMap<SubsetIndex, f64>) -> Result<Self, Error> {
        if atoms == 0 {
            return Err(Error::InvalidMeasure {
                reason: String::from("measure needs at least one atom"),
            });
        }
        let full = SubsetIndex::full(atoms);
        let mut sum = 0.0;
        for (&a, &w) in &support {
            if !a.is_subset_of(full) {
                return Err(Error::SubsetOutOfRange {
                    bits: a.bits(),
                    factors: atoms,
                });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure {
                    reason: alloc::format!("weight {w} at subset {:#x} is negative", a.bits()),
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MEASURE_SUM_TOL {
            return Err(Error::InvalidMeasure {
                reason: alloc::format!("weights sum to {sum}, not 1"),
            });
        }
        Ok(SubsetMeasure { atoms, support })
    }

    /// Point mass on a single subset.
    pub fn dirac(a: SubsetIndex, atoms: usize) -> Result<Self, Error> {
        let mut support = BTreeMap::new();
        support.insert(a, 1.0);
        Self::new(atoms, support)
    }

    /// The full Bernoulli measure, materialized over all `2^m` subsets
    /// (only for `m <=` [`MAX_ENUM_FACTORS`]).
    pub fn bernoulli(p: f64, atoms: usize) -> Result<Self, Error> {
        check_prob(p)?;
        if atoms > MAX_ENUM_FACTORS {
            return Err(Error::SubsetEnumerationTooLarge {
                factors: atoms,
                max: MAX_ENUM_FACTORS,
            });
        }
        let mut support = BTreeMap::new();
        for a in SubsetIndex::all(atoms) {
            let w = bernoulli_mass(a, p, atoms)?;
            if w > 0.0 {
                support.insert(a, w);
            }
        }
        Self::new(atoms, support)
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn mass(&self, a: SubsetIndex) -> f64 {
        self.support.get(&a).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (SubsetIndex, f64)> + '_ {
        self.support.iter().map(|(&a, &w)| (a, w))
    }

    /// `mu({A : A contains b})`.
    pub fn superset_mass(&self, b: SubsetIndex) -> f64 {
        self.support()
            .filter(|(a, _)| b.is_subset_of(*a))
            .map(|(_, w)| w)
            .sum()
    }

    fn check_atoms(&self, m: usize) -> Result<(), Error> {
        if self.atoms == m {
            Ok(())
        } else {
            Err(Error::MeasureSizeMismatch {
                expected: m,
                got: self.atoms,
            })
        }
    }
}

/// Pushforward of `mu1 x mu2` under subset intersection.
pub fn intersect_distribution(
    mu1: &SubsetMeasure,
    mu2: &SubsetMeasure,
) -> Result<SubsetMeasure, Error> {
    mu1.check_atoms(mu2.atoms())?;
    let mut support: BTreeMap<SubsetIndex, f64> = BTreeMap::new();
    for (a, wa) in mu1.support() {
        for (b, wb) in mu2.support() {
            *support.entry(a.intersect(b)).or_insert(0.0) += wa * wb;
        }
    }
    SubsetMeasure::new(mu1.atoms(), support)
}

/// The noise operator `U_t X`, computed spectrally:
/// `U_t X = sum_n e^{-nt} P_n X`.
pub fn noise_operator(x: &RandomVariable, t: f64) -> Result<RandomVariable, Error> {
    check_time(t)?;
    let levels = level_decomposition(x)?;
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for (n, level) in levels.iter().enumerate() {
        let damp = (-(n as f64) * t).exp();
        acc = acc.add(&level.scale(Complex64::new(damp, 0.0)))?;
    }
    Ok(acc)
}

/// The noise operator by direct subset averaging:
/// `U_t X = sum_A mu_p(A) E_A X` with `p = e^{-t}`.
///
/// Costs `2^m` conditional expectations; kept as an independent oracle for
/// the spectral path and refused for `m >` [`MAX_ENUM_FACTORS`].
pub fn noise_operator_averaged(x: &RandomVariable, t: f64) -> Result<RandomVariable, Error> {
    check_time(t)?;
    let m = x.space().factor_count();
    if m > MAX_ENUM_FACTORS {
        return Err(Error::SubsetEnumerationTooLarge {
            factors: m,
            max: MAX_ENUM_FACTORS,
        });
    }
    let p = (-t).exp();
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for a in SubsetIndex::all(m) {
        let mass = bernoulli_mass(a, p, m)?;
        if mass > 0.0 {
            acc = acc.add(&cond_expect(x, a)?.scale(Complex64::new(mass, 0.0)))?;
        }
    }
    Ok(acc)
}

/// The generator `N`: `N X = sum_k (X - M_k X)`, which multiplies the
/// level-`n` part by `n`; `U_t = exp(-tN)`.
pub fn generator_apply(x: &RandomVariable) -> Result<RandomVariable, Error> {
    let m = x.space().factor_count();
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for k in 0..m {
        acc = acc.add(&x.sub(&x.marginal_average(k)?)?)?;
    }
    Ok(acc)
}

/// The mu-averaged operator `U_mu X = sum_A mu(A) E_A X`.
///
/// Acts on each `H_B` as multiplication by `mu({A : A contains B})`.
pub fn generalized_noise(x: &RandomVariable, mu: &SubsetMeasure) -> Result<RandomVariable, Error> {
    mu.check_atoms(x.space().factor_count())?;
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for (a, w) in mu.support() {
        if w > 0.0 {
            acc = acc.add(&cond_expect(x, a)?.scale(Complex64::new(w, 0.0)))?;
        }
    }
    Ok(acc)
}

/// The bound parameter of the mu-averaged operator:
/// `p = max_k mu({A : k in A})`, the supremum over nonempty `B` of the
/// superset mass, attained at singletons.
///
/// Satisfies `<U_mu X, X> <= (1-p) |E X|^2 + p norm(X)^2`.
pub fn mu_sup_p(mu: &SubsetMeasure) -> f64 {
    (0..mu.atoms())
        .map(|k| mu.superset_mass(SubsetIndex::singleton(k)))
        .fold(0.0, f64::max)
}

/// State of the subset Markov process at time `t`: every atom carries an
/// independent rate-1 exponential clock and is dropped when it rings, so
/// the marginal law at time `t` is Bernoulli(`e^{-t}`). Atom `k` of draw
/// `i` consumes the stream value at index `i*m + k` supplied by `rng`.
pub fn simulate_subset_process(
    m: usize,
    t: f64,
    rng: &mut CounterRng,
) -> Result<SubsetIndex, Error> {
    check_time(t)?;
    let mut bits = 0u64;
    for k in 0..m {
        let u = rng.next_f64();
        let clock = -(-u).ln_1p(); // -ln(1 - u), an Exp(1) ring time
        if clock >= t {
            bits |= 1u64 << k;
        }
    }
    Ok(SubsetIndex::from_bits(bits))
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte-Carlo estimate of the noise quadratic form `<(I - U_t) X, X>` via
/// independent resampling: draw an outcome tuple `Y`, an independent copy
/// `Z`, and a Bernoulli(`e^{-t}`) retention set `A`; form `Y'` by keeping
/// the coordinates in `A` and replacing the rest from `Z`; average
/// `|X(Y) - X(Y')|^2 / 2`.
///
/// Draws are indexed, not sequential: sample `i`, factor `k` uses index
/// `i*m + k` of the `YDraws`, `ZDraws`, and `ADraws` sub-streams of `seed`,
/// so the estimate does not depend on how samples are batched.
pub fn mc_noise_form(
    x: &RandomVariable,
    t: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, Error> {
    check_time(t)?;
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let space = x.space();
    let m = space.factor_count();
    let p = (-t).exp();

    // Per-factor cumulative distribution tables for inverse-CDF sampling.
    let cumulative: Vec<Vec<f64>> = space
        .factors()
        .iter()
        .map(|f| {
            let mut acc = 0.0;
            f.probs
                .iter()
                .map(|&q| {
                    acc += q;
                    acc
                })
                .collect()
        })
        .collect();
    let sample_outcome = |factor: usize, u: f64| -> usize {
        let cum = &cumulative[factor];
        cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
    };

    let y_stream = CounterRng::new(seed, SubStream::YDraws);
    let z_stream = CounterRng::new(seed, SubStream::ZDraws);
    let a_stream = CounterRng::new(seed, SubStream::ADraws);

    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..n_samples {
        let mut idx_y = 0usize;
        let mut idx_res = 0usize;
        for k in 0..m {
            let draw = i * m as u64 + k as u64;
            let y_coord = sample_outcome(k, y_stream.f64_at(draw));
            let kept = a_stream.f64_at(draw) < p;
            let res_coord = if kept {
                y_coord
            } else {
                sample_outcome(k, z_stream.f64_at(draw))
            };
            let stride = space.stride(k);
            idx_y += y_coord * stride;
            idx_res += res_coord * stride;
        }
        let diff = x.values()[idx_y] - x.values()[idx_res];
        let v = 0.5 * diff.norm_sqr();
        // Welford update.
        let count = (i + 1) as f64;
        let delta = v - mean;
        mean += delta / count;
        m2 += delta * (v - mean);
    }
    let std_error = if n_samples > 1 {
        (m2 / (n_samples - 1) as f64 / n_samples as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        std_error,
        samples: n_samples,
    })
}

/// Exact noise quadratic form `<(I - U_t) X, X> = sum_n (1 - e^{-nt}) w_n`
/// from the level weights `w`.
pub fn noise_quad_form(x: &RandomVariable, t: f64) -> Result<f64, Error> {
    check_time(t)?;
    let weights = level_weights(x)?;
    Ok(quad_form_from_weights(&weights, t))
}

fn quad_form_from_weights(weights: &[f64], t: f64) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(n, &w)| (1.0 - (-(n as f64) * t).exp()) * w)
        .sum()
}

/// The three sensitivity functionals evaluated on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCurve {
    pub t_grid: Vec<f64>,
    /// `norm(X - U_t X)`.
    pub dist: Vec<f64>,
    /// `norm(X) - norm(U_t X)`.
    pub norm_drop: Vec<f64>,
    /// `<(I - U_t) X, X>`.
    pub quad_form: Vec<f64>,
}

/// Evaluate the three noise-sensitivity functionals exactly via the level
/// weights. The grid must be sorted ascending and nonnegative.
pub fn sensitivity_curves(x: &RandomVariable, t_grid: &[f64]) -> Result<NoiseCurve, Error> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::UnsortedGrid);
    }
    let weights = level_weights(x)?;
    let norm_x = weights.iter().sum::<f64>().sqrt();
    let mut dist = Vec::with_capacity(t_grid.len());
    let mut norm_drop = Vec::with_capacity(t_grid.len());
    let mut quad_form = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut d2 = 0.0;
        let mut u2 = 0.0;
        for (n, &w) in weights.iter().enumerate() {
            let e = (-(n as f64) * t).exp();
            d2 += (1.0 - e) * (1.0 - e) * w;
            u2 += e * e * w;
        }
        dist.push(d2.sqrt());
        norm_drop.push(norm_x - u2.sqrt());
        quad_form.push(quad_form_from_weights(&weights, t));
    }
    Ok(NoiseCurve {
        t_grid: t_grid.to_vec(),
        dist,
        norm_drop,
        quad_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FactorSpace, ProductSpace};
    use crate::DEFAULT_TOL;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sign(coord: usize) -> f64 {
        if coord == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn coins(m: usize) -> Arc<ProductSpace> {
        ProductSpace::build((0..m).map(|_| FactorSpace::fair_sign()).collect()).unwrap()
    }

    fn w(space: &Arc<ProductSpace>, k: usize) -> RandomVariable {
        RandomVariable::from_fn(Arc::clone(space), move |coords| c(sign(coords[k])))
    }

    #[test]
    fn bernoulli_mass_values() {
        let a = SubsetIndex::from_indices([0, 2]);
        assert!((bernoulli_mass(a, 0.5, 3).unwrap() - 0.125).abs() < 1e-15);
        assert!((bernoulli_mass(a, 0.9, 3).unwrap() - 0.081).abs() < 1e-15);
        assert_eq!(bernoulli_mass(SubsetIndex::full(3), 1.0, 3).unwrap(), 1.0);
        assert_eq!(bernoulli_mass(a, 1.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn bernoulli_masses_sum_to_one() {
        let total: f64 = SubsetIndex::all(5)
            .map(|a| bernoulli_mass(a, 0.3, 5).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_mass_rejects_bad_p() {
        assert!(matches!(
            bernoulli_mass(SubsetIndex::EMPTY, 1.5, 2),
            Err(Error::ParamOutOfRange { .. })
        ));
    }

    #[test]
    fn sampling_degenerate_probabilities() {
        let mut rng = CounterRng::new(1, SubStream::ADraws);
        for _ in 0..50 {
            assert!(sample_bernoulli(0.0, 6, &mut rng).unwrap().is_empty());
            assert_eq!(
                sample_bernoulli(1.0, 6, &mut rng).unwrap(),
                SubsetIndex::full(6)
            );
        }
    }

    #[test]
    fn sampling_frequency_matches_p() {
        let m = 8;
        let draws = 100_000;
        let mut rng = CounterRng::new(42, SubStream::ADraws);
        let mut counts = [0u64; 8];
        for _ in 0..draws {
            let a = sample_bernoulli(0.5, m, &mut rng).unwrap();
            for (k, count) in counts.iter_mut().enumerate() {
                if a.contains(k) {
                    *count += 1;
                }
            }
        }
        for &count in &counts {
            let freq = count as f64 / draws as f64;
            assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn intersection_of_half_half_on_one_atom() {
        let mu = SubsetMeasure::bernoulli(0.5, 1).unwrap();
        let conv = intersect_distribution(&mu, &mu).unwrap();
        assert!((conv.mass(SubsetIndex::singleton(0)) - 0.25).abs() < 1e-15);
        assert!((conv.mass(SubsetIndex::EMPTY) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn full_set_dirac_is_convolution_unit() {
        let mu = SubsetMeasure::bernoulli(0.37, 4).unwrap();
        let unit = SubsetMeasure::dirac(SubsetIndex::full(4), 4).unwrap();
        let conv = intersect_distribution(&unit, &mu).unwrap();
        for a in SubsetIndex::all(4) {
            assert!((conv.mass(a) - mu.mass(a)).abs() < 1e-15);
        }
    }

    #[test]
    fn convolution_identity_small() {
        let m = 4;
        let mu1 = SubsetMeasure::bernoulli(0.3, m).unwrap();
        let mu2 = SubsetMeasure::bernoulli(0.7, m).unwrap();
        let conv = intersect_distribution(&mu1, &mu2).unwrap();
        let expected = SubsetMeasure::bernoulli(0.21, m).unwrap();
        for a in SubsetIndex::all(m) {
            assert!((conv.mass(a) - expected.mass(a)).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_at_zero_time_is_identity() {
        let space = coins(3);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            Complex64::new(sign(co[0]) + sign(co[1]) * sign(co[2]), 0.5 * sign(co[2]))
        });
        let u0 = noise_operator(&x, 0.0).unwrap();
        assert!(u0.max_abs_diff(&x).unwrap() < 1e-13);
    }

    #[test]
    fn noise_rejects_negative_time() {
        let space = coins(1);
        let x = w(&space, 0);
        assert!(matches!(
            noise_operator(&x, -0.1),
            Err(Error::NegativeTime { .. })
        ));
    }

    #[test]
    fn h1_elements_contract_by_single_factor() {
        let space = coins(3);
        let x = w(&space, 0).add(&w(&space, 1).scale(c(2.0))).unwrap();
        let t = 0.7;
        let u = noise_operator(&x, t).unwrap();
        let expected = x.scale(c((-t).exp()));
        assert!(u.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn centered_full_product_contracts_by_m_factors() {
        let m = 4;
        let space = coins(m);
        let mut x = w(&space, 0);
        for k in 1..m {
            x = x.mul_pointwise(&w(&space, k)).unwrap();
        }
        let t = 0.3;
        let u = noise_operator(&x, t).unwrap();
        let expected = x.scale(c((-(m as f64) * t).exp()));
        assert!(u.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn spectral_and_averaged_paths_agree() {
        use crate::rng::{CounterRng, SubStream};
        let space = ProductSpace::build(vec![
            FactorSpace::fair_sign(),
            FactorSpace::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec![0.2, 0.5, 0.3],
            ),
            FactorSpace::new(vec!["x".into(), "y".into()], vec![0.8, 0.2]),
        ])
        .unwrap();
        let mut rng = CounterRng::new(23, SubStream::General);
        let x = RandomVariable::from_fn(Arc::clone(&space), |_| {
            Complex64::new(rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
        });
        for t in [0.0, 0.4, 1.3] {
            let spectral = noise_operator(&x, t).unwrap();
            let averaged = noise_operator_averaged(&x, t).unwrap();
            assert!(spectral.l2_distance(&averaged).unwrap() < DEFAULT_TOL);
        }
    }

    #[test]
    fn generator_kills_constants() {
        let space = coins(3);
        let x = RandomVariable::constant(space, Complex64::new(4.0, -2.0));
        assert!(generator_apply(&x).unwrap().norm() < 1e-12);
    }

    #[test]
    fn generator_counts_level_two() {
        let space = coins(2);
        let x = w(&space, 0).mul_pointwise(&w(&space, 1)).unwrap();
        let n = generator_apply(&x).unwrap();
        assert!(n.max_abs_diff(&x.scale(c(2.0))).unwrap() < 1e-12);
    }

    #[test]
    fn generator_adds_over_disjoint_blocks() {
        // N(XY) = (NX)Y + X(NY) for X on factors {0,1}, Y on factor {2}.
        let space = coins(3);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            c(sign(co[0]) * sign(co[1]) + 0.5 * sign(co[0]))
        });
        let y = RandomVariable::from_fn(Arc::clone(&space), |co| c(sign(co[2]) + 2.0));
        let xy = x.mul_pointwise(&y).unwrap();
        let lhs = generator_apply(&xy).unwrap();
        let rhs = generator_apply(&x)
            .unwrap()
            .mul_pointwise(&y)
            .unwrap()
            .add(&x.mul_pointwise(&generator_apply(&y).unwrap()).unwrap())
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn dirac_average_is_conditional_expectation() {
        let space = coins(3);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            c(sign(co[0]) + sign(co[1]) * sign(co[2]))
        });
        let a0 = SubsetIndex::from_indices([0, 2]);
        let mu = SubsetMeasure::dirac(a0, 3).unwrap();
        let lhs = generalized_noise(&x, &mu).unwrap();
        let rhs = cond_expect(&x, a0).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-14);
    }

    #[test]
    fn half_empty_half_full_mixes_mean_and_identity() {
        let space = coins(2);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| c(sign(co[0]) + 3.0));
        let mut support = BTreeMap::new();
        support.insert(SubsetIndex::EMPTY, 0.5);
        support.insert(SubsetIndex::full(2), 0.5);
        let mu = SubsetMeasure::new(2, support).unwrap();
        let lhs = generalized_noise(&x, &mu).unwrap();
        let mean = RandomVariable::constant(Arc::clone(&space), x.expectation());
        let rhs = mean.scale(c(0.5)).add(&x.scale(c(0.5))).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn bernoulli_average_reproduces_noise_operator() {
        let space = coins(4);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            c(sign(co[0]) * sign(co[3]) + sign(co[1]) - 0.25 * sign(co[2]))
        });
        let t = 0.9;
        let mu = SubsetMeasure::bernoulli((-t).exp(), 4).unwrap();
        let via_mu = generalized_noise(&x, &mu).unwrap();
        let direct = noise_operator(&x, t).unwrap();
        assert!(via_mu.l2_distance(&direct).unwrap() < DEFAULT_TOL);
    }

    #[test]
    fn sup_p_of_diracs() {
        assert_eq!(
            mu_sup_p(&SubsetMeasure::dirac(SubsetIndex::full(3), 3).unwrap()),
            1.0
        );
        assert_eq!(
            mu_sup_p(&SubsetMeasure::dirac(SubsetIndex::EMPTY, 3).unwrap()),
            0.0
        );
    }

    #[test]
    fn sup_p_bound_for_even_mixture() {
        use crate::rng::{CounterRng, SubStream};
        let mut support = BTreeMap::new();
        support.insert(SubsetIndex::EMPTY, 0.5);
        support.insert(SubsetIndex::full(2), 0.5);
        let mu = SubsetMeasure::new(2, support).unwrap();
        let p = mu_sup_p(&mu);
        assert!((p - 0.5).abs() < 1e-15);

        let space = coins(2);
        let mut rng = CounterRng::new(7, SubStream::General);
        for _ in 0..20 {
            let x = RandomVariable::from_fn(Arc::clone(&space), |_| {
                Complex64::new(rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
            });
            let quad = generalized_noise(&x, &mu).unwrap().inner(&x).unwrap().re;
            let mean = x.expectation().norm_sqr();
            let norm2 = x.norm() * x.norm();
            assert!(quad <= (1.0 - p) * mean + p * norm2 + 1e-10);
        }
    }

    #[test]
    fn subset_process_starts_full_and_dies() {
        let mut rng = CounterRng::new(9, SubStream::Clocks);
        for _ in 0..50 {
            assert_eq!(
                simulate_subset_process(6, 0.0, &mut rng).unwrap(),
                SubsetIndex::full(6)
            );
        }
        for _ in 0..50 {
            assert!(simulate_subset_process(6, 40.0, &mut rng)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn subset_process_survival_frequency() {
        let m = 6;
        let t = 0.5;
        let runs = 100_000;
        let mut rng = CounterRng::new(4242, SubStream::Clocks);
        let mut counts = [0u64; 6];
        for _ in 0..runs {
            let a = simulate_subset_process(m, t, &mut rng).unwrap();
            for (k, count) in counts.iter_mut().enumerate() {
                if a.contains(k) {
                    *count += 1;
                }
            }
        }
        let expected = (-t).exp();
        for &count in &counts {
            let freq = count as f64 / runs as f64;
            assert!((freq - expected).abs() < 0.01, "freq {freq} vs {expected}");
        }
    }

    #[test]
    fn mc_on_constant_is_exactly_zero() {
        let space = coins(2);
        let x = RandomVariable::constant(space, c(5.0));
        let est = mc_noise_form(&x, 0.8, 1000, 7).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn mc_matches_h1_closed_form() {
        let space = coins(1);
        let x = w(&space, 0);
        let t = core::f64::consts::LN_2;
        let est = mc_noise_form(&x, t, 100_000, 42).unwrap();
        let exact = 1.0 - (-t).exp(); // 0.5
        assert!(
            (est.estimate - exact).abs() <= 3.0 * est.std_error,
            "estimate {} vs exact {exact} (se {})",
            est.estimate,
            est.std_error
        );
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let space = coins(3);
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| c(sign(co[0]) * sign(co[1])));
        let a = mc_noise_form(&x, 0.6, 5000, 99).unwrap();
        let b = mc_noise_form(&x, 0.6, 5000, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_rejects_zero_samples() {
        let space = coins(1);
        let x = w(&space, 0);
        assert!(matches!(
            mc_noise_form(&x, 0.5, 0, 1),
            Err(Error::ZeroSamples)
        ));
    }

    #[test]
    fn curves_of_constant_vanish() {
        let space = coins(2);
        let x = RandomVariable::constant(space, c(3.0));
        let curve = sensitivity_curves(&x, &[0.0, 0.5, 1.0]).unwrap();
        for i in 0..3 {
            assert!(curve.dist[i].abs() < 1e-12);
            assert!(curve.norm_drop[i].abs() < 1e-12);
            assert!(curve.quad_form[i].abs() < 1e-12);
        }
    }

    #[test]
    fn curves_on_pure_level_have_eigenvalue_form() {
        let space = coins(3);
        let x = w(&space, 0)
            .mul_pointwise(&w(&space, 1))
            .unwrap()
            .scale(c(2.0)); // level 2, squared norm 4
        let grid = [0.1, 0.4, 0.9];
        let curve = sensitivity_curves(&x, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let expected = (1.0 - (-2.0 * t).exp()) * 4.0;
            assert!((curve.quad_form[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn quad_form_equals_norm_difference_at_half_time() {
        use crate::rng::{CounterRng, SubStream};
        let space = coins(3);
        let mut rng = CounterRng::new(31, SubStream::General);
        let x = RandomVariable::from_fn(Arc::clone(&space), |_| {
            Complex64::new(rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
        });
        for t in [0.2, 0.8, 1.7] {
            let quad = noise_quad_form(&x, t).unwrap();
            let u_half = noise_operator(&x, t / 2.0).unwrap().norm();
            let expected = x.norm() * x.norm() - u_half * u_half;
            assert!((quad - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn curves_reject_unsorted_grid() {
        let space = coins(1);
        let x = w(&space, 0);
        assert!(matches!(
            sensitivity_curves(&x, &[0.5, 0.1]),
            Err(Error::UnsortedGrid)
        ));
        assert!(matches!(
            sensitivity_curves(&x, &[-0.5, 0.1]),
            Err(Error::UnsortedGrid)
        ));
    }

    #[test]
    fn measure_validation() {
        let mut support = BTreeMap::new();
        support.insert(SubsetIndex::EMPTY, 0.4);
        assert!(matches!(
            SubsetMeasure::new(2, support),
            Err(Error::InvalidMeasure { .. })
        ));
        let mut negative = BTreeMap::new();
        negative.insert(SubsetIndex::EMPTY, 1.5);
        negative.insert(SubsetIndex::full(2), -0.5);
        assert!(matches!(
            SubsetMeasure::new(2, negative),
            Err(Error::InvalidMeasure { .. })
        ));
    }
}
