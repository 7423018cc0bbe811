//! Finite product probability spaces, subsets of factors, and complex-valued
//! random variables.
//!
//! A [`ProductSpace`] enumerates its outcomes in row-major order with factor
//! 0 varying slowest; the enumeration order is part of the contract so that
//! serialized value arrays are portable. All probabilities are strictly
//! positive, which keeps the L2 inner product nondegenerate.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// Resolves float math through libm in no_std builds; redundant when the
// graph links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, MAX_STATES};

/// Tolerance on the per-factor probability sum.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Largest number of factors a [`SubsetIndex`] bitmask can address.
pub const MAX_FACTORS: usize = 64;

/// One finite probability space: outcome labels plus strictly positive
/// probabilities. Plain data until validated by [`ProductSpace::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpace {
    pub outcomes: Vec<String>,
    pub probs: Vec<f64>,
}

impl FactorSpace {
    pub fn new(outcomes: Vec<String>, probs: Vec<f64>) -> Self {
        FactorSpace { outcomes, probs }
    }

    /// Uniform distribution over the given labels.
    pub fn uniform(outcomes: Vec<String>) -> Self {
        let n = outcomes.len().max(1);
        FactorSpace {
            outcomes,
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// A fair sign factor with outcomes `+1` and `-1`.
    pub fn fair_sign() -> Self {
        FactorSpace {
            outcomes: vec![String::from("+1"), String::from("-1")],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    fn validate(&self, factor: usize) -> Result<(), Error> {
        if self.outcomes.is_empty() {
            return Err(Error::EmptyFactor { factor });
        }
        if self.outcomes.len() != self.probs.len() {
            return Err(Error::ProbLengthMismatch {
                factor,
                outcomes: self.outcomes.len(),
                probs: self.probs.len(),
            });
        }
        for (index, &prob) in self.probs.iter().enumerate() {
            if !prob.is_finite() || prob <= 0.0 {
                return Err(Error::NonPositiveProb {
                    factor,
                    index,
                    prob,
                });
            }
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::ProbSumInvalid { factor, sum });
        }
        Ok(())
    }
}

/// A subset of factor indices `{0..m-1}`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SubsetIndex(u64);

impl SubsetIndex {
    pub const EMPTY: SubsetIndex = SubsetIndex(0);

    /// The full set `{0..m-1}`.
    pub fn full(m: usize) -> SubsetIndex {
        debug_assert!(m <= MAX_FACTORS);
        if m == 64 {
            SubsetIndex(u64::MAX)
        } else {
            SubsetIndex((1u64 << m) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> SubsetIndex {
        SubsetIndex(bits)
    }

    pub fn singleton(k: usize) -> SubsetIndex {
        SubsetIndex(1u64 << k)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> SubsetIndex {
        let mut bits = 0u64;
        for k in indices {
            bits |= 1u64 << k;
        }
        SubsetIndex(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Number of factors in the subset.
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, k: usize) -> bool {
        k < 64 && (self.0 >> k) & 1 == 1
    }

    pub fn union(self, other: SubsetIndex) -> SubsetIndex {
        SubsetIndex(self.0 | other.0)
    }

    pub fn intersect(self, other: SubsetIndex) -> SubsetIndex {
        SubsetIndex(self.0 & other.0)
    }

    pub fn minus(self, other: SubsetIndex) -> SubsetIndex {
        SubsetIndex(self.0 & !other.0)
    }

    pub fn complement(self, m: usize) -> SubsetIndex {
        SubsetIndex(!self.0 & SubsetIndex::full(m).0)
    }

    pub fn is_subset_of(self, other: SubsetIndex) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: SubsetIndex) -> bool {
        self.0 & other.0 != 0
    }

    /// Member indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        core::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k)
            }
        })
    }

    /// All subsets of `self`, the empty set first, via the carry-rippler
    /// trick. `self` itself is the last item.
    pub fn subsets(self) -> impl Iterator<Item = SubsetIndex> {
        let set = self.0;
        let mut sub = 0u64;
        let mut done = false;
        core::iter::from_fn(move || {
            if done {
                return None;
            }
            let current = sub;
            sub = sub.wrapping_sub(set) & set;
            done = sub == 0;
            Some(SubsetIndex(current))
        })
    }

    /// All `2^m` subsets of `{0..m-1}` in increasing bitmask order.
    pub fn all(m: usize) -> impl Iterator<Item = SubsetIndex> {
        debug_assert!(m < 64);
        (0..(1u64 << m)).map(SubsetIndex)
    }
}

/// An ordered product of finite probability spaces.
///
/// Outcome tuples are enumerated row-major with factor 0 slowest, and the
/// per-state product probabilities are precomputed.
#[derive(Debug, PartialEq)]
pub struct ProductSpace {
    factors: Vec<FactorSpace>,
    total_states: usize,
    strides: Vec<usize>,
    state_probs: Vec<f64>,
}

impl ProductSpace {
    /// Validate the factors and build the space (the default cap is
    /// [`MAX_STATES`]).
    pub fn build(factors: Vec<FactorSpace>) -> Result<Arc<ProductSpace>, Error> {
        Self::with_max_states(factors, MAX_STATES)
    }

    /// Like [`build`](Self::build) with an explicit state cap.
    pub fn with_max_states(
        factors: Vec<FactorSpace>,
        max_states: usize,
    ) -> Result<Arc<ProductSpace>, Error> {
        if factors.is_empty() {
            return Err(Error::EmptyFactorList);
        }
        if factors.len() > MAX_FACTORS {
            return Err(Error::TooManyFactors {
                factors: factors.len(),
                max: MAX_FACTORS,
            });
        }
        for (k, factor) in factors.iter().enumerate() {
            factor.validate(k)?;
        }
        let mut total: u128 = 1;
        for factor in &factors {
            total *= factor.len() as u128;
        }
        if total > max_states as u128 {
            return Err(Error::StateCapExceeded {
                total_states: total,
                cap: max_states,
            });
        }
        let total_states = total as usize;

        let m = factors.len();
        let mut strides = vec![1usize; m];
        for k in (0..m.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * factors[k + 1].len();
        }

        // Row-major outer product; factor 0 outermost.
        let mut state_probs = vec![1.0f64];
        for factor in &factors {
            let mut next = Vec::with_capacity(state_probs.len() * factor.len());
            for &p in &state_probs {
                for &q in &factor.probs {
                    next.push(p * q);
                }
            }
            state_probs = next;
        }
        debug_assert_eq!(state_probs.len(), total_states);

        Ok(Arc::new(ProductSpace {
            factors,
            total_states,
            strides,
            state_probs,
        }))
    }

    /// Number of factors `m`.
    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, k: usize) -> &FactorSpace {
        &self.factors[k]
    }

    pub fn factors(&self) -> &[FactorSpace] {
        &self.factors
    }

    pub fn total_states(&self) -> usize {
        self.total_states
    }

    /// Product probability of the state with the given enumeration index.
    pub fn state_prob(&self, state: usize) -> f64 {
        self.state_probs[state]
    }

    pub fn state_probs(&self) -> &[f64] {
        &self.state_probs
    }

    /// Enumeration stride of factor `k` (factor 0 slowest).
    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Outcome indices of the given state, one per factor.
    pub fn state_coords(&self, state: usize) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .map(|(k, f)| (state / self.strides[k]) % f.len())
            .collect()
    }

    pub fn full_subset(&self) -> SubsetIndex {
        SubsetIndex::full(self.factor_count())
    }

    /// Error unless the bitmask addresses only existing factors.
    pub fn check_subset(&self, a: SubsetIndex) -> Result<(), Error> {
        if a.is_subset_of(self.full_subset()) {
            Ok(())
        } else {
            Err(Error::SubsetOutOfRange {
                bits: a.bits(),
                factors: self.factor_count(),
            })
        }
    }

    pub fn check_factor(&self, k: usize) -> Result<(), Error> {
        if k < self.factor_count() {
            Ok(())
        } else {
            Err(Error::FactorIndexOutOfRange {
                index: k,
                factors: self.factor_count(),
            })
        }
    }

    /// Structural identity; `Arc` pointer equality is the fast path.
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// A complex-valued random variable: one value per product state, in the
/// fixed enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: Arc<ProductSpace>,
    values: Vec<Complex64>,
}

impl RandomVariable {
    pub fn new(space: Arc<ProductSpace>, values: Vec<Complex64>) -> Result<Self, Error> {
        if values.len() != space.total_states() {
            return Err(Error::ValueLengthMismatch {
                expected: space.total_states(),
                got: values.len(),
            });
        }
        Ok(RandomVariable { space, values })
    }

    pub fn constant(space: Arc<ProductSpace>, c: Complex64) -> Self {
        let values = vec![c; space.total_states()];
        RandomVariable { space, values }
    }

    pub fn zero(space: Arc<ProductSpace>) -> Self {
        Self::constant(space, Complex64::new(0.0, 0.0))
    }

    /// Build from a function of the outcome-index tuple, evaluated in
    /// enumeration order.
    pub fn from_fn<F>(space: Arc<ProductSpace>, mut f: F) -> Self
    where
        F: FnMut(&[usize]) -> Complex64,
    {
        let m = space.factor_count();
        let sizes: Vec<usize> = space.factors().iter().map(|fac| fac.len()).collect();
        let mut coords = vec![0usize; m];
        let mut values = Vec::with_capacity(space.total_states());
        for _ in 0..space.total_states() {
            values.push(f(&coords));
            for k in (0..m).rev() {
                coords[k] += 1;
                if coords[k] < sizes[k] {
                    break;
                }
                coords[k] = 0;
            }
        }
        RandomVariable { space, values }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn check_same_space(&self, other: &RandomVariable) -> Result<(), Error> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// `E X = sum_s P(s) X(s)`.
    pub fn expectation(&self) -> Complex64 {
        let probs = self.space.state_probs();
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, &p) in self.values.iter().zip(probs) {
            acc += v * p;
        }
        acc
    }

    /// `<X, Y> = E[X conj(Y)]`; conjugate-symmetric and positive-definite.
    pub fn inner(&self, other: &RandomVariable) -> Result<Complex64, Error> {
        self.check_same_space(other)?;
        let probs = self.space.state_probs();
        let mut acc = Complex64::new(0.0, 0.0);
        for ((x, y), &p) in self.values.iter().zip(&other.values).zip(probs) {
            acc += x * y.conj() * p;
        }
        Ok(acc)
    }

    /// L2 norm `sqrt(<X, X>)`.
    pub fn norm(&self) -> f64 {
        let probs = self.space.state_probs();
        let mut acc = 0.0f64;
        for (x, &p) in self.values.iter().zip(probs) {
            acc += x.norm_sqr() * p;
        }
        acc.sqrt()
    }

    /// Conditional expectation given all coordinates except `k`; the result
    /// is constant along coordinate `k`.
    pub fn marginal_average(&self, k: usize) -> Result<RandomVariable, Error> {
        self.space.check_factor(k)?;
        let stride = self.space.stride(k);
        let n_k = self.space.factor(k).len();
        let probs = &self.space.factor(k).probs;
        let period = stride * n_k;
        let mut values = vec![Complex64::new(0.0, 0.0); self.values.len()];
        let mut outer = 0;
        while outer < self.values.len() {
            for inner in 0..stride {
                let base = outer + inner;
                let mut avg = Complex64::new(0.0, 0.0);
                for (v, &p) in probs.iter().enumerate() {
                    avg += self.values[base + v * stride] * p;
                }
                for v in 0..n_k {
                    values[base + v * stride] = avg;
                }
            }
            outer += period;
        }
        Ok(RandomVariable {
            space: Arc::clone(&self.space),
            values,
        })
    }

    /// Apply a scalar function pointwise.
    pub fn map<F>(&self, f: F) -> RandomVariable
    where
        F: Fn(Complex64) -> Complex64,
    {
        RandomVariable {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combine two variables pointwise.
    pub fn zip_map<F>(&self, other: &RandomVariable, f: F) -> Result<RandomVariable, Error>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        self.check_same_space(other)?;
        Ok(RandomVariable {
            space: Arc::clone(&self.space),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RandomVariable) -> Result<RandomVariable, Error> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RandomVariable) -> Result<RandomVariable, Error> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul_pointwise(&self, other: &RandomVariable) -> Result<RandomVariable, Error> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> RandomVariable {
        self.map(|v| v * c)
    }

    /// Largest pointwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &RandomVariable) -> Result<f64, Error> {
        self.check_same_space(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// L2 distance to another variable.
    pub fn l2_distance(&self, other: &RandomVariable) -> Result<f64, Error> {
        Ok(self.sub(other)?.norm())
    }

    /// Whether the values are constant along every coordinate outside `a`,
    /// up to `tol` in modulus.
    pub fn is_measurable(&self, a: SubsetIndex, tol: f64) -> Result<bool, Error> {
        self.space.check_subset(a)?;
        let m = self.space.factor_count();
        for state in 0..self.values.len() {
            // Representative: coordinates outside `a` forced to outcome 0.
            let mut rep = state;
            for k in 0..m {
                if !a.contains(k) {
                    let stride = self.space.stride(k);
                    let coord = (state / stride) % self.space.factor(k).len();
                    rep -= coord * stride;
                }
            }
            if (self.values[state] - self.values[rep]).norm() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
