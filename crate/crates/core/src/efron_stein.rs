//! Conditional-expectation projections and the Efron-Stein orthogonal
//! decomposition.
//!
//! For a subset `A` of factors, `E_A` projects onto the functions depending
//! only on the factors in `A`; it is the composition of the per-factor
//! averages over the complement. The spaces `H_A` (functions depending on
//! exactly the factors in `A`) jointly diagonalize all the `E_A`: the
//! projector onto `H_A` applies `I - M_k` for `k` in `A` and `M_k`
//! otherwise, where `M_k` is the average over factor `k`.
//!
//! Single-outcome factors have a trivial mean-zero part, so their `H` space
//! is `{0}`; every identity below holds with them present.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::space::{RandomVariable, SubsetIndex};
use crate::{Error, H1_DEFAULT_TOL};

/// Components of a full decomposition may not exceed this many dense values.
pub const DECOMP_MAX_VALUES: u128 = 1 << 25;

/// Conditional expectation `E_A X`: average out every factor outside `a`.
pub fn cond_expect(x: &RandomVariable, a: SubsetIndex) -> Result<RandomVariable, Error> {
    x.space().check_subset(a)?;
    let m = x.space().factor_count();
    let mut out = x.clone();
    for k in 0..m {
        if !a.contains(k) {
            out = out.marginal_average(k)?;
        }
    }
    Ok(out)
}

/// Orthogonal projection onto `H_A`: apply `I - M_k` for `k` in `a` and
/// `M_k` for `k` outside.
pub fn project_ha(x: &RandomVariable, a: SubsetIndex) -> Result<RandomVariable, Error> {
    x.space().check_subset(a)?;
    let m = x.space().factor_count();
    let mut out = x.clone();
    for k in 0..m {
        let avg = out.marginal_average(k)?;
        if a.contains(k) {
            out = out.sub(&avg)?;
        } else {
            out = avg;
        }
    }
    Ok(out)
}

/// The full orthogonal decomposition `X = sum_A X_A`, one component per
/// subset of factors.
#[derive(Debug, Clone)]
pub struct Decomposition {
    components: BTreeMap<SubsetIndex, RandomVariable>,
}

impl Decomposition {
    pub fn component(&self, a: SubsetIndex) -> Option<&RandomVariable> {
        self.components.get(&a)
    }

    pub fn components(&self) -> &BTreeMap<SubsetIndex, RandomVariable> {
        &self.components
    }

    /// Sum of all components, in increasing bitmask order.
    pub fn reconstruct(&self) -> RandomVariable {
        let mut iter = self.components.values();
        let mut acc = iter.next().expect("decomposition is never empty").clone();
        for c in iter {
            acc = acc.add(c).expect("components share one space");
        }
        acc
    }

    /// `E_A X` recovered as the partial sum over subsets of `a`.
    pub fn partial_sum(&self, a: SubsetIndex) -> RandomVariable {
        let mut acc = self.components[&SubsetIndex::EMPTY].clone();
        for b in a.subsets() {
            if !b.is_empty() {
                acc = acc.add(&self.components[&b]).expect("same space");
            }
        }
        acc
    }
}

/// Split `X` into its `2^m` orthogonal components.
///
/// Factors are peeled one at a time: each intermediate component splits into
/// its average over the next factor and the complement. The output is dense,
/// so the total value count is capped at [`DECOMP_MAX_VALUES`].
pub fn decompose(x: &RandomVariable) -> Result<Decomposition, Error> {
    let m = x.space().factor_count();
    let states = x.space().total_states() as u128;
    let n_components = 1u128 << m;
    if n_components * states > DECOMP_MAX_VALUES {
        return Err(Error::DecompositionTooLarge {
            components: n_components,
            values: n_components * states,
        });
    }
    let mut parts: Vec<RandomVariable> = alloc::vec![x.clone()];
    for k in 0..m {
        let mut next = Vec::with_capacity(parts.len() * 2);
        // Masks over factors 0..k keep their index; the new bit goes on top.
        for part in &parts {
            next.push(part.marginal_average(k)?);
        }
        for (i, part) in parts.iter().enumerate() {
            let rest = part.sub(&next[i])?;
            next.push(rest);
        }
        // Reorder so that index equals the bitmask: entry i | 1<<k sits at
        // position parts.len() + i, which is exactly i | 1<<k.
        parts = next;
    }
    let components = parts
        .into_iter()
        .enumerate()
        .map(|(bits, rv)| (SubsetIndex::from_bits(bits as u64), rv))
        .collect();
    Ok(Decomposition { components })
}

/// Independent inclusion-exclusion route to a single component:
/// `X_A = sum_{B subset A} (-1)^{|A - B|} E_B X`. Used to cross-validate
/// [`decompose`]; the two paths share no code beyond `E_B` itself.
pub fn component_inclusion_exclusion(
    x: &RandomVariable,
    a: SubsetIndex,
) -> Result<RandomVariable, Error> {
    x.space().check_subset(a)?;
    let mut acc = RandomVariable::zero(alloc::sync::Arc::clone(x.space()));
    for b in a.subsets() {
        let term = cond_expect(x, b)?;
        let sign = if (a.count() - b.count()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc = acc.add(&term.scale(Complex64::new(sign, 0.0)))?;
    }
    Ok(acc)
}

/// All level projections `P_n X` for `n = 0..=m` in one pass.
///
/// Factors are folded in one at a time; at each step the level-`n`
/// accumulator receives the averaged part of the old level `n` plus the
/// mean-zero part of the old level `n-1`. The result equals the sum of the
/// `H_A` projections over `|A| = n`.
pub fn level_decomposition(x: &RandomVariable) -> Result<Vec<RandomVariable>, Error> {
    let m = x.space().factor_count();
    let mut levels: Vec<RandomVariable> = alloc::vec![x.clone()];
    for k in 0..m {
        let averaged: Vec<RandomVariable> = levels
            .iter()
            .map(|l| l.marginal_average(k))
            .collect::<Result<_, _>>()?;
        let mut next = Vec::with_capacity(levels.len() + 1);
        for n in 0..=levels.len() {
            let mut acc = if n < levels.len() {
                averaged[n].clone()
            } else {
                RandomVariable::zero(alloc::sync::Arc::clone(x.space()))
            };
            if n > 0 {
                acc = acc.add(&levels[n - 1].sub(&averaged[n - 1])?)?;
            }
            next.push(acc);
        }
        levels = next;
    }
    Ok(levels)
}

/// Projection onto the level-`n` eigenspace `H_n`.
pub fn level_project(x: &RandomVariable, n: usize) -> Result<RandomVariable, Error> {
    let m = x.space().factor_count();
    if n > m {
        return Err(Error::LevelOutOfRange { level: n, max: m });
    }
    Ok(level_decomposition(x)?.swap_remove(n))
}

/// Squared norms of the level projections; they sum to `norm(X)^2`.
pub fn level_weights(x: &RandomVariable) -> Result<Vec<f64>, Error> {
    Ok(level_decomposition(x)?
        .iter()
        .map(|l| {
            let n = l.norm();
            n * n
        })
        .collect())
}

/// Outcome of an H1 membership test.
#[derive(Debug, Clone)]
pub struct H1Check {
    /// Whether the spectral defect is within tolerance.
    pub is_member: bool,
    /// `norm(X - P_1 X)`.
    pub defect: f64,
    /// When membership fails: the first partition (the one into singleton
    /// atoms) whose block-sum identity breaks, with its residual norm.
    pub witness: Option<H1Witness>,
}

/// A failing partition from the block-sum criterion `X = sum_i E_{A_i} X`.
#[derive(Debug, Clone)]
pub struct H1Witness {
    pub blocks: Vec<SubsetIndex>,
    pub residual: f64,
}

/// Test `X ∈ H_1` by the spectral defect `norm(X - P_1 X) <= tol`.
///
/// On failure the singleton-atom partition is evaluated as a witness: for
/// `m >= 2` its block-sum residual is nonzero exactly when `X` leaves `H_1`.
pub fn is_in_h1(x: &RandomVariable, tol: f64) -> Result<H1Check, Error> {
    let defect = x.sub(&level_project(x, 1)?)?.norm();
    if defect <= tol {
        return Ok(H1Check {
            is_member: true,
            defect,
            witness: None,
        });
    }
    let m = x.space().factor_count();
    let blocks: Vec<SubsetIndex> = (0..m).map(SubsetIndex::singleton).collect();
    let mut block_sum = RandomVariable::zero(alloc::sync::Arc::clone(x.space()));
    for &b in &blocks {
        block_sum = block_sum.add(&cond_expect(x, b)?)?;
    }
    let residual = x.sub(&block_sum)?.norm();
    let witness = if residual > tol {
        Some(H1Witness { blocks, residual })
    } else {
        // Degenerate m = 1: E_T X = X makes every partition pass even for
        // variables outside H_1 (the complement condition with A = empty is
        // not expressible as a partition of factors).
        None
    };
    Ok(H1Check {
        is_member: false,
        defect,
        witness,
    })
}

/// Wick product of two H1 elements: the cross-atom sum
/// `sum_{a != b} (E_a X)(E_b Y)` over ordered pairs of distinct singleton
/// atoms. Bilinear, symmetric, and equal to the level-2 part of `XY`.
pub fn wick_product(x: &RandomVariable, y: &RandomVariable) -> Result<RandomVariable, Error> {
    wick_product_with_tol(x, y, H1_DEFAULT_TOL)
}

/// [`wick_product`] with an explicit H1 membership tolerance.
pub fn wick_product_with_tol(
    x: &RandomVariable,
    y: &RandomVariable,
    tol: f64,
) -> Result<RandomVariable, Error> {
    if !x.space().same_as(y.space()) {
        return Err(Error::SpaceMismatch);
    }
    for arg in [x, y] {
        let check = is_in_h1(arg, tol)?;
        if !check.is_member {
            return Err(Error::NotInH1 {
                defect: check.defect,
                tol,
            });
        }
    }
    let m = x.space().factor_count();
    let ex: Vec<RandomVariable> = (0..m)
        .map(|k| cond_expect(x, SubsetIndex::singleton(k)))
        .collect::<Result<_, _>>()?;
    let ey: Vec<RandomVariable> = (0..m)
        .map(|k| cond_expect(y, SubsetIndex::singleton(k)))
        .collect::<Result<_, _>>()?;
    let mut acc = RandomVariable::zero(alloc::sync::Arc::clone(x.space()));
    for (j, ex_j) in ex.iter().enumerate() {
        for (k, ey_k) in ey.iter().enumerate() {
            if j != k {
                acc = acc.add(&ex_j.mul_pointwise(ey_k)?)?;
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FactorSpace, ProductSpace};
    use crate::DEFAULT_TOL;
    use alloc::sync::Arc;
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

    fn two_fair_coins() -> Arc<ProductSpace> {
        ProductSpace::build(vec![FactorSpace::fair_sign(), FactorSpace::fair_sign()]).unwrap()
    }

    fn w(space: &Arc<ProductSpace>, k: usize) -> RandomVariable {
        RandomVariable::from_fn(Arc::clone(space), move |coords| c(sign(coords[k])))
    }

    #[test]
    fn full_subset_is_identity() {
        let space = two_fair_coins();
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            Complex64::new(sign(co[0]) + 0.5 * sign(co[1]), 0.3)
        });
        let e = cond_expect(&x, space.full_subset()).unwrap();
        assert_eq!(e.values(), x.values());
    }

    #[test]
    fn empty_subset_is_expectation() {
        let space = two_fair_coins();
        let x = w(&space, 0);
        let e = cond_expect(&x, SubsetIndex::EMPTY).unwrap();
        assert!(e.norm() < 1e-15);
    }

    #[test]
    fn cond_expect_kills_cross_term() {
        // E_{first factor} (w1*w2) = w1 * E(w2) = 0.
        let space = two_fair_coins();
        let x = w(&space, 0).mul_pointwise(&w(&space, 1)).unwrap();
        let e = cond_expect(&x, SubsetIndex::singleton(0)).unwrap();
        assert!(e.norm() < 1e-15);
    }

    #[test]
    fn project_empty_gives_constant_expectation() {
        let space = two_fair_coins();
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| c(3.0 + sign(co[0])));
        let p = project_ha(&x, SubsetIndex::EMPTY).unwrap();
        let expected = RandomVariable::constant(space, c(3.0));
        assert!(p.max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn centered_product_lives_at_top() {
        let space = two_fair_coins();
        let x = w(&space, 0).mul_pointwise(&w(&space, 1)).unwrap();
        let top = project_ha(&x, SubsetIndex::full(2)).unwrap();
        assert!(top.max_abs_diff(&x).unwrap() < 1e-14);
        let low = project_ha(&x, SubsetIndex::singleton(0)).unwrap();
        assert!(low.norm() < 1e-15);
    }

    #[test]
    fn decompose_linear_example() {
        // X = w1 + 2 w2 + 3 splits into its constant and singleton parts.
        let space = two_fair_coins();
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| {
            c(sign(co[0]) + 2.0 * sign(co[1]) + 3.0)
        });
        let d = decompose(&x).unwrap();
        let c0 = d.component(SubsetIndex::EMPTY).unwrap();
        let c1 = d.component(SubsetIndex::singleton(0)).unwrap();
        let c2 = d.component(SubsetIndex::singleton(1)).unwrap();
        let c12 = d.component(SubsetIndex::full(2)).unwrap();
        assert!(
            c0.max_abs_diff(&RandomVariable::constant(Arc::clone(&space), c(3.0)))
                .unwrap()
                < 1e-14
        );
        assert!(c1.max_abs_diff(&w(&space, 0)).unwrap() < 1e-14);
        assert!(c2.max_abs_diff(&w(&space, 1).scale(c(2.0))).unwrap() < 1e-14);
        assert!(c12.norm() < 1e-14);
    }

    #[test]
    fn decompose_constant_concentrates_at_empty() {
        let space = two_fair_coins();
        let x = RandomVariable::constant(Arc::clone(&space), Complex64::new(2.0, 1.0));
        let d = decompose(&x).unwrap();
        for (a, comp) in d.components() {
            if a.is_empty() {
                assert!(comp.max_abs_diff(&x).unwrap() < 1e-14);
            } else {
                assert!(comp.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn decompose_matches_inclusion_exclusion_oracle() {
        use crate::rng::{CounterRng, SubStream};
        let space = ProductSpace::build(vec![
            FactorSpace::fair_sign(),
            FactorSpace::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec![0.2, 0.3, 0.5],
            ),
            FactorSpace::new(vec!["x".into(), "y".into()], vec![0.6, 0.4]),
        ])
        .unwrap();
        let mut rng = CounterRng::new(5, SubStream::General);
        let x = RandomVariable::from_fn(Arc::clone(&space), |_| {
            Complex64::new(rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
        });
        let d = decompose(&x).unwrap();
        for a in SubsetIndex::all(3) {
            let oracle = component_inclusion_exclusion(&x, a).unwrap();
            let diff = d.component(a).unwrap().l2_distance(&oracle).unwrap();
            assert!(diff < DEFAULT_TOL, "subset {:x}: {diff}", a.bits());
        }
    }

    #[test]
    fn level_weights_of_pure_product() {
        let space = two_fair_coins();
        let x = w(&space, 0).mul_pointwise(&w(&space, 1)).unwrap();
        let weights = level_weights(&x).unwrap();
        assert_eq!(weights.len(), 3);
        assert!(weights[0].abs() < 1e-14);
        assert!(weights[1].abs() < 1e-14);
        assert!((weights[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_weights_of_constant() {
        let space = two_fair_coins();
        let x = RandomVariable::constant(space, Complex64::new(0.0, 2.0));
        let weights = level_weights(&x).unwrap();
        assert!((weights[0] - 4.0).abs() < 1e-12);
        assert!(weights[1].abs() < 1e-14 && weights[2].abs() < 1e-14);
    }

    #[test]
    fn parseval_on_random_variables() {
        use crate::rng::{CounterRng, SubStream};
        let space = ProductSpace::build(vec![
            FactorSpace::fair_sign(),
            FactorSpace::new(vec!["a".into(), "b".into()], vec![0.25, 0.75]),
            FactorSpace::uniform(vec!["0".into(), "1".into(), "2".into()]),
        ])
        .unwrap();
        let mut rng = CounterRng::new(17, SubStream::General);
        for _ in 0..100 {
            let x = RandomVariable::from_fn(Arc::clone(&space), |_| {
                Complex64::new(rng.next_range(-2.0, 2.0), rng.next_range(-2.0, 2.0))
            });
            let total: f64 = level_weights(&x).unwrap().iter().sum();
            let norm2 = x.norm() * x.norm();
            assert!((total - norm2).abs() < DEFAULT_TOL * norm2.max(1.0));
        }
    }

    #[test]
    fn level_project_rejects_out_of_range() {
        let space = two_fair_coins();
        let x = RandomVariable::zero(space);
        assert!(matches!(
            level_project(&x, 3),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn wick_of_two_signs_is_their_product() {
        let space = two_fair_coins();
        let x = w(&space, 0);
        let y = w(&space, 1);
        let wick = wick_product(&x, &y).unwrap();
        let expected = x.mul_pointwise(&y).unwrap();
        assert!(wick.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn wick_on_single_factor_is_empty_sum() {
        let space = ProductSpace::build(vec![FactorSpace::fair_sign()]).unwrap();
        let x = RandomVariable::from_fn(Arc::clone(&space), |co| c(sign(co[0])));
        let wick = wick_product(&x, &x).unwrap();
        assert!(wick.norm() < 1e-15);
    }

    #[test]
    fn wick_rejects_non_h1_input() {
        let space = two_fair_coins();
        let bad = RandomVariable::constant(Arc::clone(&space), c(1.0));
        let good = w(&space, 0);
        assert!(matches!(
            wick_product(&bad, &good),
            Err(Error::NotInH1 { .. })
        ));
    }

    #[test]
    fn h1_accepts_sum_of_signs() {
        let space = two_fair_coins();
        let x = w(&space, 0).add(&w(&space, 1)).unwrap();
        let check = is_in_h1(&x, 1e-8).unwrap();
        assert!(check.is_member);
        assert!(check.defect < 1e-12);
    }

    #[test]
    fn h1_rejects_product_with_unit_defect() {
        let space = two_fair_coins();
        let x = w(&space, 0).mul_pointwise(&w(&space, 1)).unwrap();
        let check = is_in_h1(&x, 1e-8).unwrap();
        assert!(!check.is_member);
        assert!((check.defect - 1.0).abs() < 1e-12);
        let witness = check.witness.expect("singleton partition must fail");
        assert_eq!(witness.blocks.len(), 2);
        assert!((witness.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_rejects_constants() {
        let space = two_fair_coins();
        let x = RandomVariable::constant(space, c(1.0));
        let check = is_in_h1(&x, 1e-8).unwrap();
        assert!(!check.is_member);
        assert!((check.defect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_cap_is_enforced() {
        let factors: Vec<FactorSpace> = (0..14).map(|_| FactorSpace::fair_sign()).collect();
        let space = ProductSpace::build(factors).unwrap();
        let x = RandomVariable::zero(space);
        assert!(matches!(
            decompose(&x),
            Err(Error::DecompositionTooLarge { .. })
        ));
    }
}
