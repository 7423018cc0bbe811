//! Finite subalgebra towers: partitions of the factor set, refinement
//! chains, coarse level decompositions, and the monotonicity of the coarse
//! noise semigroups.
//!
//! A partition of the factors into blocks generates a subalgebra whose atoms
//! are the blocks; the coarse machinery below is the block-level version of
//! [`efron_stein`](crate::efron_stein), obtained by treating every block of
//! factors as one super-factor. Refining the partition can only increase the
//! number of blocks a subset touches, so coarse generators grow and coarse
//! semigroups shrink along a tower.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
// Resolves float math through libm in no_std builds; redundant when the
// graph links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::efron_stein::cond_expect;
use crate::space::{RandomVariable, SubsetIndex};
use crate::Error;

/// A partition of `{0..m-1}` into disjoint nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    factors: usize,
    blocks: Vec<SubsetIndex>,
}

impl Partition {
    pub fn new(factors: usize, blocks: Vec<SubsetIndex>) -> Result<Self, Error> {
        if factors == 0 {
            return Err(Error::InvalidPartition {
                reason: String::from("partition needs at least one factor"),
            });
        }
        let full = SubsetIndex::full(factors);
        let mut seen = SubsetIndex::EMPTY;
        for &b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition {
                    reason: String::from("blocks must be nonempty"),
                });
            }
            if !b.is_subset_of(full) {
                return Err(Error::InvalidPartition {
                    reason: alloc::format!("block {:#x} has bits outside 0..{factors}", b.bits()),
                });
            }
            if seen.intersects(b) {
                return Err(Error::InvalidPartition {
                    reason: alloc::format!("block {:#x} overlaps an earlier block", b.bits()),
                });
            }
            seen = seen.union(b);
        }
        if seen != full {
            return Err(Error::InvalidPartition {
                reason: alloc::format!(
                    "blocks cover {:#x}, not the full set {:#x}",
                    seen.bits(),
                    full.bits()
                ),
            });
        }
        Ok(Partition { factors, blocks })
    }

    /// The partition into singletons.
    pub fn discrete(factors: usize) -> Self {
        Partition {
            factors,
            blocks: (0..factors).map(SubsetIndex::singleton).collect(),
        }
    }

    /// The one-block partition.
    pub fn trivial(factors: usize) -> Self {
        debug_assert!(factors >= 1);
        Partition {
            factors,
            blocks: alloc::vec![SubsetIndex::full(factors)],
        }
    }

    pub fn factor_count(&self) -> usize {
        self.factors
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[SubsetIndex] {
        &self.blocks
    }

    /// Whether every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.factors == coarser.factors
            && self
                .blocks
                .iter()
                .all(|b| coarser.blocks.iter().any(|c| b.is_subset_of(*c)))
    }

    /// Common refinement: all nonempty pairwise block intersections.
    pub fn join(&self, other: &Partition) -> Result<Partition, Error> {
        if self.factors != other.factors {
            return Err(Error::InvalidPartition {
                reason: alloc::format!(
                    "cannot join partitions over {} and {} factors",
                    self.factors,
                    other.factors
                ),
            });
        }
        let mut blocks = Vec::new();
        for &a in &self.blocks {
            for &b in &other.blocks {
                let c = a.intersect(b);
                if !c.is_empty() {
                    blocks.push(c);
                }
            }
        }
        Partition::new(self.factors, blocks)
    }

    /// Least union of blocks containing `s`: the union of all blocks that
    /// meet `s`. Idempotent and monotone in `s`.
    pub fn saturation(&self, s: SubsetIndex) -> SubsetIndex {
        self.blocks
            .iter()
            .filter(|b| b.intersects(s))
            .fold(SubsetIndex::EMPTY, |acc, &b| acc.union(b))
    }

    /// Number of blocks that meet `s`.
    pub fn touched(&self, s: SubsetIndex) -> usize {
        self.blocks.iter().filter(|b| b.intersects(s)).count()
    }

    fn check_space(&self, x: &RandomVariable) -> Result<(), Error> {
        if self.factors == x.space().factor_count() {
            Ok(())
        } else {
            Err(Error::InvalidPartition {
                reason: alloc::format!(
                    "partition over {} factors applied to a space with {}",
                    self.factors,
                    x.space().factor_count()
                ),
            })
        }
    }
}

/// A refinement chain of partitions: every block of stage `i` is a union of
/// blocks of stage `i+1`.
#[derive(Debug, Clone)]
pub struct Tower {
    partitions: Vec<Partition>,
}

impl Tower {
    pub fn new(partitions: Vec<Partition>) -> Result<Self, Error> {
        for pair in partitions.windows(2) {
            if !pair[1].refines(&pair[0]) {
                return Err(Error::RefinementViolated);
            }
        }
        Ok(Tower { partitions })
    }

    pub fn stages(&self) -> &[Partition] {
        &self.partitions
    }
}

/// Average over every factor of one block.
fn block_average(x: &RandomVariable, block: SubsetIndex) -> Result<RandomVariable, Error> {
    let mut out = x.clone();
    for k in block.iter() {
        out = out.marginal_average(k)?;
    }
    Ok(out)
}

/// All coarse level projections for the subalgebra generated by `p`, level
/// `n` collecting the fine components whose saturation is a union of exactly
/// `n` blocks. Blocks are folded in like super-factors.
pub fn coarse_level_decomposition(
    x: &RandomVariable,
    p: &Partition,
) -> Result<Vec<RandomVariable>, Error> {
    p.check_space(x)?;
    let mut levels: Vec<RandomVariable> = alloc::vec![x.clone()];
    for &block in p.blocks() {
        let averaged: Vec<RandomVariable> = levels
            .iter()
            .map(|l| block_average(l, block))
            .collect::<Result<_, _>>()?;
        let mut next = Vec::with_capacity(levels.len() + 1);
        for n in 0..=levels.len() {
            let mut acc = if n < levels.len() {
                averaged[n].clone()
            } else {
                RandomVariable::zero(Arc::clone(x.space()))
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

/// Projection onto coarse level `n` of the subalgebra generated by `p`.
pub fn coarse_level_project(
    x: &RandomVariable,
    p: &Partition,
    n: usize,
) -> Result<RandomVariable, Error> {
    if n > p.block_count() {
        return Err(Error::LevelOutOfRange {
            level: n,
            max: p.block_count(),
        });
    }
    Ok(coarse_level_decomposition(x, p)?.swap_remove(n))
}

/// Squared norms of the coarse level projections.
pub fn coarse_level_weights(x: &RandomVariable, p: &Partition) -> Result<Vec<f64>, Error> {
    Ok(coarse_level_decomposition(x, p)?
        .iter()
        .map(|l| {
            let n = l.norm();
            n * n
        })
        .collect())
}

/// Coarse noise operator: damp the coarse level-`n` part by `e^{-nt}`, i.e.
/// each fine component by `e^{-t * touched}`.
pub fn coarse_noise_operator(
    x: &RandomVariable,
    p: &Partition,
    t: f64,
) -> Result<RandomVariable, Error> {
    if t < 0.0 {
        return Err(Error::NegativeTime { t });
    }
    let levels = coarse_level_decomposition(x, p)?;
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for (n, level) in levels.iter().enumerate() {
        let damp = (-(n as f64) * t).exp();
        acc = acc.add(&level.scale(Complex64::new(damp, 0.0)))?;
    }
    Ok(acc)
}

/// Coarse generator: `sum_B (X - M_B X)` over the blocks of `p`; multiplies
/// each coarse level-`n` part by `n`.
pub fn coarse_generator_apply(x: &RandomVariable, p: &Partition) -> Result<RandomVariable, Error> {
    p.check_space(x)?;
    let mut acc = RandomVariable::zero(Arc::clone(x.space()));
    for &block in p.blocks() {
        acc = acc.add(&x.sub(&block_average(x, block)?)?)?;
    }
    Ok(acc)
}

/// Quadratic forms of a coarse/fine partition pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneReport {
    pub coarse_ut_form: f64,
    pub fine_ut_form: f64,
    pub coarse_n_form: f64,
    pub fine_n_form: f64,
    /// `coarse_ut_form >= fine_ut_form - tol`.
    pub ut_ordered: bool,
    /// `coarse_n_form <= fine_n_form + tol`.
    pub n_ordered: bool,
}

impl MonotoneReport {
    pub fn ordered(&self) -> bool {
        self.ut_ordered && self.n_ordered
    }
}

/// Compare the semigroup and generator quadratic forms of a refinement pair:
/// `<U_t X, X>` must not grow and `<N X, X>` must not shrink when the
/// partition is refined.
pub fn check_monotone(
    x: &RandomVariable,
    t: f64,
    coarse: &Partition,
    fine: &Partition,
    tol: f64,
) -> Result<MonotoneReport, Error> {
    if !fine.refines(coarse) {
        return Err(Error::RefinementViolated);
    }
    let form = |op: RandomVariable| -> Result<f64, Error> { Ok(op.inner(x)?.re) };
    let coarse_ut_form = form(coarse_noise_operator(x, coarse, t)?)?;
    let fine_ut_form = form(coarse_noise_operator(x, fine, t)?)?;
    let coarse_n_form = form(coarse_generator_apply(x, coarse)?)?;
    let fine_n_form = form(coarse_generator_apply(x, fine)?)?;
    Ok(MonotoneReport {
        coarse_ut_form,
        fine_ut_form,
        coarse_n_form,
        fine_n_form,
        ut_ordered: coarse_ut_form >= fine_ut_form - tol,
        n_ordered: coarse_n_form <= fine_n_form + tol,
    })
}

/// Block-sum membership test: true iff `X = sum_blocks E_block X` within
/// `tol` for every supplied partition. With the singleton partition included
/// (and at least two factors) this is equivalent to H1 membership.
pub fn h1_partition_test(
    x: &RandomVariable,
    partitions: &[Partition],
    tol: f64,
) -> Result<bool, Error> {
    for p in partitions {
        p.check_space(x)?;
        let mut acc = RandomVariable::zero(Arc::clone(x.space()));
        for &block in p.blocks() {
            acc = acc.add(&cond_expect(x, block)?)?;
        }
        if x.sub(&acc)?.norm() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every partition of `{0..m-1}`, enumerated by restricted-growth strings.
/// Intended for small `m` (Bell numbers grow fast).
pub fn all_partitions(m: usize) -> Vec<Partition> {
    fn recurse(m: usize, k: usize, blocks: &mut Vec<SubsetIndex>, out: &mut Vec<Partition>) {
        if k == m {
            out.push(Partition {
                factors: m,
                blocks: blocks.clone(),
            });
            return;
        }
        for i in 0..blocks.len() {
            blocks[i] = blocks[i].union(SubsetIndex::singleton(k));
            recurse(m, k + 1, blocks, out);
            blocks[i] = blocks[i].minus(SubsetIndex::singleton(k));
        }
        blocks.push(SubsetIndex::singleton(k));
        recurse(m, k + 1, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    let mut blocks = alloc::vec![SubsetIndex::singleton(0)];
    recurse(m, 1, &mut blocks, &mut out);
    out
}
