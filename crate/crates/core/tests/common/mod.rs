//! Shared generators for randomized operator tests. Everything is driven by
//! the crate's own counter RNG so failures replay exactly.

// Each test binary compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use std::sync::Arc;

use noise_core::rng::CounterRng;
use noise_core::towers::Partition;
use noise_core::{Complex64, FactorSpace, ProductSpace, RandomVariable, SubsetIndex};

pub fn random_factor(rng: &mut CounterRng, min_size: usize, max_size: usize) -> FactorSpace {
    let n = min_size + rng.next_index(max_size - min_size + 1);
    let outcomes = (0..n).map(|i| format!("o{i}")).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.next_range(0.1, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    FactorSpace::new(outcomes, weights.iter().map(|w| w / total).collect())
}

pub fn random_space(
    rng: &mut CounterRng,
    min_m: usize,
    max_m: usize,
    min_size: usize,
    max_size: usize,
) -> Arc<ProductSpace> {
    let m = min_m + rng.next_index(max_m - min_m + 1);
    let factors = (0..m)
        .map(|_| random_factor(rng, min_size, max_size))
        .collect();
    ProductSpace::build(factors).expect("generated factors are valid")
}

pub fn random_rv(rng: &mut CounterRng, space: &Arc<ProductSpace>) -> RandomVariable {
    RandomVariable::from_fn(Arc::clone(space), |_| {
        Complex64::new(rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
    })
}

pub fn random_real_rv(rng: &mut CounterRng, space: &Arc<ProductSpace>) -> RandomVariable {
    RandomVariable::from_fn(Arc::clone(space), |_| {
        Complex64::new(rng.next_range(-1.0, 1.0), 0.0)
    })
}

/// A random partition of `{0..m-1}` by independent block assignment.
pub fn random_partition(rng: &mut CounterRng, m: usize) -> Partition {
    let groups = 1 + rng.next_index(m);
    let mut blocks = vec![SubsetIndex::EMPTY; groups];
    for k in 0..m {
        let g = rng.next_index(groups);
        blocks[g] = blocks[g].union(SubsetIndex::singleton(k));
    }
    blocks.retain(|b| !b.is_empty());
    Partition::new(m, blocks).expect("assignment covers all factors")
}

/// Coarsen a partition by merging two randomly chosen blocks (identity when
/// only one block remains).
pub fn merge_two_blocks(rng: &mut CounterRng, p: &Partition) -> Partition {
    let blocks = p.blocks();
    if blocks.len() < 2 {
        return p.clone();
    }
    let i = rng.next_index(blocks.len());
    let mut j = rng.next_index(blocks.len() - 1);
    if j >= i {
        j += 1;
    }
    let mut merged: Vec<SubsetIndex> = Vec::with_capacity(blocks.len() - 1);
    for (idx, &b) in blocks.iter().enumerate() {
        if idx == i {
            merged.push(b.union(blocks[j]));
        } else if idx != j {
            merged.push(b);
        }
    }
    Partition::new(p.factor_count(), merged).expect("merge preserves the cover")
}

/// Split one multi-element block in two (identity on the discrete partition).
pub fn split_one_block(rng: &mut CounterRng, p: &Partition) -> Partition {
    let candidates: Vec<usize> = p
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.count() >= 2)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return p.clone();
    }
    let target = candidates[rng.next_index(candidates.len())];
    let members: Vec<usize> = p.blocks()[target].iter().collect();
    // Random nonempty proper sub-block.
    let mut left = SubsetIndex::EMPTY;
    loop {
        for &k in &members {
            if rng.next_f64() < 0.5 {
                left = left.union(SubsetIndex::singleton(k));
            }
        }
        if !left.is_empty() && left.count() < members.len() {
            break;
        }
        left = SubsetIndex::EMPTY;
    }
    let mut blocks: Vec<SubsetIndex> = Vec::with_capacity(p.block_count() + 1);
    for (idx, &b) in p.blocks().iter().enumerate() {
        if idx == target {
            blocks.push(left);
            blocks.push(b.minus(left));
        } else {
            blocks.push(b);
        }
    }
    Partition::new(p.factor_count(), blocks).expect("split preserves the cover")
}

/// A refinement chain from the trivial partition down to singletons.
pub fn random_tower_stages(rng: &mut CounterRng, m: usize) -> Vec<Partition> {
    let mut stages = vec![Partition::trivial(m)];
    loop {
        let last = stages.last().unwrap();
        if last.block_count() == m {
            break;
        }
        let next = split_one_block(rng, last);
        stages.push(next);
    }
    stages
}
