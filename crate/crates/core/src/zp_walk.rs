//! Random walk on the cyclic group `Z_p` at finite truncation, and its
//! sensitive character.
//!
//! The walk `X_0, X_1, ..., X_{m-1}` on `Z_p` (odd `p >= 3`) is encoded as a
//! product space with factor `0` the uniform endpoint `X_{m-1}` and factors
//! `1..m-1` the independent fair `+/-1` increments `X_k - X_{k-1}`. The
//! start `X_0` is a derived coordinate, reconstructed mod `p` from the
//! endpoint and the increments, never a stored factor.
//!
//! The character `exp(2 pi i X_0 / p)` is the canonical sensitive variable:
//! its noise-damped norm decays geometrically in `m` with the closed-form
//! ratio `sqrt(cos^2(2 pi / p) + e^{-2t} sin^2(2 pi / p))`, while every
//! increment sits in `H_1` and keeps norm `e^{-t}` at all truncations.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use core::f64::consts::PI;
use num_complex::Complex64;
// Resolves float math through libm in no_std builds; redundant when the
// graph links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::space::{FactorSpace, ProductSpace, RandomVariable, SubsetIndex};
use crate::{Error, MAX_STATES};

fn check_walk_params(p: u64, m: usize) -> Result<(), Error> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(Error::InvalidWalkModulus { p });
    }
    if m < 1 {
        return Err(Error::InvalidWalkLength { m });
    }
    Ok(())
}

/// The walk space at truncation `m`: one uniform `Z_p` factor plus `m-1`
/// fair sign factors.
#[derive(Debug, Clone)]
pub struct WalkSpace {
    p: u64,
    m: usize,
    space: Arc<ProductSpace>,
}

impl WalkSpace {
    pub fn build(p: u64, m: usize) -> Result<Self, Error> {
        Self::with_max_states(p, m, MAX_STATES)
    }

    pub fn with_max_states(p: u64, m: usize, max_states: usize) -> Result<Self, Error> {
        check_walk_params(p, m)?;
        let labels: Vec<String> = (0..p).map(|v| alloc::format!("{v}")).collect();
        let mut factors = Vec::with_capacity(m);
        factors.push(FactorSpace::uniform(labels));
        for _ in 1..m {
            factors.push(FactorSpace::fair_sign());
        }
        let space = ProductSpace::with_max_states(factors, max_states)?;
        Ok(WalkSpace { p, m, space })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Number of walk positions `X_0 .. X_{m-1}`.
    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    /// The factor indices carrying the increments (empty for `m = 1`).
    pub fn increment_subset(&self) -> SubsetIndex {
        SubsetIndex::from_indices(1..self.m)
    }

    fn position_coord(&self, coords: &[usize], k: usize) -> u64 {
        // X_k = X_{m-1} - sum of increments k+1 ..= m-1, mod p.
        let mut value = coords[0] as i64;
        for &c in &coords[(k + 1)..self.m] {
            value -= if c == 0 { 1 } else { -1 };
        }
        value.rem_euclid(self.p as i64) as u64
    }

    /// The walk position `X_k` as a real-integer-valued variable in
    /// `{0 .. p-1}`.
    pub fn position(&self, k: usize) -> Result<RandomVariable, Error> {
        if k >= self.m {
            return Err(Error::FactorIndexOutOfRange {
                index: k,
                factors: self.m,
            });
        }
        Ok(RandomVariable::from_fn(Arc::clone(&self.space), |coords| {
            Complex64::new(self.position_coord(coords, k) as f64, 0.0)
        }))
    }

    /// The sensitive character `exp(2 pi i X_0 / p)`; unit norm, zero mean.
    pub fn character(&self) -> RandomVariable {
        let p = self.p as f64;
        RandomVariable::from_fn(Arc::clone(&self.space), |coords| {
            let x0 = self.position_coord(coords, 0) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * x0 / p)
        })
    }

    /// The increment `X_k - X_{k-1}` as a real `+/-1` variable,
    /// `1 <= k <= m-1`.
    pub fn increment(&self, k: usize) -> Result<RandomVariable, Error> {
        if k == 0 || k >= self.m {
            return Err(Error::FactorIndexOutOfRange {
                index: k,
                factors: self.m,
            });
        }
        Ok(RandomVariable::from_fn(
            Arc::clone(&self.space),
            move |coords| Complex64::new(if coords[k] == 0 { 1.0 } else { -1.0 }, 0.0),
        ))
    }

    /// The increment variables: mean zero, mutually orthogonal, each in H1.
    /// At finite truncation these do not exhaust H1; see
    /// [`tail_mean_zero_basis`](Self::tail_mean_zero_basis).
    pub fn increment_basis(&self) -> Vec<RandomVariable> {
        (1..self.m)
            .map(|k| self.increment(k).expect("index in range"))
            .collect()
    }

    /// Mean-zero functions of the endpoint factor, `exp(2 pi i j X_{m-1}/p)`
    /// for `j = 1..p-1`. These complete H1 at finite truncation only; they
    /// disappear in the limit where the tail atom carries no H1 mass.
    pub fn tail_mean_zero_basis(&self) -> Vec<RandomVariable> {
        let p = self.p as f64;
        (1..self.p)
            .map(|j| {
                RandomVariable::from_fn(Arc::clone(&self.space), |coords| {
                    Complex64::from_polar(1.0, 2.0 * PI * (j as f64) * coords[0] as f64 / p)
                })
            })
            .collect()
    }

    /// Average over the rotation orbit: `(1/p)(X + X.R + ... + X.R^{p-1})`,
    /// where `R` adds 1 (mod `p`) to every walk position, i.e. shifts the
    /// endpoint factor and fixes the increments. The result is `R`-invariant
    /// and equals the conditional expectation onto the increment factors.
    pub fn rotation_average(&self, x: &RandomVariable) -> Result<RandomVariable, Error> {
        if !self.space.same_as(x.space()) {
            return Err(Error::SpaceMismatch);
        }
        let p = self.p as usize;
        let stride = self.space.stride(0);
        let values = x.values();
        let mut out = Vec::with_capacity(values.len());
        for s in 0..values.len() {
            let v = s / stride;
            let base = s - v * stride;
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..p {
                acc += values[base + ((v + r) % p) * stride];
            }
            out.push(acc / p as f64);
        }
        RandomVariable::new(Arc::clone(&self.space), out)
    }
}

/// Closed-form noise-damped norm of the character:
/// `e^{-t} (cos^2(2 pi/p) + e^{-2t} sin^2(2 pi/p))^{(m-1)/2}`.
pub fn closed_form_norm(p: u64, m: usize, t: f64) -> Result<f64, Error> {
    check_walk_params(p, m)?;
    if t < 0.0 {
        return Err(Error::NegativeTime { t });
    }
    let angle = 2.0 * PI / p as f64;
    let c = angle.cos();
    let s = angle.sin();
    let base = c * c + (-2.0 * t).exp() * s * s;
    Ok((-t).exp() * base.powf((m as f64 - 1.0) / 2.0))
}

/// One row of the sensitivity decay table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub m: usize,
    /// `norm(U_t character)` computed on the walk space.
    pub exact: f64,
    /// The closed-form value at the same `(p, m, t)`.
    pub closed_form: f64,
    /// `exact / closed_form(p, m-1, t)`: the per-step decay factor
    /// (`NaN` at `m = 1`, where there is no previous truncation).
    pub ratio: f64,
    /// `norm(U_t (X_1 - X_0))`: the stable comparison row
    /// (`NaN` at `m = 1`, where there are no increments).
    pub increment_norm: f64,
}

/// Exact and closed-form character norms across a range of truncations,
/// with the per-step ratio and the stable increment norm.
pub fn sensitivity_decay_table(
    p: u64,
    t: f64,
    m_lo: usize,
    m_hi: usize,
) -> Result<Vec<DecayRow>, Error> {
    sensitivity_decay_table_with_max_states(p, t, m_lo, m_hi, MAX_STATES)
}

/// [`sensitivity_decay_table`] with an explicit state cap.
pub fn sensitivity_decay_table_with_max_states(
    p: u64,
    t: f64,
    m_lo: usize,
    m_hi: usize,
    max_states: usize,
) -> Result<Vec<DecayRow>, Error> {
    if m_lo > m_hi {
        return Err(Error::ParamOutOfRange {
            name: "m range",
            value: m_lo as f64,
        });
    }
    let mut rows = Vec::with_capacity(m_hi - m_lo + 1);
    for m in m_lo..=m_hi {
        let ws = WalkSpace::with_max_states(p, m, max_states)?;
        let chi = ws.character();
        let exact = crate::noise::noise_operator(&chi, t)?.norm();
        let closed = closed_form_norm(p, m, t)?;
        let ratio = if m >= 2 {
            exact / closed_form_norm(p, m - 1, t)?
        } else {
            f64::NAN
        };
        let increment_norm = if m >= 2 {
            crate::noise::noise_operator(&ws.increment(1)?, t)?.norm()
        } else {
            f64::NAN
        };
        rows.push(DecayRow {
            m,
            exact,
            closed_form: closed,
            ratio,
            increment_norm,
        });
    }
    Ok(rows)
}
