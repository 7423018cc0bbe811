//! File schemas and deterministic writers.
//!
//! Spaces travel as `{"factors":[{"outcomes":[...],"probs":[...]}, ...]}`;
//! random variables as `{"space_hash": "<hex>", "values": [[re,im], ...]}`
//! in the fixed row-major enumeration order (factor 0 slowest). The space
//! hash is SHA-256 over the outcome labels and the exact probability bits,
//! so a value array can never be applied to the wrong space silently.
//!
//! CSV numbers are printed with 17 significant digits and parse back to the
//! identical `f64`; every output file starts with `#`-prefixed metadata
//! lines and is written atomically (temp file + rename).

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use noise_core::efron_stein::Decomposition;
use noise_core::{Complex64, FactorSpace, ProductSpace, RandomVariable, SubsetIndex};

/// One factor as stored on disk. Outcome labels may be any JSON scalars;
/// non-strings are canonicalized to their JSON text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorDto {
    pub outcomes: Vec<serde_json::Value>,
    pub probs: Vec<f64>,
}

/// The space schema: `{"factors": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDto {
    pub factors: Vec<FactorDto>,
}

impl SpaceDto {
    pub fn to_factors(&self) -> Vec<FactorSpace> {
        self.factors
            .iter()
            .map(|f| {
                let outcomes = f
                    .outcomes
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                FactorSpace::new(outcomes, f.probs.clone())
            })
            .collect()
    }

    pub fn from_space(space: &ProductSpace) -> SpaceDto {
        SpaceDto {
            factors: space
                .factors()
                .iter()
                .map(|f| FactorDto {
                    outcomes: f
                        .outcomes
                        .iter()
                        .map(|s| serde_json::Value::String(s.clone()))
                        .collect(),
                    probs: f.probs.clone(),
                })
                .collect(),
        }
    }
}

/// The random-variable schema: a space guard hash plus `[re, im]` pairs in
/// enumeration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomVariableDto {
    pub space_hash: String,
    pub values: Vec<[f64; 2]>,
}

impl RandomVariableDto {
    pub fn from_rv(rv: &RandomVariable) -> RandomVariableDto {
        RandomVariableDto {
            space_hash: space_hash(rv.space()),
            values: rv.values().iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

/// Content hash of a space: SHA-256 over factor sizes, outcome labels, and
/// the IEEE-754 bits of each probability, with record separators.
pub fn space_hash(space: &ProductSpace) -> String {
    let mut hasher = Sha256::new();
    for factor in space.factors() {
        hasher.update((factor.len() as u64).to_le_bytes());
        for label in &factor.outcomes {
            hasher.update(label.as_bytes());
            hasher.update([0x1f]);
        }
        for &p in &factor.probs {
            hasher.update(p.to_bits().to_le_bytes());
        }
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}

/// Metadata embedded at the head of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: String,
    pub space_hash: String,
    pub seed: u64,
    pub tol: f64,
}

impl Meta {
    pub fn new(space_hash: String, seed: u64, tol: f64) -> Meta {
        Meta {
            tool: format!("noise-lab {}", env!("CARGO_PKG_VERSION")),
            space_hash,
            seed,
            tol,
        }
    }

    /// The `#`-prefixed header lines for CSV outputs.
    pub fn csv_header(&self) -> String {
        format!(
            "# tool: {}\n# space_hash: {}\n# seed: {}\n# tol: {}\n",
            self.tool,
            self.space_hash,
            self.seed,
            fmt_f64(self.tol)
        )
    }
}

/// Serialized decomposition: metadata plus per-subset value arrays keyed by
/// the lowercase hex bitmask.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionDto {
    pub meta: Meta,
    pub components: BTreeMap<String, Vec<[f64; 2]>>,
}

impl DecompositionDto {
    /// Keep only components whose norm exceeds `drop_tol` (scaled by the
    /// input norm); a constant variable serializes to the single empty-set
    /// component.
    pub fn from_decomposition(d: &Decomposition, meta: Meta, drop_tol: f64) -> DecompositionDto {
        let total: f64 = d
            .components()
            .values()
            .map(|c| {
                let n = c.norm();
                n * n
            })
            .sum::<f64>()
            .sqrt();
        let threshold = drop_tol * total.max(1.0);
        let components = d
            .components()
            .iter()
            .filter(|(_, rv)| rv.norm() > threshold)
            .map(|(a, rv)| {
                (
                    format!("{:x}", a.bits()),
                    rv.values().iter().map(|c| [c.re, c.im]).collect(),
                )
            })
            .collect();
        DecompositionDto { meta, components }
    }
}

/// Format a float with 17 significant digits (lossless round-trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Read and build a space from a JSON file.
pub fn read_space(path: &Path, max_states: usize) -> Result<Arc<ProductSpace>, crate::CliError> {
    let text = fs::read_to_string(path)?;
    let dto: SpaceDto = serde_json::from_str(&text)
        .map_err(|e| crate::CliError::Parse(format!("{}: {e}", path.display())))?;
    ProductSpace::with_max_states(dto.to_factors(), max_states).map_err(Into::into)
}

/// Read a random variable and bind it to an already-built space, verifying
/// the guard hash and the value count.
pub fn read_rv(path: &Path, space: &Arc<ProductSpace>) -> Result<RandomVariable, crate::CliError> {
    let text = fs::read_to_string(path)?;
    let dto: RandomVariableDto = serde_json::from_str(&text)
        .map_err(|e| crate::CliError::Parse(format!("{}: {e}", path.display())))?;
    let expected = space_hash(space);
    if dto.space_hash != expected {
        return Err(crate::CliError::Validation(format!(
            "{}: space_hash {} does not match the space ({})",
            path.display(),
            dto.space_hash,
            expected
        )));
    }
    let values = dto
        .values
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    RandomVariable::new(Arc::clone(space), values).map_err(Into::into)
}

/// Write a file atomically: contents land under a temporary name and are
/// renamed into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| String::from("out"));
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Hex key used in decomposition files.
pub fn subset_key(a: SubsetIndex) -> String {
    format!("{:x}", a.bits())
}
