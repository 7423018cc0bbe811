//! Parsers for the small CLI sublanguages: time grids, tower specs, and
//! truncation ranges.

use noise_core::towers::{Partition, Tower};
use noise_core::SubsetIndex;

use crate::CliError;

/// Parse `"a"` (one point) or `"start:step:stop"` (strictly increasing,
/// inclusive of `stop` up to rounding).
pub fn t_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |msg: &str| CliError::Parse(format!("t grid '{spec}': {msg}"));
    match parts.as_slice() {
        [single] => {
            let t: f64 = single.trim().parse().map_err(|_| bad("not a number"))?;
            if t < 0.0 {
                return Err(bad("time must be nonnegative"));
            }
            Ok(vec![t])
        }
        [start, step, stop] => {
            let start: f64 = start.trim().parse().map_err(|_| bad("bad start"))?;
            let step: f64 = step.trim().parse().map_err(|_| bad("bad step"))?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad("bad stop"))?;
            if start < 0.0 {
                return Err(bad("start must be nonnegative"));
            }
            if step <= 0.0 {
                return Err(bad("step must be positive"));
            }
            if stop < start {
                return Err(bad("stop must not precede start"));
            }
            let mut grid = Vec::new();
            let mut i = 0u64;
            loop {
                let t = start + step * i as f64;
                if t > stop + step * 1e-9 {
                    break;
                }
                grid.push(t);
                i += 1;
            }
            Ok(grid)
        }
        _ => Err(bad("expected 't' or 'start:step:stop'")),
    }
}

/// Parse a single nonnegative time.
pub fn single_t(spec: &str) -> Result<f64, CliError> {
    let grid = t_grid(spec)?;
    if grid.len() != 1 {
        return Err(CliError::Parse(format!(
            "expected a single time, got a grid '{spec}'"
        )));
    }
    Ok(grid[0])
}

/// Parse a tower spec like `"0,1|2;0|1|2"`: `;` separates stages (coarse
/// first), `|` separates blocks, `,` separates factor indices.
pub fn tower(spec: &str, factors: usize) -> Result<Tower, CliError> {
    let mut stages = Vec::new();
    for stage in spec.split(';') {
        let mut blocks = Vec::new();
        for block in stage.split('|') {
            let mut indices = Vec::new();
            for idx in block.split(',') {
                let idx = idx.trim();
                if idx.is_empty() {
                    continue;
                }
                let k: usize = idx.parse().map_err(|_| {
                    CliError::Parse(format!("tower '{spec}': '{idx}' is not a factor index"))
                })?;
                indices.push(k);
            }
            if indices.iter().any(|&k| k >= factors) {
                return Err(CliError::Validation(format!(
                    "tower '{spec}': factor index beyond {factors} factors"
                )));
            }
            blocks.push(SubsetIndex::from_indices(indices));
        }
        stages.push(Partition::new(factors, blocks).map_err(CliError::from)?);
    }
    Tower::new(stages).map_err(CliError::from)
}

/// Parse an inclusive truncation range `"2..10"` (or a single `"8"`).
pub fn m_range(spec: &str) -> Result<(usize, usize), CliError> {
    let bad = |msg: &str| CliError::Parse(format!("m range '{spec}': {msg}"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad("bad lower bound"))?;
        let hi: usize = hi
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad("bad upper bound"))?;
        if lo > hi {
            return Err(bad("lower bound exceeds upper bound"));
        }
        Ok((lo, hi))
    } else {
        let m: usize = spec.trim().parse().map_err(|_| bad("not an integer"))?;
        Ok((m, m))
    }
}
