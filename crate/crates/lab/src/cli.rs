//! The `noise-lab` command-line interface.
//!
//! Exit codes: 0 success, 1 parse/IO failure, 2 validation failure,
//! 3 numerical-tolerance failure, 4 state-cap exceeded. Re-running a
//! command with identical inputs and seed produces byte-identical output;
//! nothing time- or environment-dependent is emitted.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use thiserror::Error;

use noise_core::efron_stein::{decompose, level_weights};
use noise_core::noise::{mc_noise_form, noise_quad_form, sensitivity_curves};
use noise_core::towers::check_monotone;
use noise_core::zp_walk::sensitivity_decay_table_with_max_states;
use noise_core::{ProductSpace, RandomVariable, MAX_STATES};

use crate::formats::{
    fmt_f64, read_rv, read_space, space_hash, write_atomic, DecompositionDto, Meta,
};
use crate::parse;

/// Environment variable overriding the dense state cap.
pub const MAX_STATES_ENV: &str = "NOISE_LAB_MAX_STATES";

const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input files or flag sublanguages (exit 1).
    #[error("{0}")]
    Parse(String),
    /// Violated invariants: bad probabilities, mismatched hashes, invalid
    /// partitions (exit 2).
    #[error("{0}")]
    Validation(String),
    /// A numerical identity failed its tolerance (exit 3).
    #[error("{0}")]
    Tolerance(String),
    /// The dense state cap or an enumeration budget was exceeded (exit 4).
    #[error("{0}")]
    Cap(String),
    /// Unreadable or unwritable files (exit 1).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Cap(_) => 4,
        }
    }
}

impl From<noise_core::Error> for CliError {
    fn from(e: noise_core::Error) -> Self {
        use noise_core::Error as E;
        match e {
            E::StateCapExceeded { .. }
            | E::TooManyFactors { .. }
            | E::SubsetEnumerationTooLarge { .. }
            | E::DecompositionTooLarge { .. } => CliError::Cap(e.to_string()),
            E::NotInH1 { .. } => CliError::Tolerance(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "noise-lab",
    version,
    about = "Noise semigroups and Efron-Stein decompositions on finite product spaces",
    after_help = "Exit codes: 1 parse, 2 validation, 3 numerical tolerance, 4 state cap.\n\
                  NOISE_LAB_MAX_STATES overrides the dense state cap (default 2^24).\n\
                  All outputs are deterministic given identical inputs and --seed."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a space file against the construction invariants.
    Validate {
        /// Space JSON: {"factors":[{"outcomes":[...],"probs":[...]}]}
        #[arg(long)]
        space: PathBuf,
    },
    /// Split a random variable into its orthogonal components; writes the
    /// component JSON to --out and the level weights to <out>.levels.csv.
    Decompose {
        #[arg(long)]
        space: PathBuf,
        /// Random-variable JSON: {"space_hash": "...", "values": [[re,im],...]}
        #[arg(long)]
        rv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Components with norm below tol (times the input norm) are dropped.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate t -> |X - U_t X|, |X| - |U_t X|, and <(I-U_t)X, X> on a grid.
    NoiseCurve {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        rv: PathBuf,
        /// A single time or a grid "start:step:stop", e.g. "0:0.1:3".
        #[arg(long)]
        t: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo estimate of <(I-U_t)X, X> by independent resampling.
    McNoise {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        rv: PathBuf,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional CSV destination (the estimate is always printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadratic forms of the coarse semigroup and generator along a tower.
    TowerCheck {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        rv: PathBuf,
        /// Stages separated by ';' (coarse first), blocks by '|', factor
        /// indices by ',': e.g. "0,1|2;0|1|2".
        #[arg(long)]
        tower: String,
        #[arg(long)]
        t: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sensitivity decay of the Z_p walk character, exact vs closed form.
    Walk {
        /// Odd modulus >= 3.
        #[arg(long)]
        p: u64,
        /// Truncation (number of walk positions).
        #[arg(long)]
        m: usize,
        #[arg(long)]
        t: String,
        /// Optional truncation range "lo..hi" overriding --m for the table.
        #[arg(long)]
        table: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn state_cap() -> Result<usize, CliError> {
    match std::env::var(MAX_STATES_ENV) {
        Ok(raw) => raw
            .parse()
            .map_err(|_| CliError::Parse(format!("{MAX_STATES_ENV}='{raw}' is not a state count"))),
        Err(_) => Ok(MAX_STATES),
    }
}

fn load_inputs(
    space_path: &Path,
    rv_path: &Path,
) -> Result<(Arc<ProductSpace>, RandomVariable), CliError> {
    let space = read_space(space_path, state_cap()?)?;
    let rv = read_rv(rv_path, &space)?;
    Ok((space, rv))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { space } => cmd_validate(&space),
        Command::Decompose {
            space,
            rv,
            out,
            tol,
            seed,
        } => cmd_decompose(&space, &rv, &out, tol, seed),
        Command::NoiseCurve {
            space,
            rv,
            t,
            out,
            tol,
            seed,
        } => cmd_noise_curve(&space, &rv, &t, &out, tol, seed),
        Command::McNoise {
            space,
            rv,
            t,
            samples,
            seed,
            out,
        } => cmd_mc_noise(&space, &rv, &t, samples, seed, out.as_deref()),
        Command::TowerCheck {
            space,
            rv,
            tower,
            t,
            out,
            tol,
            seed,
        } => cmd_tower_check(&space, &rv, &tower, &t, &out, tol, seed),
        Command::Walk {
            p,
            m,
            t,
            table,
            out,
            tol,
            seed,
        } => cmd_walk(p, m, &t, table.as_deref(), &out, tol, seed),
    }
}

fn cmd_validate(space_path: &Path) -> Result<(), CliError> {
    let space = read_space(space_path, state_cap()?)?;
    println!(
        "ok: {} factors, {} states, hash {}",
        space.factor_count(),
        space.total_states(),
        space_hash(&space)
    );
    Ok(())
}

fn cmd_decompose(
    space_path: &Path,
    rv_path: &Path,
    out: &Path,
    tol: f64,
    seed: u64,
) -> Result<(), CliError> {
    let (space, x) = load_inputs(space_path, rv_path)?;
    let d = decompose(&x)?;
    let meta = Meta::new(space_hash(&space), seed, tol);
    let dto = DecompositionDto::from_decomposition(&d, meta.clone(), tol);
    write_atomic(out, &serde_json::to_string_pretty(&dto).map_err(io_ser)?)?;

    let weights = level_weights(&x)?;
    let mut csv = meta.csv_header();
    csv.push_str("level,weight\n");
    for (level, w) in weights.iter().enumerate() {
        csv.push_str(&format!("{level},{}\n", fmt_f64(*w)));
    }
    let levels_path = out.with_extension("levels.csv");
    write_atomic(&levels_path, &csv)?;

    println!(
        "wrote {} ({} components kept) and {}",
        out.display(),
        dto.components.len(),
        levels_path.display()
    );
    Ok(())
}

fn cmd_noise_curve(
    space_path: &Path,
    rv_path: &Path,
    t_spec: &str,
    out: &Path,
    tol: f64,
    seed: u64,
) -> Result<(), CliError> {
    let (space, x) = load_inputs(space_path, rv_path)?;
    let grid = parse::t_grid(t_spec)?;
    let curve = sensitivity_curves(&x, &grid)?;
    // The three functionals are nonnegative and nondecreasing; a violation
    // beyond tolerance means the spectral evaluation went numerically wrong.
    for i in 0..grid.len() {
        let values = [curve.dist[i], curve.norm_drop[i], curve.quad_form[i]];
        if values.iter().any(|v| *v < -tol) {
            return Err(CliError::Tolerance(format!(
                "negative functional at t={}",
                grid[i]
            )));
        }
        if i > 0
            && (curve.dist[i] < curve.dist[i - 1] - tol
                || curve.norm_drop[i] < curve.norm_drop[i - 1] - tol
                || curve.quad_form[i] < curve.quad_form[i - 1] - tol)
        {
            return Err(CliError::Tolerance(format!(
                "functional decreased between t={} and t={}",
                grid[i - 1],
                grid[i]
            )));
        }
    }
    let meta = Meta::new(space_hash(&space), seed, tol);
    let mut csv = meta.csv_header();
    csv.push_str("t,dist,norm_drop,quad_form\n");
    for (i, t) in grid.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(*t),
            fmt_f64(curve.dist[i]),
            fmt_f64(curve.norm_drop[i]),
            fmt_f64(curve.quad_form[i])
        ));
    }
    write_atomic(out, &csv)?;
    println!("wrote {} ({} grid points)", out.display(), grid.len());
    Ok(())
}

fn cmd_mc_noise(
    space_path: &Path,
    rv_path: &Path,
    t_spec: &str,
    samples: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (space, x) = load_inputs(space_path, rv_path)?;
    let t = parse::single_t(t_spec)?;
    let est = mc_noise_form(&x, t, samples, seed)?;
    println!("estimate: {}", fmt_f64(est.estimate));
    println!("std_error: {}", fmt_f64(est.std_error));
    println!("samples: {}", est.samples);
    let exact = if space.factor_count() <= 12 {
        let exact = noise_quad_form(&x, t)?;
        println!("exact: {}", fmt_f64(exact));
        exact
    } else {
        f64::NAN
    };
    if let Some(out) = out {
        let meta = Meta::new(space_hash(&space), seed, DEFAULT_TOL);
        let mut csv = meta.csv_header();
        csv.push_str("t,estimate,std_error,samples,exact\n");
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(t),
            fmt_f64(est.estimate),
            fmt_f64(est.std_error),
            est.samples,
            fmt_f64(exact)
        ));
        write_atomic(out, &csv)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_tower_check(
    space_path: &Path,
    rv_path: &Path,
    tower_spec: &str,
    t_spec: &str,
    out: &Path,
    tol: f64,
    seed: u64,
) -> Result<(), CliError> {
    let (space, x) = load_inputs(space_path, rv_path)?;
    let t = parse::single_t(t_spec)?;
    let tower = parse::tower(tower_spec, space.factor_count())?;

    use noise_core::towers::{coarse_generator_apply, coarse_noise_operator};
    let mut csv = Meta::new(space_hash(&space), seed, tol).csv_header();
    csv.push_str("stage,n_form,ut_form\n");
    for (i, p) in tower.stages().iter().enumerate() {
        let n_form = coarse_generator_apply(&x, p)?.inner(&x)?.re;
        let ut_form = coarse_noise_operator(&x, p, t)?.inner(&x)?.re;
        csv.push_str(&format!("{i},{},{}\n", fmt_f64(n_form), fmt_f64(ut_form)));
    }
    write_atomic(out, &csv)?;
    println!("wrote {} ({} stages)", out.display(), tower.stages().len());

    for pair in tower.stages().windows(2) {
        let report = check_monotone(&x, t, &pair[0], &pair[1], tol)?;
        if !report.ordered() {
            return Err(CliError::Tolerance(format!(
                "monotonicity violated: U forms {} -> {}, N forms {} -> {}",
                fmt_f64(report.coarse_ut_form),
                fmt_f64(report.fine_ut_form),
                fmt_f64(report.coarse_n_form),
                fmt_f64(report.fine_n_form)
            )));
        }
    }
    Ok(())
}

fn cmd_walk(
    p: u64,
    m: usize,
    t_spec: &str,
    table: Option<&str>,
    out: &Path,
    tol: f64,
    seed: u64,
) -> Result<(), CliError> {
    let t = parse::single_t(t_spec)?;
    let (m_lo, m_hi) = match table {
        Some(spec) => parse::m_range(spec)?,
        None => (m, m),
    };
    let cap = state_cap()?;
    let rows = sensitivity_decay_table_with_max_states(p, t, m_lo, m_hi, cap)?;
    for row in &rows {
        if (row.exact - row.closed_form).abs() > tol {
            return Err(CliError::Tolerance(format!(
                "m={}: exact norm {} differs from closed form {}",
                row.m,
                fmt_f64(row.exact),
                fmt_f64(row.closed_form)
            )));
        }
    }

    let hash = {
        let ws = noise_core::zp_walk::WalkSpace::with_max_states(p, m_hi, cap)?;
        space_hash(ws.space())
    };
    let meta = Meta::new(hash, seed, tol);
    let mut csv = meta.csv_header();
    csv.push_str(&format!("# p: {p}\n# t: {}\n", fmt_f64(t)));
    csv.push_str("m,exact,closed_form,ratio,increment_norm\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.m,
            fmt_f64(row.exact),
            fmt_f64(row.closed_form),
            fmt_f64(row.ratio),
            fmt_f64(row.increment_norm)
        ));
    }
    write_atomic(out, &csv)?;
    println!("wrote {} ({} rows)", out.display(), rows.len());
    // H1 of the finite truncation splits into the limit part (increments)
    // and the endpoint part that exists only at finite m.
    println!(
        "h1 at m={m_hi}: {} increment directions (limit), {} endpoint directions (finite truncation only)",
        m_hi - 1,
        p - 1
    );
    Ok(())
}

fn io_ser(e: serde_json::Error) -> std::io::Error {
    std::io::Error::other(e)
}
