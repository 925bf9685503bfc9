//! Noise-seed sweeps over the rows of the three reconstruction tables.
//!
//! Every row is run for each seed and each β in [`BETAS`]; the β kept for a
//! seed is the discrepancy-principle pick. Seeds share noise streams across
//! rows and β values, so rows differing only in ε see the same random draws.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mimfd::inversion::{add_noise, discrepancy_pick, expected_noise_misfit, noise_rng, DirectionMode, ObservationData};
use rayon::prelude::*;

use crate::config::{fmt, RunConfig};
use crate::presets::FieldPreset;
use crate::run::{invert, observations, prepare, Prepared};
use crate::{io_err, CliError};

pub const BETAS: [f64; 4] = [1e-6, 1e-5, 1e-4, 1e-3];

/// Misfit may exceed the expected noise level by this factor (squared).
pub const DISCREPANCY_TAU: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table {
    Noise,
    Order,
    Source,
}

impl Table {
    pub fn from_number(n: u32) -> Result<Self, CliError> {
        match n {
            1 => Ok(Self::Noise),
            2 => Ok(Self::Order),
            3 => Ok(Self::Source),
            _ => Err(CliError::Config(format!("no table {n}, expected 1, 2 or 3"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Self::Noise => 1,
            Self::Order => 2,
            Self::Source => 3,
        }
    }

    fn label_columns(self) -> &'static str {
        match self {
            Self::Noise => "noise,frame_a,frame_b",
            Self::Order => "alpha,frame_a,frame_b",
            Self::Source => "g_true",
        }
    }

    /// Row labels and configs derived from `base`.
    pub fn rows(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        let with = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        let frame_label = |c: &RunConfig| format!("{},{}", fmt(c.frame.0), fmt(c.frame.1));
        match self {
            Self::Noise => [(1.0, 0.1), (3.0, 0.1), (5.0, 0.1), (1.0, 0.2), (1.0, 0.1), (1.0, 0.05)]
                .into_iter()
                .map(|(eps, a)| {
                    let c = with(&|c| {
                        c.noise = eps;
                        c.frame = (a, 1.0 - a);
                    });
                    (format!("{},{}", fmt(eps), frame_label(&c)), c)
                })
                .collect(),
            Self::Order => [0.3, 0.6, 0.9]
                .into_iter()
                .map(|alpha| {
                    let c = with(&|c| {
                        c.alpha = alpha;
                        c.noise = 2.0;
                        c.frame = (0.05, 0.95);
                    });
                    (format!("{},{}", fmt(alpha), frame_label(&c)), c)
                })
                .collect(),
            Self::Source => [FieldPreset::Example2a, FieldPreset::Example2b, FieldPreset::Example2c]
                .into_iter()
                .map(|g| {
                    let c = with(&|c| {
                        c.g_true = g;
                        c.noise = 1.0;
                        c.frame = (0.05, 0.95);
                    });
                    (g.name().to_string(), c)
                })
                .collect(),
        }
    }
}

/// Base configuration for the sweeps: Example 1 with conjugate directions.
pub fn default_base() -> RunConfig {
    RunConfig {
        direction: DirectionMode::FletcherReeves,
        ..RunConfig::example1()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaRun {
    pub beta: f64,
    pub error: f64,
    pub loss: f64,
    pub misfit: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub row: usize,
    pub seed: usize,
    pub delta_sq: f64,
    pub runs: Vec<BetaRun>,
    pub pick: usize,
}

impl SeedRun {
    pub fn picked(&self) -> &BetaRun {
        &self.runs[self.pick]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSummary {
    pub label: String,
    pub error_mean: f64,
    pub error_std: f64,
    pub loss_mean: f64,
    pub loss_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableResult {
    pub table: Table,
    pub rows: Vec<RowSummary>,
    pub seeds: Vec<SeedRun>,
}

/// Mean and sample standard deviation; the spread of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_seed(
    row: usize,
    seed: usize,
    base_seed: u64,
    prepared: &Prepared,
    clean: &ObservationData,
) -> Result<SeedRun, CliError> {
    let config = &prepared.config;
    let mut rng = noise_rng(base_seed, seed as u64);
    let u_d = add_noise(
        &clean.u_d,
        &clean.mask,
        prepared.system().mesh(),
        config.noise,
        &mut rng,
    )?;
    let data = ObservationData {
        u_d,
        mask: clean.mask.clone(),
        noise_percent: config.noise,
    };
    let delta_sq = expected_noise_misfit(&prepared.problem, &data)?;
    let mut runs = Vec::with_capacity(BETAS.len());
    for beta in BETAS {
        let mut p = prepared.clone();
        p.config.beta = beta;
        let outcome = invert(&p, &data)?;
        runs.push(BetaRun {
            beta,
            error: outcome.error,
            loss: outcome.loss,
            misfit: outcome.state.misfit_cost,
            iterations: outcome.state.iterations(),
        });
    }
    let candidates: Vec<(f64, f64)> = runs.iter().map(|r| (r.beta, r.misfit)).collect();
    let pick = discrepancy_pick(&candidates, delta_sq, DISCREPANCY_TAU)?;
    Ok(SeedRun {
        row,
        seed,
        delta_sq,
        runs,
        pick,
    })
}

/// Runs every row × seed job on a pool of `jobs` threads (0 = all cores).
pub fn run_table(table: Table, base: &RunConfig, seeds: usize, base_seed: u64, jobs: usize) -> Result<TableResult, CliError> {
    if seeds == 0 {
        return Err(CliError::Config("seeds must be at least 1".into()));
    }
    let rows = table.rows(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let prepared: Vec<(Prepared, ObservationData)> = rows
            .par_iter()
            .map(|(_, c)| {
                let mut clean_config = c.clone();
                clean_config.noise = 0.0;
                let p = prepare(c)?;
                let clean = observations(&Prepared {
                    config: clean_config,
                    ..p.clone()
                })?;
                Ok((p, clean))
            })
            .collect::<Result<_, CliError>>()?;
        let jobs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|r| (0..seeds).map(move |s| (r, s))).collect();
        let seed_runs: Vec<SeedRun> = jobs
            .par_iter()
            .map(|&(r, s)| run_seed(r, s, base_seed, &prepared[r].0, &prepared[r].1))
            .collect::<Result<_, CliError>>()?;
        let summaries = rows
            .iter()
            .enumerate()
            .map(|(r, (label, _))| {
                let picked: Vec<&BetaRun> = seed_runs.iter().filter(|s| s.row == r).map(SeedRun::picked).collect();
                let errors: Vec<f64> = picked.iter().map(|b| b.error).collect();
                let losses: Vec<f64> = picked.iter().map(|b| b.loss).collect();
                let (error_mean, error_std) = mean_std(&errors);
                let (loss_mean, loss_std) = mean_std(&losses);
                RowSummary {
                    label: label.clone(),
                    error_mean,
                    error_std,
                    loss_mean,
                    loss_std,
                }
            })
            .collect();
        Ok(TableResult {
            table,
            rows: summaries,
            seeds: seed_runs,
        })
    })
}

impl TableResult {
    pub fn summary_csv(&self) -> String {
        let mut s = format!("{},Error_mean,Error_std,Loss_mean,Loss_std\n", self.table.label_columns());
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6e},{:.6e},{:.6e},{:.6e}",
                r.label, r.error_mean, r.error_std, r.loss_mean, r.loss_std
            );
        }
        s
    }

    pub fn detail_csv(&self) -> String {
        let mut s = String::from("row,seed,beta,Error,Loss,misfit,delta_sq,iterations,picked\n");
        for sr in &self.seeds {
            for (i, b) in sr.runs.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{:.1e},{:.6e},{:.6e},{:.6e},{:.6e},{},{}",
                    sr.row,
                    sr.seed,
                    b.beta,
                    b.error,
                    b.loss,
                    b.misfit,
                    sr.delta_sq,
                    b.iterations,
                    u8::from(i == sr.pick)
                );
            }
        }
        s
    }

    /// Writes `tableN.csv` and `tableN_detail.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let n = self.table.number();
        let mut written = Vec::new();
        for (name, text) in [
            (format!("table{n}.csv"), self.summary_csv()),
            (format!("table{n}_detail.csv"), self.detail_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_layouts() {
        let base = default_base();
        assert_eq!(Table::Noise.rows(&base).len(), 6);
        let order = Table::Order.rows(&base);
        assert_eq!(order.len(), 3);
        assert!(order.iter().all(|(_, c)| c.noise == 2.0 && c.frame == (0.05, 0.95)));
        assert_eq!(order[2].0, "0.9,0.05,0.95");
        let source = Table::Source.rows(&base);
        assert_eq!(source[0].0, "example2a");
        assert_eq!(Table::Noise.rows(&base)[3].1.frame, (0.2, 0.8));
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_seeds_rejected() {
        let err = run_table(Table::Order, &default_base(), 0, 0, 1).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_table_rejected() {
        assert!(Table::from_number(4).is_err());
        assert_eq!(Table::from_number(2).unwrap(), Table::Order);
    }
}
