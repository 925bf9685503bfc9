//! Self-checks runnable from the command line.

use std::sync::Arc;

use mimfd::duhamel::{residual_refinement_study, DuhamelCase};
use mimfd::fem::{Coefficients, Rect};
use mimfd::inversion::{finite_difference_gaps, generate_data, noise_rng, GradientMode, Objective, Truth};
use mimfd::solver::{convergence_study, Manufactured};
use mimfd::Field;
use rand::RngExt;

use crate::config::RunConfig;
use crate::presets::{FieldPreset, RhoPreset};
use crate::run::prepare;
use crate::CliError;

pub const SUITES: [&str; 3] = ["duhamel", "convergence", "gradient"];

pub const DUHAMEL_LEVELS: [(usize, usize); 3] = [(10, 40), (20, 80), (40, 160)];
pub const DUHAMEL_TOL: f64 = 5e-2;
pub const CONVERGENCE_LEVELS: [(usize, usize); 3] = [(10, 10), (20, 20), (40, 40)];
pub const MIN_ORDER: f64 = 0.9;
pub const GRADIENT_LEVELS: [(usize, usize); 2] = [(20, 20), (40, 40)];
pub const GRADIENT_TOL: f64 = 1e-2;

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub lines: Vec<String>,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn line(&mut self, s: String) {
        self.lines.push(s);
    }

    fn check(&mut self, ok: bool, what: String) {
        self.lines.push(format!("{} {what}", if ok { "PASS" } else { "FAIL" }));
        if !ok {
            self.failures.push(what);
        }
    }
}

pub fn example1_duhamel_case() -> DuhamelCase {
    DuhamelCase {
        domain: Rect::UNIT,
        coefficients: Coefficients::laplacian(),
        t_final: 1.5,
        q: 1.0,
        alpha: 0.5,
        rho: Arc::new(|t| RhoPreset::Example1.eval(t)),
        g: Arc::new(|x, y| FieldPreset::Example1.eval(x, y)),
    }
}

pub fn duhamel_suite() -> Result<SuiteReport, CliError> {
    let table = residual_refinement_study(&example1_duhamel_case(), &DUHAMEL_LEVELS)?;
    let mut r = SuiteReport::default();
    r.line("nx,steps,relative_residual".into());
    for row in &table.rows {
        let res = row.residual.map_or("degenerate".into(), |v| format!("{v:.6e}"));
        r.line(format!("{},{},{res}", row.nx, row.steps));
    }
    r.check(table.strictly_decreasing(), "residual strictly decreasing".into());
    let finest = table.rows.last().and_then(|row| row.residual);
    r.check(
        finest.is_some_and(|v| v <= DUHAMEL_TOL),
        format!("finest residual {finest:?} <= {DUHAMEL_TOL:e}"),
    );
    Ok(r)
}

pub fn convergence_suite() -> Result<SuiteReport, CliError> {
    let case = Manufactured {
        q: 1.0,
        alpha: 0.5,
        t_final: 1.0,
    };
    let rows = convergence_study(&case, &CONVERGENCE_LEVELS)?;
    let mut r = SuiteReport::default();
    r.line("nx,steps,error,order".into());
    for row in &rows {
        let order = row.order.map_or(String::new(), |o| format!("{o:.3}"));
        r.line(format!("{},{},{:.6e},{order}", row.nx, row.steps, row.error));
    }
    for row in rows.iter().skip(1) {
        let order = row.order.unwrap_or(f64::NAN);
        r.check(
            order >= MIN_ORDER,
            format!("order {order:.3} at nx={} >= {MIN_ORDER}", row.nx),
        );
    }
    Ok(r)
}

/// Relative FD gaps in three seeded random directions at one grid level.
pub fn gradient_gaps(nx: usize, steps: usize, mode: GradientMode) -> Result<Vec<f64>, CliError> {
    let config = RunConfig {
        nx,
        ny: nx,
        steps,
        ..RunConfig::example1()
    };
    let prepared = prepare(&config)?;
    let truth = Truth {
        g_true: &|x, y| config.g_true.eval(x, y),
        rho: &|t| config.rho.eval(t),
        initial: &|x, y| config.initial.eval(x, y),
    };
    let data = generate_data(&truth, &prepared.problem, 1)?;
    let objective = Objective::new(&prepared.problem, &data, config.beta)?.with_mode(mode);
    let nodes = prepared.system().node_count();
    let mut rng = noise_rng(config.seed, 7);
    let mut draw = |lo: f64, hi: f64| Field::from_vec((0..nodes).map(|_| rng.random_range(lo..hi)).collect());
    let g = draw(0.0, 1.0);
    let directions: Vec<Field> = (0..3).map(|_| draw(-1.0, 1.0)).collect();
    Ok(finite_difference_gaps(&objective, &g, &directions, 1e-3)?)
}

/// Gaps below this are floating-point cancellation in the difference quotient.
pub const ROUND_OFF_GAP: f64 = 1e-10;

/// The exact discrete gradient leaves only round-off, which has no trend.
pub fn gap_shrinks(coarse: f64, fine: f64) -> bool {
    fine < coarse || fine <= ROUND_OFF_GAP
}

pub fn gradient_suite() -> Result<SuiteReport, CliError> {
    let mut r = SuiteReport::default();
    r.line("nx,steps,gradient,gap_1,gap_2,gap_3".into());
    let mut discrete = Vec::new();
    let mut continuous = Vec::new();
    for (nx, steps) in GRADIENT_LEVELS {
        for mode in [GradientMode::Discrete, GradientMode::Continuous] {
            let gaps = gradient_gaps(nx, steps, mode)?;
            let cells: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
            let name = match mode {
                GradientMode::Discrete => "discrete",
                GradientMode::Continuous => "continuous",
            };
            r.line(format!("{nx},{steps},{name},{}", cells.join(",")));
            let worst = gaps.iter().fold(0.0_f64, |m, g| m.max(*g));
            match mode {
                GradientMode::Discrete => discrete.push(worst),
                GradientMode::Continuous => continuous.push(worst),
            }
        }
    }
    r.check(
        discrete[0] <= GRADIENT_TOL,
        format!("max gap {:.3e} at 20x20 <= {GRADIENT_TOL:e}", discrete[0]),
    );
    r.check(
        gap_shrinks(discrete[0], discrete[1]),
        format!("discrete gap shrinks or sits at round-off: {:.3e} -> {:.3e}", discrete[0], discrete[1]),
    );
    r.check(
        continuous[1] < continuous[0],
        format!("continuous-adjoint gap shrinks: {:.3e} -> {:.3e}", continuous[0], continuous[1]),
    );
    Ok(r)
}

pub fn run_suite(name: &str) -> Result<SuiteReport, CliError> {
    match name {
        "duhamel" => duhamel_suite(),
        "convergence" => convergence_suite(),
        "gradient" => gradient_suite(),
        _ => Err(CliError::Config(format!(
            "unknown suite {name:?}, expected one of {}",
            SUITES.join(", ")
        ))),
    }
}
