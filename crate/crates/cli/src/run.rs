use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mimfd::fem::{
    assemble, build_mesh, mask_from_frame, project_function, read_field_csv, write_field_csv, AssembledSystem,
};
use mimfd::fractime::{TimeGrid, TimeSeries};
use mimfd::inversion::{
    add_noise, generate_data, noise_rng, reconstruct, relative_error, InversionState, ObservationData, StopReason,
    Truth,
};
use mimfd::solver::{solve_forward, write_space_time_field, ForwardModel, ModelProblem};
use mimfd::{Field, SpaceTimeField};

use crate::config::{fmt, RunConfig};
use crate::{io_err, CliError};

/// Assembled model, problem data and the true source for one config.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub problem: ModelProblem,
    pub g_true: Field,
}

impl Prepared {
    pub fn system(&self) -> &AssembledSystem {
        self.problem.model.system()
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    config.validate()?;
    let mesh = build_mesh(config.nx, config.ny, config.domain)?;
    let mask = mask_from_frame(&mesh, config.frame.0, config.frame.1)?;
    let system = assemble(&mesh, &config.coefficients.build(), &mask)?;
    let grid = TimeGrid::new(config.t_final, config.steps)?;
    let model = ForwardModel::new(Arc::new(system), grid, config.q, config.alpha)?;
    let rho = TimeSeries::from_fn(grid, |t| config.rho.eval(t));
    let g_true = project_function(&mesh, |x, y| config.g_true.eval(x, y));
    let initial = project_function(&mesh, |x, y| config.initial.eval(x, y));
    model
        .check_initial(&initial)
        .map_err(|e| CliError::Config(format!("initial: {e}")))?;
    let problem = ModelProblem::new(Arc::new(model), rho, g_true.clone(), initial)?;
    Ok(Prepared {
        config: config.clone(),
        problem,
        g_true,
    })
}

fn output_dir(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    out.map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set out".into()))
}

fn with_out(config: &RunConfig, dir: &Path) -> RunConfig {
    RunConfig {
        out: Some(dir.to_path_buf()),
        ..config.clone()
    }
}

fn manifest_pairs(config: &RunConfig) -> Vec<(String, String)> {
    config
        .to_manifest()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Solves the forward problem with `g_true` and writes the frames.
pub fn cmd_forward(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let prepared = prepare(config)?;
    let dir = output_dir(config, out)?;
    let u = solve_forward(&prepared.problem)?;
    let recorded = with_out(config, &dir);
    write_space_time_field(&dir, prepared.system(), &u, &manifest_pairs(&recorded)).map_err(|e| match e {
        mimfd::Error::Io(source) => CliError::Io {
            path: dir.clone(),
            source,
        },
        other => other.into(),
    })?;
    Ok(dir)
}

/// Observations: loaded from `config.data` or synthesized, then noised.
pub fn observations(prepared: &Prepared) -> Result<ObservationData, CliError> {
    let config = &prepared.config;
    let system = prepared.system();
    let clean = match &config.data {
        Some(dir) => ObservationData {
            u_d: load_frames(dir, prepared)?,
            mask: system.mask().clone(),
            noise_percent: 0.0,
        },
        None => {
            let truth = Truth {
                g_true: &|x, y| config.g_true.eval(x, y),
                rho: &|t| config.rho.eval(t),
                initial: &|x, y| config.initial.eval(x, y),
            };
            generate_data(&truth, &prepared.problem, config.refine)?
        }
    };
    let mut rng = noise_rng(config.seed, 0);
    let u_d = add_noise(&clean.u_d, &clean.mask, system.mesh(), config.noise, &mut rng)?;
    Ok(ObservationData {
        u_d,
        mask: clean.mask,
        noise_percent: config.noise,
    })
}

fn load_frames(dir: &Path, prepared: &Prepared) -> Result<SpaceTimeField, CliError> {
    let grid = *prepared.problem.model.grid();
    let mesh = prepared.system().mesh();
    let mut frames = Vec::with_capacity(grid.steps() + 1);
    for n in 0..=grid.steps() {
        let path = dir.join(format!("frame_{n:04}.csv"));
        if !path.exists() {
            return Err(CliError::Io {
                path,
                source: std::io::ErrorKind::NotFound.into(),
            });
        }
        let csv = read_field_csv(&path)?;
        let matches = csv.coords.len() == mesh.node_count()
            && csv
                .coords
                .iter()
                .zip(mesh.nodes())
                .all(|(a, b)| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        if !matches {
            return Err(CliError::Config(format!(
                "data: {} does not match the configured mesh",
                path.display()
            )));
        }
        frames.push(csv.field);
    }
    Ok(SpaceTimeField::new(grid, frames)?)
}

#[derive(Clone, Debug)]
pub struct InvertOutcome {
    pub g_rec: Field,
    pub state: InversionState,
    pub error: f64,
    pub loss: f64,
}

/// Reconstruction only, no files.
pub fn invert(prepared: &Prepared, data: &ObservationData) -> Result<InvertOutcome, CliError> {
    let config = &prepared.config;
    let mut inv = config.inverse_config();
    let mesh = prepared.system().mesh();
    inv.initial_guess = Some(project_function(mesh, |x, y| config.initial_guess.eval(x, y)));
    let (g_rec, state) = reconstruct(&inv, &prepared.problem, data)?;
    let error = relative_error(&g_rec, &prepared.g_true, prepared.system().mass())?;
    let loss = state.final_cost();
    Ok(InvertOutcome {
        g_rec,
        state,
        error,
        loss,
    })
}

pub fn history_csv(state: &InversionState) -> String {
    let mut s = String::from("iteration,cost,grad_norm,step\n");
    for h in &state.history {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", h.iteration, h.cost, h.grad_norm, h.step);
    }
    s
}

pub fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::GradientTolerance => "gradient-tolerance",
        StopReason::MaxIterations => "max-iterations",
        StopReason::LineSearchFailed => "line-search-failed",
    }
}

/// Runs the reconstruction and writes `g_rec.csv`, `g_true.csv`,
/// `history.csv`, `summary.csv` and `manifest.txt`.
pub fn cmd_invert(config: &RunConfig, out: Option<&Path>) -> Result<InvertOutcome, CliError> {
    let prepared = prepare(config)?;
    let dir = output_dir(config, out)?;
    let data = observations(&prepared)?;
    let outcome = invert(&prepared, &data)?;
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mesh = prepared.system().mesh();
    write_field_csv(dir.join("g_rec.csv"), mesh, &outcome.g_rec)?;
    write_field_csv(dir.join("g_true.csv"), mesh, &prepared.g_true)?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(path))
    };
    write("history.csv", history_csv(&outcome.state))?;
    let mut summary = String::from("noise,frame_a,frame_b,alpha,beta,Error,Loss,misfit,iterations,stop\n");
    let _ = writeln!(
        summary,
        "{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{}",
        fmt(config.noise),
        fmt(config.frame.0),
        fmt(config.frame.1),
        fmt(config.alpha),
        fmt(config.beta),
        outcome.error,
        outcome.loss,
        outcome.state.misfit_cost,
        outcome.state.iterations(),
        stop_name(outcome.state.stop)
    );
    write("summary.csv", summary)?;
    write("manifest.txt", with_out(config, &dir).to_manifest())?;
    if outcome.state.stop == StopReason::LineSearchFailed {
        return Err(CliError::LineSearch {
            iterations: outcome.state.iterations(),
        });
    }
    Ok(outcome)
}
