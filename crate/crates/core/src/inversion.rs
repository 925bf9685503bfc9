//! Recovery of the spatial source `g` from observations of `u` on `ω × (0, T)`.
//!
//! The objective is the Tikhonov functional
//!
//! ```text
//! 𝒥(g) = ½ ∫₀ᵀ ∫_ω (u(g) − u_d)² + β/2 ∫_Ω g²
//! ```
//!
//! discretized with trapezoid weights in time and `M_ω`, `M` in space. Its
//! L² gradient is `∫₀ᵀ ρ v dt + β g` where `v` solves the adjoint problem
//! driven by `𝟙_ω (u − u_d)`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{assemble, build_mesh, project_function, CsrMatrix, Mesh, ObservationMask, SpdFactor};
use crate::field::{Field, SpaceTimeField};
use crate::fractime::{TimeGrid, TimeSeries};
use crate::solver::{solve_forward, ForwardModel, ModelProblem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Armijo {
    /// Sufficient-decrease factor c₁.
    pub c1: f64,
    /// Step reduction per backtrack.
    pub ratio: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            ratio: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionMode {
    SteepestDescent,
    FletcherReeves,
}

/// How the adjoint field is turned into a gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMode {
    /// Exact gradient of the discrete cost. The adjoint is the same reversed
    /// solve, driven by the misfit shifted one level with the terminal level
    /// carrying its trapezoid half weight.
    Discrete,
    /// Adjoint driven by the unshifted misfit, `∫ ρ v` by the trapezoid rule.
    /// Consistent with the discrete cost only to O(τ).
    Continuous,
}

/// Unknowns the descent loop moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlSpace {
    /// Every nodal value. The L² gradient vanishes on ∂Ω, so boundary values
    /// stay at the initial guess.
    Nodal,
    /// Interior values only; each boundary node copies its inward neighbour
    /// (diagonal at corners).
    Constant,
    /// Interior values only; boundary values follow by linear extrapolation
    /// along the inward grid line.
    Extrapolated,
}

/// First trial step of each line search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStart {
    /// Always `Armijo::initial_step`.
    Fixed,
    /// Minimizer of the quadratic model along the direction. The cost is
    /// quadratic in g, so one sensitivity solve gives it exactly.
    Quadratic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseConfig {
    pub beta: f64,
    /// Box bound of the admissible set; `None` leaves g unconstrained.
    pub g_max: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: Armijo,
    pub step_start: StepStart,
    pub direction: DirectionMode,
    pub gradient: GradientMode,
    pub control: ControlSpace,
    /// Starting iterate; zero when `None`.
    pub initial_guess: Option<Field>,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            beta: 1e-5,
            g_max: None,
            max_iters: 100,
            grad_tol: 1e-6,
            armijo: Armijo::default(),
            step_start: StepStart::Quadratic,
            direction: DirectionMode::SteepestDescent,
            gradient: GradientMode::Discrete,
            control: ControlSpace::Constant,
            initial_guess: None,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(a.c1 > 0.0 && a.c1 < 1.0) {
            return Err(Error::domain(format!("Armijo c1 must lie in (0, 1), got {}", a.c1)));
        }
        if !(a.ratio > 0.0 && a.ratio < 1.0) {
            return Err(Error::domain(format!(
                "backtrack ratio must lie in (0, 1), got {}",
                a.ratio
            )));
        }
        if !(a.initial_step > 0.0 && a.initial_step.is_finite()) {
            return Err(Error::domain("initial step must be positive"));
        }
        if let Some(m) = self.g_max {
            if !(m > 0.0) {
                return Err(Error::domain(format!("g_max must be positive, got {m}")));
            }
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::domain("gradient tolerance must be nonnegative"));
        }
        Ok(())
    }

    fn project(&self, g: &mut Field) {
        if let Some(m) = self.g_max {
            for v in g.iter_mut() {
                *v = v.clamp(-m, m);
            }
        }
    }
}

/// Measurements on ω; values outside ω are never read.
#[derive(Clone, Debug)]
pub struct ObservationData {
    pub u_d: SpaceTimeField,
    pub mask: ObservationMask,
    /// Noise level ε in percent.
    pub noise_percent: f64,
}

/// `Σₙ wₙ eₙᵀ W eₙ` with trapezoid weights.
fn time_quadrature(grid: &TimeGrid, e: &SpaceTimeField, w: &CsrMatrix) -> f64 {
    e.frames()
        .iter()
        .enumerate()
        .map(|(n, f)| grid.trapezoid_weight(n) * w.bilinear(f, f))
        .sum()
}

fn check_data(problem: &ModelProblem, data: &ObservationData) -> Result<()> {
    let model = &problem.model;
    model.grid().check_same(data.u_d.grid())?;
    if data.u_d.node_count() != model.system().node_count() {
        return Err(Error::Dimension {
            expected: model.system().node_count(),
            found: data.u_d.node_count(),
        });
    }
    if &data.mask != model.system().mask() {
        return Err(Error::domain(
            "observation mask differs from the one the system was assembled with",
        ));
    }
    Ok(())
}

/// One objective evaluation with everything the descent loop needs.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub cost: f64,
    pub misfit_cost: f64,
    pub gradient: Field,
}

/// The Tikhonov objective bound to a forward problem and data set.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    problem: &'a ModelProblem,
    data: &'a ObservationData,
    beta: f64,
    mode: GradientMode,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a ModelProblem, data: &'a ObservationData, beta: f64) -> Result<Self> {
        check_data(problem, data)?;
        Ok(Self {
            problem,
            data,
            beta,
            mode: GradientMode::Discrete,
        })
    }

    pub fn with_mode(self, mode: GradientMode) -> Self {
        Self { mode, ..self }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn model(&self) -> &ForwardModel {
        &self.problem.model
    }

    fn misfit(&self, g: &Field) -> Result<SpaceTimeField> {
        let u = solve_forward(&self.problem.with_source(g.clone()))?;
        u.sub(&self.data.u_d)
    }

    fn regularization(&self, g: &Field) -> f64 {
        0.5 * self.beta * self.model().system().mass().bilinear(g, g)
    }

    /// Data term `½ ∫∫_ω (u − u_d)²` alone.
    pub fn misfit_cost(&self, g: &Field) -> Result<f64> {
        let e = self.misfit(g)?;
        let sys = self.model().system();
        Ok(0.5 * time_quadrature(self.model().grid(), &e, sys.mass_omega()))
    }

    pub fn cost(&self, g: &Field) -> Result<f64> {
        g.check_len(self.model().system().node_count())?;
        Ok(self.misfit_cost(g)? + self.regularization(g))
    }

    pub fn evaluate(&self, g: &Field) -> Result<Evaluation> {
        g.check_len(self.model().system().node_count())?;
        let model = self.model();
        let grid = model.grid();
        let e = self.misfit(g)?;
        let misfit_cost = 0.5 * time_quadrature(grid, &e, model.system().mass_omega());
        let mut gradient = g.scaled(self.beta);
        let rho = &self.problem.rho;
        match self.mode {
            GradientMode::Discrete => {
                let steps = grid.steps();
                let tau = grid.tau();
                let shifted = (0..=steps)
                    .map(|n| {
                        if n < steps {
                            e.frame(n + 1).scaled(grid.trapezoid_weight(n + 1) / tau)
                        } else {
                            Field::zeros(e.node_count())
                        }
                    })
                    .collect();
                let v = model.solve_adjoint(&SpaceTimeField::new(*grid, shifted)?)?;
                for n in 1..=steps {
                    gradient.axpy(tau * rho.value(n), v.frame(n - 1));
                }
            }
            GradientMode::Continuous => {
                let v = model.solve_adjoint(&e)?;
                for (n, frame) in v.frames().iter().enumerate() {
                    gradient.axpy(grid.trapezoid_weight(n) * rho.value(n), frame);
                }
            }
        }
        Ok(Evaluation {
            cost: misfit_cost + self.regularization(g),
            misfit_cost,
            gradient,
        })
    }

    pub fn gradient(&self, g: &Field) -> Result<Field> {
        Ok(self.evaluate(g)?.gradient)
    }

    /// `dᵀ H d` for the Hessian of the cost, from one sensitivity solve.
    pub fn curvature(&self, d: &Field) -> Result<f64> {
        let du = sensitivity_solve(d, self.problem)?;
        let sys = self.model().system();
        Ok(time_quadrature(self.model().grid(), &du, sys.mass_omega()) + self.beta * sys.mass().bilinear(d, d))
    }

    /// `⟨f, h⟩_M`
    pub fn inner(&self, f: &Field, h: &Field) -> f64 {
        self.model().system().mass().bilinear(f, h)
    }
}

pub fn cost(g: &Field, problem: &ModelProblem, data: &ObservationData, beta: f64) -> Result<f64> {
    Objective::new(problem, data, beta)?.cost(g)
}

pub fn gradient(g: &Field, problem: &ModelProblem, data: &ObservationData, beta: f64) -> Result<Field> {
    Objective::new(problem, data, beta)?.gradient(g)
}

/// Response of u to a source perturbation: zero initial value, source `ρ δg`.
pub fn sensitivity_solve(delta_g: &Field, problem: &ModelProblem) -> Result<SpaceTimeField> {
    let zero = Field::zeros(problem.model.system().node_count());
    solve_forward(&problem.with_source(delta_g.clone()).with_initial(zero))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    /// Accepted step; zero for the starting point.
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// Armijo backtracking ran out; the state holds the last accepted iterate.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct InversionState {
    pub iterate: Field,
    pub gradient: Field,
    pub direction: Field,
    pub history: Vec<HistoryEntry>,
    pub misfit_cost: f64,
    pub stop: StopReason,
}

impl InversionState {
    pub fn final_cost(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.cost)
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Linear map from interior values to a full nodal field. Each boundary node
/// takes `2 g(p₁) − g(p₂)` where `p₁`, `p₂` are the next two nodes along the
/// inward grid line (diagonal at corners), or `g(p₁)` when `p₂` is not interior.
#[derive(Clone, Debug)]
pub struct BoundaryExtension {
    map: CsrMatrix,
}

impl BoundaryExtension {
    pub fn new(mesh: &Mesh, system: &crate::fem::AssembledSystem, linear: bool) -> Self {
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let mut triplets = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let node = mesh.node_index(i, j);
                if let Some(k) = system.free_index(node) {
                    triplets.push((node, k, 1.0));
                    continue;
                }
                let (i1, j1) = (i.clamp(1, nx - 1), j.clamp(1, ny - 1));
                let (i2, j2) = (2 * i1 - i, 2 * j1 - j);
                let first = system.free_index(mesh.node_index(i1, j1)).unwrap();
                match (linear && i2 <= nx && j2 <= ny)
                    .then(|| system.free_index(mesh.node_index(i2, j2)))
                    .flatten()
                {
                    Some(second) => {
                        triplets.push((node, first, 2.0));
                        triplets.push((node, second, -1.0));
                    }
                    None => triplets.push((node, first, 1.0)),
                }
            }
        }
        let map = CsrMatrix::from_triplets(mesh.node_count(), system.free_nodes().len(), &triplets);
        Self { map }
    }

    pub fn apply(&self, interior: &[f64]) -> Field {
        Field::from_vec(self.map.mul_vec(interior))
    }

    /// `Eᵀ r`
    pub fn transpose_apply(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.map.cols()];
        for (r, v) in nodal.iter().enumerate() {
            for (c, w) in self.map.row(r) {
                out[c] += w * v;
            }
        }
        out
    }

    /// `Eᵀ M E`
    pub fn pulled_back_mass(&self, mass: &CsrMatrix) -> CsrMatrix {
        let mut triplets = Vec::new();
        for r in 0..mass.rows() {
            for (c, m) in mass.row(r) {
                for (a, wa) in self.map.row(r) {
                    for (b, wb) in self.map.row(c) {
                        triplets.push((a, b, wa * m * wb));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.map.cols(), self.map.cols(), &triplets)
    }
}

/// Control vector, its field, and the metric the gradient is taken in.
struct Control {
    extension: Option<BoundaryExtension>,
    metric: CsrMatrix,
    factor: Option<SpdFactor>,
}

impl Control {
    fn new(space: ControlSpace, problem: &ModelProblem) -> Result<Self> {
        let sys = problem.model.system();
        Ok(match space {
            ControlSpace::Nodal => Self {
                extension: None,
                metric: sys.mass().clone(),
                factor: None,
            },
            ControlSpace::Constant | ControlSpace::Extrapolated => {
                let linear = space == ControlSpace::Extrapolated;
                let ext = BoundaryExtension::new(sys.mesh(), sys, linear);
                let metric = ext.pulled_back_mass(sys.mass());
                let factor = SpdFactor::new(&metric)?;
                Self {
                    extension: Some(ext),
                    metric,
                    factor: Some(factor),
                }
            }
        })
    }

    fn from_field(&self, g: &Field, problem: &ModelProblem) -> Vec<f64> {
        match &self.extension {
            None => g.to_vec(),
            Some(_) => problem.model.system().restrict(g),
        }
    }

    fn to_field(&self, c: &[f64], config: &InverseConfig) -> Field {
        let mut g = match &self.extension {
            None => Field::from_vec(c.to_vec()),
            Some(ext) => ext.apply(c),
        };
        config.project(&mut g);
        g
    }

    /// Riesz representative in the control metric of an L² gradient field.
    fn gradient(&self, l2_gradient: &Field, mass: &CsrMatrix) -> Result<Field> {
        match (&self.extension, &self.factor) {
            (Some(ext), Some(factor)) => {
                let rhs = ext.transpose_apply(&mass.mul_vec(l2_gradient));
                Ok(Field::from_vec(factor.solve(&rhs)?))
            }
            _ => Ok(l2_gradient.clone()),
        }
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.metric.bilinear(a, b)
    }
}

/// Projected descent with Armijo backtracking.
pub fn reconstruct(
    config: &InverseConfig,
    problem: &ModelProblem,
    data: &ObservationData,
) -> Result<(Field, InversionState)> {
    config.validate()?;
    let objective = Objective::new(problem, data, config.beta)?.with_mode(config.gradient);
    let mass = problem.model.system().mass();
    let nodes = problem.model.system().node_count();
    let control = Control::new(config.control, problem)?;
    let start = match &config.initial_guess {
        Some(g0) => {
            g0.check_len(nodes)?;
            g0.clone()
        }
        None => Field::zeros(nodes),
    };
    let mut c = Field::from_vec(control.from_field(&start, problem));
    let mut g = control.to_field(&c, config);

    let mut eval = objective.evaluate(&g)?;
    let mut grad = control.gradient(&eval.gradient, mass)?;
    let mut grad_norm = control.inner(&grad, &grad).sqrt();
    let mut history = vec![HistoryEntry {
        iteration: 0,
        cost: eval.cost,
        grad_norm,
        step: 0.0,
    }];
    let mut direction = grad.scaled(-1.0);
    let mut prev_sq = grad_norm * grad_norm;
    let mut stop = StopReason::MaxIterations;

    for k in 0..config.max_iters {
        if grad_norm <= config.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let steepest = grad.scaled(-1.0);
        direction = match config.direction {
            DirectionMode::SteepestDescent => steepest,
            DirectionMode::FletcherReeves if k == 0 => steepest,
            DirectionMode::FletcherReeves => {
                let mut d = steepest.clone();
                d.axpy(grad_norm * grad_norm / prev_sq, &direction);
                if control.inner(&grad, &d) < 0.0 {
                    d
                } else {
                    steepest
                }
            }
        };
        let slope = control.inner(&grad, &direction);

        let mut step = config.armijo.initial_step;
        if config.step_start == StepStart::Quadratic {
            let d = match &control.extension {
                Some(ext) => ext.apply(&direction),
                None => direction.clone(),
            };
            let curvature = objective.curvature(&d)?;
            if curvature > 0.0 {
                step = -slope / curvature;
            }
        }
        let mut accepted = None;
        for _ in 0..=config.armijo.max_backtracks {
            let mut trial = c.clone();
            trial.axpy(step, &direction);
            let trial_field = control.to_field(&trial, config);
            let trial_cost = objective.cost(&trial_field)?;
            if trial_cost <= eval.cost + config.armijo.c1 * step * slope {
                accepted = Some((trial, trial_field));
                break;
            }
            step *= config.armijo.ratio;
        }
        let Some((next_c, next_g)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        c = next_c;
        g = next_g;
        prev_sq = grad_norm * grad_norm;
        eval = objective.evaluate(&g)?;
        grad = control.gradient(&eval.gradient, mass)?;
        grad_norm = control.inner(&grad, &grad).sqrt();
        history.push(HistoryEntry {
            iteration: k + 1,
            cost: eval.cost,
            grad_norm,
            step,
        });
    }
    if stop == StopReason::MaxIterations && grad_norm <= config.grad_tol {
        stop = StopReason::GradientTolerance;
    }
    let direction = match &control.extension {
        Some(ext) => ext.apply(&direction),
        None => direction,
    };
    let state = InversionState {
        iterate: g.clone(),
        gradient: eval.gradient,
        direction,
        history,
        misfit_cost: eval.misfit_cost,
        stop,
    };
    Ok((g, state))
}

/// Deterministic generator for one noise realization; `stream` separates
/// independent jobs sharing a seed.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `ũ_d = u_d (1 + ε/100 · r)`, `r ~ U[−1, 1]` drawn per observed node and level.
pub fn add_noise(
    u_d: &SpaceTimeField,
    mask: &ObservationMask,
    mesh: &Mesh,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SpaceTimeField> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("noise level must be nonnegative, got {epsilon}")));
    }
    let observed = mask.observed_nodes(mesh);
    let mut out = u_d.clone();
    if epsilon == 0.0 {
        return Ok(out);
    }
    let scale = epsilon / 100.0;
    for frame in out.frames_mut() {
        for (v, seen) in frame.iter_mut().zip(&observed) {
            if *seen {
                let r: f64 = rng.random_range(-1.0..=1.0);
                *v *= 1.0 + scale * r;
            }
        }
    }
    Ok(out)
}

/// `‖g_true − g_rec‖_M / ‖g_true‖_M`
pub fn relative_error(g_rec: &Field, g_true: &Field, mass: &CsrMatrix) -> Result<f64> {
    g_rec.check_len(mass.rows())?;
    g_true.check_len(mass.rows())?;
    let denom = mass.bilinear(g_true, g_true);
    if !(denom > 0.0) {
        return Err(Error::domain("reference field has zero norm"));
    }
    let d = g_true.sub(g_rec);
    Ok((mass.bilinear(&d, &d) / denom).sqrt())
}

/// Pointwise description of the synthetic truth used to produce data. `rho`
/// and `initial` are sampled only on a refined grid; the same-grid path uses
/// the problem's own.
pub struct Truth<'a> {
    pub g_true: &'a dyn Fn(f64, f64) -> f64,
    pub rho: &'a dyn Fn(f64) -> f64,
    pub initial: &'a dyn Fn(f64, f64) -> f64,
}

/// Noise-free observations of the solution driven by the true source.
///
/// `refine = 1` solves on the inversion grid itself. Larger factors solve on
/// a mesh and time grid refined by that factor and inject the values at the
/// coarse nodes and levels.
pub fn generate_data(truth: &Truth<'_>, problem: &ModelProblem, refine: usize) -> Result<ObservationData> {
    if refine == 0 {
        return Err(Error::domain("refinement factor must be at least 1"));
    }
    let model = &problem.model;
    let sys = model.system();
    let mesh = sys.mesh();
    let grid = *model.grid();
    let u_d = if refine == 1 {
        let g = project_function(mesh, truth.g_true);
        solve_forward(&problem.with_source(g))?
    } else {
        let fine_mesh = build_mesh(mesh.nx() * refine, mesh.ny() * refine, mesh.domain())?;
        let fine_sys = assemble(
            &fine_mesh,
            sys.coefficients(),
            &ObservationMask::everywhere(&fine_mesh),
        )?;
        let fine_grid = TimeGrid::new(grid.t_final(), grid.steps() * refine)?;
        let fine_model = ForwardModel::new(
            std::sync::Arc::new(fine_sys),
            fine_grid,
            model.q(),
            model.alpha(),
        )?;
        let fine = ModelProblem::new(
            std::sync::Arc::new(fine_model),
            TimeSeries::from_fn(fine_grid, truth.rho),
            project_function(&fine_mesh, truth.g_true),
            project_function(&fine_mesh, truth.initial),
        )?;
        let u = solve_forward(&fine)?;
        let frames = (0..=grid.steps())
            .map(|n| {
                let fine_frame = u.frame(n * refine);
                let mut f = Field::zeros(mesh.node_count());
                for j in 0..=mesh.ny() {
                    for i in 0..=mesh.nx() {
                        f[mesh.node_index(i, j)] =
                            fine_frame[fine_mesh.node_index(i * refine, j * refine)];
                    }
                }
                f
            })
            .collect();
        SpaceTimeField::new(grid, frames)?
    };
    Ok(ObservationData {
        u_d,
        mask: sys.mask().clone(),
        noise_percent: 0.0,
    })
}

/// Expected data term of the noise alone, `½ (ε/100)²/3 Σₙ wₙ Σᵢ (M_ω)ᵢᵢ ũₙᵢ²`,
/// for the multiplicative uniform model of [`add_noise`]. Draws are
/// independent across nodes, so only the diagonal of `M_ω` contributes.
pub fn expected_noise_misfit(problem: &ModelProblem, data: &ObservationData) -> Result<f64> {
    check_data(problem, data)?;
    let s = data.noise_percent / 100.0;
    let grid = problem.model.grid();
    let m = problem.model.system().mass_omega();
    let diag: Vec<f64> = (0..m.rows()).map(|i| m.get(i, i)).collect();
    let sum: f64 = data
        .u_d
        .frames()
        .iter()
        .enumerate()
        .map(|(n, f)| grid.trapezoid_weight(n) * f.iter().zip(&diag).map(|(u, d)| d * u * u).sum::<f64>())
        .sum();
    Ok(0.5 * s * s / 3.0 * sum)
}

/// Discrepancy principle over `(β, misfit)` candidates: the largest β whose
/// misfit stays within `τ² δ²`, or the smallest β when none does.
pub fn discrepancy_pick(candidates: &[(f64, f64)], delta_sq: f64, tau: f64) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::domain("discrepancy principle needs at least one candidate"));
    }
    let admissible = candidates
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| *m <= tau * tau * delta_sq)
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i);
    Ok(admissible.unwrap_or_else(|| {
        candidates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }))
}

/// `|FD − ⟨∇J, d⟩_M| / |FD|` per direction, with central differences of step `h`.
pub fn finite_difference_gaps(objective: &Objective<'_>, g: &Field, directions: &[Field], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("difference step must be positive, got {h}")));
    }
    let grad = objective.gradient(g)?;
    directions
        .iter()
        .map(|d| {
            d.check_len(g.len())?;
            let mut plus = g.clone();
            plus.axpy(h, d);
            let mut minus = g.clone();
            minus.axpy(-h, d);
            let fd = (objective.cost(&plus)? - objective.cost(&minus)?) / (2.0 * h);
            let adjoint = objective.inner(&grad, d);
            if fd == 0.0 {
                return Ok(adjoint.abs());
            }
            Ok(((fd - adjoint) / fd).abs())
        })
        .collect()
}
