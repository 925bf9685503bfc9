//! Numerical check of the fractional Duhamel principle: with zero initial
//! value and source `ρ(t) g(x)` the solution is `u = μ * v`, where `v` solves
//! the homogeneous problem started from `g` and `μ + q J^{1−α} μ = ρ`.

use std::sync::Arc;

use crate::fem::{assemble, build_mesh, project_function, Coefficients, ObservationMask, Rect};
use crate::field::{Field, SpaceTimeField};
use crate::fractime::{convolve_with, solve_volterra_mu, ConvolutionRule, TimeGrid, TimeSeries};
use crate::solver::ForwardModel;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct DuhamelReport {
    pub mu: TimeSeries,
    /// `maxₙ ‖uₙ − (μ*v)ₙ‖_M / maxₙ ‖uₙ‖_M`; `None` when u vanishes identically.
    pub relative_residual: Option<f64>,
    /// `‖uₙ − (μ*v)ₙ‖_M` per level.
    pub per_frame: Vec<f64>,
}

impl DuhamelReport {
    pub fn is_degenerate(&self) -> bool {
        self.relative_residual.is_none()
    }
}

fn frame_norms(field: &SpaceTimeField, model: &ForwardModel) -> Vec<f64> {
    let mass = model.system().mass();
    field
        .frames()
        .iter()
        .map(|f| mass.bilinear(f, f).max(0.0).sqrt())
        .collect()
}

/// `g` must vanish on the boundary since it is also the initial value of `v`.
pub fn verify_duhamel(g: &Field, rho: &TimeSeries, model: &ForwardModel) -> Result<DuhamelReport> {
    verify_duhamel_with(g, rho, model, ConvolutionRule::ShiftedRectangle)
}

pub fn verify_duhamel_with(
    g: &Field,
    rho: &TimeSeries,
    model: &ForwardModel,
    rule: ConvolutionRule,
) -> Result<DuhamelReport> {
    model.grid().check_same(rho.grid())?;
    model.check_initial(g)?;
    let nodes = model.system().node_count();
    let zero = Field::zeros(nodes);

    let sources: Vec<Field> = rho.values().iter().map(|r| g.scaled(*r)).collect();
    let u = model.solve_forward_general(&zero, &sources)?;
    let no_source = vec![zero.clone(); sources.len()];
    let v = model.solve_forward_general(g, &no_source)?;
    let mu = solve_volterra_mu(rho, model.q(), model.alpha())?;
    let representation = convolve_with(&mu, &v, rule)?;

    let per_frame = frame_norms(&u.sub(&representation)?, model);
    let scale = frame_norms(&u, model).into_iter().fold(0.0, f64::max);
    let relative_residual = (scale > 0.0).then(|| per_frame.iter().fold(0.0, |m: f64, r| m.max(*r)) / scale);
    Ok(DuhamelReport {
        mu,
        relative_residual,
        per_frame,
    })
}

/// Problem data for a refinement study on a rectangle.
#[derive(Clone)]
pub struct DuhamelCase {
    pub domain: Rect,
    pub coefficients: Coefficients,
    pub t_final: f64,
    pub q: f64,
    pub alpha: f64,
    pub rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Interpolated, then set to zero on boundary nodes.
    pub g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl DuhamelCase {
    pub fn report(&self, nx: usize, steps: usize) -> Result<DuhamelReport> {
        let mesh = build_mesh(nx, nx, self.domain)?;
        let system = assemble(&mesh, &self.coefficients, &ObservationMask::everywhere(&mesh))?;
        let grid = TimeGrid::new(self.t_final, steps)?;
        let mut g = project_function(&mesh, |x, y| (self.g)(x, y));
        for (value, boundary) in g.iter_mut().zip(mesh.boundary_mask()) {
            if *boundary {
                *value = 0.0;
            }
        }
        let model = ForwardModel::new(Arc::new(system), grid, self.q, self.alpha)?;
        let rho = TimeSeries::from_fn(grid, |t| (self.rho)(t));
        verify_duhamel(&g, &rho, &model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementRow {
    pub nx: usize,
    pub steps: usize,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    /// True when every row has a residual and each is strictly below the previous one.
    pub fn strictly_decreasing(&self) -> bool {
        let values: Option<Vec<f64>> = self.rows.iter().map(|r| r.residual).collect();
        values.is_some_and(|v| v.windows(2).all(|w| w[1] < w[0]))
    }

    pub fn all_degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.residual.is_none())
    }
}

pub fn residual_refinement_study(case: &DuhamelCase, levels: &[(usize, usize)]) -> Result<RefinementTable> {
    if levels.is_empty() {
        return Err(Error::domain("refinement study needs at least one level"));
    }
    let rows = levels
        .iter()
        .map(|&(nx, steps)| {
            Ok(RefinementRow {
                nx,
                steps,
                residual: case.report(nx, steps)?.relative_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementTable { rows })
}
