//! P1 finite elements on a structured triangulation of a rectangle.

mod assembly;
mod io;
mod mesh;
mod sparse;

use std::fmt;
use std::sync::Arc;

pub use assembly::{assemble, AssembledSystem};
pub use io::{read_field_csv, write_field_csv, FieldCsv};
pub use mesh::{build_mesh, Mesh, Rect};
pub use sparse::{solve_spd, CsrMatrix, SpdFactor};

use crate::field::Field;
use crate::{Error, Result};

pub type TensorFn = dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync;
pub type ScalarFn = dyn Fn([f64; 2]) -> f64 + Send + Sync;

/// Diffusion tensor `A(x)` and reaction `c(x)` of `𝒜 = −div(A∇·) + c`,
/// sampled at element centroids during assembly.
#[derive(Clone)]
pub struct Coefficients {
    diffusion: Arc<TensorFn>,
    reaction: Arc<ScalarFn>,
}

impl Coefficients {
    pub fn new(
        diffusion: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync + 'static,
        reaction: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            diffusion: Arc::new(diffusion),
            reaction: Arc::new(reaction),
        }
    }

    /// `A = I`, `c = 0`, i.e. `𝒜 = −Δ`.
    pub fn laplacian() -> Self {
        Self::new(|_| [[1.0, 0.0], [0.0, 1.0]], |_| 0.0)
    }

    pub fn diffusion_at(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        (self.diffusion)(p)
    }

    pub fn reaction_at(&self, p: [f64; 2]) -> f64 {
        (self.reaction)(p)
    }
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients").finish_non_exhaustive()
    }
}

/// Per-element indicator of the observation region ω.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    element_flags: Vec<bool>,
}

impl ObservationMask {
    pub fn new(element_flags: Vec<bool>) -> Result<Self> {
        if !element_flags.iter().any(|f| *f) {
            return Err(Error::domain("observation region contains no element"));
        }
        Ok(Self { element_flags })
    }

    /// ω = Ω.
    pub fn everywhere(mesh: &Mesh) -> Self {
        Self {
            element_flags: vec![true; mesh.elements().len()],
        }
    }

    pub fn element_flags(&self) -> &[bool] {
        &self.element_flags
    }

    pub fn flagged_count(&self) -> usize {
        self.element_flags.iter().filter(|f| **f).count()
    }

    /// Nodes touched by at least one flagged element.
    pub fn observed_nodes(&self, mesh: &Mesh) -> Vec<bool> {
        let mut seen = vec![false; mesh.node_count()];
        for (e, tri) in mesh.elements().iter().enumerate() {
            if self.element_flags[e] {
                for n in tri {
                    seen[*n] = true;
                }
            }
        }
        seen
    }

    pub fn is_subset_of(&self, other: &ObservationMask) -> bool {
        self.element_flags
            .iter()
            .zip(&other.element_flags)
            .all(|(a, b)| !*a || *b)
    }
}

/// ω = Ω ∖ [a, b]²: flags the elements whose centroid lies outside the square.
pub fn mask_from_frame(mesh: &Mesh, a: f64, b: f64) -> Result<ObservationMask> {
    let d = mesh.domain();
    let inside = a <= b && d.x0 < a && b < d.x1 && d.y0 < a && b < d.y1;
    if !inside {
        return Err(Error::domain(format!(
            "inner square [{a}, {b}]² is not strictly inside the domain"
        )));
    }
    let flags = (0..mesh.elements().len())
        .map(|e| {
            let [x, y] = mesh.centroid(e);
            !(a <= x && x <= b && a <= y && y <= b)
        })
        .collect();
    ObservationMask::new(flags)
}

/// `fᵀ W g` for a mass-type matrix `W`.
pub fn l2_inner(f: &Field, g: &Field, matrix: &CsrMatrix) -> Result<f64> {
    f.check_len(matrix.rows())?;
    g.check_len(matrix.cols())?;
    Ok(matrix.bilinear(f, g))
}

/// Nodal interpolant of `f`.
pub fn project_function(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Field {
    Field::from_vec(mesh.nodes().iter().map(|p| f(p[0], p[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_one_cell_wide() {
        let mesh = build_mesh(20, 20, Rect::UNIT).unwrap();
        let mask = mask_from_frame(&mesh, 0.05, 0.95).unwrap();
        // enumerate cells: a cell is in the frame iff it touches the boundary
        for j in 0..20 {
            for i in 0..20 {
                let touches = i == 0 || j == 0 || i == 19 || j == 19;
                for half in 0..2 {
                    let e = 2 * (j * 20 + i) + half;
                    assert_eq!(mask.element_flags()[e], touches, "cell ({i}, {j})");
                }
            }
        }
        assert_eq!(mask.flagged_count(), 2 * (20 * 20 - 18 * 18));
    }

    #[test]
    fn point_frame_flags_everything() {
        let mesh = build_mesh(20, 20, Rect::UNIT).unwrap();
        let mask = mask_from_frame(&mesh, 0.5, 0.5).unwrap();
        assert_eq!(mask.flagged_count(), 800);
    }

    #[test]
    fn frame_must_be_strictly_inside() {
        let mesh = build_mesh(10, 10, Rect::UNIT).unwrap();
        assert!(matches!(mask_from_frame(&mesh, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(mask_from_frame(&mesh, 0.6, 0.4).is_err());
        // nothing left outside a square hugging the boundary
        assert!(mask_from_frame(&mesh, 0.01, 0.99).is_err());
    }

    #[test]
    fn nested_frames_nest() {
        let mesh = build_mesh(20, 20, Rect::UNIT).unwrap();
        let thin = mask_from_frame(&mesh, 0.05, 0.95).unwrap();
        let mid = mask_from_frame(&mesh, 0.1, 0.9).unwrap();
        let wide = mask_from_frame(&mesh, 0.2, 0.8).unwrap();
        assert!(thin.is_subset_of(&mid));
        assert!(mid.is_subset_of(&wide));
        assert!(!wide.is_subset_of(&thin));
    }

    #[test]
    fn interpolation_cases() {
        let mesh = build_mesh(6, 4, Rect::UNIT).unwrap();
        assert!(project_function(&mesh, |_, _| 0.0).iter().all(|v| *v == 0.0));
        let lin = project_function(&mesh, |x, y| 2.0 * x - y + 0.5);
        for (p, v) in mesh.nodes().iter().zip(lin.iter()) {
            assert_eq!(*v, 2.0 * p[0] - p[1] + 0.5);
        }
        let g = project_function(&mesh, |x, y| {
            0.5 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos() + 1.0
        });
        assert!((g[0] - 1.5).abs() < 1e-15);
        assert!((g[mesh.node_index(6, 0)] - 0.5).abs() < 1e-15);
    }
}
