use super::{Coefficients, CsrMatrix, Mesh, ObservationMask};
use crate::field::Field;
use crate::{Error, Result};

/// Global P1 matrices plus the map between nodes and free (interior) unknowns.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    mesh: Mesh,
    coefficients: Coefficients,
    mask: ObservationMask,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    mass_omega: CsrMatrix,
    free_nodes: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

impl AssembledSystem {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    /// `M_ij = ∫ φ_i φ_j`
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `K_ij = ∫ A∇φ_j·∇φ_i + c φ_i φ_j`
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Mass matrix over the observation region only.
    pub fn mass_omega(&self) -> &CsrMatrix {
        &self.mass_omega
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    /// Interior nodes, in increasing node order; position = unknown index.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Interior-interior block of a global matrix.
    pub fn reduce(&self, matrix: &CsrMatrix) -> CsrMatrix {
        matrix.submatrix(&self.free_nodes, &self.free_nodes)
    }

    /// Interior rows of a global matrix, all columns.
    pub fn interior_rows(&self, matrix: &CsrMatrix) -> CsrMatrix {
        let all: Vec<usize> = (0..self.node_count()).collect();
        matrix.submatrix(&self.free_nodes, &all)
    }

    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|n| nodal[*n]).collect()
    }

    /// Interior values to a nodal field, zero on the boundary.
    pub fn extend(&self, interior: &[f64]) -> Field {
        let mut f = Field::zeros(self.node_count());
        for (k, n) in self.free_nodes.iter().enumerate() {
            f[*n] = interior[k];
        }
        f
    }
}

fn element_matrices(
    mesh: &Mesh,
    element: usize,
    coeffs: &Coefficients,
) -> Result<([[f64; 3]; 3], [[f64; 3]; 3])> {
    let pts = mesh.elements()[element].map(|n| mesh.nodes()[n]);
    let area = mesh.signed_area(element);
    let centroid = mesh.centroid(element);
    let a = coeffs.diffusion_at(centroid);
    let c = coeffs.reaction_at(centroid);
    let bad = |reason: &str| Error::Coefficient {
        x: centroid[0],
        y: centroid[1],
        reason: reason.to_string(),
    };
    if a[0][1] != a[1][0] {
        return Err(bad("diffusion tensor is not symmetric"));
    }
    if !(a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0) {
        return Err(bad("diffusion tensor is not positive definite"));
    }
    if !(c >= 0.0) {
        return Err(bad("reaction coefficient is negative"));
    }
    // ∇λ_i = [y_j − y_k, x_k − x_j] / 2|T| with (i, j, k) cyclic
    let grads: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [
            (pts[j][1] - pts[k][1]) / (2.0 * area),
            (pts[k][0] - pts[j][0]) / (2.0 * area),
        ]
    });
    let mut mass = [[0.0; 3]; 3];
    let mut stiff = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            let ag = [
                a[0][0] * grads[j][0] + a[0][1] * grads[j][1],
                a[1][0] * grads[j][0] + a[1][1] * grads[j][1],
            ];
            let k = area * (grads[i][0] * ag[0] + grads[i][1] * ag[1]) + c * m;
            mass[i][j] = m;
            mass[j][i] = m;
            stiff[i][j] = k;
            stiff[j][i] = k;
        }
    }
    Ok((mass, stiff))
}

/// Assembles `M`, `K` and `M_ω` with centroid sampling of `A` and `c`.
pub fn assemble(
    mesh: &Mesh,
    coeffs: &Coefficients,
    mask: &ObservationMask,
) -> Result<AssembledSystem> {
    let ne = mesh.elements().len();
    if mask.element_flags().len() != ne {
        return Err(Error::Dimension {
            expected: ne,
            found: mask.element_flags().len(),
        });
    }
    let mut m_trip = Vec::with_capacity(9 * ne);
    let mut k_trip = Vec::with_capacity(9 * ne);
    let mut w_trip = Vec::new();
    for (e, tri) in mesh.elements().iter().enumerate() {
        let (me, ke) = element_matrices(mesh, e, coeffs)?;
        let observed = mask.element_flags()[e];
        for i in 0..3 {
            for j in 0..3 {
                m_trip.push((tri[i], tri[j], me[i][j]));
                k_trip.push((tri[i], tri[j], ke[i][j]));
                if observed {
                    w_trip.push((tri[i], tri[j], me[i][j]));
                }
            }
        }
    }
    let n = mesh.node_count();
    let free_nodes: Vec<usize> = (0..n).filter(|i| !mesh.boundary_mask()[*i]).collect();
    let mut free_index = vec![None; n];
    for (k, node) in free_nodes.iter().enumerate() {
        free_index[*node] = Some(k);
    }
    Ok(AssembledSystem {
        mesh: mesh.clone(),
        coefficients: coeffs.clone(),
        mask: mask.clone(),
        mass: CsrMatrix::from_triplets(n, n, &m_trip),
        stiffness: CsrMatrix::from_triplets(n, n, &k_trip),
        mass_omega: CsrMatrix::from_triplets(n, n, &w_trip),
        free_nodes,
        free_index,
    })
}
