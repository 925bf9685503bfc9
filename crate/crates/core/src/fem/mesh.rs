use crate::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Structured P1 triangulation. Node `(i, j)` has index `j (nx + 1) + i`;
/// every cell is split along its lower-left to upper-right diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    domain: Rect,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl Mesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Mesh width along x.
    pub fn h(&self) -> f64 {
        (self.domain.x1 - self.domain.x0) / self.nx as f64
    }

    pub fn signed_area(&self, element: usize) -> f64 {
        let [a, b, c] = self.elements[element].map(|n| self.nodes[n]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[element].map(|n| self.nodes[n]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

pub fn build_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::domain(format!(
            "mesh needs at least 2 cells per axis, got {nx}×{ny}"
        )));
    }
    let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
        return Err(Error::domain(format!("degenerate rectangle {domain:?}")));
    }
    let hx = (domain.x1 - domain.x0) / nx as f64;
    let hy = (domain.y1 - domain.y0) / ny as f64;
    let coord = |i: usize, n: usize, lo: f64, hi: f64, h: f64| {
        if i == n {
            hi
        } else {
            lo + i as f64 * h
        }
    };
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                coord(i, nx, domain.x0, domain.x1, hx),
                coord(j, ny, domain.y0, domain.y1, hy),
            ]);
            boundary.push(i == 0 || i == nx || j == 0 || j == ny);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            elements.push([p00, p10, p11]);
            elements.push([p00, p11, p01]);
        }
    }
    Ok(Mesh {
        nx,
        ny,
        domain,
        nodes,
        elements,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = build_mesh(2, 2, Rect::UNIT).unwrap();
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.elements().len(), 8);
        assert_eq!(m.boundary_mask().iter().filter(|b| **b).count(), 8);

        let m = build_mesh(20, 20, Rect::UNIT).unwrap();
        assert_eq!(m.node_count(), 441);
        assert_eq!(m.elements().len(), 800);
    }

    #[test]
    fn areas_positive_and_sum_to_domain() {
        let r = Rect {
            x0: -1.0,
            x1: 2.0,
            y0: 0.5,
            y1: 1.0,
        };
        for (nx, ny) in [(2, 2), (7, 3), (20, 20)] {
            let m = build_mesh(nx, ny, r).unwrap();
            let total: f64 = (0..m.elements().len()).map(|e| m.signed_area(e)).sum();
            assert!((0..m.elements().len()).all(|e| m.signed_area(e) > 0.0));
            assert!((total - r.area()).abs() < 1e-13);
        }
        let unit = build_mesh(20, 20, Rect::UNIT).unwrap();
        let total: f64 = (0..800).map(|e| unit.signed_area(e)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_flags_match_coordinates() {
        let m = build_mesh(5, 4, Rect::UNIT).unwrap();
        for (p, b) in m.nodes().iter().zip(m.boundary_mask()) {
            let on_edge = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
            assert_eq!(on_edge, *b);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_mesh(1, 4, Rect::UNIT).is_err());
        let flat = Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 1.0,
            y1: 1.0,
        };
        assert!(matches!(build_mesh(4, 4, flat), Err(Error::Domain(_))));
    }
}
