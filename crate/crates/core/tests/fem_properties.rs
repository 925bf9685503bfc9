use std::f64::consts::PI;

use mimfd::fem::{assemble, build_mesh, project_function, Coefficients, ObservationMask, Rect, SpdFactor};
use proptest::prelude::*;

/// Smallest generalized eigenvalue of (K, M) on the free nodes by inverse iteration.
fn smallest_eigenvalue(n: usize) -> f64 {
    let mesh = build_mesh(n, n, Rect::UNIT).unwrap();
    let sys = assemble(&mesh, &Coefficients::laplacian(), &ObservationMask::everywhere(&mesh)).unwrap();
    let k = sys.reduce(sys.stiffness());
    let m = sys.reduce(sys.mass());
    let factor = SpdFactor::new(&k).unwrap();
    let mut x = vec![1.0; k.rows()];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = factor.solve(&m.mul_vec(&x)).unwrap();
        let norm = m.bilinear(&y, &y).sqrt();
        x = y.iter().map(|v| v / norm).collect();
        let next = k.bilinear(&x, &x);
        if (next - lambda).abs() < 1e-13 * next {
            break;
        }
        lambda = next;
    }
    lambda
}

#[test]
fn dirichlet_laplacian_ground_state() {
    let exact = 2.0 * PI * PI;
    let coarse = smallest_eigenvalue(20);
    let fine = smallest_eigenvalue(40);
    assert!(((fine - exact) / exact).abs() <= 0.02, "{fine}");
    // conforming elements approximate from above and improve with h
    assert!(fine >= exact && coarse > fine);
}

#[test]
fn interpolation_error_is_second_order() {
    let f = |x: f64, y: f64| (PI * x).sin() * (2.0 * PI * y).cos();
    let errors: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mesh = build_mesh(n, n, Rect::UNIT).unwrap();
            // reference: the same function interpolated on a mesh 4× finer,
            // compared through the fine mass matrix
            let fine = build_mesh(4 * n, 4 * n, Rect::UNIT).unwrap();
            let fsys = assemble(&fine, &Coefficients::laplacian(), &ObservationMask::everywhere(&fine)).unwrap();
            let coarse = project_function(&mesh, f);
            let lifted = project_function(&fine, |x, y| {
                let h = 1.0 / n as f64;
                let (i, j) = (((x / h).floor() as usize).min(n - 1), ((y / h).floor() as usize).min(n - 1));
                let (s, t) = (x / h - i as f64, y / h - j as f64);
                let v = |a: usize, b: usize| coarse[mesh.node_index(a, b)];
                // triangles split along the diagonal of the structured grid
                if s >= t {
                    v(i, j) + s * (v(i + 1, j) - v(i, j)) + t * (v(i + 1, j + 1) - v(i + 1, j))
                } else {
                    v(i, j) + t * (v(i, j + 1) - v(i, j)) + s * (v(i + 1, j + 1) - v(i, j + 1))
                }
            });
            let exact = project_function(&fine, f);
            let d = exact.sub(&lifted);
            fsys.mass().bilinear(&d, &d).sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errors:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mass_and_stiffness_are_symmetric_and_positive(n in 2usize..12, m in 2usize..12, seed in 0u64..1000) {
        let mesh = build_mesh(n, m, Rect { x0: 0.0, x1: 2.0, y0: -1.0, y1: 0.5 }).unwrap();
        let sys = assemble(&mesh, &Coefficients::laplacian(), &ObservationMask::everywhere(&mesh)).unwrap();
        prop_assert!(sys.mass().is_symmetric());
        prop_assert!(sys.stiffness().is_symmetric());
        let x: Vec<f64> = (0..mesh.node_count()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0).collect();
        prop_assert!(sys.mass().bilinear(&x, &x) > 0.0);
        prop_assert!(sys.stiffness().bilinear(&x, &x) >= -1e-12);
        let total: f64 = (0..mesh.node_count()).flat_map(|r| sys.mass().row(r).map(|(_, v)| v).collect::<Vec<_>>()).sum();
        prop_assert!((total - 3.0).abs() < 1e-12);
    }
}
