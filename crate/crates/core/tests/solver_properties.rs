use std::sync::Arc;

use mimfd::fem::{assemble, build_mesh, mask_from_frame, Coefficients, Rect};
use mimfd::fractime::TimeGrid;
use mimfd::solver::ForwardModel;
use mimfd::{Field, SpaceTimeField};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(n: usize, steps: usize, q: f64, alpha: f64) -> ForwardModel {
    let mesh = build_mesh(n, n, Rect::UNIT).unwrap();
    let mask = mask_from_frame(&mesh, 0.3, 0.7).unwrap();
    let sys = assemble(&mesh, &Coefficients::laplacian(), &mask).unwrap();
    ForwardModel::new(Arc::new(sys), TimeGrid::new(1.0, steps).unwrap(), q, alpha).unwrap()
}

fn interior_field(m: &ForwardModel, rng: &mut ChaCha8Rng) -> Field {
    let boundary = m.system().mesh().boundary_mask();
    Field::from_vec(
        boundary
            .iter()
            .map(|b| if *b { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect(),
    )
}

fn fields(m: &ForwardModel, rng: &mut ChaCha8Rng) -> Vec<Field> {
    (0..=m.grid().steps()).map(|_| interior_field(m, rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_solve_is_linear(seed in 0u64..10_000, q in 0.0f64..3.0, alpha in 0.05f64..0.95, steps in 1usize..12) {
        let m = model(5, steps, q, alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a1, a2) = (interior_field(&m, &mut rng), interior_field(&m, &mut rng));
        let (f1, f2) = (fields(&m, &mut rng), fields(&m, &mut rng));
        let c = 1.7;
        let mut a = a1.clone();
        a.axpy(c, &a2);
        let f: Vec<Field> = f1.iter().zip(&f2).map(|(x, y)| { let mut s = x.clone(); s.axpy(c, y); s }).collect();
        let u1 = m.solve_forward_general(&a1, &f1).unwrap();
        let u2 = m.solve_forward_general(&a2, &f2).unwrap();
        let u = m.solve_forward_general(&a, &f).unwrap();
        for n in 0..=steps {
            let mut expect = u1.frame(n).clone();
            expect.axpy(c, u2.frame(n));
            prop_assert!(u.frame(n).sub(&expect).max_abs() < 1e-12);
        }
    }

    /// `Σₙ eₙᵀ M_ω uₙ = Σₖ fₖᵀ M v_{k−1}` with `u` driven by `f` from zero and
    /// `v` the adjoint of the misfit shifted one level.
    #[test]
    fn adjoint_is_the_discrete_transpose(seed in 0u64..10_000, q in 0.0f64..3.0, alpha in 0.05f64..0.95, steps in 1usize..12) {
        let m = model(5, steps, q, alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = fields(&m, &mut rng);
        let e = fields(&m, &mut rng);
        let zero = Field::zeros(m.system().node_count());
        let u = m.solve_forward_general(&zero, &f).unwrap();
        let shifted: Vec<Field> = (0..=steps).map(|n| if n < steps { e[n + 1].clone() } else { zero.clone() }).collect();
        let v = m.solve_adjoint(&SpaceTimeField::new(*m.grid(), shifted).unwrap()).unwrap();
        let mo = m.system().mass_omega();
        let mass = m.system().mass();
        let lhs: f64 = (1..=steps).map(|n| mo.bilinear(&e[n], u.frame(n))).sum();
        let rhs: f64 = (1..=steps).map(|k| mass.bilinear(&f[k], v.frame(k - 1))).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (lhs.abs() + rhs.abs() + 1e-300), "{} vs {}", lhs, rhs);
    }
}
