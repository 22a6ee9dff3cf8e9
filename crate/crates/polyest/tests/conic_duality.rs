//! Agreement of the direct maximization over the relaxed vertex set with its
//! conic dual, which underwrites the dualized vertex constraints of the
//! master design program.

mod common;

use nalgebra::DVector;
use polyest::conic::SolverOptions;
use polyest::design::{dual_max_over_ybar, ybar_primal};
use polyest::linalg::standard_normal_vector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[test]
fn zero_objective_is_zero_both_ways() {
    let (ell, poly) = common::random_general_geometry(4, 3, 4, 2, 3, 1);
    let d = DVector::zeros(poly.y_dim());
    let v = dual_max_over_ybar(&d, &ell, &poly, &SolverOptions::default()).unwrap();
    assert!(v.primal.abs() <= 1e-7, "primal {}", v.primal);
    assert!(v.dual.abs() <= 1e-7, "dual {}", v.dual);
}

#[test]
fn primal_matches_dual_on_random_instances() {
    let opts = SolverOptions::tight();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = 3 + trial % 4; // up to 6
        let q_dim = 2 + trial % 3;
        let p_dim = q_dim + (trial % 2);
        let k_count = 1 + trial % 3;
        let j_count = 2 + trial % 3;
        let (ell, poly) =
            common::random_general_geometry(n, q_dim, p_dim, k_count, j_count, 100 + trial as u64);
        let d = standard_normal_vector(p_dim, &mut rng);
        let v = dual_max_over_ybar(&d, &ell, &poly, &opts).unwrap();
        let gap = (v.primal - v.dual).abs();
        assert!(
            gap <= 1e-6 * (1.0 + v.primal.abs()),
            "trial {trial}: primal {} dual {} gap {gap}",
            v.primal,
            v.dual
        );
        // Weak duality must hold strictly even before tolerances.
        assert!(v.primal <= v.dual + 1e-6 * (1.0 + v.dual.abs()));
    }
}

#[test]
fn ball_containment_bounds_the_support() {
    // When the relaxed vertex set sits inside a Euclidean ball of radius r
    // (all vertices within the ball and the ellitope inactive), the support
    // value cannot exceed r ||d||.
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for trial in 0..10 {
        let n = 4;
        let (ell, poly) = common::random_general_geometry(n, 3, 3, 2, 4, 300 + trial);
        // Radius covering all defining vertices.
        let radius = (0..poly.num_vertices())
            .map(|j| poly.v().column(j).norm())
            .fold(0.0_f64, f64::max);
        let d = standard_normal_vector(3, &mut rng);
        let val = ybar_primal(&d, &ell, &poly, &SolverOptions::default()).unwrap();
        assert!(
            val <= radius * d.norm() + 1e-6,
            "support {val} exceeds ball bound {}",
            radius * d.norm()
        );
    }
}
