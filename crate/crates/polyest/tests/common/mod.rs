//! Shared builders for integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use polyest::instance::ProblemInstance;
use polyest::linalg::{random_psd_unit_spectral, random_unit_vector, random_with_condition};
use polyest::noise::{MixtureModel, NoiseFamily};
use polyest::sets::{Ellitope, ExtraConstraint, MonotoneSet, PolytopeImage, SignalSet};

/// Ellitope `{ ||x||_2 <= rho2, ||x||_inf <= rho_inf }`: one coordinate
/// quadratic per coordinate followed by the scaled identity.
pub fn two_norm_sup_norm_ellitope(n: usize, rho2: f64, rho_inf: f64) -> Ellitope {
    let mut t: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            m[(k, k)] = 1.0 / (rho_inf * rho_inf);
            m
        })
        .collect();
    t.push(DMatrix::identity(n, n) / (rho2 * rho2));
    Ellitope::new(DMatrix::identity(n, n), t, MonotoneSet::unit_box(n + 1)).unwrap()
}

/// The first experiment's geometry: `X = { ||x||_1 <= rho1 } intersect
/// { ||x||_2 <= rho2, ||x||_inf <= rho_inf }` with Gaussian noise.
pub fn ball_instance(
    n: usize,
    nu: usize,
    rho1: f64,
    rho2: f64,
    rho_inf: f64,
    sigma: f64,
    cond_a: f64,
    cond_b: f64,
    seed: u64,
) -> ProblemInstance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let a = random_with_condition(n, n, cond_a, &mut rng);
    let b = random_with_condition(nu, n, cond_b, &mut rng);
    let ell = two_norm_sup_norm_ellitope(n, rho2, rho_inf);
    let poly = PolytopeImage::l1_ball(n, rho1).unwrap();
    let signal = SignalSet::new(ell, poly, vec![]).unwrap();
    ProblemInstance { a, b, signal, noise: NoiseFamily::Gaussian { sigma_bar: sigma }, theta: 2.0 }
}

/// The second experiment's geometry: probability vector over `n` components,
/// mixture-sub-Gaussian observations in dimension `d = n`, identity target.
pub fn mixture_instance(n: usize, n_obs: usize, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let means: Vec<DVector<f64>> = (0..n).map(|_| random_unit_vector(n, &mut rng)).collect();
    let covs: Vec<DMatrix<f64>> = (0..n)
        .map(|_| random_psd_unit_spectral(n, &mut rng))
        .collect();
    let model = MixtureModel::new(means, covs, n_obs).unwrap();
    let a = model.a_matrix();
    let ell = two_norm_sup_norm_ellitope(n, 1.0, 0.5);
    let poly = PolytopeImage::new(
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
    )
    .unwrap();
    let signal = SignalSet::new(ell, poly, vec![ExtraConstraint::Simplex]).unwrap();
    ProblemInstance {
        a,
        b: DMatrix::identity(n, n),
        signal,
        noise: NoiseFamily::Mixture(model),
        theta: 1.0,
    }
}

/// Random small general instance for duality tests: rectangular R, Q, random
/// vertices, a full quadratic plus rank-one quadratics.
pub fn random_general_geometry(
    n: usize,
    q_dim: usize,
    p_dim: usize,
    k_count: usize,
    j_count: usize,
    seed: u64,
) -> (Ellitope, PolytopeImage) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let big_n = n; // identity latent map keeps gauges cheap
    let mut t: Vec<DMatrix<f64>> = Vec::new();
    t.push(random_psd_unit_spectral(big_n, &mut rng) + DMatrix::identity(big_n, big_n) * 0.2);
    for _ in 1..k_count {
        let l = random_unit_vector(big_n, &mut rng) * (0.4 + 1.2 * rand::RngExt::random_range(&mut rng, 0.0..1.0));
        t.push(&l * l.transpose());
    }
    let upper = DVector::from_fn(k_count, |_, _| 0.5 + rand::RngExt::random_range(&mut rng, 0.0..1.5));
    let ell = Ellitope::new(
        DMatrix::identity(n, big_n),
        t,
        MonotoneSet::Box { upper },
    )
    .unwrap();
    let q = random_with_condition(p_dim, q_dim, 3.0, &mut rng);
    let r = random_with_condition(n, q_dim, 3.0, &mut rng);
    let v = DMatrix::from_fn(p_dim, j_count, |_, _| {
        rand::RngExt::random_range(&mut rng, -1.0..1.0)
    });
    let poly = PolytopeImage::new(r, q, v).unwrap();
    (ell, poly)
}
