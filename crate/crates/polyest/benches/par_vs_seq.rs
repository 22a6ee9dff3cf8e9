//! Parallel vs sequential comparison of the data-parallel hot loops:
//! Monte-Carlo risk trials, batch mixture sampling, and batch gauge
//! evaluation. Run with `cargo bench -p polyest`; disable the `parallel`
//! feature to benchmark the rayon-free build of the same loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use polyest::conic::SolverOptions;
use polyest::design::{assemble_contrast, solve_master, DesignMode, DesignOptions};
use polyest::estimator::monte_carlo_risk;
use polyest::instance::ProblemInstance;
use polyest::linalg::{random_psd_unit_spectral, random_unit_vector, standard_normal_vector};
use polyest::noise::{sample_mixture, MixtureModel, NoiseFamily};
use polyest::par;
use polyest::sets::{Ellitope, ExtraConstraint, MonotoneSet, PolytopeImage, SignalSet};

fn mixture_instance(n: usize, n_obs: usize, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let means: Vec<DVector<f64>> = (0..n).map(|_| random_unit_vector(n, &mut rng)).collect();
    let covs: Vec<DMatrix<f64>> = (0..n)
        .map(|_| random_psd_unit_spectral(n, &mut rng))
        .collect();
    let model = MixtureModel::new(means, covs, n_obs).unwrap();
    let a = model.a_matrix();
    let mut t: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            m[(k, k)] = 4.0;
            m
        })
        .collect();
    t.push(DMatrix::identity(n, n));
    let ell = Ellitope::new(DMatrix::identity(n, n), t, MonotoneSet::unit_box(n + 1)).unwrap();
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

fn bench_monte_carlo(c: &mut Criterion) {
    let inst = mixture_instance(6, 200, 3);
    let delta = 1e-3;
    let opts = DesignOptions::with_mode(DesignMode::Full);
    let sol = solve_master(&inst, delta, &opts).unwrap();
    let norm = inst.noise.norm(delta, inst.m()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let h = assemble_contrast(&sol, &norm, &mut rng, &opts).unwrap();
    let solver = SolverOptions::default();

    let mut group = c.benchmark_group("monte_carlo_risk");
    group.sample_size(10);
    for &parallel in &[false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new(name, 32), &parallel, |bch, &p| {
            bch.iter(|| {
                monte_carlo_risk(&inst, &h, 1.0, 0.05, 32, 11, p, &solver).unwrap();
            })
        });
    }
    group.finish();
}

fn bench_mixture_sampling(c: &mut Criterion) {
    let inst = mixture_instance(8, 1000, 7);
    let model = match &inst.noise {
        NoiseFamily::Mixture(m) => m.clone(),
        _ => unreachable!(),
    };
    let x = DVector::from_element(8, 1.0 / 8.0);

    let mut group = c.benchmark_group("mixture_observation_batch");
    for &parallel in &[false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new(name, 256), &parallel, |bch, &p| {
            bch.iter(|| {
                par::map_indexed(p, 256, |i| {
                    let mut rng = ChaCha12Rng::seed_from_u64(100);
                    rng.set_stream(i as u64);
                    sample_mixture(&model, &x, &mut rng).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_gauge_batch(c: &mut Criterion) {
    let inst = mixture_instance(8, 100, 9);
    let norm = inst.noise.norm(1e-3, inst.m()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let vectors: Vec<DVector<f64>> = (0..4096)
        .map(|_| standard_normal_vector(8, &mut rng))
        .collect();

    let mut group = c.benchmark_group("noise_norm_batch");
    for &parallel in &[false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new(name, 4096), &parallel, |bch, &p| {
            bch.iter(|| par::map_slice(p, &vectors, |v| norm.evaluate(v).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_monte_carlo, bench_mixture_sampling, bench_gauge_batch);
criterion_main!(benches);
