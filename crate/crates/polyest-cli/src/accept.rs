//! The acceptance suite: ten property-based and statistical checks, each with
//! a hard runtime cap, exercising the decomposition cones, the conic duality,
//! the design programs, and the certified risk bounds end to end. Used by the
//! `verify` subcommand and by the `acceptance` integration test target.

use std::time::Instant;

use anyhow::Result;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use polyest::cones::{cone_check, extract_rank_one, kappa_const, ConeCheck, ConeMember};
use polyest::conic::SolverOptions;
use polyest::design::{
    assemble_ellitope_contrast, assemble_polytope_contrast, dual_max_over_ybar, solve_master,
    solve_master_gaussian, DesignMode, DesignOptions,
};
use polyest::estimator::{p_bound_oracle, OracleBudget, OracleRegion};
use polyest::linalg::{
    random_psd_unit_spectral, random_unit_vector, random_with_condition, standard_normal_vector,
};
use polyest::noise::{sample_mixture, tail_bound, MixtureModel};
use polyest::sets::{Ellitope, MonotoneSet, PolytopeImage};

use crate::config::ExperimentConfig;
use crate::experiments::{build_instance_one, build_instance_two, run_experiment};
use crate::report::emit_report;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:2} — {} ({}) [{:.1}s / limit {:.0}s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

fn finish(
    id: usize,
    name: &'static str,
    limit: f64,
    start: Instant,
    ok: bool,
    detail: String,
) -> CriterionResult {
    let seconds = start.elapsed().as_secs_f64();
    CriterionResult {
        id,
        name,
        pass: ok && seconds <= limit,
        detail: if seconds > limit {
            format!("{detail}; exceeded runtime limit")
        } else {
            detail
        },
        seconds,
        limit_seconds: limit,
    }
}

fn random_ball(m: usize, l: usize, rng: &mut ChaCha12Rng) -> Ellitope {
    let mut quads: Vec<DMatrix<f64>> = (0..l)
        .map(|_| random_psd_unit_spectral(m, rng))
        .collect();
    quads[l - 1] += DMatrix::identity(m, m) * 0.05;
    Ellitope::basic(quads, MonotoneSet::unit_box(l)).unwrap()
}

fn tight_rho(ball: &Ellitope, xi: &DMatrix<f64>) -> f64 {
    let kappa = kappa_const(ball.latent_dim(), ball.num_quadratics());
    let upper = ball.domain().as_box().unwrap();
    let mut worst: f64 = 0.0;
    for (s_l, &ub) in ball.t().iter().zip(upper.iter()) {
        worst = worst.max((xi * s_l).trace() / ub);
    }
    kappa * worst
}

/// 1. Randomized decomposition exactness on random cone members.
pub fn criterion_1() -> CriterionResult {
    let start = Instant::now();
    let ms = [2usize, 4, 8, 16];
    let ls = [1usize, 4, 8];
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE01);
    let mut worst_recon: f64 = 0.0;
    let mut worst_gauge: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let gauge_opts = SolverOptions::default();
    for trial in 0..200 {
        let m = ms[trial % ms.len()];
        let l = ls[(trial / ms.len()) % ls.len()];
        let ball = random_ball(m, l, &mut rng);
        let xi = random_psd_unit_spectral(m, &mut rng);
        // Half the members sit exactly on the cone boundary.
        let slack = if trial % 2 == 0 { 1.0 } else { 1.0 + rng.random_range(0.0..1.0) };
        let rho = tight_rho(&ball, &xi) * slack;
        let member = match cone_check(&ball, &xi, rho, 1e-9).unwrap() {
            ConeCheck::Member(mb) => mb,
            ConeCheck::Infeasible { .. } => {
                return finish(1, "decomposition exactness", 30.0, start, false,
                    format!("trial {trial}: constructed member rejected"));
            }
        };
        let d = match extract_rank_one(&member, &ball, &mut rng, 64) {
            Ok(d) => d,
            Err(e) => {
                return finish(1, "decomposition exactness", 30.0, start, false,
                    format!("trial {trial}: extraction failed: {e}"));
            }
        };
        worst_mass = worst_mass.max(d.sum_lambda() - rho);
        let recon = (d.reconstruct(m) - &xi).norm() / xi.norm().max(1e-30);
        worst_recon = worst_recon.max(recon);
        for g in &d.vectors {
            worst_gauge = worst_gauge.max(ball.gauge(g, &gauge_opts).unwrap());
        }
    }
    let ok = worst_mass <= 1e-9 && worst_gauge <= 1.0 + 1e-8 && worst_recon <= 1e-8;
    finish(1, "decomposition exactness", 30.0, start, ok,
        format!("200 members: max relative reconstruction {worst_recon:.2e}, max gauge {worst_gauge:.12}, max mass excess {worst_mass:.2e}"))
}

/// 2. Per-trial acceptance probability of the randomized extraction.
pub fn criterion_2() -> CriterionResult {
    let start = Instant::now();
    let ms = [2usize, 4, 8, 16];
    let ls = [1usize, 4, 8];
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE02);
    let trials = 400;
    let mut accepted = 0;
    for trial in 0..trials {
        let m = ms[trial % ms.len()];
        let l = ls[(trial / ms.len()) % ls.len()];
        let ball = random_ball(m, l, &mut rng);
        let xi = random_psd_unit_spectral(m, &mut rng);
        let rho = tight_rho(&ball, &xi);
        let member = ConeMember {
            xi,
            rho,
            certificate: ball.domain().as_box().unwrap().clone(),
        };
        if extract_rank_one(&member, &ball, &mut rng, 1).is_ok() {
            accepted += 1;
        }
    }
    let rate = accepted as f64 / trials as f64;
    let floor = 0.5 - 3.0 * (0.25_f64 / trials as f64).sqrt();
    finish(2, "extraction acceptance probability", 60.0, start, rate >= floor,
        format!("single-trial acceptance {rate:.4} over {trials} members (floor {floor:.4})"))
}

/// 3. Forward cone direction for admissible rank-one mixtures.
pub fn criterion_3() -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE03);
    let gauge_opts = SolverOptions::default();
    for trial in 0..100 {
        let m = 2 + trial % 5;
        let l = 1 + trial % 3;
        let ball = random_ball(m, l, &mut rng);
        let terms = 1 + rng.random_range(0..6);
        let mut xi = DMatrix::zeros(m, m);
        let mut mass = 0.0;
        for _ in 0..terms {
            let raw = standard_normal_vector(m, &mut rng);
            let gauge = ball.gauge(&raw, &gauge_opts).unwrap();
            let g = raw / gauge;
            let lam: f64 = rng.random_range(0.0..2.0);
            xi += &g * g.transpose() * lam;
            mass += lam;
        }
        let kappa = kappa_const(m, l);
        match cone_check(&ball, &xi, kappa * mass, 1e-8).unwrap() {
            ConeCheck::Member(_) => {}
            ConeCheck::Infeasible { violations, psd_defect } => {
                return finish(3, "forward cone direction", 10.0, start, false,
                    format!("trial {trial}: {} violations, psd defect {psd_defect:.2e}", violations.len()));
            }
        }
    }
    finish(3, "forward cone direction", 10.0, start, true,
        "100 admissible mixtures certified".to_string())
}

fn random_duality_geometry(seed: u64) -> (Ellitope, PolytopeImage, usize) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = 3 + (seed % 4) as usize; // up to 6
    let q_dim = 2 + (seed % 3) as usize;
    let p_dim = (q_dim + (seed % 2) as usize).min(6);
    let k_count = 1 + (seed % 3) as usize;
    let j_count = 2 + (seed % 3) as usize;
    let mut t: Vec<DMatrix<f64>> = Vec::new();
    t.push(random_psd_unit_spectral(n, &mut rng) + DMatrix::identity(n, n) * 0.2);
    for _ in 1..k_count {
        let l = random_unit_vector(n, &mut rng) * (0.4 + 1.2 * rng.random_range(0.0..1.0));
        t.push(&l * l.transpose());
    }
    let upper = DVector::from_fn(k_count, |_, _| 0.5 + rng.random_range(0.0..1.5));
    let ell = Ellitope::new(DMatrix::identity(n, n), t, MonotoneSet::Box { upper }).unwrap();
    let q = random_with_condition(p_dim, q_dim, 3.0, &mut rng);
    let r = random_with_condition(n, q_dim, 3.0, &mut rng);
    let v = DMatrix::from_fn(p_dim, j_count, |_, _| rng.random_range(-1.0..1.0));
    let poly = PolytopeImage::new(r, q, v).unwrap();
    (ell, poly, p_dim)
}

/// 4. Conic duality over the relaxed vertex set.
pub fn criterion_4() -> CriterionResult {
    let start = Instant::now();
    let opts = SolverOptions::tight();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE04);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let (ell, poly, p_dim) = random_duality_geometry(7000 + trial);
        let d = standard_normal_vector(p_dim, &mut rng);
        match dual_max_over_ybar(&d, &ell, &poly, &opts) {
            Ok(v) => {
                let gap = (v.primal - v.dual).abs() / (1.0 + v.primal.abs());
                worst = worst.max(gap);
                if gap > 1e-6 {
                    return finish(4, "conic duality", 120.0, start, false,
                        format!("trial {trial}: primal {} dual {} relative gap {gap:.2e}", v.primal, v.dual));
                }
            }
            Err(e) => {
                return finish(4, "conic duality", 120.0, start, false,
                    format!("trial {trial}: solver failure: {e}"));
            }
        }
    }
    finish(4, "conic duality", 120.0, start, true,
        format!("50 instances, worst relative gap {worst:.2e}"))
}

/// 5. Design dominance by zeroing either block.
pub fn criterion_5() -> CriterionResult {
    let start = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    for trial in 0..10u64 {
        // First-experiment analogue at n = 16.
        let cfg = {
            let mut c = ExperimentConfig::experiment_one(16);
            c.trials = 0;
            c
        };
        let mut rng = ChaCha12Rng::seed_from_u64(5100 + trial);
        let inst = match build_instance_one(&cfg, &mut rng) {
            Ok(i) => i,
            Err(e) => return finish(5, "design dominance", 600.0, start, false, format!("{e}")),
        };
        let delta = 1e-3;
        let solve = |mode| solve_master_gaussian(&inst, delta, &DesignOptions::with_mode(mode));
        let (full, e_only, p_only) = match (
            solve(DesignMode::Full),
            solve(DesignMode::EllitopeOnly),
            solve(DesignMode::PolytopeOnly),
        ) {
            (Ok(f), Ok(e), Ok(p)) => (f, e, p),
            _ => return finish(5, "design dominance", 600.0, start, false,
                format!("gaussian trial {trial}: solve failed")),
        };
        let gap = full.objective - e_only.objective.min(p_only.objective);
        worst = worst.max(gap);
        if gap > 1e-6 {
            return finish(5, "design dominance", 600.0, start, false,
                format!("gaussian trial {trial}: full exceeds min by {gap:.2e}"));
        }

        // Mixture analogue at n = 8.
        let cfg = {
            let mut c = ExperimentConfig::experiment_two(8);
            c.trials = 0;
            c.n_obs = 10_000;
            c
        };
        let mut rng = ChaCha12Rng::seed_from_u64(5200 + trial);
        let inst = match build_instance_two(&cfg, &mut rng) {
            Ok(i) => i,
            Err(e) => return finish(5, "design dominance", 600.0, start, false, format!("{e}")),
        };
        let solve = |mode| solve_master(&inst, delta, &DesignOptions::with_mode(mode));
        let (full, e_only, p_only) = match (
            solve(DesignMode::Full),
            solve(DesignMode::EllitopeOnly),
            solve(DesignMode::PolytopeOnly),
        ) {
            (Ok(f), Ok(e), Ok(p)) => (f, e, p),
            _ => return finish(5, "design dominance", 600.0, start, false,
                format!("mixture trial {trial}: solve failed")),
        };
        let gap = full.objective - e_only.objective.min(p_only.objective);
        worst = worst.max(gap);
        if gap > 1e-6 {
            return finish(5, "design dominance", 600.0, start, false,
                format!("mixture trial {trial}: full exceeds min by {gap:.2e}"));
        }
    }
    finish(5, "design dominance", 600.0, start, true,
        format!("20 instances, worst dominance gap {worst:.2e}"))
}

/// 6. Monte-Carlo risk coverage against the certified bounds.
pub fn criterion_6() -> CriterionResult {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::experiment_one(16);
    cfg.sigma = 0.01;
    cfg.epsilon = 0.01;
    cfg.trials = 300;
    let record = match run_experiment(&cfg, 0xACCE06, true) {
        Ok(r) => r,
        Err(e) => return finish(6, "risk coverage", 900.0, start, false, format!("{e}")),
    };
    let mut details = Vec::new();
    let mut ok = true;
    for risk in &record.risk {
        let (Some(eps), Some(coverage)) = (risk.epsilon, risk.coverage) else {
            continue; // baseline has no certificate
        };
        let trials = risk.errors.len() as f64;
        let se = (eps * (1.0 - eps) / trials).sqrt();
        let exceed = 1.0 - coverage;
        if exceed > eps + 3.0 * se {
            ok = false;
        }
        details.push(format!("{}: exceed {exceed:.4} vs cap {:.4}", risk.estimator, eps + 3.0 * se));
    }
    finish(6, "risk coverage", 900.0, start, ok, details.join("; "))
}

/// 7. Lower-bound oracles never exceed the certified bounds.
pub fn criterion_7() -> CriterionResult {
    let start = Instant::now();
    let solver = SolverOptions::default();
    let budget = OracleBudget { random_restarts: 3, ascent_iters: 4, max_dim: 8 };
    let mut checked = 0usize;
    for trial in 0..50u64 {
        let gaussian = trial % 2 == 0;
        let (inst, sol, delta);
        if gaussian {
            let mut cfg = ExperimentConfig::experiment_one(4 + (trial % 3) as usize);
            cfg.rho1 = 2.0;
            cfg.rho2 = 1.5;
            cfg.rho_inf = 1.2;
            cfg.sigma = 0.05;
            cfg.cond_a = 10.0;
            cfg.cond_b = 4.0;
            let mut rng = ChaCha12Rng::seed_from_u64(7100 + trial);
            inst = match build_instance_one(&cfg, &mut rng) {
                Ok(i) => i,
                Err(e) => return finish(7, "oracle sandwich", 300.0, start, false, format!("{e}")),
            };
            delta = 5e-3;
            sol = match solve_master_gaussian(&inst, delta, &DesignOptions::with_mode(DesignMode::Full)) {
                Ok(s) => s,
                Err(e) => return finish(7, "oracle sandwich", 300.0, start, false, format!("{e}")),
            };
        } else {
            let mut cfg = ExperimentConfig::experiment_two(4 + (trial % 3) as usize);
            cfg.n_obs = 500;
            let mut rng = ChaCha12Rng::seed_from_u64(7200 + trial);
            inst = match build_instance_two(&cfg, &mut rng) {
                Ok(i) => i,
                Err(e) => return finish(7, "oracle sandwich", 300.0, start, false, format!("{e}")),
            };
            delta = 5e-3;
            sol = match solve_master(&inst, delta, &DesignOptions::with_mode(DesignMode::Full)) {
                Ok(s) => s,
                Err(e) => return finish(7, "oracle sandwich", 300.0, start, false, format!("{e}")),
            };
        }
        let norm = inst.noise.norm(delta, inst.m()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7300 + trial);
        let h1 = match assemble_ellitope_contrast(&sol, &norm, &mut rng, 64) {
            Ok(h) => h,
            Err(e) => return finish(7, "oracle sandwich", 300.0, start, false, format!("{e}")),
        };
        let h2 = assemble_polytope_contrast(&sol, &norm).unwrap();
        if !h1.is_empty() {
            let val = p_bound_oracle(
                &sol.u_mat,
                OracleRegion::Ellitope(&inst.signal.ellitope),
                &h1.h,
                &inst.a,
                31 + trial,
                &budget,
                &solver,
            )
            .unwrap();
            let cap = sol.phi_gamma + sol.rho;
            if val > cap + 1e-6 * (1.0 + cap.abs()) {
                return finish(7, "oracle sandwich", 300.0, start, false,
                    format!("trial {trial}: ellitope oracle {val:.6} above certificate {cap:.6}"));
            }
            checked += 1;
        }
        if !h2.is_empty() {
            let val = p_bound_oracle(
                &sol.s_mat,
                OracleRegion::Symmetrized(&inst.signal),
                &h2.h,
                &inst.a,
                37 + trial,
                &budget,
                &solver,
            )
            .unwrap();
            if val > sol.varsigma + 1e-6 * (1.0 + sol.varsigma.abs()) {
                return finish(7, "oracle sandwich", 300.0, start, false,
                    format!("trial {trial}: polytope oracle {val:.6} above varsigma {:.6}", sol.varsigma));
            }
            checked += 1;
        }
    }
    finish(7, "oracle sandwich", 300.0, start, true,
        format!("{checked} oracle-vs-certificate comparisons on 50 instances"))
}

/// 8. The sub-Gaussian tail bound dominates simulation.
pub fn criterion_8() -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE08);
    let (n, d, n_obs) = (3usize, 3usize, 100usize);
    let means: Vec<DVector<f64>> = (0..n).map(|_| random_unit_vector(d, &mut rng)).collect();
    let covs: Vec<DMatrix<f64>> = (0..n).map(|_| random_psd_unit_spectral(d, &mut rng)).collect();
    let model = MixtureModel::new(means, covs, n_obs).unwrap();
    let a = model.a_matrix();
    let x = DVector::from_vec(vec![0.3, 0.45, 0.25]);
    let ax = &a * &x;
    let h = random_unit_vector(d, &mut rng) * 0.3;
    let draws = 100_000;
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let omega = sample_mixture(&model, &x, &mut rng).unwrap();
            h.dot(&(&omega - &ax)).abs()
        })
        .collect();
    let mut detail = Vec::new();
    let mut ok = true;
    for &tau in &[0.05_f64, 0.1, 0.2] {
        let freq = samples.iter().filter(|&&s| s > tau).count() as f64 / draws as f64;
        let bound = tail_bound(&model, &h, tau).unwrap();
        let se = (freq * (1.0 - freq) / draws as f64).sqrt().max(1e-9);
        if freq > bound.min(1.0) + 3.0 * se {
            ok = false;
        }
        detail.push(format!("tau {tau}: freq {freq:.5} vs bound {:.5}", bound.min(1.0)));
    }
    finish(8, "sub-Gaussian tail bound", 120.0, start, ok, detail.join("; "))
}

/// 9. Qualitative bound ordering on the mixture experiment.
pub fn criterion_9() -> CriterionResult {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::experiment_two(8);
    cfg.trials = 0;
    let record = match run_experiment(&cfg, 0xACCE09, true) {
        Ok(r) => r,
        Err(e) => return finish(9, "bound ordering", 600.0, start, false, format!("{e}")),
    };
    let find = |mode: &str| record.designs.iter().find(|d| d.mode == mode).map(|d| d.bound);
    let (Some(full), Some(e_only), Some(p_only)) =
        (find("full"), find("ellitope-only"), find("polytope-only"))
    else {
        return finish(9, "bound ordering", 600.0, start, false, "missing designs".into());
    };
    let ok = full <= p_only + 1e-9 && full <= e_only + 1e-9;
    finish(9, "bound ordering", 600.0, start, ok,
        format!("bounds: full {full:.4}, polytope-only {p_only:.4}, ellitope-only {e_only:.4}"))
}

/// 10. Byte-identical reruns from identical config and seed.
pub fn criterion_10() -> CriterionResult {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::experiment_one(6);
    cfg.trials = 8;
    cfg.cond_a = 50.0;
    let run = |dir: &std::path::Path| -> Result<Vec<(String, Vec<u8>)>> {
        let record = run_experiment(&cfg, 0xACCE10, true)?;
        let paths = emit_report(&record, dir)?;
        let mut out = Vec::new();
        for p in paths {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            out.push((name, std::fs::read(&p)?));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let (a, b) = match (run(d1.path()), run(d2.path())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return finish(10, "determinism", 300.0, start, false, format!("{e}"))
        }
    };
    if a.len() != b.len() {
        return finish(10, "determinism", 300.0, start, false, "artifact counts differ".into());
    }
    for ((na, ba), (nb, bb)) in a.iter().zip(b.iter()) {
        if na != nb || ba != bb {
            return finish(10, "determinism", 300.0, start, false, format!("{na} differs between reruns"));
        }
    }
    finish(10, "determinism", 300.0, start, true,
        format!("{} artifacts byte-identical across reruns", a.len()))
}

/// Runs the full suite in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
