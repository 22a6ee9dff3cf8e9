//! Config-driven experiment runs: random instance generation with prescribed
//! conditioning, the per-mode design pipeline with the pilot confidence
//! split, shared Monte-Carlo evaluation of all estimators, and the run
//! record that makes a rerun reproducible.

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use polyest::conic::SolverOptions;
use polyest::design::{
    assemble_contrast, certified_risk, solve_master, solve_master_gaussian, ContrastMatrix,
    ContrastSide, DesignMode, DesignOptions, DesignSolution,
};
use polyest::estimator::{estimate, least_squares_baseline};
use polyest::instance::ProblemInstance;
use polyest::linalg::{
    eigen_descending, lp_norm, random_psd_unit_spectral, random_unit_vector,
    random_with_condition,
};
use polyest::noise::{MixtureModel, NoiseFamily};
use polyest::par;
use polyest::sets::{Ellitope, ExtraConstraint, MonotoneSet, PolytopeImage, SignalSet};

use crate::config::{ExperimentConfig, ExperimentKind};

/// Ellitope `{ ||x||_2 <= rho2, ||x||_inf <= rho_inf }`.
pub fn two_norm_sup_norm_ellitope(n: usize, rho2: f64, rho_inf: f64) -> Result<Ellitope> {
    let mut t: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            m[(k, k)] = 1.0 / (rho_inf * rho_inf);
            m
        })
        .collect();
    t.push(DMatrix::identity(n, n) / (rho2 * rho2));
    Ok(Ellitope::new(
        DMatrix::identity(n, n),
        t,
        MonotoneSet::unit_box(n + 1),
    )?)
}

/// Builds the first experiment's instance: random square sensing matrix with
/// the configured condition number, random rectangular target map, one-norm
/// ball polytope, Gaussian noise.
pub fn build_instance_one(cfg: &ExperimentConfig, rng: &mut ChaCha12Rng) -> Result<ProblemInstance> {
    let n = cfg.n;
    let a = random_with_condition(n, n, cfg.cond_a, rng);
    let b = random_with_condition(cfg.nu(), n, cfg.cond_b, rng);
    let ell = two_norm_sup_norm_ellitope(n, cfg.rho2, cfg.rho_inf)?;
    let poly = PolytopeImage::l1_ball(n, cfg.rho1)?;
    let signal = SignalSet::new(ell, poly, vec![])?;
    Ok(ProblemInstance {
        a,
        b,
        signal,
        noise: NoiseFamily::Gaussian { sigma_bar: cfg.sigma },
        theta: cfg.theta(),
    })
}

/// Builds the second experiment's instance: unit-norm component means,
/// random PSD component covariances of unit spectral norm, the probability
/// simplex inside the standard-vertex polytope, identity target map.
pub fn build_instance_two(cfg: &ExperimentConfig, rng: &mut ChaCha12Rng) -> Result<ProblemInstance> {
    let n = cfg.n;
    let means: Vec<DVector<f64>> = (0..n).map(|_| random_unit_vector(n, rng)).collect();
    let covs: Vec<DMatrix<f64>> = (0..n).map(|_| random_psd_unit_spectral(n, rng)).collect();
    let model = MixtureModel::new(means, covs, cfg.n_obs)?;
    let a = model.a_matrix();
    let ell = two_norm_sup_norm_ellitope(n, cfg.rho2, cfg.rho_inf)?;
    let poly = PolytopeImage::new(
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
    )?;
    let signal = SignalSet::new(ell, poly, vec![ExtraConstraint::Simplex])?;
    Ok(ProblemInstance {
        a,
        b: DMatrix::identity(n, n),
        signal,
        noise: NoiseFamily::Mixture(model),
        theta: cfg.theta(),
    })
}

pub fn build_instance(cfg: &ExperimentConfig, rng: &mut ChaCha12Rng) -> Result<ProblemInstance> {
    match cfg.kind {
        ExperimentKind::L1Ellitope => build_instance_one(cfg, rng),
        ExperimentKind::Mixture => build_instance_two(cfg, rng),
    }
}

/// Which program builder to use for an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    /// The general master program.
    Master,
    /// The Gaussian specialization for the one-norm-ball geometry.
    Gaussian,
}

impl Program {
    pub fn for_kind(kind: ExperimentKind) -> Program {
        match kind {
            ExperimentKind::L1Ellitope => Program::Gaussian,
            ExperimentKind::Mixture => Program::Master,
        }
    }

    /// Picks the specialization when the instance's structure admits it.
    pub fn auto(inst: &ProblemInstance) -> Program {
        if polyest::design::detect_ball_geometry(inst).is_ok() {
            Program::Gaussian
        } else {
            Program::Master
        }
    }
}

fn solve_with_program(
    program: Program,
    inst: &ProblemInstance,
    delta: f64,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    let sol = match program {
        Program::Gaussian => solve_master_gaussian(inst, delta, opts)?,
        Program::Master => solve_master(inst, delta, opts)?,
    };
    Ok(sol)
}

/// One designed estimator: solution, assembled contrast, and its certificate.
pub struct DesignedEstimator {
    pub mode: DesignMode,
    pub solution: DesignSolution,
    pub contrast: ContrastMatrix,
    pub delta: f64,
    pub epsilon: f64,
    pub bound: f64,
}

/// Column budget of a mode before pruning, `M + J` specialized to the blocks
/// the mode uses.
fn column_budget(inst: &ProblemInstance, mode: DesignMode) -> Result<usize> {
    let norm = inst.noise.norm(0.5, inst.m())?;
    let m_cols = if mode.uses_ellitope() { norm.latent_dim() } else { 0 };
    let j_cols = if mode.uses_polytope() { inst.signal.polytope.num_vertices() } else { 0 };
    Ok(m_cols + j_cols)
}

/// Designs one mode at target risk level `epsilon`: pilot confidence split
/// `delta = epsilon / (M + J)`, one re-solve at `epsilon / mu` when pruning
/// leaves `mu` columns, falling back to the pilot if the refinement does not
/// keep `epsilon` or improve the bound.
pub fn design_with_pilot(
    program: Program,
    inst: &ProblemInstance,
    epsilon: f64,
    mode: DesignMode,
    rng: &mut ChaCha12Rng,
) -> Result<DesignedEstimator> {
    let opts = DesignOptions::with_mode(mode);
    let budget = column_budget(inst, mode)?;
    let delta0 = epsilon / budget as f64;
    let sol0 = solve_with_program(program, inst, delta0, &opts)?;
    let norm0 = inst.noise.norm(delta0, inst.m())?;
    let h0 = assemble_contrast(&sol0, &norm0, rng, &opts)?;
    let (eps0, bound0) = certified_risk(
        &sol0,
        h0.count_side(ContrastSide::Ellitope),
        h0.count_side(ContrastSide::Polytope),
        delta0,
    );
    let mu0 = h0.ncols();
    let mut chosen = DesignedEstimator {
        mode,
        solution: sol0,
        contrast: h0,
        delta: delta0,
        epsilon: eps0,
        bound: bound0,
    };
    if mu0 > 0 && mu0 < budget {
        let delta1 = epsilon / mu0 as f64;
        let sol1 = solve_with_program(program, inst, delta1, &opts)?;
        let norm1 = inst.noise.norm(delta1, inst.m())?;
        let h1 = assemble_contrast(&sol1, &norm1, rng, &opts)?;
        let (eps1, bound1) = certified_risk(
            &sol1,
            h1.count_side(ContrastSide::Ellitope),
            h1.count_side(ContrastSide::Polytope),
            delta1,
        );
        if eps1 <= epsilon + 1e-12 && bound1 <= chosen.bound {
            chosen = DesignedEstimator {
                mode,
                solution: sol1,
                contrast: h1,
                delta: delta1,
                epsilon: eps1,
                bound: bound1,
            };
        }
    }
    Ok(chosen)
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSummary {
    pub mode: String,
    pub delta: f64,
    pub epsilon: f64,
    pub phi_gamma: f64,
    pub rho: f64,
    pub varsigma: f64,
    pub objective: f64,
    pub bound: f64,
    pub cols_ellitope: usize,
    pub cols_polytope: usize,
    pub eigenvalues_u: Vec<f64>,
    pub eigenvalues_s: Vec<f64>,
    pub eigenvalues_us: Vec<f64>,
    pub solver_iterations: u32,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorRisk {
    pub estimator: String,
    pub bound: Option<f64>,
    pub epsilon: Option<f64>,
    pub errors: Vec<f64>,
    /// Lower empirical quantile at level `1 - epsilon` (order statistic
    /// `ceil((1 - eps) * trials)`); absent for the baseline.
    pub quantile: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub config_hash: String,
    pub n: usize,
    pub m: usize,
    pub nu: usize,
    pub singular_values_a: Vec<f64>,
    pub singular_values_b: Vec<f64>,
    pub designs: Vec<DesignSummary>,
    pub risk: Vec<EstimatorRisk>,
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

fn eig_list(m: &DMatrix<f64>) -> Vec<f64> {
    eigen_descending(m).0.iter().cloned().collect()
}

fn summarize(d: &DesignedEstimator) -> DesignSummary {
    let sol = &d.solution;
    let us = &sol.u_mat + &sol.s_mat;
    DesignSummary {
        mode: d.mode.label().to_string(),
        delta: d.delta,
        epsilon: d.epsilon,
        phi_gamma: sol.phi_gamma,
        rho: sol.rho,
        varsigma: sol.varsigma,
        objective: sol.objective,
        bound: d.bound,
        cols_ellitope: d.contrast.count_side(ContrastSide::Ellitope),
        cols_polytope: d.contrast.count_side(ContrastSide::Polytope),
        eigenvalues_u: eig_list(&sol.u_mat),
        eigenvalues_s: eig_list(&sol.s_mat),
        eigenvalues_us: eig_list(&us),
        solver_iterations: sol.diagnostics.iterations,
        violations: sol.diagnostics.violations.clone(),
    }
}

/// Runs a configured experiment: builds the instance from `(config, seed)`,
/// designs the full, ellitope-only, and polytope-only estimators at the
/// target risk level, and evaluates all of them plus the least-squares
/// baseline on a shared set of Monte-Carlo trials. `trials = 0` produces a
/// design-only record.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, parallel: bool) -> Result<RunRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let inst = build_instance(cfg, &mut rng)?;
    let solver = SolverOptions::default();

    let modes = [DesignMode::Full, DesignMode::EllitopeOnly, DesignMode::PolytopeOnly];
    let mut designed = Vec::new();
    for (i, &mode) in modes.iter().enumerate() {
        let mut mode_rng = ChaCha12Rng::seed_from_u64(seed);
        mode_rng.set_stream(1000 + i as u64);
        let d = design_with_pilot(Program::for_kind(cfg.kind), &inst, cfg.epsilon, mode, &mut mode_rng)
            .with_context(|| format!("design failed in mode {}", mode.label()))?;
        designed.push(d);
    }

    let mut record = RunRecord {
        config: cfg.clone(),
        seed,
        config_hash: cfg.run_hash(seed),
        n: inst.n(),
        m: inst.m(),
        nu: inst.nu(),
        singular_values_a: sorted_singular_values(&inst.a),
        singular_values_b: sorted_singular_values(&inst.b),
        designs: designed.iter().map(summarize).collect(),
        risk: Vec::new(),
    };

    if cfg.trials == 0 {
        return Ok(record);
    }

    // Shared trials: each estimator sees the same signals and observations.
    struct TrialErrors {
        per_mode: Vec<f64>,
        ls: f64,
    }
    let theta = inst.theta;
    let outcomes: Vec<TrialErrors> = par::try_map_indexed(parallel, cfg.trials, |i| {
        let mut trial_rng = ChaCha12Rng::seed_from_u64(seed);
        trial_rng.set_stream(2000 + i as u64);
        let x = inst.signal.sample(&mut trial_rng, &solver)?;
        let omega = inst.noise.sample_observation(&inst.a, &x, &mut trial_rng)?;
        let bx = &inst.b * &x;
        let mut per_mode = Vec::with_capacity(designed.len());
        for d in &designed {
            let est = estimate(&omega, &d.contrast, &inst.signal, &inst.a, &inst.b, &solver)?;
            per_mode.push(lp_norm(&(&est.w_hat - &bx), theta));
        }
        let ls = least_squares_baseline(&omega, &inst.a)?;
        let ls_err = lp_norm(&(&inst.b * &ls - &bx), theta);
        Ok::<TrialErrors, polyest::Error>(TrialErrors { per_mode, ls: ls_err })
    })?;

    for (k, d) in designed.iter().enumerate() {
        let errors: Vec<f64> = outcomes.iter().map(|t| t.per_mode[k]).collect();
        let coverage =
            errors.iter().filter(|&&e| e <= d.bound).count() as f64 / errors.len() as f64;
        let mut sorted = errors.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kth = ((1.0 - d.epsilon) * errors.len() as f64).ceil().max(1.0) as usize;
        let quantile = sorted[kth.min(errors.len()) - 1];
        record.risk.push(EstimatorRisk {
            estimator: format!("polyhedral-{}", d.mode.label()),
            bound: Some(d.bound),
            epsilon: Some(d.epsilon),
            errors,
            quantile: Some(quantile),
            coverage: Some(coverage),
        });
    }
    record.risk.push(EstimatorRisk {
        estimator: "least-squares".to_string(),
        bound: None,
        epsilon: None,
        errors: outcomes.iter().map(|t| t.ls).collect(),
        quantile: None,
        coverage: None,
    });
    Ok(record)
}

/// First-experiment entry point (kind check included).
pub fn run_experiment_one(cfg: &ExperimentConfig, seed: u64, parallel: bool) -> Result<RunRecord> {
    anyhow::ensure!(cfg.kind == ExperimentKind::L1Ellitope, "config kind must be l1-ellitope");
    run_experiment(cfg, seed, parallel)
}

/// Second-experiment entry point (kind check included).
pub fn run_experiment_two(cfg: &ExperimentConfig, seed: u64, parallel: bool) -> Result<RunRecord> {
    anyhow::ensure!(cfg.kind == ExperimentKind::Mixture, "config kind must be mixture");
    run_experiment(cfg, seed, parallel)
}
