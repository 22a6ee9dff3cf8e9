//! The polyhedral estimator, Monte-Carlo risk evaluation, the least-squares
//! baseline, and small-scale lower-bound oracles for the certified
//! bounding quantities.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::conic::{ConicBuilder, LinExpr, SolverOptions};
use crate::design::ContrastMatrix;
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::linalg::lp_norm;
use crate::par;
use crate::sets::{Ellitope, SignalSet};

/// Result of one polyhedral estimation: the recovered signal, its image, and
/// the attained sup-norm residual.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub x_hat: DVector<f64>,
    pub w_hat: DVector<f64>,
    pub residual: f64,
    pub iterations: u32,
    pub r_prim: f64,
    pub r_dual: f64,
}

/// Solves `min_{x in X} || H^T (omega - A x) ||_inf` and maps the minimizer
/// through `B`.
pub fn estimate(
    omega: &DVector<f64>,
    h: &ContrastMatrix,
    signal: &SignalSet,
    a: &DMatrix<f64>,
    b_mat: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<EstimateResult> {
    if h.is_empty() {
        return Err(Error::InvalidParameter(
            "estimate undefined for an empty contrast matrix".into(),
        ));
    }
    if omega.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "estimate observation",
            expected: a.nrows(),
            actual: omega.len(),
        });
    }
    let n = a.ncols();
    let mut builder = ConicBuilder::new();
    let x = builder.vars(n);
    let tau = builder.var();
    signal.constrain_membership(&mut builder, &x.exprs())?;
    // Precompute H^T A rows and H^T omega.
    let hta = h.h.transpose() * a;
    let hto = h.h.transpose() * omega;
    for i in 0..h.ncols() {
        let mut e = LinExpr::constant(-hto[i]);
        for j in 0..n {
            e.add_term(x.index(j), hta[(i, j)]);
        }
        builder.abs_le(&e, &tau);
    }
    builder.minimize(&tau);
    let sol = builder.solve(opts)?;
    let x_hat = sol.vector(&x);
    Ok(EstimateResult {
        w_hat: b_mat * &x_hat,
        x_hat,
        residual: sol.value(&tau).max(0.0),
        iterations: sol.iterations,
        r_prim: sol.r_prim,
        r_dual: sol.r_dual,
    })
}

/// Least-squares baseline `A^{-1} omega`, or the minimal-norm pseudo-inverse
/// solution when `A` is singular or rectangular.
pub fn least_squares_baseline(omega: &DVector<f64>, a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if omega.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "least squares",
            expected: a.nrows(),
            actual: omega.len(),
        });
    }
    if a.is_square() {
        if let Some(lu_sol) = a.clone().lu().solve(omega) {
            let resid = (a * &lu_sol - omega).amax();
            if resid.is_finite() && resid <= 1e-6 * omega.amax().max(1.0) {
                return Ok(lu_sol);
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let pinv = a
        .clone()
        .pseudo_inverse(1e-12 * max_sv.max(1.0))
        .map_err(|e| Error::InvalidParameter(format!("pseudo-inverse failed: {e}")))?;
    Ok(pinv * omega)
}

/// Which feasible region a bounding oracle maximizes over.
pub enum OracleRegion<'a> {
    /// The symmetrization of the signal set.
    Symmetrized(&'a SignalSet),
    /// The ellitope alone.
    Ellitope(&'a Ellitope),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleBudget {
    pub random_restarts: usize,
    pub ascent_iters: usize,
    pub max_dim: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { random_restarts: 4, ascent_iters: 5, max_dim: 8 }
    }
}

/// Desk-scale lower bound on `max { x^T V x : x in region, ||G^T A x||_inf <= 1 }`
/// by vertex-seeded projected gradient ascent. Every candidate is projected
/// into the feasible set, so the returned value never exceeds the true
/// maximum; it is used to validate certified upper bounds from below.
pub fn p_bound_oracle(
    v: &DMatrix<f64>,
    region: OracleRegion<'_>,
    g: &DMatrix<f64>,
    a: &DMatrix<f64>,
    seed: u64,
    budget: &OracleBudget,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = a.ncols();
    if n > budget.max_dim {
        return Err(Error::InvalidParameter(format!(
            "oracle limited to dimension {} (got {n})",
            budget.max_dim
        )));
    }
    let v_sym = crate::linalg::symmetrized(v);
    let gta = g.transpose() * a;

    let project = |y: &DVector<f64>| -> Result<Option<DVector<f64>>> {
        let mut b = ConicBuilder::new();
        let p = b.vars(n);
        let t = b.var();
        match &region {
            OracleRegion::Symmetrized(set) => set.constrain_symmetrized(&mut b, &p.exprs())?,
            OracleRegion::Ellitope(ell) => ell.constrain_membership(&mut b, &p.exprs())?,
        }
        for i in 0..gta.nrows() {
            let mut e = LinExpr::zero();
            for j in 0..n {
                e.add_term(p.index(j), gta[(i, j)]);
            }
            b.abs_le(&e, &LinExpr::constant(1.0));
        }
        let diffs: Vec<LinExpr> = (0..n)
            .map(|j| p.expr(j).minus(&LinExpr::constant(y[j])))
            .collect();
        b.quad_le(&diffs, &t);
        b.minimize(&t);
        match b.solve(opts) {
            Ok(sol) => Ok(Some(sol.vector(&p))),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    // Candidate starts: polytope vertex images (and sign flips), the top
    // eigenvector of V, and random directions.
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    let vertices = match &region {
        OracleRegion::Symmetrized(set) => set.polytope.vertex_images(),
        OracleRegion::Ellitope(_) => Vec::new(),
    };
    for vert in &vertices {
        candidates.push(vert.clone());
        candidates.push(-vert);
    }
    let (_, vecs) = crate::linalg::eigen_descending(&v_sym);
    candidates.push(vecs.column(0).into_owned());
    candidates.push(-vecs.column(0).into_owned());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..budget.random_restarts {
        candidates.push(crate::linalg::random_unit_vector(n, &mut rng) * 4.0);
    }

    let mut best: f64 = 0.0; // the origin is always feasible
    for cand in candidates {
        let mut p = match project(&cand)? {
            Some(p) => p,
            None => continue,
        };
        best = best.max((p.transpose() * &v_sym * &p)[0]);
        for _ in 0..budget.ascent_iters {
            let grad = &v_sym * &p * 2.0;
            let gnorm = grad.norm();
            if gnorm < 1e-12 {
                break;
            }
            let step = (p.norm().max(1.0)) / gnorm;
            let trial = &p + grad * step;
            match project(&trial)? {
                Some(next) => {
                    let val = (next.transpose() * &v_sym * &next)[0];
                    if val > best {
                        best = val;
                    }
                    let moved = (&next - &p).norm();
                    p = next;
                    if moved < 1e-10 {
                        break;
                    }
                }
                None => break,
            }
        }
    }
    Ok(best)
}

/// One Monte-Carlo trial outcome.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub error: f64,
    /// Whether the noise event `||H^T xi||_inf <= 1` held in this trial.
    pub noise_ok: bool,
    pub covered: bool,
}

/// Empirical risk statistics against a certified bound.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub trials: Vec<TrialOutcome>,
    pub epsilon: f64,
    pub bound: f64,
    /// Lower empirical quantile at level `1 - epsilon`: the k-th order
    /// statistic with `k = ceil((1 - eps) * trials)`.
    pub quantile: f64,
    pub coverage: f64,
}

impl RiskReport {
    pub fn exceed_fraction(&self) -> f64 {
        1.0 - self.coverage
    }

    pub fn errors(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.error).collect()
    }
}

/// Runs seeded Monte-Carlo risk evaluation of a contrast matrix: samples a
/// signal, draws an observation, estimates, and records the loss-norm error.
/// Trial `i` uses an independent generator stream derived from `(seed, i)`,
/// so results are reproducible and independent of the parallel schedule.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_risk(
    inst: &ProblemInstance,
    h: &ContrastMatrix,
    bound: f64,
    epsilon: f64,
    trials: usize,
    seed: u64,
    parallel: bool,
    opts: &SolverOptions,
) -> Result<RiskReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let outcomes: Vec<TrialOutcome> = par::try_map_indexed(parallel, trials, |i| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let x = inst.signal.sample(&mut rng, opts)?;
        let omega = inst.noise.sample_observation(&inst.a, &x, &mut rng)?;
        let noise = &omega - &inst.a * &x;
        let noise_ok = (h.h.transpose() * &noise).amax() <= 1.0;
        let est = estimate(&omega, h, &inst.signal, &inst.a, &inst.b, opts)?;
        let error = lp_norm(&(&est.w_hat - &inst.b * &x), inst.theta);
        Ok::<TrialOutcome, Error>(TrialOutcome { error, noise_ok, covered: error <= bound })
    })?;
    let mut errors: Vec<f64> = outcomes.iter().map(|t| t.error).collect();
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((1.0 - epsilon) * trials as f64).ceil().max(1.0) as usize;
    let quantile = errors[k.min(trials) - 1];
    let coverage = outcomes.iter().filter(|t| t.covered).count() as f64 / trials as f64;
    Ok(RiskReport { trials: outcomes, epsilon, bound, quantile, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{ColumnInfo, ContrastSide};
    use crate::noise::NoiseFamily;
    use crate::sets::PolytopeImage;
    use approx::assert_relative_eq;

    fn contrast_from(h: DMatrix<f64>, delta: f64) -> ContrastMatrix {
        let cols = h.ncols();
        ContrastMatrix {
            h,
            columns: vec![ColumnInfo { side: ContrastSide::Ellitope, weight: 1.0 }; cols],
            delta,
        }
    }

    fn simple_instance(n: usize) -> ProblemInstance {
        let ell = Ellitope::euclidean_ball(n, 2.0).unwrap();
        let poly = PolytopeImage::l1_ball(n, 3.0).unwrap();
        let signal = SignalSet::new(ell, poly, vec![]).unwrap();
        ProblemInstance {
            a: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            signal,
            noise: NoiseFamily::Gaussian { sigma_bar: 0.1 },
            theta: 2.0,
        }
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let n = 4;
        let inst = simple_instance(n);
        let x0 = DVector::from_vec(vec![0.5, -0.25, 0.3, 0.1]);
        let omega = &inst.a * &x0;
        let h = contrast_from(DMatrix::identity(n, n) * 0.5, 0.01);
        let est = estimate(&omega, &h, &inst.signal, &inst.a, &inst.b, &SolverOptions::default())
            .unwrap();
        assert!(est.residual <= 1e-7);
        assert_relative_eq!(est.w_hat, x0, epsilon = 1e-5);
    }

    #[test]
    fn empty_contrast_rejected() {
        let n = 3;
        let inst = simple_instance(n);
        let omega = DVector::zeros(n);
        let h = ContrastMatrix::empty(n, 0.01);
        assert!(matches!(
            estimate(&omega, &h, &inst.signal, &inst.a, &inst.b, &SolverOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn estimate_beats_true_point_residual() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let n = 4;
        let inst = simple_instance(n);
        let opts = SolverOptions::default();
        for _ in 0..10 {
            let x0 = inst.signal.sample(&mut rng, &opts).unwrap();
            let omega = crate::noise::sample_gaussian(&x0, &inst.a, 0.1, &mut rng);
            let h = contrast_from(DMatrix::identity(n, n), 0.01);
            let est = estimate(&omega, &h, &inst.signal, &inst.a, &inst.b, &opts).unwrap();
            let true_resid = (h.h.transpose() * (&omega - &inst.a * &x0)).amax();
            assert!(est.residual <= true_resid + 1e-6);
            assert!(inst.signal.contains(&est.x_hat, 1e-5, &opts).unwrap());
        }
    }

    #[test]
    fn least_squares_identities() {
        let a = DMatrix::<f64>::identity(3, 3);
        let omega = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_relative_eq!(least_squares_baseline(&omega, &a).unwrap(), omega);

        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let a = crate::linalg::random_with_condition(4, 4, 50.0, &mut rng);
        let x = crate::linalg::standard_normal_vector(4, &mut rng);
        let omega = &a * &x;
        assert_relative_eq!(least_squares_baseline(&omega, &a).unwrap(), x, epsilon = 1e-8);
    }

    #[test]
    fn least_squares_minimal_norm_on_singular() {
        // Singular A: the pseudo-inverse solution solves the normal equations
        // and has minimal norm among solutions.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let omega = DVector::from_vec(vec![2.0, -1.0, 0.0]);
        let x = least_squares_baseline(&omega, &a).unwrap();
        // Normal equations: A^T A x = A^T omega.
        assert_relative_eq!(
            a.transpose() * &a * &x,
            a.transpose() * &omega,
            epsilon = 1e-10
        );
        // Any other solution x + t e3 has larger norm; x3 must vanish.
        assert!(x[2].abs() < 1e-12);
    }

    #[test]
    fn oracle_trivial_cases() {
        let n = 3;
        let inst = simple_instance(n);
        let opts = SolverOptions::default();
        let g = DMatrix::identity(n, n);
        // V = 0 gives 0.
        let v = DMatrix::zeros(n, n);
        let val = p_bound_oracle(
            &v,
            OracleRegion::Symmetrized(&inst.signal),
            &g,
            &inst.a,
            5,
            &OracleBudget::default(),
            &opts,
        )
        .unwrap();
        assert!(val.abs() <= 1e-10);

        // Huge contrasts shrink the feasible set towards the origin, so the
        // value cannot exceed the unconstrained maximum over the set.
        let v = DMatrix::identity(n, n);
        let unconstrained = p_bound_oracle(
            &v,
            OracleRegion::Symmetrized(&inst.signal),
            &(DMatrix::identity(n, n) * 1e-9),
            &inst.a,
            5,
            &OracleBudget::default(),
            &opts,
        )
        .unwrap();
        let constrained = p_bound_oracle(
            &v,
            OracleRegion::Symmetrized(&inst.signal),
            &(DMatrix::identity(n, n) * 1e6),
            &inst.a,
            5,
            &OracleBudget::default(),
            &opts,
        )
        .unwrap();
        assert!(constrained <= unconstrained + 1e-8);
        // Ball of radius 2: max ||x||^2 = 4 when contrasts are inactive.
        assert!(unconstrained <= 4.0 + 1e-6);
        assert!(unconstrained >= 3.5);

        let too_big = p_bound_oracle(
            &DMatrix::zeros(9, 9),
            OracleRegion::Ellitope(&Ellitope::euclidean_ball(9, 1.0).unwrap()),
            &DMatrix::identity(9, 9),
            &DMatrix::identity(9, 9),
            5,
            &OracleBudget::default(),
            &opts,
        );
        assert!(too_big.is_err());
    }

    #[test]
    fn monte_carlo_zero_noise_all_exact() {
        let n = 3;
        let mut inst = simple_instance(n);
        inst.noise = NoiseFamily::Gaussian { sigma_bar: 1e-12 };
        let h = contrast_from(DMatrix::identity(n, n), 0.01);
        let report = monte_carlo_risk(
            &inst,
            &h,
            1e-6,
            0.05,
            20,
            42,
            true,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(report.quantile <= 1e-6);
        assert!(report.coverage >= 0.95);
    }

    #[test]
    fn monte_carlo_deterministic_across_schedules() {
        let n = 3;
        let inst = simple_instance(n);
        let h = contrast_from(DMatrix::identity(n, n), 0.01);
        let opts = SolverOptions::default();
        let a = monte_carlo_risk(&inst, &h, 0.5, 0.05, 12, 7, true, &opts).unwrap();
        let b = monte_carlo_risk(&inst, &h, 0.5, 0.05, 12, 7, false, &opts).unwrap();
        for (x, y) in a.trials.iter().zip(b.trials.iter()) {
            assert_eq!(x.error.to_bits(), y.error.to_bits());
        }
    }
}
