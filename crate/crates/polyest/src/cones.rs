//! Matrix cones certifying decomposability of a PSD matrix into admissible
//! rank-one terms, and the randomized extraction of such decompositions.
//!
//! The cone pairs `(Xi, rho)` with `Tr(Xi S_l) <= (rho / kappa) s_l` for some
//! `s` in the ball's parameter set, where `kappa = 2 sqrt(2) ln(4 M^2 L)`.
//! Any mixture `sum lambda_j g_j g_j^T` of unit-gauge vectors lands in the
//! cone with `rho = kappa * sum lambda_j`; conversely a cone member can be
//! split — by randomized sign flips against an orthonormal DCT frame — into
//! at most `M` rank-one terms of unit gauge with total weight at most `rho`,
//! with per-trial success probability at least one half.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, psd_sqrt, symmetrized};
use crate::sets::Ellitope;

/// `kappa = 2 sqrt(2) ln(4 M^2 L)`.
pub fn kappa_const(m_dim: usize, l_count: usize) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * (4.0 * (m_dim * m_dim * l_count) as f64).ln()
}

/// Orthonormal DCT-II matrix: row `k`, column `j` is
/// `c_k cos(pi (2j + 1) k / (2M))` with `c_0 = sqrt(1/M)`, `c_k = sqrt(2/M)`.
pub fn dct_matrix(m: usize) -> DMatrix<f64> {
    assert!(m >= 1);
    let mf = m as f64;
    DMatrix::from_fn(m, m, |k, j| {
        let scale = if k == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
        scale * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * mf)).cos()
    })
}

/// A verified cone member: `Xi` PSD with certificate `s` in the ball's
/// parameter set such that `Tr(Xi S_l) <= (rho / kappa) s_l` for all `l`.
#[derive(Debug, Clone)]
pub struct ConeMember {
    pub xi: DMatrix<f64>,
    pub rho: f64,
    pub certificate: DVector<f64>,
}

/// Outcome of a cone membership check.
#[derive(Debug, Clone)]
pub enum ConeCheck {
    Member(ConeMember),
    Infeasible {
        /// Violated quadratic indices with their margins `Tr(Xi S_l) - (rho/kappa) s_l`.
        violations: Vec<(usize, f64)>,
        /// Most negative eigenvalue of `Xi` if it fails the PSD check.
        psd_defect: f64,
    },
}

impl ConeCheck {
    pub fn member(self) -> Result<ConeMember> {
        match self {
            ConeCheck::Member(m) => Ok(m),
            ConeCheck::Infeasible { violations, psd_defect } => Err(Error::InvalidParameter(
                format!("not a cone member: psd defect {psd_defect:.3e}, {} trace violations", violations.len()),
            )),
        }
    }
}

/// Checks `(Xi, rho)` against the cone of the given norm ball. For a box
/// parameter set the certificate `s = upper bound vector` is extremal, so the
/// trace inequalities are checked directly against it.
pub fn cone_check(ball: &Ellitope, xi: &DMatrix<f64>, rho: f64, tol: f64) -> Result<ConeCheck> {
    let m_dim = ball.latent_dim();
    if xi.nrows() != m_dim || xi.ncols() != m_dim {
        return Err(Error::DimensionMismatch {
            context: "cone check",
            expected: m_dim,
            actual: xi.nrows(),
        });
    }
    if rho < 0.0 {
        return Err(Error::InvalidParameter("rho must be nonnegative".into()));
    }
    let upper = ball.domain().as_box()?;
    let xi_sym = symmetrized(xi);
    let min_eig = min_symmetric_eigenvalue(&xi_sym);
    let scale = xi_sym.amax().max(1.0);
    let mut violations = Vec::new();
    let psd_defect = if min_eig < -tol.max(1e-10) * scale { min_eig } else { 0.0 };
    let kappa = kappa_const(m_dim, ball.num_quadratics());
    let slack = tol * rho.max(1.0);
    for (l, s_l) in ball.t().iter().enumerate() {
        let tr = (xi_sym.clone() * s_l).trace();
        let cap = rho / kappa * upper[l];
        if tr > cap + slack {
            violations.push((l, tr - cap));
        }
    }
    if violations.is_empty() && psd_defect == 0.0 {
        Ok(ConeCheck::Member(ConeMember { xi: xi_sym, rho, certificate: upper.clone() }))
    } else {
        Ok(ConeCheck::Infeasible { violations, psd_defect })
    }
}

/// A rank-one decomposition `Xi = sum lambda_j g_j g_j^T` with unit-gauge
/// vectors and `sum lambda_j <= rho`.
#[derive(Debug, Clone)]
pub struct RankOneDecomposition {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub trials_used: usize,
}

impl RankOneDecomposition {
    pub fn empty() -> Self {
        Self { lambdas: Vec::new(), vectors: Vec::new(), trials_used: 0 }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn sum_lambda(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn reconstruct(&self, dim: usize) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(dim, dim);
        for (l, g) in self.lambdas.iter().zip(self.vectors.iter()) {
            acc += g * g.transpose() * *l;
        }
        acc
    }
}

/// One sign-flip trial: `Z^eps = Z Diag(eps) O` and its scaled columns.
fn trial_columns<R: Rng + ?Sized>(
    z: &DMatrix<f64>,
    o: &DMatrix<f64>,
    rho: f64,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let m = z.ncols();
    let mut z_eps = z.clone();
    for j in 0..m {
        if rng.random_range(0.0..1.0_f64) < 0.5 {
            let col = -z_eps.column(j);
            z_eps.set_column(j, &col);
        }
    }
    let z_eps = z_eps * o;
    let scale = (m as f64 / rho).sqrt();
    (0..m).map(|j| (z_eps.column(j) * scale).into_owned()).collect()
}

/// Randomized extraction of a rank-one decomposition from a cone member.
///
/// Draws Rademacher signs, forms `Z Diag(eps) O` against the DCT frame `O`,
/// and accepts the first trial whose scaled columns all have gauge at most
/// one; each trial reconstructs `Xi` exactly, so only admissibility is
/// random. With per-trial acceptance probability at least one half the
/// default budget of 64 trials fails with probability at most `2^-64`.
pub fn extract_rank_one<R: Rng + ?Sized>(
    member: &ConeMember,
    ball: &Ellitope,
    rng: &mut R,
    max_trials: usize,
) -> Result<RankOneDecomposition> {
    let m = ball.latent_dim();
    let opts = SolverOptions::default();
    let scale = member.xi.amax();
    if member.rho <= 0.0 || scale == 0.0 {
        if scale > 1e-12 {
            return Err(Error::InvalidParameter(
                "rho = 0 requires Xi = 0 for cone members".into(),
            ));
        }
        return Ok(RankOneDecomposition::empty());
    }
    let z = psd_sqrt(&member.xi);
    let o = dct_matrix(m);
    let lambda = member.rho / m as f64;
    let mut best_gauge = f64::INFINITY;
    for trial in 1..=max_trials.max(1) {
        let cols = trial_columns(&z, &o, member.rho, rng);
        let mut max_gauge: f64 = 0.0;
        for g in &cols {
            max_gauge = max_gauge.max(ball.gauge(g, &opts)?);
            if max_gauge > 1.0 + 1e-10 {
                break;
            }
        }
        best_gauge = best_gauge.min(max_gauge);
        if max_gauge <= 1.0 + 1e-10 {
            let drop_tol = 1e-14 * z.amax().max(1.0) * (m as f64 / member.rho).sqrt();
            let mut lambdas = Vec::new();
            let mut vectors = Vec::new();
            for g in cols {
                if g.amax() > drop_tol {
                    lambdas.push(lambda);
                    vectors.push(g);
                }
            }
            return Ok(RankOneDecomposition { lambdas, vectors, trials_used: trial });
        }
    }
    Err(Error::ExtractionFailed { trials: max_trials, best_gauge })
}

/// Maps a latent decomposition into observation space: columns `h_j =
/// S_delta g_j`, which are admissible whenever the `g_j` have unit gauge.
/// Returns the contrast columns and their weights.
pub fn lift_to_contrasts(
    decomp: &RankOneDecomposition,
    s_delta: &DMatrix<f64>,
) -> (DMatrix<f64>, Vec<f64>) {
    let m = s_delta.nrows();
    let cols = decomp.len();
    let mut h = DMatrix::zeros(m, cols);
    for (j, g) in decomp.vectors.iter().enumerate() {
        h.set_column(j, &(s_delta * g));
    }
    (h, decomp.lambdas.clone())
}

/// Diagnostics from a sandwich check of the relaxation: given `G` with
/// `Tr(G S_l) <= s_l`, extraction must return total weight at most `kappa`
/// and admissible columns while reconstructing `G`.
#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub kappa: f64,
    pub sum_lambda: f64,
    pub max_gauge: f64,
    pub reconstruction_error: f64,
    pub trials_used: usize,
    pub admissible: bool,
}

/// Runs the extraction on a member of the relaxed convex hull and reports the
/// sandwich diagnostics; a test-harness utility.
pub fn verify_sandwich<R: Rng + ?Sized>(
    ball: &Ellitope,
    g_matrix: &DMatrix<f64>,
    rng: &mut R,
    max_trials: usize,
) -> Result<SandwichReport> {
    let m = ball.latent_dim();
    let l = ball.num_quadratics();
    let kappa = kappa_const(m, l);
    let member = cone_check(ball, g_matrix, kappa, 1e-9)?.member()?;
    let decomp = extract_rank_one(&member, ball, rng, max_trials)?;
    let opts = SolverOptions::default();
    let mut max_gauge: f64 = 0.0;
    for g in &decomp.vectors {
        max_gauge = max_gauge.max(ball.gauge(g, &opts)?);
    }
    let recon = decomp.reconstruct(m);
    let denom = g_matrix.norm().max(1e-30);
    Ok(SandwichReport {
        kappa,
        sum_lambda: decomp.sum_lambda(),
        max_gauge,
        reconstruction_error: (recon - symmetrized(g_matrix)).norm() / denom,
        trials_used: decomp.trials_used,
        admissible: max_gauge <= 1.0 + 1e-8,
    })
}

/// Exports a decomposition as CSV for audit: first line the weights, then the
/// vectors as columns, row-major.
pub fn decomposition_to_csv(decomp: &RankOneDecomposition, dim: usize) -> String {
    let mut out = String::new();
    let lams: Vec<String> = decomp.lambdas.iter().map(|l| format!("{l}")).collect();
    out.push_str(&lams.join(","));
    out.push('\n');
    for i in 0..dim {
        let row: Vec<String> = decomp.vectors.iter().map(|v| format!("{}", v[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
