//! Contrast design: the master convex program over the general noise family,
//! its Gaussian specialization for the two-norm/sup-norm/one-norm geometry,
//! assembly of admissible contrast matrices from solved designs, and the
//! certified risk bound.
//!
//! The master program minimizes `phi_T(gamma) + rho + varsigma` subject to
//! the loss LMI, the decomposition-cone membership of `(Theta, rho)`, the
//! ellitope-side quadratic domination, and the dualized polytope-side
//! constraints, one per defining vertex. A feasible solution converts into a
//! contrast matrix `H = [H1, H2]` whose polyhedral estimate has
//! `(M + J) delta`-risk at most `2 sqrt(phi_T(gamma) + rho + varsigma)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cones::{cone_check, extract_rank_one, kappa_const, lift_to_contrasts};
use crate::conic::{
    congruence_times_vec, ConicBuilder, LinExpr, SolveStatus, SolverOptions, SymExprMat, SymVar,
    VarBlock,
};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::linalg::{
    eigen_descending, lp_norm_gen, max_abs, min_symmetric_eigenvalue, symmetrized, QuadFactor,
};
use crate::noise::{NoiseKind, NoiseNorm};
use crate::sets::{Ellitope, PolytopeImage};

/// Which blocks of the master program are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    Full,
    EllitopeOnly,
    PolytopeOnly,
}

impl DesignMode {
    pub fn uses_ellitope(self) -> bool {
        self != DesignMode::PolytopeOnly
    }

    pub fn uses_polytope(self) -> bool {
        self != DesignMode::EllitopeOnly
    }

    pub fn label(self) -> &'static str {
        match self {
            DesignMode::Full => "full",
            DesignMode::EllitopeOnly => "ellitope-only",
            DesignMode::PolytopeOnly => "polytope-only",
        }
    }
}

impl std::str::FromStr for DesignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DesignMode::Full),
            "ellitope-only" => Ok(DesignMode::EllitopeOnly),
            "polytope-only" => Ok(DesignMode::PolytopeOnly),
            other => Err(Error::InvalidParameter(format!("unknown design mode {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub mode: DesignMode,
    pub solver: SolverOptions,
    /// Tolerance for the independent post-solve constraint re-verification.
    pub verify_tol: f64,
    pub max_extraction_trials: usize,
    pub prune_norm_tol: f64,
    pub prune_cos_tol: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            mode: DesignMode::Full,
            solver: SolverOptions::tight(),
            verify_tol: 1e-6,
            max_extraction_trials: 64,
            prune_norm_tol: 1e-12,
            prune_cos_tol: 1e-10,
        }
    }
}

impl DesignOptions {
    pub fn with_mode(mode: DesignMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

/// Dual certificates attached to one polytope-side constraint.
#[derive(Debug, Clone)]
pub struct PolytopeDuals {
    pub beta: DVector<f64>,
    pub eta: DVector<f64>,
    pub eps: Vec<DVector<f64>>,
    pub phi: DVector<f64>,
    pub psi: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub iterations: u32,
    pub r_prim: f64,
    pub r_dual: f64,
    /// Post-solve re-verification findings; empty means every constraint
    /// holds within the verification tolerance.
    pub violations: Vec<String>,
}

/// A solved design: the variables of the master program plus bookkeeping.
#[derive(Debug, Clone)]
pub struct DesignSolution {
    pub theta_mat: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub zeta: DVector<f64>,
    pub rho: f64,
    pub varsigma: f64,
    pub gamma: DVector<f64>,
    pub u_mat: DMatrix<f64>,
    pub s_mat: DMatrix<f64>,
    pub g: Vec<DVector<f64>>,
    pub duals: Vec<PolytopeDuals>,
    pub objective: f64,
    pub phi_gamma: f64,
    pub delta: f64,
    pub theta_loss: f64,
    pub mode: DesignMode,
    pub diagnostics: SolveDiagnostics,
}

impl DesignSolution {
    /// The radicand of the risk certificate, `phi_T(gamma) + rho + varsigma`.
    pub fn radicand(&self) -> f64 {
        self.phi_gamma + self.rho + self.varsigma
    }
}

/// Provenance of a contrast column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastSide {
    Ellitope,
    Polytope,
}

impl ContrastSide {
    pub fn label(self) -> &'static str {
        match self {
            ContrastSide::Ellitope => "ellitope-side",
            ContrastSide::Polytope => "polytope-side",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColumnInfo {
    pub side: ContrastSide,
    /// Rank-one mass for ellitope-side columns; the normalizing norm of the
    /// design vector for polytope-side columns.
    pub weight: f64,
}

/// An admissible contrast matrix: every column has noise norm at most one.
#[derive(Debug, Clone)]
pub struct ContrastMatrix {
    pub h: DMatrix<f64>,
    pub columns: Vec<ColumnInfo>,
    pub delta: f64,
}

impl ContrastMatrix {
    pub fn empty(m: usize, delta: f64) -> Self {
        Self { h: DMatrix::zeros(m, 0), columns: Vec::new(), delta }
    }

    pub fn ncols(&self) -> usize {
        self.h.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.ncols() == 0
    }

    pub fn count_side(&self, side: ContrastSide) -> usize {
        self.columns.iter().filter(|c| c.side == side).count()
    }

    pub fn concat(a: &ContrastMatrix, b: &ContrastMatrix) -> ContrastMatrix {
        assert_eq!(a.h.nrows(), b.h.nrows());
        let mut h = DMatrix::zeros(a.h.nrows(), a.ncols() + b.ncols());
        for j in 0..a.ncols() {
            h.set_column(j, &a.h.column(j));
        }
        for j in 0..b.ncols() {
            h.set_column(a.ncols() + j, &b.h.column(j));
        }
        let mut columns = a.columns.clone();
        columns.extend(b.columns.iter().cloned());
        ContrastMatrix { h, columns, delta: a.delta }
    }

    /// Drops columns of negligible norm and near-duplicate columns (absolute
    /// cosine similarity above `1 - cos_tol`), folding dropped rank-one mass
    /// into the kept column so reconstructions survive pruning. Shrinking the
    /// column count only tightens the risk level `eps = mu * delta`.
    pub fn pruned(&self, norm: &NoiseNorm, norm_tol: f64, cos_tol: f64) -> Result<ContrastMatrix> {
        let mut kept: Vec<usize> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for j in 0..self.ncols() {
            let col = self.h.column(j).into_owned();
            if norm.evaluate(&col)? < norm_tol {
                continue;
            }
            let nj = col.norm();
            let mut dup = None;
            for (slot, &k) in kept.iter().enumerate() {
                let ck = self.h.column(k);
                let cos = (col.dot(&ck.into_owned()) / (nj * ck.norm())).abs();
                if cos > 1.0 - cos_tol {
                    dup = Some(slot);
                    break;
                }
            }
            match dup {
                Some(slot) => weights[slot] += self.columns[j].weight,
                None => {
                    kept.push(j);
                    weights.push(self.columns[j].weight);
                }
            }
        }
        let mut h = DMatrix::zeros(self.h.nrows(), kept.len());
        let mut columns = Vec::with_capacity(kept.len());
        for (slot, &j) in kept.iter().enumerate() {
            h.set_column(slot, &self.h.column(j));
            columns.push(ColumnInfo { side: self.columns[j].side, weight: weights[slot] });
        }
        Ok(ContrastMatrix { h, columns, delta: self.delta })
    }
}

/// Risk certificate: `eps = (m_cols + j_cols) * delta` and the bound
/// `2 sqrt(phi_T(gamma) + rho + varsigma)`.
pub fn certified_risk(
    sol: &DesignSolution,
    m_cols: usize,
    j_cols: usize,
    delta: f64,
) -> (f64, f64) {
    let eps = (m_cols + j_cols) as f64 * delta;
    (eps, 2.0 * sol.radicand().max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// General master program
// ---------------------------------------------------------------------------

enum EpsHandle {
    Scalar { var: LinExpr, direction: DVector<f64> },
    Vector(VarBlock),
}

struct PolytopeBlockLayout {
    g: VarBlock,
    beta: VarBlock,
    eta: VarBlock,
    eps: Vec<EpsHandle>,
    phi: VarBlock,
    psi: VarBlock,
}

/// Solves the master design program for any supported instance. The
/// Euclidean-ball noise kind charges `rho = sigma^2 q^2 Tr(Theta)` exactly
/// (eigendecomposition is an exact rank-one split of a spherical ball);
/// the general kind goes through the relaxation cone with its `kappa` factor.
pub fn solve_master(
    inst: &ProblemInstance,
    delta: f64,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    inst.validate()?;
    let n = inst.n();
    let m = inst.m();
    let ell = &inst.signal.ellitope;
    let poly = &inst.signal.polytope;
    let norm = inst.noise.norm(delta, m)?;
    let ball = norm.ball();
    let m_lat = norm.latent_dim();
    let t_upper = ell.domain().as_box()?.clone();
    let s_upper = ball.domain().as_box()?.clone();
    let kappa = kappa_const(m_lat, norm.num_quadratics());
    let big_n = ell.latent_dim();
    let k_count = ell.num_quadratics();
    let p_dim = poly.y_dim();
    let q_dim = poly.w_dim();
    let j_count = poly.num_vertices();
    let use_e = opts.mode.uses_ellitope();
    let use_p = opts.mode.uses_polytope();

    let mut b = ConicBuilder::new();

    // Ellitope block: Xi PSD plus the charge rho.
    let mut xi_var: Option<SymVar> = None;
    let mut rho_expr = LinExpr::zero();
    if use_e {
        let xi = b.sym_matrix_var(m_lat);
        b.psd_var(&xi);
        match norm.kind {
            NoiseKind::EuclideanBall { .. } => {
                rho_expr = xi.trace().scaled(norm.euclidean_trace_weight()?);
            }
            NoiseKind::General => {
                let rho = b.var();
                b.nonneg(&rho);
                for (l, s_l) in ball.t().iter().enumerate() {
                    let tr = xi.weighted_trace(s_l);
                    b.nonneg(&rho.scaled(s_upper[l] / kappa).minus(&tr));
                }
                rho_expr = rho;
            }
        }
        xi_var = Some(xi);
    }

    let gamma_var = if use_e {
        let g = b.vars(k_count);
        for k in 0..k_count {
            b.nonneg(&g.expr(k));
        }
        Some(g)
    } else {
        None
    };

    let u_var = if use_e { Some(b.sym_matrix_var(n)) } else { None };
    let s_var = if use_p { Some(b.sym_matrix_var(n)) } else { None };

    // Loss LMI. For theta = 2 the certificate weights are all one and the
    // block matrix reduces to U + S - B^T B being PSD.
    let mut upper = SymExprMat::zeros(n);
    if let Some(u) = &u_var {
        upper.add_scaled(&SymExprMat::from_sym_var(u), 1.0);
    }
    if let Some(s) = &s_var {
        upper.add_scaled(&SymExprMat::from_sym_var(s), 1.0);
    }
    let zeta_var = if inst.theta == 2.0 {
        upper.add_const_scaled(&(inst.b.transpose() * &inst.b), -1.0);
        b.psd(&upper);
        None
    } else {
        let nu = inst.nu();
        let zeta = b.vars(nu);
        for i in 0..nu {
            b.nonneg(&zeta.expr(i));
        }
        let theta_star = crate::linalg::dual_exponent(inst.theta);
        if inst.theta == 1.0 {
            let mut sum = LinExpr::constant(1.0);
            for i in 0..nu {
                sum.add_term(zeta.index(i), -1.0);
            }
            b.nonneg(&sum);
        } else {
            let w = b.vars(nu);
            let one = LinExpr::constant(1.0);
            for i in 0..nu {
                b.power3(&w.expr(i), &one, &zeta.expr(i), 1.0 / theta_star);
            }
            let mut sum = LinExpr::constant(1.0);
            for i in 0..nu {
                sum.add_term(w.index(i), -1.0);
            }
            b.nonneg(&sum);
        }
        b.psd(&SymExprMat::lmi_block(&upper, &inst.b, &zeta));
        Some(zeta)
    };

    // Ellitope-side domination:
    // P^T A^T Theta A P + sum_k gamma_k T_k - P^T U P is PSD,
    // with Theta = S_delta Xi S_delta^T.
    if use_e {
        let gp = norm.s_delta().transpose() * &inst.a * ell.p();
        let mut con = SymExprMat::congruence(xi_var.as_ref().unwrap(), &gp);
        con.add_scaled(
            &SymExprMat::weighted_sum(ell.t(), gamma_var.as_ref().unwrap()),
            1.0,
        );
        let u_cong = SymExprMat::congruence(u_var.as_ref().unwrap(), ell.p());
        con.add_scaled(&u_cong, -1.0);
        b.psd(&con);
    }

    let varsigma_expr = if use_p {
        let v = b.var();
        b.nonneg(&v);
        v
    } else {
        LinExpr::zero()
    };

    // Dualized polytope-side constraints, one block per vertex.
    let mut blocks: Vec<PolytopeBlockLayout> = Vec::new();
    if use_p {
        let w_map = poly.rq_pinv();
        let aw = &inst.a * w_map; // A R Q^+, m x p
        if !norm.s_delta_is_identity() {
            return Err(Error::Unsupported(
                "master program requires an identity latent noise embedding in this version".into(),
            ));
        }
        for j in 0..j_count {
            let v_j = poly.v().column(j).into_owned();
            let g_var = b.vars(m);
            let g_exprs = g_var.exprs();

            // pi_j bounds the noise norm of g_j via the ball quadratics.
            let pi_j = b.var();
            b.nonneg(&pi_j);
            for (l, f) in ball.factors().iter().enumerate() {
                let bound = pi_j.scaled(s_upper[l].max(0.0).sqrt());
                add_factor_norm_row(&mut b, f, &g_exprs, &bound);
            }

            // d_j = Sbar[S] v_j - [Q^+]^T R^T A^T g_j.
            let mut d_exprs: Vec<LinExpr> = match &s_var {
                Some(s) => congruence_times_vec(s, w_map, &v_j),
                None => vec![LinExpr::zero(); p_dim],
            };
            for (i, d) in d_exprs.iter_mut().enumerate() {
                for r in 0..m {
                    d.add_term(g_var.index(r), -aw[(r, i)]);
                }
            }

            let beta_j = b.vars(p_dim);
            let eta_j = b.vars(n);

            // u_j >= | v_i^T (d_j - beta_j) | for every vertex i.
            let u_j = b.var();
            b.nonneg(&u_j);
            for i in 0..j_count {
                let mut e = LinExpr::zero();
                for r in 0..p_dim {
                    let c = poly.v()[(r, i)];
                    if c != 0.0 {
                        e.add_scaled(&d_exprs[r], c);
                        e.add_term(beta_j.index(r), -c);
                    }
                }
                b.abs_le(&e, &u_j);
            }

            // R^T eta - Q^T beta = 0.
            for c in 0..q_dim {
                let mut e = LinExpr::zero();
                for r in 0..n {
                    e.add_term(eta_j.index(r), poly.r()[(r, c)]);
                }
                for r in 0..p_dim {
                    e.add_term(beta_j.index(r), -poly.q()[(r, c)]);
                }
                b.eq_zero(&e);
            }

            // sum_k E_k^T eps_k + P^T eta = 0, with rank-one quadratics
            // collapsing their eps to a scalar along the range direction.
            let phi_j = b.vars(k_count);
            let psi_j = b.vars(k_count);
            let mut eq_exprs: Vec<LinExpr> = (0..big_n)
                .map(|i| {
                    let mut e = LinExpr::zero();
                    for r in 0..n {
                        e.add_term(eta_j.index(r), ell.p()[(r, i)]);
                    }
                    e
                })
                .collect();
            let mut eps_handles = Vec::with_capacity(k_count);
            for k in 0..k_count {
                match &ell.factors()[k] {
                    QuadFactor::RankOne(l_vec) => {
                        let e_k = b.var();
                        for i in 0..big_n {
                            if l_vec[i] != 0.0 {
                                eq_exprs[i].add_scaled(&e_k, 2.0 * l_vec[i]);
                            }
                        }
                        b.soc(&psi_j.expr(k), &[e_k.clone(), phi_j.expr(k)]);
                        let lnorm = l_vec.norm();
                        let direction = if lnorm > 0.0 { l_vec / lnorm } else { l_vec.clone() };
                        eps_handles.push(EpsHandle::Scalar { var: e_k, direction });
                    }
                    QuadFactor::Full(_) => {
                        let eps = b.vars(big_n);
                        let e_mat = &ell.e()[k];
                        for i in 0..big_n {
                            for r in 0..big_n {
                                let c = e_mat[(i, r)];
                                if c != 0.0 {
                                    eq_exprs[i].add_term(eps.index(r), c);
                                }
                            }
                        }
                        let mut rest = eps.exprs();
                        rest.push(phi_j.expr(k));
                        b.soc(&psi_j.expr(k), &rest);
                        eps_handles.push(EpsHandle::Vector(eps));
                    }
                }
            }
            for e in &eq_exprs {
                b.eq_zero(e);
            }

            // Support of the parameter box at phi + psi.
            let m_j = b.vars(k_count);
            for k in 0..k_count {
                b.nonneg(&m_j.expr(k));
                let mut diff = m_j.expr(k);
                diff.add_term(phi_j.index(k), -1.0);
                diff.add_term(psi_j.index(k), -1.0);
                b.nonneg(&diff);
            }

            // The dualized vertex constraint.
            let mut row = varsigma_expr.clone();
            row.add_scaled(&u_j, -1.0);
            for k in 0..k_count {
                row.add_term(psi_j.index(k), -1.0);
                row.add_term(phi_j.index(k), 1.0);
                row.add_term(m_j.index(k), -t_upper[k]);
            }
            row.add_scaled(&pi_j, -1.0);
            b.nonneg(&row);

            blocks.push(PolytopeBlockLayout {
                g: g_var,
                beta: beta_j,
                eta: eta_j,
                eps: eps_handles,
                phi: phi_j,
                psi: psi_j,
            });
        }
    }

    // Objective: phi_T(gamma) + rho + varsigma.
    let mut obj = rho_expr.clone();
    if let Some(g) = &gamma_var {
        for k in 0..k_count {
            obj.add_term(g.index(k), t_upper[k]);
        }
    }
    obj.add_scaled(&varsigma_expr, 1.0);
    b.minimize(&obj);

    let sol = b.solve(&opts.solver)?;

    let xi = match &xi_var {
        Some(v) => symmetrized(&sol.matrix(v)),
        None => DMatrix::zeros(m_lat, m_lat),
    };
    let theta_mat = norm.s_delta() * &xi * norm.s_delta().transpose();
    let gamma = match &gamma_var {
        Some(g) => sol.vector(g).map(|v| v.max(0.0)),
        None => DVector::zeros(k_count),
    };
    let u_mat = match &u_var {
        Some(u) => symmetrized(&sol.matrix(u)),
        None => DMatrix::zeros(n, n),
    };
    let s_mat = match &s_var {
        Some(s) => symmetrized(&sol.matrix(s)),
        None => DMatrix::zeros(n, n),
    };
    let zeta = match &zeta_var {
        Some(z) => sol.vector(z),
        None => DVector::from_element(inst.nu(), 1.0),
    };
    let mut g_vecs = Vec::with_capacity(j_count);
    let mut duals = Vec::with_capacity(j_count);
    if use_p {
        for blk in &blocks {
            g_vecs.push(sol.vector(&blk.g));
            let eps = blk
                .eps
                .iter()
                .map(|h| match h {
                    EpsHandle::Scalar { var, direction } => direction * sol.value(var),
                    EpsHandle::Vector(v) => sol.vector(v),
                })
                .collect();
            duals.push(PolytopeDuals {
                beta: sol.vector(&blk.beta),
                eta: sol.vector(&blk.eta),
                eps,
                phi: sol.vector(&blk.phi),
                psi: sol.vector(&blk.psi),
            });
        }
    } else {
        for _ in 0..j_count {
            g_vecs.push(DVector::zeros(m));
            duals.push(PolytopeDuals {
                beta: DVector::zeros(p_dim),
                eta: DVector::zeros(n),
                eps: vec![DVector::zeros(big_n); k_count],
                phi: DVector::zeros(k_count),
                psi: DVector::zeros(k_count),
            });
        }
    }

    let phi_gamma = t_upper.dot(&gamma);
    let rho = sol.value(&rho_expr).max(0.0);
    let varsigma = sol.value(&varsigma_expr).max(0.0);
    let mut design = DesignSolution {
        theta_mat,
        xi,
        zeta,
        rho,
        varsigma,
        gamma,
        u_mat,
        s_mat,
        g: g_vecs,
        duals,
        objective: sol.objective,
        phi_gamma,
        delta,
        theta_loss: inst.theta,
        mode: opts.mode,
        diagnostics: SolveDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            r_prim: sol.r_prim,
            r_dual: sol.r_dual,
            violations: Vec::new(),
        },
    };
    design.diagnostics.violations = verify_design(inst, &design, opts.verify_tol)?;
    Ok(design)
}

fn add_factor_norm_row(b: &mut ConicBuilder, f: &QuadFactor, z: &[LinExpr], bound: &LinExpr) {
    match f {
        QuadFactor::RankOne(l) => {
            let mut e = LinExpr::zero();
            for (j, zj) in z.iter().enumerate() {
                if l[j] != 0.0 {
                    e.add_scaled(zj, l[j]);
                }
            }
            b.abs_le(&e, bound);
        }
        QuadFactor::Full(r) => {
            let rows: Vec<LinExpr> = (0..r.nrows())
                .map(|i| {
                    let mut e = LinExpr::zero();
                    for (j, zj) in z.iter().enumerate() {
                        if r[(i, j)] != 0.0 {
                            e.add_scaled(zj, r[(i, j)]);
                        }
                    }
                    e
                })
                .collect();
            b.soc(bound, &rows);
        }
    }
}

// ---------------------------------------------------------------------------
// Gaussian specialization
// ---------------------------------------------------------------------------

/// Detected one-norm ball and two-norm/sup-norm ellitope structure.
#[derive(Debug, Clone, Copy)]
pub struct BallGeometry {
    pub rho1: f64,
    pub rho2: f64,
    pub rho_inf: f64,
    /// Index of the two-norm quadratic in the instance's ellitope list;
    /// the remaining quadratics are the coordinate ones, in coordinate order.
    pub l2_index: usize,
}

/// Recognizes `X = { ||x||_1 <= rho1, ||x||_2 <= rho2, ||x||_inf <= rho_inf }`
/// with identity `P`, `R`, `Q` and `V = rho1 * I`.
pub fn detect_ball_geometry(inst: &ProblemInstance) -> Result<BallGeometry> {
    let n = inst.n();
    let tol = 1e-9;
    let ell = &inst.signal.ellitope;
    let poly = &inst.signal.polytope;
    let ident = DMatrix::<f64>::identity(n, n);
    let err = |msg: &str| Error::Unsupported(format!("specialized program needs {msg}"));
    if inst.theta != 2.0 {
        return Err(err("loss exponent theta = 2"));
    }
    if !matches!(inst.noise, crate::noise::NoiseFamily::Gaussian { .. }) {
        return Err(err("Gaussian observation noise"));
    }
    if (ell.p() - &ident).amax() > tol || (poly.r() - &ident).amax() > tol
        || (poly.q() - &ident).amax() > tol
    {
        return Err(err("identity P, R, Q"));
    }
    if poly.num_vertices() != n {
        return Err(err("n defining vertices"));
    }
    let v = poly.v();
    let rho1 = v[(0, 0)];
    if rho1 <= 0.0 || (v - &ident * rho1).amax() > tol * rho1.max(1.0) {
        return Err(err("V = rho1 * I"));
    }
    if ell.num_quadratics() != n + 1 {
        return Err(err("n + 1 ellitope quadratics"));
    }
    let upper = ell.domain().as_box()?;
    if upper.iter().any(|&u| (u - 1.0).abs() > tol) {
        return Err(err("a unit-box parameter set"));
    }
    let mut coord_scale: Option<f64> = None;
    let mut coords_seen = vec![false; n];
    let mut l2_index = None;
    for (k, t_k) in ell.t().iter().enumerate() {
        let diag_full = (0..n).all(|i| t_k[(i, i)] > 0.0);
        let offdiag_max = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .fold(0.0_f64, |acc, (i, j)| acc.max(t_k[(i, j)].abs()));
        if offdiag_max > tol {
            return Err(err("diagonal quadratics"));
        }
        if diag_full {
            let c = t_k[(0, 0)];
            if (0..n).any(|i| (t_k[(i, i)] - c).abs() > tol * c) || l2_index.is_some() {
                return Err(err("a single scaled-identity quadratic"));
            }
            l2_index = Some((k, c));
        } else {
            let nz: Vec<usize> = (0..n).filter(|&i| t_k[(i, i)] > tol).collect();
            if nz.len() != 1 || coords_seen[nz[0]] {
                return Err(err("one coordinate quadratic per coordinate"));
            }
            coords_seen[nz[0]] = true;
            let c = t_k[(nz[0], nz[0])];
            match coord_scale {
                None => coord_scale = Some(c),
                Some(prev) if (prev - c).abs() > tol * prev => {
                    return Err(err("equal coordinate scalings"))
                }
                _ => {}
            }
        }
    }
    let (l2_index, c2) = l2_index.ok_or_else(|| err("a two-norm quadratic"))?;
    if !coords_seen.iter().all(|&s| s) {
        return Err(err("coordinate quadratics covering every coordinate"));
    }
    let c_inf = coord_scale.ok_or_else(|| err("coordinate quadratics"))?;
    Ok(BallGeometry {
        rho1,
        rho2: 1.0 / c2.sqrt(),
        rho_inf: 1.0 / c_inf.sqrt(),
        l2_index,
    })
}

/// Solves the specialized program for Gaussian noise over the one-norm ball
/// intersected with the two-norm/sup-norm ellitope. Charges
/// `sigma^2 q^2 Tr(Theta)` for the ellitope side (the exact eigen path) and
/// carries explicit per-vertex splitting vectors in place of the general
/// conic duals.
pub fn solve_master_gaussian(
    inst: &ProblemInstance,
    delta: f64,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    inst.validate()?;
    let geom = detect_ball_geometry(inst)?;
    let n = inst.n();
    let m = inst.m();
    let norm = inst.noise.norm(delta, m)?;
    let sq2 = norm.euclidean_trace_weight()?;
    let sq = sq2.sqrt(); // sigma * chi_delta
    let k_count = n + 1;
    let use_e = opts.mode.uses_ellitope();
    let use_p = opts.mode.uses_polytope();

    let mut b = ConicBuilder::new();
    let theta_var = if use_e {
        let t = b.sym_matrix_var(m);
        b.psd_var(&t);
        Some(t)
    } else {
        None
    };
    let gamma_var = if use_e {
        let g = b.vars(k_count);
        for k in 0..k_count {
            b.nonneg(&g.expr(k));
        }
        Some(g)
    } else {
        None
    };
    let u_var = if use_e { Some(b.sym_matrix_var(n)) } else { None };
    let s_var = if use_p { Some(b.sym_matrix_var(n)) } else { None };

    // U + S - B^T B is PSD (theta = 2 collapses the certificate weights).
    let mut upper = SymExprMat::zeros(n);
    if let Some(u) = &u_var {
        upper.add_scaled(&SymExprMat::from_sym_var(u), 1.0);
    }
    if let Some(s) = &s_var {
        upper.add_scaled(&SymExprMat::from_sym_var(s), 1.0);
    }
    upper.add_const_scaled(&(inst.b.transpose() * &inst.b), -1.0);
    b.psd(&upper);

    // A^T Theta A + sum_k gamma_k T_k - U is PSD.
    if use_e {
        let mut con = SymExprMat::congruence(theta_var.as_ref().unwrap(), &inst.a);
        con.add_scaled(
            &SymExprMat::weighted_sum(inst.signal.ellitope.t(), gamma_var.as_ref().unwrap()),
            1.0,
        );
        con.add_scaled(&SymExprMat::from_sym_var(u_var.as_ref().unwrap()), -1.0);
        b.psd(&con);
    }

    let varsigma_expr = if use_p {
        let v = b.var();
        b.nonneg(&v);
        v
    } else {
        LinExpr::zero()
    };

    struct GaussBlock {
        g: VarBlock,
        alpha: VarBlock,
        beta: VarBlock,
    }
    let mut blocks: Vec<GaussBlock> = Vec::new();
    if use_p {
        for j in 0..n {
            let g_var = b.vars(m);
            let alpha = b.vars(n);
            let beta = b.vars(n);
            // t_j bounds || rho1 Col_j[S] - A^T g_j - alpha - beta ||_inf.
            let t_j = b.var();
            b.nonneg(&t_j);
            for i in 0..n {
                let mut e = match &s_var {
                    Some(s) => s.entry(i, j).scaled(geom.rho1),
                    None => LinExpr::zero(),
                };
                for r in 0..m {
                    e.add_term(g_var.index(r), -inst.a[(r, i)]);
                }
                e.add_term(alpha.index(i), -1.0);
                e.add_term(beta.index(i), -1.0);
                b.abs_le(&e, &t_j);
            }
            // w bounds |alpha| coordinatewise for the one-norm term.
            let w = b.vars(n);
            for i in 0..n {
                b.abs_le(&alpha.expr(i), &w.expr(i));
            }
            let r_j = b.var();
            b.soc(&r_j, &beta.exprs());
            let s_j = b.var();
            b.soc(&s_j, &g_var.exprs());

            let mut row = varsigma_expr.clone();
            row.add_scaled(&t_j, -geom.rho1);
            for i in 0..n {
                row.add_term(w.index(i), -geom.rho_inf);
            }
            row.add_scaled(&r_j, -geom.rho2);
            row.add_scaled(&s_j, -sq);
            b.nonneg(&row);
            blocks.push(GaussBlock { g: g_var, alpha, beta });
        }
    }

    let mut obj = varsigma_expr.clone();
    if let Some(g) = &gamma_var {
        for k in 0..k_count {
            obj.add_term(g.index(k), 1.0);
        }
    }
    if let Some(t) = &theta_var {
        obj.add_scaled(&t.trace(), sq2);
    }
    b.minimize(&obj);

    let sol = b.solve(&opts.solver)?;

    let theta_mat = match &theta_var {
        Some(t) => symmetrized(&sol.matrix(t)),
        None => DMatrix::zeros(m, m),
    };
    let gamma = match &gamma_var {
        Some(g) => sol.vector(g).map(|v| v.max(0.0)),
        None => DVector::zeros(k_count),
    };
    let u_mat = match &u_var {
        Some(u) => symmetrized(&sol.matrix(u)),
        None => DMatrix::zeros(n, n),
    };
    let s_mat = match &s_var {
        Some(s) => symmetrized(&sol.matrix(s)),
        None => DMatrix::zeros(n, n),
    };

    // Reconstruct the general-form duals from the splitting vectors so one
    // verifier covers both program builders: beta^j = alpha_j + beta_j,
    // eta^j = beta^j, scalar eps along each coordinate direction and the
    // two-norm eps from beta_j, phi = 0, psi_k = ||eps_k||.
    let ell = &inst.signal.ellitope;
    let mut g_vecs = Vec::with_capacity(n);
    let mut duals = Vec::with_capacity(n);
    for j in 0..n {
        if use_p {
            let blk = &blocks[j];
            let alpha = sol.vector(&blk.alpha);
            let beta = sol.vector(&blk.beta);
            g_vecs.push(sol.vector(&blk.g));
            let mut eps = vec![DVector::zeros(n); k_count];
            let mut psi = DVector::zeros(k_count);
            let mut coord_cursor = 0usize;
            for k in 0..k_count {
                if k == geom.l2_index {
                    eps[k] = &beta * (-geom.rho2 / 2.0);
                    psi[k] = eps[k].norm();
                } else {
                    // Coordinate quadratic: recover its coordinate index.
                    let t_k = &ell.t()[k];
                    let mut coord = coord_cursor;
                    for i in 0..n {
                        if t_k[(i, i)] > 0.0 {
                            coord = i;
                            break;
                        }
                    }
                    coord_cursor += 1;
                    let mut e = DVector::zeros(n);
                    e[coord] = -geom.rho_inf * alpha[coord] / 2.0;
                    psi[k] = e[coord].abs();
                    eps[k] = e;
                }
            }
            duals.push(PolytopeDuals {
                beta: &alpha + &beta,
                eta: &alpha + &beta,
                eps,
                phi: DVector::zeros(k_count),
                psi,
            });
        } else {
            g_vecs.push(DVector::zeros(m));
            duals.push(PolytopeDuals {
                beta: DVector::zeros(n),
                eta: DVector::zeros(n),
                eps: vec![DVector::zeros(n); k_count],
                phi: DVector::zeros(k_count),
                psi: DVector::zeros(k_count),
            });
        }
    }

    let phi_gamma = gamma.sum();
    let rho = sq2 * theta_mat.trace();
    let varsigma = sol.value(&varsigma_expr).max(0.0);
    let mut design = DesignSolution {
        xi: theta_mat.clone(),
        theta_mat,
        zeta: DVector::from_element(inst.nu(), 1.0),
        rho,
        varsigma,
        gamma,
        u_mat,
        s_mat,
        g: g_vecs,
        duals,
        objective: sol.objective,
        phi_gamma,
        delta,
        theta_loss: inst.theta,
        mode: opts.mode,
        diagnostics: SolveDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            r_prim: sol.r_prim,
            r_dual: sol.r_dual,
            violations: Vec::new(),
        },
    };
    design.diagnostics.violations = verify_design(inst, &design, opts.verify_tol)?;
    Ok(design)
}

// ---------------------------------------------------------------------------
// Post-solve verification
// ---------------------------------------------------------------------------

/// Independently re-evaluates every constraint of the master program on a
/// returned solution; returns human-readable violation descriptions. Zero
/// entries of the loss certificate are handled through the limit form by
/// shifting the diagonal by 1e-9.
pub fn verify_design(inst: &ProblemInstance, sol: &DesignSolution, tol: f64) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    let n = inst.n();
    let nu = inst.nu();
    let ell = &inst.signal.ellitope;
    let poly = &inst.signal.polytope;
    let norm = inst.noise.norm(sol.delta, inst.m())?;

    // Loss LMI with the limit-form diagonal shift.
    let us = &sol.u_mat + &sol.s_mat;
    let mut lmi = DMatrix::zeros(n + nu, n + nu);
    lmi.view_mut((0, 0), (n, n)).copy_from(&us);
    lmi.view_mut((0, n), (n, nu)).copy_from(&inst.b.transpose());
    lmi.view_mut((n, 0), (nu, n)).copy_from(&inst.b);
    for i in 0..nu {
        lmi[(n + i, n + i)] = sol.zeta[i] + 1e-9;
    }
    let scale = max_abs(&lmi).max(1.0);
    let min_eig = min_symmetric_eigenvalue(&lmi);
    if min_eig < -tol * scale {
        violations.push(format!("loss LMI has eigenvalue {min_eig:.3e}"));
    }

    let theta_star = crate::linalg::dual_exponent(sol.theta_loss);
    let zeta_norm = lp_norm_gen(&sol.zeta, theta_star);
    if zeta_norm > 1.0 + tol {
        violations.push(format!("zeta norm {zeta_norm:.9} exceeds 1"));
    }

    // Cone membership of (Theta, rho).
    match &norm.kind {
        NoiseKind::EuclideanBall { .. } => {
            let w = norm.euclidean_trace_weight()?;
            let target = w * sol.theta_mat.trace();
            if (sol.rho - target).abs() > tol * target.abs().max(1.0) {
                violations.push(format!(
                    "rho {:.9} deviates from trace charge {:.9}",
                    sol.rho, target
                ));
            }
            let min_eig = min_symmetric_eigenvalue(&sol.theta_mat);
            if min_eig < -tol * max_abs(&sol.theta_mat).max(1.0) {
                violations.push(format!("Theta has eigenvalue {min_eig:.3e}"));
            }
        }
        NoiseKind::General => {
            match cone_check(norm.ball(), &sol.xi, sol.rho, tol)? {
                crate::cones::ConeCheck::Member(_) => {}
                crate::cones::ConeCheck::Infeasible { violations: v, psd_defect } => {
                    violations.push(format!(
                        "(Theta, rho) outside the decomposition cone: psd defect {psd_defect:.3e}, {} trace violations",
                        v.len()
                    ));
                }
            }
        }
    }

    // Ellitope-side domination.
    if sol.mode.uses_ellitope() {
        let ap = &inst.a * ell.p();
        let mut lhs = ap.transpose() * &sol.theta_mat * &ap;
        for (k, t_k) in ell.t().iter().enumerate() {
            lhs += t_k * sol.gamma[k];
        }
        lhs -= ell.p().transpose() * &sol.u_mat * ell.p();
        let scale = max_abs(&lhs).max(1.0);
        let min_eig = min_symmetric_eigenvalue(&lhs);
        if min_eig < -tol * scale {
            violations.push(format!("ellitope domination has eigenvalue {min_eig:.3e}"));
        }
        if sol.gamma.iter().any(|&g| g < -tol) {
            violations.push("gamma has negative entries".into());
        }
    }

    // Polytope-side constraints.
    if sol.mode.uses_polytope() {
        let sbar = crate::sets::sbar_matrix(&sol.s_mat, poly)?;
        let w_map = poly.rq_pinv();
        for (j, (g_j, dual)) in sol.g.iter().zip(sol.duals.iter()).enumerate() {
            let v_j = poly.v().column(j).into_owned();
            let d_j = &sbar * &v_j - w_map.transpose() * inst.a.transpose() * g_j;
            let inner = &d_j - &dual.beta;
            let linf = (poly.v().transpose() * &inner).amax();
            let mut lhs = linf + norm.evaluate(g_j)?;
            let mut phipsi = DVector::zeros(dual.phi.len());
            for k in 0..dual.phi.len() {
                lhs += dual.psi[k] - dual.phi[k];
                phipsi[k] = dual.phi[k] + dual.psi[k];
            }
            lhs += ell.domain().support(&phipsi)?;
            let scale = lhs.abs().max(sol.varsigma.abs()).max(1.0);
            if lhs > sol.varsigma + tol * scale {
                violations.push(format!(
                    "vertex {j} constraint: lhs {lhs:.9} exceeds varsigma {:.9}",
                    sol.varsigma
                ));
            }
            // Dual equalities.
            let eq1 = (poly.r().transpose() * &dual.eta - poly.q().transpose() * &dual.beta).amax();
            let eq_scale = dual.eta.amax().max(dual.beta.amax()).max(1.0);
            if eq1 > tol * eq_scale {
                violations.push(format!("vertex {j}: R^T eta - Q^T beta residual {eq1:.3e}"));
            }
            let mut eq2 = ell.p().transpose() * &dual.eta;
            for (k, e_k) in ell.e().iter().enumerate() {
                eq2 += e_k.transpose() * &dual.eps[k];
            }
            let r2 = eq2.amax();
            if r2 > tol * eq_scale.max(dual.eps.iter().map(|e| e.amax()).fold(0.0, f64::max)) {
                violations.push(format!("vertex {j}: eps balance residual {r2:.3e}"));
            }
            for k in 0..dual.phi.len() {
                let lhs = (dual.eps[k].norm_squared() + dual.phi[k] * dual.phi[k]).sqrt();
                if lhs > dual.psi[k] + tol * lhs.max(1.0) {
                    violations.push(format!("vertex {j}, quadratic {k}: cone residual"));
                }
            }
        }
    }

    let obj_target = sol.phi_gamma + sol.rho + sol.varsigma;
    if (sol.objective - obj_target).abs() > 1e-6_f64.max(tol) * (1.0 + obj_target.abs()) {
        violations.push(format!(
            "objective {:.9} deviates from decomposition {:.9}",
            sol.objective, obj_target
        ));
    }
    Ok(violations)
}

// ---------------------------------------------------------------------------
// Contrast assembly
// ---------------------------------------------------------------------------

/// Converts the ellitope-side block of a solved design into admissible
/// contrast columns: the eigendecomposition path for Euclidean-ball noise
/// (columns are eigenvectors scaled to unit noise norm) and the randomized
/// cone decomposition for the general kind.
pub fn assemble_ellitope_contrast<R: Rng + ?Sized>(
    sol: &DesignSolution,
    norm: &NoiseNorm,
    rng: &mut R,
    max_trials: usize,
) -> Result<ContrastMatrix> {
    let m = norm.obs_dim();
    let scale = max_abs(&sol.theta_mat);
    if scale <= 1e-14 {
        return Ok(ContrastMatrix::empty(m, sol.delta));
    }
    match &norm.kind {
        NoiseKind::EuclideanBall { sigma_bar, quantile } => {
            let sq = sigma_bar * quantile;
            let (vals, vecs) = eigen_descending(&sol.theta_mat);
            let drop = 1e-12 * vals[0].max(0.0).max(1e-300);
            let mut cols = Vec::new();
            let mut weights = Vec::new();
            for i in 0..vals.len() {
                if vals[i] > drop {
                    cols.push(vecs.column(i) / sq);
                    weights.push(sq * sq * vals[i]);
                }
            }
            let mut h = DMatrix::zeros(m, cols.len());
            for (j, c) in cols.iter().enumerate() {
                h.set_column(j, c);
            }
            let columns = weights
                .iter()
                .map(|&w| ColumnInfo { side: ContrastSide::Ellitope, weight: w })
                .collect();
            Ok(ContrastMatrix { h, columns, delta: sol.delta })
        }
        NoiseKind::General => {
            let ball = norm.ball();
            // Tiny solver slack can leave the traces a hair over the cap;
            // extraction needs a true member, so inflate rho minimally.
            let kappa = kappa_const(norm.latent_dim(), norm.num_quadratics());
            let upper = ball.domain().as_box()?;
            let mut rho_eff = sol.rho;
            for (s_l, &ub) in ball.t().iter().zip(upper.iter()) {
                let tr = (&sol.xi * s_l).trace();
                if ub > 0.0 {
                    rho_eff = rho_eff.max(kappa * tr / ub);
                }
            }
            let member = cone_check(ball, &sol.xi, rho_eff, 1e-9)?.member()?;
            let decomp = extract_rank_one(&member, ball, rng, max_trials)?;
            let (h, weights) = lift_to_contrasts(&decomp, norm.s_delta());
            let columns = weights
                .iter()
                .map(|&w| ColumnInfo { side: ContrastSide::Ellitope, weight: w })
                .collect();
            Ok(ContrastMatrix { h, columns, delta: sol.delta })
        }
    }
}

/// Normalizes the polytope-side design vectors into unit-norm contrast
/// columns; vectors of negligible norm are omitted (their vertex bound needs
/// no observation term).
pub fn assemble_polytope_contrast(sol: &DesignSolution, norm: &NoiseNorm) -> Result<ContrastMatrix> {
    let m = norm.obs_dim();
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    for g_j in &sol.g {
        let pi = norm.evaluate(g_j)?;
        if pi <= 1e-12 {
            continue;
        }
        cols.push(g_j / pi);
        weights.push(pi);
    }
    let mut h = DMatrix::zeros(m, cols.len());
    for (j, c) in cols.iter().enumerate() {
        h.set_column(j, c);
    }
    let columns = weights
        .iter()
        .map(|&w| ColumnInfo { side: ContrastSide::Polytope, weight: w })
        .collect();
    Ok(ContrastMatrix { h, columns, delta: sol.delta })
}

/// Full contrast pipeline: ellitope block, polytope block, concatenation,
/// pruning.
pub fn assemble_contrast<R: Rng + ?Sized>(
    sol: &DesignSolution,
    norm: &NoiseNorm,
    rng: &mut R,
    opts: &DesignOptions,
) -> Result<ContrastMatrix> {
    let h1 = assemble_ellitope_contrast(sol, norm, rng, opts.max_extraction_trials)?;
    let h2 = assemble_polytope_contrast(sol, norm)?;
    ContrastMatrix::concat(&h1, &h2).pruned(norm, opts.prune_norm_tol, opts.prune_cos_tol)
}

// ---------------------------------------------------------------------------
// Conic duality over the relaxed vertex set
// ---------------------------------------------------------------------------

/// Both sides of `max_{y in Ybar} d^T y`: the direct conic program over the
/// relaxed set and the minimization obtained from conic duality. Their
/// agreement validates the dualized vertex constraints of the master program.
#[derive(Debug, Clone, Copy)]
pub struct YbarValue {
    pub primal: f64,
    pub dual: f64,
}

pub fn dual_max_over_ybar(
    d: &DVector<f64>,
    ell: &Ellitope,
    poly: &PolytopeImage,
    opts: &SolverOptions,
) -> Result<YbarValue> {
    let primal = ybar_primal(d, ell, poly, opts)?;
    let dual = ybar_dual(d, ell, poly, opts)?;
    Ok(YbarValue { primal, dual })
}

/// Direct maximization over
/// `{ y = V lam, ||lam||_1 <= 1, y = Q w, R w = P z, z^T T_k z <= t_k, t in T }`.
pub fn ybar_primal(
    d: &DVector<f64>,
    ell: &Ellitope,
    poly: &PolytopeImage,
    opts: &SolverOptions,
) -> Result<f64> {
    let p_dim = poly.y_dim();
    if d.len() != p_dim {
        return Err(Error::DimensionMismatch {
            context: "ybar primal",
            expected: p_dim,
            actual: d.len(),
        });
    }
    let n = poly.signal_dim();
    let q_dim = poly.w_dim();
    let j_count = poly.num_vertices();
    let big_n = ell.latent_dim();
    let t_upper = ell.domain().as_box()?;

    let mut b = ConicBuilder::new();
    let y = b.vars(p_dim);
    let lam_pos = b.vars(j_count);
    let lam_neg = b.vars(j_count);
    let w = b.vars(q_dim);
    let z = b.vars(big_n);
    let t = b.vars(ell.num_quadratics());
    b.box_bounds(&lam_pos, 0.0, f64::INFINITY);
    b.box_bounds(&lam_neg, 0.0, f64::INFINITY);
    for i in 0..p_dim {
        // y = V lam
        let mut e = y.expr(i).scaled(-1.0);
        for j in 0..j_count {
            e.add_term(lam_pos.index(j), poly.v()[(i, j)]);
            e.add_term(lam_neg.index(j), -poly.v()[(i, j)]);
        }
        b.eq_zero(&e);
        // y = Q w
        let mut e = y.expr(i).scaled(-1.0);
        for j in 0..q_dim {
            e.add_term(w.index(j), poly.q()[(i, j)]);
        }
        b.eq_zero(&e);
    }
    let mut mass = LinExpr::constant(1.0);
    for j in 0..j_count {
        mass.add_term(lam_pos.index(j), -1.0);
        mass.add_term(lam_neg.index(j), -1.0);
    }
    b.nonneg(&mass);
    for i in 0..n {
        // R w = P z
        let mut e = LinExpr::zero();
        for j in 0..q_dim {
            e.add_term(w.index(j), poly.r()[(i, j)]);
        }
        for j in 0..big_n {
            e.add_term(z.index(j), -ell.p()[(i, j)]);
        }
        b.eq_zero(&e);
    }
    let z_exprs = z.exprs();
    for (k, f) in ell.factors().iter().enumerate() {
        let rows = factor_rows(f, &z_exprs);
        b.quad_le(&rows, &t.expr(k));
        b.nonneg(&t.expr(k));
        b.nonneg(&LinExpr::constant(t_upper[k]).minus(&t.expr(k)));
    }
    let mut obj = LinExpr::zero();
    for i in 0..p_dim {
        obj.add_term(y.index(i), -d[i]);
    }
    b.minimize(&obj);
    let sol = b.solve(opts)?;
    Ok(-sol.objective)
}

/// The dual minimization: over `beta`, `eta`, per-quadratic `(eps_k, phi_k,
/// psi_k)` in the second-order cone, minimize
/// `||V^T (d - beta)||_inf + sum_k (psi_k - phi_k) + phi_T(phi + psi)`
/// subject to `R^T eta = Q^T beta` and `sum_k E_k^T eps_k + P^T eta = 0`.
pub fn ybar_dual(
    d: &DVector<f64>,
    ell: &Ellitope,
    poly: &PolytopeImage,
    opts: &SolverOptions,
) -> Result<f64> {
    let p_dim = poly.y_dim();
    if d.len() != p_dim {
        return Err(Error::DimensionMismatch {
            context: "ybar dual",
            expected: p_dim,
            actual: d.len(),
        });
    }
    let n = poly.signal_dim();
    let q_dim = poly.w_dim();
    let j_count = poly.num_vertices();
    let big_n = ell.latent_dim();
    let k_count = ell.num_quadratics();
    let t_upper = ell.domain().as_box()?;

    let mut b = ConicBuilder::new();
    let beta = b.vars(p_dim);
    let eta = b.vars(n);
    let phi = b.vars(k_count);
    let psi = b.vars(k_count);
    let u = b.var();
    b.nonneg(&u);
    for i in 0..j_count {
        let mut e = LinExpr::zero();
        for r in 0..p_dim {
            let c = poly.v()[(r, i)];
            if c != 0.0 {
                e.add_constant(c * d[r]);
                e.add_term(beta.index(r), -c);
            }
        }
        b.abs_le(&e, &u);
    }
    for c in 0..q_dim {
        let mut e = LinExpr::zero();
        for r in 0..n {
            e.add_term(eta.index(r), poly.r()[(r, c)]);
        }
        for r in 0..p_dim {
            e.add_term(beta.index(r), -poly.q()[(r, c)]);
        }
        b.eq_zero(&e);
    }
    let mut eq_exprs: Vec<LinExpr> = (0..big_n)
        .map(|i| {
            let mut e = LinExpr::zero();
            for r in 0..n {
                e.add_term(eta.index(r), ell.p()[(r, i)]);
            }
            e
        })
        .collect();
    for k in 0..k_count {
        match &ell.factors()[k] {
            QuadFactor::RankOne(l_vec) => {
                let e_k = b.var();
                for i in 0..big_n {
                    if l_vec[i] != 0.0 {
                        eq_exprs[i].add_scaled(&e_k, 2.0 * l_vec[i]);
                    }
                }
                b.soc(&psi.expr(k), &[e_k, phi.expr(k)]);
            }
            QuadFactor::Full(_) => {
                let eps = b.vars(big_n);
                let e_mat = &ell.e()[k];
                for i in 0..big_n {
                    for r in 0..big_n {
                        if e_mat[(i, r)] != 0.0 {
                            eq_exprs[i].add_term(eps.index(r), e_mat[(i, r)]);
                        }
                    }
                }
                let mut rest = eps.exprs();
                rest.push(phi.expr(k));
                b.soc(&psi.expr(k), &rest);
            }
        }
    }
    for e in &eq_exprs {
        b.eq_zero(e);
    }
    let m_vars = b.vars(k_count);
    let mut obj = u.clone();
    for k in 0..k_count {
        b.nonneg(&m_vars.expr(k));
        let mut diff = m_vars.expr(k);
        diff.add_term(phi.index(k), -1.0);
        diff.add_term(psi.index(k), -1.0);
        b.nonneg(&diff);
        obj.add_term(psi.index(k), 1.0);
        obj.add_term(phi.index(k), -1.0);
        obj.add_term(m_vars.index(k), t_upper[k]);
    }
    b.minimize(&obj);
    let sol = b.solve(opts)?;
    Ok(sol.objective)
}

fn factor_rows(f: &QuadFactor, z: &[LinExpr]) -> Vec<LinExpr> {
    match f {
        QuadFactor::RankOne(l) => {
            let mut e = LinExpr::zero();
            for (j, zj) in z.iter().enumerate() {
                if l[j] != 0.0 {
                    e.add_scaled(zj, l[j]);
                }
            }
            vec![e]
        }
        QuadFactor::Full(r) => (0..r.nrows())
            .map(|i| {
                let mut e = LinExpr::zero();
                for (j, zj) in z.iter().enumerate() {
                    if r[(i, j)] != 0.0 {
                        e.add_scaled(zj, r[(i, j)]);
                    }
                }
                e
            })
            .collect(),
    }
}
