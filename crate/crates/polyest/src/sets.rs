//! Signal-set geometry: monotone parameter sets, ellitopes, polytope images,
//! and the supporting calculus (support functions, gauges, membership,
//! symmetrization) used by the design programs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::conic::{ConicBuilder, LinExpr, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, psd_sqrt, symmetrized, QuadFactor};

const PSD_TOL: f64 = 1e-10;

/// Convex compact monotone subset of the nonnegative orthant; hosts the
/// parameter sets of ellitopic descriptions.
#[derive(Debug, Clone)]
pub enum MonotoneSet {
    /// `{ s : 0 <= s <= upper }`
    Box { upper: DVector<f64> },
    /// `{ s >= 0 : sum s_i <= radius }`
    ScaledSimplex { radius: f64, dim: usize },
    /// Placeholder for a general conic description; operations that need an
    /// explicit form reject it with an `Unsupported` error.
    ConicOracle { dim: usize },
}

impl MonotoneSet {
    pub fn unit_box(dim: usize) -> Self {
        MonotoneSet::Box { upper: DVector::from_element(dim, 1.0) }
    }

    pub fn dim(&self) -> usize {
        match self {
            MonotoneSet::Box { upper } => upper.len(),
            MonotoneSet::ScaledSimplex { dim, .. } => *dim,
            MonotoneSet::ConicOracle { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MonotoneSet::Box { upper } => {
                if upper.iter().any(|&u| u < 0.0 || !u.is_finite()) {
                    return Err(Error::InvalidSet("box upper bounds must be finite and nonnegative".into()));
                }
            }
            MonotoneSet::ScaledSimplex { radius, .. } => {
                if *radius < 0.0 || !radius.is_finite() {
                    return Err(Error::InvalidSet("simplex radius must be finite and nonnegative".into()));
                }
            }
            MonotoneSet::ConicOracle { .. } => {}
        }
        Ok(())
    }

    /// Support function `max_{s in set} g^T s`.
    pub fn support(&self, g: &DVector<f64>) -> Result<f64> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "monotone set support function",
                expected: self.dim(),
                actual: g.len(),
            });
        }
        match self {
            MonotoneSet::Box { upper } => {
                Ok(g.iter().zip(upper.iter()).map(|(&gi, &ui)| gi.max(0.0) * ui).sum())
            }
            MonotoneSet::ScaledSimplex { radius, .. } => {
                Ok(radius * g.iter().fold(0.0_f64, |m, &gi| m.max(gi)).max(0.0))
            }
            MonotoneSet::ConicOracle { .. } => Err(Error::Unsupported(
                "support function of a conic-oracle monotone set".into(),
            )),
        }
    }

    pub fn contains(&self, s: &DVector<f64>, tol: f64) -> Result<bool> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "monotone set membership",
                expected: self.dim(),
                actual: s.len(),
            });
        }
        match self {
            MonotoneSet::Box { upper } => Ok(s
                .iter()
                .zip(upper.iter())
                .all(|(&si, &ui)| si >= -tol && si <= ui + tol)),
            MonotoneSet::ScaledSimplex { radius, .. } => {
                Ok(s.iter().all(|&si| si >= -tol) && s.sum() <= radius + tol)
            }
            MonotoneSet::ConicOracle { .. } => {
                Err(Error::Unsupported("membership test for a conic-oracle monotone set".into()))
            }
        }
    }

    /// Upper-bound vector for the box kind; the design programs require it.
    pub fn as_box(&self) -> Result<&DVector<f64>> {
        match self {
            MonotoneSet::Box { upper } => Ok(upper),
            _ => Err(Error::Unsupported(
                "design programs require a box parameter set in this version".into(),
            )),
        }
    }
}

/// Support function `max_{s in set} g^T s` of a monotone set.
pub fn support_function(set: &MonotoneSet, g: &DVector<f64>) -> Result<f64> {
    set.support(g)
}

/// Ellitope `{ x = P z : z^T T_k z <= t_k, t in domain }` with PSD `T_k`
/// summing to a positive definite matrix.
#[derive(Debug, Clone)]
pub struct Ellitope {
    p: DMatrix<f64>,
    t: Vec<DMatrix<f64>>,
    domain: MonotoneSet,
    factors: Vec<QuadFactor>,
    e: Vec<DMatrix<f64>>,
    p_is_identity: bool,
}

impl Ellitope {
    pub fn new(p: DMatrix<f64>, t: Vec<DMatrix<f64>>, domain: MonotoneSet) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidSet("ellitope needs at least one quadratic".into()));
        }
        domain.validate()?;
        if domain.dim() != t.len() {
            return Err(Error::DimensionMismatch {
                context: "ellitope parameter set",
                expected: t.len(),
                actual: domain.dim(),
            });
        }
        let latent = p.ncols();
        let mut sym_t = Vec::with_capacity(t.len());
        let mut sum = DMatrix::zeros(latent, latent);
        for tk in &t {
            if tk.nrows() != latent || tk.ncols() != latent {
                return Err(Error::DimensionMismatch {
                    context: "ellitope quadratic",
                    expected: latent,
                    actual: tk.nrows(),
                });
            }
            let s = symmetrized(tk);
            if min_symmetric_eigenvalue(&s) < -PSD_TOL {
                return Err(Error::InvalidSet("ellitope quadratic is not PSD".into()));
            }
            sum += &s;
            sym_t.push(s);
        }
        if min_symmetric_eigenvalue(&sum) <= PSD_TOL {
            return Err(Error::InvalidSet(
                "ellitope quadratics must sum to a positive definite matrix".into(),
            ));
        }
        let factors = sym_t.iter().map(QuadFactor::new).collect();
        let e = sym_t.iter().map(|tk| 2.0 * psd_sqrt(tk)).collect();
        let p_is_identity = p.is_square() && (&p - DMatrix::<f64>::identity(latent, latent)).amax() == 0.0;
        Ok(Self { p, t: sym_t, domain, factors, e, p_is_identity })
    }

    /// Euclidean ball of the given radius as a one-quadratic ellitope.
    pub fn euclidean_ball(dim: usize, radius: f64) -> Result<Self> {
        Ellitope::new(
            DMatrix::identity(dim, dim),
            vec![DMatrix::identity(dim, dim) / (radius * radius)],
            MonotoneSet::unit_box(1),
        )
    }

    /// Basic ellitope (`P = I`) from quadratics and their parameter set; the
    /// form the unit balls of the noise norms take.
    pub fn basic(t: Vec<DMatrix<f64>>, domain: MonotoneSet) -> Result<Self> {
        let dim = t[0].nrows();
        Ellitope::new(DMatrix::identity(dim, dim), t, domain)
    }

    pub fn signal_dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.p.ncols()
    }

    pub fn num_quadratics(&self) -> usize {
        self.t.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn t(&self) -> &[DMatrix<f64>] {
        &self.t
    }

    pub fn domain(&self) -> &MonotoneSet {
        &self.domain
    }

    pub fn factors(&self) -> &[QuadFactor] {
        &self.factors
    }

    /// `E_k = 2 T_k^{1/2}`.
    pub fn e(&self) -> &[DMatrix<f64>] {
        &self.e
    }

    pub fn is_basic(&self) -> bool {
        self.p_is_identity
    }

    /// Minkowski gauge of the set. For basic ellitopes over a box domain this
    /// is the closed form `max_k sqrt(x^T T_k x / ubar_k)`; otherwise a
    /// second-order-cone program. Returns `+inf` when `x` is outside the
    /// column span of `P`.
    pub fn gauge(&self, x: &DVector<f64>, opts: &SolverOptions) -> Result<f64> {
        if x.len() != self.signal_dim() {
            return Err(Error::DimensionMismatch {
                context: "ellitope gauge",
                expected: self.signal_dim(),
                actual: x.len(),
            });
        }
        if self.p_is_identity {
            if let MonotoneSet::Box { upper } = &self.domain {
                let mut g = 0.0_f64;
                for (fk, &ub) in self.factors.iter().zip(upper.iter()) {
                    let q = fk.quad(x);
                    if ub <= 0.0 {
                        if q > 0.0 {
                            return Ok(f64::INFINITY);
                        }
                    } else {
                        g = g.max((q / ub).sqrt());
                    }
                }
                return Ok(g);
            }
        }
        self.gauge_program(x, opts)
    }

    fn gauge_program(&self, x: &DVector<f64>, opts: &SolverOptions) -> Result<f64> {
        let upper = match &self.domain {
            MonotoneSet::Box { upper } => upper.clone(),
            MonotoneSet::ScaledSimplex { .. } | MonotoneSet::ConicOracle { .. } => {
                return Err(Error::Unsupported(
                    "gauge program needs a box parameter set in this version".into(),
                ))
            }
        };
        let mut b = ConicBuilder::new();
        let z = b.vars(self.latent_dim());
        let u = b.var();
        for i in 0..self.signal_dim() {
            let mut e = LinExpr::constant(-x[i]);
            for j in 0..self.latent_dim() {
                e.add_term(z.index(j), self.p[(i, j)]);
            }
            b.eq_zero(&e);
        }
        let z_exprs = z.exprs();
        for (k, fk) in self.factors.iter().enumerate() {
            let bound = u.scaled(upper[k].max(0.0).sqrt());
            add_factor_norm_le(&mut b, fk, &z_exprs, &bound);
        }
        b.minimize(&u);
        match b.solve(opts) {
            Ok(sol) => Ok(sol.value(&u).max(0.0)),
            Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Membership via the gauge: feasibility of `x = P z`, `z^T T_k z <= t_k`,
    /// `t` in the domain, within `tol`. Solver failures are reported as
    /// errors, distinct from an infeasible (non-member) verdict.
    pub fn membership(&self, x: &DVector<f64>, tol: f64, opts: &SolverOptions) -> Result<bool> {
        Ok(self.gauge(x, opts)? <= 1.0 + tol)
    }

    /// Adds `x in ellitope` to a program over the expressions `x`.
    pub fn constrain_membership(&self, b: &mut ConicBuilder, x: &[LinExpr]) -> Result<()> {
        if x.len() != self.signal_dim() {
            return Err(Error::DimensionMismatch {
                context: "ellitope membership constraint",
                expected: self.signal_dim(),
                actual: x.len(),
            });
        }
        let z = b.vars(self.latent_dim());
        let t_vars = b.vars(self.num_quadratics());
        for i in 0..self.signal_dim() {
            let mut e = x[i].scaled(-1.0);
            for j in 0..self.latent_dim() {
                e.add_term(z.index(j), self.p[(i, j)]);
            }
            b.eq_zero(&e);
        }
        let z_exprs = z.exprs();
        for (k, fk) in self.factors.iter().enumerate() {
            add_factor_quad_le(b, fk, &z_exprs, &t_vars.expr(k));
        }
        match &self.domain {
            MonotoneSet::Box { upper } => {
                for k in 0..t_vars.len {
                    b.nonneg(&t_vars.expr(k));
                    b.nonneg(&LinExpr::constant(upper[k]).minus(&t_vars.expr(k)));
                }
            }
            MonotoneSet::ScaledSimplex { radius, .. } => {
                let mut sum = LinExpr::zero();
                for k in 0..t_vars.len {
                    b.nonneg(&t_vars.expr(k));
                    sum.add_scaled(&t_vars.expr(k), 1.0);
                }
                b.nonneg(&LinExpr::constant(*radius).minus(&sum));
            }
            MonotoneSet::ConicOracle { .. } => {
                return Err(Error::Unsupported(
                    "membership constraints for a conic-oracle parameter set".into(),
                ))
            }
        }
        Ok(())
    }

    /// Random interior point: Gaussian latent direction scaled by its gauge
    /// and a radial factor.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = crate::linalg::standard_normal_vector(self.latent_dim(), rng);
        let upper = match &self.domain {
            MonotoneSet::Box { upper } => upper.clone(),
            _ => DVector::from_element(self.num_quadratics(), 1.0),
        };
        let mut gauge = 0.0_f64;
        for (fk, &ub) in self.factors.iter().zip(upper.iter()) {
            if ub > 0.0 {
                gauge = gauge.max((fk.quad(&z) / ub).sqrt());
            }
        }
        let radial: f64 = rng.random_range(0.0..1.0);
        let scale = if gauge > 0.0 { radial / gauge } else { 0.0 };
        &self.p * (z * scale)
    }
}

/// Emits `||factor z|| <= bound` rows.
fn add_factor_norm_le(b: &mut ConicBuilder, f: &QuadFactor, z: &[LinExpr], bound: &LinExpr) {
    match f {
        QuadFactor::RankOne(l) => {
            let mut e = LinExpr::zero();
            for (j, zj) in z.iter().enumerate() {
                e.add_scaled(zj, l[j]);
            }
            b.abs_le(&e, bound);
        }
        QuadFactor::Full(r) => {
            let rows: Vec<LinExpr> = (0..r.nrows())
                .map(|i| {
                    let mut e = LinExpr::zero();
                    for (j, zj) in z.iter().enumerate() {
                        e.add_scaled(zj, r[(i, j)]);
                    }
                    e
                })
                .collect();
            b.soc(bound, &rows);
        }
    }
}

/// Emits `z^T S z <= t` rows using the cached factor.
fn add_factor_quad_le(b: &mut ConicBuilder, f: &QuadFactor, z: &[LinExpr], t: &LinExpr) {
    match f {
        QuadFactor::RankOne(l) => {
            let mut e = LinExpr::zero();
            for (j, zj) in z.iter().enumerate() {
                e.add_scaled(zj, l[j]);
            }
            b.quad_le(&[e], t);
        }
        QuadFactor::Full(r) => {
            let rows: Vec<LinExpr> = (0..r.nrows())
                .map(|i| {
                    let mut e = LinExpr::zero();
                    for (j, zj) in z.iter().enumerate() {
                        e.add_scaled(zj, r[(i, j)]);
                    }
                    e
                })
                .collect();
            b.quad_le(&rows, t);
        }
    }
}

/// Polytope image `{ x = R w : Q w in Conv{ +/- v_1, ..., +/- v_J } }` with
/// `Ker Q = {0}`.
#[derive(Debug, Clone)]
pub struct PolytopeImage {
    r: DMatrix<f64>,
    q: DMatrix<f64>,
    v: DMatrix<f64>,
    q_pinv: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl PolytopeImage {
    pub fn new(r: DMatrix<f64>, q: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let qdim = q.ncols();
        if r.ncols() != qdim {
            return Err(Error::DimensionMismatch {
                context: "polytope image R/Q",
                expected: qdim,
                actual: r.ncols(),
            });
        }
        if v.nrows() != q.nrows() {
            return Err(Error::DimensionMismatch {
                context: "polytope image Q/V",
                expected: q.nrows(),
                actual: v.nrows(),
            });
        }
        let svd = q.clone().svd(false, false);
        let min_sv = svd.singular_values.min();
        if min_sv <= 1e-10 {
            return Err(Error::InvalidSet(format!(
                "Q must have trivial kernel; smallest singular value {min_sv:.3e}"
            )));
        }
        let q_pinv = q
            .clone()
            .pseudo_inverse(1e-14)
            .map_err(|e| Error::InvalidSet(format!("pseudo-inverse failed: {e}")))?;
        let resid = (&q_pinv * &q - DMatrix::<f64>::identity(qdim, qdim)).amax();
        if resid > 1e-8 {
            return Err(Error::InvalidSet(format!(
                "Q^+ Q deviates from identity by {resid:.3e}"
            )));
        }
        let w = &r * &q_pinv;
        Ok(Self { r, q, v, q_pinv, w })
    }

    /// `l1` ball of the given radius: `R = Q = I`, `V = radius * I`.
    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        PolytopeImage::new(
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim) * radius,
        )
    }

    pub fn signal_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn w_dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn y_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn num_vertices(&self) -> usize {
        self.v.ncols()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn q_pinv(&self) -> &DMatrix<f64> {
        &self.q_pinv
    }

    /// `R Q^+`, the map from `y`-space back to signal space.
    pub fn rq_pinv(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Signal-space images of the defining vertices, `R Q^+ v_j`.
    pub fn vertex_images(&self) -> Vec<DVector<f64>> {
        (0..self.num_vertices())
            .map(|j| &self.w * self.v.column(j))
            .collect()
    }

    /// Gauge of `x`: the least `c >= 0` with `x` in `c` times the set;
    /// membership corresponds to `gauge <= 1`.
    pub fn gauge(&self, x: &DVector<f64>, opts: &SolverOptions) -> Result<f64> {
        let mut b = ConicBuilder::new();
        let w = b.vars(self.w_dim());
        let lam_pos = b.vars(self.num_vertices());
        let lam_neg = b.vars(self.num_vertices());
        b.box_bounds(&lam_pos, 0.0, f64::INFINITY);
        b.box_bounds(&lam_neg, 0.0, f64::INFINITY);
        for i in 0..self.signal_dim() {
            let mut e = LinExpr::constant(-x[i]);
            for j in 0..self.w_dim() {
                e.add_term(w.index(j), self.r[(i, j)]);
            }
            b.eq_zero(&e);
        }
        for i in 0..self.y_dim() {
            let mut e = LinExpr::zero();
            for j in 0..self.w_dim() {
                e.add_term(w.index(j), self.q[(i, j)]);
            }
            for j in 0..self.num_vertices() {
                e.add_term(lam_pos.index(j), -self.v[(i, j)]);
                e.add_term(lam_neg.index(j), self.v[(i, j)]);
            }
            b.eq_zero(&e);
        }
        let mut total = LinExpr::zero();
        for j in 0..self.num_vertices() {
            total.add_term(lam_pos.index(j), 1.0);
            total.add_term(lam_neg.index(j), 1.0);
        }
        b.minimize(&total);
        match b.solve(opts) {
            Ok(sol) => Ok(sol.objective.max(0.0)),
            Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    pub fn membership(&self, x: &DVector<f64>, tol: f64, opts: &SolverOptions) -> Result<bool> {
        Ok(self.gauge(x, opts)? <= 1.0 + tol)
    }

    /// Adds `x in polytope image` to a program.
    pub fn constrain_membership(&self, b: &mut ConicBuilder, x: &[LinExpr]) -> Result<()> {
        if x.len() != self.signal_dim() {
            return Err(Error::DimensionMismatch {
                context: "polytope membership constraint",
                expected: self.signal_dim(),
                actual: x.len(),
            });
        }
        let w = b.vars(self.w_dim());
        let lam_pos = b.vars(self.num_vertices());
        let lam_neg = b.vars(self.num_vertices());
        b.box_bounds(&lam_pos, 0.0, f64::INFINITY);
        b.box_bounds(&lam_neg, 0.0, f64::INFINITY);
        for i in 0..self.signal_dim() {
            let mut e = x[i].scaled(-1.0);
            for j in 0..self.w_dim() {
                e.add_term(w.index(j), self.r[(i, j)]);
            }
            b.eq_zero(&e);
        }
        for i in 0..self.y_dim() {
            let mut e = LinExpr::zero();
            for j in 0..self.w_dim() {
                e.add_term(w.index(j), self.q[(i, j)]);
            }
            for j in 0..self.num_vertices() {
                e.add_term(lam_pos.index(j), -self.v[(i, j)]);
                e.add_term(lam_neg.index(j), self.v[(i, j)]);
            }
            b.eq_zero(&e);
        }
        let mut total = LinExpr::constant(-1.0);
        for j in 0..self.num_vertices() {
            total.add_term(lam_pos.index(j), 1.0);
            total.add_term(lam_neg.index(j), 1.0);
        }
        b.nonneg(&total.scaled(-1.0));
        Ok(())
    }
}

/// `Sbar[S] = [Q^+]^T R^T S R Q^+`, the pushforward of a signal-space
/// quadratic to `y`-space.
pub fn sbar_matrix(s: &DMatrix<f64>, poly: &PolytopeImage) -> Result<DMatrix<f64>> {
    let n = poly.signal_dim();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "sbar matrix",
            expected: n,
            actual: s.nrows(),
        });
    }
    let w = poly.rq_pinv();
    Ok(symmetrized(&(w.transpose() * symmetrized(s) * w)))
}

/// Additional conic constraints carving the signal set out of the
/// ellitope-polytope intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtraConstraint {
    /// Standard probability simplex: `x >= 0`, `sum x_i = 1`.
    Simplex,
}

/// The signal set `X`: its symmetrization is contained in the intersection of
/// the ellitope and the polytope image; extra constraints (e.g. the simplex)
/// cut `X` itself out of that intersection.
#[derive(Debug, Clone)]
pub struct SignalSet {
    pub ellitope: Ellitope,
    pub polytope: PolytopeImage,
    pub extras: Vec<ExtraConstraint>,
}

impl SignalSet {
    pub fn new(ellitope: Ellitope, polytope: PolytopeImage, extras: Vec<ExtraConstraint>) -> Result<Self> {
        if ellitope.signal_dim() != polytope.signal_dim() {
            return Err(Error::DimensionMismatch {
                context: "signal set",
                expected: ellitope.signal_dim(),
                actual: polytope.signal_dim(),
            });
        }
        Ok(Self { ellitope, polytope, extras })
    }

    pub fn dim(&self) -> usize {
        self.ellitope.signal_dim()
    }

    pub fn is_symmetric(&self) -> bool {
        self.extras.is_empty()
    }

    /// Adds `x in X` to a program.
    pub fn constrain_membership(&self, b: &mut ConicBuilder, x: &[LinExpr]) -> Result<()> {
        self.ellitope.constrain_membership(b, x)?;
        self.polytope.constrain_membership(b, x)?;
        for extra in &self.extras {
            match extra {
                ExtraConstraint::Simplex => {
                    let mut sum = LinExpr::constant(-1.0);
                    for xi in x {
                        b.nonneg(xi);
                        sum.add_scaled(xi, 1.0);
                    }
                    b.eq_zero(&sum);
                }
            }
        }
        Ok(())
    }

    /// Adds `x in X_s = (X - X) / 2` to a program by introducing two copies
    /// of `X` membership.
    pub fn constrain_symmetrized(&self, b: &mut ConicBuilder, x: &[LinExpr]) -> Result<()> {
        if self.is_symmetric() {
            return self.constrain_membership(b, x);
        }
        let x1 = b.vars(self.dim());
        let x2 = b.vars(self.dim());
        for i in 0..self.dim() {
            let e = x1.expr(i).minus(&x2.expr(i)).scaled(0.5).minus(&x[i]);
            b.eq_zero(&e);
        }
        self.constrain_membership(b, &x1.exprs())?;
        self.constrain_membership(b, &x2.exprs())?;
        Ok(())
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64, opts: &SolverOptions) -> Result<bool> {
        if !self.ellitope.membership(x, tol, opts)? {
            return Ok(false);
        }
        if !self.polytope.membership(x, tol, opts)? {
            return Ok(false);
        }
        for extra in &self.extras {
            match extra {
                ExtraConstraint::Simplex => {
                    if x.iter().any(|&v| v < -tol) || (x.sum() - 1.0).abs() > tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Draws a signal from `X`: Dirichlet(1) weights over the polytope's
    /// vertex images (positive vertices only when a simplex constraint is
    /// present), rejected against ellitope membership. Seeds come from the
    /// injected generator; rejection is capped.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, opts: &SolverOptions) -> Result<DVector<f64>> {
        const MAX_REJECTS: usize = 10_000;
        let vertices = self.polytope.vertex_images();
        let simplex = self.extras.contains(&ExtraConstraint::Simplex);
        let count = if simplex { vertices.len() } else { 2 * vertices.len() };
        for _ in 0..MAX_REJECTS {
            // Dirichlet(1, ..., 1) via normalized exponentials.
            let mut weights: Vec<f64> = (0..count)
                .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0_f64).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let mut x = DVector::zeros(self.dim());
            for (j, v) in vertices.iter().enumerate() {
                if simplex {
                    x += v * weights[j];
                } else {
                    x += v * (weights[2 * j] - weights[2 * j + 1]);
                }
            }
            if self.ellitope.gauge(&x, opts)? <= 1.0 {
                if simplex && (x.iter().any(|&v| v < -1e-12) || (x.sum() - 1.0).abs() > 1e-9) {
                    continue;
                }
                return Ok(x);
            }
        }
        Err(Error::SamplerExhausted(MAX_REJECTS))
    }

    /// Draws from the symmetrization `X_s` as the difference of two samples.
    pub fn sample_symmetrized<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        opts: &SolverOptions,
    ) -> Result<DVector<f64>> {
        if self.is_symmetric() {
            return self.sample(rng, opts);
        }
        let x1 = self.sample(rng, opts)?;
        let x2 = self.sample(rng, opts)?;
        Ok((x1 - x2) * 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn box_support_examples() {
        let set = MonotoneSet::Box { upper: DVector::from_vec(vec![1.0, 1.0, 1.0]) };
        let g = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_relative_eq!(set.support(&g).unwrap(), 6.0);

        let set = MonotoneSet::Box { upper: DVector::from_vec(vec![1.0, 1.0]) };
        let g = DVector::from_vec(vec![-1.0, -2.0]);
        assert_relative_eq!(set.support(&g).unwrap(), 0.0);

        let set = MonotoneSet::Box { upper: DVector::from_vec(vec![2.0, 0.5]) };
        let g = DVector::from_vec(vec![1.0, -4.0]);
        assert_relative_eq!(set.support(&g).unwrap(), 2.0);
    }

    #[test]
    fn support_dominates_box_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let upper = DVector::from_vec(vec![2.0, 0.3, 1.5, 0.9]);
        let set = MonotoneSet::Box { upper: upper.clone() };
        use rand::RngExt;
        for _ in 0..1000 {
            let g = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let s = DVector::from_fn(4, |i, _| rng.random_range(0.0..upper[i]));
            assert!(set.support(&g).unwrap() >= g.dot(&s) - 1e-12);
        }
    }

    #[test]
    fn oracle_kind_unsupported() {
        let set = MonotoneSet::ConicOracle { dim: 2 };
        assert!(matches!(
            set.support(&DVector::zeros(2)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let set = MonotoneSet::unit_box(3);
        assert!(matches!(
            set.support(&DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ellitope_membership_examples() {
        // Euclidean unit ball: 0 is a member, a vector of norm 2 is not.
        let ball = Ellitope::euclidean_ball(3, 1.0).unwrap();
        assert!(ball.membership(&DVector::zeros(3), 1e-9, &opts()).unwrap());
        let x = DVector::from_vec(vec![2.0, 0.0, 0.0]);
        assert!(!ball.membership(&x, 1e-9, &opts()).unwrap());

        // Two-norm/sup-norm intersection with radii 8.5 and 7: 7 e_1 sits on
        // the boundary and is a member.
        let n = 4;
        let (rho2, rho_inf) = (8.5, 7.0);
        let mut t: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut m = DMatrix::zeros(n, n);
                m[(k, k)] = 1.0 / (rho_inf * rho_inf);
                m
            })
            .collect();
        t.push(DMatrix::identity(n, n) / (rho2 * rho2));
        let ell = Ellitope::new(DMatrix::identity(n, n), t, MonotoneSet::unit_box(n + 1)).unwrap();
        let mut x = DVector::zeros(n);
        x[0] = 7.0;
        assert!(ell.membership(&x, 1e-9, &opts()).unwrap());
        x[0] = 7.0 * 1.01;
        assert!(!ell.membership(&x, 1e-9, &opts()).unwrap());
    }

    #[test]
    fn membership_is_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let ball = Ellitope::euclidean_ball(4, 1.3).unwrap();
        for _ in 0..20 {
            let x = crate::linalg::standard_normal_vector(4, &mut rng) * 0.4;
            let a = ball.membership(&x, 1e-9, &opts()).unwrap();
            let b = ball.membership(&(-x), 1e-9, &opts()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gauge_program_matches_closed_form() {
        // Non-identity P: scale by a diagonal embedding; gauge must match the
        // basic closed form computed in latent coordinates.
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 1.0]));
        let t = vec![DMatrix::identity(3, 3)];
        let ell = Ellitope::new(p.clone(), t, MonotoneSet::unit_box(1)).unwrap();
        for _ in 0..5 {
            let z = crate::linalg::standard_normal_vector(3, &mut rng);
            let x = &p * &z;
            let g = ell.gauge(&x, &opts()).unwrap();
            assert_relative_eq!(g, z.norm(), epsilon = 1e-6);
        }
    }

    #[test]
    fn e_factors_square_to_four_t() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let t1 = crate::linalg::random_psd_unit_spectral(5, &mut rng);
        let t2 = crate::linalg::random_psd_unit_spectral(5, &mut rng);
        let ell = Ellitope::basic(vec![t1.clone(), t2.clone()], MonotoneSet::unit_box(2)).unwrap();
        for (ek, tk) in ell.e().iter().zip([t1, t2].iter()) {
            assert_relative_eq!(ek * ek.transpose(), 4.0 * tk, epsilon = 1e-8);
        }
    }

    #[test]
    fn sbar_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let poly = PolytopeImage::l1_ball(3, 2.0).unwrap();
        let zero = DMatrix::zeros(3, 3);
        assert_relative_eq!(sbar_matrix(&zero, &poly).unwrap(), zero);

        let s = crate::linalg::random_psd_unit_spectral(3, &mut rng);
        assert_relative_eq!(sbar_matrix(&s, &poly).unwrap(), s, epsilon = 1e-12);

        // Invertible Q: compare against the explicit inverse.
        let q = crate::linalg::random_with_condition(3, 3, 5.0, &mut rng);
        let r = crate::linalg::random_with_condition(3, 3, 3.0, &mut rng);
        let v = DMatrix::identity(3, 3);
        let poly = PolytopeImage::new(r.clone(), q.clone(), v).unwrap();
        let s = crate::linalg::random_psd_unit_spectral(3, &mut rng);
        let qi = q.try_inverse().unwrap();
        let expected = qi.transpose() * r.transpose() * &s * &r * &qi;
        assert_relative_eq!(sbar_matrix(&s, &poly).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn sbar_is_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let q = crate::linalg::random_with_condition(4, 3, 4.0, &mut rng);
        let r = crate::linalg::random_with_condition(5, 3, 4.0, &mut rng);
        let v = DMatrix::from_fn(4, 6, |_, _| {
            use rand_distr::Distribution;
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let poly = PolytopeImage::new(r, q, v).unwrap();
        let s1 = crate::linalg::random_psd_unit_spectral(5, &mut rng);
        let s2 = crate::linalg::random_psd_unit_spectral(5, &mut rng);
        let (a, b) = (0.7, -1.3);
        let combined = sbar_matrix(&(a * &s1 + b * &s2), &poly).unwrap();
        let separate = a * sbar_matrix(&s1, &poly).unwrap() + b * sbar_matrix(&s2, &poly).unwrap();
        assert_relative_eq!(combined, separate, epsilon = 1e-10);
    }

    #[test]
    fn polytope_membership_l1() {
        let poly = PolytopeImage::l1_ball(3, 2.0).unwrap();
        let x = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        assert!(poly.membership(&x, 1e-8, &opts()).unwrap());
        let x = DVector::from_vec(vec![1.5, -1.0, 0.25]);
        assert!(!poly.membership(&x, 1e-8, &opts()).unwrap());
    }

    #[test]
    fn rank_deficient_q_rejected() {
        let q = DMatrix::from_fn(3, 2, |i, _| i as f64); // two equal columns
        let r = DMatrix::identity(2, 2);
        let v = DMatrix::identity(3, 3);
        assert!(PolytopeImage::new(r, q, v).is_err());
    }

    #[test]
    fn signal_sampler_stays_inside() {
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        let n = 5;
        let ell = Ellitope::euclidean_ball(n, 0.9).unwrap();
        let poly = PolytopeImage::l1_ball(n, 1.0).unwrap();
        let set = SignalSet::new(ell, poly, vec![ExtraConstraint::Simplex]).unwrap();
        for _ in 0..50 {
            let x = set.sample(&mut rng, &opts()).unwrap();
            assert!(set.contains(&x, 1e-7, &opts()).unwrap());
        }
    }

    #[test]
    fn symmetrized_samples_inside_both_sets() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        let n = 4;
        let ell = Ellitope::euclidean_ball(n, 1.0).unwrap();
        let poly = PolytopeImage::l1_ball(n, 1.0).unwrap();
        let set = SignalSet::new(ell, poly, vec![ExtraConstraint::Simplex]).unwrap();
        for _ in 0..30 {
            let x = set.sample_symmetrized(&mut rng, &opts()).unwrap();
            assert!(set.ellitope.membership(&x, 1e-7, &opts()).unwrap());
            assert!(set.polytope.membership(&x, 1e-7, &opts()).unwrap());
        }
    }
}
