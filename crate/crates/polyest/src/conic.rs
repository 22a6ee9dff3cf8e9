//! Conic-program modeling layer.
//!
//! A thin builder over a primal-dual interior-point conic solver (Clarabel).
//! Programs are assembled from sparse linear expressions over scalar
//! variables; supported cones are zero (equalities), nonnegative,
//! second-order, three-dimensional power, and PSD-triangle cones, which is
//! exactly the capability set the design programs need. Every solve reports
//! primal and dual feasibility residuals alongside the solution.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sparse affine expression `constant + sum coeff_i * x_i`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(ix: usize) -> Self {
        Self { terms: vec![(ix, 1.0)], constant: 0.0 }
    }

    pub fn term(ix: usize, coeff: f64) -> Self {
        Self { terms: vec![(ix, coeff)], constant: 0.0 }
    }

    pub fn add_term(&mut self, ix: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((ix, coeff));
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        self.terms.reserve(other.terms.len());
        for &(ix, c) in &other.terms {
            self.terms.push((ix, scale * c));
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = LinExpr::constant(self.constant * scale);
        out.terms = self.terms.iter().map(|&(ix, c)| (ix, c * scale)).collect();
        out
    }

    pub fn plus(&self, other: &LinExpr) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn minus(&self, other: &LinExpr) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    /// Merges duplicate variable indices; drops cancelled terms.
    fn compacted(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_unstable_by_key(|&(ix, _)| ix);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (ix, c) in terms {
            match merged.last_mut() {
                Some((last_ix, last_c)) if *last_ix == ix => *last_c += c,
                _ => merged.push((ix, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr { terms: merged, constant: self.constant }
    }
}

/// Contiguous block of scalar variables.
#[derive(Debug, Clone, Copy)]
pub struct VarBlock {
    pub start: usize,
    pub len: usize,
}

impl VarBlock {
    pub fn index(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.start + i
    }

    pub fn expr(&self, i: usize) -> LinExpr {
        LinExpr::var(self.index(i))
    }

    pub fn exprs(&self) -> Vec<LinExpr> {
        (0..self.len).map(|i| self.expr(i)).collect()
    }
}

/// Symmetric matrix variable stored as its upper triangle, scanned column by
/// column (the same layout the PSD cone uses).
#[derive(Debug, Clone, Copy)]
pub struct SymVar {
    start: usize,
    dim: usize,
}

impl SymVar {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn tri_index(i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        j * (j + 1) / 2 + i
    }

    pub fn var_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.dim && j < self.dim);
        self.start + Self::tri_index(i, j)
    }

    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::var(self.var_index(i, j))
    }

    pub fn num_vars(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Trace as a linear expression.
    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.add_term(self.var_index(i, i), 1.0);
        }
        e
    }

    /// `sum_{ij} w[(i,j)] * S_ij` for symmetric weight matrix `w` (i.e. `Tr(S w)`).
    pub fn weighted_trace(&self, w: &DMatrix<f64>) -> LinExpr {
        debug_assert_eq!(w.nrows(), self.dim);
        let mut e = LinExpr::zero();
        for j in 0..self.dim {
            for i in 0..=j {
                let c = if i == j { w[(i, i)] } else { w[(i, j)] + w[(j, i)] };
                e.add_term(self.var_index(i, j), c);
            }
        }
        e
    }
}

/// Symmetric matrix of affine expressions, upper triangle only.
#[derive(Debug, Clone)]
pub struct SymExprMat {
    dim: usize,
    entries: Vec<LinExpr>,
}

impl SymExprMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![LinExpr::zero(); dim * (dim + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn from_sym_var(v: &SymVar) -> Self {
        let mut m = Self::zeros(v.dim);
        for j in 0..v.dim {
            for i in 0..=j {
                *m.entry_mut(i, j) = v.entry(i, j);
            }
        }
        m
    }

    pub fn from_const(c: &DMatrix<f64>) -> Self {
        let dim = c.nrows();
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..=j {
                *m.entry_mut(i, j) = LinExpr::constant(0.5 * (c[(i, j)] + c[(j, i)]));
            }
        }
        m
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[SymVar::tri_index(i, j)]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[SymVar::tri_index(i, j)]
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &SymExprMat, scale: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(other.entries.iter()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn add_const_scaled(&mut self, c: &DMatrix<f64>, scale: f64) {
        for j in 0..self.dim {
            for i in 0..=j {
                self.entry_mut(i, j).add_constant(0.5 * (c[(i, j)] + c[(j, i)]) * scale);
            }
        }
    }

    /// Congruence `m^T S m` of a symmetric matrix variable by a constant
    /// matrix `m` (`s_dim x out_dim`).
    pub fn congruence(sym: &SymVar, m: &DMatrix<f64>) -> Self {
        let s_dim = sym.dim;
        assert_eq!(m.nrows(), s_dim);
        let out = m.ncols();
        let mut res = Self::zeros(out);
        for c in 0..out {
            for r in 0..=c {
                let e = res.entry_mut(r, c);
                for b in 0..s_dim {
                    let mbc = m[(b, c)];
                    let mbr = m[(b, r)];
                    for a in 0..=b {
                        let coeff = if a == b {
                            m[(a, r)] * mbc
                        } else {
                            m[(a, r)] * mbc + mbr * m[(a, c)]
                        };
                        if coeff != 0.0 {
                            e.add_term(sym.var_index(a, b), coeff);
                        }
                    }
                }
            }
        }
        res
    }

    /// `sum_k weights_k * mats_k` with the weights as scalar variables.
    pub fn weighted_sum(mats: &[DMatrix<f64>], weights: &VarBlock) -> Self {
        assert_eq!(mats.len(), weights.len);
        let dim = mats[0].nrows();
        let mut res = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..=j {
                let e = res.entry_mut(i, j);
                for (k, m) in mats.iter().enumerate() {
                    let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                    if v != 0.0 {
                        e.add_term(weights.index(k), v);
                    }
                }
            }
        }
        res
    }

    /// Block matrix `[[upper, b^T], [b, Diag(diag)]]` used by the loss LMI;
    /// `b` is `nu x n` constant, `upper` is `n x n`.
    pub fn lmi_block(upper: &SymExprMat, b: &DMatrix<f64>, diag: &VarBlock) -> Self {
        let n = upper.dim;
        let nu = b.nrows();
        assert_eq!(b.ncols(), n);
        assert_eq!(diag.len, nu);
        let mut res = Self::zeros(n + nu);
        for j in 0..n {
            for i in 0..=j {
                *res.entry_mut(i, j) = upper.entry(i, j).clone();
            }
        }
        for r in 0..nu {
            for c in 0..n {
                *res.entry_mut(n + r, c) = LinExpr::constant(b[(r, c)]);
            }
            *res.entry_mut(n + r, n + r) = diag.expr(r);
        }
        res
    }
}

/// `S v` for a symmetric matrix variable and a constant vector.
pub fn sym_mul_vec(sym: &SymVar, v: &DVector<f64>) -> Vec<LinExpr> {
    let d = sym.dim();
    assert_eq!(v.len(), d);
    (0..d)
        .map(|i| {
            let mut e = LinExpr::zero();
            for j in 0..d {
                if v[j] != 0.0 {
                    e.add_term(sym.var_index(i, j), v[j]);
                }
            }
            e.compacted()
        })
        .collect()
}

/// `w^T S (w v)` for symmetric variable `S` (`n x n`), constant `w` (`n x p`)
/// and constant `v` (`p`); returns `p` expressions.
pub fn congruence_times_vec(sym: &SymVar, w: &DMatrix<f64>, v: &DVector<f64>) -> Vec<LinExpr> {
    let n = sym.dim();
    assert_eq!(w.nrows(), n);
    let wv = w * v;
    (0..w.ncols())
        .map(|i| {
            let mut e = LinExpr::zero();
            for b in 0..n {
                let wvb = wv[b];
                let wbi = w[(b, i)];
                for a in 0..=b {
                    let coeff = if a == b {
                        w[(a, i)] * wvb
                    } else {
                        w[(a, i)] * wvb + wbi * wv[a]
                    };
                    if coeff != 0.0 {
                        e.add_term(sym.var_index(a, b), coeff);
                    }
                }
            }
            e.compacted()
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

#[derive(Debug, Clone)]
enum Block {
    Soc(Vec<Row>),
    Psd { dim: usize, rows: Vec<Row> },
    Power { alpha: f64, rows: Vec<Row> },
}

/// Solver tolerances and limits.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    pub time_limit: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap_abs: 1e-9,
            tol_gap_rel: 1e-9,
            max_iter: 400,
            time_limit: 600.0,
            verbose: false,
        }
    }
}

impl SolverOptions {
    /// Tighter tolerances for design solves whose optima feed certified bounds.
    pub fn tight() -> Self {
        Self {
            tol_feas: 1e-9,
            tol_gap_abs: 1e-10,
            tol_gap_rel: 1e-10,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Terminated at reduced accuracy; residuals still reported.
    AlmostOptimal,
}

/// Solution with feasibility residuals, as reported by the interior-point solver.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub r_prim: f64,
    pub r_dual: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn value(&self, e: &LinExpr) -> f64 {
        e.constant + e.terms.iter().map(|&(ix, c)| c * self.x[ix]).sum::<f64>()
    }

    pub fn vector(&self, b: &VarBlock) -> DVector<f64> {
        DVector::from_iterator(b.len, (0..b.len).map(|i| self.x[b.index(i)]))
    }

    pub fn matrix(&self, v: &SymVar) -> DMatrix<f64> {
        DMatrix::from_fn(v.dim, v.dim, |i, j| self.x[v.var_index(i, j)])
    }
}

/// Incremental conic-program builder; `solve` hands the assembled problem to
/// the interior-point backend.
#[derive(Debug, Default)]
pub struct ConicBuilder {
    nvars: usize,
    obj: Vec<(usize, f64)>,
    zero_rows: Vec<Row>,
    nonneg_rows: Vec<Row>,
    blocks: Vec<Block>,
}

impl ConicBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn num_rows(&self) -> usize {
        let block_rows: usize = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Soc(r) => r.len(),
                Block::Psd { rows, .. } => rows.len(),
                Block::Power { rows, .. } => rows.len(),
            })
            .sum();
        self.zero_rows.len() + self.nonneg_rows.len() + block_rows
    }

    pub fn vars(&mut self, n: usize) -> VarBlock {
        let start = self.nvars;
        self.nvars += n;
        VarBlock { start, len: n }
    }

    pub fn var(&mut self) -> LinExpr {
        let b = self.vars(1);
        b.expr(0)
    }

    pub fn sym_matrix_var(&mut self, dim: usize) -> SymVar {
        let start = self.nvars;
        self.nvars += SymVar::num_vars(dim);
        SymVar { start, dim }
    }

    /// Adds `e` to the objective (always minimization).
    pub fn minimize(&mut self, e: &LinExpr) {
        for &(ix, c) in &e.terms {
            self.obj.push((ix, c));
        }
    }

    fn row_of(e: &LinExpr) -> Row {
        let c = e.compacted();
        Row { coeffs: c.terms, rhs: c.constant }
    }

    /// `e == 0`
    pub fn eq_zero(&mut self, e: &LinExpr) {
        self.zero_rows.push(Self::row_of(e));
    }

    /// `e >= 0`
    pub fn nonneg(&mut self, e: &LinExpr) {
        self.nonneg_rows.push(Self::row_of(e));
    }

    /// `|e| <= bound`
    pub fn abs_le(&mut self, e: &LinExpr, bound: &LinExpr) {
        self.nonneg(&bound.minus(e));
        self.nonneg(&bound.plus(e));
    }

    /// `lo <= v_i <= hi` for every variable in the block.
    pub fn box_bounds(&mut self, v: &VarBlock, lo: f64, hi: f64) {
        for i in 0..v.len {
            let e = v.expr(i);
            self.nonneg(&e.minus(&LinExpr::constant(lo)));
            self.nonneg(&LinExpr::constant(hi).minus(&e));
        }
    }

    /// `||rest||_2 <= t`
    pub fn soc(&mut self, t: &LinExpr, rest: &[LinExpr]) {
        let mut rows = Vec::with_capacity(rest.len() + 1);
        rows.push(Self::row_of(t));
        rows.extend(rest.iter().map(Self::row_of));
        self.blocks.push(Block::Soc(rows));
    }

    /// `||u||_2^2 <= t` via the standard second-order-cone lift.
    pub fn quad_le(&mut self, u: &[LinExpr], t: &LinExpr) {
        let half = LinExpr::constant(0.5);
        let tp = t.scaled(0.5).plus(&half);
        let tm = t.scaled(0.5).minus(&half);
        let mut rest: Vec<LinExpr> = u.to_vec();
        rest.push(tm);
        self.soc(&tp, &rest);
    }

    /// `(x, y, z)` in the power cone `x^alpha * y^(1-alpha) >= |z|`, `x, y >= 0`.
    pub fn power3(&mut self, x: &LinExpr, y: &LinExpr, z: &LinExpr, alpha: f64) {
        let rows = vec![Self::row_of(x), Self::row_of(y), Self::row_of(z)];
        self.blocks.push(Block::Power { alpha, rows });
    }

    /// Constrains the symmetric expression matrix to be PSD.
    pub fn psd(&mut self, m: &SymExprMat) {
        let d = m.dim();
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut rows = Vec::with_capacity(d * (d + 1) / 2);
        for j in 0..d {
            for i in 0..=j {
                let e = if i == j { m.entry(i, j).clone() } else { m.entry(i, j).scaled(sqrt2) };
                rows.push(Self::row_of(&e));
            }
        }
        self.blocks.push(Block::Psd { dim: d, rows });
    }

    /// PSD constraint directly on a symmetric matrix variable.
    pub fn psd_var(&mut self, v: &SymVar) {
        self.psd(&SymExprMat::from_sym_var(v));
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<ConicSolution> {
        // Assemble rows in cone order: zero, nonneg, then soc/psd/power blocks.
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut ordered: Vec<&Row> = Vec::with_capacity(self.num_rows());
        if !self.zero_rows.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.zero_rows.len()));
            ordered.extend(self.zero_rows.iter());
        }
        if !self.nonneg_rows.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.nonneg_rows.len()));
            ordered.extend(self.nonneg_rows.iter());
        }
        for b in &self.blocks {
            match b {
                Block::Soc(rows) => {
                    cones.push(SupportedConeT::SecondOrderConeT(rows.len()));
                    ordered.extend(rows.iter());
                }
                Block::Psd { dim, rows } => {
                    cones.push(SupportedConeT::PSDTriangleConeT(*dim));
                    ordered.extend(rows.iter());
                }
                Block::Power { alpha, rows } => {
                    cones.push(SupportedConeT::PowerConeT(*alpha));
                    ordered.extend(rows.iter());
                }
            }
        }

        let nrows = ordered.len();
        // Slack semantics: s = b - A x must equal the row expression
        // rhs + coeffs . x, so A carries the negated coefficients.
        let mut b_vec = vec![0.0; nrows];
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (r, row) in ordered.iter().enumerate() {
            b_vec[r] = row.rhs;
            for &(c, v) in &row.coeffs {
                triplets.push((c, r, -v));
            }
        }
        triplets.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let nnz = triplets.len();
        let mut colptr = vec![0usize; self.nvars + 1];
        let mut rowval = Vec::with_capacity(nnz);
        let mut nzval = Vec::with_capacity(nnz);
        for &(c, r, v) in &triplets {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..self.nvars {
            colptr[c + 1] += colptr[c];
        }
        let a = CscMatrix::new(nrows, self.nvars, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::spalloc((self.nvars, self.nvars), 0);

        let mut q = vec![0.0; self.nvars];
        for &(ix, c) in &self.obj {
            q[ix] += c;
        }

        let settings = DefaultSettings {
            verbose: opts.verbose,
            max_iter: opts.max_iter,
            time_limit: opts.time_limit,
            tol_feas: opts.tol_feas,
            tol_gap_abs: opts.tol_gap_abs,
            tol_gap_rel: opts.tol_gap_rel,
            ..DefaultSettings::default()
        };

        let mut solver = DefaultSolver::new(&p, &q, &a, &b_vec, &cones, settings)
            .map_err(|e| Error::InvalidParameter(format!("solver rejected problem: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                return Err(Error::Infeasible { r_prim: sol.r_prim, r_dual: sol.r_dual });
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                return Err(Error::Unbounded);
            }
            other => {
                return Err(Error::SolverFailure {
                    status: format!("{other:?}"),
                    r_prim: sol.r_prim,
                    r_dual: sol.r_dual,
                });
            }
        };
        Ok(ConicSolution {
            x: sol.x.clone(),
            objective: sol.obj_val,
            status,
            r_prim: sol.r_prim,
            r_dual: sol.r_dual,
            iterations: sol.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lp_box() {
        // min x - y subject to -1 <= x, y <= 1  ->  -2 at (-1, 1)
        let mut b = ConicBuilder::new();
        let v = b.vars(2);
        b.box_bounds(&v, -1.0, 1.0);
        b.minimize(&v.expr(0).minus(&v.expr(1)));
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.objective, -2.0, epsilon = 1e-7);
    }

    #[test]
    fn socp_norm() {
        // min t s.t. ||(x-3, x+4)|| <= t, x = 0  ->  t = 5
        let mut b = ConicBuilder::new();
        let x = b.var();
        let t = b.var();
        b.eq_zero(&x);
        b.soc(
            &t,
            &[
                x.minus(&LinExpr::constant(3.0)),
                x.plus(&LinExpr::constant(4.0)),
            ],
        );
        b.minimize(&t);
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.value(&t), 5.0, epsilon = 1e-7);
    }

    #[test]
    fn quad_lift() {
        // min t s.t. ||(1, 2)||^2 <= t  ->  5
        let mut b = ConicBuilder::new();
        let t = b.var();
        b.quad_le(&[LinExpr::constant(1.0), LinExpr::constant(2.0)], &t);
        b.minimize(&t);
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.objective, 5.0, epsilon = 1e-7);
    }

    #[test]
    fn sdp_scalar() {
        // min x s.t. [[x, 1], [1, x]] >= 0  ->  x = 1
        let mut b = ConicBuilder::new();
        let x = b.var();
        let mut m = SymExprMat::zeros(2);
        *m.entry_mut(0, 0) = x.clone();
        *m.entry_mut(1, 1) = x.clone();
        *m.entry_mut(0, 1) = LinExpr::constant(1.0);
        b.psd(&m);
        b.minimize(&x);
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.value(&x), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn sdp_matrix_var_projection() {
        // Nearest PSD matrix to diag(1, -2) in the scalarized sense:
        // min sum of slack bounds with X psd, X_11 = 1 fixed, X_22 >= 0 free cost.
        // Simpler check: max Tr(C X) s.t. Tr(X) <= 1, X psd, C = diag(2, 1) -> 2.
        let mut b = ConicBuilder::new();
        let x = b.sym_matrix_var(2);
        b.psd_var(&x);
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let tr_cx = x.weighted_trace(&c);
        b.nonneg(&LinExpr::constant(1.0).minus(&x.trace()));
        b.minimize(&tr_cx.scaled(-1.0));
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(-sol.objective, 2.0, epsilon = 1e-7);
        let xm = sol.matrix(&x);
        assert!(crate::linalg::min_symmetric_eigenvalue(&xm) >= -1e-8);
    }

    #[test]
    fn power_cone() {
        // min x s.t. x^(1/3) >= 0.5 (via (x, 1, 0.5) in P_{1/3})  ->  x = 0.125
        let mut b = ConicBuilder::new();
        let x = b.var();
        b.power3(&x, &LinExpr::constant(1.0), &LinExpr::constant(0.5), 1.0 / 3.0);
        b.minimize(&x);
        let sol = b.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.value(&x), 0.125, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut b = ConicBuilder::new();
        let x = b.var();
        b.nonneg(&x.minus(&LinExpr::constant(1.0)));
        b.nonneg(&LinExpr::constant(-1.0).minus(&x));
        b.minimize(&x);
        match b.solve(&SolverOptions::default()) {
            Err(Error::Infeasible { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn congruence_matches_dense() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let s_dense = crate::linalg::random_psd_unit_spectral(4, &mut rng);
        let m = DMatrix::from_fn(4, 3, |_, _| {
            use rand_distr::Distribution;
            rand_distr::StandardNormal.sample(&mut rng)
        });
        // Fix the sym var at s_dense via equality rows, then check m^T S m.
        let mut b = ConicBuilder::new();
        let s = b.sym_matrix_var(4);
        for j in 0..4 {
            for i in 0..=j {
                b.eq_zero(&s.entry(i, j).minus(&LinExpr::constant(s_dense[(i, j)])));
            }
        }
        let cong = SymExprMat::congruence(&s, &m);
        let t = b.vars(6);
        let mut k = 0;
        for j in 0..3 {
            for i in 0..=j {
                b.eq_zero(&t.expr(k).minus(cong.entry(i, j)));
                k += 1;
            }
        }
        b.minimize(&LinExpr::zero());
        let sol = b.solve(&SolverOptions::default()).unwrap();
        let expected = m.transpose() * &s_dense * &m;
        let mut k = 0;
        for j in 0..3 {
            for i in 0..=j {
                assert_relative_eq!(sol.x[t.index(k)], expected[(i, j)], epsilon = 1e-7);
                k += 1;
            }
        }
    }
}
