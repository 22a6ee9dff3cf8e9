//! Small dense linear-algebra helpers shared across the crate: symmetric
//! eigenwork, PSD square roots, quadratic-form factors, norms, and seeded
//! random matrix generators with prescribed conditioning.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

/// Forces exact symmetry: `(m + m^T) / 2`.
pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Smallest eigenvalue of a symmetric matrix (symmetrizes first).
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let s = symmetrized(m);
    let eig = s.symmetric_eigen();
    eig.eigenvalues.min()
}

/// Eigenvalues (descending) and matching eigenvector columns of a symmetric matrix.
pub fn eigen_descending(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s = symmetrized(m);
    let dim = s.nrows();
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(dim, dim);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Symmetric PSD square root with negative eigenvalues clipped at zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = eigen_descending(m);
    let sqrt_vals = DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(0.0).sqrt()));
    &vecs * DMatrix::from_diagonal(&sqrt_vals) * vecs.transpose()
}

/// A cached factorization of a PSD matrix `S` for evaluating `g^T S g` and for
/// emitting the matching conic rows. Rank-one matrices are kept as a single
/// vector `l` with `g^T S g = (l^T g)^2`, which lets program builders replace a
/// full second-order cone by a scalar bound.
#[derive(Debug, Clone)]
pub enum QuadFactor {
    RankOne(DVector<f64>),
    Full(DMatrix<f64>),
}

impl QuadFactor {
    /// Builds the factor, detecting numerical rank one.
    pub fn new(s: &DMatrix<f64>) -> Self {
        let (vals, vecs) = eigen_descending(s);
        let top = vals[0].max(0.0);
        let second = if vals.len() > 1 { vals[1].abs() } else { 0.0 };
        if top == 0.0 {
            return QuadFactor::RankOne(DVector::zeros(s.nrows()));
        }
        if second <= 1e-12 * top {
            let l = vecs.column(0) * top.sqrt();
            QuadFactor::RankOne(l.into_owned())
        } else {
            QuadFactor::Full(psd_sqrt(s))
        }
    }

    /// Evaluates `g^T S g`.
    pub fn quad(&self, g: &DVector<f64>) -> f64 {
        match self {
            QuadFactor::RankOne(l) => {
                let d = l.dot(g);
                d * d
            }
            QuadFactor::Full(r) => (r * g).norm_squared(),
        }
    }
}

/// `l_theta` norm for `theta` in `[1, 2]` (accepts any `theta >= 1`).
pub fn lp_norm(v: &DVector<f64>, theta: f64) -> f64 {
    if theta == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if theta == 2.0 {
        v.norm()
    } else {
        v.iter()
            .map(|x| x.abs().powf(theta))
            .sum::<f64>()
            .powf(1.0 / theta)
    }
}

/// Conjugate exponent `theta* = theta / (2 - theta)`; `theta = 2` maps to infinity.
pub fn dual_exponent(theta: f64) -> f64 {
    if theta >= 2.0 {
        f64::INFINITY
    } else {
        theta / (2.0 - theta)
    }
}

/// `l_p` norm with `p` possibly infinite (used for the `zeta` certificate norm).
pub fn lp_norm_gen(v: &DVector<f64>, p: f64) -> f64 {
    if p.is_infinite() {
        v.amax()
    } else {
        lp_norm(v, p)
    }
}

/// Standard normal vector of the given length.
pub fn standard_normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

/// Haar-distributed random orthogonal matrix via QR of a Gaussian matrix with
/// the sign fix that makes the factor unique.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Random PSD matrix with unit spectral norm.
pub fn random_psd_unit_spectral<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let s = &g * g.transpose();
    let top = eigen_descending(&s).0[0];
    s / top
}

/// Random `rows x cols` matrix with prescribed condition number on its
/// `min(rows, cols)` nonzero singular values: orthogonal factors from QR of
/// Gaussian matrices, singular values log-uniform between `1` and `1/cond`
/// with the extremes pinned so the condition number is exact.
pub fn random_with_condition<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    cond: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    assert!(cond >= 1.0, "condition number must be >= 1");
    let k = rows.min(cols);
    let u = random_orthogonal(rows, rng);
    let v = random_orthogonal(cols, rng);
    let lo = (1.0 / cond).ln();
    let mut sv: Vec<f64> = (0..k).map(|_| (rng.random_range(0.0..=1.0) * lo).exp()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if k >= 1 {
        sv[0] = 1.0;
    }
    if k >= 2 {
        sv[k - 1] = 1.0 / cond;
    }
    let mut sigma = DMatrix::zeros(rows, cols);
    for i in 0..k {
        sigma[(i, i)] = sv[i];
    }
    u * sigma * v.transpose()
}

/// Uniform vector on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = standard_normal_vector(dim, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let s = random_psd_unit_spectral(6, &mut rng);
        let r = psd_sqrt(&s);
        assert_relative_eq!(&r * &r, s, epsilon = 1e-10);
    }

    #[test]
    fn quad_factor_rank_one_detected() {
        let l = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = &l * l.transpose();
        match QuadFactor::new(&s) {
            QuadFactor::RankOne(v) => {
                let g = DVector::from_vec(vec![0.3, 1.0, -0.7]);
                assert_relative_eq!(v.dot(&g).powi(2), (g.transpose() * &s * &g)[0], epsilon = 1e-12);
            }
            QuadFactor::Full(_) => panic!("expected rank-one factor"),
        }
    }

    #[test]
    fn condition_number_is_pinned() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = random_with_condition(8, 8, 1e3, &mut rng);
        let sv = a.svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        assert_relative_eq!(cond, 1e3, max_relative = 1e-9);
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let q = random_orthogonal(7, &mut rng);
        assert_relative_eq!(
            q.transpose() * &q,
            DMatrix::identity(7, 7),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lp_norms() {
        let v = DVector::from_vec(vec![3.0, -4.0]);
        assert_relative_eq!(lp_norm(&v, 1.0), 7.0);
        assert_relative_eq!(lp_norm(&v, 2.0), 5.0);
        assert_relative_eq!(lp_norm_gen(&v, f64::INFINITY), 4.0);
        assert!(lp_norm(&v, 1.5) < 7.0 && lp_norm(&v, 1.5) > 5.0);
        assert!(dual_exponent(2.0).is_infinite());
        assert_relative_eq!(dual_exponent(1.0), 1.0);
        assert_relative_eq!(dual_exponent(1.5), 3.0);
    }
}
