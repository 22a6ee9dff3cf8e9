//! Noise models: the confidence-indexed norm family with ellitopic unit
//! balls, observation samplers for the Gaussian and mixture-sub-Gaussian
//! models, and the sub-Gaussian tail bound they rest on.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, psd_sqrt, standard_normal_vector, symmetrized};
use crate::sets::{Ellitope, MonotoneSet};

/// Standard normal quantile (inverse CDF) by Wichura's PPND16 rational
/// approximation; absolute error below 1e-9 over (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = q
            * (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
                + 6.726_577_092_700_87e4)
                * r
                + 4.592_195_393_154_987e4)
                * r
                + 1.373_169_376_550_946_1e4)
                * r
                + 1.971_590_950_306_551_3e3)
                * r
                + 1.331_416_678_917_843_8e2)
                * r
                + 3.387_132_872_796_366_5);
        let den = ((((((5.226_495_278_852_545_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return Ok(num / den);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -val } else { val })
}

/// Noise-norm family kind; the Euclidean-ball kind admits exact
/// eigendecomposition contrasts, the general kind goes through the
/// randomized cone decomposition.
#[derive(Debug, Clone)]
pub enum NoiseKind {
    EuclideanBall { sigma_bar: f64, quantile: f64 },
    General,
}

/// A member of the norm family: `pi_delta(h) <= 1` guarantees
/// `Prob{|h^T xi| > 1} <= delta` uniformly over admissible signals, and the
/// unit ball is the ellitope `{ h = S_delta z : z^T S_l z <= s_l, s in S }`.
#[derive(Debug, Clone)]
pub struct NoiseNorm {
    pub kind: NoiseKind,
    s_delta: DMatrix<f64>,
    ball: Ellitope,
    s_delta_is_identity: bool,
    delta: f64,
}

impl NoiseNorm {
    /// Gaussian observation noise with `sigma_x <= sigma_bar`:
    /// `pi_delta(h) = sigma_bar * q_{1 - delta/2} * ||h||_2`.
    pub fn gaussian(sigma_bar: f64, delta: f64, m: usize) -> Result<Self> {
        if sigma_bar <= 0.0 {
            return Err(Error::InvalidParameter("sigma_bar must be positive".into()));
        }
        check_delta(delta)?;
        let q = normal_quantile(1.0 - delta / 2.0)?;
        let bound = 1.0 / (sigma_bar * sigma_bar * q * q);
        let ball = Ellitope::basic(
            vec![DMatrix::identity(m, m)],
            MonotoneSet::Box { upper: DVector::from_element(1, bound) },
        )?;
        Ok(Self {
            kind: NoiseKind::EuclideanBall { sigma_bar, quantile: q },
            s_delta: DMatrix::identity(m, m),
            ball,
            s_delta_is_identity: true,
            delta,
        })
    }

    /// Norm for the mixture-sub-Gaussian model. With `beta =
    /// sqrt(N / ln(2/delta))` the norm is
    /// `2/beta * max( max_{i<j} |g^T (a_i - a_j)|, max_i sqrt(g^T Th_i g) )`,
    /// whose unit ball is the basic ellitope with one rank-one quadratic per
    /// ordered pair and one quadratic per component covariance, over the unit
    /// box.
    pub fn mixture(model: &MixtureModel, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let d = model.dim();
        let n = model.n_components();
        let beta = model.beta(delta);
        let c = 4.0 / (beta * beta);
        let mut quads: Vec<DMatrix<f64>> = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = model.mean(i) - model.mean(j);
                quads.push(c * &diff * diff.transpose());
            }
        }
        for i in 0..n {
            quads.push(c * model.cov(i));
        }
        let l = quads.len();
        let ball = Ellitope::basic(quads, MonotoneSet::unit_box(l))?;
        Ok(Self {
            kind: NoiseKind::General,
            s_delta: DMatrix::identity(d, d),
            ball,
            s_delta_is_identity: true,
            delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Observation-space dimension `m`.
    pub fn obs_dim(&self) -> usize {
        self.s_delta.nrows()
    }

    /// Latent dimension `M` of the unit-ball ellitope.
    pub fn latent_dim(&self) -> usize {
        self.s_delta.ncols()
    }

    /// Number of quadratics `L` in the unit-ball description.
    pub fn num_quadratics(&self) -> usize {
        self.ball.num_quadratics()
    }

    pub fn s_delta(&self) -> &DMatrix<f64> {
        &self.s_delta
    }

    pub fn s_delta_is_identity(&self) -> bool {
        self.s_delta_is_identity
    }

    /// The latent unit ball `{ z : exists s in S, z^T S_l z <= s_l }`.
    pub fn ball(&self) -> &Ellitope {
        &self.ball
    }

    /// Evaluates the norm. Both supported families have an identity latent
    /// embedding, so this is the closed-form basic-ellitope gauge; a general
    /// embedding would fall back to the conic gauge program.
    pub fn evaluate(&self, h: &DVector<f64>) -> Result<f64> {
        if h.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                context: "noise norm evaluation",
                expected: self.obs_dim(),
                actual: h.len(),
            });
        }
        match &self.kind {
            NoiseKind::EuclideanBall { sigma_bar, quantile } => Ok(sigma_bar * quantile * h.norm()),
            NoiseKind::General => {
                if self.s_delta_is_identity {
                    self.ball.gauge(h, &SolverOptions::default())
                } else {
                    Err(Error::Unsupported(
                        "norm evaluation for a non-identity latent embedding".into(),
                    ))
                }
            }
        }
    }

    /// `pi_delta(h) <= 1 + tol`.
    pub fn is_admissible(&self, h: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.evaluate(h)? <= 1.0 + tol)
    }

    /// The scalar `sigma_bar^2 q^2` charging `Tr(Theta)` on the exact
    /// Euclidean-ball design path.
    pub fn euclidean_trace_weight(&self) -> Result<f64> {
        match &self.kind {
            NoiseKind::EuclideanBall { sigma_bar, quantile } => {
                Ok(sigma_bar * sigma_bar * quantile * quantile)
            }
            NoiseKind::General => Err(Error::Unsupported(
                "trace weight only exists for the Euclidean-ball kind".into(),
            )),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// The mixture-sub-Gaussian observation model: `N` independent draws, each
/// from one of `n` sub-Gaussian families `SG(a_i, Th_i)` selected by the
/// unknown probability vector, averaged into a single observation.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    cov_sqrts: Vec<DMatrix<f64>>,
    n_obs: usize,
}

impl MixtureModel {
    pub fn new(means: Vec<DVector<f64>>, covs: Vec<DMatrix<f64>>, n_obs: usize) -> Result<Self> {
        if n_obs == 0 {
            return Err(Error::InvalidParameter("N_obs must be positive".into()));
        }
        if means.is_empty() || means.len() != covs.len() {
            return Err(Error::InvalidParameter(
                "means and covariances must be nonempty and matched".into(),
            ));
        }
        let d = means[0].len();
        let mut sym_covs = Vec::with_capacity(covs.len());
        let mut sqrts = Vec::with_capacity(covs.len());
        for (a, th) in means.iter().zip(covs.iter()) {
            if a.len() != d || th.nrows() != d || th.ncols() != d {
                return Err(Error::DimensionMismatch {
                    context: "mixture model",
                    expected: d,
                    actual: a.len().min(th.nrows()),
                });
            }
            let s = symmetrized(th);
            if min_symmetric_eigenvalue(&s) < -1e-10 {
                return Err(Error::InvalidSet("mixture covariance is not PSD".into()));
            }
            sqrts.push(psd_sqrt(&s));
            sym_covs.push(s);
        }
        Ok(Self { means, covs: sym_covs, cov_sqrts: sqrts, n_obs })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn mean(&self, i: usize) -> &DVector<f64> {
        &self.means[i]
    }

    pub fn cov(&self, i: usize) -> &DMatrix<f64> {
        &self.covs[i]
    }

    /// Sensing matrix whose columns are the component means.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = self.n_components();
        DMatrix::from_fn(d, n, |r, c| self.means[c][r])
    }

    /// `beta = sqrt(N / ln(2/delta))`.
    pub fn beta(&self, delta: f64) -> f64 {
        (self.n_obs as f64 / (2.0 / delta).ln()).sqrt()
    }
}

/// One Gaussian observation `omega = A x + sigma * standard normal`.
pub fn sample_gaussian<R: Rng + ?Sized>(
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    sigma: f64,
    rng: &mut R,
) -> DVector<f64> {
    a * x + standard_normal_vector(a.nrows(), rng) * sigma
}

/// One mixture observation: averages `N` draws, each taken from the Gaussian
/// representative of the component selected by the probability vector `x`.
pub fn sample_mixture<R: Rng + ?Sized>(
    model: &MixtureModel,
    x: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = model.n_components();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "mixture sampling",
            expected: n,
            actual: x.len(),
        });
    }
    if x.iter().any(|&v| v < -1e-12) || (x.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "mixture weights must form a probability vector".into(),
        ));
    }
    let d = model.dim();
    let mut acc = DVector::zeros(d);
    for _ in 0..model.n_obs {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut cum = 0.0;
        let mut idx = n - 1;
        for i in 0..n {
            cum += x[i].max(0.0);
            if u < cum {
                idx = i;
                break;
            }
        }
        let g = standard_normal_vector(d, rng);
        acc += model.mean(idx) + &model.cov_sqrts[idx] * g;
    }
    Ok(acc / model.n_obs as f64)
}

/// Sub-Gaussian tail bound `2 exp(-tau^2 N / (2 (kappa^2 + sigma^2)))` with
/// `kappa = max_{i,j} |h^T (a_i - a_j)|` and `sigma^2 = max_i h^T Th_i h`
/// computed from the model; valid uniformly over probability vectors.
pub fn tail_bound(model: &MixtureModel, h: &DVector<f64>, tau: f64) -> Result<f64> {
    if h.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "tail bound",
            expected: model.dim(),
            actual: h.len(),
        });
    }
    let n = model.n_components();
    let mut kappa: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            kappa = kappa.max((h.dot(model.mean(i)) - h.dot(model.mean(j))).abs());
        }
    }
    let mut sigma2: f64 = 0.0;
    for i in 0..n {
        sigma2 = sigma2.max((h.transpose() * model.cov(i) * h)[0]);
    }
    let denom = 2.0 * (kappa * kappa + sigma2);
    if denom == 0.0 {
        return Ok(if tau > 0.0 { 0.0 } else { 2.0 });
    }
    Ok(2.0 * (-(tau * tau) * model.n_obs as f64 / denom).exp())
}

/// Observation-model family; builds the matching norm per confidence level
/// and draws observations.
#[derive(Debug, Clone)]
pub enum NoiseFamily {
    Gaussian { sigma_bar: f64 },
    Mixture(MixtureModel),
}

impl NoiseFamily {
    pub fn norm(&self, delta: f64, m: usize) -> Result<NoiseNorm> {
        match self {
            NoiseFamily::Gaussian { sigma_bar } => NoiseNorm::gaussian(*sigma_bar, delta, m),
            NoiseFamily::Mixture(model) => {
                if model.dim() != m {
                    return Err(Error::DimensionMismatch {
                        context: "mixture norm",
                        expected: m,
                        actual: model.dim(),
                    });
                }
                NoiseNorm::mixture(model, delta)
            }
        }
    }

    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        a: &DMatrix<f64>,
        x: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        match self {
            NoiseFamily::Gaussian { sigma_bar } => Ok(sample_gaussian(x, a, *sigma_bar, rng)),
            NoiseFamily::Mixture(model) => sample_mixture(model, x, rng),
        }
    }
}
