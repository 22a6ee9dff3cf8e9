//! Problem instances and their on-disk form: a JSON descriptor referencing
//! dense matrices stored as header-free row-major CSV files.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{MixtureModel, NoiseFamily};
use crate::sets::{Ellitope, ExtraConstraint, MonotoneSet, PolytopeImage, SignalSet};

/// A complete estimation problem: sensing matrix, target map, signal set,
/// noise family, and the loss exponent.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub signal: SignalSet,
    pub noise: NoiseFamily,
    pub theta: f64,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "instance signal set",
                expected: self.n(),
                actual: self.signal.dim(),
            });
        }
        if self.b.ncols() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "instance target map",
                expected: self.n(),
                actual: self.b.ncols(),
            });
        }
        if let NoiseFamily::Mixture(model) = &self.noise {
            if model.dim() != self.m() {
                return Err(Error::DimensionMismatch {
                    context: "instance mixture dimension",
                    expected: self.m(),
                    actual: model.dim(),
                });
            }
            if model.n_components() != self.n() {
                return Err(Error::DimensionMismatch {
                    context: "instance mixture components",
                    expected: self.n(),
                    actual: model.n_components(),
                });
            }
        }
        if !(1.0..=2.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "loss exponent theta must lie in [1, 2], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV matrices
// ---------------------------------------------------------------------------

/// Reads a header-free row-major CSV matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?);
    }
    if rows.is_empty() {
        return Err(Error::Csv(format!("{}: empty matrix", path.display())));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Csv(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Writes a matrix as header-free row-major CSV with shortest round-trip
/// float formatting (locale-independent, full precision).
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_iterator(m.nrows(), m.column(0).iter().cloned()))
    } else if m.nrows() == 1 {
        Ok(DVector::from_iterator(m.ncols(), m.row(0).iter().cloned()))
    } else {
        Err(Error::Csv(format!("{}: expected a vector", path.display())))
    }
}

pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(path, &DMatrix::from_fn(v.len(), 1, |i, _| v[i]))
}

// ---------------------------------------------------------------------------
// JSON descriptor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainDescriptor {
    pub kind: String,
    #[serde(default)]
    pub upper: Vec<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllitopeDescriptor {
    pub p: String,
    pub t: Vec<String>,
    pub domain: DomainDescriptor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeDescriptor {
    pub r: String,
    pub q: String,
    pub v: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseDescriptor {
    Gaussian { sigma_bar: f64 },
    Mixture { means: String, covariances: Vec<String>, n_obs: usize },
}

/// The instance descriptor; all file references are CSV paths relative to the
/// descriptor's directory. Field names are documented in the repository
/// README.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub theta: f64,
    pub a: String,
    pub b: String,
    pub ellitope: EllitopeDescriptor,
    pub polytope: PolytopeDescriptor,
    #[serde(default)]
    pub extra_constraints: Vec<String>,
    pub noise: NoiseDescriptor,
}

fn domain_from_descriptor(d: &DomainDescriptor, expected: usize) -> Result<MonotoneSet> {
    match d.kind.as_str() {
        "box" => {
            if d.upper.len() != expected {
                return Err(Error::Descriptor(format!(
                    "box domain needs {expected} upper bounds, got {}",
                    d.upper.len()
                )));
            }
            Ok(MonotoneSet::Box { upper: DVector::from_vec(d.upper.clone()) })
        }
        "scaled-simplex" => Ok(MonotoneSet::ScaledSimplex {
            radius: d.radius.ok_or_else(|| Error::Descriptor("simplex domain needs a radius".into()))?,
            dim: expected,
        }),
        "conic-oracle" => Ok(MonotoneSet::ConicOracle { dim: expected }),
        other => Err(Error::Descriptor(format!("unknown domain kind {other}"))),
    }
}

fn domain_to_descriptor(d: &MonotoneSet) -> DomainDescriptor {
    match d {
        MonotoneSet::Box { upper } => DomainDescriptor {
            kind: "box".into(),
            upper: upper.iter().cloned().collect(),
            radius: None,
            dim: None,
        },
        MonotoneSet::ScaledSimplex { radius, dim } => DomainDescriptor {
            kind: "scaled-simplex".into(),
            upper: Vec::new(),
            radius: Some(*radius),
            dim: Some(*dim),
        },
        MonotoneSet::ConicOracle { dim } => DomainDescriptor {
            kind: "conic-oracle".into(),
            upper: Vec::new(),
            radius: None,
            dim: Some(*dim),
        },
    }
}

/// Loads an instance from its JSON descriptor.
pub fn load_instance(descriptor_path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(descriptor_path)?;
    let desc: InstanceDescriptor = serde_json::from_str(&text)?;
    let base = descriptor_path.parent().unwrap_or(Path::new("."));
    let resolve = |rel: &str| -> PathBuf { base.join(rel) };

    let a = read_matrix_csv(&resolve(&desc.a))?;
    let b = read_matrix_csv(&resolve(&desc.b))?;
    let p = read_matrix_csv(&resolve(&desc.ellitope.p))?;
    let t: Result<Vec<DMatrix<f64>>> = desc
        .ellitope
        .t
        .iter()
        .map(|f| read_matrix_csv(&resolve(f)))
        .collect();
    let t = t?;
    let domain = domain_from_descriptor(&desc.ellitope.domain, t.len())?;
    let ellitope = Ellitope::new(p, t, domain)?;
    let r = read_matrix_csv(&resolve(&desc.polytope.r))?;
    let q = read_matrix_csv(&resolve(&desc.polytope.q))?;
    let v = read_matrix_csv(&resolve(&desc.polytope.v))?;
    let polytope = PolytopeImage::new(r, q, v)?;
    let extras: Result<Vec<ExtraConstraint>> = desc
        .extra_constraints
        .iter()
        .map(|e| match e.as_str() {
            "simplex" => Ok(ExtraConstraint::Simplex),
            other => Err(Error::Descriptor(format!("unknown extra constraint {other}"))),
        })
        .collect();
    let signal = SignalSet::new(ellitope, polytope, extras?)?;
    let noise = match &desc.noise {
        NoiseDescriptor::Gaussian { sigma_bar } => NoiseFamily::Gaussian { sigma_bar: *sigma_bar },
        NoiseDescriptor::Mixture { means, covariances, n_obs } => {
            let means_mat = read_matrix_csv(&resolve(means))?;
            let mean_vecs: Vec<DVector<f64>> = (0..means_mat.ncols())
                .map(|j| means_mat.column(j).into_owned())
                .collect();
            let covs: Result<Vec<DMatrix<f64>>> =
                covariances.iter().map(|f| read_matrix_csv(&resolve(f))).collect();
            NoiseFamily::Mixture(MixtureModel::new(mean_vecs, covs?, *n_obs)?)
        }
    };
    let inst = ProblemInstance { a, b, signal, noise, theta: desc.theta };
    inst.validate()?;
    Ok(inst)
}

/// Writes an instance as a descriptor plus CSV files under `dir`; returns the
/// descriptor path. File contents are byte-deterministic.
pub fn save_instance(dir: &Path, inst: &ProblemInstance) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("a.csv"), &inst.a)?;
    write_matrix_csv(&dir.join("b.csv"), &inst.b)?;
    write_matrix_csv(&dir.join("p.csv"), inst.signal.ellitope.p())?;
    let mut t_files = Vec::new();
    for (k, t_k) in inst.signal.ellitope.t().iter().enumerate() {
        let name = format!("t_{k:03}.csv");
        write_matrix_csv(&dir.join(&name), t_k)?;
        t_files.push(name);
    }
    write_matrix_csv(&dir.join("r.csv"), inst.signal.polytope.r())?;
    write_matrix_csv(&dir.join("q.csv"), inst.signal.polytope.q())?;
    write_matrix_csv(&dir.join("v.csv"), inst.signal.polytope.v())?;
    let noise = match &inst.noise {
        NoiseFamily::Gaussian { sigma_bar } => NoiseDescriptor::Gaussian { sigma_bar: *sigma_bar },
        NoiseFamily::Mixture(model) => {
            write_matrix_csv(&dir.join("means.csv"), &model.a_matrix())?;
            let mut cov_files = Vec::new();
            for i in 0..model.n_components() {
                let name = format!("cov_{i:03}.csv");
                write_matrix_csv(&dir.join(&name), model.cov(i))?;
                cov_files.push(name);
            }
            NoiseDescriptor::Mixture {
                means: "means.csv".into(),
                covariances: cov_files,
                n_obs: model.n_obs(),
            }
        }
    };
    let desc = InstanceDescriptor {
        theta: inst.theta,
        a: "a.csv".into(),
        b: "b.csv".into(),
        ellitope: EllitopeDescriptor {
            p: "p.csv".into(),
            t: t_files,
            domain: domain_to_descriptor(inst.signal.ellitope.domain()),
        },
        polytope: PolytopeDescriptor { r: "r.csv".into(), q: "q.csv".into(), v: "v.csv".into() },
        extra_constraints: inst
            .signal
            .extras
            .iter()
            .map(|e| match e {
                ExtraConstraint::Simplex => "simplex".to_string(),
            })
            .collect(),
        noise,
    };
    let path = dir.join("instance.json");
    std::fs::write(&path, serde_json::to_string_pretty(&desc)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) * (j as f64 - 1.7));
        let path = dir.path().join("m.csv");
        write_matrix_csv(&path, &m).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_relative_eq!(m, back);
    }

    #[test]
    fn descriptor_round_trip_gaussian() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 4;
        let ell = Ellitope::euclidean_ball(n, 2.0).unwrap();
        let poly = PolytopeImage::l1_ball(n, 1.5).unwrap();
        let signal = SignalSet::new(ell, poly, vec![]).unwrap();
        let a = crate::linalg::random_with_condition(n, n, 10.0, &mut rng);
        let b = crate::linalg::random_with_condition(3, n, 2.0, &mut rng);
        let inst = ProblemInstance {
            a: a.clone(),
            b: b.clone(),
            signal,
            noise: NoiseFamily::Gaussian { sigma_bar: 0.05 },
            theta: 2.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = save_instance(dir.path(), &inst).unwrap();
        let back = load_instance(&path).unwrap();
        assert_relative_eq!(back.a, a);
        assert_relative_eq!(back.b, b);
        assert_eq!(back.signal.dim(), n);
        assert_eq!(back.theta, 2.0);
    }

    #[test]
    fn descriptor_round_trip_mixture() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (n, d) = (3, 3);
        let means: Vec<DVector<f64>> = (0..n)
            .map(|_| crate::linalg::random_unit_vector(d, &mut rng))
            .collect();
        let covs: Vec<DMatrix<f64>> = (0..n)
            .map(|_| crate::linalg::random_psd_unit_spectral(d, &mut rng))
            .collect();
        let model = MixtureModel::new(means, covs, 250).unwrap();
        let a = model.a_matrix();
        let ell = Ellitope::euclidean_ball(n, 1.0).unwrap();
        let poly = PolytopeImage::l1_ball(n, 1.0).unwrap();
        let signal = SignalSet::new(ell, poly, vec![ExtraConstraint::Simplex]).unwrap();
        let inst = ProblemInstance {
            a,
            b: DMatrix::identity(n, n),
            signal,
            noise: NoiseFamily::Mixture(model),
            theta: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = save_instance(dir.path(), &inst).unwrap();
        let back = load_instance(&path).unwrap();
        match &back.noise {
            NoiseFamily::Mixture(m) => {
                assert_eq!(m.n_obs(), 250);
                assert_eq!(m.n_components(), n);
            }
            _ => panic!("expected mixture"),
        }
        assert_eq!(back.signal.extras, vec![ExtraConstraint::Simplex]);
    }

    #[test]
    fn save_is_deterministic() {
        let n = 3;
        let ell = Ellitope::euclidean_ball(n, 2.0).unwrap();
        let poly = PolytopeImage::l1_ball(n, 1.0).unwrap();
        let signal = SignalSet::new(ell, poly, vec![]).unwrap();
        let inst = ProblemInstance {
            a: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            signal,
            noise: NoiseFamily::Gaussian { sigma_bar: 0.1 },
            theta: 2.0,
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        save_instance(d1.path(), &inst).unwrap();
        save_instance(d2.path(), &inst).unwrap();
        for name in ["instance.json", "a.csv", "p.csv", "v.csv"] {
            let x = std::fs::read(d1.path().join(name)).unwrap();
            let y = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs");
        }
    }
}
