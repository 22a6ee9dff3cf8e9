//! Design bundles on disk: a JSON summary of the solved design plus the
//! contrast matrix, column provenance, and the design matrices as CSV files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use polyest::design::{ColumnInfo, ContrastMatrix, ContrastSide};
use polyest::instance::{read_matrix_csv, write_matrix_csv};

use crate::experiments::DesignedEstimator;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleMeta {
    pub mode: String,
    pub delta: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub phi_gamma: f64,
    pub rho: f64,
    pub varsigma: f64,
    pub objective: f64,
    pub theta_loss: f64,
    pub cols_ellitope: usize,
    pub cols_polytope: usize,
    pub solver_iterations: u32,
    pub r_prim: f64,
    pub r_dual: f64,
    pub violations: Vec<String>,
    pub zeta: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Writes `design.json`, `contrast.csv`, `provenance.csv`, and the design
/// matrices under `dir`.
pub fn write_design_bundle(dir: &Path, d: &DesignedEstimator) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let sol = &d.solution;
    let meta = BundleMeta {
        mode: d.mode.label().to_string(),
        delta: d.delta,
        epsilon: d.epsilon,
        bound: d.bound,
        phi_gamma: sol.phi_gamma,
        rho: sol.rho,
        varsigma: sol.varsigma,
        objective: sol.objective,
        theta_loss: sol.theta_loss,
        cols_ellitope: d.contrast.count_side(ContrastSide::Ellitope),
        cols_polytope: d.contrast.count_side(ContrastSide::Polytope),
        solver_iterations: sol.diagnostics.iterations,
        r_prim: sol.diagnostics.r_prim,
        r_dual: sol.diagnostics.r_dual,
        violations: sol.diagnostics.violations.clone(),
        zeta: sol.zeta.iter().cloned().collect(),
        gamma: sol.gamma.iter().cloned().collect(),
    };
    let mut written = Vec::new();
    let meta_path = dir.join("design.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    written.push(meta_path);

    let contrast_path = dir.join("contrast.csv");
    write_matrix_csv(&contrast_path, &d.contrast.h)?;
    written.push(contrast_path);

    let prov_path = dir.join("provenance.csv");
    let mut prov = String::from("column,side,weight\n");
    for (j, c) in d.contrast.columns.iter().enumerate() {
        prov.push_str(&format!("{j},{},{}\n", c.side.label(), c.weight));
    }
    std::fs::write(&prov_path, prov)?;
    written.push(prov_path);

    for (name, m) in [
        ("theta.csv", &sol.theta_mat),
        ("u.csv", &sol.u_mat),
        ("s.csv", &sol.s_mat),
    ] {
        let p = dir.join(name);
        write_matrix_csv(&p, m)?;
        written.push(p);
    }
    if !sol.g.is_empty() {
        let m_dim = sol.g[0].len();
        let g_mat = DMatrix::from_fn(m_dim, sol.g.len(), |i, j| sol.g[j][i]);
        let p = dir.join("g.csv");
        write_matrix_csv(&p, &g_mat)?;
        written.push(p);
    }
    Ok(written)
}

/// Reads the contrast matrix and metadata back from a bundle directory.
pub fn read_design_bundle(dir: &Path) -> Result<(ContrastMatrix, BundleMeta)> {
    let meta: BundleMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("design.json"))?)
            .with_context(|| "parsing design.json")?;
    let h = read_matrix_csv(&dir.join("contrast.csv"))?;
    let prov = std::fs::read_to_string(dir.join("provenance.csv"))?;
    let mut columns = Vec::new();
    for (i, line) in prov.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(parts.len() == 3, "bad provenance row: {line}");
        let side = match parts[1] {
            "ellitope-side" => ContrastSide::Ellitope,
            "polytope-side" => ContrastSide::Polytope,
            other => anyhow::bail!("unknown side {other}"),
        };
        columns.push(ColumnInfo { side, weight: parts[2].parse()? });
    }
    anyhow::ensure!(columns.len() == h.ncols(), "provenance rows do not match contrast columns");
    Ok((ContrastMatrix { h, columns, delta: meta.delta }, meta))
}
