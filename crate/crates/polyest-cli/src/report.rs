//! Persists a run record as CSV tables, a JSON summary, and static SVG
//! plots, with deterministic file names derived from the config hash and
//! byte-deterministic contents.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::experiments::RunRecord;
use crate::plot;

/// Writes all report artifacts under `dir`; returns the paths written.
pub fn emit_report(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tag = &record.config_hash;
    let mut written = Vec::new();

    // JSON summary of the full record.
    let summary = dir.join(format!("{tag}_summary.json"));
    std::fs::write(&summary, serde_json::to_string_pretty(record)?)?;
    written.push(summary);

    // Per-trial errors; header-only when the record carries no trials.
    let errors_path = dir.join(format!("{tag}_errors.csv"));
    let mut csv = String::from("trial,estimator,error,bound,covered\n");
    for risk in &record.risk {
        for (i, err) in risk.errors.iter().enumerate() {
            let bound = risk.bound.map(|b| format!("{b}")).unwrap_or_default();
            let covered = risk
                .bound
                .map(|b| if *err <= b { "1" } else { "0" })
                .unwrap_or("");
            csv.push_str(&format!("{i},{},{err},{bound},{covered}\n", risk.estimator));
        }
    }
    std::fs::write(&errors_path, csv)?;
    written.push(errors_path);

    // Design table.
    let design_path = dir.join(format!("{tag}_design.csv"));
    let mut csv = String::from(
        "mode,delta,epsilon,phi_gamma,rho,varsigma,objective,bound,cols_ellitope,cols_polytope\n",
    );
    for d in &record.designs {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            d.mode,
            d.delta,
            d.epsilon,
            d.phi_gamma,
            d.rho,
            d.varsigma,
            d.objective,
            d.bound,
            d.cols_ellitope,
            d.cols_polytope
        ));
    }
    std::fs::write(&design_path, csv)?;
    written.push(design_path);

    // Singular spectra of the sensing and target matrices.
    let spectra_path = dir.join(format!("{tag}_spectra.svg"));
    std::fs::write(
        &spectra_path,
        plot::line_chart(
            "singular spectra",
            &[
                ("A", &record.singular_values_a),
                ("B", &record.singular_values_b),
            ],
            true,
        ),
    )?;
    written.push(spectra_path);

    // Eigenvalue curves of the full design's quadratic split.
    if let Some(full) = record.designs.iter().find(|d| d.mode == "full") {
        let eig_path = dir.join(format!("{tag}_eigenvalues.svg"));
        std::fs::write(
            &eig_path,
            plot::line_chart(
                "eigenvalues of the quadratic split",
                &[
                    ("U", &full.eigenvalues_u),
                    ("S", &full.eigenvalues_s),
                    ("U+S", &full.eigenvalues_us),
                ],
                false,
            ),
        )?;
        written.push(eig_path);
    }

    // Error boxplots with certification bars.
    if !record.risk.is_empty() {
        let groups: Vec<(&str, &[f64], Option<f64>)> = record
            .risk
            .iter()
            .map(|r| (r.estimator.as_str(), r.errors.as_slice(), r.bound))
            .collect();
        let errors_svg = dir.join(format!("{tag}_errors.svg"));
        std::fs::write(&errors_svg, plot::boxplot("recovery errors", &groups))
            .with_context(|| "writing error boxplot")?;
        written.push(errors_svg);
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::experiments::RunRecord;

    fn empty_record() -> RunRecord {
        let config = ExperimentConfig::experiment_one(4);
        RunRecord {
            config_hash: config.run_hash(1),
            config,
            seed: 1,
            n: 4,
            m: 4,
            nu: 6,
            singular_values_a: vec![1.0, 0.5],
            singular_values_b: vec![1.0],
            designs: Vec::new(),
            risk: Vec::new(),
        }
    }

    #[test]
    fn empty_record_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let record = empty_record();
        emit_report(&record, dir.path()).unwrap();
        let errors = std::fs::read_to_string(
            dir.path().join(format!("{}_errors.csv", record.config_hash)),
        )
        .unwrap();
        assert_eq!(errors, "trial,estimator,error,bound,covered\n");
    }
}
