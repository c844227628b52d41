use super::{ConditionTolerances, EncodedSet, EvalError, ViolationCounts};
use crate::env::TruthSidecar;
use crate::geom::PointN;
use crate::textio::{write_atomic, Doc};
use std::fmt::Write as _;
use std::path::Path;

/// One evaluation's results. Metrics needing ground truth are None when the
/// sidecar was unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: usize,
    pub l_test: Option<f64>,
    pub translation_h: Option<PointN>,
    pub translation_residual_p95: Option<f64>,
    pub otsu_accuracy: Option<f64>,
    pub orientation_error_deg: Option<f64>,
    pub condition_violations: ViolationCounts,
    pub tolerances: ConditionTolerances,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "records,l_test,translation_residual_p95,otsu_accuracy,orientation_error_deg,viol_equivariance,viol_injectivity,viol_condition3";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.records,
            opt(self.l_test),
            opt(self.translation_residual_p95),
            opt(self.otsu_accuracy),
            opt(self.orientation_error_deg),
            self.condition_violations.equivariance,
            self.condition_violations.injectivity,
            self.condition_violations.condition3
        )
    }

    pub fn to_doc(&self) -> Doc {
        let mut doc = Doc::new();
        doc.set("report", "records", self.records);
        if let Some(v) = self.l_test {
            doc.set("report", "l_test", v);
        }
        if let Some(h) = &self.translation_h {
            doc.set(
                "report",
                "translation_h",
                h.as_slice()
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        if let Some(v) = self.translation_residual_p95 {
            doc.set("report", "translation_residual_p95", v);
        }
        if let Some(v) = self.otsu_accuracy {
            doc.set("report", "otsu_accuracy", v);
        }
        if let Some(v) = self.orientation_error_deg {
            doc.set("report", "orientation_error_deg", v);
        }
        doc.set("report", "viol_equivariance", self.condition_violations.equivariance);
        doc.set("report", "viol_injectivity", self.condition_violations.injectivity);
        doc.set("report", "viol_condition3", self.condition_violations.condition3);
        doc.set("tolerances", "tol_eq", self.tolerances.tol_eq);
        doc.set("tolerances", "tol_cond3", self.tolerances.tol_cond3);
        doc.set("tolerances", "tol_inj", self.tolerances.tol_inj);
        doc
    }
}

/// Write the structured-text form of a report.
pub fn write_report_text(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    report
        .to_doc()
        .write_atomic(path)
        .map_err(|e| EvalError::Io(std::io::Error::other(e)))
}

/// Append one CSV row (writing the header first when the file is new).
pub fn append_report_csv(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let mut content = match std::fs::read_to_string(path) {
        Ok(existing) => existing,
        Err(_) => format!("{}\n", EvalReport::CSV_HEADER),
    };
    content.push_str(&report.csv_row());
    content.push('\n');
    write_atomic(path, content.as_bytes())?;
    Ok(())
}

/// Dump per-sample latents (and truth, when present) as CSV for external
/// plotting: one row per record, first-frame encodings.
pub fn write_latent_dump(
    path: &Path,
    encoded: &EncodedSet,
    truth: Option<&TruthSidecar>,
) -> Result<(), EvalError> {
    let n = encoded.z_int.first().map(|z| z.dim()).unwrap_or(0);
    let m = encoded.w.first().map(|w| w.len()).unwrap_or(0);
    let mut header = Vec::new();
    for i in 0..n {
        header.push(format!("z_int_{i}"));
    }
    for i in 0..n {
        header.push(format!("z_ext_mean_{i}"));
    }
    for i in 0..n {
        for j in i..n {
            header.push(format!("cov_{i}{j}"));
        }
    }
    for i in 0..m {
        header.push(format!("w_{i}"));
    }
    if truth.is_some() {
        for i in 0..n {
            header.push(format!("s_int_{i}"));
        }
        for i in 0..n {
            header.push(format!("s_ext_{i}"));
        }
    }

    let mut out = header.join(",");
    out.push('\n');
    for i in 0..encoded.len() {
        let mut row: Vec<String> = Vec::new();
        row.extend(encoded.z_int[i].as_slice().iter().map(|v| v.to_string()));
        row.extend(
            encoded.z_ext[i]
                .mean()
                .as_slice()
                .iter()
                .map(|v| v.to_string()),
        );
        let cov = encoded.z_ext[i].cov();
        for r in 0..n {
            for c in r..n {
                row.push(cov[r][c].to_string());
            }
        }
        row.extend(encoded.w[i].iter().map(|v| v.to_string()));
        if let Some(truth) = truth {
            let rec = &truth.records[i];
            row.extend(rec.s.s_int.as_slice().iter().map(|v| v.to_string()));
            row.extend(rec.s.s_ext.as_slice().iter().map(|v| v.to_string()));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_atomic(path, out.as_bytes())?;
    Ok(())
}
