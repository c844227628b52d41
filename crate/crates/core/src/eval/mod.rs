//! Quantitative verification of trained representations: the relative-
//! position metric, best-fit translation residuals, interaction
//! classification accuracy, orientation error, and a checker for the
//! conditions of the translation-recovery theorem.

mod encoded;
mod metrics;
mod report;
mod theorem;

pub use encoded::EncodedSet;
pub use metrics::{
    fit_translation, fit_translation_pairs, l_test, orientation_error_deg, otsu_accuracy,
    TranslationFit,
};
pub use report::{append_report_csv, write_latent_dump, write_report_text, EvalReport};
pub use theorem::{check_theorem_conditions, ConditionTolerances, ViolationCounts};

use crate::env::{ground_truth_labels, Dataset, TruthSidecar};
use crate::repr::{split_dataset, EncoderTriple, LossMode, ReprError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth required for {0}")]
    MissingTruth(&'static str),
    #[error("orientation error requires the stochastic mode")]
    DeterministicMode,
    #[error("no samples with a well-defined orientation")]
    NoOrientedSamples,
    #[error("{what}: expected {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Run the full evaluation battery over a dataset. Metrics that need ground
/// truth are omitted (None) when the sidecar is absent; the theorem
/// condition checks always run.
pub fn evaluate(
    enc: &EncoderTriple,
    data: &Dataset,
    truth: Option<&TruthSidecar>,
    mode: LossMode,
    tolerances: ConditionTolerances,
) -> Result<EvalReport, EvalError> {
    let encoded = EncodedSet::from_encoders(enc, data)?;
    let violations = check_theorem_conditions(&encoded, &tolerances, truth);

    let mut report = EvalReport {
        records: data.len(),
        l_test: None,
        translation_h: None,
        translation_residual_p95: None,
        otsu_accuracy: None,
        orientation_error_deg: None,
        condition_violations: violations,
        tolerances,
    };

    if let Some(truth) = truth {
        report.l_test = Some(l_test(&encoded, truth)?);
        let fit = fit_translation(&encoded, truth)?;
        report.translation_h = Some(fit.h);
        report.translation_residual_p95 = Some(fit.p95);
        let classes = split_dataset(enc, data)?;
        report.otsu_accuracy = Some(otsu_accuracy(&classes, &ground_truth_labels(truth)));
        if mode == LossMode::Stochastic && truth.records.iter().any(|r| r.s.orientation.is_some())
        {
            report.orientation_error_deg = Some(orientation_error_deg(&encoded, truth, mode)?);
        }
    }
    Ok(report)
}
