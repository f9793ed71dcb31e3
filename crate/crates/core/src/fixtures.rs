//! Shipped reference data.

use std::path::Path;

use crate::data::AucMatrix;
use crate::error::Result;

/// Grid-averaged AUC of 32 detectors on 49 datasets, two decimals.
pub const REFERENCE_AUC_CSV: &str = include_str!("../fixtures/reference_auc.csv");

pub fn reference_auc() -> Result<AucMatrix> {
    AucMatrix::parse_csv(REFERENCE_AUC_CSV, Path::new("fixtures/reference_auc.csv"))
}
