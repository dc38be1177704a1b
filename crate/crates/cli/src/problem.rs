//! Problem and family files, in JSON or TOML.

use std::collections::BTreeMap;
use std::path::Path;

use fsforge_core::category::{CoefficientPath, M2Table, Triple};
use fsforge_core::{Complex64, HolomorphicFunction};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// `{ "coefficients": [[re, im], ...], "alpha": a, "translate": [re, im] }`,
/// coefficients in increasing degree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub coefficients: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate: Option<[f64; 2]>,
    /// Optional `m₂` tables handed to the A∞ verifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<BTreeMap<Triple, M2Table>>,
}

impl ProblemFile {
    /// `F + c` when a translation is given.
    pub fn function(&self) -> Result<HolomorphicFunction, fsforge_core::Error> {
        let mut coefficients: Vec<Complex64> = self.coefficients.iter().copied().map(complex).collect();
        if let (Some(t), Some(c0)) = (self.translate, coefficients.first_mut()) {
            *c0 += complex(t);
        }
        HolomorphicFunction::new(coefficients)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    /// Piecewise-linear coefficients through the knots.
    Knots {
        knots: Vec<f64>,
        coefficients: Vec<Vec<[f64; 2]>>,
    },
    /// `F_t' = ∏(z − p)(z − r_t)` with `r_t` running through `moving`.
    MovingCriticalPoint { fixed: Vec<[f64; 2]>, moving: Vec<[f64; 2]> },
}

/// A family file: a coefficient path and an optional frame of two critical
/// indices, labelled at the start of the path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    #[serde(flatten)]
    pub spec: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<[usize; 2]>,
}

impl FamilyFile {
    pub fn path(&self) -> Result<CoefficientPath, fsforge_core::Error> {
        match &self.spec {
            FamilySpec::Knots { knots, coefficients } => CoefficientPath::new(
                knots.clone(),
                coefficients
                    .iter()
                    .map(|c| c.iter().copied().map(complex).collect())
                    .collect(),
            ),
            FamilySpec::MovingCriticalPoint { fixed, moving } => {
                let fixed: Vec<_> = fixed.iter().copied().map(complex).collect();
                let moving: Vec<_> = moving.iter().copied().map(complex).collect();
                CoefficientPath::moving_critical_point(&fixed, &moving)
            }
        }
    }
}

/// Reads a file, choosing TOML for a `.toml` extension and JSON otherwise.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}
