//! Machine-readable run reports for the command-line front end.
//!
//! Every invocation emits exactly one [`RunReport`] as JSON on stdout. The
//! top-level field names are fixed (`curve`, `command`, `k`, `h`, `method`,
//! `inputs`, `values`, `diffs`, `validation`, `diagrams`, `diagnostics`)
//! and correlator-type numbers carry the convention marker `reduced-dz`:
//! they are the scalars multiplying `∏ dz_i` in the parametrizing
//! coordinate. Reports are deterministic for identical invocations except
//! for the timing diagnostics, and round-trip losslessly through the JSON
//! serializer.

use serde::{Deserialize, Serialize};

/// The convention marker attached to every correlator-type value.
pub const CONVENTION: &str = "reduced-dz";

/// Inputs echoed back into the report so a run is reproducible from its
/// output alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    /// Evaluation points as `[re, im]` pairs (empty when not applicable).
    pub points: Vec<[f64; 2]>,
    /// Base truncation order.
    pub order: usize,
    /// Third-kind kernel basepoint as `[re, im]`.
    pub basepoint: [f64; 2],
    /// Comparison tolerance carried in the configuration.
    pub tol: f64,
    /// Order-doubling retries allowed after the first attempt.
    pub max_retries: u32,
    /// Seed used when points were generated rather than supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Diagram theory, for diagram commands.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theory: Option<String>,
    /// Number of non-physical sheets used by diagram enumeration.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d2: Option<usize>,
    /// Worker threads requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threads: Option<usize>,
}

/// One numeric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportValue {
    /// What the number is (typically the method that produced it).
    pub name: String,
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
    /// Normalization convention of the value (always [`CONVENTION`]).
    pub convention: String,
}

/// One pairwise relative difference from `--compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    /// First method.
    pub a: String,
    /// Second method.
    pub b: String,
    /// Relative difference of the two values.
    pub rel: f64,
}

/// One branch point of the validated curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPointEntry {
    /// Location in the parametrizing coordinate as `[re, im]`.
    pub z: [f64; 2],
}

/// One pole residue from the resolvent-normalization diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueEntry {
    /// Pole location as `[re, im]`, or `null` for the point at infinity.
    pub location: Option<[f64; 2]>,
    /// Residue of `y dx` there as `[re, im]`.
    pub value: [f64; 2],
}

/// Curve validation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Number of non-physical sheets.
    pub d2: usize,
    /// Branch points of the parameterization.
    pub branch_points: Vec<BranchPointEntry>,
    /// Whether the generic-fiber sheet count matched `d2 + 1`.
    pub sheet_count_ok: bool,
    /// Residues of `y dx` at the poles of `x`.
    pub normalization_residues: Vec<ResidueEntry>,
    /// Whether every residue has unit magnitude within tolerance.
    pub resolvent_normalized: bool,
    /// Overall verdict.
    pub pass: bool,
}

/// Diagram enumeration results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramsReport {
    /// Number of diagrams in the cell.
    pub count: usize,
    /// Structured-text export of each diagram.
    pub diagrams: Vec<String>,
}

/// Run diagnostics. The timing field is the only part of a report allowed
/// to differ between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest base truncation order used by any evaluation.
    pub order_used: usize,
    /// Largest retry count needed by any evaluation.
    pub retries: u32,
    /// Wall-clock time of the command in milliseconds.
    pub timing_ms: f64,
}

/// The single JSON document emitted by a command-line invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Curve label (the curve document's `label` field, or the file stem),
    /// when a curve is involved.
    pub curve: Option<String>,
    /// The subcommand that ran.
    pub command: String,
    /// Correlator index (number of points for `eval`, number of leaves for
    /// `diagrams`).
    pub k: Option<usize>,
    /// Genus.
    pub h: Option<usize>,
    /// Evaluation method, for `eval`.
    pub method: Option<String>,
    /// Echoed inputs.
    pub inputs: ReportInputs,
    /// Numeric outputs in the reduced-dz convention.
    pub values: Vec<ReportValue>,
    /// Pairwise relative differences (populated by `--compare all`).
    pub diffs: Vec<DiffEntry>,
    /// Curve validation details, for `validate`.
    pub validation: Option<ValidationReport>,
    /// Diagram enumeration details, for `diagrams`.
    pub diagrams: Option<DiagramsReport>,
    /// Run diagnostics.
    pub diagnostics: Diagnostics,
}

impl RunReport {
    /// Serializes the report as pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses a report back from JSON text.
    pub fn from_json(text: &str) -> Result<RunReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// A copy with the timing diagnostic zeroed, for byte-identical
    /// comparison of repeated invocations.
    pub fn with_zeroed_timing(&self) -> RunReport {
        let mut out = self.clone();
        out.diagnostics.timing_ms = 0.0;
        out
    }
}
