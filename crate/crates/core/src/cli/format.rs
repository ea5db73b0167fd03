//! JSON model and report files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, ComplexVector, SubspaceBasis, C64, DEFAULT_TOL};
use crate::model::{LindbladModel, NoiseChannel, SpaceDecomposition, TargetSpec, Validate};

pub const FORMAT_VERSION: &str = "1.0";

/// `[re, im]`.
pub type ComplexJson = [f64; 2];
/// Row-major nested arrays.
pub type MatrixJson = Vec<Vec<ComplexJson>>;
pub type VectorJson = Vec<ComplexJson>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseJson {
    pub matrix: MatrixJson,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspacePayload {
    pub basis: Vec<VectorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement: Option<Vec<VectorJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemPayload {
    /// Vectors `|φ_j^S⟩⊗|φ_k^F⟩` listed at index `j·f_dim + k`.
    pub sf_basis: Vec<VectorJson>,
    pub s_dim: usize,
    pub f_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement: Option<Vec<VectorJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetJson {
    PureState(VectorJson),
    Subspace(SubspacePayload),
    Subsystem(SubsystemPayload),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsJson {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_scale")]
    pub coupling_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_scale() -> f64 {
    1.0
}

impl Default for OptionsJson {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, coupling_scale: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: String,
    pub dim: usize,
    pub hamiltonian: MatrixJson,
    #[serde(default)]
    pub noise: Vec<NoiseJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MatrixJson>,
    pub target: TargetJson,
    #[serde(default)]
    pub options: OptionsJson,
}

/// A model file after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedModel {
    pub hamiltonian: ComplexMatrix,
    pub noise: Vec<NoiseChannel>,
    pub measurement: Option<ComplexMatrix>,
    pub target: TargetSpec,
    pub options: OptionsJson,
}

impl ParsedModel {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Open-loop dynamics: the listed noise plus the measurement channel
    /// `(M, 1)` when present.
    pub fn dynamics(&self) -> LindbladModel {
        let mut noise = self.noise.clone();
        if let Some(m) = &self.measurement {
            noise.push(NoiseChannel::new(m.clone(), 1.0));
        }
        LindbladModel::new(self.hamiltonian.clone(), noise).expect("shapes validated at parse time")
    }
}

pub fn matrix_from_json(x: &MatrixJson, dim: usize, field: &str) -> Result<ComplexMatrix> {
    if x.len() != dim || x.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension(format!("{field}: expected a {dim}x{dim} matrix")));
    }
    let m = ComplexMatrix::from_fn(dim, dim, |i, j| c(x[i][j][0], x[i][j][1]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain(format!("{field}: non-finite entry")));
    }
    Ok(m)
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())
        .collect()
}

pub fn complex_to_json(z: C64) -> ComplexJson {
    [z.re, z.im]
}

pub fn vector_from_json(v: &VectorJson, dim: usize, field: &str) -> Result<ComplexVector> {
    if v.len() != dim {
        return Err(Error::Dimension(format!("{field}: expected a vector of length {dim}, got {}", v.len())));
    }
    Ok(ComplexVector::from_iterator(dim, v.iter().map(|z| c(z[0], z[1]))))
}

pub fn vector_to_json(v: &ComplexVector) -> VectorJson {
    v.iter().map(|&z| complex_to_json(z)).collect()
}

fn basis_from_json(vs: &[VectorJson], dim: usize, field: &str) -> Result<SubspaceBasis> {
    if vs.is_empty() {
        return Ok(SubspaceBasis::zero(dim));
    }
    let cols = vs
        .iter()
        .enumerate()
        .map(|(k, v)| vector_from_json(v, dim, &format!("{field}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    SubspaceBasis::new(ComplexMatrix::from_columns(&cols)).map_err(|e| Error::Domain(format!("{field}: {e}")))
}

pub fn basis_to_json(b: &SubspaceBasis) -> Vec<VectorJson> {
    b.vectors().iter().map(vector_to_json).collect()
}

pub fn target_from_json(t: &TargetJson, dim: usize) -> Result<TargetSpec> {
    match t {
        TargetJson::PureState(v) => TargetSpec::pure_state(vector_from_json(v, dim, "target.payload")?)
            .map_err(|e| Error::Domain(format!("target.payload: {e}"))),
        TargetJson::Subspace(p) => {
            let s = basis_from_json(&p.basis, dim, "target.payload.basis")?;
            if s.is_zero() {
                return Err(Error::Domain("target.payload.basis: empty".into()));
            }
            let d = match &p.complement {
                Some(r) => SpaceDecomposition::with_complement(s, basis_from_json(r, dim, "target.payload.complement")?)?,
                None => SpaceDecomposition::from_subspace(&s),
            };
            Ok(TargetSpec::Subspace(d))
        }
        TargetJson::Subsystem(p) => {
            let sf = basis_from_json(&p.sf_basis, dim, "target.payload.sf_basis")?;
            let r = match &p.complement {
                Some(r) => Some(basis_from_json(r, dim, "target.payload.complement")?),
                None => None,
            };
            Ok(TargetSpec::Subsystem(SpaceDecomposition::subsystem(sf, p.s_dim, p.f_dim, r)?))
        }
    }
}

pub fn target_to_json(t: &TargetSpec) -> TargetJson {
    match t {
        TargetSpec::PureState(v) => TargetJson::PureState(vector_to_json(v)),
        TargetSpec::Subspace(d) => TargetJson::Subspace(SubspacePayload {
            basis: basis_to_json(d.target()),
            complement: Some(basis_to_json(d.remainder())),
        }),
        TargetSpec::Subsystem(d) => {
            let (s_dim, f_dim) = d.factors().expect("subsystem targets carry factors");
            TargetJson::Subsystem(SubsystemPayload {
                sf_basis: basis_to_json(d.target()),
                s_dim,
                f_dim,
                complement: Some(basis_to_json(d.remainder())),
            })
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn parse_target_str(text: &str, dim: usize) -> Result<TargetSpec> {
    target_from_json(&parse_json::<TargetJson>(text, "target file")?, dim)
}

/// Parses and validates a model file.
pub fn parse_model_str(text: &str) -> Result<ParsedModel> {
    let file: ModelFile = parse_json(text, "model file")?;
    from_model_file(&file)
}

pub fn parse_model(path: &Path) -> Result<ParsedModel> {
    parse_model_str(&std::fs::read_to_string(path)?)
}

pub fn from_model_file(file: &ModelFile) -> Result<ParsedModel> {
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "format_version: unsupported version {:?} (expected {FORMAT_VERSION:?})",
            file.format_version
        )));
    }
    let dim = file.dim;
    if dim == 0 {
        return Err(Error::Dimension("dim: must be at least 1".into()));
    }
    let hamiltonian = matrix_from_json(&file.hamiltonian, dim, "hamiltonian")?;
    let noise = file
        .noise
        .iter()
        .enumerate()
        .map(|(k, n)| Ok(NoiseChannel::new(matrix_from_json(&n.matrix, dim, &format!("noise[{k}].matrix"))?, n.rate)))
        .collect::<Result<Vec<_>>>()?;
    let measurement = match &file.measurement {
        Some(m) => Some(matrix_from_json(m, dim, "measurement")?),
        None => None,
    };
    LindbladModel::new(hamiltonian.clone(), noise.clone())?.ensure_valid()?;
    let o = file.options;
    if !(o.tol > 0.0 && o.tol.is_finite()) {
        return Err(Error::Domain(format!("options.tol: must be positive (got {})", o.tol)));
    }
    if !(o.coupling_scale > 0.0 && o.coupling_scale.is_finite()) {
        return Err(Error::Domain(format!("options.coupling_scale: must be positive (got {})", o.coupling_scale)));
    }
    let target = target_from_json(&file.target, dim)?;
    Ok(ParsedModel { hamiltonian, noise, measurement, target, options: o })
}

pub fn to_model_file(p: &ParsedModel) -> ModelFile {
    ModelFile {
        format_version: FORMAT_VERSION.to_string(),
        dim: p.dim(),
        hamiltonian: matrix_to_json(&p.hamiltonian),
        noise: p
            .noise
            .iter()
            .map(|n| NoiseJson { matrix: matrix_to_json(&n.op), rate: n.rate })
            .collect(),
        measurement: p.measurement.as_ref().map(matrix_to_json),
        target: target_to_json(&p.target),
        options: p.options,
    }
}

pub fn emit_model(p: &ParsedModel) -> String {
    let mut s = serde_json::to_string_pretty(&to_model_file(p)).expect("model files serialize");
    s.push('\n');
    s
}

pub fn digest_bytes(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdicts {
    pub invariant: Option<bool>,
    pub attractive: Option<bool>,
    pub feasible: Option<bool>,
    pub unique_steady_state: Option<bool>,
    /// Agreement of the subspace-level and state-level attractivity tests.
    pub verdicts_agree: Option<bool>,
    pub simulation_pass: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witnesses {
    pub h_r_prime: Option<Vec<VectorJson>>,
    pub obstruction: Option<Vec<VectorJson>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operators {
    pub feedback: Option<MatrixJson>,
    pub h_c: Option<MatrixJson>,
    pub closed_loop_hamiltonian: Option<MatrixJson>,
    pub closed_loop_noise: Option<Vec<MatrixJson>>,
    pub steady_state: Option<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSummary {
    pub horizon: f64,
    pub steps: usize,
    pub ensemble: usize,
    pub eps: f64,
    pub worst_final_deficit: f64,
    pub worst_trajectory: usize,
    pub final_v: Vec<f64>,
    pub final_fidelity: Vec<f64>,
    pub convergence_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfeasibilityJson {
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub input_digest: String,
    pub exit_code: i32,
    pub verdicts: Verdicts,
    pub residuals: BTreeMap<String, f64>,
    pub witnesses: Witnesses,
    pub operators: Operators,
    pub spectrum: Option<Vec<ComplexJson>>,
    pub metrics: Option<MetricsSummary>,
    pub infeasibility: Option<InfeasibilityJson>,
    pub iterations: Option<usize>,
    pub notes: Vec<String>,
}

impl ReportFile {
    pub fn new(command: &str, input_digest: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input_digest,
            exit_code: 0,
            verdicts: Verdicts::default(),
            residuals: BTreeMap::new(),
            witnesses: Witnesses::default(),
            operators: Operators::default(),
            spectrum: None,
            metrics: None,
            infeasibility: None,
            iterations: None,
            notes: Vec::new(),
        }
    }

    /// Pretty JSON; fails if any number is not finite.
    pub fn to_json(&self) -> Result<String> {
        if has_non_finite(self) {
            return Err(Error::Numeric("report contains a non-finite number".into()));
        }
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("report serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text, "report file")
    }
}

fn has_non_finite(r: &ReportFile) -> bool {
    let bad = |x: f64| !x.is_finite();
    let bad_m = |m: &MatrixJson| m.iter().flatten().flatten().any(|&x| bad(x));
    let bad_v = |v: &VectorJson| v.iter().flatten().any(|&x| bad(x));
    r.residuals.values().any(|&x| bad(x))
        || r.spectrum.as_ref().is_some_and(&bad_v)
        || [&r.operators.feedback, &r.operators.h_c, &r.operators.closed_loop_hamiltonian, &r.operators.steady_state]
            .iter()
            .any(|m| m.as_ref().is_some_and(bad_m))
        || r.operators.closed_loop_noise.as_ref().is_some_and(|ms| ms.iter().any(bad_m))
        || [&r.witnesses.h_r_prime, &r.witnesses.obstruction]
            .iter()
            .any(|w| w.as_ref().is_some_and(|vs| vs.iter().any(bad_v)))
        || r.metrics.as_ref().is_some_and(|m| {
            bad(m.horizon)
                || bad(m.eps)
                || bad(m.worst_final_deficit)
                || m.final_v.iter().chain(&m.final_fidelity).any(|&x| bad(x))
                || m.convergence_rate.is_some_and(bad)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = include_str!("../../fixtures/example1.json");

    #[test]
    fn example1_parses() {
        let p = parse_model_str(EXAMPLE1).unwrap();
        assert_eq!(p.dim(), 2);
        let m = p.measurement.as_ref().unwrap();
        assert_eq!(m[(0, 1)], c(0.5, 0.0));
        assert!(matches!(p.target, TargetSpec::PureState(_)));
    }

    #[test]
    fn rejections_name_the_problem() {
        let bad = EXAMPLE1.replace("[0.6, -0.35]", "[0.6, -0.349]");
        let e = parse_model_str(&bad).unwrap_err().to_string();
        assert!(e.contains("H not Hermitian (1.0e-3)"), "{e}");

        let neg = EXAMPLE1.replace("\"noise\": []", "\"noise\": [{\"matrix\": [[[0,0],[1,0]],[[0,0],[0,0]]], \"rate\": -1.0}]");
        let e = parse_model_str(&neg).unwrap_err().to_string();
        assert!(e.contains("negative rate"), "{e}");

        let unknown = EXAMPLE1.replace("\"dim\": 2,", "\"dim\": 2, \"extra\": 1,");
        let e = parse_model_str(&unknown).unwrap_err().to_string();
        assert!(e.contains("unknown field") && e.contains("line"), "{e}");
    }

    #[test]
    fn emit_round_trips() {
        let p = parse_model_str(EXAMPLE1).unwrap();
        let again = parse_model_str(&emit_model(&p)).unwrap();
        assert_eq!(p, again);
    }
}
