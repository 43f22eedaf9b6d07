//! JSON file formats for states, canonical forms, and certificates, plus
//! the conversions between file records and runtime values.
//!
//! Writes are atomic (temp file + rename) and deterministic: struct fields
//! serialize in declaration order, metadata maps are sorted, and floats use
//! shortest round-trip decimal form, so write→read→write is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::{CanonicalForm, ValidationReport};
use crate::multilinear::{DensityMatrix, SystemShape};
use crate::numerics::Tolerances;
use crate::separability::{
    AnalysisVerdict, EnsembleTerm, ProductEnsemble, SeparabilityCertificate,
};
use crate::{c64, CMatrix, CVector, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk density matrix: dimension list (tail last) and a row-major grid
/// of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// On-disk canonical form: level operators per subsystem plus the top block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFormFile {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub level_ops: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    pub top_block: Vec<Vec<[f64; 2]>>,
}

/// On-disk analysis outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub verdict: VerdictRecord,
}

/// Externally tagged verdict, so the JSON reads
/// `"verdict": {"SEPARABLE": {…}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VerdictRecord {
    #[serde(rename = "SEPARABLE")]
    Separable(SeparableRecord),
    #[serde(rename = "NOT_PPT")]
    NotPpt(NotPptRecord),
    #[serde(rename = "RANK_CONDITION_UNMET")]
    RankConditionUnmet(RankRecord),
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive(InconclusiveRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableRecord {
    pub terms: Vec<TermRecord>,
    pub reconstruction_residual: f64,
    pub basis_used: Vec<Vec<[f64; 2]>>,
    pub diagnostics: ValidationReport,
    pub tolerances: Tolerances,
    pub trace: f64,
    pub tail_compressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub weight: f64,
    pub local_vectors: Vec<Vec<[f64; 2]>>,
    pub tail_vector: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotPptRecord {
    /// Transposed subsystems (0-based; the last index is the tail).
    pub subsystems: Vec<usize>,
    pub witness_eigenvalue: f64,
    pub witness_vector: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub state_rank: usize,
    pub tail_dim: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconclusiveRecord {
    pub reason: String,
    pub diagnostics: Option<ValidationReport>,
    pub best_residual: Option<f64>,
}

// ---------------------------------------------------------------------------
// Grid/vector conversions.

pub fn matrix_to_grid(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

pub fn grid_to_matrix(grid: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, |row| row.len());
    for (r, row) in grid.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Format(format!(
                "matrix grid is ragged: row {r} has {} entries, row 0 has {cols}",
                row.len()
            )));
        }
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        c64(grid[r][c][0], grid[r][c][1])
    }))
}

pub fn vector_to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vector(pairs: &[[f64; 2]]) -> CVector {
    CVector::from_fn(pairs.len(), |r, _| c64(pairs[r][0], pairs[r][1]))
}

// ---------------------------------------------------------------------------
// File I/O.

fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn check_version(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format_version {found}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_state_file(path: &Path) -> Result<StateFile> {
    let raw = fs::read(path)?;
    let file: StateFile = serde_json::from_slice(&raw)?;
    check_version(file.format_version)?;
    Ok(file)
}

/// Load and fully validate a state; failures name the first violated
/// invariant (format, dimensions, finiteness, Hermiticity, positivity).
pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    state_file_to_density(&load_state_file(path)?)
}

pub fn state_file_to_density(file: &StateFile) -> Result<DensityMatrix> {
    let shape = SystemShape::from_dims(&file.dims)?;
    let matrix = grid_to_matrix(&file.matrix)?;
    DensityMatrix::new(shape, matrix, &Tolerances::default())
}

pub fn density_to_state_file(rho: &DensityMatrix, metadata: BTreeMap<String, String>) -> StateFile {
    StateFile {
        format_version: FORMAT_VERSION,
        dims: rho.shape().dims(),
        matrix: matrix_to_grid(rho.matrix()),
        metadata,
    }
}

pub fn save_state(
    path: &Path,
    rho: &DensityMatrix,
    metadata: BTreeMap<String, String>,
) -> Result<()> {
    atomic_write(path, &to_json_bytes(&density_to_state_file(rho, metadata))?)
}

pub fn load_canonical_form(path: &Path) -> Result<CanonicalForm> {
    let raw = fs::read(path)?;
    let file: CanonicalFormFile = serde_json::from_slice(&raw)?;
    check_version(file.format_version)?;
    let shape = SystemShape::from_dims(&file.dims)?;
    let level_ops = file
        .level_ops
        .iter()
        .map(|per_subsystem| {
            per_subsystem
                .iter()
                .map(|grid| grid_to_matrix(grid))
                .collect()
        })
        .collect::<Result<Vec<Vec<CMatrix>>>>()?;
    let top_block = grid_to_matrix(&file.top_block)?;
    CanonicalForm::new(shape, level_ops, top_block, &Tolerances::default())
}

pub fn save_canonical_form(path: &Path, form: &CanonicalForm) -> Result<()> {
    let file = CanonicalFormFile {
        format_version: FORMAT_VERSION,
        dims: form.shape().dims(),
        level_ops: form
            .level_ops()
            .iter()
            .map(|per_subsystem| per_subsystem.iter().map(matrix_to_grid).collect())
            .collect(),
        top_block: matrix_to_grid(form.top_block()),
    };
    atomic_write(path, &to_json_bytes(&file)?)
}

pub fn load_certificate(path: &Path) -> Result<CertificateFile> {
    let raw = fs::read(path)?;
    let file: CertificateFile = serde_json::from_slice(&raw)?;
    check_version(file.format_version)?;
    Ok(file)
}

pub fn save_certificate(path: &Path, file: &CertificateFile) -> Result<()> {
    atomic_write(path, &to_json_bytes(file)?)
}

// ---------------------------------------------------------------------------
// Verdict conversions.

pub fn verdict_to_record(verdict: &AnalysisVerdict) -> VerdictRecord {
    match verdict {
        AnalysisVerdict::Separable(cert) => VerdictRecord::Separable(SeparableRecord {
            terms: cert
                .ensemble
                .terms
                .iter()
                .map(|t| TermRecord {
                    weight: t.weight,
                    local_vectors: t.local_vectors.iter().map(vector_to_pairs).collect(),
                    tail_vector: vector_to_pairs(&t.tail_vector),
                })
                .collect(),
            reconstruction_residual: cert.reconstruction_residual,
            basis_used: cert.basis_used.iter().map(vector_to_pairs).collect(),
            diagnostics: cert.diagnostics.clone(),
            tolerances: cert.tolerances.clone(),
            trace: cert.trace,
            tail_compressed: cert.tail_compressed,
        }),
        AnalysisVerdict::NotPpt {
            subsystems,
            witness_eigenvalue,
            witness_vector,
        } => VerdictRecord::NotPpt(NotPptRecord {
            subsystems: subsystems.clone(),
            witness_eigenvalue: *witness_eigenvalue,
            witness_vector: vector_to_pairs(witness_vector),
        }),
        AnalysisVerdict::RankConditionUnmet {
            state_rank,
            tail_dim,
            attempts,
        } => VerdictRecord::RankConditionUnmet(RankRecord {
            state_rank: *state_rank,
            tail_dim: *tail_dim,
            attempts: *attempts,
        }),
        AnalysisVerdict::Inconclusive {
            reason,
            diagnostics,
            best_residual,
        } => VerdictRecord::Inconclusive(InconclusiveRecord {
            reason: reason.clone(),
            diagnostics: diagnostics.clone(),
            best_residual: *best_residual,
        }),
    }
}

pub fn certificate_file_for(verdict: &AnalysisVerdict, dims: Vec<usize>) -> CertificateFile {
    CertificateFile {
        format_version: FORMAT_VERSION,
        dims,
        verdict: verdict_to_record(verdict),
    }
}

/// Rebuild the runtime certificate from a SEPARABLE record so it can be
/// re-audited.
pub fn separable_record_to_certificate(record: &SeparableRecord) -> SeparabilityCertificate {
    SeparabilityCertificate {
        ensemble: ProductEnsemble {
            terms: record
                .terms
                .iter()
                .map(|t| EnsembleTerm {
                    weight: t.weight,
                    local_vectors: t.local_vectors.iter().map(|v| pairs_to_vector(v)).collect(),
                    tail_vector: pairs_to_vector(&t.tail_vector),
                })
                .collect(),
        },
        reconstruction_residual: record.reconstruction_residual,
        basis_used: record
            .basis_used
            .iter()
            .map(|v| pairs_to_vector(v))
            .collect(),
        diagnostics: record.diagnostics.clone(),
        tolerances: record.tolerances.clone(),
        trace: record.trace,
        tail_compressed: record.tail_compressed,
    }
}
