//! End-to-end separability pipeline: PPT checking, product-basis search,
//! local rotation into canonical position, extraction, explicit
//! decomposition into product projectors, and certificate verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canonical::{self, CanonicalForm, ValidationReport};
use crate::multilinear::{
    apply_local, kron, partial_transpose_subset, product_compression, reduced_tail, DensityMatrix,
    SystemShape,
};
use crate::numerics::{
    self, hermitian_eig, is_psd, random_unit_vector, simultaneous_diagonalize,
    unitary_with_final_column, Tolerances,
};
use crate::oracle;
use crate::{c64, CMatrix, CVector, Error, Result};

/// Which transpose patterns [`check_ppt`] examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PptMode {
    /// One partial transpose per subsystem (tail included).
    SingleSubsystems,
    /// Every nonempty subsystem subset up to half the system size
    /// (complements are spectrally equivalent and skipped).
    AllBipartitions,
}

/// Outcome of one partial-transpose positivity test.
#[derive(Debug, Clone)]
pub struct PptEntry {
    /// Transposed subsystems (0-based; index `m` is the tail).
    pub subsystems: Vec<usize>,
    pub is_psd: bool,
    pub witness_eigenvalue: f64,
    pub witness_vector: CVector,
}

/// All transpose tests for one state.
#[derive(Debug, Clone)]
pub struct PptReport {
    pub entries: Vec<PptEntry>,
    pub passed: bool,
}

impl PptReport {
    /// Entry with the most negative witness eigenvalue.
    pub fn worst(&self) -> &PptEntry {
        self.entries
            .iter()
            .min_by(|a, b| a.witness_eigenvalue.total_cmp(&b.witness_eigenvalue))
            .expect("report always has entries")
    }
}

/// One product projector: weight times `(⊗_i v_i)(⊗_i v_i)† ⊗ g·g†`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTerm {
    pub weight: f64,
    pub local_vectors: Vec<CVector>,
    pub tail_vector: CVector,
}

/// Weighted list of product projectors; weights absorb all magnitudes, so
/// every stored vector has unit norm and the weights sum to the trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductEnsemble {
    pub terms: Vec<EnsembleTerm>,
}

impl ProductEnsemble {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Structural well-formedness against a shape: positive finite weights,
    /// matching vector lengths, unit norms.
    pub fn validate(&self, shape: &SystemShape) -> Result<()> {
        for (idx, term) in self.terms.iter().enumerate() {
            if !term.weight.is_finite() || term.weight <= 0.0 {
                return Err(Error::MalformedCertificate(format!(
                    "term {idx} has nonpositive weight {}",
                    term.weight
                )));
            }
            if term.local_vectors.len() != shape.num_subsystems() {
                return Err(Error::MalformedCertificate(format!(
                    "term {idx} has {} local vectors for {} subsystems",
                    term.local_vectors.len(),
                    shape.num_subsystems()
                )));
            }
            for (i, (v, &k)) in term
                .local_vectors
                .iter()
                .zip(shape.front_dims())
                .enumerate()
            {
                if v.len() != k {
                    return Err(Error::MalformedCertificate(format!(
                        "term {idx} local vector {i} has length {}, expected {k}",
                        v.len()
                    )));
                }
                if (v.norm() - 1.0).abs() > 1e-8 {
                    return Err(Error::MalformedCertificate(format!(
                        "term {idx} local vector {i} is not unit norm ({})",
                        v.norm()
                    )));
                }
            }
            if term.tail_vector.len() != shape.tail_dim() {
                return Err(Error::MalformedCertificate(format!(
                    "term {idx} tail vector has length {}, expected {}",
                    term.tail_vector.len(),
                    shape.tail_dim()
                )));
            }
            if (term.tail_vector.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::MalformedCertificate(format!(
                    "term {idx} tail vector is not unit norm ({})",
                    term.tail_vector.norm()
                )));
            }
        }
        Ok(())
    }
}

/// Checkable output of a successful analysis.
#[derive(Debug, Clone)]
pub struct SeparabilityCertificate {
    pub ensemble: ProductEnsemble,
    /// Relative Frobenius distance between the reassembled ensemble and the
    /// input state.
    pub reconstruction_residual: f64,
    /// Local vectors whose compression passed the rank test.
    pub basis_used: Vec<CVector>,
    /// Canonical-form residuals in the rotated frame.
    pub diagnostics: ValidationReport,
    pub tolerances: Tolerances,
    /// Trace of the analyzed state (weights sum to it).
    pub trace: f64,
    /// Whether the tail factor was compressed onto its marginal support.
    pub tail_compressed: bool,
}

/// Pipeline outcome; every failure mode is a value, never a panic.
#[derive(Debug, Clone)]
pub enum AnalysisVerdict {
    Separable(Box<SeparabilityCertificate>),
    NotPpt {
        subsystems: Vec<usize>,
        witness_eigenvalue: f64,
        witness_vector: CVector,
    },
    RankConditionUnmet {
        state_rank: usize,
        tail_dim: usize,
        attempts: usize,
    },
    Inconclusive {
        reason: String,
        diagnostics: Option<ValidationReport>,
        best_residual: Option<f64>,
    },
}

impl AnalysisVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            AnalysisVerdict::Separable(_) => "SEPARABLE",
            AnalysisVerdict::NotPpt { .. } => "NOT_PPT",
            AnalysisVerdict::RankConditionUnmet { .. } => "RANK_CONDITION_UNMET",
            AnalysisVerdict::Inconclusive { .. } => "INCONCLUSIVE",
        }
    }
}

/// Knobs for [`analyze`].
#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub tolerances: Tolerances,
    /// Random product-basis draws after the computational sweep.
    pub attempts: usize,
    pub ppt_mode: PptMode,
    /// Allow restricting the tail factor to the support of its marginal
    /// when the state rank is below the tail dimension.
    pub tail_compression: bool,
    pub seed: u64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            attempts: 64,
            ppt_mode: PptMode::SingleSubsystems,
            tail_compression: false,
            seed: 0,
        }
    }
}

/// Result of re-auditing a certificate against a state.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub passed: bool,
    pub residual: f64,
}

fn subsets_up_to_half(count: usize) -> Vec<Vec<usize>> {
    let max_size = count / 2;
    let mut out = Vec::new();
    for size in 1..=max_size {
        let mut current = Vec::with_capacity(size);
        fn rec(
            start: usize,
            count: usize,
            size: usize,
            current: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if current.len() == size {
                out.push(current.clone());
                return;
            }
            for i in start..count {
                current.push(i);
                rec(i + 1, count, size, current, out);
                current.pop();
            }
        }
        rec(0, count, size, &mut current, &mut out);
    }
    out
}

/// Test positivity of the required partial transposes of ρ.
pub fn check_ppt(rho: &DensityMatrix, mode: PptMode, tols: &Tolerances) -> Result<PptReport> {
    let subsystem_count = rho.shape().num_subsystems() + 1;
    let patterns: Vec<Vec<usize>> = match mode {
        PptMode::SingleSubsystems => (0..subsystem_count).map(|l| vec![l]).collect(),
        PptMode::AllBipartitions => subsets_up_to_half(subsystem_count),
    };
    let mut entries = Vec::with_capacity(patterns.len());
    let mut passed = true;
    for subsystems in patterns {
        let pt = partial_transpose_subset(rho, &subsystems)?;
        let check = is_psd(&pt, tols.psd_tol)?;
        passed &= check.is_psd;
        entries.push(PptEntry {
            subsystems,
            is_psd: check.is_psd,
            witness_eigenvalue: check.witness_eigenvalue,
            witness_vector: check.witness_vector,
        });
    }
    Ok(PptReport { entries, passed })
}

/// Search for local vectors whose compression has full tail rank: first the
/// computational product sweep in lexicographic order, then `attempts`
/// Haar-random product draws. Absence is a value, not an error.
pub fn find_full_rank_product_basis<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    attempts: usize,
    rng: &mut R,
    tols: &Tolerances,
) -> Option<Vec<CVector>> {
    let shape = rho.shape();
    let n = shape.tail_dim();
    let candidate_ok = |locals: &[CVector]| -> bool {
        product_compression(rho, locals)
            .map(|m| numerics::rank(&m, tols.rank_rel_tol) == n)
            .unwrap_or(false)
    };

    for b in shape.front_index_iter() {
        let locals: Vec<CVector> = b
            .iter()
            .zip(shape.front_dims())
            .map(|(&bi, &k)| {
                CVector::from_fn(k, |r, _| {
                    if r == bi {
                        c64(1.0, 0.0)
                    } else {
                        c64(0.0, 0.0)
                    }
                })
            })
            .collect();
        if candidate_ok(&locals) {
            return Some(locals);
        }
    }
    for _ in 0..attempts {
        let locals: Vec<CVector> = shape
            .front_dims()
            .iter()
            .map(|&k| random_unit_vector(k, rng))
            .collect();
        if candidate_ok(&locals) {
            return Some(locals);
        }
    }
    None
}

/// Decompose a canonical form into product projectors via the joint
/// eigenbasis of its level table: term `n` has local components
/// `conj(a^n_{i,(K_i−1)−b_i})` (level 0 contributing 1), tail vector
/// `√F·u_n`, and all magnitudes folded into the weight.
pub fn decompose_canonical<R: Rng + ?Sized>(
    cf: &CanonicalForm,
    tols: &Tolerances,
    rng: &mut R,
) -> Result<ProductEnsemble> {
    let shape = cf.shape();
    let n = shape.tail_dim();
    let family = cf.flat_table();
    let joint = simultaneous_diagonalize(&family, tols, rng)?;
    let (sqrt_f, _) = numerics::psd_sqrt_invsqrt(cf.top_block(), tols)?;

    // member index of (subsystem, level) in the flattened table
    let mut offsets = Vec::with_capacity(shape.num_subsystems());
    let mut acc = 0;
    for &k in shape.front_dims() {
        offsets.push(acc);
        acc += k - 1;
    }

    let mut terms = Vec::with_capacity(n);
    for col in 0..n {
        let mut weight = 1.0;
        let mut local_vectors = Vec::with_capacity(shape.num_subsystems());
        for (i, &k) in shape.front_dims().iter().enumerate() {
            let mut v = CVector::from_fn(k, |b, _| {
                let level = (k - 1) - b;
                if level == 0 {
                    c64(1.0, 0.0)
                } else {
                    joint.eigenvalue_table[offsets[i] + level - 1][col].conj()
                }
            });
            let norm = v.norm();
            weight *= norm * norm;
            v /= c64(norm, 0.0);
            local_vectors.push(v);
        }
        let mut tail = &sqrt_f * joint.basis.column(col);
        let tail_norm = tail.norm();
        weight *= tail_norm * tail_norm;
        tail /= c64(tail_norm, 0.0);
        terms.push(EnsembleTerm {
            weight,
            local_vectors,
            tail_vector: tail,
        });
    }
    Ok(ProductEnsemble { terms })
}

/// Reassemble an ensemble into a dense matrix through tensor products.
/// [`oracle::brute_reconstruct`] computes the same sum through explicit
/// index loops; certificates are audited against that independent path.
pub fn reassemble_ensemble(ensemble: &ProductEnsemble, shape: &SystemShape) -> Result<CMatrix> {
    ensemble.validate(shape)?;
    let total = shape.total_dim();
    let mut out = CMatrix::zeros(total, total);
    for term in &ensemble.terms {
        let mut w = CMatrix::from_column_slice(
            term.local_vectors[0].len(),
            1,
            term.local_vectors[0].as_slice(),
        );
        for v in &term.local_vectors[1..] {
            w = kron(&w, &CMatrix::from_column_slice(v.len(), 1, v.as_slice()));
        }
        w = kron(
            &w,
            &CMatrix::from_column_slice(term.tail_vector.len(), 1, term.tail_vector.as_slice()),
        );
        out += (&w * w.adjoint()).scale(term.weight);
    }
    Ok(out)
}

/// Restrict the tail factor to the support of the tail marginal. Succeeds
/// only when that support dimension equals the state rank and nothing is
/// lost in the projection; returns the compressed state and the isometry
/// that re-embeds tail vectors.
fn compress_tail(
    rho: &DensityMatrix,
    state_rank: usize,
    tols: &Tolerances,
) -> Option<(DensityMatrix, CMatrix)> {
    let shape = rho.shape();
    let n = shape.tail_dim();
    let reduced = reduced_tail(rho);
    let dec = hermitian_eig(&reduced).ok()?;
    let lambda_max = dec.eigenvalues.last().copied()?.max(0.0);
    let support: Vec<usize> = (0..n)
        .filter(|&i| dec.eigenvalues[i] > tols.rank_rel_tol * lambda_max)
        .collect();
    if support.len() != state_rank || state_rank == 0 {
        return None;
    }
    let mut embed = CMatrix::zeros(n, state_rank);
    for (dst, &src) in support.iter().enumerate() {
        embed
            .column_mut(dst)
            .copy_from(&dec.eigenvectors.column(src));
    }
    let full_embed = kron(
        &CMatrix::identity(shape.front_size(), shape.front_size()),
        &embed,
    );
    let compressed = full_embed.adjoint() * rho.matrix() * &full_embed;
    // nothing may be lost in the projection
    let back = &full_embed * &compressed * full_embed.adjoint();
    if (back - rho.matrix()).norm() > tols.residual_tol * rho.matrix().norm().max(1.0) {
        return None;
    }
    let new_shape = SystemShape::new(shape.front_dims().to_vec(), state_rank).ok()?;
    Some((
        DensityMatrix::from_parts_unchecked(new_shape, compressed),
        embed,
    ))
}

/// Run the full pipeline; every failure mode is a verdict.
///
/// A state rank above the tail dimension is outside the hypothesis class
/// entirely and short-circuits to `RankConditionUnmet`. At or below it, the
/// PPT check runs first so a hard entanglement witness beats any structural
/// failure.
pub fn analyze(rho: &DensityMatrix, config: &AnalyzeConfig) -> AnalysisVerdict {
    let tols = &config.tolerances;
    let n = rho.shape().tail_dim();
    let state_rank = numerics::rank(rho.matrix(), tols.rank_rel_tol);
    if state_rank > n {
        return AnalysisVerdict::RankConditionUnmet {
            state_rank,
            tail_dim: n,
            attempts: 0,
        };
    }

    let ppt = match check_ppt(rho, config.ppt_mode, tols) {
        Ok(report) => report,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("PPT check failed: {e}"),
                diagnostics: None,
                best_residual: None,
            }
        }
    };
    if !ppt.passed {
        let worst = ppt.worst();
        return AnalysisVerdict::NotPpt {
            subsystems: worst.subsystems.clone(),
            witness_eigenvalue: worst.witness_eigenvalue,
            witness_vector: worst.witness_vector.clone(),
        };
    }

    let (work, embed) = if state_rank == n {
        (rho.clone(), None)
    } else {
        let compressed = if config.tail_compression {
            compress_tail(rho, state_rank, tols)
        } else {
            None
        };
        match compressed {
            Some((work, embed)) => (work, Some(embed)),
            None => {
                return AnalysisVerdict::RankConditionUnmet {
                    state_rank,
                    tail_dim: n,
                    attempts: 0,
                }
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let Some(basis) = find_full_rank_product_basis(&work, config.attempts, &mut rng, tols) else {
        return AnalysisVerdict::Inconclusive {
            reason: format!(
                "no product basis with full-rank compression after the computational sweep and {} random attempts",
                config.attempts
            ),
            diagnostics: None,
            best_residual: None,
        };
    };

    let completions: Vec<CMatrix> = basis.iter().map(unitary_with_final_column).collect();
    let rotations: Vec<CMatrix> = completions.iter().map(|v| v.adjoint()).collect();
    let rotated = match apply_local(&work, &rotations, tols) {
        Ok(r) => r,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("local rotation failed: {e}"),
                diagnostics: None,
                best_residual: None,
            }
        }
    };

    let form = match canonical::extract(&rotated, tols) {
        Ok(form) => form,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("canonical extraction failed: {e}"),
                diagnostics: None,
                best_residual: None,
            }
        }
    };
    let diagnostics = match form.validate(&rotated, tols) {
        Ok(report) => report,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("canonical validation failed: {e}"),
                diagnostics: None,
                best_residual: None,
            }
        }
    };
    if diagnostics.max_block_residual > tols.residual_tol
        || diagnostics.commutation_residual > tols.simdiag_tol
    {
        return AnalysisVerdict::Inconclusive {
            reason: "canonical-form residuals above tolerance".into(),
            diagnostics: Some(diagnostics),
            best_residual: None,
        };
    }

    let rotated_ensemble = match decompose_canonical(&form, tols, &mut rng) {
        Ok(e) => e,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("decomposition failed: {e}"),
                diagnostics: Some(diagnostics),
                best_residual: None,
            }
        }
    };

    // undo the local rotations and re-embed compressed tail vectors
    let terms: Vec<EnsembleTerm> = rotated_ensemble
        .terms
        .into_iter()
        .map(|term| {
            let local_vectors = term
                .local_vectors
                .iter()
                .zip(&completions)
                .map(|(v, completion)| completion * v)
                .collect();
            let tail_vector = match &embed {
                Some(q) => q * term.tail_vector,
                None => term.tail_vector,
            };
            EnsembleTerm {
                weight: term.weight,
                local_vectors,
                tail_vector,
            }
        })
        .collect();
    let ensemble = ProductEnsemble { terms };

    let reconstruction = match reassemble_ensemble(&ensemble, rho.shape()) {
        Ok(m) => m,
        Err(e) => {
            return AnalysisVerdict::Inconclusive {
                reason: format!("reassembly failed: {e}"),
                diagnostics: Some(diagnostics),
                best_residual: None,
            }
        }
    };
    let residual =
        (reconstruction - rho.matrix()).norm() / rho.matrix().norm().max(f64::MIN_POSITIVE);
    if residual > tols.residual_tol {
        return AnalysisVerdict::Inconclusive {
            reason: "reconstruction residual above tolerance".into(),
            diagnostics: Some(diagnostics),
            best_residual: Some(residual),
        };
    }

    AnalysisVerdict::Separable(Box::new(SeparabilityCertificate {
        ensemble,
        reconstruction_residual: residual,
        basis_used: basis,
        diagnostics,
        tolerances: tols.clone(),
        trace: rho.trace(),
        tail_compressed: embed.is_some(),
    }))
}

/// Independently audit a certificate: rebuild the ensemble through the
/// oracle's index-loop path and compare against ρ in relative Frobenius
/// norm. Structural defects are errors; a residual above tolerance is a
/// clean failure.
pub fn verify_certificate(
    rho: &DensityMatrix,
    cert: &SeparabilityCertificate,
    tols: &Tolerances,
) -> Result<CertificateCheck> {
    cert.ensemble.validate(rho.shape())?;
    let reconstruction = oracle::brute_reconstruct(&cert.ensemble, rho.shape())?;
    let norm = rho.matrix().norm();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let residual = (reconstruction - rho.matrix()).norm() / scale;
    Ok(CertificateCheck {
        passed: residual <= tols.residual_tol,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{sample_canonical, SampleOptions};
    use crate::multilinear::block;
    use crate::numerics::{gaussian_matrix, haar_unitary};

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn generated_state(front: Vec<usize>, n: usize, seed: u64) -> DensityMatrix {
        let shape = SystemShape::new(front, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_canonical(&shape, &mut rng, &SampleOptions::default())
            .assemble(&tols())
            .unwrap()
    }

    fn diag_mixture() -> DensityMatrix {
        // ½(|00⟩⟨00| + |11⟩⟨11|) on 2⊗2
        let shape = SystemShape::new(vec![2], 2).unwrap();
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c64(0.5, 0.0);
        m[(3, 3)] = c64(0.5, 0.0);
        DensityMatrix::new(shape, m, &tols()).unwrap()
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets_up_to_half(2), vec![vec![0], vec![1]]);
        assert_eq!(
            subsets_up_to_half(4),
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![3],
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn ppt_passes_on_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parts: Vec<CMatrix> = [2usize, 2, 3]
            .iter()
            .map(|&d| {
                let g = gaussian_matrix(d, d, &mut rng);
                let p = &g * g.adjoint();
                let t = p.trace().re;
                p.scale(1.0 / t)
            })
            .collect();
        let m = kron(&kron(&parts[0], &parts[1]), &parts[2]);
        let shape = SystemShape::new(vec![2, 2], 3).unwrap();
        let rho = DensityMatrix::new(shape, m, &tols()).unwrap();
        for mode in [PptMode::SingleSubsystems, PptMode::AllBipartitions] {
            let report = check_ppt(&rho, mode, &tols()).unwrap();
            assert!(report.passed);
            for e in &report.entries {
                assert!(e.witness_eigenvalue >= -1e-12);
            }
        }
    }

    #[test]
    fn ppt_bell_fails_with_exact_witness() {
        let rho = oracle::bell_projector();
        let report = check_ppt(&rho, PptMode::SingleSubsystems, &tols()).unwrap();
        assert!(!report.passed);
        let worst = report.worst();
        assert_eq!(worst.subsystems, vec![0]);
        assert!((worst.witness_eigenvalue + 0.5).abs() < 1e-12);

        // the stored witness reproduces its eigenvalue on re-evaluation
        let pt = partial_transpose_subset(&rho, &worst.subsystems).unwrap();
        let w = &worst.witness_vector;
        let quad = (w.adjoint() * &pt * w)[(0, 0)].re;
        assert!((quad - worst.witness_eigenvalue).abs() < 1e-10);
    }

    #[test]
    fn ppt_generated_states_pass_all_bipartitions() {
        for seed in [5u64, 6] {
            let rho = generated_state(vec![2, 2], 3, seed);
            let report = check_ppt(&rho, PptMode::AllBipartitions, &tols()).unwrap();
            assert!(report.passed, "seed {seed}");
            assert!(report.worst().witness_eigenvalue >= -1e-10);
        }
    }

    #[test]
    fn basis_search_sweep_and_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = generated_state(vec![2, 2], 3, 7);
        let basis =
            find_full_rank_product_basis(&rho, 0, &mut rng, &tols()).expect("sweep succeeds");
        for v in &basis {
            // computational sweep returns basis vectors
            assert!(v.iter().filter(|z| z.norm() > 0.0).count() == 1);
        }

        let mixture = diag_mixture();
        assert!(find_full_rank_product_basis(&mixture, 0, &mut rng, &tols()).is_none());
        let basis =
            find_full_rank_product_basis(&mixture, 16, &mut rng, &tols()).expect("random succeeds");
        assert!(basis[0][0].norm() > 1e-6 && basis[0][1].norm() > 1e-6);
    }

    #[test]
    fn decompose_diagonal_example() {
        let shape = SystemShape::new(vec![2], 2).unwrap();
        let d = CMatrix::from_fn(2, 2, |r, c| {
            if r == c {
                c64(if r == 0 { 2.0 } else { 3.0 }, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let f = CMatrix::from_fn(2, 2, |r, c| {
            if r == c {
                c64(if r == 0 { 1.0 } else { 4.0 }, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let cf = CanonicalForm::new(shape, vec![vec![d]], f, &tols()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ensemble = decompose_canonical(&cf, &tols(), &mut rng).unwrap();
        assert_eq!(ensemble.terms.len(), 2);
        assert!((ensemble.total_weight() - 45.0).abs() < 1e-10);

        let sqrt5 = 5.0f64.sqrt();
        let sqrt10 = 10.0f64.sqrt();
        for term in &ensemble.terms {
            let g = &term.tail_vector;
            let v = &term.local_vectors[0];
            if g[0].norm() > 0.5 {
                // tail e₁ pairs with eigenvalue 2
                assert!((term.weight - 5.0).abs() < 1e-10);
                assert!((v[0].norm() - 2.0 / sqrt5).abs() < 1e-10);
                assert!((v[1].norm() - 1.0 / sqrt5).abs() < 1e-10);
            } else {
                assert!((term.weight - 40.0).abs() < 1e-10);
                assert!((v[0].norm() - 3.0 / sqrt10).abs() < 1e-10);
                assert!((v[1].norm() - 1.0 / sqrt10).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decompose_zero_level_op() {
        let shape = SystemShape::new(vec![2], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = gaussian_matrix(3, 3, &mut rng);
        let f = &g * g.adjoint() + CMatrix::identity(3, 3).scale(0.3);
        let cf = CanonicalForm::new(shape.clone(), vec![vec![CMatrix::zeros(3, 3)]], f, &tols())
            .unwrap();
        let ensemble = decompose_canonical(&cf, &tols(), &mut rng).unwrap();
        for term in &ensemble.terms {
            // single local direction |1⟩
            assert!(term.local_vectors[0][0].norm() < 1e-12);
            assert!((term.local_vectors[0][1].norm() - 1.0).abs() < 1e-12);
        }
        let rho = cf.assemble(&tols()).unwrap();
        let recon = reassemble_ensemble(&ensemble, &shape).unwrap();
        assert!((recon - rho.matrix()).norm() / rho.matrix().norm() < 1e-10);
    }

    #[test]
    fn decompose_random_forms_reassemble() {
        for (seed, front, n) in [
            (17u64, vec![2], 4),
            (18, vec![2, 2], 3),
            (19, vec![3, 2], 2),
        ] {
            let shape = SystemShape::new(front, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cf = sample_canonical(&shape, &mut rng, &SampleOptions::default());
            let rho = cf.assemble(&tols()).unwrap();
            let ensemble = decompose_canonical(&cf, &tols(), &mut rng).unwrap();
            assert_eq!(ensemble.terms.len(), n);
            assert!((ensemble.total_weight() - rho.trace()).abs() <= 1e-8 * rho.trace());

            let recon = reassemble_ensemble(&ensemble, &shape).unwrap();
            assert!(
                (&recon - rho.matrix()).norm() / rho.matrix().norm() <= 1e-8,
                "seed {seed}"
            );
            let brute = oracle::brute_reconstruct(&ensemble, &shape).unwrap();
            assert!((&brute - &recon).norm() <= 1e-12 * recon.norm());
        }
    }

    #[test]
    fn analyze_generated_states_separable() {
        for (seed, front, n) in [
            (23u64, vec![2], 4),
            (24, vec![2, 2], 3),
            (25, vec![2, 2, 2], 2),
        ] {
            let rho = generated_state(front, n, seed);
            let config = AnalyzeConfig {
                seed,
                ..AnalyzeConfig::default()
            };
            match analyze(&rho, &config) {
                AnalysisVerdict::Separable(cert) => {
                    assert!(cert.reconstruction_residual <= 1e-8);
                    assert!(
                        (cert.ensemble.total_weight() - rho.trace()).abs() <= 1e-8 * rho.trace()
                    );
                    assert!(!cert.tail_compressed);
                    let check = verify_certificate(&rho, &cert, &tols()).unwrap();
                    assert!(
                        check.passed,
                        "soundness at seed {seed}: residual {}",
                        check.residual
                    );
                }
                other => panic!("expected SEPARABLE at seed {seed}, got {}", other.tag()),
            }
        }
    }

    #[test]
    fn analyze_bell_and_mixture_not_ppt() {
        let bell = oracle::bell_projector();
        match analyze(&bell, &AnalyzeConfig::default()) {
            AnalysisVerdict::NotPpt {
                witness_eigenvalue,
                subsystems,
                ..
            } => {
                assert!((witness_eigenvalue + 0.5).abs() < 1e-12);
                assert_eq!(subsystems, vec![0]);
            }
            other => panic!("expected NOT_PPT, got {}", other.tag()),
        }

        let mixture = oracle::psi_minus_zero_mixture();
        match analyze(&mixture, &AnalyzeConfig::default()) {
            AnalysisVerdict::NotPpt {
                witness_eigenvalue,
                witness_vector,
                subsystems,
            } => {
                let expected = (1.0 - 2.0f64.sqrt()) / 4.0;
                assert!((witness_eigenvalue - expected).abs() < 1e-10);
                let pt = partial_transpose_subset(&mixture, &subsystems).unwrap();
                let quad = (witness_vector.adjoint() * pt * &witness_vector)[(0, 0)].re;
                assert!((quad - witness_eigenvalue).abs() < 1e-10);
            }
            other => panic!("expected NOT_PPT, got {}", other.tag()),
        }
    }

    #[test]
    fn analyze_werner_hits_rank_gate() {
        let werner = oracle::werner(0.5);
        match analyze(&werner, &AnalyzeConfig::default()) {
            AnalysisVerdict::RankConditionUnmet {
                state_rank,
                tail_dim,
                ..
            } => {
                assert_eq!(state_rank, 4);
                assert_eq!(tail_dim, 2);
            }
            other => panic!("expected RANK_CONDITION_UNMET, got {}", other.tag()),
        }
        // the gate also fires with tail compression requested
        let config = AnalyzeConfig {
            tail_compression: true,
            ..AnalyzeConfig::default()
        };
        assert_eq!(analyze(&werner, &config).tag(), "RANK_CONDITION_UNMET");
    }

    #[test]
    fn analyze_diag_mixture_needs_random_basis() {
        let rho = diag_mixture();
        match analyze(&rho, &AnalyzeConfig::default()) {
            AnalysisVerdict::Separable(cert) => {
                assert!(cert.reconstruction_residual <= 1e-8);
                // the sweep fails, so the basis must mix both components
                assert!(cert.basis_used[0][0].norm() > 1e-6);
                assert!(cert.basis_used[0][1].norm() > 1e-6);
                let check = verify_certificate(&rho, &cert, &tols()).unwrap();
                assert!(check.passed);
            }
            other => panic!("expected SEPARABLE, got {}", other.tag()),
        }

        // with no random attempts the verdict degrades to INCONCLUSIVE
        let config = AnalyzeConfig {
            attempts: 0,
            ..AnalyzeConfig::default()
        };
        assert_eq!(analyze(&rho, &config).tag(), "INCONCLUSIVE");
    }

    #[test]
    fn analyze_tail_compression_branch() {
        // embed a (2;2) generated state's tail into C³: rank 2 < N = 3
        let small = generated_state(vec![2], 2, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let u = haar_unitary(3, &mut rng);
        let q = u.columns(0, 2).into_owned();
        let embed = kron(&CMatrix::identity(2, 2), &q);
        let big = &embed * small.matrix() * embed.adjoint();
        let shape = SystemShape::new(vec![2], 3).unwrap();
        let rho = DensityMatrix::new(shape, big, &tols()).unwrap();

        assert_eq!(
            analyze(&rho, &AnalyzeConfig::default()).tag(),
            "RANK_CONDITION_UNMET"
        );

        let config = AnalyzeConfig {
            tail_compression: true,
            ..AnalyzeConfig::default()
        };
        match analyze(&rho, &config) {
            AnalysisVerdict::Separable(cert) => {
                assert!(cert.tail_compressed);
                assert!(cert.reconstruction_residual <= 1e-8);
                for term in &cert.ensemble.terms {
                    assert_eq!(term.tail_vector.len(), 3);
                }
                let check = verify_certificate(&rho, &cert, &tols()).unwrap();
                assert!(check.passed);
            }
            other => panic!("expected SEPARABLE via compression, got {}", other.tag()),
        }
    }

    #[test]
    fn analyze_verdict_tags_are_unitary_covariant() {
        for seed in [41u64, 42] {
            let rho = generated_state(vec![2, 2], 3, seed);
            let base = analyze(&rho, &AnalyzeConfig::default()).tag();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
            let locals = vec![haar_unitary(2, &mut rng), haar_unitary(2, &mut rng)];
            let rotated = apply_local(&rho, &locals, &tols()).unwrap();
            assert_eq!(analyze(&rotated, &AnalyzeConfig::default()).tag(), base);
        }
    }

    #[test]
    fn verify_rejects_corruption_and_malformed() {
        let rho = generated_state(vec![2], 3, 51);
        let config = AnalyzeConfig {
            seed: 51,
            ..AnalyzeConfig::default()
        };
        let AnalysisVerdict::Separable(cert) = analyze(&rho, &config) else {
            panic!("fixture should be separable");
        };

        // 1% weight perturbation → clean fail with commensurate residual
        let mut tampered = (*cert).clone();
        tampered.ensemble.terms[0].weight *= 1.01;
        let mass = cert.ensemble.terms[0].weight;
        let check = verify_certificate(&rho, &tampered, &tols()).unwrap();
        assert!(!check.passed);
        let expected = 0.01 * mass / rho.matrix().norm();
        assert!(check.residual > expected * 0.2 && check.residual < expected * 5.0);

        // structural defects are errors
        let mut negative = (*cert).clone();
        negative.ensemble.terms[0].weight = -1.0;
        assert!(matches!(
            verify_certificate(&rho, &negative, &tols()),
            Err(Error::MalformedCertificate(_))
        ));
        let mut short = (*cert).clone();
        short.ensemble.terms[0].tail_vector = CVector::zeros(2);
        assert!(matches!(
            verify_certificate(&rho, &short, &tols()),
            Err(Error::MalformedCertificate(_))
        ));
    }

    #[test]
    fn verify_empty_ensemble_against_zero() {
        let shape = SystemShape::new(vec![2], 2).unwrap();
        let zero = DensityMatrix::from_parts_unchecked(shape, CMatrix::zeros(4, 4));
        let cert = SeparabilityCertificate {
            ensemble: ProductEnsemble::default(),
            reconstruction_residual: 0.0,
            basis_used: Vec::new(),
            diagnostics: ValidationReport {
                max_block_residual: 0.0,
                worst_block: (vec![0], vec![0]),
                commutation_residual: 0.0,
                min_joint_gap: None,
            },
            tolerances: tols(),
            trace: 0.0,
            tail_compressed: false,
        };
        let check = verify_certificate(&zero, &cert, &tols()).unwrap();
        assert!(check.passed);
        assert_eq!(check.residual, 0.0);
    }

    #[test]
    fn rotated_top_block_is_the_tested_compression() {
        // the rotation sends the found basis to the top computational slot,
        // so the rotated top block equals the compression that passed the
        // rank test
        let rho = generated_state(vec![2, 2], 3, 61);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let basis = find_full_rank_product_basis(&rho, 0, &mut rng, &tols()).unwrap();
        let comp = product_compression(&rho, &basis).unwrap();
        let rotations: Vec<CMatrix> = basis
            .iter()
            .map(|e| unitary_with_final_column(e).adjoint())
            .collect();
        let rotated = apply_local(&rho, &rotations, &tols()).unwrap();
        let k = rotated.shape().top_front_index();
        let top = block(&rotated, &k, &k).unwrap();
        assert!((&top - &comp).norm() < 1e-10 * comp.norm().max(1.0));
    }
}
