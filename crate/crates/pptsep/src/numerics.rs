//! Tolerance-driven dense linear algebra: Hermitian eigendecomposition, rank
//! and kernel, PSD square roots, and simultaneous diagonalization of
//! commuting normal families.
//!
//! Every threshold is relative to the operand's norm; the defaults in
//! [`Tolerances`] are tuned for double precision at dimensions up to ~64.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{c64, CMatrix, CVector, Error, Result};

/// Relative tolerances and numeric guards shared across the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative eigenvalue threshold for positive-semidefiniteness checks.
    pub psd_tol: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rel_tol: f64,
    /// Relative Frobenius bound on reconstruction residuals.
    pub residual_tol: f64,
    /// Largest admissible condition number for invertible operators.
    pub cond_max: f64,
    /// Off-diagonal tolerance for simultaneous diagonalization.
    pub simdiag_tol: f64,
    /// Random-combination redraws before simultaneous diagonalization gives up.
    pub simdiag_retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_tol: 1e-9,
            rank_rel_tol: 1e-9,
            residual_tol: 1e-8,
            cond_max: 1e12,
            simdiag_tol: 1e-9,
            simdiag_retries: 5,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("psd_tol", self.psd_tol),
            ("rank_rel_tol", self.rank_rel_tol),
            ("residual_tol", self.residual_tol),
            ("cond_max", self.cond_max),
            ("simdiag_tol", self.simdiag_tol),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Format(format!(
                    "tolerance {name} must be positive, got {value}"
                )));
            }
        }
        if self.simdiag_retries == 0 {
            return Err(Error::Format("simdiag_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// Eigendecomposition of a Hermitian matrix: `H = U·diag(λ)·U†` with
/// ascending real eigenvalues and unitary `U`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

/// Verdict of a PSD check together with the extremal eigenpair that decides it.
#[derive(Debug, Clone)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub witness_eigenvalue: f64,
    pub witness_vector: CVector,
}

/// Common eigenbasis of a commuting normal family, with the per-member
/// eigenvalue read off column by column.
#[derive(Debug, Clone)]
pub struct JointEigenbasis {
    /// Unitary whose columns are common eigenvectors.
    pub basis: CMatrix,
    /// `eigenvalue_table[member][n]` = `(U†·D·U)_{nn}` for family member `D`.
    pub eigenvalue_table: Vec<Vec<Complex64>>,
    /// Worst relative off-diagonal magnitude achieved over the family.
    pub residual: f64,
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let z = m[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// The input is symmetrized as `(H + H†)/2` first, so callers may pass
/// matrices that are Hermitian only up to rounding noise.
pub fn hermitian_eig(h: &CMatrix) -> Result<SpectralDecomposition> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let se = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors
            .column_mut(dst)
            .copy_from(&se.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Decide `H ⪰ 0` by the sign of its smallest eigenvalue, relative to the
/// spectral scale `max(|λ_max|, 1)`.
pub fn is_psd(h: &CMatrix, tol: f64) -> Result<PsdCheck> {
    let dec = hermitian_eig(h)?;
    if dec.eigenvalues.is_empty() {
        return Ok(PsdCheck {
            is_psd: true,
            witness_eigenvalue: 0.0,
            witness_vector: CVector::zeros(0),
        });
    }
    let lambda_min = dec.eigenvalues[0];
    let lambda_max = *dec.eigenvalues.last().unwrap();
    let scale = lambda_max.abs().max(1.0);
    Ok(PsdCheck {
        is_psd: lambda_min >= -tol * scale,
        witness_eigenvalue: lambda_min,
        witness_vector: dec.eigenvectors.column(0).into_owned(),
    })
}

fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect()
}

/// Number of singular values exceeding `rank_rel_tol` times the largest one.
pub fn rank(m: &CMatrix, rank_rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_rel_tol * max).count()
}

/// Orthonormal basis of the kernel `{v : Mv = 0}`, with dimension
/// `ncols − rank`.
pub fn kernel_basis(m: &CMatrix, rank_rel_tol: f64) -> Vec<CVector> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 {
        return (0..cols)
            .map(|i| {
                CVector::from_fn(
                    cols,
                    |r, _| if r == i { c64(1.0, 0.0) } else { c64(0.0, 0.0) },
                )
            })
            .collect();
    }
    // Pad wide matrices with zero rows so the SVD carries the full right
    // singular basis; the kernel is unchanged.
    let work = if m.nrows() < cols {
        let mut padded = CMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let mut basis = Vec::new();
    for i in 0..v_t.nrows() {
        let s = if i < sv.len() { sv[i] } else { 0.0 };
        if max == 0.0 || s <= rank_rel_tol * max {
            basis.push(v_t.row(i).adjoint());
        }
    }
    basis
}

/// Hermitian square root and inverse square root of a full-rank PSD matrix.
///
/// Fails with the extremal eigenvalues when the matrix is rank deficient,
/// indefinite, or has condition number above `cond_max`.
pub fn psd_sqrt_invsqrt(f: &CMatrix, tols: &Tolerances) -> Result<(CMatrix, CMatrix)> {
    let dec = hermitian_eig(f)?;
    let n = f.nrows();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)));
    }
    let lambda_min = dec.eigenvalues[0];
    let lambda_max = *dec.eigenvalues.last().unwrap();
    if lambda_min <= 0.0 || lambda_max <= 0.0 || lambda_max / lambda_min > tols.cond_max {
        return Err(Error::IllConditioned {
            lambda_min,
            lambda_max,
        });
    }
    let u = &dec.eigenvectors;
    let sqrt_diag = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            c64(dec.eigenvalues[r].sqrt(), 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let inv_diag = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            c64(1.0 / dec.eigenvalues[r].sqrt(), 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let sqrt = u * sqrt_diag * u.adjoint();
    let inv_sqrt = u * inv_diag * u.adjoint();
    Ok((sqrt, inv_sqrt))
}

/// Worst normalized commutator over all ordered pairs of the family,
/// including each member against its own adjoint (the `A = B` case measures
/// normality).
pub fn commutation_residual(family: &[CMatrix]) -> Result<f64> {
    if family.is_empty() {
        return Ok(0.0);
    }
    let n = family[0].nrows();
    for m in family {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "family members must share a dimension: found {} and {}",
                n,
                m.nrows()
            )));
        }
    }
    let mut worst: f64 = 0.0;
    for a in family {
        let norm_a = a.norm();
        for b in family {
            let denom = (norm_a * b.norm()).max(1.0);
            let plain = (a * b - b * a).norm() / denom;
            let adj = (a * b.adjoint() - b.adjoint() * a).norm() / denom;
            worst = worst.max(plain).max(adj);
        }
    }
    Ok(worst)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn antihermitian_part_as_hermitian(m: &CMatrix) -> CMatrix {
    // (M − M†)/(2i) is Hermitian.
    (m - m.adjoint()) * c64(0.0, -0.5)
}

fn max_offdiagonal(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                worst = worst.max(m[(r, c)].norm());
            }
        }
    }
    worst
}

/// Simultaneously diagonalize a family of commuting normal matrices.
///
/// Draws a random linear combination of the family, diagonalizes its
/// Hermitian part, and refines any near-degenerate eigenspace with the
/// anti-Hermitian part and the remaining members. Off-diagonal residuals are
/// verified for every member; on failure the combination is redrawn, up to
/// `simdiag_retries` times.
pub fn simultaneous_diagonalize<R: Rng + ?Sized>(
    family: &[CMatrix],
    tols: &Tolerances,
    rng: &mut R,
) -> Result<JointEigenbasis> {
    if family.is_empty() {
        return Err(Error::DimensionMismatch("empty family".into()));
    }
    let n = family[0].nrows();
    let pre_residual = commutation_residual(family)?;
    if pre_residual > tols.simdiag_tol {
        return Err(Error::NotCommuting {
            residual: pre_residual,
            tol: tols.simdiag_tol,
        });
    }

    let mut best_residual = f64::INFINITY;
    let attempts = tols.simdiag_retries.max(1);
    for _ in 0..attempts {
        let coeffs: Vec<Complex64> = (0..family.len()).map(|_| gaussian_complex(rng)).collect();
        let mut combo = CMatrix::zeros(n, n);
        for (c, d) in coeffs.iter().zip(family) {
            combo += d * *c;
        }

        let mut probes = vec![
            hermitian_part(&combo),
            antihermitian_part_as_hermitian(&combo),
        ];
        for d in family {
            probes.push(hermitian_part(d));
            probes.push(antihermitian_part_as_hermitian(d));
        }

        // Refine a partition of C^n into joint near-eigenspaces.
        let mut blocks: Vec<CMatrix> = vec![CMatrix::identity(n, n)];
        for probe in &probes {
            if blocks.iter().all(|b| b.ncols() == 1) {
                break;
            }
            let gap_tol = tols.simdiag_tol * probe.norm();
            let mut next = Vec::with_capacity(blocks.len());
            for v in &blocks {
                let k = v.ncols();
                if k == 1 {
                    next.push(v.clone());
                    continue;
                }
                let restricted = v.adjoint() * probe * v;
                let dec = hermitian_eig(&restricted)?;
                let mut start = 0;
                for idx in 1..=k {
                    if idx == k || dec.eigenvalues[idx] - dec.eigenvalues[idx - 1] > gap_tol {
                        let w = dec.eigenvectors.columns(start, idx - start);
                        next.push(v * w);
                        start = idx;
                    }
                }
            }
            blocks = next;
        }

        let mut basis = CMatrix::zeros(n, n);
        let mut offset = 0;
        for b in &blocks {
            basis.view_mut((0, offset), (n, b.ncols())).copy_from(b);
            offset += b.ncols();
        }

        let mut worst: f64 = 0.0;
        let mut table = Vec::with_capacity(family.len());
        for d in family {
            let rotated = basis.adjoint() * d * &basis;
            let norm_d = d.norm();
            let off = max_offdiagonal(&rotated);
            let rel = if norm_d > 0.0 { off / norm_d } else { 0.0 };
            worst = worst.max(rel);
            table.push((0..n).map(|i| rotated[(i, i)]).collect());
        }
        if worst <= tols.simdiag_tol {
            return Ok(JointEigenbasis {
                basis,
                eigenvalue_table: table,
                residual: worst,
            });
        }
        best_residual = best_residual.min(worst);
    }
    Err(Error::SimDiagFailed {
        attempts,
        best_residual,
    })
}

// ---------------------------------------------------------------------------
// Seeded sampling helpers.

/// One standard complex Gaussian draw (unit variance per component).
pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase of the
/// R diagonal folded in.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c64(1.0, 0.0)
        };
        q.column_mut(j).apply(|x| *x *= phase);
    }
    q
}

/// Haar-uniform unit vector on the complex sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| gaussian_complex(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / c64(norm, 0.0);
        }
    }
}

/// Unitary whose final column equals the given unit vector; its adjoint maps
/// that vector onto the top computational basis vector.
pub fn unitary_with_final_column(e: &CVector) -> CMatrix {
    let k = e.len();
    assert!(k > 0, "empty vector");
    // Seed a square frame with e first, then the standard basis minus the
    // coordinate where e is largest, and orthonormalize by QR.
    let skip = (0..k)
        .max_by(|&a, &b| e[a].norm().total_cmp(&e[b].norm()))
        .unwrap();
    let mut frame = CMatrix::zeros(k, k);
    frame.column_mut(0).copy_from(e);
    let mut col = 1;
    for i in 0..k {
        if i != skip {
            frame[(i, col)] = c64(1.0, 0.0);
            col += 1;
        }
    }
    let q = frame.qr().q();
    // The first Q column spans e up to phase; rotate it back onto e exactly.
    let overlap = q.column(0).dotc(e);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c64(1.0, 0.0)
    };
    let mut result = CMatrix::zeros(k, k);
    for j in 1..k {
        result.column_mut(j - 1).copy_from(&q.column(j));
    }
    let mut last = q.column(0).into_owned();
    last.apply(|x| *x *= phase);
    result.column_mut(k - 1).copy_from(&last);
    result
}
