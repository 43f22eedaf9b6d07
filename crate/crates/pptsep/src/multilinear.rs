//! Index algebra and subsystem-local operations on multipartite complex
//! matrices: tensor products, partial transposes, block extraction,
//! product-basis compressions, and local operations.
//!
//! Basis ordering is row-major with subsystem 1 most significant and the
//! tail factor last/least significant; every operation in the crate relies
//! on this single convention. Subsystem indices are 0-based, with index `m`
//! addressing the tail.

use crate::numerics::{self, Tolerances};
use crate::{c64, CMatrix, CVector, Error, Result};

/// Subsystem dimension profile `(K_1, …, K_m; N)` plus the index arithmetic
/// tying multi-indices to flat matrix coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemShape {
    front_dims: Vec<usize>,
    tail_dim: usize,
}

impl SystemShape {
    /// Shape with front factors `K_i ≥ 2` and tail dimension `N ≥ 1`.
    pub fn new(front_dims: Vec<usize>, tail_dim: usize) -> Result<Self> {
        if front_dims.is_empty() {
            return Err(Error::InvalidShape(
                "need at least one front subsystem".into(),
            ));
        }
        for (i, &k) in front_dims.iter().enumerate() {
            if k < 2 {
                return Err(Error::InvalidShape(format!(
                    "front dimension {k} at subsystem {i} (must be ≥ 2)"
                )));
            }
        }
        if tail_dim < 1 {
            return Err(Error::InvalidShape("tail dimension must be ≥ 1".into()));
        }
        let mut total: usize = tail_dim;
        for &k in &front_dims {
            total = total
                .checked_mul(k)
                .ok_or_else(|| Error::InvalidShape("total dimension overflows".into()))?;
        }
        Ok(Self {
            front_dims,
            tail_dim,
        })
    }

    /// Parse a flat dimension list, tail last: `[K_1, …, K_m, N]`.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidShape(format!(
                "need at least a front and a tail dimension, got {} entries",
                dims.len()
            )));
        }
        Self::new(dims[..dims.len() - 1].to_vec(), dims[dims.len() - 1])
    }

    /// Flat dimension list, tail last.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.front_dims.clone();
        d.push(self.tail_dim);
        d
    }

    pub fn front_dims(&self) -> &[usize] {
        &self.front_dims
    }

    pub fn tail_dim(&self) -> usize {
        self.tail_dim
    }

    /// Number of front subsystems `m`.
    pub fn num_subsystems(&self) -> usize {
        self.front_dims.len()
    }

    /// Total front dimension `S = ∏ K_i`.
    pub fn front_size(&self) -> usize {
        self.front_dims.iter().product()
    }

    /// Full matrix side `S·N`.
    pub fn total_dim(&self) -> usize {
        self.front_size() * self.tail_dim
    }

    /// Flat offset of a front multi-index under row-major ordering.
    pub fn front_offset(&self, b: &[usize]) -> Result<usize> {
        if b.len() != self.front_dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "front multi-index has {} components, shape has {}",
                b.len(),
                self.front_dims.len()
            )));
        }
        let mut off = 0;
        for (i, (&bi, &k)) in b.iter().zip(&self.front_dims).enumerate() {
            if bi >= k {
                return Err(Error::IndexOutOfBounds(format!(
                    "front index {bi} at subsystem {i} (dimension {k})"
                )));
            }
            off = off * k + bi;
        }
        Ok(off)
    }

    /// Inverse of [`front_offset`](Self::front_offset).
    pub fn front_indices(&self, mut offset: usize) -> Vec<usize> {
        assert!(
            offset < self.front_size(),
            "front offset {offset} out of range"
        );
        let mut digits = vec![0; self.front_dims.len()];
        for (i, &k) in self.front_dims.iter().enumerate().rev() {
            digits[i] = offset % k;
            offset /= k;
        }
        digits
    }

    /// All front multi-indices in lexicographic (= offset) order.
    pub fn front_index_iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.front_size()).map(|s| self.front_indices(s))
    }

    /// The top multi-index `k = (K_1−1, …, K_m−1)`.
    pub fn top_front_index(&self) -> Vec<usize> {
        self.front_dims.iter().map(|&k| k - 1).collect()
    }

    /// Flat index of basis vector `|b⟩ ⊗ |n⟩`.
    pub fn composite_index(&self, b: &[usize], n: usize) -> Result<usize> {
        if n >= self.tail_dim {
            return Err(Error::IndexOutOfBounds(format!(
                "tail index {n} (dimension {})",
                self.tail_dim
            )));
        }
        Ok(self.front_offset(b)? * self.tail_dim + n)
    }
}

/// Hermitian PSD complex matrix tagged with its [`SystemShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SystemShape,
    matrix: CMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// Validate finiteness, Hermiticity, and positive semidefiniteness, and
    /// record whether the trace is 1 within tolerance.
    pub fn new(shape: SystemShape, matrix: CMatrix, tols: &Tolerances) -> Result<Self> {
        let total = shape.total_dim();
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() != total {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} does not match shape total {}",
                matrix.nrows(),
                total
            )));
        }
        numerics::check_finite(&matrix)?;

        let norm = matrix.norm();
        let asym = &matrix - matrix.adjoint();
        let residual = if norm > 0.0 { asym.norm() / norm } else { 0.0 };
        if residual > tols.psd_tol {
            let (mut worst_r, mut worst_c, mut worst) = (0, 0, 0.0f64);
            for r in 0..total {
                for c in 0..total {
                    let mag = asym[(r, c)].norm();
                    if mag > worst {
                        worst = mag;
                        worst_r = r;
                        worst_c = c;
                    }
                }
            }
            return Err(Error::NotHermitian {
                residual,
                row: worst_r,
                col: worst_c,
                tol: tols.psd_tol,
            });
        }

        let check = numerics::is_psd(&matrix, tols.psd_tol)?;
        if !check.is_psd {
            return Err(Error::NotPsd {
                eigenvalue: check.witness_eigenvalue,
            });
        }

        Ok(Self::from_parts_unchecked(shape, matrix))
    }

    /// Wrap a matrix the caller already knows to be a valid state.
    pub fn from_parts_unchecked(shape: SystemShape, matrix: CMatrix) -> Self {
        let trace = matrix.trace().re;
        let normalized = (trace - 1.0).abs() <= Tolerances::default().psd_tol;
        Self {
            shape,
            matrix,
            normalized,
        }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Real part of the trace (the imaginary part vanishes for Hermitian input).
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scale to unit trace; returns the normalized state and the original trace.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let trace = self.trace();
        if !trace.is_finite() || trace <= f64::EPSILON {
            return Err(Error::TraceTooSmall(trace));
        }
        let scaled = self.matrix.scale(1.0 / trace);
        Ok((
            Self::from_parts_unchecked(self.shape.clone(), scaled),
            trace,
        ))
    }
}

/// Kronecker product; dimensions multiply.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn decode_digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (i, &d) in dims.iter().enumerate().rev() {
        digits[i] = index % d;
        index /= d;
    }
    digits
}

/// Transpose the indices of one subsystem only (`l = m` addresses the tail).
pub fn partial_transpose(rho: &DensityMatrix, l: usize) -> Result<CMatrix> {
    partial_transpose_subset(rho, &[l])
}

/// Transpose the indices of every subsystem in `subsystems` at once.
pub fn partial_transpose_subset(rho: &DensityMatrix, subsystems: &[usize]) -> Result<CMatrix> {
    let dims = rho.shape().dims();
    let mut swap = vec![false; dims.len()];
    for &l in subsystems {
        if l >= dims.len() {
            return Err(Error::IndexOutOfBounds(format!(
                "subsystem {l} (have {} including the tail)",
                dims.len()
            )));
        }
        if swap[l] {
            return Err(Error::InvalidShape(format!(
                "duplicate subsystem {l} in transpose set"
            )));
        }
        swap[l] = true;
    }

    let total = rho.shape().total_dim();
    let digits: Vec<Vec<usize>> = (0..total).map(|t| decode_digits(t, &dims)).collect();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(total, total);
    for r in 0..total {
        for c in 0..total {
            let (mut src_r, mut src_c) = (0, 0);
            for (axis, &d) in dims.iter().enumerate() {
                let (dr, dc) = if swap[axis] {
                    (digits[c][axis], digits[r][axis])
                } else {
                    (digits[r][axis], digits[c][axis])
                };
                src_r = src_r * d + dr;
                src_c = src_c * d + dc;
            }
            out[(r, c)] = m[(src_r, src_c)];
        }
    }
    Ok(out)
}

/// The `N×N` sub-block `E_{b,b′} = ⟨b|ρ|b′⟩`.
pub fn block(rho: &DensityMatrix, b: &[usize], b_prime: &[usize]) -> Result<CMatrix> {
    let shape = rho.shape();
    let n = shape.tail_dim();
    let row = shape.front_offset(b)? * n;
    let col = shape.front_offset(b_prime)? * n;
    Ok(rho.matrix().view((row, col), (n, n)).into_owned())
}

/// Sandwich ρ with a product vector on the front subsystems:
/// `M = ⟨e_1,…,e_m| ρ |e_1,…,e_m⟩`, an `N×N` Hermitian PSD matrix with
/// `rank(M) ≤ rank(ρ)`.
pub fn product_compression(rho: &DensityMatrix, locals: &[CVector]) -> Result<CMatrix> {
    let shape = rho.shape();
    if locals.len() != shape.num_subsystems() {
        return Err(Error::DimensionMismatch(format!(
            "got {} local vectors for {} front subsystems",
            locals.len(),
            shape.num_subsystems()
        )));
    }
    for (i, (e, &k)) in locals.iter().zip(shape.front_dims()).enumerate() {
        if e.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "local vector {i} has length {}, subsystem dimension is {k}",
                e.len()
            )));
        }
        if e.norm() == 0.0 {
            return Err(Error::ZeroVector { subsystem: i });
        }
    }

    let s = shape.front_size();
    let mut front = CMatrix::zeros(s, 1);
    for (off, b) in shape.front_index_iter().enumerate() {
        let mut w = c64(1.0, 0.0);
        for (i, &bi) in b.iter().enumerate() {
            w *= locals[i][bi];
        }
        front[(off, 0)] = w;
    }
    let embed = kron(
        &front,
        &CMatrix::identity(shape.tail_dim(), shape.tail_dim()),
    );
    Ok(embed.adjoint() * rho.matrix() * embed)
}

/// Conjugate by `L_1 ⊗ … ⊗ L_m ⊗ I_N`; each `L_i` must be invertible with
/// condition number at most `cond_max`.
pub fn apply_local(
    rho: &DensityMatrix,
    locals: &[CMatrix],
    tols: &Tolerances,
) -> Result<DensityMatrix> {
    let shape = rho.shape();
    if locals.len() != shape.num_subsystems() {
        return Err(Error::DimensionMismatch(format!(
            "got {} local operators for {} front subsystems",
            locals.len(),
            shape.num_subsystems()
        )));
    }
    for (l, &k) in locals.iter().zip(shape.front_dims()) {
        if l.nrows() != l.ncols() {
            return Err(Error::NotSquare {
                rows: l.nrows(),
                cols: l.ncols(),
            });
        }
        if l.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "local operator is {}×{}, subsystem dimension is {k}",
                l.nrows(),
                l.ncols()
            )));
        }
        let sv = l.clone().svd(false, false).singular_values;
        let s_max = sv.iter().cloned().fold(0.0, f64::max);
        let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if s_min <= 0.0 || s_max / s_min > tols.cond_max {
            return Err(Error::IllConditioned {
                lambda_min: s_min,
                lambda_max: s_max,
            });
        }
    }

    let mut full = locals[0].clone();
    for l in &locals[1..] {
        full = kron(&full, l);
    }
    full = kron(
        &full,
        &CMatrix::identity(shape.tail_dim(), shape.tail_dim()),
    );
    let out = &full * rho.matrix() * full.adjoint();
    Ok(DensityMatrix::from_parts_unchecked(shape.clone(), out))
}

/// Partial trace over all front subsystems: `Σ_b E_{b,b}`, Hermitian PSD
/// with the same trace as ρ.
pub fn reduced_tail(rho: &DensityMatrix) -> CMatrix {
    let n = rho.shape().tail_dim();
    let s = rho.shape().front_size();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(n, n);
    for off in 0..s {
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += m[(off * n + r, off * n + c)];
            }
        }
    }
    out
}
