//! The canonical form behind the separability pipeline: a commuting normal
//! family of level operators `{Dⁱ_j}` together with a full-rank PSD top
//! block `F`, from which the state is assembled block-wise as
//! `E_{b,b′} = √F·S_b†·S_{b′}·√F` with selector products
//! `S_b = ∏_i Dⁱ_{(K_i−1)−b_i}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::multilinear::{block, DensityMatrix, SystemShape};
use crate::numerics::{
    self, commutation_residual, gaussian_complex, haar_unitary, hermitian_eig, psd_sqrt_invsqrt,
    simultaneous_diagonalize, Tolerances,
};
use crate::{c64, CMatrix, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Commuting family plus top block; `Dⁱ₀ = I` by convention and is not
/// stored, so subsystem `i` carries `K_i − 1` level operators.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    shape: SystemShape,
    level_ops: Vec<Vec<CMatrix>>,
    top_block: CMatrix,
}

/// Residual report from [`CanonicalForm::validate`]; all entries below their
/// tolerances certify the canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `max_{b,b′} ‖E_{b,b′}(ρ) − √F·S_b†·S_{b′}·√F‖_F / ‖ρ‖_F`.
    pub max_block_residual: f64,
    /// The block pair attaining the maximum.
    pub worst_block: (Vec<usize>, Vec<usize>),
    /// Commutation/normality residual of the level-operator table.
    pub commutation_residual: f64,
    /// Minimal joint-eigenvalue gap across the family; `None` when the tail
    /// dimension is 1 or the joint diagnostic could not be computed.
    pub min_joint_gap: Option<f64>,
}

/// Knobs for [`sample_canonical`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    /// Scale of the complex Gaussian level-operator eigenvalues.
    pub eigenvalue_scale: f64,
    /// Upper bound on the condition number of the sampled top block.
    pub cond_target: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            eigenvalue_scale: 1.0,
            cond_target: 100.0,
        }
    }
}

impl CanonicalForm {
    /// Validate the defining invariants: a commuting normal level table and
    /// a Hermitian, full-rank, well-conditioned top block (stored
    /// symmetrized so assembly can place it exactly).
    pub fn new(
        shape: SystemShape,
        level_ops: Vec<Vec<CMatrix>>,
        top_block: CMatrix,
        tols: &Tolerances,
    ) -> Result<Self> {
        let n = shape.tail_dim();
        if level_ops.len() != shape.num_subsystems() {
            return Err(Error::DimensionMismatch(format!(
                "level table has {} rows for {} subsystems",
                level_ops.len(),
                shape.num_subsystems()
            )));
        }
        for (i, (ops, &k)) in level_ops.iter().zip(shape.front_dims()).enumerate() {
            if ops.len() != k - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "subsystem {i} has {} level operators, expected {}",
                    ops.len(),
                    k - 1
                )));
            }
            for d in ops {
                if d.nrows() != n || d.ncols() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "level operator for subsystem {i} is {}×{}, tail dimension is {n}",
                        d.nrows(),
                        d.ncols()
                    )));
                }
                numerics::check_finite(d)?;
            }
        }
        if top_block.nrows() != n || top_block.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "top block is {}×{}, tail dimension is {n}",
                top_block.nrows(),
                top_block.ncols()
            )));
        }
        numerics::check_finite(&top_block)?;

        let family: Vec<CMatrix> = level_ops.iter().flatten().cloned().collect();
        let residual = commutation_residual(&family)?;
        if residual > tols.simdiag_tol {
            return Err(Error::NotCommuting {
                residual,
                tol: tols.simdiag_tol,
            });
        }

        let norm = top_block.norm();
        let asym = (&top_block - top_block.adjoint()).norm();
        if norm > 0.0 && asym / norm > tols.psd_tol {
            return Err(Error::NotHermitian {
                residual: asym / norm,
                row: 0,
                col: 0,
                tol: tols.psd_tol,
            });
        }
        let sym = (&top_block + top_block.adjoint()).scale(0.5);
        let dec = hermitian_eig(&sym)?;
        let lambda_min = dec.eigenvalues[0];
        let lambda_max = *dec.eigenvalues.last().unwrap();
        if lambda_min <= 0.0 || lambda_max / lambda_min > tols.cond_max {
            return Err(Error::IllConditioned {
                lambda_min,
                lambda_max,
            });
        }

        Ok(Self {
            shape,
            level_ops,
            top_block: sym,
        })
    }

    /// Wrap parts without invariant checks (fixture plumbing; `validate`
    /// still reports honestly on such values).
    pub fn from_parts_unchecked(
        shape: SystemShape,
        level_ops: Vec<Vec<CMatrix>>,
        top_block: CMatrix,
    ) -> Self {
        Self {
            shape,
            level_ops,
            top_block,
        }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn top_block(&self) -> &CMatrix {
        &self.top_block
    }

    pub fn level_ops(&self) -> &[Vec<CMatrix>] {
        &self.level_ops
    }

    /// `Dⁱ_j`, with level 0 giving the identity.
    pub fn level_op(&self, subsystem: usize, level: usize) -> CMatrix {
        if level == 0 {
            let n = self.shape.tail_dim();
            CMatrix::identity(n, n)
        } else {
            self.level_ops[subsystem][level - 1].clone()
        }
    }

    /// The level table flattened in `(subsystem, level)` order.
    pub fn flat_table(&self) -> Vec<CMatrix> {
        self.level_ops.iter().flatten().cloned().collect()
    }

    /// Selector product `S_b = ∏_i Dⁱ_{(K_i−1)−b_i}`; the top multi-index
    /// yields the identity.
    pub fn selector(&self, b: &[usize]) -> Result<CMatrix> {
        self.shape.front_offset(b)?;
        let n = self.shape.tail_dim();
        let mut s = CMatrix::identity(n, n);
        for (i, (&bi, &k)) in b.iter().zip(self.shape.front_dims()).enumerate() {
            let level = (k - 1) - bi;
            if level > 0 {
                s *= &self.level_ops[i][level - 1];
            }
        }
        Ok(s)
    }

    /// Assemble the represented state block by block:
    /// `E_{b,b′} = Y_b†·Y_{b′}` with `Y_b = S_b·√F`. The result is Hermitian
    /// PSD of rank `N`, with the top diagonal block equal to `F` exactly.
    pub fn assemble(&self, tols: &Tolerances) -> Result<DensityMatrix> {
        let n = self.shape.tail_dim();
        let s = self.shape.front_size();
        let (sqrt_f, _) = psd_sqrt_invsqrt(&self.top_block, tols)?;
        let columns: Vec<CMatrix> = (0..s)
            .map(|off| {
                let b = self.shape.front_indices(off);
                Ok(self.selector(&b)? * &sqrt_f)
            })
            .collect::<Result<_>>()?;

        let total = self.shape.total_dim();
        let mut out = CMatrix::zeros(total, total);
        for row in 0..s {
            for col in row..s {
                let e = columns[row].adjoint() * &columns[col];
                out.view_mut((row * n, col * n), (n, n)).copy_from(&e);
                if col != row {
                    out.view_mut((col * n, row * n), (n, n))
                        .copy_from(&e.adjoint());
                }
            }
        }
        // S_k = I, so the top block is F up to the rounding of √F·√F; place
        // the stored matrix itself.
        out.view_mut(((s - 1) * n, (s - 1) * n), (n, n))
            .copy_from(&self.top_block);
        Ok(DensityMatrix::from_parts_unchecked(self.shape.clone(), out))
    }

    /// Residual diagnostics of this form against a target state. The joint
    /// eigenvalue gap uses a fixed-seed diagnostic diagonalization, so the
    /// report is deterministic.
    pub fn validate(&self, rho: &DensityMatrix, tols: &Tolerances) -> Result<ValidationReport> {
        if self.shape != *rho.shape() {
            return Err(Error::DimensionMismatch(
                "canonical form and state shapes differ".into(),
            ));
        }
        let reference = self.assemble(tols)?;
        let scale = rho.matrix().norm().max(f64::MIN_POSITIVE);
        let mut worst = 0.0;
        let mut worst_pair = (self.shape.front_indices(0), self.shape.front_indices(0));
        for b in self.shape.front_index_iter() {
            for b_prime in self.shape.front_index_iter() {
                let diff =
                    (block(rho, &b, &b_prime)? - block(&reference, &b, &b_prime)?).norm() / scale;
                if diff > worst {
                    worst = diff;
                    worst_pair = (b.clone(), b_prime.clone());
                }
            }
        }

        let family = self.flat_table();
        let commutation = commutation_residual(&family)?;

        let mut min_joint_gap = None;
        if self.shape.tail_dim() > 1 && commutation <= tols.simdiag_tol {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7665_7269_6679);
            if let Ok(joint) = simultaneous_diagonalize(&family, tols, &mut rng) {
                let n = self.shape.tail_dim();
                let mut gap = f64::INFINITY;
                for a in 0..n {
                    for b in a + 1..n {
                        let dist = joint
                            .eigenvalue_table
                            .iter()
                            .map(|row| (row[a] - row[b]).norm())
                            .fold(0.0, f64::max);
                        gap = gap.min(dist);
                    }
                }
                min_joint_gap = Some(gap);
            }
        }

        Ok(ValidationReport {
            max_block_residual: worst,
            worst_block: worst_pair,
            commutation_residual: commutation,
            min_joint_gap,
        })
    }
}

/// Recover the canonical form of a state in the given basis: `F` is the top
/// diagonal block and each level operator is read off a top-row block via
/// `Dⁱ_j = F^{−1/2}·E_{k,b}·F^{−1/2}` with `b` equal to the top index except
/// `b_i = (K_i−1)−j`. Fails if the rank conditions are unmet or the
/// re-assembled form misses any block of the input.
pub fn extract(rho: &DensityMatrix, tols: &Tolerances) -> Result<CanonicalForm> {
    let shape = rho.shape().clone();
    let n = shape.tail_dim();
    let state_rank = numerics::rank(rho.matrix(), tols.rank_rel_tol);
    if state_rank != n {
        return Err(Error::RankCondition {
            rank: state_rank,
            expected: n,
        });
    }
    let k = shape.top_front_index();
    let f = block(rho, &k, &k)?;
    let top_rank = numerics::rank(&f, tols.rank_rel_tol);
    if top_rank != n {
        return Err(Error::RankCondition {
            rank: top_rank,
            expected: n,
        });
    }
    let (_, inv_sqrt_f) = psd_sqrt_invsqrt(&(&f + f.adjoint()).scale(0.5), tols)?;

    let mut level_ops = Vec::with_capacity(shape.num_subsystems());
    for (i, &dim) in shape.front_dims().iter().enumerate() {
        let mut ops = Vec::with_capacity(dim - 1);
        for level in 1..dim {
            let mut b = k.clone();
            b[i] = (dim - 1) - level;
            let e = block(rho, &k, &b)?;
            ops.push(&inv_sqrt_f * e * &inv_sqrt_f);
        }
        level_ops.push(ops);
    }

    let form = CanonicalForm::new(shape.clone(), level_ops, f, tols)?;
    let reference = form.assemble(tols)?;
    let scale = rho.matrix().norm().max(f64::MIN_POSITIVE);
    for b in shape.front_index_iter() {
        for b_prime in shape.front_index_iter() {
            let residual =
                (block(rho, &b, &b_prime)? - block(&reference, &b, &b_prime)?).norm() / scale;
            if residual > tols.residual_tol {
                return Err(Error::BlockConsistency {
                    b,
                    b_prime,
                    residual,
                    tol: tols.residual_tol,
                });
            }
        }
    }
    Ok(form)
}

/// Sample a random instance: one shared Haar eigenbasis for the whole level
/// table (so the family commutes by construction), complex Gaussian
/// eigenvalues, and a top block with spectrum inside the condition target.
/// Fixed seeds give bit-identical results.
pub fn sample_canonical<R: Rng + ?Sized>(
    shape: &SystemShape,
    rng: &mut R,
    options: &SampleOptions,
) -> CanonicalForm {
    let n = shape.tail_dim();
    let u0 = haar_unitary(n, rng);
    let mut level_ops = Vec::with_capacity(shape.num_subsystems());
    for &k in shape.front_dims() {
        let mut ops = Vec::with_capacity(k - 1);
        for _ in 1..k {
            let eigs: Vec<_> = (0..n)
                .map(|_| gaussian_complex(rng) * options.eigenvalue_scale)
                .collect();
            let d = CMatrix::from_fn(n, n, |r, c| if r == c { eigs[r] } else { c64(0.0, 0.0) });
            ops.push(&u0 * d * u0.adjoint());
        }
        level_ops.push(ops);
    }

    let half_log = options.cond_target.max(1.0).ln() / 2.0;
    let spectrum: Vec<f64> = (0..n)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * half_log)
        .map(f64::exp)
        .collect();
    let v = haar_unitary(n, rng);
    let diag = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            c64(spectrum[r], 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let f = &v * diag * v.adjoint();

    CanonicalForm::new(shape.clone(), level_ops, f, &Tolerances::default())
        .expect("sampled parts satisfy the invariants by construction")
}
