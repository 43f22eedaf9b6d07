//! Independent fixtures and slow-path oracles: random separable states,
//! hard-coded non-PPT states with closed-form witnesses, and a brute-force
//! ensemble reconstruction that shares no code with the tensor-product
//! paths it audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::multilinear::{DensityMatrix, SystemShape};
use crate::numerics::{random_unit_vector, Tolerances};
use crate::separability::{reassemble_ensemble, EnsembleTerm, ProductEnsemble};
use crate::{c64, CMatrix, Error, Result};

/// Reproducible test-state recipe, JSON-loadable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    /// Dimension list, tail last.
    pub dims: Vec<usize>,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: FixtureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    RandomSeparable {
        num_terms: usize,
    },
    RandomDensity {
        rank: usize,
    },
    BellMixture {
        mixing: f64,
    },
    CanonicalSample {
        eigenvalue_scale: f64,
        cond_target: f64,
    },
}

/// Materialize a fixture spec into a trace-normalized state.
pub fn build_fixture(spec: &FixtureSpec) -> Result<DensityMatrix> {
    let shape = SystemShape::from_dims(&spec.dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.kind {
        FixtureKind::RandomSeparable { num_terms } => {
            Ok(random_separable(&shape, *num_terms, &mut rng)?.0)
        }
        FixtureKind::RandomDensity { rank } => random_density(&shape, *rank, &mut rng),
        FixtureKind::BellMixture { mixing } => {
            if spec.dims != [2, 2] {
                return Err(Error::InvalidShape(
                    "bell_mixture fixtures live on 2⊗2".into(),
                ));
            }
            Ok(werner(*mixing))
        }
        FixtureKind::CanonicalSample {
            eigenvalue_scale,
            cond_target,
        } => {
            let opts = crate::canonical::SampleOptions {
                eigenvalue_scale: *eigenvalue_scale,
                cond_target: *cond_target,
            };
            let cf = crate::canonical::sample_canonical(&shape, &mut rng, &opts);
            let rho = cf.assemble(&Tolerances::default())?;
            Ok(rho.normalize()?.0)
        }
    }
}

/// Convex combination of `num_terms` random product projectors with
/// Dirichlet(1,…,1) weights; returns the trace-1 state and its ground-truth
/// ensemble.
pub fn random_separable<R: Rng + ?Sized>(
    shape: &SystemShape,
    num_terms: usize,
    rng: &mut R,
) -> Result<(DensityMatrix, ProductEnsemble)> {
    if num_terms < 1 {
        return Err(Error::InvalidShape(
            "separable fixtures need at least one term".into(),
        ));
    }
    let raw: Vec<f64> = (0..num_terms)
        .map(|_| rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = raw.iter().sum();
    let terms: Vec<EnsembleTerm> = raw
        .into_iter()
        .map(|w| EnsembleTerm {
            weight: w / total,
            local_vectors: shape
                .front_dims()
                .iter()
                .map(|&k| random_unit_vector(k, rng))
                .collect(),
            tail_vector: random_unit_vector(shape.tail_dim(), rng),
        })
        .collect();
    let ensemble = ProductEnsemble { terms };
    let matrix = reassemble_ensemble(&ensemble, shape)?;
    Ok((
        DensityMatrix::from_parts_unchecked(shape.clone(), matrix),
        ensemble,
    ))
}

/// `G·G†/tr` for a complex Gaussian `G` with `target_rank` columns; the rank
/// equals the target with probability one.
pub fn random_density<R: Rng + ?Sized>(
    shape: &SystemShape,
    target_rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let total = shape.total_dim();
    if target_rank < 1 || target_rank > total {
        return Err(Error::InvalidShape(format!(
            "target rank {target_rank} outside 1..={total}"
        )));
    }
    let g = crate::numerics::gaussian_matrix(total, target_rank, rng);
    let m = &g * g.adjoint();
    let trace = m.trace().re;
    Ok(DensityMatrix::from_parts_unchecked(
        shape.clone(),
        m.scale(1.0 / trace),
    ))
}

/// Evaluate `Σ p_n |w_n⟩⟨w_n|` with `|w_n⟩ = v_1⊗…⊗v_m⊗g` through explicit
/// index loops; the reference implementation for every reconstruction
/// residual in the crate.
pub fn brute_reconstruct(ensemble: &ProductEnsemble, shape: &SystemShape) -> Result<CMatrix> {
    let dims = shape.dims();
    let total = shape.total_dim();
    let m = shape.num_subsystems();
    let mut out = CMatrix::zeros(total, total);
    for (idx, term) in ensemble.terms.iter().enumerate() {
        if term.local_vectors.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "term {idx} has {} local vectors for {m} subsystems",
                term.local_vectors.len()
            )));
        }
        for (i, (v, &k)) in term
            .local_vectors
            .iter()
            .zip(shape.front_dims())
            .enumerate()
        {
            if v.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "term {idx} local vector {i} has length {}, expected {k}",
                    v.len()
                )));
            }
        }
        if term.tail_vector.len() != shape.tail_dim() {
            return Err(Error::DimensionMismatch(format!(
                "term {idx} tail vector has length {}, expected {}",
                term.tail_vector.len(),
                shape.tail_dim()
            )));
        }

        let mut amplitudes = vec![c64(0.0, 0.0); total];
        for (t, amp_slot) in amplitudes.iter_mut().enumerate() {
            let mut rem = t;
            let mut digits = vec![0usize; dims.len()];
            for (axis, &d) in dims.iter().enumerate().rev() {
                digits[axis] = rem % d;
                rem /= d;
            }
            let mut amp = c64(1.0, 0.0);
            for (i, v) in term.local_vectors.iter().enumerate() {
                amp *= v[digits[i]];
            }
            amp *= term.tail_vector[digits[m]];
            *amp_slot = amp;
        }
        let w = c64(term.weight, 0.0);
        for r in 0..total {
            for c in 0..total {
                out[(r, c)] += w * amplitudes[r] * amplitudes[c].conj();
            }
        }
    }
    Ok(out)
}

/// `|Φ⁺⟩⟨Φ⁺|` on 2⊗2 — maximally entangled, partial-transpose witness −1/2.
pub fn bell_projector() -> DensityMatrix {
    let shape = SystemShape::new(vec![2], 2).unwrap();
    let mut m = CMatrix::zeros(4, 4);
    for &(r, c) in &[(0usize, 0usize), (0, 3), (3, 0), (3, 3)] {
        m[(r, c)] = c64(0.5, 0.0);
    }
    DensityMatrix::from_parts_unchecked(shape, m)
}

/// `½(|ψ⁻⟩⟨ψ⁻| + |00⟩⟨00|)` on 2⊗2 — rank 2 = N but NPT, with
/// partial-transpose witness `(1−√2)/4`.
pub fn psi_minus_zero_mixture() -> DensityMatrix {
    let shape = SystemShape::new(vec![2], 2).unwrap();
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c64(0.5, 0.0);
    m[(1, 1)] = c64(0.25, 0.0);
    m[(2, 2)] = c64(0.25, 0.0);
    m[(1, 2)] = c64(-0.25, 0.0);
    m[(2, 1)] = c64(-0.25, 0.0);
    DensityMatrix::from_parts_unchecked(shape, m)
}

/// Werner mixture `p·|ψ⁻⟩⟨ψ⁻| + (1−p)·I/4` on 2⊗2; spectrum
/// `(1+3p)/4` once and `(1−p)/4` three times.
pub fn werner(p: f64) -> DensityMatrix {
    let shape = SystemShape::new(vec![2], 2).unwrap();
    let mut m = CMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
    m[(1, 1)] += c64(p / 2.0, 0.0);
    m[(2, 2)] += c64(p / 2.0, 0.0);
    m[(1, 2)] += c64(-p / 2.0, 0.0);
    m[(2, 1)] += c64(-p / 2.0, 0.0);
    DensityMatrix::from_parts_unchecked(shape, m)
}
