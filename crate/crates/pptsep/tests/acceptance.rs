//! Acceptance gate. Each test covers one release criterion and prints a
//! single `criterion N (...): PASS` / `FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pptsep::canonical::{extract, sample_canonical, CanonicalForm, SampleOptions};
use pptsep::multilinear::{kron, product_compression, DensityMatrix, SystemShape};
use pptsep::numerics::{
    gaussian_matrix, haar_unitary, hermitian_eig, kernel_basis, psd_sqrt_invsqrt, rank,
    simultaneous_diagonalize, Tolerances,
};
use pptsep::oracle;
use pptsep::separability::{
    analyze, check_ppt, verify_certificate, AnalysisVerdict, AnalyzeConfig, PptMode,
};
use pptsep::{c64, CMatrix, CVector};

/// Shape grid shared by the batch criteria: (front dims, tail dim).
const SHAPES: &[(&[usize], usize)] = &[
    (&[2], 2),
    (&[2], 3),
    (&[2], 4),
    (&[2], 5),
    (&[2], 6),
    (&[2, 2], 2),
    (&[2, 2], 3),
    (&[2, 2], 4),
    (&[2, 2], 5),
    (&[3, 2], 2),
    (&[3, 2], 3),
    (&[3, 2], 4),
    (&[2, 2, 2], 2),
    (&[2, 2, 2], 3),
];

const BATCH: usize = 200;

fn batch_case(i: usize) -> (SystemShape, CanonicalForm) {
    let (front, tail) = SHAPES[i % SHAPES.len()];
    let shape = SystemShape::new(front.to_vec(), tail).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
    let form = sample_canonical(&shape, &mut rng, &SampleOptions::default());
    (shape, form)
}

fn rel_err(found: &CMatrix, expected: &CMatrix) -> f64 {
    (found - expected).norm() / expected.norm().max(1.0)
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_canonical_round_trip() {
    let tols = Tolerances::default();
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for i in 0..BATCH {
        let (_, form) = batch_case(i);
        let rho = form.assemble(&tols).unwrap();
        let recovered = extract(&rho, &tols).unwrap();

        let mut err = rel_err(recovered.top_block(), form.top_block());
        for (per_found, per_orig) in recovered.level_ops().iter().zip(form.level_ops()) {
            for (found, orig) in per_found.iter().zip(per_orig) {
                err = err.max(rel_err(found, orig));
            }
        }
        err = err.max(rel_err(
            recovered.assemble(&tols).unwrap().matrix(),
            rho.matrix(),
        ));
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-9 && elapsed.as_secs() < 60;
    report(
        "1 (canonical round trip)",
        ok,
        &format!(
            "{BATCH} states, worst recovery {worst:.3e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_decomposition_batch() {
    let tols = Tolerances::default();
    let config = AnalyzeConfig::default();
    let mut worst_residual = 0.0_f64;
    let mut worst_weight_gap = 0.0_f64;
    let mut ok = true;
    for i in 0..BATCH {
        let (_, form) = batch_case(i);
        let rho = form.assemble(&tols).unwrap().normalize().unwrap().0;
        match analyze(&rho, &config) {
            AnalysisVerdict::Separable(cert) => {
                let check = verify_certificate(&rho, &cert, &tols).unwrap();
                worst_residual = worst_residual.max(check.residual);
                worst_weight_gap =
                    worst_weight_gap.max((cert.ensemble.total_weight() - rho.trace()).abs());
                ok &= check.passed && check.residual <= 1e-8;
            }
            other => {
                ok = false;
                eprintln!("state {i} gave {}", other.tag());
            }
        }
    }
    ok &= worst_residual <= 1e-8 && worst_weight_gap <= 1e-8;
    report(
        "2 (decomposition of generated states)",
        ok,
        &format!("{BATCH} states, worst residual {worst_residual:.3e}, worst weight gap {worst_weight_gap:.3e}"),
    );
}

#[test]
fn criterion_3_generated_states_are_ppt() {
    let tols = Tolerances::default();
    let mut min_witness = f64::INFINITY;
    let mut ok = true;
    for i in 0..BATCH {
        let (_, form) = batch_case(i);
        let rho = form.assemble(&tols).unwrap().normalize().unwrap().0;
        let ppt = check_ppt(&rho, PptMode::AllBipartitions, &tols).unwrap();
        ok &= ppt.passed;
        min_witness = min_witness.min(ppt.worst().witness_eigenvalue);
    }
    ok &= min_witness >= -1e-10;
    report(
        "3 (PPT of generated states)",
        ok,
        &format!("{BATCH} states over all bipartitions, min witness {min_witness:+.3e}"),
    );
}

#[test]
fn criterion_4_npt_witnesses() {
    let config = AnalyzeConfig::default();

    let bell = analyze(&oracle::bell_projector(), &config);
    let bell_ok = matches!(
        &bell,
        AnalysisVerdict::NotPpt { witness_eigenvalue, .. } if (witness_eigenvalue + 0.5).abs() <= 1e-10
    );

    let expected = (1.0 - 2.0_f64.sqrt()) / 4.0;
    let mixture = analyze(&oracle::psi_minus_zero_mixture(), &config);
    let mixture_ok = matches!(
        &mixture,
        AnalysisVerdict::NotPpt { witness_eigenvalue, .. } if (witness_eigenvalue - expected).abs() <= 1e-10
    );

    let detail = format!(
        "Bell witness vs -1/2: {}, mixture witness vs (1-sqrt2)/4: {}",
        match &bell {
            AnalysisVerdict::NotPpt {
                witness_eigenvalue, ..
            } => format!("{witness_eigenvalue:+.12}"),
            other => other.tag().to_string(),
        },
        match &mixture {
            AnalysisVerdict::NotPpt {
                witness_eigenvalue, ..
            } => format!("{witness_eigenvalue:+.12}"),
            other => other.tag().to_string(),
        }
    );
    report("4 (entanglement witnesses)", bell_ok && mixture_ok, &detail);
}

#[test]
fn criterion_5_rank_gate_and_rotated_basis() {
    let config = AnalyzeConfig::default();

    // Werner mixture at p = 1/2: NPT but full rank, so the rank gate wins
    let werner = analyze(&oracle::werner(0.5), &config);
    let werner_ok = matches!(
        &werner,
        AnalysisVerdict::RankConditionUnmet {
            state_rank: 4,
            tail_dim: 2,
            ..
        }
    );

    // (|00><00| + |11><11|)/2: the computational compression is singular, so
    // certification must come from a rotated product basis
    let shape = SystemShape::new(vec![2], 2).unwrap();
    let mut matrix = CMatrix::zeros(4, 4);
    matrix[(0, 0)] = c64(0.5, 0.0);
    matrix[(3, 3)] = c64(0.5, 0.0);
    let diag_mix = DensityMatrix::new(shape, matrix, &Tolerances::default()).unwrap();

    let e_top = CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
    let computational = product_compression(&diag_mix, &[e_top]).unwrap();
    let computational_singular = rank(&computational, Tolerances::default().rank_rel_tol) < 2;

    let verdict = analyze(&diag_mix, &config);
    let (rotated_ok, basis_detail) = match &verdict {
        AnalysisVerdict::Separable(cert) => {
            let v = &cert.basis_used[0];
            let max_component = v.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            (
                max_component < 1.0 - 1e-6,
                format!("largest basis component^2 {max_component:.6}"),
            )
        }
        other => (false, other.tag().to_string()),
    };

    report(
        "5 (rank gate and rotated-basis certification)",
        werner_ok && computational_singular && rotated_ok,
        &format!(
            "Werner(1/2) -> {}, computational compression singular: {computational_singular}, {basis_detail}",
            werner.tag()
        ),
    );
}

#[test]
fn criterion_6_degenerate_simultaneous_diagonalization() {
    let tols = Tolerances::default();
    let mut worst = 0.0_f64;
    for trial in 0..100u64 {
        let n = if trial % 2 == 0 { 4 } else { 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + trial);
        let basis = haar_unitary(n, &mut rng);
        let jitter = |rng: &mut ChaCha8Rng| {
            c64(
                rng.random::<f64>() * 0.2 - 0.1,
                rng.random::<f64>() * 0.2 - 0.1,
            )
        };

        // members one and two carry repeated eigenvalues on different index
        // partitions; member three is nondegenerate
        let a = [
            c64(1.0, 1.0) + jitter(&mut rng),
            c64(-2.0, 0.5) + jitter(&mut rng),
        ];
        let b = [
            c64(3.0, -1.0) + jitter(&mut rng),
            c64(0.5, 2.0) + jitter(&mut rng),
        ];
        let c: Vec<_> = (0..n)
            .map(|t| c64(1.5 * t as f64 - 2.0, -(t as f64)) + jitter(&mut rng))
            .collect();
        let spectra: [Vec<_>; 3] = [
            (0..n).map(|t| a[t / 2 % 2]).collect(),
            (0..n).map(|t| b[t % 2]).collect(),
            c,
        ];
        let family: Vec<CMatrix> = spectra
            .iter()
            .map(|eigs| {
                let d = CMatrix::from_fn(n, n, |r, s| if r == s { eigs[r] } else { c64(0.0, 0.0) });
                &basis * d * basis.adjoint()
            })
            .collect();

        let joint = simultaneous_diagonalize(&family, &tols, &mut rng).unwrap();
        worst = worst.max(joint.residual);
    }
    report(
        "6 (degenerate joint diagonalization)",
        worst <= 1e-9,
        &format!("100 trials, worst residual {worst:.3e}"),
    );
}

#[test]
fn criterion_7_spectral_primitives() {
    let tols = Tolerances::default();
    let mut worst_eig = 0.0_f64;
    let mut worst_sqrt = 0.0_f64;
    let mut ok = true;
    for trial in 0..100u64 {
        let n = 2 + (trial as usize % 11);
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + trial);
        let g = gaussian_matrix(n, n, &mut rng);
        let h = match trial % 4 {
            // indefinite Hermitian, full-rank PSD, rank-deficient PSD,
            // degenerate diagonal
            0 => (&g + g.adjoint()) * c64(0.5, 0.0),
            1 => &g * g.adjoint() + CMatrix::identity(n, n) * c64(0.01, 0.0),
            2 => {
                let thin = gaussian_matrix(n, n.div_ceil(2), &mut rng);
                &thin * thin.adjoint()
            }
            _ => CMatrix::from_fn(n, n, |r, s| {
                if r == s {
                    c64((r / 2) as f64, 0.0)
                } else {
                    c64(0.0, 0.0)
                }
            }),
        };

        let eig = hermitian_eig(&h).unwrap();
        let lambda = CMatrix::from_fn(n, n, |r, s| {
            if r == s {
                c64(eig.eigenvalues[r], 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        worst_eig = worst_eig.max(rel_err(
            &(&eig.eigenvectors * lambda * eig.eigenvectors.adjoint()),
            &h,
        ));

        let r = rank(&h, tols.rank_rel_tol);
        let kernel = kernel_basis(&h, tols.rank_rel_tol);
        ok &= r + kernel.len() == n;
        let scale = h.norm().max(1.0);
        for k in &kernel {
            ok &= (&h * k).norm() <= 1e-9 * scale;
        }

        if trial % 4 == 1 {
            let (sqrt, inv_sqrt) = psd_sqrt_invsqrt(&h, &tols).unwrap();
            worst_sqrt = worst_sqrt.max(rel_err(&(&sqrt * &sqrt), &h));
            worst_sqrt = worst_sqrt.max(rel_err(&(&sqrt * inv_sqrt), &CMatrix::identity(n, n)));
        }
    }
    ok &= worst_eig <= 1e-10 && worst_sqrt <= 1e-10;
    report(
        "7 (spectral primitives)",
        ok,
        &format!(
            "100 fixtures, worst eig recon {worst_eig:.3e}, worst sqrt recon {worst_sqrt:.3e}"
        ),
    );
}

#[test]
fn criterion_8_cli_suite() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str], d: &Path| {
        Command::new(env!("CARGO_BIN_EXE_pptsep"))
            .args(args)
            .current_dir(d)
            .output()
            .expect("binary should run")
            .status
            .code()
            .expect("process should exit normally")
    };

    let mut ok = true;
    ok &= run(
        &[
            "generate",
            "--dims",
            "2,2,3",
            "--seed",
            "19",
            "-o",
            "state.json",
        ],
        d,
    ) == 0;
    ok &= run(&["decompose", "state.json", "-o", "cert.json"], d) == 0;
    ok &= run(&["verify", "state.json", "cert.json"], d) == 0;

    let mut cert: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("cert.json")).unwrap()).unwrap();
    let weight = &mut cert["verdict"]["SEPARABLE"]["terms"][0]["weight"];
    *weight = serde_json::json!(weight.as_f64().unwrap() * 1.01);
    std::fs::write(d.join("tampered.json"), serde_json::to_vec(&cert).unwrap()).unwrap();
    ok &= run(&["verify", "state.json", "tampered.json"], d) == 2;

    pptsep::io::save_state(
        &d.join("bell.json"),
        &oracle::bell_projector(),
        Default::default(),
    )
    .unwrap();
    ok &= run(&["decompose", "bell.json", "-o", "bell_cert.json"], d) == 3;

    let elapsed = start.elapsed();
    ok &= elapsed.as_secs() < 30;
    report(
        "8 (command-line pipeline)",
        ok,
        &format!(
            "generate/decompose/verify/tamper/refute in {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_9_local_unitary_invariance() {
    let tols = Tolerances::default();
    let config = AnalyzeConfig::default();
    let mut ok = true;
    for i in 0..50 {
        let (shape, form) = batch_case(i);
        let rho = form.assemble(&tols).unwrap().normalize().unwrap().0;
        let before = analyze(&rho, &config).tag();

        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i as u64);
        let locals: Vec<CMatrix> = shape
            .front_dims()
            .iter()
            .map(|&k| haar_unitary(k, &mut rng))
            .collect();
        let rotated = pptsep::multilinear::apply_local(&rho, &locals, &tols).unwrap();
        let tail_u = haar_unitary(shape.tail_dim(), &mut rng);
        let embed = kron(
            &CMatrix::identity(shape.front_size(), shape.front_size()),
            &tail_u,
        );
        let rotated = DensityMatrix::new(
            shape.clone(),
            &embed * rotated.matrix() * embed.adjoint(),
            &tols,
        )
        .unwrap();

        let after = analyze(&rotated, &config).tag();
        if before != after {
            eprintln!("state {i}: verdict changed {before} -> {after}");
            ok = false;
        }
        ok &= before == "SEPARABLE";
    }
    report(
        "9 (local unitary invariance)",
        ok,
        "50 states, front and tail rotations",
    );
}
