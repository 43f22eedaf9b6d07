use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pptsep::canonical::{sample_canonical, CanonicalForm, SampleOptions};
use pptsep::io;
use pptsep::multilinear::{block, SystemShape};
use pptsep::numerics::{hermitian_eig, rank, Tolerances};
use pptsep::separability::{
    analyze, check_ppt, verify_certificate, AnalysisVerdict, AnalyzeConfig, PptMode, PptReport,
};
use pptsep::{c64, Error, Result};

/// Certify separability of PPT states of low tail rank, or refute it with a
/// partial-transpose witness.
#[derive(Parser)]
#[command(name = "pptsep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random canonical form and write the assembled state,
    /// normalized to unit trace.
    Generate {
        /// Comma-separated dimensions, front subsystems first, tail last
        /// (e.g. 2,2,3 for two qubits against a 3-dimensional tail).
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// RNG seed; equal seeds give byte-identical output files.
        #[arg(long)]
        seed: u64,
        /// Condition-number target for the sampled top block.
        #[arg(long, default_value_t = 100.0)]
        cond: f64,
        /// Output state file.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the canonical form of the normalized state.
        #[arg(long, value_name = "PATH")]
        emit_canonical: Option<PathBuf>,
    },
    /// Check positivity of partial transposes. Exits 0 if every checked
    /// transpose is PSD, 2 otherwise.
    Check {
        state: PathBuf,
        /// Check every bipartition instead of only single subsystems.
        #[arg(long)]
        all_bipartitions: bool,
    },
    /// Run the full analysis and write a certificate. Exits 0 SEPARABLE,
    /// 3 NOT_PPT, 4 RANK_CONDITION_UNMET, 5 INCONCLUSIVE.
    Decompose {
        state: PathBuf,
        /// Output certificate file (written for every verdict).
        #[arg(short, long)]
        output: PathBuf,
        /// Product-basis search attempts before giving up.
        #[arg(long, default_value_t = 64)]
        attempts: usize,
        /// RNG seed for basis search and diagonalization probes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the reconstruction residual tolerance.
        #[arg(long, value_name = "TOL")]
        tol_residual: Option<f64>,
        /// Compress the tail onto the support of the reduced tail state
        /// when the state rank is below the tail dimension.
        #[arg(long)]
        tail_compress: bool,
    },
    /// Re-audit a certificate against a state. Exits 0 on pass, 2 on fail.
    Verify {
        state: PathBuf,
        certificate: PathBuf,
    },
    /// Print a structural summary of a state.
    Inspect { state: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate {
            dims,
            seed,
            cond,
            output,
            emit_canonical,
        } => generate(&dims, seed, cond, &output, emit_canonical.as_deref()),
        Command::Check {
            state,
            all_bipartitions,
        } => {
            let rho = io::load_state(&state)?;
            let mode = if all_bipartitions {
                PptMode::AllBipartitions
            } else {
                PptMode::SingleSubsystems
            };
            let report = check_ppt(&rho, mode, &Tolerances::default())?;
            print_ppt_report(&report);
            Ok(if report.passed { 0 } else { 2 })
        }
        Command::Decompose {
            state,
            output,
            attempts,
            seed,
            tol_residual,
            tail_compress,
        } => {
            let rho = io::load_state(&state)?;
            let mut config = AnalyzeConfig {
                attempts,
                seed,
                tail_compression: tail_compress,
                ..AnalyzeConfig::default()
            };
            if let Some(tol) = tol_residual {
                config.tolerances.residual_tol = tol;
            }
            let verdict = analyze(&rho, &config);
            io::save_certificate(
                &output,
                &io::certificate_file_for(&verdict, rho.shape().dims()),
            )?;
            print_verdict(&verdict);
            Ok(match verdict {
                AnalysisVerdict::Separable(_) => 0,
                AnalysisVerdict::NotPpt { .. } => 3,
                AnalysisVerdict::RankConditionUnmet { .. } => 4,
                AnalysisVerdict::Inconclusive { .. } => 5,
            })
        }
        Command::Verify { state, certificate } => {
            let rho = io::load_state(&state)?;
            let cert_file = io::load_certificate(&certificate)?;
            let io::VerdictRecord::Separable(record) = &cert_file.verdict else {
                return Err(Error::MalformedCertificate(format!(
                    "certificate verdict is {}, only SEPARABLE certificates can be audited",
                    verdict_name(&cert_file.verdict)
                )));
            };
            let cert = io::separable_record_to_certificate(record);
            match verify_certificate(&rho, &cert, &Tolerances::default()) {
                Ok(check) if check.passed => {
                    println!(
                        "verification passed: residual {:.3e} within {:.3e}",
                        check.residual, cert.tolerances.residual_tol
                    );
                    Ok(0)
                }
                Ok(check) => {
                    println!(
                        "verification FAILED: residual {:.3e} exceeds {:.3e}",
                        check.residual, cert.tolerances.residual_tol
                    );
                    Ok(2)
                }
                Err(Error::MalformedCertificate(msg)) => {
                    println!("verification FAILED: {msg}");
                    Ok(2)
                }
                Err(other) => Err(other),
            }
        }
        Command::Inspect { state } => {
            inspect(&state)?;
            Ok(0)
        }
    }
}

fn generate(
    dims: &[usize],
    seed: u64,
    cond: f64,
    output: &std::path::Path,
    emit: Option<&std::path::Path>,
) -> Result<u8> {
    let shape = SystemShape::from_dims(dims)?;
    let tols = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let options = SampleOptions {
        cond_target: cond,
        ..SampleOptions::default()
    };
    let form = sample_canonical(&shape, &mut rng, &options);
    let (rho, trace) = form.assemble(&tols)?.normalize()?;

    let mut metadata = BTreeMap::new();
    metadata.insert("generator".to_string(), "pptsep generate".to_string());
    metadata.insert("seed".to_string(), seed.to_string());
    metadata.insert("cond".to_string(), format!("{cond}"));
    io::save_state(output, &rho, metadata)?;
    println!(
        "wrote {} ({} x {}, trace normalized)",
        output.display(),
        rho.matrix().nrows(),
        rho.matrix().ncols()
    );

    if let Some(path) = emit {
        // the canonical form of rho/t keeps the level operators and divides
        // the top block by t
        let scaled = CanonicalForm::from_parts_unchecked(
            form.shape().clone(),
            form.level_ops().to_vec(),
            form.top_block() / c64(trace, 0.0),
        );
        io::save_canonical_form(path, &scaled)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn subsystems_label(subsystems: &[usize]) -> String {
    let inner: Vec<String> = subsystems.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

fn print_ppt_report(report: &PptReport) {
    for entry in &report.entries {
        println!(
            "transpose on {}: witness eigenvalue {:+.6e} ({})",
            subsystems_label(&entry.subsystems),
            entry.witness_eigenvalue,
            if entry.is_psd { "PSD" } else { "NOT PSD" }
        );
    }
    println!("verdict: {}", if report.passed { "PPT" } else { "NOT PPT" });
}

fn print_verdict(verdict: &AnalysisVerdict) {
    match verdict {
        AnalysisVerdict::Separable(cert) => println!(
            "verdict: SEPARABLE ({} terms, reconstruction residual {:.3e})",
            cert.ensemble.terms.len(),
            cert.reconstruction_residual
        ),
        AnalysisVerdict::NotPpt {
            subsystems,
            witness_eigenvalue,
            ..
        } => println!(
            "verdict: NOT_PPT (transpose on {}, witness eigenvalue {:+.6e})",
            subsystems_label(subsystems),
            witness_eigenvalue
        ),
        AnalysisVerdict::RankConditionUnmet {
            state_rank,
            tail_dim,
            ..
        } => {
            println!("verdict: RANK_CONDITION_UNMET (rank {state_rank}, tail dimension {tail_dim})")
        }
        AnalysisVerdict::Inconclusive { reason, .. } => {
            println!("verdict: INCONCLUSIVE ({reason})")
        }
    }
}

fn verdict_name(record: &io::VerdictRecord) -> &'static str {
    match record {
        io::VerdictRecord::Separable(_) => "SEPARABLE",
        io::VerdictRecord::NotPpt(_) => "NOT_PPT",
        io::VerdictRecord::RankConditionUnmet(_) => "RANK_CONDITION_UNMET",
        io::VerdictRecord::Inconclusive(_) => "INCONCLUSIVE",
    }
}

fn inspect(path: &std::path::Path) -> Result<()> {
    let tols = Tolerances::default();
    let rho = io::load_state(path)?;
    let shape = rho.shape();
    let total = shape.total_dim();
    let state_rank = rank(rho.matrix(), tols.rank_rel_tol);

    println!(
        "dims: {:?} (front {:?}, tail {})",
        shape.dims(),
        shape.front_dims(),
        shape.tail_dim()
    );
    println!("size: {total} x {total}");
    println!("trace: {:.12}", rho.trace());
    println!(
        "rank: {state_rank}, kernel dimension: {}",
        total - state_rank
    );

    let eig = hermitian_eig(rho.matrix())?;
    let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    println!("spectrum: min {min:+.6e}, max {max:+.6e}");

    println!(
        "diagonal block ranks (tail dimension {}):",
        shape.tail_dim()
    );
    for b in shape.front_index_iter() {
        let blk = block(&rho, &b, &b)?;
        println!("  {:?}: {}", b, rank(&blk, tols.rank_rel_tol));
    }
    Ok(())
}
