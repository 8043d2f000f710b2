use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchorsdr::config::{CodeSpec, DecoderKind, ExperimentConfig, Extraction, ReceiverKind};
use anchorsdr::harness::{
    oracle_check, write_ber_csv, write_exit_csv, write_info_csv, Experiment, OracleSettings,
};
use anchorsdr::ldpc::write_alist;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anchorsdr", version, about = "Code-anchored SDR receivers for LDPC-coded MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER curve of one receiver.
    Ber(RunArgs),
    /// Extrinsic information transfer of one detector pass.
    Exit(RunArgs),
    /// Checks the relaxation and the list detector against exhaustive search.
    OracleCheck(OracleArgs),
    /// Writes a random regular LDPC code in alist format.
    GenCode(GenCodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Receiver {
    DisjointMlSdr,
    JointMlSdr,
    TurboMulti,
    TurboSingle,
    FullListTurbo,
    MlOracle,
}

impl From<Receiver> for ReceiverKind {
    fn from(r: Receiver) -> Self {
        match r {
            Receiver::DisjointMlSdr => Self::DisjointMlSdr,
            Receiver::JointMlSdr => Self::JointMlSdr,
            Receiver::TurboMulti => Self::TurboMulti,
            Receiver::TurboSingle => Self::TurboSingle,
            Receiver::FullListTurbo => Self::FullListTurbo,
            Receiver::MlOracle => Self::MlOracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractionArg {
    Direct,
    Rank1,
    Randomized,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    None,
    Bf,
    Spa,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    receiver: Option<Receiver>,
    #[arg(long, value_enum)]
    extraction: Option<ExtractionArg>,
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    #[arg(long)]
    max_codewords: Option<usize>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 2)]
    nt: usize,
    #[arg(long, default_value_t = 2)]
    nr: usize,
    /// SNR in dB; noiseless when absent.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GenCodeArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 128)]
    checks: usize,
    #[arg(long, default_value_t = 3)]
    column_weight: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

type Failure = Box<dyn std::error::Error>;

fn experiment_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => {
            let receiver = args.receiver.ok_or("either --config or --receiver is required")?;
            let snr = args.snr.clone().ok_or("either --config or --snr is required")?;
            ExperimentConfig::new(receiver.into(), snr)
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_db = snr.clone();
    }
    if let Some(r) = args.receiver {
        cfg.receiver = r.into();
    }
    if let Some(e) = args.extraction {
        cfg.extraction = match e {
            ExtractionArg::Direct => Extraction::Direct,
            ExtractionArg::Rank1 => Extraction::Rank1,
            ExtractionArg::Randomized => Extraction::Randomized,
        };
    }
    if let Some(d) = args.decoder {
        cfg.decoder = match d {
            DecoderArg::None => DecoderKind::None,
            DecoderArg::Bf => DecoderKind::Bf,
            DecoderArg::Spa => DecoderKind::Spa,
        };
    }
    if let Some(m) = args.max_codewords {
        cfg.trials.max_codewords = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".info.csv");
    PathBuf::from(name)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ber(args) => {
            let exp = Experiment::new(experiment_config(&args)?)?;
            let records = exp.run_ber()?;
            let mut out = output(args.out.as_deref())?;
            write_ber_csv(&records, &mut out)?;
            out.flush()?;
            if let Some(path) = &args.out {
                let mut info = output(Some(&sidecar(path)))?;
                write_info_csv(&records, &mut info)?;
                info.flush()?;
            }
        }
        Command::Exit(args) => {
            let exp = Experiment::new(experiment_config(&args)?)?;
            let records = exp.run_exit()?;
            let mut out = output(args.out.as_deref())?;
            write_exit_csv(&records, &mut out)?;
            out.flush()?;
        }
        Command::OracleCheck(args) => {
            let settings = OracleSettings {
                nt: args.nt,
                nr: args.nr,
                snr_db: args.snr,
                instances: args.instances,
                seed: args.seed,
            };
            let r = oracle_check(&settings, None)?;
            println!("instances={}", r.instances);
            println!("sdr_ml_matches={}", r.sdr_ml_matches);
            println!("solver_failures={}", r.solver_failures);
            println!("max_objective={:.3e}", r.max_objective);
            println!("max_list_full_diff={:.3e}", r.max_list_full_diff);
            if r.max_list_full_diff > 1e-12 {
                return Err("list and full-cube extrinsics disagree".into());
            }
        }
        Command::GenCode(args) => {
            let spec = CodeSpec {
                n: args.n,
                checks: args.checks,
                column_weight: args.column_weight,
                seed: args.seed,
                alist: None,
            };
            let code = spec.build()?;
            let mut out = output(args.out.as_deref())?;
            write_alist(&code, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
