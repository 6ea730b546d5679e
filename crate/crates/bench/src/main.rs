use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use polarbf_bench::commands::{self, FrameOutputs};
use polarbf_bench::manifest::{parse_list, RunManifest};

#[derive(Parser)]
#[command(name = "polarbf", version, about = "Polar BP bit-flipping benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and label the train and test sets, then write the coverage report.
    GenDataset(Shared),
    /// Train the CNN on the correctable frames of the train set.
    Train(Shared),
    /// Cumulative flip accuracy of CS-BF and CNN-BF on the test set.
    EvalAccuracy(Shared),
    /// Block error rate of plain BP, CS-BF and CNN-BF on fresh frames.
    EvalBler(Shared),
    /// Mean flip attempts of CS-BF and CNN-BF on fresh frames.
    EvalAttempts(Shared),
    /// Critical-set coverage of the stored test set.
    Coverage(Shared),
    /// Run the built-in oracle checks.
    Selftest,
    /// Print the effective manifest as JSON.
    ShowManifest(Shared),
}

#[derive(Args)]
struct Shared {
    /// JSON run manifest; defaults apply when omitted.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated SNR points in dB.
    #[arg(long)]
    snr_list: Option<String>,
    /// Failed-frame quota per SNR for gen-dataset, fresh frames per SNR for
    /// the BLER and attempt evaluations.
    #[arg(long)]
    frames_per_snr: Option<u64>,
    /// Comma-separated flip budgets.
    #[arg(long)]
    tmax: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Shared {
    fn manifest(&self, command: &str) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::load(p)?,
            None => RunManifest::default(),
        };
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(s) = &self.snr_list {
            m.channel.snr_db = parse_list(s)?;
        }
        if let Some(n) = self.frames_per_snr {
            if command == "gen-dataset" {
                m.dataset.train_per_snr = n as usize;
                m.dataset.test_per_snr = n as usize;
            } else {
                m.eval.frames_per_snr = n;
            }
        }
        if let Some(t) = &self.tmax {
            m.eval.t_max = parse_list(t)?;
        }
        if let Some(o) = &self.out {
            m.out_dir = o.clone();
        }
        if let Some(t) = self.threads {
            m.threads = t;
        }
        m.validate()?;
        Ok(m)
    }
}

fn run(cli: Cli) -> Result<()> {
    let log = &mut std::io::stdout();
    match cli.command {
        Command::GenDataset(s) => commands::gen_dataset(&s.manifest("gen-dataset")?, log).map(drop),
        Command::Train(s) => commands::train(&s.manifest("train")?, log).map(drop),
        Command::EvalAccuracy(s) => commands::eval_accuracy(&s.manifest("eval-accuracy")?, log).map(drop),
        Command::EvalBler(s) => {
            let outputs = FrameOutputs { bler: true, attempts: false };
            commands::eval_frames(&s.manifest("eval-bler")?, outputs, log).map(drop)
        }
        Command::EvalAttempts(s) => {
            let outputs = FrameOutputs { bler: false, attempts: true };
            commands::eval_frames(&s.manifest("eval-attempts")?, outputs, log).map(drop)
        }
        Command::Coverage(s) => commands::coverage(&s.manifest("coverage")?, log).map(drop),
        Command::Selftest => commands::selftest(log).map(drop),
        Command::ShowManifest(s) => {
            println!("{}", serde_json::to_string_pretty(&s.manifest("show-manifest")?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
