use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use framedup::harness::{
    self, corpus, ExperimentConfig, ATTACKED_FSEQ, ATTACKED_WAV, LIVE_FSEQ, LIVE_WAV, REFERENCE_CSV,
};
use framedup::Error;

#[derive(Parser)]
#[command(name = "framedup", version, about = "Frame-duplication attack simulator and ENF detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sets both the ENF and the noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MediaInputs {
    /// Video input; defaults to the attacked stream in the output directory,
    /// or the live one when no attacked stream exists.
    #[arg(long)]
    fseq: Option<PathBuf>,
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Ignore video and work on audio alone.
    #[arg(long)]
    audio_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Render the scene to live FSEQ/WAV and the reference ENF.
    Synth(Common),
    /// Run the replay attack over live media.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fseq: Option<PathBuf>,
        #[arg(long)]
        wav: Option<PathBuf>,
    },
    /// Estimate the ENF series of the audio and video streams.
    Extract {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        media: MediaInputs,
    },
    /// Extract and correlate against the reference, writing the report.
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        media: MediaInputs,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Synthesis, attack and detection with a run manifest.
    RunAll {
        #[command(flatten)]
        common: Common,
        /// Detect on the live media without attacking it.
        #[arg(long)]
        skip_attack: bool,
    },
    /// Evaluate a labeled corpus in memory and write a ROC curve CSV.
    Roc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        clean: u32,
        #[arg(long, default_value_t = 10)]
        attacked: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        thresholds: Vec<f64>,
    },
}

fn load(common: &Common) -> framedup::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        // An explicit --out is taken relative to the working directory.
        cfg.output_dir = std::path::absolute(out).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
    }
    if let Some(seed) = common.seed {
        cfg.seeds.enf = seed;
        cfg.seeds.noise = seed;
    }
    Ok(cfg)
}

fn default_media(cfg: &ExperimentConfig, media: &MediaInputs) -> (Option<PathBuf>, PathBuf) {
    let out = cfg.output_dir();
    let attacked = out.join(ATTACKED_WAV).is_file();
    let (f, w) = if attacked { (ATTACKED_FSEQ, ATTACKED_WAV) } else { (LIVE_FSEQ, LIVE_WAV) };
    let fseq = if media.audio_only {
        None
    } else {
        Some(media.fseq.clone().unwrap_or_else(|| out.join(f)))
    };
    (fseq, media.wav.clone().unwrap_or_else(|| out.join(w)))
}

fn run(cmd: Command) -> framedup::Result<()> {
    match cmd {
        Command::Synth(common) => {
            let cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            let s = harness::run_synth(&cfg).map_err(|e| e.in_stage("synth"))?;
            println!("{} frames, {} samples -> {}", s.frames, s.samples, cfg.output_dir().display());
        }
        Command::Attack { common, fseq, wav } => {
            let cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            let out = cfg.output_dir();
            let fseq = fseq.unwrap_or_else(|| out.join(LIVE_FSEQ));
            let wav = wav.unwrap_or_else(|| out.join(LIVE_WAV));
            let a = harness::run_attack(&cfg, &fseq, &wav).map_err(|e| e.in_stage("attack"))?;
            for (start, end) in a.summary.timeline.intervals() {
                println!("replay {start:.3}..{end:.3} s");
            }
            println!("{} events -> {}", a.summary.events.len(), a.events.display());
        }
        Command::Extract { common, media } => {
            let cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            let (fseq, wav) = default_media(&cfg, &media);
            let x = harness::run_extract(&cfg, fseq.as_deref(), &wav).map_err(|e| e.in_stage("extract"))?;
            println!("audio ENF -> {}", x.audio_csv.display());
            if let Some(v) = &x.video_csv {
                println!("video ENF -> {}", v.display());
            }
        }
        Command::Detect {
            common,
            media,
            reference,
        } => {
            let cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            let (fseq, wav) = default_media(&cfg, &media);
            let reference = reference.unwrap_or_else(|| cfg.output_dir().join(REFERENCE_CSV));
            let d = harness::run_detect(&cfg, fseq.as_deref(), &wav, &reference).map_err(|e| e.in_stage("detect"))?;
            print_verdict(&d.report.verdict.to_string(), &d.report_path);
        }
        Command::RunAll { common, skip_attack } => {
            let mut cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            cfg.skip_attack |= skip_attack;
            let m = harness::run_all(&cfg)?;
            print_verdict(&m.verdict.to_string(), &cfg.output_dir().join(harness::MANIFEST_JSON));
        }
        Command::Roc {
            common,
            clean,
            attacked,
            thresholds,
        } => {
            let cfg = load(&common).map_err(|e| e.in_stage("config"))?;
            cfg.validate().map_err(|e| e.in_stage("config"))?;
            let scenarios = corpus::corpus(clean, attacked);
            let (points, _) = corpus::sweep(&cfg, &scenarios, &thresholds).map_err(|e| e.in_stage("roc"))?;
            let out = cfg.output_dir();
            let path = out.join("roc.csv");
            std::fs::create_dir_all(&out)
                .and_then(|_| std::fs::File::create(&path))
                .map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })
                .and_then(|f| corpus::write_roc_csv(std::io::BufWriter::new(f), &points))
                .map_err(|e| e.in_stage("roc"))?;
            for p in &points {
                println!(
                    "threshold {:.2}: tpr {:.3} fpr {:.3}",
                    p.threshold, p.true_positive_rate, p.false_positive_rate
                );
            }
            println!("-> {}", path.display());
        }
    }
    Ok(())
}

fn print_verdict(verdict: &str, path: &Path) {
    println!("verdict: {verdict} ({})", path.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage().unwrap_or("unknown");
            eprintln!("error: {e}");
            eprintln!("failed stage: {stage}");
            ExitCode::from(1)
        }
    }
}
