//! `oabridge` — command-line front end for the observation-adding bridge.
//!
//! Exit status: 0 on success, 1 on a usage error (unknown or missing
//! flags), 2 on a runtime error (bad files, failing adapters, ...).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use oabridge::adapter::{run_se, AdapterRole, AdapterSpec, DEFAULT_ADAPTER_TIMEOUT};
use oabridge::bridge::{load_model, save_model, train, FeatureConfig, TrainConfig};
use oabridge::harness::{
    evaluate, train_items_from_manifest, write_record_dump, write_report, EvalOptions,
};
use oabridge::oa::oa_mix;
use oabridge::spectral::StftConfig;
use oabridge::synth::{gen_noise, gen_pseudo_speech, synth_dataset, NoiseKind};
use oabridge::wav::{read_wav, write_wav, WavEncoding};
use oabridge::wer::{normalize_text, wer, WerBreakdown};
use oabridge::Waveform64;

#[derive(Parser)]
#[command(
    name = "oabridge",
    version,
    about = "Observation-adding bridge between speech enhancement and ASR",
    long_about = "Estimates how much to trust an enhanced recording by comparing it \
                  against the noisy original in the STFT domain, then blends the two \
                  waveforms with the resulting coefficient. Includes dataset synthesis, \
                  bridge training, batch evaluation, and WER scoring."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// `builtin:identity | builtin:oracle | builtin:specsub | cmd:<template>`.
/// SE templates must contain `{in}` and `{out}`; ASR templates must
/// contain `{in}` and print the transcript to stdout.
const ADAPTER_HELP: &str = "Adapter spec: builtin:identity, builtin:oracle, builtin:specsub, \
                            or cmd:<template> ({in}/{out} placeholders)";

#[derive(Subcommand)]
enum Command {
    /// Mix every clean recording with random noise at each SNR and write
    /// the mixes plus a manifest.jsonl; prints the manifest path.
    Synth {
        /// Directory of clean 16 kHz mono WAV files
        #[arg(long, value_name = "DIR")]
        clean_dir: PathBuf,
        /// Directory of noise 16 kHz mono WAV files
        #[arg(long, value_name = "DIR")]
        noise_dir: PathBuf,
        /// Comma-separated SNRs in dB, e.g. -6,0,6
        #[arg(long, value_name = "CSV", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        snrs: Vec<f64>,
        /// Seed for the noise-file draws
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
        /// Output directory (created if missing)
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Generate a seeded test signal (pseudo-speech or noise) as a
    /// float32 WAV.
    Gen {
        /// Signal family to generate
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Duration in seconds
        #[arg(long, value_name = "S")]
        duration: f64,
        /// Generator seed
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
        /// Output WAV path
        #[arg(long, value_name = "F")]
        out: PathBuf,
    },
    /// Train the bridge on the manifest's pure clean (label 1) and pure
    /// noise (label 0) sources, enhanced by the given SE adapter.
    Train {
        /// Dataset manifest (JSON lines)
        #[arg(long, value_name = "F")]
        manifest: PathBuf,
        #[arg(long, value_name = "ADAPTER", help = ADAPTER_HELP)]
        se: String,
        /// Where the trained model JSON is written
        #[arg(long, value_name = "MODEL")]
        out: PathBuf,
        /// Learning rate
        #[arg(long, value_name = "LR", default_value_t = 1e-4)]
        lr: f64,
        /// Momentum coefficient in [0, 1)
        #[arg(long, value_name = "M", default_value_t = 0.9)]
        momentum: f64,
        /// Minibatch size
        #[arg(long, value_name = "B", default_value_t = 32)]
        batch: usize,
        /// Training epochs
        #[arg(long, value_name = "N", default_value_t = 50)]
        epochs: usize,
        /// Seed for shuffling and crop offsets
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
        /// Directory for enhanced training intermediates
        /// [default: <out>.work]
        #[arg(long, value_name = "DIR")]
        workdir: Option<PathBuf>,
    },
    /// Score one noisy/enhanced pair; prints `S=<v> S_prime=<v>`.
    Predict {
        /// Trained model JSON
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        /// Noisy recording
        #[arg(long, value_name = "F")]
        noisy: PathBuf,
        /// Enhanced recording
        #[arg(long, value_name = "F")]
        enhanced: PathBuf,
    },
    /// Run the full pipeline on one file: enhance, score, and blend;
    /// writes the blended PCM16 WAV and prints `S=<v> S_prime=<v>`.
    Process {
        /// Trained model JSON
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long, value_name = "ADAPTER", help = ADAPTER_HELP)]
        se: String,
        /// Input (noisy) recording
        #[arg(long = "in", value_name = "F")]
        input: PathBuf,
        /// Output (blended) recording
        #[arg(long = "out", value_name = "F")]
        output: PathBuf,
        /// Clean reference, required by builtin:oracle only
        #[arg(long, value_name = "F")]
        clean: Option<PathBuf>,
    },
    /// Evaluate a manifest: per-record enhance/score/blend (and ASR when
    /// given), aggregated into an SNR-binned JSON report; prints the
    /// report path.
    Eval {
        /// Trained model JSON
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        /// Dataset manifest (JSON lines)
        #[arg(long, value_name = "F")]
        manifest: PathBuf,
        #[arg(long, value_name = "ADAPTER", help = ADAPTER_HELP)]
        se: String,
        /// Optional ASR adapter (cmd:<template> printing the transcript)
        #[arg(long, value_name = "ADAPTER")]
        asr: Option<String>,
        /// Where the JSON report is written
        #[arg(long, value_name = "F")]
        report: PathBuf,
        /// Worker threads (results are identical for any value)
        #[arg(long, value_name = "K", default_value_t = 1)]
        jobs: usize,
        /// Directory for per-record intermediates [default: <report>.work]
        #[arg(long, value_name = "DIR")]
        workdir: Option<PathBuf>,
        /// Optional per-record JSON-lines dump
        #[arg(long, value_name = "F")]
        dump: Option<PathBuf>,
    },
    /// Score hypotheses against references (lines of `id<TAB>text`);
    /// prints the aggregate WER.
    Wer {
        /// Reference transcript file
        #[arg(long = "ref", value_name = "F")]
        reference: PathBuf,
        /// Hypothesis transcript file
        #[arg(long = "hyp", value_name = "F")]
        hypothesis: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum GenKind {
    /// Harmonic pseudo-speech with a syllabic envelope
    Speech,
    /// White Gaussian noise
    White,
    /// Pink (low-pass filtered) noise
    Pink,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth { clean_dir, noise_dir, snrs, seed, out_dir } => {
            let manifest = synth_dataset::<f64>(&clean_dir, &noise_dir, &snrs, seed, &out_dir)?;
            println!("{}", manifest.display());
        }
        Command::Gen { kind, duration, seed, out } => {
            let signal: Waveform64 = match kind {
                GenKind::Speech => gen_pseudo_speech(duration, seed)?,
                GenKind::White => gen_noise(duration, NoiseKind::White, seed)?,
                GenKind::Pink => gen_noise(duration, NoiseKind::Pink, seed)?,
            };
            write_wav(&signal, &out, WavEncoding::Float32)?;
        }
        Command::Train { manifest, se, out, lr, momentum, batch, epochs, seed, workdir } => {
            let se = AdapterSpec::parse(&se, AdapterRole::Se).context("invalid --se adapter")?;
            let workdir = workdir.unwrap_or_else(|| suffixed(&out, ".work"));
            let (items, warnings) =
                train_items_from_manifest(&manifest, &se, &workdir, DEFAULT_ADAPTER_TIMEOUT)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let cfg = TrainConfig {
                learning_rate: lr,
                momentum,
                batch_size: batch,
                epochs,
                seed,
                ..TrainConfig::default()
            };
            let outcome = train::<f64>(&items, &cfg, &FeatureConfig::default(), &StftConfig::default())?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            save_model(&outcome.model, &out)?;
            eprintln!(
                "trained on {} items for {} epochs; final epoch loss {:?}",
                items.len(),
                cfg.epochs,
                outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Predict { model, noisy, enhanced } => {
            let model = load_model::<f64>(&model)?;
            let noisy: Waveform64 = read_wav(&noisy)?;
            let enhanced: Waveform64 = read_wav(&enhanced)?;
            let pred = model.predict_pair(&noisy, &enhanced)?;
            if pred.silent {
                eprintln!("warning: no valid similarity frames (silent input); S is the model bias");
            }
            println!("S={:?} S_prime={:?}", pred.s, pred.s_prime);
        }
        Command::Process { model, se, input, output, clean } => {
            let model = load_model::<f64>(&model)?;
            let se = AdapterSpec::parse(&se, AdapterRole::Se).context("invalid --se adapter")?;
            let scratch = tempfile::tempdir().context("cannot create a scratch directory")?;
            let enhanced_path = scratch.path().join("enhanced.wav");
            run_se(&se, &input, clean.as_deref(), &enhanced_path, DEFAULT_ADAPTER_TIMEOUT)?;
            let noisy: Waveform64 = read_wav(&input)?;
            let enhanced: Waveform64 = read_wav(&enhanced_path)?;
            let pred = model.predict_pair(&noisy, &enhanced)?;
            if pred.silent {
                eprintln!("warning: no valid similarity frames (silent input); S is the model bias");
            }
            let mixed = oa_mix(&noisy, &enhanced, pred.s_prime)?;
            write_wav(&mixed, &output, WavEncoding::Pcm16)?;
            println!("S={:?} S_prime={:?}", pred.s, pred.s_prime);
        }
        Command::Eval { model, manifest, se, asr, report, jobs, workdir, dump } => {
            let model = load_model::<f64>(&model)?;
            let se = AdapterSpec::parse(&se, AdapterRole::Se).context("invalid --se adapter")?;
            let asr = asr
                .map(|a| AdapterSpec::parse(&a, AdapterRole::Asr).context("invalid --asr adapter"))
                .transpose()?;
            let workdir = workdir.unwrap_or_else(|| suffixed(&report, ".work"));
            let opts = EvalOptions { workdir, jobs, timeout: DEFAULT_ADAPTER_TIMEOUT };
            let out = evaluate(&manifest, &model, &se, asr.as_ref(), &opts)?;
            write_report(&out.report, &report)?;
            if let Some(dump) = dump {
                write_record_dump(&out.records, &dump)?;
            }
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "{} records, {} failed",
                out.report.records_total, out.report.records_failed
            );
            println!("{}", report.display());
        }
        Command::Wer { reference, hypothesis } => {
            let refs = read_transcript_file(&reference)?;
            let hyps = read_transcript_file(&hypothesis)?;
            let hyp_map: HashMap<&str, &str> =
                hyps.iter().map(|(id, text)| (id.as_str(), text.as_str())).collect();

            let mut subs = 0usize;
            let mut dels = 0usize;
            let mut ins = 0usize;
            let mut ref_words = 0usize;
            for (id, text) in &refs {
                let ref_tokens = normalize_text(text);
                if ref_tokens.is_empty() {
                    eprintln!("warning: reference {id} is empty after normalization; skipped");
                    continue;
                }
                let hyp_text = match hyp_map.get(id.as_str()) {
                    Some(h) => *h,
                    None => {
                        eprintln!("warning: no hypothesis for {id}; scoring against an empty one");
                        ""
                    }
                };
                let breakdown = wer(&ref_tokens, &normalize_text(hyp_text))?;
                subs += breakdown.substitutions;
                dels += breakdown.deletions;
                ins += breakdown.insertions;
                ref_words += breakdown.ref_words;
            }
            let ref_ids: std::collections::HashSet<&str> =
                refs.iter().map(|(id, _)| id.as_str()).collect();
            let unmatched = hyps.iter().filter(|(id, _)| !ref_ids.contains(id.as_str())).count();
            if unmatched > 0 {
                eprintln!("warning: {unmatched} hypothesis line(s) without a matching reference id");
            }
            if ref_words == 0 {
                bail!("no scorable reference lines in {}", reference.display());
            }
            println!("{:?}", WerBreakdown::from_counts(subs, dels, ins, ref_words).wer);
        }
    }
    Ok(())
}

/// `path` with `suffix` appended to its final component.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Reads a transcript file of `id<TAB>text` lines (blank lines ignored).
fn read_transcript_file(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut seen = std::collections::HashSet::new();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, transcript)) = line.split_once('\t') else {
            bail!("{}:{}: expected id<TAB>text", path.display(), i + 1);
        };
        if !seen.insert(id.to_string()) {
            bail!("{}:{}: duplicate id {id:?}", path.display(), i + 1);
        }
        lines.push((id.to_string(), transcript.to_string()));
    }
    Ok(lines)
}
