//! Adapters connect the pipeline to speech enhancement (SE) and speech
//! recognition (ASR) systems without linking against them.
//!
//! Three tiny SE baselines ship builtin (`identity`, `oracle`, `specsub`);
//! everything else — real neural enhancers, real recognizers — plugs in as
//! an external command template. SE commands read `{in}` and must write a
//! 16 kHz mono WAV to `{out}`; ASR commands read `{in}` and print the
//! transcript to stdout. Commands run under a timeout and have their
//! stderr captured for error reporting.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::enhance::{se_spectral_subtraction, EnhanceError, SpecSubParams};
use crate::oa::aligned_len;
use crate::wav::{read_wav, write_wav, WavEncoding, WavError, Waveform};

/// Default wall-clock budget for one external adapter invocation.
pub const DEFAULT_ADAPTER_TIMEOUT: Duration = Duration::from_secs(300);

/// How often a running adapter command is polled for completion.
const POLL_INTERVAL: Duration = Duration::from_millis(10);

/// Longest stderr excerpt kept in an error message.
const STDERR_EXCERPT_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter spec {text:?} must start with \"builtin:\" or \"cmd:\"")]
    BadSpec { text: String },
    #[error("unknown builtin adapter {name:?}; available: identity, oracle, specsub")]
    UnknownBuiltin { name: String },
    #[error("command template after \"cmd:\" is empty")]
    EmptyTemplate,
    #[error("{role} command template must contain the {placeholder} placeholder")]
    MissingPlaceholder { role: AdapterRole, placeholder: &'static str },
    #[error("ASR command template must not contain {{out}}; the transcript is read from stdout")]
    UnexpectedOutPlaceholder,
    #[error("builtin adapters implement enhancement only; ASR needs a cmd:<template> spec")]
    NoBuiltinAsr,
    #[error("builtin:oracle needs a clean reference recording")]
    MissingCleanReference,
    #[error("clean reference length {clean_len} differs from noisy length {noisy_len} by more than 1%")]
    LengthMismatch { clean_len: usize, noisy_len: usize },
    #[error("failed to spawn adapter command {program:?}: {source}")]
    SpawnFailed {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed while waiting for adapter command: {source}")]
    WaitFailed {
        #[source]
        source: std::io::Error,
    },
    #[error("adapter command exited with {code}; stderr: {stderr}")]
    CommandFailed { code: String, stderr: String },
    #[error("adapter command still running after the {}s timeout and was killed", timeout.as_secs_f64())]
    TimedOut { timeout: Duration },
    #[error("adapter command exited successfully but did not create {path}")]
    OutputMissing { path: String },
    #[error("adapter output {path} is not a decodable 16 kHz mono WAV: {source}")]
    UndecodableOutput {
        path: String,
        #[source]
        source: WavError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Enhance(#[from] EnhanceError),
}

/// Which pipeline slot an adapter fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterRole {
    Se,
    Asr,
}

impl fmt::Display for AdapterRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterRole::Se => "SE",
            AdapterRole::Asr => "ASR",
        })
    }
}

/// A parsed adapter specification.
///
/// Command templates are split on whitespace, so individual arguments
/// cannot contain spaces; `{in}`/`{out}` may appear anywhere inside an
/// argument (e.g. `--output={out}`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterSpec {
    /// Copies the noisy input through unchanged.
    BuiltinIdentity,
    /// Returns the clean reference; the upper bound for any enhancer.
    BuiltinOracle,
    /// Magnitude spectral subtraction (see [`crate::enhance`]).
    BuiltinSpecsub,
    /// External command, pre-split into argv tokens.
    Command(Vec<String>),
}

impl AdapterSpec {
    /// Parses `builtin:identity`, `builtin:oracle`, `builtin:specsub`, or
    /// `cmd:<template>` and checks the template placeholders required by
    /// `role`.
    pub fn parse(text: &str, role: AdapterRole) -> Result<Self, AdapterError> {
        if let Some(name) = text.strip_prefix("builtin:") {
            let spec = match name {
                "identity" => AdapterSpec::BuiltinIdentity,
                "oracle" => AdapterSpec::BuiltinOracle,
                "specsub" => AdapterSpec::BuiltinSpecsub,
                _ => return Err(AdapterError::UnknownBuiltin { name: name.to_string() }),
            };
            if role == AdapterRole::Asr {
                return Err(AdapterError::NoBuiltinAsr);
            }
            Ok(spec)
        } else if let Some(template) = text.strip_prefix("cmd:") {
            let argv: Vec<String> = template.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(AdapterError::EmptyTemplate);
            }
            let has = |ph: &str| argv.iter().any(|tok| tok.contains(ph));
            if !has("{in}") {
                return Err(AdapterError::MissingPlaceholder { role, placeholder: "{in}" });
            }
            match role {
                AdapterRole::Se if !has("{out}") => {
                    return Err(AdapterError::MissingPlaceholder { role, placeholder: "{out}" })
                }
                AdapterRole::Asr if has("{out}") => return Err(AdapterError::UnexpectedOutPlaceholder),
                _ => {}
            }
            Ok(AdapterSpec::Command(argv))
        } else {
            Err(AdapterError::BadSpec { text: text.to_string() })
        }
    }

    /// The canonical spec string, suitable for reports and logs.
    pub fn describe(&self) -> String {
        match self {
            AdapterSpec::BuiltinIdentity => "builtin:identity".to_string(),
            AdapterSpec::BuiltinOracle => "builtin:oracle".to_string(),
            AdapterSpec::BuiltinSpecsub => "builtin:specsub".to_string(),
            AdapterSpec::Command(argv) => format!("cmd:{}", argv.join(" ")),
        }
    }
}

fn substitute(argv: &[String], in_path: &Path, out_path: Option<&Path>) -> Vec<String> {
    argv.iter()
        .map(|tok| {
            let mut t = tok.replace("{in}", &in_path.display().to_string());
            if let Some(out) = out_path {
                t = t.replace("{out}", &out.display().to_string());
            }
            t
        })
        .collect()
}

fn drain_on_thread(
    stream: Option<impl Read + Send + 'static>,
) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut stream) = stream {
            let _ = stream.read_to_end(&mut buf);
        }
        buf
    })
}

fn excerpt(text: &str) -> String {
    let trimmed = text.trim_end();
    if trimmed.chars().count() <= STDERR_EXCERPT_CHARS {
        trimmed.to_string()
    } else {
        let mut cut: String = trimmed.chars().take(STDERR_EXCERPT_CHARS).collect();
        cut.push_str(" [...]");
        cut
    }
}

/// Waits for `child` under a deadline and returns its captured stdout.
fn wait_with_timeout(mut child: Child, timeout: Duration) -> Result<String, AdapterError> {
    // Pipes are drained on background threads so a chatty command cannot
    // deadlock against a full pipe buffer while we poll for exit.
    let stdout = drain_on_thread(child.stdout.take());
    let stderr = drain_on_thread(child.stderr.take());
    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = stdout.join();
                    let _ = stderr.join();
                    return Err(AdapterError::TimedOut { timeout });
                }
                std::thread::sleep(POLL_INTERVAL);
            }
            Err(source) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(AdapterError::WaitFailed { source });
            }
        }
    };
    let stdout = String::from_utf8_lossy(&stdout.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&stderr.join().unwrap_or_default()).into_owned();
    if !status.success() {
        let code = match status.code() {
            Some(code) => format!("status {code}"),
            None => "a signal".to_string(),
        };
        return Err(AdapterError::CommandFailed { code, stderr: excerpt(&stderr) });
    }
    Ok(stdout)
}

fn run_command(argv: &[String], timeout: Duration) -> Result<String, AdapterError> {
    let child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| AdapterError::SpawnFailed { program: argv[0].clone(), source })?;
    wait_with_timeout(child, timeout)
}

/// Runs one speech-enhancement adapter: reads `noisy_path` and produces an
/// enhanced recording at `out_path`.
///
/// `clean_path` is consulted only by `builtin:oracle`. External commands
/// are killed after `timeout`, and their output file is decoded once to
/// catch adapters that write something other than a valid 16 kHz mono WAV.
pub fn run_se(
    spec: &AdapterSpec,
    noisy_path: &Path,
    clean_path: Option<&Path>,
    out_path: &Path,
    timeout: Duration,
) -> Result<(), AdapterError> {
    match spec {
        AdapterSpec::BuiltinIdentity => {
            read_wav::<f64>(noisy_path)?;
            std::fs::copy(noisy_path, out_path)
                .map_err(|source| AdapterError::Io { path: out_path.display().to_string(), source })?;
            Ok(())
        }
        AdapterSpec::BuiltinOracle => {
            let clean_path = clean_path.ok_or(AdapterError::MissingCleanReference)?;
            let noisy: Waveform<f64> = read_wav(noisy_path)?;
            let clean: Waveform<f64> = read_wav(clean_path)?;
            aligned_len(clean.len(), noisy.len()).map_err(|_| AdapterError::LengthMismatch {
                clean_len: clean.len(),
                noisy_len: noisy.len(),
            })?;
            std::fs::copy(clean_path, out_path)
                .map_err(|source| AdapterError::Io { path: out_path.display().to_string(), source })?;
            Ok(())
        }
        AdapterSpec::BuiltinSpecsub => {
            let noisy: Waveform<f64> = read_wav(noisy_path)?;
            let enhanced = se_spectral_subtraction(&noisy, &SpecSubParams::default())?;
            write_wav(&enhanced, out_path, WavEncoding::Float32)?;
            Ok(())
        }
        AdapterSpec::Command(argv) => {
            let argv = substitute(argv, noisy_path, Some(out_path));
            run_command(&argv, timeout)?;
            if !out_path.exists() {
                return Err(AdapterError::OutputMissing { path: out_path.display().to_string() });
            }
            read_wav::<f64>(out_path).map_err(|source| AdapterError::UndecodableOutput {
                path: out_path.display().to_string(),
                source,
            })?;
            Ok(())
        }
    }
}

/// Runs one ASR adapter on `wav_path` and returns the transcript printed
/// to its stdout (whitespace-trimmed, may be empty).
pub fn run_asr(spec: &AdapterSpec, wav_path: &Path, timeout: Duration) -> Result<String, AdapterError> {
    let argv = match spec {
        AdapterSpec::Command(argv) => substitute(argv, wav_path, None),
        _ => return Err(AdapterError::NoBuiltinAsr),
    };
    let stdout = run_command(&argv, timeout)?;
    Ok(stdout.trim().to_string())
}
