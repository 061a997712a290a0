//! The evaluation harness: walks a manifest, runs the full
//! enhance → score → remix (→ recognize) pipeline per record, and
//! aggregates scores and word error rates into an SNR-binned report.
//!
//! One bad record never aborts a run — its error is captured in the
//! report's warnings and the record is counted in `records_failed`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{run_asr, run_se, AdapterError, AdapterSpec, DEFAULT_ADAPTER_TIMEOUT};
use crate::bridge::{BridgeModel, TrainItem};
use crate::manifest::{read_manifest, resolve_path, ManifestError, UtteranceRecord};
use crate::oa::oa_mix;
use crate::util::float_key;
use crate::wav::{read_wav, write_wav, WavEncoding, Waveform};
use crate::wer::{normalize_text, wer, WerBreakdown};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid evaluation options: {reason}")]
    InvalidOptions { reason: String },
    #[error("manifest contains no records")]
    EmptyManifest,
    #[error("manifest provides no clean or noise sources to train from")]
    NoTrainSources,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// Knobs for one evaluation run.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Where per-record intermediate files (enhanced and mixed WAVs) are
    /// written; created if missing.
    pub workdir: PathBuf,
    /// Worker threads processing records; results are identical for any
    /// value.
    pub jobs: usize,
    /// Per-adapter-invocation wall-clock budget.
    pub timeout: Duration,
}

impl EvalOptions {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        Self { workdir: workdir.into(), jobs: 1, timeout: DEFAULT_ADAPTER_TIMEOUT }
    }
}

/// Aggregate statistics of one SNR bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBinStats {
    pub count: usize,
    #[serde(rename = "mean_S")]
    pub mean_s: f64,
    #[serde(rename = "std_S")]
    pub std_s: f64,
    #[serde(rename = "mean_S_prime")]
    pub mean_s_prime: f64,
}

/// The JSON evaluation report.
///
/// `per_snr` (and `wer`, when ASR ran) are keyed by the SNR in dB rendered
/// as a string — `"-6"`, `"0"`, `"2.5"` — in ascending numeric order, with
/// records lacking an SNR collected under `"unbinned"` at the end. Only
/// successfully processed records contribute to statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// SE adapter spec string.
    pub se: String,
    /// ASR adapter spec string, if recognition ran.
    pub asr: Option<String>,
    pub records_total: usize,
    pub records_failed: usize,
    pub per_snr: IndexMap<String, SnrBinStats>,
    /// Per-bin word error rates; `None` without an ASR adapter, and bins
    /// where no record had a usable transcript are omitted.
    pub wer: Option<IndexMap<String, WerBreakdown>>,
    pub warnings: Vec<String>,
}

/// Per-record result of a successful pipeline pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordStats {
    /// Pre-clip agreement score.
    pub s: f64,
    /// Clipped mixing coefficient.
    pub s_prime: f64,
    pub wer: Option<WerBreakdown>,
    pub warnings: Vec<String>,
}

/// One manifest record's outcome; failures carry the full error chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordOutcome {
    pub id: String,
    pub snr_db: Option<f64>,
    pub result: Result<RecordStats, String>,
}

/// Everything [`evaluate`] produces: the aggregate report plus the
/// per-record outcomes in manifest order.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub records: Vec<RecordOutcome>,
}

/// Flattens an error and its source chain into one line.
pub(crate) fn error_chain(err: &(dyn std::error::Error + 'static)) -> String {
    let mut text = err.to_string();
    let mut cur = err.source();
    while let Some(source) = cur {
        text.push_str(": ");
        text.push_str(&source.to_string());
        cur = source.source();
    }
    text
}

/// Maps a record id onto a safe filename fragment.
fn sanitize_id(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    if safe.is_empty() {
        "record".to_string()
    } else {
        safe
    }
}

fn process_record(
    record: &UtteranceRecord,
    base: &Path,
    model: &BridgeModel<f64>,
    se: &AdapterSpec,
    asr: Option<&AdapterSpec>,
    opts: &EvalOptions,
) -> RecordOutcome {
    RecordOutcome {
        id: record.id.clone(),
        snr_db: record.snr_db,
        result: process_record_inner(record, base, model, se, asr, opts),
    }
}

fn process_record_inner(
    record: &UtteranceRecord,
    base: &Path,
    model: &BridgeModel<f64>,
    se: &AdapterSpec,
    asr: Option<&AdapterSpec>,
    opts: &EvalOptions,
) -> Result<RecordStats, String> {
    let err_str = |e: &(dyn std::error::Error + 'static)| error_chain(e);
    let noisy_path = resolve_path(base, &record.noisy_path);
    let clean_path = record.clean_path.as_deref().map(|p| resolve_path(base, p));
    let stem = sanitize_id(&record.id);

    let enhanced_path = opts.workdir.join(format!("{stem}__enhanced.wav"));
    run_se(se, &noisy_path, clean_path.as_deref(), &enhanced_path, opts.timeout)
        .map_err(|e| err_str(&e))?;

    let noisy: Waveform<f64> = read_wav(&noisy_path).map_err(|e| err_str(&e))?;
    let enhanced: Waveform<f64> = read_wav(&enhanced_path).map_err(|e| err_str(&e))?;

    let mut warnings = Vec::new();
    let pred = model.predict_pair(&noisy, &enhanced).map_err(|e| err_str(&e))?;
    if pred.silent {
        warnings.push("no valid similarity frames (silent input); S is the model bias".to_string());
    }

    let mixed = oa_mix(&noisy, &enhanced, pred.s_prime).map_err(|e| err_str(&e))?;
    let mixed_path = opts.workdir.join(format!("{stem}__mixed.wav"));
    write_wav(&mixed, &mixed_path, WavEncoding::Pcm16).map_err(|e| err_str(&e))?;

    let wer_stats = match asr {
        None => None,
        Some(asr_spec) => {
            let hyp = run_asr(asr_spec, &mixed_path, opts.timeout).map_err(|e| err_str(&e))?;
            let ref_tokens = record.transcript.as_deref().map(normalize_text).unwrap_or_default();
            if ref_tokens.is_empty() {
                warnings.push("missing or empty transcript; WER skipped".to_string());
                None
            } else {
                let hyp_tokens = normalize_text(&hyp);
                Some(wer(&ref_tokens, &hyp_tokens).map_err(|e| err_str(&e))?)
            }
        }
    };

    Ok(RecordStats { s: pred.s, s_prime: pred.s_prime, wer: wer_stats, warnings })
}

fn aggregate(outcomes: &[RecordOutcome], se: &AdapterSpec, asr: Option<&AdapterSpec>) -> EvalReport {
    let mut warnings = Vec::new();
    let mut records_failed = 0usize;
    for outcome in outcomes {
        match &outcome.result {
            Ok(stats) => {
                for w in &stats.warnings {
                    warnings.push(format!("record {}: {w}", outcome.id));
                }
            }
            Err(reason) => {
                records_failed += 1;
                warnings.push(format!("record {} failed: {reason}", outcome.id));
            }
        }
    }

    let successes: Vec<(&RecordOutcome, &RecordStats)> =
        outcomes.iter().filter_map(|o| o.result.as_ref().ok().map(|s| (o, s))).collect();

    // Bin keys: distinct SNRs ascending, then "unbinned" for records
    // without one.
    let mut snrs: Vec<f64> = successes.iter().filter_map(|(o, _)| o.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup_by(|a, b| a == b);
    let mut bins: Vec<(String, Vec<&RecordStats>)> = snrs
        .into_iter()
        .map(|snr| {
            let members = successes
                .iter()
                .filter(|(o, _)| o.snr_db == Some(snr))
                .map(|(_, s)| *s)
                .collect();
            (float_key(snr), members)
        })
        .collect();
    let unbinned: Vec<&RecordStats> =
        successes.iter().filter(|(o, _)| o.snr_db.is_none()).map(|(_, s)| *s).collect();
    if !unbinned.is_empty() {
        bins.push(("unbinned".to_string(), unbinned));
    }

    let mut per_snr = IndexMap::new();
    let mut wer_map: IndexMap<String, WerBreakdown> = IndexMap::new();
    for (key, members) in &bins {
        let n = members.len() as f64;
        let mean_s = members.iter().map(|s| s.s).sum::<f64>() / n;
        let var = members.iter().map(|s| (s.s - mean_s).powi(2)).sum::<f64>() / n;
        let mean_s_prime = members.iter().map(|s| s.s_prime).sum::<f64>() / n;
        per_snr.insert(
            key.clone(),
            SnrBinStats { count: members.len(), mean_s, std_s: var.sqrt(), mean_s_prime },
        );

        let scored: Vec<&WerBreakdown> = members.iter().filter_map(|s| s.wer.as_ref()).collect();
        if !scored.is_empty() {
            let mut subs = 0usize;
            let mut dels = 0usize;
            let mut ins = 0usize;
            let mut ref_words = 0usize;
            for b in scored {
                subs += b.substitutions;
                dels += b.deletions;
                ins += b.insertions;
                ref_words += b.ref_words;
            }
            wer_map.insert(key.clone(), WerBreakdown::from_counts(subs, dels, ins, ref_words));
        }
    }

    EvalReport {
        se: se.describe(),
        asr: asr.map(AdapterSpec::describe),
        records_total: outcomes.len(),
        records_failed,
        per_snr,
        wer: asr.is_some().then_some(wer_map),
        warnings,
    }
}

/// Runs the pipeline over every record of a manifest.
///
/// Per record: SE-enhance the noisy recording, score the pair with the
/// bridge, blend noisy and enhanced with the clipped coefficient, write
/// both intermediates into the workdir, and (with an ASR adapter)
/// recognize the blend and score it against the record transcript.
/// Records are processed by `opts.jobs` workers; outputs and report are
/// byte-identical regardless of the worker count.
pub fn evaluate(
    manifest_path: &Path,
    model: &BridgeModel<f64>,
    se: &AdapterSpec,
    asr: Option<&AdapterSpec>,
    opts: &EvalOptions,
) -> Result<EvalOutput, HarnessError> {
    if opts.jobs == 0 {
        return Err(HarnessError::InvalidOptions { reason: "jobs must be at least 1".into() });
    }
    let records_in = read_manifest(manifest_path)?;
    if records_in.is_empty() {
        return Err(HarnessError::EmptyManifest);
    }
    std::fs::create_dir_all(&opts.workdir)
        .map_err(|source| HarnessError::Io { path: opts.workdir.display().to_string(), source })?;

    let mut by_stem: HashMap<String, &str> = HashMap::new();
    for record in &records_in {
        if let Some(prev) = by_stem.insert(sanitize_id(&record.id), &record.id) {
            return Err(HarnessError::InvalidOptions {
                reason: format!(
                    "record ids {prev:?} and {:?} collide after filename sanitization",
                    record.id
                ),
            });
        }
    }

    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let n = records_in.len();
    let outcomes: Vec<RecordOutcome> = if opts.jobs == 1 || n <= 1 {
        records_in.iter().map(|r| process_record(r, base, model, se, asr, opts)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<RecordOutcome>>> = (0..n).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..opts.jobs.min(n) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let outcome = process_record(&records_in[i], base, model, se, asr, opts);
                    *slots[i].lock().expect("result slot poisoned") = Some(outcome);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().expect("result slot poisoned").expect("worker skipped a record"))
            .collect()
    };

    let report = aggregate(&outcomes, se, asr);
    Ok(EvalOutput { report, records: outcomes })
}

/// Derives bridge training items from a manifest's source files.
///
/// Every distinct `clean_path` becomes a label-1 item and every distinct
/// `noise_path` a label-0 item (first-seen order). Each source is passed
/// through the SE adapter — it doubles as its own clean reference, which
/// is what `builtin:oracle` expects for a pure source — and sources the
/// adapter cannot process are skipped with a warning.
pub fn train_items_from_manifest(
    manifest_path: &Path,
    se: &AdapterSpec,
    workdir: &Path,
    timeout: Duration,
) -> Result<(Vec<TrainItem>, Vec<String>), HarnessError> {
    let records = read_manifest(manifest_path)?;
    if records.is_empty() {
        return Err(HarnessError::EmptyManifest);
    }
    std::fs::create_dir_all(workdir)
        .map_err(|source| HarnessError::Io { path: workdir.display().to_string(), source })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen: std::collections::HashSet<PathBuf> = std::collections::HashSet::new();
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for record in &records {
        let sources = [(&record.clean_path, 1.0f64), (&record.noise_path, 0.0f64)];
        for (maybe_path, label) in sources {
            let Some(path_str) = maybe_path else { continue };
            let src = resolve_path(base, path_str);
            if !seen.insert(src.clone()) {
                continue;
            }
            let stem = src
                .file_stem()
                .map(|s| sanitize_id(&s.to_string_lossy()))
                .unwrap_or_else(|| "source".to_string());
            let out = workdir.join(format!("train{:04}_{stem}__enhanced.wav", items.len()));
            match run_se(se, &src, Some(&src), &out, timeout) {
                Ok(()) => {
                    items.push(TrainItem { noisy_path: src, enhanced_path: out, label });
                }
                Err(e) => warnings.push(format!(
                    "training source {}: {}",
                    src.display(),
                    error_chain(&e)
                )),
            }
        }
    }
    if items.is_empty() {
        return Err(HarnessError::NoTrainSources);
    }
    Ok((items, warnings))
}

/// Writes the report as pretty-printed JSON (stable key order).
pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

#[derive(Serialize)]
struct DumpLine<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_db: Option<f64>,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "S_prime")]
    s_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    wer: Option<&'a WerBreakdown>,
}

/// Writes one JSON line per successfully processed record — the raw
/// material behind the report's aggregates.
pub fn write_record_dump(records: &[RecordOutcome], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut text = String::new();
    for outcome in records {
        if let Ok(stats) = &outcome.result {
            let line = DumpLine {
                id: &outcome.id,
                snr_db: outcome.snr_db,
                s: stats.s,
                s_prime: stats.s_prime,
                wer: stats.wer.as_ref(),
            };
            text.push_str(&serde_json::to_string(&line).expect("dump serialization cannot fail"));
            text.push('\n');
        }
    }
    std::fs::write(path, text)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok_outcome(id: &str, snr_db: Option<f64>, s: f64, s_prime: f64) -> RecordOutcome {
        RecordOutcome {
            id: id.to_string(),
            snr_db,
            result: Ok(RecordStats { s, s_prime, wer: None, warnings: vec![] }),
        }
    }

    #[test]
    fn sanitize_id_maps_unsafe_characters() {
        assert_eq!(sanitize_id("utt_0001__snr-6"), "utt_0001__snr-6");
        assert_eq!(sanitize_id("a/b c:d"), "a_b_c_d");
        assert_eq!(sanitize_id(""), "record");
    }

    #[test]
    fn bins_are_numerically_ordered_with_unbinned_last() {
        let outcomes = vec![
            ok_outcome("a", Some(12.0), 0.9, 0.9),
            ok_outcome("b", Some(-12.0), 0.2, 0.6),
            ok_outcome("c", Some(6.0), 0.8, 0.8),
            ok_outcome("d", None, 0.5, 0.6),
            ok_outcome("e", Some(-6.0), 0.4, 0.6),
            ok_outcome("f", Some(0.0), 0.6, 0.65),
        ];
        let report = aggregate(&outcomes, &AdapterSpec::BuiltinIdentity, None);
        let keys: Vec<&String> = report.per_snr.keys().collect();
        assert_eq!(keys, ["-12", "-6", "0", "6", "12", "unbinned"]);
        assert!(report.wer.is_none());
    }

    #[test]
    fn aggregate_statistics_and_failures() {
        let mut outcomes = vec![
            ok_outcome("a", Some(6.0), 0.8, 0.8),
            ok_outcome("b", Some(6.0), 0.6, 0.7),
            ok_outcome("c", Some(0.0), 0.5, 0.6),
        ];
        outcomes.push(RecordOutcome {
            id: "broken".to_string(),
            snr_db: Some(0.0),
            result: Err("no such file".to_string()),
        });
        let report = aggregate(&outcomes, &AdapterSpec::BuiltinSpecsub, None);
        assert_eq!(report.se, "builtin:specsub");
        assert_eq!(report.records_total, 4);
        assert_eq!(report.records_failed, 1);
        let bin6 = &report.per_snr["6"];
        assert_eq!(bin6.count, 2);
        assert!((bin6.mean_s - 0.7).abs() < 1e-12);
        assert!((bin6.std_s - 0.1).abs() < 1e-12);
        assert!((bin6.mean_s_prime - 0.75).abs() < 1e-12);
        assert!(report.warnings.iter().any(|w| w.contains("broken") && w.contains("no such file")));
    }

    #[test]
    fn wer_aggregation_sums_counts_per_bin() {
        let asr = AdapterSpec::Command(vec!["asr".to_string(), "{in}".to_string()]);
        let with_wer = |id: &str, snr: f64, subs: usize, dels: usize, ins: usize, refs: usize| {
            RecordOutcome {
                id: id.to_string(),
                snr_db: Some(snr),
                result: Ok(RecordStats {
                    s: 0.5,
                    s_prime: 0.6,
                    wer: Some(WerBreakdown::from_counts(subs, dels, ins, refs)),
                    warnings: vec![],
                }),
            }
        };
        let outcomes = vec![
            with_wer("a", 0.0, 1, 0, 0, 4),
            with_wer("b", 0.0, 0, 1, 1, 6),
            ok_outcome("c", Some(6.0), 0.9, 0.9), // no transcript: bin omitted from wer map
        ];
        let report = aggregate(&outcomes, &AdapterSpec::BuiltinIdentity, Some(&asr));
        assert_eq!(report.asr.as_deref(), Some("cmd:asr {in}"));
        let wer_map = report.wer.as_ref().unwrap();
        assert_eq!(wer_map.len(), 1);
        let bin = &wer_map["0"];
        assert_eq!((bin.substitutions, bin.deletions, bin.insertions, bin.ref_words), (1, 1, 1, 10));
        assert!((bin.wer - 0.3).abs() < 1e-12);
    }

    #[test]
    fn report_serde_round_trip() {
        let asr = AdapterSpec::Command(vec!["asr".to_string(), "{in}".to_string()]);
        let outcomes = vec![ok_outcome("a", Some(-6.0), 0.4, 0.6), ok_outcome("b", None, 0.7, 0.7)];
        let report = aggregate(&outcomes, &AdapterSpec::BuiltinOracle, Some(&asr));
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
