//! Behavioral tests of the `oabridge` binary: exit codes, determinism,
//! and the documented subcommand surface.

use std::path::Path;
use std::process::{Command, Output};

use oabridge::bridge::{save_model, BridgeModel, FeatureConfig};
use oabridge::spectral::StftConfig;
use oabridge::wav::read_wav;
use oabridge::Waveform64;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oabridge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch the oabridge binary")
}

fn assert_status(out: &Output, want: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "{context}: expected exit {want}, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let subcommands =
        ["synth", "gen", "train", "predict", "process", "eval", "wer"];
    let out = run_in(dir.path(), &["--help"]);
    assert_status(&out, 0, "--help");
    for sub in subcommands {
        let out = run_in(dir.path(), &[sub, "--help"]);
        assert_status(&out, 0, &format!("{sub} --help"));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--"), "{sub} help lists no flags");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown flag.
    let out = run_in(dir.path(), &["gen", "--bogus-flag", "1"]);
    assert_status(&out, 1, "unknown flag");
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    // Missing required flags.
    let out = run_in(dir.path(), &["predict"]);
    assert_status(&out, 1, "missing required flags");
    // Unknown subcommand.
    let out = run_in(dir.path(), &["transmogrify"]);
    assert_status(&out, 1, "unknown subcommand");
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Nonexistent model file.
    let out = run_in(
        dir.path(),
        &["predict", "--model", "missing.json", "--noisy", "a.wav", "--enhanced", "b.wav"],
    );
    assert_status(&out, 2, "missing model");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    // Syntactically valid flags, bad adapter name.
    run_in(dir.path(), &["gen", "--kind", "white", "--duration", "0.2", "--seed", "1", "--out", "x.wav"]);
    let out = run_in(
        dir.path(),
        &[
            "train", "--manifest", "nope.jsonl", "--se", "builtin:wiener", "--out", "m.json",
        ],
    );
    assert_status(&out, 2, "unknown builtin adapter");
    assert!(String::from_utf8_lossy(&out.stderr).contains("wiener"));
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["speech", "white", "pink"] {
        let gen = |name: &str, seed: &str| {
            let out = run_in(
                dir.path(),
                &["gen", "--kind", kind, "--duration", "0.3", "--seed", seed, "--out", name],
            );
            assert_status(&out, 0, &format!("gen {kind}"));
            std::fs::read(dir.path().join(name)).unwrap()
        };
        let a = gen("a.wav", "7");
        let b = gen("b.wav", "7");
        let c = gen("c.wav", "8");
        assert_eq!(a, b, "{kind}: same seed must give identical bytes");
        assert_ne!(a, c, "{kind}: different seeds must differ");
    }
}

#[test]
fn synth_writes_one_record_per_clean_snr_pair() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("clean")).unwrap();
    std::fs::create_dir_all(dir.path().join("noise")).unwrap();
    for (name, kind, seed) in
        [("clean/a.wav", "speech", "1"), ("clean/b.wav", "speech", "2"), ("noise/n.wav", "pink", "3")]
    {
        let out = run_in(
            dir.path(),
            &["gen", "--kind", kind, "--duration", "0.4", "--seed", seed, "--out", name],
        );
        assert_status(&out, 0, name);
    }
    let out = run_in(
        dir.path(),
        &[
            "synth", "--clean-dir", "clean", "--noise-dir", "noise", "--snrs", "-6,6", "--seed",
            "0", "--out-dir", "mixes",
        ],
    );
    assert_status(&out, 0, "synth");
    let manifest_path = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert!(manifest_path.ends_with("manifest.jsonl"), "stdout: {manifest_path}");
    let manifest = std::fs::read_to_string(dir.path().join(&manifest_path)).unwrap();
    assert_eq!(manifest.lines().count(), 4, "2 clean files x 2 SNRs");
}

/// A model that always predicts S = bias = 0.5 regardless of features.
fn write_constant_model(path: &Path) {
    let model = BridgeModel::<f64>::initial(FeatureConfig::default(), StftConfig::default()).unwrap();
    save_model(&model, path).unwrap();
}

#[test]
fn process_with_identity_se_reproduces_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["gen", "--kind", "speech", "--duration", "0.5", "--seed", "4", "--out", "in.wav"],
    );
    assert_status(&out, 0, "gen");
    write_constant_model(&dir.path().join("model.json"));

    let out = run_in(
        dir.path(),
        &[
            "process", "--model", "model.json", "--se", "builtin:identity", "--in", "in.wav",
            "--out", "out.wav",
        ],
    );
    assert_status(&out, 0, "process");
    let line = String::from_utf8_lossy(&out.stdout);
    assert!(line.starts_with("S=") && line.contains("S_prime="), "stdout: {line}");

    // x̂ == x, so the blend is x for any coefficient; the only loss is the
    // PCM16 quantization of the output file.
    let input: Waveform64 = read_wav(dir.path().join("in.wav")).unwrap();
    let output: Waveform64 = read_wav(dir.path().join("out.wav")).unwrap();
    assert_eq!(input.len(), output.len());
    let max_err = input
        .samples
        .iter()
        .zip(&output.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(max_err <= 1.0 / 32768.0 + 1e-12, "max error {max_err}");
}

#[test]
fn process_with_oracle_se_needs_a_clean_reference() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["gen", "--kind", "white", "--duration", "0.3", "--seed", "5", "--out", "in.wav"]);
    write_constant_model(&dir.path().join("model.json"));
    let out = run_in(
        dir.path(),
        &[
            "process", "--model", "model.json", "--se", "builtin:oracle", "--in", "in.wav",
            "--out", "out.wav",
        ],
    );
    assert_status(&out, 2, "oracle without --clean");
    assert!(String::from_utf8_lossy(&out.stderr).contains("clean reference"));

    // With --clean it succeeds.
    run_in(dir.path(), &["gen", "--kind", "white", "--duration", "0.3", "--seed", "6", "--out", "clean.wav"]);
    let out = run_in(
        dir.path(),
        &[
            "process", "--model", "model.json", "--se", "builtin:oracle", "--in", "in.wav",
            "--out", "out.wav", "--clean", "clean.wav",
        ],
    );
    assert_status(&out, 0, "oracle with --clean");
}

#[test]
fn wer_identical_files_print_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ref.tsv"), "u1\tthe quick brown fox\nu2\thello world\n").unwrap();
    std::fs::copy(dir.path().join("ref.tsv"), dir.path().join("hyp.tsv")).unwrap();
    let out = run_in(dir.path(), &["wer", "--ref", "ref.tsv", "--hyp", "hyp.tsv"]);
    assert_status(&out, 0, "wer identical");
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0.0\n");
}

#[test]
fn wer_counts_missing_hypotheses_as_deletions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ref.tsv"), "u1\tone two\nu2\tthree four\n").unwrap();
    std::fs::write(dir.path().join("hyp.tsv"), "u1\tone two\n").unwrap();
    let out = run_in(dir.path(), &["wer", "--ref", "ref.tsv", "--hyp", "hyp.tsv"]);
    assert_status(&out, 0, "wer with a missing hypothesis");
    // u2 scores as two deletions over four reference words.
    let value: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((value - 0.5).abs() < 1e-12, "wer {value}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("no hypothesis for u2"));
}

#[test]
fn wer_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ref.tsv"), "u1 no tab here\n").unwrap();
    std::fs::write(dir.path().join("hyp.tsv"), "u1\tx\n").unwrap();
    let out = run_in(dir.path(), &["wer", "--ref", "ref.tsv", "--hyp", "hyp.tsv"]);
    assert_status(&out, 2, "malformed reference line");
    assert!(String::from_utf8_lossy(&out.stderr).contains("id<TAB>text"));
}
