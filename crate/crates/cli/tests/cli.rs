//! Behavioral checks for the `ladi` binary: JSON outputs, exit codes, and
//! the usage/domain error split, driven against the shipped fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ladi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ladi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_fixture_config(args: &[&str]) -> Output {
    let config = fixtures().join("ladi.json");
    let mut full = vec!["--config", config.to_str().unwrap()];
    full.extend_from_slice(args);
    ladi(&full)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn fixture_path(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_string()
}

#[test]
fn grammar_check_reports_the_grammar_shape() {
    let out = with_fixture_config(&["grammar", "check", &fixture_path("scene.g")]);
    let v = stdout_json(&out);
    assert_eq!(v["ok"], true);
    assert_eq!(v["start"], "S");
    assert_eq!(v["nonterminals"], 4);
    assert_eq!(v["terminals"], 6);
    assert_eq!(v["productions"], 9);
    assert_eq!(v["nullable_start"], false);
}

#[test]
fn enumerate_lists_the_bounded_scene_language() {
    let out = with_fixture_config(&[
        "grammar",
        "enumerate",
        &fixture_path("scene.g"),
        "--max",
        "4",
    ]);
    let v = stdout_json(&out);
    let strings: Vec<String> = serde_json::from_value(v).unwrap();
    assert_eq!(strings.len(), 22);
    assert!(strings.contains(&"cat sitting next to dog".to_string()));
    assert!(!strings.contains(&"cat sitting jumping".to_string()));
}

#[test]
fn gen_grammar_only_emits_language_members() {
    let members = {
        let out = with_fixture_config(&[
            "grammar",
            "enumerate",
            &fixture_path("scene.g"),
            "--max",
            "4",
        ]);
        let v: Vec<String> = serde_json::from_value(stdout_json(&out)).unwrap();
        v
    };
    for seed in 0..10 {
        let seed = seed.to_string();
        let out = with_fixture_config(&[
            "gen",
            "grammar",
            &fixture_path("scene.g"),
            "--seed",
            &seed,
        ]);
        let v = stdout_json(&out);
        let text = v["text"].as_str().unwrap();
        assert!(members.contains(&text.to_string()), "seed {seed} produced {text:?}");
    }
}

#[test]
fn prompt_build_emits_the_checklist_prompt_byte_exactly() {
    let out = with_fixture_config(&["prompt", "build", &fixture_path("steampunk.json")]);
    let v = stdout_json(&out);
    assert_eq!(
        v["prompt"].as_str().unwrap(),
        "A steampunk explorer with mechanical limbs, wearing leather and gears, standing \
         amidst a mysterious, dense jungle with exotic flora and fauna, digital painting, \
         neo-Victorian, adventure-themed, inspired by the styles of H.R. Giger and Brian \
         Froud, DeviantArt, highly detailed with sharp focus, with a backdrop of an ancient \
         temple and steampunk airships in the sky, muted earth tones with bursts of vibrant \
         color, dappled sunlight filtering through dense foliage"
    );
}

#[test]
fn prompt_travel_keeps_the_anchor_in_every_frame() {
    let out = with_fixture_config(&[
        "prompt",
        "travel",
        "--anchor",
        "sleek silver spaceship",
        "--stages",
        &fixture_path("stages.json"),
        "--frames",
        "1,15,30",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["anchor"], "sleek silver spaceship");
    let frames = v["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 3);
    let indices: Vec<u64> = frames.iter().map(|f| f["index"].as_u64().unwrap()).collect();
    assert_eq!(indices, vec![1, 15, 30]);
    for frame in frames {
        let prompt = frame["prompt"].as_str().unwrap();
        assert!(
            prompt.to_lowercase().contains("sleek silver spaceship"),
            "frame lost the anchor: {prompt:?}"
        );
    }
}

#[test]
fn gen_beam_hypotheses_satisfy_every_constraint() {
    let out = with_fixture_config(&[
        "gen",
        "beam",
        "--constraints",
        &fixture_path("beam_constraints.json"),
        "--max-tokens",
        "16",
    ]);
    let v = stdout_json(&out);
    let hyps = v["hypotheses"].as_array().unwrap();
    assert!(!hyps.is_empty());
    let winter = ["winter hues", "snowy palette", "icy blues"];
    for h in hyps {
        let text = h["text"].as_str().unwrap();
        assert!(text.contains("oak tree"), "missing anchor in {text:?}");
        assert!(
            winter.iter().any(|p| text.contains(p)),
            "missing winter phrase in {text:?}"
        );
        assert!(h["score"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn gen_smc_outputs_avoid_every_forbidden_word() {
    let out = with_fixture_config(&["gen", "smc", &fixture_path("surreal.json")]);
    let code = out.status.code().unwrap();
    assert!(
        code == 0 || code == 2,
        "smc must either finish or report budget exhaustion, got {code}"
    );
    let v: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is one JSON document");
    let outputs = v["outputs"].as_array().unwrap();
    for entry in outputs {
        let lower = entry["text"].as_str().unwrap().to_lowercase();
        for word in ["water", "lake", "ocean", "river", "sea", "red"] {
            assert!(!lower.contains(word), "{word:?} surfaced in {lower:?}");
        }
    }
    if code == 2 {
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(
            stderr.contains("still running"),
            "budget diagnostic missing from stderr: {stderr:?}"
        );
    }
}

#[test]
fn gen_guided_blacklist_keeps_the_word_out() {
    for seed in 0..20 {
        let seed = seed.to_string();
        let out = with_fixture_config(&[
            "gen",
            "guided",
            "the oak tree in",
            "--blacklist",
            "red",
            "--max-tokens",
            "12",
            "--seed",
            &seed,
        ]);
        let v = stdout_json(&out);
        let text = v["text"].as_str().unwrap();
        assert!(!text.contains("red"), "seed {seed}: \"red\" in {text:?}");
    }
}

#[test]
fn gen_guided_accepts_negative_demos() {
    let out = with_fixture_config(&[
        "gen",
        "guided",
        "a quiet village",
        "--negative",
        &fixture_path("demos.jsonl"),
        "--gamma",
        "2.0",
        "--max-tokens",
        "8",
    ]);
    let v = stdout_json(&out);
    assert!(v["text"].is_string());
}

/// Write a config into `dir` with absolute fixture paths, returning its path.
fn temp_config(dir: &Path) -> PathBuf {
    let config = serde_json::json!({
        "model": {
            "kind": "ngram",
            "corpus_path": fixture_path("corpus.txt"),
            "order": 2,
            "alpha": 0.005
        },
        "seed": 0,
        "store_path": dir.join("store.jsonl"),
        "palette_path": fixture_path("palettes.json"),
    });
    let path = dir.join("ladi.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn store_add_then_query_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let config = temp_config(dir.path());
    let examples = dir.path().join("new.jsonl");
    std::fs::write(
        &examples,
        "{\"id\": \"castle\", \"text\": \"A floating castle above the clouds\", \"tags\": [\"fantasy\"], \"quality\": 0.8}\n\
         {\"id\": \"harbor\", \"text\": \"Fishing boats in a misty harbor at dawn\", \"tags\": [], \"quality\": 0.6}\n",
    )
    .unwrap();

    let out = ladi(&[
        "--config",
        config.to_str().unwrap(),
        "store",
        "add",
        examples.to_str().unwrap(),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["added"], 2);
    assert_eq!(v["total"], 2);

    // Adding the same ids again is a domain failure, and the store is
    // left as it was.
    let again = ladi(&[
        "--config",
        config.to_str().unwrap(),
        "store",
        "add",
        examples.to_str().unwrap(),
    ]);
    assert_eq!(again.status.code(), Some(2));

    let query = ladi(&[
        "--config",
        config.to_str().unwrap(),
        "store",
        "query",
        "floating castle in the clouds",
        "--k",
        "1",
    ]);
    let v = stdout_json(&query);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["id"], "castle");
    assert!(results[0]["similarity"].as_f64().unwrap() > 0.5);
}

#[test]
fn missing_explicit_config_is_a_usage_error() {
    let out = ladi(&["--config", "/definitely/not/here.json", "grammar", "check", "x.g"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn model_commands_without_a_model_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("ladi.json");
    std::fs::write(&config, "{}").unwrap();
    let out = ladi(&[
        "--config",
        config.to_str().unwrap(),
        "gen",
        "grammar",
        &fixture_path("scene.g"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn unsatisfiable_beam_budget_is_a_domain_error() {
    let out = with_fixture_config(&[
        "gen",
        "beam",
        "--constraints",
        &fixture_path("beam_constraints.json"),
        "--max-tokens",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constraint"));
}

#[test]
fn unknown_palette_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let constraints = dir.path().join("constraints.json");
    std::fs::write(
        &constraints,
        "[{\"kind\": \"color_patterns\", \"palette\": \"sepia\"}]",
    )
    .unwrap();
    let out = with_fixture_config(&[
        "gen",
        "beam",
        "--constraints",
        constraints.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sepia"));
}

#[test]
fn malformed_grammar_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = dir.path().join("broken.g");
    std::fs::write(&grammar, "S ::= \"unclosed\n").unwrap();
    let out = with_fixture_config(&["grammar", "check", grammar.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero_and_unknown_flags_exit_one() {
    let help = ladi(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("Usage"));

    let bogus = ladi(&["--bogus"]);
    assert_eq!(bogus.status.code(), Some(1));
}
