//! End-to-end runs of the `fact` binary on a small synthesized problem.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use fact_core::model::ModelBundle;
use fact_core::MaskVector;
use serde_json::Value;

const SEED: &str = "5";

/// Four well-separated clusters over six informative and four noise columns;
/// trains in a couple of seconds.
const SMALL: &[&str] = &[
    "--set",
    "dataset.synth.n_centers=4",
    "--set",
    "dataset.synth.informative=6",
    "--set",
    "dataset.synth.noise=4",
    "--set",
    "dataset.synth.points_per_center=400",
    "--set",
    "architecture.encoder=[12,6]",
    "--set",
    "architecture.predictor=[6]",
];

fn fact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fact"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small(command: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--seed", SEED, "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    fact(&args)
}

fn ok(output: Output) -> Output {
    assert!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn gen_synth_is_byte_reproducible_with_two_cost_ramps() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(fact(&["gen-synth", "--seed", "7", "--out", dir.path().to_str().unwrap()]));
    }
    for file in ["synthesized.csv", "costs.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
    let rows = read_csv(&a.path().join("synthesized.csv"));
    assert_eq!(rows.len(), 16000);
    assert_eq!(rows[0].len(), 65);

    let manifest: Value = serde_json::from_slice(&fs::read(a.path().join("costs.json")).unwrap()).unwrap();
    let costs = manifest["costs"].as_object().unwrap();
    let cost = |j: usize| costs[&format!("f{j}")].as_f64().unwrap();
    let expected: Vec<f64> = (1..=32).chain(1..=32).map(f64::from).collect();
    assert_eq!((0..64).map(cost).collect::<Vec<_>>(), expected);
}

#[test]
fn training_is_reproducible_and_logs_a_monotone_best() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let report: Value = serde_json::from_slice(&ok(small("train", a.path(), &[])).stdout).unwrap();
    assert!(report["test_accuracy"].as_f64().unwrap() > 0.9, "{report}");
    ok(small("train", b.path(), &[]));
    for file in ["autoencoder.json", "predictor.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join("bundle").join(file)).unwrap(),
            fs::read(b.path().join("bundle").join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let log = read_csv(&a.path().join("training_log.csv"));
    assert!(log.iter().any(|r| r["phase"] == "autoencoder"));
    assert!(log.iter().any(|r| r["phase"] == "predictor"));
    for phase in ["autoencoder", "predictor"] {
        let best: Vec<f64> = log
            .iter()
            .filter(|r| r["phase"] == phase)
            .map(|r| r["best_objective"].parse().unwrap())
            .collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]), "{phase} best objective rose");
    }

    // reloading and re-saving changes neither the files nor the outputs
    let bundle = ModelBundle::load(&a.path().join("bundle")).unwrap();
    let copy = tempfile::tempdir().unwrap();
    bundle.save(copy.path()).unwrap();
    let reloaded = ModelBundle::load(copy.path()).unwrap();
    let x = vec![0.3; bundle.n_features()];
    for k in [MaskVector::all_known(x.len()), MaskVector::all_unknown(x.len())] {
        assert_eq!(bundle.predict(&x, &k).unwrap(), reloaded.predict(&x, &k).unwrap());
    }
    assert_eq!(bundle.fingerprint(), reloaded.fingerprint());
}

#[test]
fn simulate_writes_a_curve_per_policy_and_the_cost_fraction_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(small("train", dir.path(), &[]));
    let summary: Value = serde_json::from_slice(&ok(small("simulate", dir.path(), &[])).stdout).unwrap();

    let curves: Vec<String> = fs::read_dir(dir.path().join("curves"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(curves.len(), 3, "{curves:?}");
    for policy in ["fact", "random", "static"] {
        assert!(curves.contains(&format!("{policy}.csv")));
    }
    assert_eq!(summary["cost_fractions"].as_array().unwrap().len(), 5);
    let finals: Vec<f64> = ["fact", "random", "static"]
        .iter()
        .map(|p| {
            let rows = read_csv(&dir.path().join("curves").join(format!("{p}.csv")));
            rows.last().unwrap()["accuracy"].parse().unwrap()
        })
        .collect();
    // every policy ends with all features known, hence the same predictions
    assert!(finals.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12), "{finals:?}");
    for p in summary["policies"].as_array().unwrap() {
        assert_eq!(p["accuracy_at_fraction"].as_array().unwrap().len(), 5);
    }
    let fact = &summary["policies"][0];
    let random = &summary["policies"][1];
    assert!(fact["auacc"].as_f64().unwrap() >= random["auacc"].as_f64().unwrap() - 0.02);
}

#[test]
fn order_matrix_and_sweep_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(small("train", dir.path(), &[]));
    ok(small("order-matrix", dir.path(), &["--set", "order_matrix.instances=7"]));
    let rows = read_csv(&dir.path().join("order_matrix.csv"));
    assert_eq!(rows.len(), 7);
    for row in &rows {
        let mut ranks: Vec<usize> = row
            .iter()
            .filter(|(k, _)| *k != "instance")
            .map(|(_, v)| v.parse().unwrap())
            .filter(|&r| r > 0)
            .collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=ranks.len()).collect::<Vec<_>>());
    }

    ok(small("beta-sweep", dir.path(), &["--set", "sweep.alphas=[1.5,3.5]"]));
    let sweep = read_csv(&dir.path().join("beta_sweep.csv"));
    assert_eq!(sweep.len(), 2);
    assert_eq!(sweep[1]["alpha"], "3.5");
    assert!(dir.path().join("sweep/alpha_3.5_beta_1.5/bundle/manifest.json").exists());
}

#[test]
fn csv_round_trip_through_gen_synth_trains() {
    let dir = tempfile::tempdir().unwrap();
    ok(small("gen-synth", dir.path(), &[]));
    let csv = dir.path().join("synthesized.csv");
    let manifest = dir.path().join("costs.json");
    let source = format!(
        r#"dataset={{"kind":"csv","path":"{}","target":"target","manifest":"{}"}}"#,
        csv.display(),
        manifest.display()
    );
    let out = dir.path().join("from_csv");
    let report: Value = serde_json::from_slice(
        &ok(fact(&[
            "train",
            "--seed",
            SEED,
            "--out",
            out.to_str().unwrap(),
            "--set",
            &source,
            "--set",
            "architecture.encoder=[12,6]",
            "--set",
            "architecture.predictor=[6]",
        ]))
        .stdout,
    )
    .unwrap();
    assert!(report["test_accuracy"].as_f64().unwrap() > 0.9, "{report}");
    let bundle = ModelBundle::load(&out.join("bundle")).unwrap();
    assert_eq!(bundle.units().costs(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // missing seed
    assert_eq!(fact(&["train", "--out", out]).status.code(), Some(2));
    // unknown key and malformed override
    assert_eq!(fact(&["train", "--seed", "1", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(fact(&["train", "--seed", "1", "--set", "seed"]).status.code(), Some(2));
    // invalid hyperparameter
    assert_eq!(small("train", dir.path(), &["--set", "optimizer.beta1=1.5"]).status.code(), Some(2));
    // missing config, bundle and dataset files
    let missing = dir.path().join("absent.json");
    assert_eq!(fact(&["train", "--config", missing.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(small("simulate", dir.path(), &[]).status.code(), Some(4));
    let csv = r#"dataset={"kind":"csv","path":"/nonexistent/data.csv","target":"y"}"#;
    assert_eq!(fact(&["train", "--seed", "1", "--set", csv]).status.code(), Some(4));
    // divergence
    let diverge = small("train", dir.path(), &["--set", "optimizer.learning_rate=1e300"]);
    assert_eq!(diverge.status.code(), Some(3), "{}", String::from_utf8_lossy(&diverge.stderr));
    // a bundle trained on other data is refused
    ok(small("train", dir.path(), &[]));
    let mut other_seed = vec!["simulate", "--seed", "6", "--out", out];
    other_seed.extend_from_slice(SMALL);
    let refused = fact(&other_seed);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("different data"));
}

#[test]
fn serve_answers_health_and_model_requests() {
    let dir = tempfile::tempdir().unwrap();
    ok(small("train", dir.path(), &[]));
    let mut child = Command::new(env!("CARGO_BIN_EXE_fact"))
        .args(["serve", "--seed", SEED, "--out", dir.path().to_str().unwrap(), "--port", "0"])
        .env("RUST_LOG", "info")
        .env("NO_COLOR", "1")
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let addr = loop {
        let mut line = String::new();
        assert!(stderr.read_line(&mut line).unwrap() > 0, "server exited before listening");
        if let Some(rest) = line.split("listening on http://").nth(1) {
            break rest.trim().to_string();
        }
    };
    let get = |path: &str| -> Value {
        let mut s = TcpStream::connect(&addr).unwrap();
        write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
        let mut text = String::new();
        s.read_to_string(&mut text).unwrap();
        assert!(text.starts_with("HTTP/1.1 200"), "{text}");
        serde_json::from_str(text.split("\r\n\r\n").nth(1).unwrap()).unwrap()
    };
    let health = get("/v1/health");
    let model = get("/v1/model");
    child.kill().unwrap();
    child.wait().unwrap();

    assert_eq!(health["status"], "ok");
    assert_eq!(health["schema_version"], 1);
    let bundle = ModelBundle::load(&dir.path().join("bundle")).unwrap();
    assert_eq!(model["fingerprint"], bundle.fingerprint());
    assert_eq!(model["dataset_fingerprint"], bundle.manifest.dataset_fingerprint);
    assert_eq!(model["units"].as_array().unwrap().len(), bundle.units().len());
    assert_eq!(model["classes"].as_array().unwrap().len(), bundle.n_classes());
}
