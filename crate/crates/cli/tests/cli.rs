use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ability-vi"))
        .args(args)
        .env_remove("ABILITY_VI_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir` except manifests, by relative path.
fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.file_name().unwrap().to_str().unwrap().starts_with("manifest") {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    cov / var
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[synth]\nn_teams = 6\nseasons = 1\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["synth", "--config", path_str(&config), "--seed", "1", "--out", path_str(out)]);
    }
    let (fa, fb) = (artifacts(&a), artifacts(&b));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("synth/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["synth"]["n_teams"], 6);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);

    // A different seed changes the data; rerunning needs --force.
    let c = dir.path().join("c");
    ok(&["synth", "--config", path_str(&config), "--seed", "2", "--out", path_str(&c)]);
    assert_ne!(artifacts(&c), fa);
    let again = run(&["synth", "--config", path_str(&config), "--seed", "1", "--out", path_str(&a)]);
    assert_eq!(again.status.code(), Some(1));
    ok(&["synth", "--config", path_str(&config), "--seed", "1", "--out", path_str(&a), "--force"]);
    assert_eq!(artifacts(&a), fb);
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    assert_eq!(run(&["synth", "--out", out]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(run(&["ingest", "--out", out, "--config", "/no/such/file.toml"]).status.code(), Some(1));
    assert_eq!(run(&["fit-ability", "--out", out, "--event-pair", "Shots,ShotStop"]).status.code(), Some(1));
    assert_eq!(run(&["rank", "--out", out, "--event-pair", "Shots"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    let bad = Command::new(env!("CARGO_BIN_EXE_ability-vi"))
        .args(["synth", "--seed", "1", "--out", out])
        .env("ABILITY_VI_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&run(&["synth", "--out", out]).stderr).to_string();
    assert!(msg.contains("seed"), "{msg}");
}

#[test]
fn evaluate_scores_perfect_predictions_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let predict = dir.path().join("predict");
    std::fs::create_dir_all(&predict).unwrap();
    let mut text = String::from("fixture_id,block,model,p_over,actual_over\n");
    for k in 0..20 {
        let over = k % 3 == 0;
        let p = if over { 0.6 + 0.01 * k as f64 } else { 0.1 + 0.01 * k as f64 };
        text.push_str(&format!("{},{},baseline,{p},{over}\n", k + 1, 1 + k % 2));
    }
    std::fs::write(predict.join("predictions.baseline.csv"), text).unwrap();
    ok(&["evaluate", "--out", path_str(dir.path())]);
    let mut auc = csv::Reader::from_path(dir.path().join("evaluate/auc.csv")).unwrap();
    let rows: Vec<(String, String, f64)> = auc
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string(), r[2].parse().unwrap())
        })
        .collect();
    for block in ["all", "1", "2"] {
        assert!(rows.iter().any(|(m, b, a)| m == "baseline" && b == block && *a == 1.0), "{rows:?}");
    }
    let mut roc = csv::Reader::from_path(dir.path().join("evaluate/roc.baseline.csv")).unwrap();
    assert_eq!(roc.headers().unwrap(), vec!["fpr", "tpr", "threshold"]);
    let corner = roc.records().map(|r| r.unwrap()).any(|r| {
        r[0].parse::<f64>().unwrap() == 0.0 && r[1].parse::<f64>().unwrap() == 1.0
    });
    assert!(corner, "no point at fpr 0, tpr 1");
}

fn ingest_config(dir: &Path, synth: &str, extra: &str) -> PathBuf {
    let config = dir.join("run.toml");
    let data = dir.join("synth");
    std::fs::write(
        &config,
        format!(
            "[cli]\nout = {out:?}\n\n[event-data]\nevents = {ev:?}\nfixtures = {fx:?}\nappearances = {ap:?}\ncolumns = [\"Shots\", \"ShotStop\"]\n\n[synth]\n{synth}\n{extra}",
            out = path_str(dir),
            ev = path_str(&data.join("events.csv")),
            fx = path_str(&data.join("fixtures.csv")),
            ap = path_str(&data.join("appearances.csv")),
        ),
    )
    .unwrap();
    config
}

#[test]
fn fitted_ranking_tracks_the_true_abilities() {
    let dir = tempfile::tempdir().unwrap();
    let config = ingest_config(dir.path(), "", "");
    let c = path_str(&config);
    ok(&["synth", "--config", c, "--seed", "1"]);
    ok(&["ingest", "--config", c]);
    ok(&["fit-ability", "--config", c, "--event-pair", "Shots,ShotStop"]);
    ok(&["rank", "--config", c, "--event-pair", "Shots,ShotStop", "--top-n", "100000"]);
    ok(&["simulate", "--config", c, "--event-pair", "Shots,ShotStop", "--seed", "3"]);

    let truth: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("synth/truth.json")).unwrap()).unwrap();
    for event in ["Shots", "ShotStop"] {
        let mut reader = csv::Reader::from_path(dir.path().join(format!("rank/ranking.{event}.csv"))).unwrap();
        let (mut fitted, mut actual) = (Vec::new(), Vec::new());
        for row in reader.deserialize::<BTreeMap<String, String>>() {
            let row = row.unwrap();
            if row["minutes_played"].parse::<f64>().unwrap() < 900.0 {
                continue;
            }
            fitted.push(-row["rank"].parse::<f64>().unwrap());
            actual.push(truth["deltas"][event][&row["player_id"]].as_f64().unwrap());
        }
        assert!(fitted.len() > 100);
        let rho = spearman(&actual, &fitted);
        assert!(rho >= 0.9, "{event}: Spearman {rho}");
    }
    let stats = std::fs::read_to_string(dir.path().join("simulate/box_stats.Shots-ShotStop.csv")).unwrap();
    // 20 teams, two event types, observed and simulated.
    assert_eq!(stats.lines().count(), 1 + 20 * 2 * 2);
}

#[test]
fn blocked_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let synth = "n_teams = 6\nseasons = 2\nchurn = 1\nblock_sizes = [10, 10, 10]\n";
    let goals = "\n[goals-hier]\nattack = [\"Shots\"]\ndefence = [\"ShotStop\"]\n\n[goals-hier.mcmc]\nn_draws = 400\nwarmup = 200\nthin = 1\n\n[variational]\nmax_iters = 500\n";
    let config = ingest_config(dir.path(), synth, goals);
    let c = path_str(&config);
    ok(&["synth", "--config", c, "--seed", "5"]);
    ok(&["ingest", "--config", c]);
    let blocks: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ingest/blocks.json")).unwrap()).unwrap();
    assert_eq!(blocks["blocks"].as_array().unwrap().len(), 4);
    for b in ["0", "1", "2"] {
        ok(&["fit-ability", "--config", c, "--event-pair", "Shots,ShotStop", "--block", b]);
    }
    ok(&["fit-ability", "--config", c, "--event-pair", "Shots,ShotStop"]);
    ok(&["rank", "--config", c, "--event-pair", "Shots,ShotStop"]);
    let traj = std::fs::read_to_string(dir.path().join("rank/trajectories.Shots-ShotStop.csv")).unwrap();
    assert!(traj.starts_with("player_id,event_type,block,mu\n"));

    ok(&["fit-goals", "--config", c, "--seed", "7", "--block", "2", "--model", "extended"]);
    ok(&["predict", "--config", c, "--seed", "7", "--block", "2", "--model", "extended"]);
    let draws = std::fs::read_to_string(dir.path().join("fit-goals/draws.extended.block2.jsonl")).unwrap();
    assert_eq!(draws.lines().count(), 400);
    let first: serde_json::Value = serde_json::from_str(draws.lines().next().unwrap()).unwrap();
    for key in ["home", "att", "def", "mu_att", "mu_def", "sigma_att", "sigma_def"] {
        assert!(first.get(key).is_some(), "draw lacks {key}");
    }

    // The full schedule in one go matches the per-block run for block 2.
    ok(&["predict", "--config", c, "--seed", "7", "--model", "extended"]);
    let read = |name: &str| -> BTreeMap<String, String> {
        let mut r = csv::Reader::from_path(dir.path().join("predict").join(name)).unwrap();
        r.records()
            .map(|x| x.unwrap())
            .filter(|x| &x[1] == "2")
            .map(|x| (x[0].to_string(), x[3].to_string()))
            .collect()
    };
    let single = read("predictions.extended.block2.csv");
    assert!(!single.is_empty());
    assert_eq!(single, read("predictions.extended.csv"));

    std::fs::remove_file(dir.path().join("predict/predictions.extended.block2.csv")).unwrap();
    ok(&["predict", "--config", c, "--seed", "7", "--model", "baseline"]);
    ok(&["evaluate", "--config", c]);
    let auc = std::fs::read_to_string(dir.path().join("evaluate/auc.csv")).unwrap();
    assert!(auc.lines().any(|l| l.starts_with("baseline,all,")), "{auc}");
    assert!(auc.lines().any(|l| l.starts_with("extended,all,")), "{auc}");
    assert_eq!(run(&["predict", "--config", c, "--seed", "7", "--model", "baseline"]).status.code(), Some(1));
}
