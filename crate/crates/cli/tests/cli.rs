use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feddrive::config::ExperimentConfig;
use feddrive::fed::experiment::local_config;
use feddrive::fed::{local_train, sample_clients};
use feddrive::model::ModelState;
use feddrive::nn::SegNet;
use feddrive::synth::make_split;
use tempfile::TempDir;

const SMALL: &str = r#"
[federation]
rounds = 2
clients_per_round = 2
eval_every = 1
local_epochs = 1
seed = 3

[model]
batch_size = 2

[data]
num_clients = 3
samples_per_client = 3
test_samples = 2
height = 16
width = 16
"#;

fn feddrive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feddrive")).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_writes_clients_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "gen.toml", "[data]\nheight = 16\nwidth = 16\nsamples_per_client = 2\ntest_samples = 4\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&feddrive(&["gen", "--config", s(&cfg), "--out", s(&a), "--seed", "7"]));
    ok(&feddrive(&["gen", "--config", s(&cfg), "--out", s(&b), "--seed", "7"]));

    let clients = fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("client_"))
        .count();
    assert_eq!(clients, 24);
    assert!(a.join("seen_test").is_dir() && a.join("unseen_test").is_dir());
    assert_eq!(files_under(&a), files_under(&b));

    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count() - 1, 24 * 2 + 4 + 4);
}

#[test]
fn run_writes_outputs_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&out), "--rounds", "1"]));
    let csv = fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("round,seen_miou,unseen_miou,mean_loss\n1,"));
    for f in ["manifest.json", "config.toml", "evals.jsonl", "summary.json", "checkpoint.fdrv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");

    let again = tmp.path().join("again");
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&again), "--rounds", "1", "--sequential"]));
    assert_eq!(fs::read_to_string(again.join("rounds.csv")).unwrap(), csv);
}

#[test]
fn checkpoint_is_the_weighted_average_of_local_models() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    ok(&feddrive(&["run", "--config", s(&cfg_path), "--out", s(&out)]));
    let saved = ModelState::load(&out.join("checkpoint.fdrv")).unwrap();

    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let data = make_split(&cfg.split_config(), cfg.data_seed()).unwrap();
    let net = SegNet::new(&cfg.model_config()).unwrap();
    let local = local_config(&cfg);
    let mut w = ModelState::init(&cfg.model_config(), cfg.federation.seed);
    for t in 0..cfg.federation.rounds {
        let sampled = sample_clients(t, 3, 2, cfg.federation.seed).unwrap();
        let n: usize = sampled.iter().map(|&k| data.train[k].len()).sum();
        let locals: Vec<ModelState> = sampled
            .iter()
            .map(|&k| local_train(&net, &data.train[k], &w, &local, t, None).unwrap().0)
            .collect();
        let mut next = w.clone();
        for name in w.names().map(String::from).collect::<Vec<_>>() {
            let dst = next.get_mut(&name).unwrap();
            for (i, v) in dst.iter_mut().enumerate() {
                *v = sampled
                    .iter()
                    .zip(&locals)
                    .map(|(&k, m)| data.train[k].len() as f64 / n as f64 * m.get(&name).unwrap()[i])
                    .sum();
            }
        }
        w = next;
    }
    for (name, g) in w.iter() {
        for (a, b) in g.data.iter().zip(saved.get(name).unwrap()) {
            assert!((a - b).abs() < 1e-12, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&out), "--rounds", "1"]));

    // same directory, different configuration
    let r = feddrive(&["run", "--config", s(&cfg), "--out", s(&out), "--rounds", "2"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--force"));
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&out), "--rounds", "2", "--force"]));

    let bad = write_config(tmp.path(), "bad.toml", "[federation]\nroundz = 3\n");
    let r = feddrive(&["run", "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("roundz"));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let r = feddrive(&["run", "--config", s(&cfg), "--out", s(&blocker.join("run")), "--rounds", "1"]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn run_from_generated_data_matches_in_memory_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let data = tmp.path().join("data");
    ok(&feddrive(&["gen", "--config", s(&cfg), "--out", s(&data)]));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&a)]));
    ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&b), "--data", s(&data)]));
    let (ra, rb) = (fs::read_to_string(a.join("rounds.csv")).unwrap(), fs::read_to_string(b.join("rounds.csv")).unwrap());
    let loss = |t: &str| t.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).collect::<Vec<_>>();
    // PPM storage quantizes images to 8 bits, so only closeness is expected
    for (x, y) in loss(&ra).iter().zip(loss(&rb)) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
}

#[test]
fn report_tables_and_svg() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let mut runs = Vec::new();
    for (seed, method) in [("1", "fedavg"), ("2", "fedavg"), ("1", "silobn")] {
        let out = tmp.path().join(format!("{method}-{seed}"));
        ok(&feddrive(&["run", "--config", s(&cfg), "--out", s(&out), "--seed", seed, "--method", method]));
        runs.push(out);
    }
    let report_dir = tmp.path().join("report");
    let mut args = vec!["report", "--out", s(&report_dir)];
    args.extend(runs.iter().map(|p| s(p)));
    let r = feddrive(&args);
    ok(&r);
    let table = fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert_eq!(table, String::from_utf8_lossy(&r.stdout));
    assert!(table.contains("FedAvg (SGD)") && table.contains("SiloBN (SGD)"));
    assert!(table.contains('±'), "two seeds give a spread:\n{table}");

    let csv = fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let svg = fs::read_to_string(report_dir.join("curves.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    // one polyline per run per split
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 6);

    let single = feddrive(&["report", s(&runs[0])]);
    ok(&single);
    assert!(String::from_utf8_lossy(&single.stdout).contains("FedAvg"));
}

#[test]
fn style_preview_writes_images() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("preview");
    ok(&feddrive(&["style", "preview", "--config", s(&cfg), "--out", s(&out), "--client", "0", "--target", "2"]));
    for f in ["source.ppm", "target.ppm", "cfsi_0.25.ppm", "cfsi_0.50.ppm", "cfsi_1.00.ppm", "lab.ppm"] {
        let bytes = fs::read(out.join(f)).unwrap();
        assert!(bytes.starts_with(b"P6\n16 16\n255\n"), "{f}");
    }
    let r = feddrive(&["style", "preview", "--config", s(&cfg), "--out", s(&out), "--target", "9"]);
    assert_eq!(r.status.code(), Some(2));
}
