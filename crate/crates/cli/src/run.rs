use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use feddrive::config::ExperimentConfig;
use feddrive::fed::{run_experiment, Hooks, RoundReport, CSV_HEADER};
use feddrive::metrics::EvalRecord;
use feddrive::style::StyleMethod;
use feddrive::synth::io::load_dataset;
use feddrive::synth::make_split;
use feddrive::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::load_config;
use crate::RunArgs;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const ROUNDS: &str = "rounds.csv";
pub const EVALS: &str = "evals.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const CHECKPOINT: &str = "checkpoint.fdrv";
pub const PRIVATE: &str = "private.fdrv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub config: String,
    pub outputs: Vec<String>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub label: String,
    pub seed: u64,
    pub rounds: usize,
    pub seen_final: Option<f64>,
    pub unseen_final: Option<f64>,
    pub wall_seconds: f64,
    pub config: ExperimentConfig,
}

/// Content hash in the style of a git blob: sha256 over `"blob <len>\0"` and the text.
pub fn config_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

pub fn method_label(cfg: &ExperimentConfig) -> String {
    let style = match cfg.style.method {
        StyleMethod::None => String::new(),
        m => format!(" + {}", m.label()),
    };
    format!(
        "{}{style} ({})",
        cfg.federation.strategy.label(),
        cfg.server_opt.kind.label()
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    let f = &mut cfg.federation;
    if let Some(v) = args.seed {
        f.seed = v;
    }
    if let Some(v) = args.rounds {
        f.rounds = v;
    }
    if let Some(v) = args.clients_per_round {
        f.clients_per_round = v;
    }
    if let Some(v) = args.eval_every {
        f.eval_every = v;
    }
    if let Some(v) = args.method {
        f.strategy = v;
    }
    if args.sequential {
        f.parallel = false;
    }
    if let Some(v) = args.server_opt {
        cfg.server_opt.kind = v;
    }
    if let Some(v) = args.style {
        cfg.style.method = v;
    }
    if let Some(v) = &args.data {
        cfg.data.path = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_text = cfg.to_toml();
    let hash = config_hash(&config_text);
    let manifest_path = out.join(MANIFEST);
    if manifest_path.exists() {
        let old: RunManifest = read_json(&manifest_path)?;
        if old.config_hash != hash && !args.force {
            return Err(Error::Config(format!(
                "{} holds run {} with config hash {}, this configuration hashes to {}; pass --force to replace it",
                out.display(),
                old.run_id,
                old.config_hash,
                hash
            )));
        }
    }
    let mut manifest = RunManifest {
        run_id: hash[..12].to_string(),
        config_hash: hash,
        config: config_text.clone(),
        outputs: [CONFIG, ROUNDS, EVALS, SUMMARY, CHECKPOINT].map(String::from).to_vec(),
        status: "running".into(),
    };
    write_json(&manifest_path, &manifest)?;
    let config_path = out.join(CONFIG);
    fs::write(&config_path, &config_text).map_err(|e| Error::io(&config_path, e))?;

    let data = match &cfg.data.path {
        Some(dir) => load_dataset(dir)?,
        None => make_split(&cfg.split_config(), cfg.data_seed())?,
    };

    let rounds_path = out.join(ROUNDS);
    let evals_path = out.join(EVALS);
    let mut rounds = create(&rounds_path)?;
    let mut evals = create(&evals_path)?;
    writeln!(rounds, "{CSV_HEADER}").map_err(|e| Error::io(&rounds_path, e))?;
    let mut sink = |r: &RoundReport, e: &[EvalRecord]| -> Result<()> {
        writeln!(rounds, "{}", r.csv_row())
            .and_then(|()| rounds.flush())
            .map_err(|err| Error::io(&rounds_path, err))?;
        for rec in e {
            writeln!(evals, "{}", serde_json::to_string(rec).expect("serializable"))
                .map_err(|err| Error::io(&evals_path, err))?;
        }
        evals.flush().map_err(|err| Error::io(&evals_path, err))?;
        if let Some(s) = r.seen_miou {
            eprintln!(
                "round {:>5}  seen {:.4}  unseen {}  loss {:.4}",
                r.round,
                s,
                r.unseen_miou.map_or("-".into(), |u| format!("{u:.4}")),
                r.mean_loss
            );
        }
        Ok(())
    };
    let outcome = run_experiment(
        &cfg,
        &data,
        Hooks {
            upload: None,
            report: Some(&mut sink),
        },
    )?;

    outcome.global.save(&out.join(CHECKPOINT))?;
    if !outcome.store.is_empty() {
        outcome.store.save(&out.join(PRIVATE))?;
        manifest.outputs.push(PRIVATE.into());
    }
    let summary = Summary {
        run_id: manifest.run_id.clone(),
        label: method_label(&cfg),
        seed: cfg.federation.seed,
        rounds: cfg.federation.rounds,
        seen_final: outcome.seen_final,
        unseen_final: outcome.unseen_final,
        wall_seconds: outcome.wall_seconds,
        config: cfg,
    };
    write_json(&out.join(SUMMARY), &summary)?;
    manifest.status = "complete".into();
    write_json(&manifest_path, &manifest)?;
    println!(
        "{}: seen {} unseen {} in {:.1}s",
        summary.label,
        fmt_score(summary.seen_final),
        fmt_score(summary.unseen_final),
        summary.wall_seconds
    );
    Ok(())
}

pub fn fmt_score(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.2}", 100.0 * x))
}
