//! Comparison tables and learning curves over finished run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use feddrive::config::ExperimentConfig;
use feddrive::metrics::final_score;
use feddrive::{Error, Result};

use crate::run::{method_label, read_json, RunManifest, Summary, CONFIG, MANIFEST, ROUNDS, SUMMARY};
use crate::svg::{self, Curve};

#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: String,
    pub label: String,
    pub group_key: String,
    pub seed: u64,
    pub seen: Option<f64>,
    pub unseen: Option<f64>,
    pub partial: bool,
    pub seen_curve: Vec<(f64, f64)>,
    pub unseen_curve: Vec<(f64, f64)>,
}

fn parse_rounds(path: &Path) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: &str| Error::Format {
        path: path.to_path_buf(),
        reason: format!("bad row {line:?}"),
    };
    let mut seen = Vec::new();
    let mut unseen = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(line));
        }
        let round: f64 = f[0].parse().map_err(|_| bad(line))?;
        for (field, curve) in [(f[1], &mut seen), (f[2], &mut unseen)] {
            if !field.is_empty() {
                curve.push((round, field.parse().map_err(|_| bad(line))?));
            }
        }
    }
    Ok((seen, unseen))
}

fn group_key(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.federation.seed = 0;
    c.data.seed = None;
    c.federation.parallel = true;
    c.to_toml()
}

fn tail_score(curve: &[(f64, f64)]) -> Option<f64> {
    let hist: Vec<(usize, f64)> = curve.iter().map(|&(r, v)| (r as usize, v)).collect();
    final_score(&hist).ok()
}

pub fn load_run(dir: &Path) -> Result<RunData> {
    let manifest: RunManifest = read_json(&dir.join(MANIFEST))?;
    let cfg = ExperimentConfig::from_toml(&manifest.config)
        .or_else(|_| ExperimentConfig::load(&dir.join(CONFIG)))?;
    let (seen_curve, unseen_curve) = parse_rounds(&dir.join(ROUNDS))?;
    let complete = manifest.status == "complete";
    let (seen, unseen) = if complete {
        let s: Summary = read_json(&dir.join(SUMMARY))?;
        (s.seen_final, s.unseen_final)
    } else {
        (tail_score(&seen_curve), tail_score(&unseen_curve))
    };
    Ok(RunData {
        dir: dir.display().to_string(),
        label: method_label(&cfg),
        group_key: group_key(&cfg),
        seed: cfg.federation.seed,
        seen,
        unseen,
        partial: !complete,
        seen_curve,
        unseen_curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn stat(values: &[f64]) -> Option<Stat> {
    if values.is_empty() {
        return None;
    }
    Some(Stat {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone)]
pub struct Row {
    pub label: String,
    pub seeds: Vec<u64>,
    pub seen: Option<Stat>,
    pub unseen: Option<Stat>,
    pub partial: bool,
}

/// One row per configuration, seeds pooled, in first-appearance order.
pub fn rows(runs: &[RunData]) -> Vec<Row> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunData>> = BTreeMap::new();
    for r in runs {
        if !groups.contains_key(r.group_key.as_str()) {
            order.push(&r.group_key);
        }
        groups.entry(&r.group_key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let g = &groups[k];
            let seen: Vec<f64> = g.iter().filter_map(|r| r.seen).collect();
            let unseen: Vec<f64> = g.iter().filter_map(|r| r.unseen).collect();
            Row {
                label: g[0].label.clone(),
                seeds: g.iter().map(|r| r.seed).collect(),
                seen: stat(&seen),
                unseen: stat(&unseen),
                partial: g.iter().any(|r| r.partial),
            }
        })
        .collect()
}

fn cell(s: &Option<Stat>, runs: usize) -> String {
    match s {
        None => "-".into(),
        Some(s) if runs > 1 => format!(
            "{:.2} ± {:.2}",
            100.0 * s.mean,
            50.0 * (s.max - s.min)
        ),
        Some(s) => format!("{:.2}", 100.0 * s.mean),
    }
}

pub fn text_table(rows: &[Row]) -> String {
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let mut label = r.label.clone();
            if r.partial {
                label.push_str(" [partial]");
            }
            [label, r.seeds.len().to_string(), cell(&r.seen, r.seeds.len()), cell(&r.unseen, r.seeds.len())]
        })
        .collect();
    let head = ["method", "runs", "seen mIoU", "unseen mIoU"].map(String::from);
    let widths: Vec<usize> = (0..4)
        .map(|i| {
            body.iter()
                .chain([&head])
                .map(|r| r[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: &[String; 4]| {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        cells.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&head);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

pub fn csv_table(rows: &[Row]) -> String {
    let mut out = String::from("method,runs,seen_mean,seen_min,seen_max,unseen_mean,unseen_min,unseen_max,partial\n");
    let f = |s: &Option<Stat>| match s {
        Some(s) => format!("{},{},{}", s.mean, s.min, s.max),
        None => ",,".into(),
    };
    for r in rows {
        out.push_str(&format!(
            "\"{}\",{},{},{},{}\n",
            r.label.replace('"', "\"\""),
            r.seeds.len(),
            f(&r.seen),
            f(&r.unseen),
            r.partial
        ));
    }
    out
}

pub fn curves(runs: &[RunData]) -> Vec<Curve> {
    let mut out = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let name = format!("{} s{}", r.label, r.seed);
        out.push(Curve {
            label: format!("{name} seen"),
            dashed: false,
            color_index: i,
            points: r.seen_curve.clone(),
        });
        out.push(Curve {
            label: format!("{name} unseen"),
            dashed: true,
            color_index: i,
            points: r.unseen_curve.clone(),
        });
    }
    out
}

pub fn report(dirs: &[std::path::PathBuf], out: Option<&Path>) -> Result<()> {
    let mut runs = Vec::new();
    for d in dirs {
        let r = load_run(d)?;
        if r.partial {
            eprintln!("warning: {} did not complete; its row is marked partial", r.dir);
        }
        runs.push(r);
    }
    let rows = rows(&runs);
    let table = text_table(&rows);
    print!("{table}");
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let write = |name: &str, text: &str| {
            let p = out.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.txt", &table)?;
        write("report.csv", &csv_table(&rows))?;
        write("curves.svg", &svg::render("mIoU per evaluation", &curves(&runs)))?;
    }
    Ok(())
}
