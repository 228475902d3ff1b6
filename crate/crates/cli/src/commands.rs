use std::fs;
use std::path::Path;

use feddrive::config::ExperimentConfig;
use feddrive::style::cfsi::{amplitude_spectrum, cfsi_translate};
use feddrive::style::fft::Fft2;
use feddrive::style::lab::{lab_stats, lab_translate};
use feddrive::synth::io::{encode_ppm, save_dataset};
use feddrive::synth::make_split;
use feddrive::{Error, Result};

use crate::PreviewArgs;

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

pub fn gen(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.data.seed = Some(s);
    }
    cfg.validate()?;
    let data = make_split(&cfg.split_config(), cfg.data_seed())?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_dataset(&data, out)?;
    println!(
        "wrote {} train clients, 2 test clients, {} images to {}",
        data.train.len(),
        data.num_samples(),
        out.display()
    );
    Ok(())
}

pub fn style_preview(args: &PreviewArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.data.seed = Some(s);
    }
    cfg.validate()?;
    let data = make_split(&cfg.split_config(), cfg.data_seed())?;
    let pick = |k: usize| {
        data.train
            .get(k)
            .ok_or_else(|| Error::Config(format!("no train client {k} (have {})", data.train.len())))
    };
    let source = &pick(args.client)?.images[0];
    let target = &pick(args.target)?.images[0];
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let write = |name: &str, bytes: Vec<u8>| {
        let p = args.out.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write("source.ppm", encode_ppm(source))?;
    write("target.ppm", encode_ppm(target))?;
    let amp = amplitude_spectrum(&Fft2::new(target.height, target.width), target)?;
    for lambda in [0.25, 0.5, 1.0] {
        let img = cfsi_translate(source, &amp, lambda, cfg.style.beta_win)?;
        write(&format!("cfsi_{lambda:.2}.ppm"), encode_ppm(&img))?;
    }
    let (mean, std) = lab_stats(target);
    write("lab.ppm", encode_ppm(&lab_translate(source, mean, std)))?;
    println!("wrote style previews to {}", args.out.display());
    Ok(())
}
