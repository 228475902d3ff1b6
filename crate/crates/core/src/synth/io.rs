//! On-disk datasets: binary PPM images, PGM masks and a manifest CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::split::FederatedData;
use crate::data::{ClientDataset, Image, Mask};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.csv";
pub const DOMAINS: &str = "domains.txt";
pub const SEEN_TEST: &str = "seen_test";
pub const UNSEEN_TEST: &str = "unseen_test";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = header("P6", image.width, image.height);
    for i in 0..image.plane() {
        out.extend(image.pixel(i).map(quantize));
    }
    out
}

pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = header("P5", mask.width, mask.height);
    out.extend_from_slice(&mask.data);
    out
}

/// Parses a binary netpbm header, returning (width, height, payload).
fn parse_netpbm<'a>(bytes: &'a [u8], magic: &[u8], path: &Path) -> Result<(usize, usize, &'a [u8])> {
    let mut pos = 0;
    let mut token = || -> Result<&'a [u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != magic {
        return Err(format_err(path, format!("expected {}", String::from_utf8_lossy(magic))));
    }
    let mut number = || -> Result<usize> {
        std::str::from_utf8(token()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, "bad header number"))
    };
    let (w, h, max) = (number()?, number()?, number()?);
    if max != 255 {
        return Err(format_err(path, "only 8-bit files are supported"));
    }
    Ok((w, h, &bytes[pos + 1..]))
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let (w, h, payload) = parse_netpbm(bytes, b"P6", path)?;
    if payload.len() != 3 * w * h {
        return Err(format_err(path, "payload length does not match the header"));
    }
    let mut img = Image::filled(h, w, [0.0; 3]);
    for (i, px) in payload.chunks_exact(3).enumerate() {
        img.set_pixel(i, [px[0], px[1], px[2]].map(|v| v as f64 / 255.0));
    }
    Ok(img)
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Mask> {
    let (w, h, payload) = parse_netpbm(bytes, b"P5", path)?;
    if payload.len() != w * h {
        return Err(format_err(path, "payload length does not match the header"));
    }
    Mask::new(h, w, payload.to_vec())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct Row {
    client_id: String,
    domain: String,
    image_path: String,
    mask_path: String,
}

/// Writes one directory per client plus the two test directories, a
/// manifest with paths relative to `dir`, and the ordered domain list.
pub fn save_dataset(data: &FederatedData, dir: &Path) -> Result<()> {
    let mut rows = Vec::new();
    let clients = data
        .train
        .iter()
        .map(|c| (format!("client_{:03}", c.client_id), c.client_id.to_string(), c))
        .chain([
            (SEEN_TEST.to_string(), SEEN_TEST.to_string(), &data.seen_test),
            (UNSEEN_TEST.to_string(), UNSEEN_TEST.to_string(), &data.unseen_test),
        ]);
    for (sub, id, client) in clients {
        let cdir = dir.join(&sub);
        fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
        for (i, (img, mask)) in client.images.iter().zip(&client.masks).enumerate() {
            let image_path = format!("{sub}/{i:03}.ppm");
            let mask_path = format!("{sub}/{i:03}.pgm");
            write(&dir.join(&image_path), &encode_ppm(img))?;
            write(&dir.join(&mask_path), &encode_pgm(mask))?;
            rows.push(Row {
                client_id: id.clone(),
                domain: data.domain_names[client.domains[i]].clone(),
                image_path,
                mask_path,
            });
        }
    }
    let manifest = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| format_err(&manifest, e.to_string()))?;
    for r in &rows {
        w.serialize(r).map_err(|e| format_err(&manifest, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    write(&dir.join(DOMAINS), (data.domain_names.join("\n") + "\n").as_bytes())
}

fn empty_client(client_id: usize) -> ClientDataset {
    ClientDataset {
        client_id,
        images: Vec::new(),
        masks: Vec::new(),
        domains: Vec::new(),
    }
}

pub fn load_dataset(dir: &Path) -> Result<FederatedData> {
    let domains_path = dir.join(DOMAINS);
    let mut domain_names: Vec<String> = String::from_utf8_lossy(&read(&domains_path)?)
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let manifest = dir.join(MANIFEST);
    let mut reader = csv::Reader::from_path(&manifest).map_err(|e| format_err(&manifest, e.to_string()))?;
    let mut train: BTreeMap<usize, ClientDataset> = BTreeMap::new();
    let mut seen = None;
    let mut unseen = None;
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| format_err(&manifest, e.to_string()))?;
        let domain = match domain_names.iter().position(|d| *d == row.domain) {
            Some(d) => d,
            None => {
                domain_names.push(row.domain.clone());
                domain_names.len() - 1
            }
        };
        let client = match row.client_id.as_str() {
            SEEN_TEST => seen.get_or_insert_with(|| empty_client(0)),
            UNSEEN_TEST => unseen.get_or_insert_with(|| empty_client(0)),
            id => {
                let id: usize = id
                    .parse()
                    .map_err(|_| format_err(&manifest, format!("bad client id {id:?}")))?;
                train.entry(id).or_insert_with(|| empty_client(id))
            }
        };
        let image_path: PathBuf = dir.join(&row.image_path);
        let mask_path: PathBuf = dir.join(&row.mask_path);
        client.images.push(decode_ppm(&read(&image_path)?, &image_path)?);
        client.masks.push(decode_pgm(&read(&mask_path)?, &mask_path)?);
        client.domains.push(domain);
    }
    let missing = |what: &str| format_err(&manifest, format!("no {what} rows"));
    let mut seen_test = seen.ok_or_else(|| missing(SEEN_TEST))?;
    let mut unseen_test = unseen.ok_or_else(|| missing(UNSEEN_TEST))?;
    if train.is_empty() {
        return Err(missing("train"));
    }
    let next = train.keys().next_back().map_or(0, |k| k + 1);
    seen_test.client_id = next;
    unseen_test.client_id = next + 1;
    Ok(FederatedData {
        train: train.into_values().collect(),
        seen_test,
        unseen_test,
        domain_names,
    })
}
