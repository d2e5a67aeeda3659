//! Artifact persistence: atomic writes, CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::equilibrium::{EquilibriumResult, EquilibriumSummary, QuadraticFloor};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const EQUILIBRIUM_JSON: &str = "equilibrium.json";
pub const FIELDS_CSV: &str = "fields.csv";
pub const SAMPLE_META: &str = "sample_meta.json";

/// Write `path` through a temporary file in the same directory followed by
/// a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Write a CSV table with a header row and LF line endings.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    write_atomic(path, |w| {
        let mut wr = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(header)?;
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn require(path: &Path, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { path: path.to_path_buf(), hint: hint.to_string() })
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T> {
    require(path, hint)?;
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact { path: path.to_path_buf(), message: e.to_string() })
}

/// Read every data row of a CSV file as typed records.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<Vec<T>> {
    require(path, hint)?;
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::MalformedArtifact { path: path.to_path_buf(), message: e.to_string() })
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex(&Sha256::digest(&bytes)), bytes.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub label: String,
    pub seed: u64,
    pub stream: u64,
}

/// Record of what produced the files in an output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config_hash: String,
    /// How per-chain and per-draw RNG streams derive from the master seeds.
    pub seed_split: String,
    pub streams: Vec<StreamRecord>,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Files written by one stage, registered in the manifest on `finish`.
pub struct Stage {
    pub dir: PathBuf,
    name: String,
    started: std::time::Instant,
    written: Vec<PathBuf>,
    streams: Vec<StreamRecord>,
}

impl Stage {
    pub fn new(dir: &Path, name: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            name: name.to_string(),
            started: std::time::Instant::now(),
            written: Vec::new(),
            streams: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let p = self.path(file);
        write_json(&p, value)?;
        self.written.push(p);
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, file: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
        let p = self.path(file);
        write_csv(&p, header, rows)?;
        self.written.push(p);
        Ok(())
    }

    pub fn raw(&mut self, file: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let p = self.path(file);
        write_atomic(&p, f)?;
        self.written.push(p);
        Ok(())
    }

    pub fn stream(&mut self, label: String, seed: u64, stream: u64) {
        self.streams.push(StreamRecord { label, seed, stream });
    }

    /// Hash the written files and merge them into `manifest.json`.
    pub fn finish(self, config_hash: &str) -> Result<RunManifest> {
        let mpath = self.dir.join(MANIFEST);
        let mut m: RunManifest = if mpath.is_file() { read_json(&mpath, "")? } else { RunManifest::default() };
        m.toolkit_version = env!("CARGO_PKG_VERSION").to_string();
        m.config_hash = config_hash.to_string();
        m.seed_split = "ChaCha8: chain streams are n·2^32 + chain under sampler.seed; exact draw d of particle \
                        count n uses stream d under exact.seed + n·2^32"
            .to_string();
        let prefix = format!("{}:", self.name);
        m.streams.retain(|s| !s.label.starts_with(&prefix));
        m.streams.extend(self.streams);
        m.artifacts.retain(|_, a| a.stage != self.name);
        for p in &self.written {
            let (sha256, bytes) = sha256_file(p)?;
            let key = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned();
            m.artifacts.insert(key, ArtifactEntry { sha256, bytes, stage: self.name.clone() });
        }
        m.timings.insert(self.name.clone(), self.started.elapsed().as_secs_f64());
        write_json(&mpath, &m)?;
        Ok(m)
    }
}

/// Contents of `equilibrium.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumArtifact {
    pub method: String,
    pub config_hash: String,
    pub quadratic_floor: QuadraticFloor,
    pub summary: EquilibriumSummary,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub q_check: f64,
    pub q_eff: f64,
    pub droplet: u8,
}

pub const FIELDS_HEADER: [&str; 6] = ["x", "y", "sigma", "q_check", "q_eff", "droplet"];

pub fn field_rows(eq: &EquilibriumResult) -> impl Iterator<Item = FieldRow> + '_ {
    (0..eq.grid.cells()).map(move |i| {
        let z = eq.grid.centre(i);
        FieldRow {
            x: z.re,
            y: z.im,
            sigma: eq.sigma_weights[i],
            q_check: eq.q_check[i],
            q_eff: eq.q_eff[i],
            droplet: eq.droplet_mask[i] as u8,
        }
    })
}

const EQ_HINT: &str = "run `cgas equilibrium` with the same --out first";

/// Rebuild the equilibrium from `equilibrium.json` and `fields.csv`.
pub fn load_equilibrium(dir: &Path) -> Result<(EquilibriumArtifact, EquilibriumResult)> {
    let art: EquilibriumArtifact = read_json(&dir.join(EQUILIBRIUM_JSON), EQ_HINT)?;
    let rows: Vec<FieldRow> = read_csv(&dir.join(FIELDS_CSV), EQ_HINT)?;
    let eq = EquilibriumResult::from_parts(
        art.summary.clone(),
        rows.iter().map(|r| (r.sigma, r.q_check, r.q_eff, r.droplet != 0)).collect(),
    )?;
    Ok((art, eq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &["a", "b"], [(1.5, 2), (3.0, 4)]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n1.5,2\n3.0,4\n");
        let err = write_atomic(&p, |w| {
            w.write_all(b"partial")?;
            Err(Error::EmptyInput("interrupted"))
        });
        assert!(err.is_err());
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n1.5,2\n3.0,4\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_lists_every_stage_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Stage::new(dir.path(), "one").unwrap();
        s.json("x.json", &1).unwrap();
        s.finish("h").unwrap();
        let mut s = Stage::new(dir.path(), "two").unwrap();
        s.csv("y.csv", &["v"], [1]).unwrap();
        let m = s.finish("h").unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts["x.json"].stage, "one");
        assert!(m.timings.contains_key("two"));
    }

    #[test]
    fn missing_artifacts_are_reported_with_a_hint() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_equilibrium(dir.path()).unwrap_err().to_string();
        assert!(err.contains("equilibrium.json") && err.contains("cgas equilibrium"), "{err}");
    }
}
