use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use pointer_anneal::experiments::Summary;
use pointer_anneal::IntegratorConfig;
use serde::{Deserialize, Serialize};

use crate::{Format, OutputArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub params: serde_json::Value,
    pub integrator: Option<IntegratorConfig>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub outputs: Vec<PathBuf>,
    pub summary: Option<Summary>,
    pub threads: usize,
}

impl RunManifest {
    pub fn new(command: &str, params: serde_json::Value, started_at: DateTime<Utc>) -> Self {
        Self {
            command: command.to_string(),
            version: pointer_anneal::VERSION.to_string(),
            params,
            integrator: None,
            started_at,
            finished_at: started_at,
            outputs: Vec::new(),
            summary: None,
            threads: rayon::current_num_threads(),
        }
    }
}

/// `runs/traj.csv` -> `runs/traj.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes `rows` as CSV (header from the field names) or a JSON array.
pub fn write_rows<T: Serialize>(rows: &[T], out: &OutputArgs) -> Result<()> {
    let w = sink(out.out.as_deref())?;
    match out.format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            for r in rows {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
        }
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Finalizes and writes the manifest next to `--out`; no-op without `--out`.
pub fn finish_manifest(mut m: RunManifest, out: &OutputArgs) -> Result<()> {
    let Some(path) = out.out.as_deref() else {
        return Ok(());
    };
    m.finished_at = Utc::now();
    m.outputs.push(path.to_path_buf());
    let mpath = manifest_path(path);
    let f = File::create(&mpath).with_context(|| format!("creating {}", mpath.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &m)?;
    writeln!(w)?;
    w.flush()?;
    log::info!("wrote {}", mpath.display());
    Ok(())
}
