use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{BenchmarkReport, EpisodeRecord, Summary};
use crate::error::{io_err, Result};
use crate::topo_graph::TopoMap;

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `episodes.jsonl` (one record per line) and `summary.json` into
/// `dir`, creating it if needed. Returns the two paths.
pub fn export_results(report: &BenchmarkReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let episodes = dir.join(EPISODES_FILE);
    let mut out = Vec::new();
    for r in &report.records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    write_file(&episodes, &out)?;
    let summary = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_vec_pretty(&report.summary)?;
    text.push(b'\n');
    write_file(&summary, &text)?;
    Ok((episodes, summary))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&read(path)?)?)
}

pub fn export_map(map: &TopoMap, path: &Path) -> Result<()> {
    let mut text = map.to_json().into_bytes();
    text.push(b'\n');
    write_file(path, &text)
}

pub fn import_map(path: &Path, tau_sim: f64, feature_dim: usize) -> Result<TopoMap> {
    TopoMap::from_json(&read(path)?, tau_sim, feature_dim)
}
