//! CSV and JSON artifact formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ladder_core::asymptotics::AsymptoticReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const PLOT_HEADER: &str = "n,measured,predicted,ratio,ci_lo,ci_hi";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn series_csv(coeffs: &[f64]) -> String {
    let mut s = String::from("n,coeff\n");
    for (n, c) in coeffs.iter().enumerate() {
        let _ = writeln!(s, "{n},{}", fmt_f64(*c));
    }
    s
}

pub fn parse_series_csv(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next() != Some("n,coeff") {
        bail!("series CSV must start with the header `n,coeff`");
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let (n, c) = line
            .split_once(',')
            .with_context(|| format!("line {}: expected `n,coeff`", i + 2))?;
        let n: usize = n
            .parse()
            .with_context(|| format!("line {}: bad index", i + 2))?;
        if n != out.len() {
            bail!("line {}: indices must run 0, 1, 2, ...", i + 2);
        }
        out.push(
            c.parse()
                .with_context(|| format!("line {}: bad coefficient", i + 2))?,
        );
    }
    Ok(out)
}

pub fn table_csv(rows: impl IntoIterator<Item = (usize, usize, f64)>) -> String {
    let mut s = String::from("n,j,value\n");
    for (n, j, v) in rows {
        let _ = writeln!(s, "{n},{j},{}", fmt_f64(v));
    }
    s
}

/// Plot data for a report: one line per row.
pub fn plot_csv(report: &AsymptoticReport) -> String {
    let mut s = String::from(PLOT_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.measured),
            fmt_f64(r.predicted),
            fmt_f64(r.ratio),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi)
        );
    }
    s
}

pub fn emit_plot_data(report: &AsymptoticReport, path: &Path) -> std::io::Result<()> {
    fs::write(path, plot_csv(report))
}

pub fn json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes artifacts into a staging directory and records their digests.
///
/// [`ArtifactWriter::commit`] moves the staging directory into place;
/// dropping the writer without committing removes everything written.
pub struct ArtifactWriter {
    staging: PathBuf,
    target: PathBuf,
    digests: BTreeMap<String, String>,
    committed: bool,
}

impl ArtifactWriter {
    pub fn new(target: &Path) -> anyhow::Result<Self> {
        let name = target
            .file_name()
            .context("output directory has no name")?
            .to_string_lossy()
            .into_owned();
        let staging = target.with_file_name(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(ArtifactWriter {
            staging,
            target: target.to_path_buf(),
            digests: BTreeMap::new(),
            committed: false,
        })
    }

    /// Writes `rel` (a relative path with `/` separators).
    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let bytes = bytes.as_ref();
        let path = self.staging.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.digests.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> anyhow::Result<()> {
        self.write(rel, json_string(value)?)
    }

    pub fn digests(&self) -> &BTreeMap<String, String> {
        &self.digests
    }

    /// Replaces the target directory with the staged one.
    pub fn commit(mut self, manifest_name: &str, manifest: &str) -> anyhow::Result<PathBuf> {
        fs::write(self.staging.join(manifest_name), manifest)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target)
                .with_context(|| format!("replacing {}", self.target.display()))?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn series_round_trip() {
        let c = vec![0.0, 0.5, 0.125, 1e-300];
        assert_eq!(parse_series_csv(&series_csv(&c)).unwrap(), c);
        assert!(parse_series_csv("n,coeff\n1,0.5\n").is_err());
    }
}
