use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lwpir::numeric::{format_rational, parse_rational};
use lwpir::scheme::{Response, Scheme};
use lwpir::Rational;
use serde::{Deserialize, Serialize};

/// Comma-separated exact numbers.
pub fn parse_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| Ok(parse_rational(x)?)).collect()
}

/// "start:end:count" (inclusive, evenly spaced, exact) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<Rational>> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, n] => {
            let a = parse_rational(a)?;
            let b = parse_rational(b)?;
            let n: i64 = n.trim().parse().context("grid count")?;
            if n < 1 {
                bail!("grid needs at least one point");
            }
            if n == 1 {
                vec![a]
            } else {
                (0..n).map(|i| &a + (&b - &a) * Rational::new(i.into(), (n - 1).into())).collect()
            }
        }
        [_] => parse_list(s)?,
        _ => bail!("grid '{s}' should be start:end:count or a list"),
    };
    let mut sorted = grid.clone();
    sorted.sort();
    if sorted != grid {
        bail!("distortion grid must be increasing");
    }
    Ok(grid)
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes via a temporary file and rename, so a crash never leaves a truncated file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp, contents)?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_scheme(path: &Path) -> Result<Scheme> {
    Scheme::from_json(&read(path)?).with_context(|| format!("loading scheme {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a C,
}

/// Config echo written beside the outputs of a command.
pub fn write_manifest<C: Serialize>(path: &Path, command: &C) -> Result<()> {
    let m = Manifest { tool: "lwpir", version: env!("CARGO_PKG_VERSION"), command };
    write(path, &(serde_json::to_string_pretty(&m)? + "\n"))
}

/// A set of candidate responses (or only their points) for the rate LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolFile {
    pub alphabet_size: u32,
    pub num_files: usize,
    pub file_len: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<Response>,
    /// (R, D1, ..., DM) as exact strings; used when no responses are given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<String>>,
}

impl PoolFile {
    pub fn exact_points(&self) -> Result<Vec<Vec<Rational>>> {
        if !self.responses.is_empty() {
            return self
                .responses
                .iter()
                .map(|r| {
                    r.validate()?;
                    let mut v = vec![r.rate()?];
                    v.extend(r.distortions()?);
                    Ok(v)
                })
                .collect();
        }
        self.points.iter().map(|p| p.iter().map(|x| Ok(parse_rational(x)?)).collect()).collect()
    }

    pub fn from_points(alphabet_size: u32, num_files: usize, file_len: usize, points: &[Vec<Rational>]) -> Self {
        Self {
            alphabet_size,
            num_files,
            file_len,
            responses: Vec::new(),
            points: points.iter().map(|p| p.iter().map(format_rational).collect()).collect(),
        }
    }
}
