//! Key-value manifests and on-disk ε-nets (one little-endian binary file per ε).

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid, C64};
use crate::regnet::{EpsGrid, EpsNet};

pub const MANIFEST: &str = "manifest.txt";

/// Ordered `key = value` lines; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces an existing key in place, otherwise appends.
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Manifest(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Manifest(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Manifest(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Manifest(format!("line {}: bad key `{k}`", n + 1)));
            }
            m.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(m)
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(dir.join(MANIFEST))?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST), self.render())?;
        Ok(())
    }
}

fn snapshot_name(index: usize) -> String {
    format!("eps_{index:03}.bin")
}

/// Writes `manifest.txt` plus `eps_NNN.bin` (interleaved re/im f64, little endian).
pub fn write_net(net: &EpsNet<GridFunction>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = net
        .items()
        .first()
        .map(|u| *u.grid())
        .ok_or_else(|| Error::Manifest("empty net".into()))?;
    let mut m = Manifest::new();
    m.set("label", net.label());
    m.set("dim", grid.dim());
    m.set("half_width", grid.half_width());
    m.set("points", grid.points());
    m.set("count", net.eps().len());
    for (k, (eps, u)) in net.iter().enumerate() {
        let name = snapshot_name(k);
        m.set(format!("eps.{k}"), eps);
        m.set(format!("file.{k}"), &name);
        write_field(u, &dir.join(name))?;
    }
    m.write(dir)
}

pub fn read_net(dir: &Path) -> Result<EpsNet<GridFunction>> {
    let m = Manifest::read(dir)?;
    let grid = SpatialGrid::new(m.require("dim")?, m.require("half_width")?, m.require("points")?)?;
    let count: usize = m.require("count")?;
    let mut eps = Vec::with_capacity(count);
    let mut items = Vec::with_capacity(count);
    for k in 0..count {
        eps.push(m.require::<f64>(&format!("eps.{k}"))?);
        let name: String = m.require(&format!("file.{k}"))?;
        items.push(read_field(grid, &dir.join(&name))?);
    }
    EpsNet::fields(EpsGrid::new(eps)?, items, m.require::<String>("label")?)
}

fn write_field(u: &GridFunction, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 * u.values().len());
    for v in u.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_field(grid: SpatialGrid, path: &Path) -> Result<GridFunction> {
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::Manifest(format!(
            "{}: {} bytes, expected {}",
            path.display(),
            bytes.len(),
            16 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("chunk of 16"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("chunk of 16"));
            C64::new(re, im)
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Like [`write_net`] but every snapshot keeps its own grid (`grid.k` keys),
/// for sweeps whose resolution follows ε.
pub fn write_snapshots(items: &[(f64, &GridFunction)], label: &str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut m = Manifest::new();
    m.set("label", label);
    m.set("count", items.len());
    for (k, (eps, u)) in items.iter().enumerate() {
        let g = u.grid();
        let name = snapshot_name(k);
        m.set(format!("eps.{k}"), eps);
        m.set(
            format!("grid.{k}"),
            format!("{} {} {}", g.dim(), g.half_width(), g.points()),
        );
        m.set(format!("file.{k}"), &name);
        write_field(u, &dir.join(name))?;
    }
    m.write(dir)
}

pub fn read_snapshots(dir: &Path) -> Result<Vec<(f64, GridFunction)>> {
    let m = Manifest::read(dir)?;
    let count: usize = m.require("count")?;
    (0..count)
        .map(|k| {
            let raw: String = m.require(&format!("grid.{k}"))?;
            let bad = || Error::Manifest(format!("grid.{k}: expected `dim half_width points`, got `{raw}`"));
            let parts: Vec<&str> = raw.split_whitespace().collect();
            let [d, l, n] = parts[..] else { return Err(bad()) };
            let grid = SpatialGrid::new(
                d.parse().map_err(|_| bad())?,
                l.parse().map_err(|_| bad())?,
                n.parse().map_err(|_| bad())?,
            )?;
            let name: String = m.require(&format!("file.{k}"))?;
            Ok((m.require(&format!("eps.{k}"))?, read_field(grid, &dir.join(name))?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parse_and_errors() {
        let m = Manifest::parse("# c\na = 1\n\nb=two words\n").unwrap();
        assert_eq!(m.get("a"), Some("1"));
        assert_eq!(m.get("b"), Some("two words"));
        assert!(Manifest::parse("novalue\n").is_err());
        assert!(m.require::<f64>("b").is_err());
        assert!(m.require::<f64>("c").is_err());
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_net(dir.path()), Err(Error::Io(_))));
    }

    #[test]
    fn snapshots_keep_their_grids() {
        let dir = tempfile::tempdir().unwrap();
        let a = GridFunction::from_real_fn(SpatialGrid::new(1, 2.0, 16).unwrap(), |p| p[0]).unwrap();
        let b = GridFunction::from_real_fn(SpatialGrid::new(1, 2.0, 64).unwrap(), |p| -p[0]).unwrap();
        write_snapshots(&[(0.5, &a), (0.125, &b)], "u", dir.path()).unwrap();
        let back = read_snapshots(dir.path()).unwrap();
        assert_eq!(back[0].0, 0.5);
        assert_eq!(back[1].1.values(), b.values());
        assert_eq!(back[1].1.grid(), b.grid());
    }
}
