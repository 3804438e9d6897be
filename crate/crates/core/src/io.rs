//! On-disk formats: field checkpoints, PGM snapshots, CSV tables and the
//! run manifest. Every file is written atomically.
//!
//! Checkpoint layout, all little-endian:
//!
//! ```text
//! b"NLEIK001" | u32 nx | u32 ny | f64 lx | f64 ly | f64 t
//!             | nx*ny f64 samples, row-major | f64 drift | f64 qx | f64 qy
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::SimState;
use crate::spectral::{Grid2D, ScalarField};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NLEIK001";
pub const ARTIFACT_VERSION: &str = concat!("targetwave ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::contract(format!("`{}` has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn checkpoint_bytes(state: &SimState) -> Vec<u8> {
    let g = state.phi.grid();
    let mut out = Vec::with_capacity(8 + 8 + 24 + 8 * g.len() + 24);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    for v in [g.lx(), g.ly(), state.t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in state.phi.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [state.drift, state.q.0, state.q.1] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<SimState> {
    let bad = |msg: String| Error::Format(format!("checkpoint: {msg}"));
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing NLEIK001 magic".into()));
    }
    let mut pos = 8;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad(format!("truncated at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let nx = u32_at(take(4)?);
    let ny = u32_at(take(4)?);
    let lx = f64_at(take(8)?);
    let ly = f64_at(take(8)?);
    let t = f64_at(take(8)?);
    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| bad(e.to_string()))?;
    let samples = take(8 * grid.len())?;
    let values: Vec<f64> = samples.chunks_exact(8).map(f64_at).collect();
    let drift = f64_at(take(8)?);
    let qx = f64_at(take(8)?);
    let qy = f64_at(take(8)?);
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(SimState {
        t,
        phi: ScalarField::new(grid, values)?,
        drift,
        q: (qx, qy),
        z: None,
    })
}

pub fn write_checkpoint(path: &Path, state: &SimState) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(state))
}

pub fn read_checkpoint(path: &Path) -> Result<SimState> {
    parse_checkpoint(&fs::read(path)?)
}

/// Total phase `q . x + drift + phi` on the grid.
pub fn total_phase(state: &SimState) -> ScalarField {
    let g = *state.phi.grid();
    let (qx, qy, d) = (state.q.0, state.q.1, state.drift);
    let values = (0..g.ny())
        .flat_map(|j| (0..g.nx()).map(move |i| (i, j)))
        .map(|(i, j)| qx * g.x(i) + qy * g.y(j) + d + state.phi.get(i, j))
        .collect();
    ScalarField::new(g, values).expect("grid-sized buffer")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

fn pgm_level(phase: f64) -> u16 {
    ((phase.sin() + 1.0) * 0.5 * 65535.0).round().clamp(0.0, 65535.0) as u16
}

/// 16-bit image of `sin(phase)`, mapping `[-1, 1]` onto `[0, 65535]`.
/// Row `j = 0` is written first.
pub fn pgm_bytes(phase: &ScalarField, format: PgmFormat) -> Vec<u8> {
    let g = phase.grid();
    let levels = phase.values().iter().map(|&p| pgm_level(p));
    match format {
        PgmFormat::Ascii => {
            let mut s = format!("P2\n{} {}\n65535\n", g.nx(), g.ny());
            for row in levels.collect::<Vec<_>>().chunks(g.nx()) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
        PgmFormat::Binary => {
            let mut out = format!("P5\n{} {}\n65535\n", g.nx(), g.ny()).into_bytes();
            for v in levels {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

pub fn write_pgm(path: &Path, phase: &ScalarField, format: PgmFormat) -> Result<()> {
    write_atomic(path, &pgm_bytes(phase, format))
}

/// Decoded PGM: width, height and row-major levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

pub fn parse_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let bad = |msg: &str| Error::Format(format!("pgm: {msg}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let width: usize = token()?.parse().map_err(|_| bad("bad width"))?;
    let height: usize = token()?.parse().map_err(|_| bad("bad height"))?;
    let maxval: u16 = token()?.parse().map_err(|_| bad("bad maxval"))?;
    let n = width * height;
    let pixels = match magic.as_str() {
        "P2" => {
            let mut px = Vec::with_capacity(n);
            for _ in 0..n {
                px.push(token()?.parse().map_err(|_| bad("bad pixel"))?);
            }
            px
        }
        "P5" => {
            let body = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
            if body.len() != 2 * n {
                return Err(bad("raster size does not match header"));
            }
            body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        }
        _ => return Err(bad("unsupported magic")),
    };
    Ok(PgmImage {
        width,
        height,
        maxval,
        pixels,
    })
}

/// Shortest round-trip decimal form; always uses `.` and never a locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A CSV table with a mandatory header. Cells are stored as text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::contract(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_f64(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("csv: no column `{name}`")))
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| Error::Format(format!("csv: `{}` in column `{name}` is not a number", r[c])))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            Ok(())
        };
        write(&mut w).expect("writing to memory");
        String::from_utf8(w.into_inner().expect("flushed")).expect("cells are UTF-8")
    }

    pub fn parse(text: &str) -> Result<CsvTable> {
        let bad = |e: csv::Error| Error::Format(format!("csv: {e}"));
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(bad)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Format("csv: missing header".into()));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<csv::Result<Vec<Vec<String>>>>()
            .map_err(bad)?;
        Ok(CsvTable { header, rows })
    }

    pub fn read(path: &Path) -> Result<CsvTable> {
        CsvTable::parse(&fs::read_to_string(path)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub command: String,
    /// Milliseconds since the Unix epoch.
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub files: Vec<ManifestEntry>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    /// Checks every listed file's size and checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for e in &self.files {
            let bytes = fs::read(dir.join(&e.path))?;
            if bytes.len() as u64 != e.size || sha256_hex(&bytes) != e.sha256 {
                return Err(Error::Format(format!("`{}` does not match its manifest checksum", e.path)));
            }
        }
        Ok(())
    }

    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.path == path)
    }
}

/// An output directory that records everything written into it and closes
/// with a manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    started: u64,
    files: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            started: unix_now(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if self.files.iter().any(|e| e.path == name) {
            return Err(Error::contract(format!("`{name}` was already written")));
        }
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            size: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<PathBuf> {
        self.write(name, table.to_text().as_bytes())
    }

    pub fn finish(self, command: &str, config_text: &str) -> Result<RunManifest> {
        let manifest = RunManifest {
            config_hash: sha256_hex(config_text.as_bytes()),
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            started_unix_ms: self.started,
            finished_unix_ms: unix_now(),
            files: self.files,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&self.root.join(MANIFEST_NAME), json.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> SimState {
        let grid = Grid2D::new(8, 10, 3.5, 4.0).unwrap();
        SimState {
            t: 12.25,
            phi: ScalarField::from_fn(grid, |x, y| (x * 1.3).sin() * y + 1e-300),
            drift: -3.75,
            q: (0.1, -0.2),
            z: None,
        }
    }

    #[test]
    fn checkpoint_layout_is_exact() {
        let s = sample_state();
        let b = checkpoint_bytes(&s);
        assert_eq!(&b[..8], b"NLEIK001");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 10);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 3.5);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 12.25);
        assert_eq!(f64::from_le_bytes(b[40..48].try_into().unwrap()), s.phi.values()[0]);
        assert_eq!(b.len(), 40 + 8 * 80 + 24);
        let tail = &b[b.len() - 24..];
        assert_eq!(f64::from_le_bytes(tail[..8].try_into().unwrap()), -3.75);
        assert_eq!(f64::from_le_bytes(tail[16..].try_into().unwrap()), -0.2);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.chk");
        let s = sample_state();
        write_checkpoint(&p, &s).unwrap();
        let back = read_checkpoint(&p).unwrap();
        assert_eq!(back, s);
        let bits = |f: &ScalarField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.phi), bits(&s.phi));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let b = checkpoint_bytes(&sample_state());
        assert!(matches!(parse_checkpoint(&b[..b.len() - 1]), Err(Error::Format(_))));
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(parse_checkpoint(&extra), Err(Error::Format(_))));
        let mut magic = b.clone();
        magic[7] = b'2';
        assert!(matches!(parse_checkpoint(&magic), Err(Error::Format(_))));
        let mut grid = b;
        grid[8] = 7;
        assert!(matches!(parse_checkpoint(&grid), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_encodings_agree() {
        let s = sample_state();
        let phase = total_phase(&s);
        let a = parse_pgm(&pgm_bytes(&phase, PgmFormat::Ascii)).unwrap();
        let b = parse_pgm(&pgm_bytes(&phase, PgmFormat::Binary)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width, a.height, a.maxval), (8, 10, 65535));
        for (px, p) in a.pixels.iter().zip(phase.values()) {
            let want = (p.sin() + 1.0) * 0.5 * 65535.0;
            assert!((*px as f64 - want).abs() <= 0.5);
        }
        let raw = pgm_bytes(&phase, PgmFormat::Binary);
        let header_len = "P5\n8 10\n65535\n".len();
        assert_eq!(u16::from_le_bytes([raw[header_len], raw[header_len + 1]]), a.pixels[0]);
        assert_eq!(pgm_level(-PI_2), 0);
        assert_eq!(pgm_level(PI_2), 65535);
    }

    const PI_2: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn csv_round_trip() {
        let mut t = CsvTable::new(&["t", "phi_probe0"]);
        t.push_f64(&[0.0, -1.5e-300]).unwrap();
        t.push_f64(&[0.5, 1.0 / 3.0]).unwrap();
        assert!(t.push_f64(&[1.0]).is_err());
        let text = t.to_text();
        assert!(text.starts_with("t,phi_probe0\n0.0,"));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column_f64("phi_probe0").unwrap(), vec![-1.5e-300, 1.0 / 3.0]);
        assert!(back.column("x").is_err());
        assert!(CsvTable::parse("").is_err());
        assert!(CsvTable::parse("a,b\n1\n").is_err());
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("probes.csv", b"t\n0.0\n").unwrap();
        out.write("snap/phi.pgm", b"P2\n").unwrap();
        assert!(out.write("probes.csv", b"again").is_err());
        let m = out.finish("simulate", "[run]\n").unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.entry("probes.csv").unwrap().size, 6);
        back.verify(dir.path()).unwrap();
        fs::write(dir.path().join("probes.csv"), b"t\n1.0\n").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Format(_))));
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
