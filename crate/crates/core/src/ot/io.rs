//! Point-cloud serialization: the SWPC binary format and plain CSV.
//!
//! SWPC layout: magic `SWPC`, u32 n, u32 d (little endian), then n*d
//! row-major little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ot::PointCloud;

const MAGIC: &[u8; 4] = b"SWPC";

impl PointCloud {
    pub fn write_swpc<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for v in self.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_swpc<R: Read>(r: &mut R) -> Result<PointCloud> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::CorruptHeader(format!(
                "bad magic {:?}, expected SWPC",
                magic
            )));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let n = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let d = u32::from_le_bytes(buf4) as usize;
        if n == 0 || d == 0 {
            return Err(Error::CorruptHeader(format!("n={n}, d={d}")));
        }
        let mut data = vec![0.0; n * d];
        let mut buf8 = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
        PointCloud::new(n, d, data)
    }

    pub fn save_swpc<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_swpc(&mut f)
    }

    pub fn load_swpc<P: AsRef<Path>>(path: P) -> Result<PointCloud> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_swpc(&mut f)
    }

    /// One point per line, comma-separated coordinates.
    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for p in self.iter_points() {
            let line: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<PointCloud> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::CorruptHeader(format!("csv line {}: {e}", lineno + 1))
            })?;
            rows.push(row);
        }
        PointCloud::from_rows(&rows)
    }
}
