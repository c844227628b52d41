use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

/// Write a flat little-endian f64 blob atomically (temp file + rename).
pub fn write_flat_f64(path: &Path, values: &[f64]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
        for v in values {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
    }
    fs::rename(&tmp, path)
}

pub fn read_flat_f64(path: &Path) -> io::Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}: length {} is not a multiple of 8", path.display(), bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
