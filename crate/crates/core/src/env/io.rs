use super::{Dataset, EnvError, GenReport, TruthRecord, TruthSidecar, WorldConfig, WorldState};
use crate::geom::PointN;
use crate::textio::{write_atomic, Doc};
use std::fs;
use std::path::Path;

pub const DATASET_MANIFEST: &str = "manifest.txt";
pub const DATASET_RECORDS: &str = "records.bin";
pub const DATASET_TRUTH: &str = "truth.bin";

/// Persist a dataset as manifest + flat f32 records + a separate f64 truth
/// sidecar. The sidecar is a distinct file precisely so training can run
/// with it deleted.
pub fn save_dataset(
    dir: &Path,
    cfg: &WorldConfig,
    data: &Dataset,
    truth: &TruthSidecar,
    report: &GenReport,
    seed: u64,
) -> Result<(), EnvError> {
    fs::create_dir_all(dir)?;
    let mut doc = Doc::new();
    doc.set("dataset", "records", data.len());
    doc.set("dataset", "seed", seed);
    doc.set("dataset", "n", data.n);
    doc.set("dataset", "obs_dim", data.obs_dim);
    doc.set("dataset", "has_orientation", cfg.has_orientation());
    doc.set("dataset", "interaction_fraction", report.interaction_fraction);
    cfg.to_doc(&mut doc);
    doc.write_atomic(&dir.join(DATASET_MANIFEST))?;
    write_atomic(&dir.join(DATASET_RECORDS), &data.to_bytes())?;
    write_atomic(&dir.join(DATASET_TRUTH), &truth_to_bytes(truth, cfg.n))?;
    Ok(())
}

/// Load the learner-visible part of a dataset: records plus manifest.
/// The truth sidecar is not touched.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, Doc), EnvError> {
    let doc = Doc::read(&dir.join(DATASET_MANIFEST))?;
    let n: usize = doc.parse_value("dataset", "n")?;
    let obs_dim: usize = doc.parse_value("dataset", "obs_dim")?;
    let records: usize = doc.parse_value("dataset", "records")?;
    let bytes = fs::read(dir.join(DATASET_RECORDS))?;
    let data = Dataset::from_bytes(n, obs_dim, &bytes)?;
    if data.len() != records {
        return Err(EnvError::BadData(format!(
            "manifest declares {records} records, file holds {}",
            data.len()
        )));
    }
    Ok((data, doc))
}

/// Load the evaluation-only truth sidecar.
pub fn load_truth(dir: &Path) -> Result<TruthSidecar, EnvError> {
    let doc = Doc::read(&dir.join(DATASET_MANIFEST))?;
    let n: usize = doc.parse_value("dataset", "n")?;
    let oriented: bool = doc.parse_value("dataset", "has_orientation")?;
    let path = dir.join(DATASET_TRUTH);
    if !path.exists() {
        return Err(EnvError::MissingTruth(path.display().to_string()));
    }
    let bytes = fs::read(&path)?;
    truth_from_bytes(&bytes, n, oriented)
}

fn truth_to_bytes(truth: &TruthSidecar, n: usize) -> Vec<u8> {
    let mut out = Vec::new();
    let push_state = |out: &mut Vec<u8>, s: &WorldState| {
        for v in s.s_int.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in s.s_ext.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(theta) = s.orientation {
            out.extend_from_slice(&theta.to_le_bytes());
        }
    };
    for rec in &truth.records {
        debug_assert_eq!(rec.s.s_int.dim(), n);
        push_state(&mut out, &rec.s);
        push_state(&mut out, &rec.s_next);
        for v in rec.action.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(if rec.interacted { 1.0f64 } else { 0.0f64 }).to_le_bytes());
    }
    out
}

fn truth_from_bytes(bytes: &[u8], n: usize, oriented: bool) -> Result<TruthSidecar, EnvError> {
    let state_len = 2 * n + usize::from(oriented);
    let record_len = (2 * state_len + n + 1) * 8;
    if record_len == 0 || bytes.len() % record_len != 0 {
        return Err(EnvError::BadData(format!(
            "truth file length {} is not a multiple of record size {record_len}",
            bytes.len()
        )));
    }
    let mut records = Vec::with_capacity(bytes.len() / record_len);
    let mut off = 0;
    let read_f64 = |off: &mut usize| {
        let v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    let read_state = |off: &mut usize| -> Result<WorldState, EnvError> {
        let mut coords = vec![0.0; n];
        for c in coords.iter_mut() {
            *c = read_f64(off);
        }
        let s_int = PointN::new(&coords).map_err(EnvError::Geom)?;
        for c in coords.iter_mut() {
            *c = read_f64(off);
        }
        let s_ext = PointN::new(&coords).map_err(EnvError::Geom)?;
        let orientation = oriented.then(|| read_f64(off));
        Ok(WorldState {
            s_int,
            s_ext,
            orientation,
        })
    };
    while off < bytes.len() {
        let s = read_state(&mut off)?;
        let s_next = read_state(&mut off)?;
        let mut coords = vec![0.0; n];
        for c in coords.iter_mut() {
            *c = read_f64(&mut off);
        }
        let action = PointN::new(&coords).map_err(EnvError::Geom)?;
        let interacted = read_f64(&mut off) != 0.0;
        records.push(TruthRecord {
            s,
            s_next,
            action,
            interacted,
        });
    }
    Ok(TruthSidecar { records })
}
