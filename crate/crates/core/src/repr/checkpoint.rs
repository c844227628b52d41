use super::{EncoderTriple, ReprError, TrainConfig};
use crate::diff::{read_flat_f64, write_flat_f64, Activation, Head, MlpParams, MlpSpec};
use crate::textio::Doc;
use std::path::Path;

/// Everything a checkpoint records besides the parameters themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub train: TrainConfig,
    pub epochs_completed: usize,
    pub obs_dim: usize,
    pub n: usize,
}

/// Write `<stem>.meta` (structured text: architecture echo, training config,
/// step count) plus `<stem>.bin` (flat little-endian f64 parameters of the
/// three networks in order φ_int ‖ φ_ext ‖ φ_cont).
pub fn save_checkpoint(
    stem: &Path,
    enc: &EncoderTriple,
    cfg: &TrainConfig,
    epochs_completed: usize,
) -> Result<(), ReprError> {
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut doc = Doc::new();
    doc.set("checkpoint", "format", 1);
    doc.set("checkpoint", "epochs_completed", epochs_completed);
    doc.set("checkpoint", "obs_dim", enc.obs_dim());
    doc.set("checkpoint", "n", enc.n());
    for (name, spec) in [
        ("phi_int", &enc.spec_int),
        ("phi_ext", &enc.spec_ext),
        ("phi_cont", &enc.spec_cont),
    ] {
        doc.set(
            name,
            "widths",
            spec.widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        doc.set(name, "activation", spec.activation.name());
        doc.set(name, "params", spec.param_count());
    }
    cfg.to_doc(&mut doc);
    doc.write_atomic(&meta_path(stem))?;

    // Blob layout: conv stems (when present) in int/ext/cont order, then
    // the dense nets in the same order.
    let mut flat = Vec::new();
    if let Some(s) = &enc.stem {
        flat.extend(s.int.to_flat());
        flat.extend(s.ext.to_flat());
        flat.extend(s.cont.to_flat());
    }
    flat.extend(enc.params_int.to_flat());
    flat.extend(enc.params_ext.to_flat());
    flat.extend(enc.params_cont.to_flat());
    write_flat_f64(&bin_path(stem), &flat)?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<(EncoderTriple, CheckpointMeta), ReprError> {
    let doc = Doc::read(&meta_path(stem))?;
    let train = TrainConfig::from_doc(&doc)?;
    let n: usize = doc.parse_value("checkpoint", "n")?;
    let obs_dim: usize = doc.parse_value("checkpoint", "obs_dim")?;
    let epochs_completed: usize = doc.parse_value("checkpoint", "epochs_completed")?;

    let read_spec = |name: &str, heads: Vec<Head>| -> Result<MlpSpec, ReprError> {
        let widths_raw = doc.require(name, "widths")?;
        let widths = widths_raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<usize>, _>>()
            .map_err(|_| ReprError::InvalidConfig(format!("bad widths in [{name}]")))?;
        let act_raw = doc.require(name, "activation")?;
        let activation = Activation::parse(act_raw)
            .ok_or_else(|| ReprError::InvalidConfig(format!("bad activation in [{name}]")))?;
        let spec = MlpSpec::new(widths, activation, heads);
        spec.validate()?;
        Ok(spec)
    };
    let spec_int = read_spec("phi_int", vec![])?;
    let spec_ext = read_spec(
        "phi_ext",
        vec![
            Head {
                name: "mean".into(),
                width: n,
            },
            Head {
                name: "cov".into(),
                width: n * (n + 1) / 2,
            },
        ],
    )?;
    let spec_cont = read_spec("phi_cont", vec![])?;

    let flat = read_flat_f64(&bin_path(stem))?;
    let conv_count = train.conv.map(|c| 3 * c.param_count()).unwrap_or(0);
    let (c_int, c_ext, c_cont) = (
        spec_int.param_count(),
        spec_ext.param_count(),
        spec_cont.param_count(),
    );
    if flat.len() != conv_count + c_int + c_ext + c_cont {
        return Err(ReprError::InvalidConfig(format!(
            "parameter blob holds {} values, specs need {}",
            flat.len(),
            conv_count + c_int + c_ext + c_cont
        )));
    }
    let stem_params = match train.conv {
        None => None,
        Some(spec) => {
            let per = spec.param_count();
            let read = |off: usize| -> Result<MlpParams, ReprError> {
                let mut p = spec.zeros_params();
                let wn = p.weights[0].data().len();
                p.weights[0]
                    .data_mut()
                    .copy_from_slice(&flat[off..off + wn]);
                p.biases[0].copy_from_slice(&flat[off + wn..off + per]);
                Ok(p)
            };
            Some(super::encoder::ConvStem {
                spec,
                int: read(0)?,
                ext: read(per)?,
                cont: read(2 * per)?,
            })
        }
    };
    let off = conv_count;
    let params_int = MlpParams::from_flat(&spec_int, &flat[off..off + c_int])?;
    let params_ext = MlpParams::from_flat(&spec_ext, &flat[off + c_int..off + c_int + c_ext])?;
    let params_cont = MlpParams::from_flat(&spec_cont, &flat[off + c_int + c_ext..])?;

    Ok((
        EncoderTriple {
            spec_int,
            spec_ext,
            spec_cont,
            params_int,
            params_ext,
            params_cont,
            stem: stem_params,
        },
        CheckpointMeta {
            train,
            epochs_completed,
            obs_dim,
            n,
        },
    ))
}

fn meta_path(stem: &Path) -> std::path::PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".meta");
    p.into()
}

fn bin_path(stem: &Path) -> std::path::PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".bin");
    p.into()
}
