//! Model checkpoints: a JSON object
//! `{"version": 1, "arch": [...], "classes": K, "flat": [...]}` whose floats
//! carry 17 significant digits, so loading restores every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mcgdm_core::model::ModelParams;
use serde::Deserialize;

use crate::{AppError, AppResult};

pub const VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    version: u32,
    arch: Vec<usize>,
    classes: usize,
    flat: Vec<f64>,
}

pub fn to_json(params: &ModelParams) -> String {
    let mut s = String::new();
    let arch: Vec<String> = params.arch().iter().map(|d| d.to_string()).collect();
    write!(
        s,
        "{{\"version\":{VERSION},\"arch\":[{}],\"classes\":{},\"flat\":[",
        arch.join(","),
        params.classes()
    )
    .unwrap();
    for (i, v) in params.flatten().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v:.16e}").unwrap();
    }
    s.push_str("]}\n");
    s
}

pub fn from_json(text: &str) -> AppResult<ModelParams> {
    let raw: Raw = serde_json::from_str(text).map_err(|e| AppError::Parse(format!("malformed checkpoint: {e}")))?;
    if raw.version != VERSION {
        return Err(AppError::Parse(format!(
            "unsupported checkpoint version {} (expected {VERSION})",
            raw.version
        )));
    }
    let expected = ModelParams::param_count(&raw.arch, raw.classes);
    if raw.flat.len() != expected {
        return Err(mcgdm_core::Error::Contract(format!(
            "checkpoint declares arch {:?} with {} classes ({expected} parameters) but stores {}",
            raw.arch,
            raw.classes,
            raw.flat.len()
        ))
        .into());
    }
    Ok(ModelParams::unflatten(&raw.arch, raw.classes, &raw.flat)?)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> AppResult<()> {
    fs::write(path, to_json(params)).map_err(|e| AppError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> AppResult<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    from_json(&text).map_err(|e| match e {
        AppError::Parse(m) => AppError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let p = ModelParams::init(&[3, 5, 4], 3, 17).unwrap();
        let q = from_json(&to_json(&p)).unwrap();
        let bits = |m: &ModelParams| m.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p), bits(&q));
        assert_eq!(p, q);
    }

    #[test]
    fn awkward_values_survive() {
        let mut p = ModelParams::zeros(&[1], 2).unwrap();
        let vals = [0.1, -1.0 / 3.0, 5e-324, 1.7976931348623157e308];
        p.head.weight.data_mut().copy_from_slice(&vals[..2]);
        p.head.bias.data_mut().copy_from_slice(&vals[2..]);
        assert_eq!(from_json(&to_json(&p)).unwrap(), p);
    }

    #[test]
    fn malformed_file_reports_position() {
        let err = from_json("{\"version\": 1,\n \"arch\": [2,}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let err = from_json("{\"version\":2,\"arch\":[1],\"classes\":2,\"flat\":[0,0,0,0]}").unwrap_err();
        assert!(err.to_string().contains("version 2"));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let err = from_json("{\"version\":1,\"arch\":[1],\"classes\":2,\"flat\":[0,0,0]}").unwrap_err();
        assert!(matches!(err, AppError::Core(mcgdm_core::Error::Contract(_))));
    }
}
