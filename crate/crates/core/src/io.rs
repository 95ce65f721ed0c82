//! The WIDENT1 on-disk dataset format.
//!
//! A dataset `name` consists of a UTF-8 header `name.widh` with `key = value` lines
//! and one payload `name.<var>.widb` per variable holding raw little-endian `f64`
//! values, first spatial axis fastest and time slowest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationSet};
use crate::kv;

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_EXTENSION: &str = "widh";
pub const PAYLOAD_EXTENSION: &str = "widb";

fn header_path(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == HEADER_EXTENSION) {
        path.to_path_buf()
    } else {
        let mut p = path.as_os_str().to_owned();
        p.push(".");
        p.push(HEADER_EXTENSION);
        PathBuf::from(p)
    }
}

/// Payload file of `var` next to the header.
pub fn payload_path(header: &Path, var: &str) -> PathBuf {
    let header = header_path(header);
    let stem = header
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    header.with_file_name(format!("{stem}.{var}.{PAYLOAD_EXTENSION}"))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn float_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

/// Header text for `data`.
pub fn header_text(data: &ObservationSet) -> String {
    let g = &data.grid;
    let mut spacings = g.dx.clone();
    spacings.push(g.dt);
    let mut origins = g.x0.clone();
    origins.push(g.t0);
    let mut out = String::new();
    let _ = writeln!(out, "format = WIDENT1");
    let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
    let _ = writeln!(out, "num_vars = {}", data.num_vars());
    let _ = writeln!(out, "spatial_dims = {}", g.spatial_dims());
    let _ = writeln!(out, "counts = {}", join(&g.shape()));
    let _ = writeln!(out, "spacings = {}", float_list(&spacings));
    let _ = writeln!(out, "origins = {}", float_list(&origins));
    let _ = writeln!(out, "variables = {}", data.names.join(", "));
    out
}

/// Writes the header and one payload per variable. `path` may omit the `.widh` extension.
pub fn save_dataset(data: &ObservationSet, path: &Path) -> Result<PathBuf> {
    data.validate()?;
    if let Some(bad) = data.names.iter().find(|n| !valid_name(n)) {
        return Err(Error::InvalidArgument(format!(
            "variable name '{bad}' is not a plain identifier"
        )));
    }
    let header = header_path(path);
    if let Some(dir) = header.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&header, header_text(data))?;
    for (name, values) in data.names.iter().zip(&data.values) {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(payload_path(&header, name), bytes)?;
    }
    Ok(header)
}

/// Reads a dataset written by [`save_dataset`] or any producer of the same layout.
pub fn load_dataset(path: &Path) -> Result<ObservationSet> {
    let header = header_path(path);
    let fail = |msg: String| Error::Format {
        path: header.clone(),
        msg,
    };
    let text = fs::read_to_string(&header)?;
    let map = kv::parse(&text).map_err(fail)?;
    let get = |key: &str| map.get(key).ok_or_else(|| fail(format!("missing key '{key}'")));
    if get("format")? != "WIDENT1" {
        return Err(fail("not a WIDENT1 header".into()));
    }
    let version: u32 = get("format_version")?
        .parse()
        .map_err(|_| fail("bad format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(fail(format!("unsupported format_version {version}")));
    }
    let num_vars: usize = get("num_vars")?.parse().map_err(|_| fail("bad num_vars".into()))?;
    let spatial_dims: usize = get("spatial_dims")?
        .parse()
        .map_err(|_| fail("bad spatial_dims".into()))?;
    let counts: Vec<usize> = kv::list(get("counts")?)
        .iter()
        .map(|s| s.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| fail("bad counts".into()))?;
    let floats = |key: &str| -> Result<Vec<f64>> {
        kv::list(get(key)?)
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail(format!("bad {key}")))
    };
    let spacings = floats("spacings")?;
    let origins = floats("origins")?;
    let names: Vec<String> = kv::list(get("variables")?).iter().map(|s| s.to_string()).collect();
    let axes = spatial_dims + 1;
    if counts.len() != axes || spacings.len() != axes || origins.len() != axes {
        return Err(fail(format!("expected {axes} counts, spacings and origins")));
    }
    if names.len() != num_vars || names.iter().any(|n| !valid_name(n)) {
        return Err(fail(format!("expected {num_vars} plain variable names")));
    }
    let grid = GridSpec::with_origin(
        counts[..spatial_dims].to_vec(),
        counts[spatial_dims],
        spacings[..spatial_dims].to_vec(),
        spacings[spatial_dims],
        origins[..spatial_dims].to_vec(),
        origins[spatial_dims],
    )
    .map_err(|e| fail(e.to_string()))?;
    let expected = grid.len();
    let mut values = Vec::with_capacity(num_vars);
    for name in &names {
        let p = payload_path(&header, name);
        let bytes = fs::read(&p)?;
        if bytes.len() != expected * 8 {
            return Err(Error::Format {
                path: p,
                msg: format!("payload has {} bytes, header implies {}", bytes.len(), expected * 8),
            });
        }
        let field: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if let Some(i) = field.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                path: p,
                msg: format!("non-finite value at offset {i}"),
            });
        }
        values.push(field);
    }
    ObservationSet::new(grid, names, values).map_err(|e| fail(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ObservationSet {
        let grid = GridSpec::with_origin(vec![5], 4, vec![0.1], 0.3, vec![-1.0], 2.0).unwrap();
        let u: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() / 3.0).collect();
        let v: Vec<f64> = (0..20).map(|i| 1e-300 * i as f64 - 7.25).collect();
        ObservationSet::new(grid, vec!["u".into(), "v".into()], vec![u, v]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample();
        let header = save_dataset(&data, &dir.path().join("set")).unwrap();
        assert!(header.ends_with("set.widh"));
        let back = load_dataset(&header).unwrap();
        assert_eq!(back, data);
        for (a, b) in back.values.iter().flatten().zip(data.values.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let header = save_dataset(&sample(), &dir.path().join("set")).unwrap();
        let payload = payload_path(&header, "v");
        let bytes = fs::read(&payload).unwrap();
        fs::write(&payload, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_dataset(&header), Err(Error::Format { .. })));
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let header = save_dataset(&sample(), &dir.path().join("set")).unwrap();
        let good = fs::read_to_string(&header).unwrap();
        for bad in [
            good.replace("counts = 5, 4", "counts = 5, 5"),
            good.replace("format = WIDENT1", "format = OTHER"),
            good.replace("num_vars = 2", "num_vars = x"),
            good.replace("variables = u, v", "variables = u"),
            "garbage".to_string(),
        ] {
            fs::write(&header, bad).unwrap();
            let err = load_dataset(&header).unwrap_err();
            assert_eq!(err.kind(), "format", "{err}");
        }
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let header = save_dataset(&sample(), &dir.path().join("set")).unwrap();
        let payload = payload_path(&header, "u");
        let mut bytes = fs::read(&payload).unwrap();
        bytes[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&payload, bytes).unwrap();
        assert!(matches!(load_dataset(&header), Err(Error::Format { .. })));
    }
}
