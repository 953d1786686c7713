//! On-disk formats.
//!
//! Measurement files are line-oriented text:
//!
//! ```text
//! n=3
//! normalization=0.35355339059327373
//! sigma=0
//! 17 0.125
//! 42 -0.0625
//! ```
//!
//! one `<pauli index> <expectation>` line per measured operator. Blank lines
//! and lines starting with `#` are ignored.
//!
//! Density-matrix files start with a one-line JSON header `{"n":3,"format":"text"}`
//! followed by the `2·d²` interleaved real/imaginary parts in row-major
//! order: `d` whitespace-separated text lines for `"text"`, or raw
//! little-endian `f64`s for `"binary"`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::MeasurementVector;
use crate::pauli::SamplingPlan;
use crate::states::DensityMatrix;

pub fn write_measurements<W: Write>(mut w: W, y: &MeasurementVector) -> Result<()> {
    let plan = y.plan();
    writeln!(w, "n={}", plan.n_qubits())?;
    writeln!(w, "normalization={}", plan.normalization())?;
    writeln!(w, "sigma={}", y.noise_sigma())?;
    for (p, v) in plan.operators().iter().zip(y.values()) {
        writeln!(w, "{} {}", p.index(), v)?;
    }
    Ok(())
}

pub fn measurements_to_string(y: &MeasurementVector) -> String {
    let mut buf = Vec::new();
    write_measurements(&mut buf, y).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("measurement files are ASCII")
}

pub fn read_measurements<R: Read>(r: R) -> Result<MeasurementVector> {
    let mut n = None;
    let mut normalization = None;
    let mut sigma = None;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
        if let Some((key, value)) = line.split_once('=') {
            if !indices.is_empty() {
                return Err(bad("header after data"));
            }
            let value = value.trim();
            match key.trim() {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("invalid qubit count"))?),
                "normalization" => {
                    normalization = Some(value.parse::<f64>().map_err(|_| bad("invalid normalization"))?)
                }
                "sigma" => sigma = Some(value.parse::<f64>().map_err(|_| bad("invalid sigma"))?),
                _ => return Err(bad("unknown header key")),
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(idx), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `<index> <value>`"));
        };
        indices.push(idx.parse::<u64>().map_err(|_| bad("invalid index"))?);
        values.push(val.parse::<f64>().map_err(|_| bad("invalid value"))?);
    }
    let n = n.ok_or_else(|| Error::Parse("missing `n=` header".into()))?;
    let normalization = normalization.ok_or_else(|| Error::Parse("missing `normalization=` header".into()))?;
    let sigma = sigma.ok_or_else(|| Error::Parse("missing `sigma=` header".into()))?;
    if indices.is_empty() {
        return Err(Error::Parse("no measurements".into()));
    }
    let plan = SamplingPlan::new(n, &indices, normalization)?;
    MeasurementVector::new(plan, values, sigma)
}

pub fn save_measurements(path: impl AsRef<Path>, y: &MeasurementVector) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_measurements(&mut f, y)?;
    f.flush()?;
    Ok(())
}

pub fn load_measurements(path: impl AsRef<Path>) -> Result<MeasurementVector> {
    read_measurements(fs::File::open(path)?)
}

/// Re-expresses `y` under another operator scale. Expectations are linear in
/// the scale, so values and sigma are multiplied by `target / current`.
pub fn rescale_measurements(y: &MeasurementVector, normalization: f64) -> Result<MeasurementVector> {
    let plan = y.plan();
    let factor = normalization / plan.normalization();
    let rescaled = SamplingPlan::new(plan.n_qubits(), &plan.indices(), normalization)?
        .with_execution(plan.execution());
    MeasurementVector::new(
        rescaled,
        y.values().iter().map(|v| v * factor).collect(),
        y.noise_sigma() * factor,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    #[default]
    Text,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    n: usize,
    format: MatrixFormat,
}

pub fn write_density_matrix<W: Write>(mut w: W, rho: &DensityMatrix, format: MatrixFormat) -> Result<()> {
    let header = MatrixHeader {
        n: rho.n_qubits(),
        format,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    let m = rho.as_ref();
    let d = rho.dim();
    match format {
        MatrixFormat::Text => {
            for i in 0..d {
                let row: Vec<String> = (0..d)
                    .flat_map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()])
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        MatrixFormat::Binary => {
            let mut buf = Vec::with_capacity(16 * d * d);
            for i in 0..d {
                for j in 0..d {
                    buf.extend_from_slice(&m[(i, j)].re.to_le_bytes());
                    buf.extend_from_slice(&m[(i, j)].im.to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn read_density_matrix<R: Read>(r: R) -> Result<DensityMatrix> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header: MatrixHeader =
        serde_json::from_str(first.trim()).map_err(|e| Error::Parse(format!("bad density-matrix header: {e}")))?;
    crate::pauli::check_qubits(header.n)?;
    let d = 1usize << header.n;
    let flat: Vec<f64> = match header.format {
        MatrixFormat::Text => {
            let mut body = String::new();
            reader.read_to_string(&mut body)?;
            body.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("invalid number {tok:?}")))
                })
                .collect::<Result<_>>()?
        }
        MatrixFormat::Binary => {
            let mut body = Vec::new();
            reader.read_to_end(&mut body)?;
            if body.len() % 8 != 0 {
                return Err(Error::Parse("binary payload is not a whole number of f64s".into()));
            }
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
    };
    if flat.len() != 2 * d * d {
        return Err(Error::Parse(format!(
            "expected {} numbers for n={}, found {}",
            2 * d * d,
            header.n,
            flat.len()
        )));
    }
    let m = Mat::from_fn(d, d, |i, j| {
        let k = 2 * (i * d + j);
        c64::new(flat[k], flat[k + 1])
    });
    DensityMatrix::from_matrix(header.n, m)
}

pub fn save_density_matrix(path: impl AsRef<Path>, rho: &DensityMatrix, format: MatrixFormat) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_density_matrix(&mut f, rho, format)?;
    f.flush()?;
    Ok(())
}

pub fn load_density_matrix(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    read_density_matrix(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{measure, NoiseSpec};
    use crate::pauli::draw_plan;
    use crate::states::wishart_state;
    use proptest::prelude::*;

    #[test]
    fn measurement_file_layout() {
        let rho = wishart_state(2, 1, 0).unwrap();
        let plan = SamplingPlan::new(2, &[0, 5], 0.5).unwrap();
        let y = measure(&rho, &plan, NoiseSpec::noiseless()).unwrap();
        let text = measurements_to_string(&y);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[..3], ["n=2", "normalization=0.5", "sigma=0"]);
        assert_eq!(lines[3], "0 0.5");
        assert!(lines[4].starts_with("5 "));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn measurement_round_trip_and_sigma() {
        let rho = wishart_state(3, 1, 1).unwrap();
        let plan = draw_plan(3, 0.4, 1).unwrap();
        let y = measure(&rho, &plan, NoiseSpec::snr(40.0, 1)).unwrap();
        let text = measurements_to_string(&y);
        assert!(text.lines().nth(2).unwrap().starts_with("sigma="));
        assert_ne!(y.noise_sigma(), 0.0);
        let back = read_measurements(text.as_bytes()).unwrap();
        assert_eq!(back, y);
        assert_eq!(back.noise_sigma(), y.noise_sigma());
    }

    #[test]
    fn corrupt_measurement_files() {
        for text in [
            "",
            "n=2\nnormalization=0.5\n0 1.0\n",
            "n=2\nnormalization=0.5\nsigma=0\n",
            "n=2\nnormalization=0.5\nsigma=0\n0 abc\n",
            "n=2\nnormalization=0.5\nsigma=0\n0 1 2\n",
            "n=2\nnormalization=0.5\nsigma=0\n99 1\n",
            "n=2\nnormalization=0.5\nsigma=0\n1 1\n1 2\n",
            "n=2\nnormalization=0.5\nsigma=0\nfoo=1\n1 1\n",
        ] {
            assert!(read_measurements(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn rescaling_raw_pauli_data() {
        let rho = wishart_state(2, 1, 3).unwrap();
        let raw_plan = SamplingPlan::new(2, &[1, 6, 11], 1.0).unwrap();
        let raw = measure(&rho, &raw_plan, NoiseSpec::noiseless()).unwrap();
        let scaled = rescale_measurements(&raw, 0.5).unwrap();
        let direct = measure(&rho, &SamplingPlan::new(2, &[1, 6, 11], 0.5).unwrap(), NoiseSpec::noiseless()).unwrap();
        for (a, b) in scaled.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn density_matrix_text_and_binary() {
        let rho = wishart_state(3, 2, 9).unwrap();
        for format in [MatrixFormat::Text, MatrixFormat::Binary] {
            let mut buf = Vec::new();
            write_density_matrix(&mut buf, &rho, format).unwrap();
            let header = buf.split(|&b| b == b'\n').next().unwrap();
            let expected = match format {
                MatrixFormat::Text => r#"{"n":3,"format":"text"}"#,
                MatrixFormat::Binary => r#"{"n":3,"format":"binary"}"#,
            };
            assert_eq!(header, expected.as_bytes());
            assert_eq!(read_density_matrix(buf.as_slice()).unwrap(), rho);
        }
    }

    #[test]
    fn corrupt_density_matrix_files() {
        assert!(read_density_matrix("not json\n".as_bytes()).is_err());
        assert!(read_density_matrix("{\"n\":1,\"format\":\"text\"}\n1 0 0 0\n".as_bytes()).is_err());
        assert!(read_density_matrix("{\"n\":1,\"format\":\"text\"}\n1 0 0 0 0 0 x 0\n".as_bytes()).is_err());
        assert!(read_density_matrix("{\"n\":1,\"format\":\"binary\"}\n123".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn text_matrix_round_trip_is_exact(seed in any::<u64>(), n in 1usize..4, rank in 1usize..3) {
            let rho = wishart_state(n, rank.min(1 << n), seed).unwrap();
            let mut buf = Vec::new();
            write_density_matrix(&mut buf, &rho, MatrixFormat::Text).unwrap();
            prop_assert_eq!(read_density_matrix(buf.as_slice()).unwrap(), rho);
        }

        #[test]
        fn measurement_round_trip_is_exact(seed in any::<u64>(), eta in 0.05f64..1.0) {
            let rho = wishart_state(3, 1, seed).unwrap();
            let plan = draw_plan(3, eta, seed).unwrap();
            let y = measure(&rho, &plan, NoiseSpec::snr(30.0, seed)).unwrap();
            let back = read_measurements(measurements_to_string(&y).as_bytes()).unwrap();
            prop_assert_eq!(back, y);
        }
    }
}
