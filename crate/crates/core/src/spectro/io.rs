use std::io::{Read, Write};

use super::fit::FitResult;
use super::lockin::Spectrum;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn read_rows<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let got: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if got.len() < header.len() || got.iter().zip(header).any(|(g, h)| g != h) {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = idx + 2;
        let row = rec
            .iter()
            .take(header.len())
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    reason: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() < header.len() {
            return Err(Error::Parse {
                line,
                reason: "missing column".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_spectrum_csv<W: Write>(w: W, spectrum: &Spectrum) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(["omega_rad_s", "value_V"]).map_err(csv_err)?;
    for (o, v) in spectrum.omegas.iter().zip(&spectrum.values) {
        wr.serialize((o, v)).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `omega_rad_s,value_V`; LO phase and modulation are not stored.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Spectrum> {
    let rows = read_rows(r, &["omega_rad_s", "value_V"])?;
    let (omegas, values) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    Spectrum::new(omegas, values, 0.0, (0.0, 0.0))
}

/// Phase-calibration sweep: both LO quadratures per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData {
    pub omegas: Vec<f64>,
    pub i: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn write_calibration_csv<W: Write>(w: W, data: &CalibrationData) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(["omega_rad_s", "i_V", "q_V"]).map_err(csv_err)?;
    for ((o, i), q) in data.omegas.iter().zip(&data.i).zip(&data.q) {
        wr.serialize((o, i, q)).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_calibration_csv<R: Read>(r: R) -> Result<CalibrationData> {
    let rows = read_rows(r, &["omega_rad_s", "i_V", "q_V"])?;
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut data = CalibrationData {
        omegas: Vec::with_capacity(rows.len()),
        i: Vec::with_capacity(rows.len()),
        q: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        data.omegas.push(r[0]);
        data.i.push(r[1]);
        data.q.push(r[2]);
    }
    Ok(data)
}

const COV_NAMES: [&str; 5] = ["omega0", "gamma2", "k", "phi", "offset"];

impl FitResult {
    /// `key = value` lines, one per field; covariance rows as
    /// comma-separated lists.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("omega0_rad_s", format!("{:e}", self.omega0));
        kv("gamma2_rad_s", format!("{:e}", self.gamma2));
        kv("t2_s", format!("{:e}", self.t2()));
        kv("delta_omega_pp_rad_s", format!("{:e}", self.delta_omega_pp()));
        kv("k", format!("{:e}", self.k));
        kv("phi_rad", format!("{:e}", self.phi));
        kv("offset_V", format!("{:e}", self.offset));
        kv("magnitude_V", format!("{:e}", self.magnitude));
        kv("residual_norm_V", format!("{:e}", self.residual_norm));
        kv("iterations", self.iterations.to_string());
        for (name, row) in COV_NAMES.iter().zip(&self.covariance) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            kv(&format!("cov_{name}"), cells.join(","));
        }
        s
    }
}

/// Inverse of [`FitResult::to_report`].
pub fn parse_fit_report(text: &str) -> Result<FitResult> {
    let mut map = std::collections::HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            reason: "expected `key = value`".into(),
        })?;
        map.insert(k.trim().to_owned(), (idx + 1, v.trim().to_owned()));
    }
    let num = |key: &str| -> Result<f64> {
        let (line, v) = map.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("missing `{key}`"),
        })?;
        v.parse().map_err(|_| Error::Parse {
            line: *line,
            reason: format!("`{v}` is not a number"),
        })
    };
    let mut covariance = [[0.0; 5]; 5];
    for (i, name) in COV_NAMES.iter().enumerate() {
        let key = format!("cov_{name}");
        let (line, v) = map.get(&key).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("missing `{key}`"),
        })?;
        let cells: Vec<&str> = v.split(',').collect();
        if cells.len() != 5 {
            return Err(Error::Parse {
                line: *line,
                reason: "covariance row needs 5 entries".into(),
            });
        }
        for (j, c) in cells.iter().enumerate() {
            covariance[i][j] = c.trim().parse().map_err(|_| Error::Parse {
                line: *line,
                reason: format!("`{c}` is not a number"),
            })?;
        }
    }
    Ok(FitResult {
        omega0: num("omega0_rad_s")?,
        gamma2: num("gamma2_rad_s")?,
        k: num("k")?,
        phi: num("phi_rad")?,
        offset: num("offset_V")?,
        magnitude: num("magnitude_V")?,
        covariance,
        residual_norm: num("residual_norm_V")?,
        iterations: num("iterations")? as usize,
    })
}
