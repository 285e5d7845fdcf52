//! CSV input: columns `x1..xd, y, z, pi` and an optional `sigma`.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{estimate_noise_sd, Dataset, NoiseSd};
use crate::error::{Error, Result};
use crate::real::Real;

/// Default neighbour count for noise estimation when `sigma` is absent.
pub const DEFAULT_NOISE_NEIGHBOURS: usize = 2;

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

/// Parses a dataset. Missing `sigma` is filled with the nearest-neighbour estimate using `j` neighbours.
pub fn read_dataset<T: Real, R: Read>(reader: R, j: usize) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| schema(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut x_cols = Vec::new();
    while let Some(c) = find(&format!("x{}", x_cols.len() + 1)) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(schema("missing covariate column x1"));
    }
    let y_col = find("y").ok_or_else(|| schema("missing column y"))?;
    let z_col = find("z").ok_or_else(|| schema("missing column z"))?;
    let pi_col = find("pi").ok_or_else(|| schema("missing column pi"))?;
    let sigma_col = find("sigma");

    let (mut x, mut y, mut z, mut pi, mut sigma) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| schema(format!("line {line}: {e}")))?;
        let num = |c: usize, name: &str| -> Result<T> {
            let raw = rec
                .get(c)
                .ok_or_else(|| schema(format!("line {line}: missing field {name}")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| schema(format!("line {line}: field {name} = {raw:?} is not a number")))?;
            T::from_f64(v).ok_or_else(|| schema(format!("line {line}: field {name} out of range")))
        };
        for (k, &c) in x_cols.iter().enumerate() {
            x.push(num(c, &format!("x{}", k + 1))?);
        }
        y.push(num(y_col, "y")?);
        let zv = num(z_col, "z")?;
        z.push(if zv == T::one() {
            true
        } else if zv == T::zero() {
            false
        } else {
            return Err(schema(format!("line {line}: z must be 0 or 1")));
        });
        pi.push(num(pi_col, "pi")?);
        if let Some(c) = sigma_col {
            sigma.push(num(c, "sigma")?);
        }
    }
    if y.is_empty() {
        return Err(schema("no data rows"));
    }
    let d = x_cols.len();
    match sigma_col {
        Some(_) => Dataset::from_flat(x, d, y, z, pi, NoiseSd::PerUnit(sigma)),
        None => {
            let provisional = Dataset::from_flat(x, d, y, z, pi, NoiseSd::Shared(T::one()))?;
            let s = estimate_noise_sd(&provisional, j)?;
            if !(s > T::zero()) {
                return Err(Error::Degenerate(
                    "estimated noise sd is zero; supply a sigma column".into(),
                ));
            }
            provisional.with_noise(NoiseSd::Shared(s))
        }
    }
}

pub fn read_dataset_file<T: Real>(path: &Path, j: usize) -> Result<Dataset<T>> {
    let f = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(f), j)
}

/// Writes all columns including `sigma`.
pub fn write_dataset<T: Real, W: Write>(data: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.extend(["y", "z", "pi", "sigma"].map(String::from));
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x(i).iter().map(|v| v.as_f64().to_string()).collect();
        rec.push(data.y()[i].as_f64().to_string());
        rec.push(u8::from(data.z()[i]).to_string());
        rec.push(data.pi()[i].as_f64().to_string());
        rec.push(data.sigma()[i].as_f64().to_string());
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
