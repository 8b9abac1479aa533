//! Report serialisation: CSV series and JSON with every float written to 17
//! significant digits, which round-trips `f64` exactly.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::flow::{CocycleSample, OrbitSegment};
use crate::quadform::DeltaSeries;
use crate::splitting::{AdaptednessReport, SplittingEstimate};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed series: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// `x` with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Pretty JSON whose floats use [`fmt_f64`]; non-finite floats become `null`.
pub struct ExactFloatFormatter {
    inner: PrettyFormatter<'static>,
}

impl Default for ExactFloatFormatter {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloatFormatter::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn write_rows<W: Write>(w: W, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    csv.flush()?;
    Ok(())
}

fn coord_names(prefix: &str, m: usize) -> impl Iterator<Item = String> + '_ {
    (1..=m).map(move |i| format!("{prefix}{i}"))
}

/// `t, x1..xm`.
pub fn write_orbit_csv<W: Write>(w: W, orbit: &OrbitSegment) -> Result<()> {
    let m = orbit.states.first().map_or(0, |x| x.len());
    let header: Vec<String> = std::iter::once("t".to_string()).chain(coord_names("x", m)).collect();
    let rows = orbit.times.iter().zip(&orbit.states).map(|(t, x)| {
        let mut r = vec![*t];
        r.extend(x.iter());
        r
    });
    write_rows(w, &header, rows)
}

/// `t, x1..xm, a11, a12, …, amm` with `A_t` row-major.
pub fn write_cocycle_csv<W: Write>(w: W, sample: &CocycleSample) -> Result<()> {
    let m = sample.dim();
    let mut header: Vec<String> = std::iter::once("t".to_string()).chain(coord_names("x", m)).collect();
    for i in 1..=m {
        for j in 1..=m {
            header.push(format!("a{i}{j}"));
        }
    }
    let rows = sample.orbit.times.iter().zip(&sample.orbit.states).zip(&sample.fundamental).map(|((t, x), a)| {
        let mut r = vec![*t];
        r.extend(x.iter());
        for i in 0..m {
            for j in 0..m {
                r.push(a[(i, j)]);
            }
        }
        r
    });
    write_rows(w, &header, rows)
}

/// `t, delta, delta_k, mineig_hatJ`.
pub fn write_delta_csv<W: Write>(w: W, series: &DeltaSeries) -> Result<()> {
    let header: Vec<String> = ["t", "delta", "delta_k", "mineig_hatJ"].iter().map(|s| s.to_string()).collect();
    let rows = (0..series.times.len())
        .map(|i| vec![series.times[i], series.delta[i], series.delta_k[i], series.min_eig_hat[i]]);
    write_rows(w, &header, rows)
}

/// `t, log_contraction, log_domination, log_volume`, worst case over points.
pub fn write_adaptedness_csv<W: Write>(w: W, report: &AdaptednessReport) -> Result<()> {
    let header: Vec<String> =
        ["t", "log_contraction", "log_domination", "log_volume"].iter().map(|s| s.to_string()).collect();
    let rows = report.rows.iter().map(|r| vec![r.t, r.log_contraction, r.log_domination, r.log_volume]);
    write_rows(w, &header, rows)
}

/// `t, x1..xm, e1..em, f<c>_<i>` where `f<c>_<i>` is entry `i` of frame
/// column `c`.
pub fn write_splitting_csv<W: Write>(w: W, est: &SplittingEstimate) -> Result<()> {
    let m = est.points.first().map_or(0, |p| p.x.len());
    let mut header: Vec<String> = std::iter::once("t".to_string()).chain(coord_names("x", m)).chain(coord_names("e", m)).collect();
    for c in 1..m {
        for i in 1..=m {
            header.push(format!("f{c}_{i}"));
        }
    }
    let rows = est.points.iter().map(|p| {
        let mut r = vec![p.time];
        r.extend(p.x.iter());
        r.extend(p.e.iter());
        for c in 0..p.f.ncols() {
            r.extend(p.f.column(c).iter());
        }
        r
    });
    write_rows(w, &header, rows)
}

/// A numeric CSV table read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv(text: &str) -> Result<Table> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| IoError::Format(format!("row {n}: `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
