//! Hourly year data and its CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact header of the year CSV.
pub const YEAR_HEADER: [&str; 7] = [
    "hour",
    "load_e_mw",
    "load_h_mw",
    "load_c_mw",
    "wind_mps",
    "irradiance_wpm2",
    "price_e_rmb_per_mwh",
];

/// Hourly records, one vector per channel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YearSeries {
    pub load_e: Vec<f64>,
    pub load_h: Vec<f64>,
    pub load_c: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub irradiance: Vec<f64>,
    pub price_e: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    hour: usize,
    load_e_mw: f64,
    load_h_mw: f64,
    load_c_mw: f64,
    wind_mps: f64,
    irradiance_wpm2: f64,
    price_e_rmb_per_mwh: f64,
}

impl YearSeries {
    pub fn len(&self) -> usize {
        self.load_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_e.is_empty()
    }

    pub(crate) fn push(&mut self, r: [f64; 6]) {
        self.load_e.push(r[0]);
        self.load_h.push(r[1]);
        self.load_c.push(r[2]);
        self.wind_speed.push(r[3]);
        self.irradiance.push(r[4]);
        self.price_e.push(r[5]);
    }

    fn record(&self, i: usize) -> [f64; 6] {
        [
            self.load_e[i],
            self.load_h[i],
            self.load_c[i],
            self.wind_speed[i],
            self.irradiance[i],
            self.price_e[i],
        ]
    }

    /// Checks one record; `line` is used for messages only.
    fn check_record(r: &[f64; 6], line: usize) -> Result<()> {
        const NAMES: [&str; 6] = ["load_e", "load_h", "load_c", "wind_speed", "irradiance", "price_e"];
        for (k, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!("line {line}: {} is not finite", NAMES[k])));
            }
            if k < 5 && *v < 0.0 {
                return Err(Error::Validation(format!(
                    "line {line}: {} = {v} is negative",
                    NAMES[k]
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self, steps_per_day: usize) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::data(None, "year series is empty"));
        }
        let lens = [
            self.load_h.len(),
            self.load_c.len(),
            self.wind_speed.len(),
            self.irradiance.len(),
            self.price_e.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::data(None, "year channels differ in length"));
        }
        if steps_per_day == 0 || !n.is_multiple_of(steps_per_day) {
            return Err(Error::data(
                None,
                format!("{n} records do not form whole days of {steps_per_day} steps"),
            ));
        }
        for i in 0..n {
            Self::check_record(&self.record(i), i + 2)?;
        }
        Ok(())
    }

    /// Parses the year CSV. Line numbers in errors count the header as 1.
    pub fn from_csv_reader(reader: impl Read, steps_per_day: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::data(Some(1), e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != YEAR_HEADER {
            return Err(Error::data(
                Some(1),
                format!("expected header {}", YEAR_HEADER.join(",")),
            ));
        }
        let mut out = YearSeries::default();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::data(Some(line), e.to_string()))?;
            if row.hour != i {
                return Err(Error::data(
                    Some(line),
                    format!("hour {} out of sequence, expected {i}", row.hour),
                ));
            }
            let r = [
                row.load_e_mw,
                row.load_h_mw,
                row.load_c_mw,
                row.wind_mps,
                row.irradiance_wpm2,
                row.price_e_rmb_per_mwh,
            ];
            Self::check_record(&r, line)?;
            out.push(r);
        }
        if out.is_empty() {
            return Err(Error::data(None, "year file has no data rows"));
        }
        out.validate(steps_per_day)?;
        Ok(out)
    }

    pub fn read_csv(path: &Path, steps_per_day: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file), steps_per_day)
    }

    /// Writes the CSV with shortest round-trip decimal formatting.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "{}", YEAR_HEADER.join(","))?;
        for i in 0..self.len() {
            let r = self.record(i);
            writeln!(w, "{i},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5])?;
        }
        w.flush()?;
        Ok(())
    }
}
