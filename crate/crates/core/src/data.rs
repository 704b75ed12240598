//! Price ingestion, return transforms and descriptive statistics.
//!
//! Level series are read from CSV with ISO-8601 dates, validated, and turned
//! into log returns. Histogram and QQ helpers produce plot-ready data rather
//! than images.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::Reference;

/// Dated index levels. Dates are strictly increasing and all levels positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    label: String,
}

impl ObservationSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(invalid(format!("{} dates but {} values", dates.len(), values.len())));
        }
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: values.len(),
            });
        }
        for (i, (&d, &v)) in dates.iter().zip(&values).enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositiveLevel { date: d, value: v });
            }
            if i > 0 {
                let prev = dates[i - 1];
                if d == prev {
                    return Err(Error::DuplicateDate(d));
                }
                if d < prev {
                    return Err(invalid(format!("dates not increasing at {d}")));
                }
            }
        }
        Ok(Self {
            dates,
            values,
            label: label.into(),
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dated return (or differenced return) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    source_label: String,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, source_label: impl Into<String>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(invalid(format!("{} dates but {} values", dates.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("return at index {i}")));
        }
        Ok(Self {
            dates,
            values,
            source_label: source_label.into(),
        })
    }

    /// Wraps undated values, assigning consecutive daily dates from 2000-01-01.
    pub fn from_values(values: Vec<f64>, source_label: impl Into<String>) -> Result<Self> {
        let dates = synthetic_dates(values.len());
        Self::new(dates, values, source_label)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `date,value` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_dated_csv(out, "value", &self.dates, &self.values)
    }
}

pub(crate) fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n)
        .map(|i| start.checked_add_days(Days::new(i as u64)).expect("date in range"))
        .collect()
}

pub(crate) fn write_dated_csv<W: Write>(out: W, column: &str, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
    w.write_record(["date", column]).map_err(io)?;
    for (d, v) in dates.iter().zip(values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
    Ok(())
}

/// Reads a level series from a headed CSV file.
///
/// Rows are sorted by date after reading; duplicate dates and non-positive
/// levels are rejected. Parse errors report the 1-based line number in the
/// file (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, date_column: &str, value_column: &str) -> Result<ObservationSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let date_idx = column(date_column)?;
    let value_idx = column(value_column)?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let date_raw = record
            .get(date_idx)
            .ok_or_else(|| parse_err("missing date field".into()))?;
        let value_raw = record
            .get(value_idx)
            .ok_or_else(|| parse_err("missing value field".into()))?;
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date '{date_raw}': {e}")))?;
        if value_raw.is_empty() {
            return Err(parse_err("missing value".into()));
        }
        let value: f64 = value_raw
            .parse()
            .map_err(|_| parse_err(format!("bad value '{value_raw}'")))?;
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveLevel { date, value });
        }
        rows.push((date, value));
    }

    let mut seen = HashSet::with_capacity(rows.len());
    for (d, _) in &rows {
        if !seen.insert(*d) {
            return Err(Error::DuplicateDate(*d));
        }
    }
    rows.sort_by_key(|(d, _)| *d);
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (dates, values) = rows.into_iter().unzip();
    ObservationSeries::new(dates, values, label)
}

/// Log returns `ln(x[t+1]) - ln(x[t])`, dated by the later observation.
pub fn log_returns(series: &ObservationSeries) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    let values = series.values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    ReturnSeries::new(series.dates[1..].to_vec(), values, series.label.clone())
}

/// Applies `d` rounds of first differencing.
pub fn difference(series: &ReturnSeries, d: usize) -> Result<ReturnSeries> {
    if series.len() <= d {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: series.len(),
        });
    }
    let values = difference_values(&series.values, d);
    ReturnSeries::new(series.dates[d..].to_vec(), values, series.source_label.clone())
}

pub(crate) fn difference_values(values: &[f64], d: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Sample moments of a return series.
///
/// `skewness` and `excess_kurtosis` are `None` for a constant series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn descriptive_stats(values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in values {
        let e = x - mean;
        let e2 = e * e;
        m2 += e2;
        m3 += e2 * e;
        m4 += e2 * e2;
        min = min.min(x);
        max = max.max(x);
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    let constant = min == max;
    let (skewness, excess_kurtosis) = if constant || m2 == 0.0 {
        (None, None)
    } else {
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    };
    Ok(DescriptiveStats {
        n,
        mean: mean.clamp(min, max),
        sd: if constant { 0.0 } else { sd },
        skewness,
        excess_kurtosis,
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub count: usize,
    /// count / (n * width)
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    /// (x, normal pdf) using the sample mean and sd.
    pub normal_overlay: Vec<(f64, f64)>,
}

const OVERLAY_POINTS: usize = 101;

/// Equal-width histogram over `[min, max]`.
///
/// Bins are right-closed `(lo, hi]` with the first bin also containing the
/// minimum, so `(0, 0.5, 1)` with two bins gives counts `(2, 1)`.
pub fn histogram_data(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(invalid("bins must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, max + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in values {
        let pos = (x - lo) / width;
        let idx = (pos.ceil() as isize - 1).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let out_bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let lower = lo + i as f64 * width;
            let upper = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
            HistogramBin {
                lower,
                upper,
                center: 0.5 * (lower + upper),
                count,
                density: count as f64 / (n * width),
            }
        })
        .collect();

    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let normal_overlay = if sd > 0.0 {
        let reference = Reference::Normal { mean, sd };
        (0..OVERLAY_POINTS)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (OVERLAY_POINTS - 1) as f64;
                (x, reference.pdf(x))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Histogram {
        bins: out_bins,
        normal_overlay,
    })
}

/// QQ pairs `(theoretical, sample)` at plotting positions `(i - 0.5) / n`.
///
/// With `standardize` the sample is centered and scaled by its mean and sd
/// (n - 1 denominator) before sorting; the reference should then be a
/// unit-scale law.
pub fn qq_data(values: &[f64], reference: &Reference, standardize: bool) -> Result<Vec<(f64, f64)>> {
    reference.validate()?;
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let mut sample: Vec<f64> = if standardize {
        let stats = descriptive_stats(values)?;
        if stats.sd == 0.0 {
            return Err(Error::ZeroVariance);
        }
        values.iter().map(|x| (x - stats.mean) / stats.sd).collect()
    } else {
        values.to_vec()
    };
    sample.sort_by(f64::total_cmp);
    let nf = n as f64;
    Ok(sample
        .into_iter()
        .enumerate()
        .map(|(i, s)| (reference.quantile((i as f64 + 0.5) / nf), s))
        .collect())
}
