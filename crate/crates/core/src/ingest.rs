//! Survey data: annual counts with a standard error, moved to a centred log
//! scale with per-year log-scale observation sds.
//!
//! Accepted CSV schemas (UTF-8, header row required):
//!
//! * `year,count,se`: survey counts and their standard errors;
//! * `t,x_latent,y_observed,obs_sd`: the simulator output, read as counts
//!   `exp(y_observed)` with standard error `obs_sd * count`.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default lower bound for log-scale observation sds.
pub const DEFAULT_SD_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column '{0}' (expected header year,count,se)")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: count must be positive, got {value}")]
    NonPositiveCount { line: u64, value: f64 },
    #[error("line {line}: standard error must be non-negative, got {value}")]
    NegativeSe { line: u64, value: f64 },
    #[error("gap between years {before} and {after}")]
    GapYears { before: i64, after: i64 },
    #[error("years not strictly increasing at {0}")]
    UnorderedYears(i64),
    #[error("series is empty")]
    Empty,
    #[error("centering window {start}..{end} is empty or outside 0..{len}")]
    BadWindow { start: usize, end: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub species: String,
    pub years: Vec<i64>,
    pub count: Vec<f64>,
    pub count_se: Vec<f64>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.years.is_empty() {
            return Err(IngestError::Empty);
        }
        for (i, (&c, &se)) in self.count.iter().zip(&self.count_se).enumerate() {
            let line = i as u64 + 2;
            if !(c.is_finite() && c > 0.0) {
                return Err(IngestError::NonPositiveCount { line, value: c });
            }
            if !(se.is_finite() && se >= 0.0) {
                return Err(IngestError::NegativeSe { line, value: se });
            }
        }
        for w in self.years.windows(2) {
            if w[1] <= w[0] {
                return Err(IngestError::UnorderedYears(w[1]));
            }
            if w[1] != w[0] + 1 {
                return Err(IngestError::GapYears { before: w[0], after: w[1] });
            }
        }
        Ok(())
    }
}

/// Log-scale view of a series before centering.
#[derive(Debug, Clone, PartialEq)]
pub struct LogScale {
    pub logs: Vec<f64>,
    pub sd: Vec<f64>,
    /// Indices whose sd was raised to the floor.
    pub floored: Vec<usize>,
}

/// Centred log counts with known observation sds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Half-open index range whose mean was removed.
    pub center_window: (usize, usize),
    pub center_value: f64,
    /// Calendar labels for each entry, when known.
    pub years: Option<Vec<i64>>,
}

impl ObservedSeries {
    /// Wrap already-centred data (e.g. simulator output) without shifting it.
    pub fn from_parts(y: Vec<f64>, s: Vec<f64>) -> Self {
        let n = y.len();
        Self {
            y,
            s,
            center_window: (0, n),
            center_value: 0.0,
            years: None,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.y.iter().copied().zip(self.s.iter().copied()).collect()
    }
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<T, IngestError> {
    let raw = rec.get(idx).ok_or_else(|| IngestError::Malformed {
        line,
        message: format!("missing field '{name}'"),
    })?;
    raw.trim().parse().map_err(|_| IngestError::Malformed {
        line,
        message: format!("cannot parse {name} from '{raw}'"),
    })
}

/// Parse and validate a series file. The species label is the file stem.
pub fn load_series(path: impl AsRef<Path>) -> Result<RawSeries, IngestError> {
    let path = path.as_ref();
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let species = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_series(&text, species)
}

/// Parse CSV text; see the module docs for the accepted schemas.
pub fn parse_series(text: &str, species: String) -> Result<RawSeries, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Malformed { line: 1, message: e.to_string() })?
        .clone();

    let simulated = column(&headers, "y_observed").is_some();
    let (iy, ic, is) = if simulated {
        (
            column(&headers, "t").ok_or(IngestError::MissingColumn("t"))?,
            column(&headers, "y_observed").ok_or(IngestError::MissingColumn("y_observed"))?,
            column(&headers, "obs_sd").ok_or(IngestError::MissingColumn("obs_sd"))?,
        )
    } else {
        (
            column(&headers, "year").ok_or(IngestError::MissingColumn("year"))?,
            column(&headers, "count").ok_or(IngestError::MissingColumn("count"))?,
            column(&headers, "se").ok_or(IngestError::MissingColumn("se"))?,
        )
    };

    let mut raw = RawSeries {
        species,
        years: Vec::new(),
        count: Vec::new(),
        count_se: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let year: i64 = field(&rec, iy, line, "year")?;
        let a: f64 = field(&rec, ic, line, "count")?;
        let b: f64 = field(&rec, is, line, "se")?;
        let (count, se) = if simulated { (a.exp(), b * a.exp()) } else { (a, b) };
        if !(count.is_finite() && count > 0.0) {
            return Err(IngestError::NonPositiveCount { line, value: count });
        }
        if !(se.is_finite() && se >= 0.0) {
            return Err(IngestError::NegativeSe { line, value: se });
        }
        raw.years.push(year);
        raw.count.push(count);
        raw.count_se.push(se);
    }
    raw.validate()?;
    Ok(raw)
}

/// Log counts with first-order delta-method sds `se / count`, floored.
pub fn to_log_scale(raw: &RawSeries, sd_floor: f64) -> LogScale {
    let mut floored = Vec::new();
    let sd = raw
        .count
        .iter()
        .zip(&raw.count_se)
        .enumerate()
        .map(|(i, (c, se))| {
            let s = se / c;
            if s < sd_floor {
                floored.push(i);
                sd_floor
            } else {
                s
            }
        })
        .collect();
    LogScale {
        logs: raw.count.iter().map(|c| c.ln()).collect(),
        sd,
        floored,
    }
}

/// Subtract the mean of `logs[window]` from every entry.
pub fn center(logs: &[f64], sd: &[f64], window: Range<usize>) -> Result<ObservedSeries, IngestError> {
    let len = logs.len();
    if window.start >= window.end || window.end > len {
        return Err(IngestError::BadWindow {
            start: window.start,
            end: window.end,
            len,
        });
    }
    let slice = &logs[window.clone()];
    let center_value = slice.iter().sum::<f64>() / slice.len() as f64;
    Ok(ObservedSeries {
        y: logs.iter().map(|v| v - center_value).collect(),
        s: sd.to_vec(),
        center_window: (window.start, window.end),
        center_value,
        years: None,
    })
}

/// `to_log_scale` followed by `center`, carrying the year labels through.
pub fn prepare(raw: &RawSeries, window: Option<Range<usize>>, sd_floor: f64) -> Result<(ObservedSeries, Vec<usize>), IngestError> {
    raw.validate()?;
    let ls = to_log_scale(raw, sd_floor);
    let mut obs = center(&ls.logs, &ls.sd, window.unwrap_or(0..raw.len()))?;
    obs.years = Some(raw.years.clone());
    Ok((obs, ls.floored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn parses_well_formed_file() {
        let raw = parse_series("year,count,se\n1955,100,10\n1956,120,12\n1957,90,8\n", "x".into()).unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw.years, vec![1955, 1956, 1957]);
    }

    #[test]
    fn rejects_zero_count_with_line() {
        let err = parse_series("year,count,se\n1955,100,10\n1956,0,1\n", "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::NonPositiveCount { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_gaps() {
        let err = parse_series("year,count,se\n1955,100,10\n1957,100,10\n", "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::GapYears { before: 1955, after: 1957 }));
    }

    #[test]
    fn rejects_missing_column_and_garbage() {
        assert!(matches!(
            parse_series("year,count\n1955,100\n", "x".into()),
            Err(IngestError::MissingColumn("se"))
        ));
        let err = parse_series("year,count,se\n1955,abc,1\n", "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn reads_simulator_schema() {
        let raw = parse_series(
            "t,x_latent,y_observed,obs_sd\n1,0.0,0.5,0.05\n2,0.1,-0.2,0.05\n",
            "sim".into(),
        )
        .unwrap();
        let ls = to_log_scale(&raw, DEFAULT_SD_FLOOR);
        assert_abs_diff_eq!(ls.logs[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ls.sd[1], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn delta_method_and_floor() {
        let raw = RawSeries {
            species: "x".into(),
            years: vec![1, 2, 3],
            count: vec![100.0, std::f64::consts::E, 1.0],
            count_se: vec![10.0, 0.0, 0.5],
        };
        let ls = to_log_scale(&raw, DEFAULT_SD_FLOOR);
        assert_abs_diff_eq!(ls.sd[0], 0.1, epsilon = 1e-15);
        assert_eq!(ls.sd[1], DEFAULT_SD_FLOOR);
        assert_eq!(ls.floored, vec![1]);
        assert_eq!(ls.logs[2], 0.0);
    }

    #[test]
    fn centering_examples() {
        let o = center(&[1.0, 2.0, 3.0], &[0.1; 3], 0..3).unwrap();
        assert_eq!(o.y, vec![-1.0, 0.0, 1.0]);
        assert_eq!(o.center_value, 2.0);

        let last = center(&[1.0, 2.0, 3.5], &[0.1; 3], 2..3).unwrap();
        assert_eq!(last.y[2], 0.0);

        let twice = center(&o.y, &o.s, 0..3).unwrap();
        assert_eq!(twice.center_value, 0.0);
        assert_eq!(twice.y, o.y);

        assert!(center(&[1.0], &[0.1], 1..1).is_err());
        assert!(center(&[1.0], &[0.1], 0..2).is_err());
    }

    fn series_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(1.0f64..1e7, n),
                prop::collection::vec(0.01f64..0.5, n),
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip_to_counts((count, rel) in series_strategy()) {
            let n = count.len();
            let raw = RawSeries {
                species: "p".into(),
                years: (0..n as i64).collect(),
                count_se: count.iter().zip(&rel).map(|(c, r)| c * r).collect(),
                count,
            };
            let (obs, _) = prepare(&raw, None, DEFAULT_SD_FLOOR).unwrap();
            let mean: f64 = obs.y.iter().sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-10);
            for (y, c) in obs.y.iter().zip(&raw.count) {
                let back = (y + obs.center_value).exp();
                prop_assert!(((back - c) / c).abs() < 1e-12);
            }
        }

        #[test]
        fn centred_series_is_scale_free((count, rel) in series_strategy(), factor in 1e-3f64..1e3) {
            let n = count.len();
            let mk = |f: f64| RawSeries {
                species: "p".into(),
                years: (0..n as i64).collect(),
                count: count.iter().map(|c| c * f).collect(),
                count_se: count.iter().zip(&rel).map(|(c, r)| c * r * f).collect(),
            };
            let (a, _) = prepare(&mk(1.0), None, DEFAULT_SD_FLOOR).unwrap();
            let (b, _) = prepare(&mk(factor), None, DEFAULT_SD_FLOOR).unwrap();
            for (u, v) in a.y.iter().zip(&b.y) {
                prop_assert!((u - v).abs() < 1e-9);
            }
            for (u, v) in a.s.iter().zip(&b.s) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
