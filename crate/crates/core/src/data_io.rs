//! Dataset loading (CPI inflation, Boston housing) and synthetic fixtures.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixture::MixtureOfNormals;

/// Named numeric columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub columns: BTreeMap<String, Vec<f64>>,
    pub note: String,
    pub n_rows: usize,
    /// Rows dropped because a value was missing or unparsable.
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice()).ok_or_else(|| Error::Data(format!("missing column {name}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Quarterly inflation series with its quarter labels `(year, quarter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationSeries {
    pub quarters: Vec<(i32, u32)>,
    pub inflation: Vec<f64>,
}

fn parse_year_month(s: &str) -> Result<(i32, u32)> {
    let mut parts = s.trim().split(['-', '/']);
    let year = parts.next().and_then(|p| p.parse::<i32>().ok());
    let month = parts.next().and_then(|p| p.parse::<u32>().ok());
    match (year, month) {
        (Some(y), Some(m)) if (1..=12).contains(&m) => Ok((y, m)),
        _ => Err(Error::Data(format!("unrecognized date {s:?}; expected YYYY-MM or YYYY-MM-DD"))),
    }
}

fn month_index(y: i32, m: u32) -> i64 {
    y as i64 * 12 + (m as i64 - 1)
}

/// Quarterly averages of consecutive monthly levels, then `400 (P_t / P_{t−1} − 1)`.
/// Incomplete quarters at either end are dropped; gaps inside the span are errors.
pub fn inflation_from_monthly(levels: &[((i32, u32), f64)]) -> Result<InflationSeries> {
    if levels.is_empty() {
        return Err(Error::Data("empty price series".into()));
    }
    for w in levels.windows(2) {
        let (a, b) = (month_index(w[0].0 .0, w[0].0 .1), month_index(w[1].0 .0, w[1].0 .1));
        if b <= a {
            return Err(Error::Data(format!("dates not increasing at {:?}", w[1].0)));
        }
        if b != a + 1 {
            return Err(Error::Data(format!("missing months between {:?} and {:?}", w[0].0, w[1].0)));
        }
    }
    if let Some(((y, m), v)) = levels.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Data(format!("price level {v} at {y}-{m:02} is not positive")));
    }
    let mut quarters: Vec<((i32, u32), Vec<f64>)> = Vec::new();
    for &((y, m), v) in levels {
        let q = (y, (m - 1) / 3 + 1);
        match quarters.last_mut() {
            Some((key, vals)) if *key == q => vals.push(v),
            _ => quarters.push((q, vec![v])),
        }
    }
    if quarters.first().is_some_and(|(_, v)| v.len() < 3) {
        quarters.remove(0);
    }
    if quarters.last().is_some_and(|(_, v)| v.len() < 3) {
        quarters.pop();
    }
    if quarters.len() < 2 {
        return Err(Error::Data("need at least two complete quarters".into()));
    }
    let avg: Vec<f64> = quarters.iter().map(|(_, v)| v.iter().sum::<f64>() / 3.0).collect();
    Ok(InflationSeries {
        quarters: quarters.iter().skip(1).map(|(k, _)| *k).collect(),
        inflation: avg.windows(2).map(|w| 400.0 * (w[1] / w[0] - 1.0)).collect(),
    })
}

/// Reads a monthly `(date, level)` CSV with a header row and converts it to quarterly
/// annualized inflation.
pub fn load_cpi(path: &Path) -> Result<InflationSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut levels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Data(format!("row {} has fewer than two columns", i + 2)));
        }
        let date = parse_year_month(&rec[0])?;
        let level: f64 = rec[1]
            .parse()
            .map_err(|_| Error::Data(format!("row {}: cannot parse level {:?}", i + 2, &rec[1])))?;
        levels.push((date, level));
    }
    let series = inflation_from_monthly(&levels)?;
    log::info!("loaded {} quarterly inflation observations", series.inflation.len());
    Ok(series)
}

/// Monthly levels whose quarterly averages reproduce `inflation`, starting in the quarter
/// before `first_quarter`. Each month of a quarter carries the quarter's level.
pub fn synthesize_cpi_levels(inflation: &[f64], first_quarter: (i32, u32), base: f64) -> Vec<((i32, u32), f64)> {
    let (mut y, mut q) = first_quarter;
    // step back one quarter for the base level
    if q == 1 {
        y -= 1;
        q = 4;
    } else {
        q -= 1;
    }
    let mut level = base;
    let mut out = Vec::with_capacity(3 * (inflation.len() + 1));
    for k in 0..=inflation.len() {
        if k > 0 {
            level *= 1.0 + inflation[k - 1] / 400.0;
        }
        for j in 0..3 {
            out.push(((y, (q - 1) * 3 + 1 + j), level));
        }
        q += 1;
        if q == 5 {
            q = 1;
            y += 1;
        }
    }
    out
}

/// Standard column order of the Boston housing table.
pub const BOSTON_COLUMNS: [&str; 14] =
    ["CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV"];

/// Covariates entering the additive part.
pub const BOSTON_FLEXIBLE: [&str; 6] = ["NOX", "RM", "DIS", "TAX", "LSTAT", "CRIM"];

/// Boston data arranged for the semiparametric model.
#[derive(Debug, Clone)]
pub struct BostonData {
    pub dataset: Dataset,
    /// `ln(MEDV)`.
    pub response: Vec<f64>,
    /// The 13 covariates in standard order, DIS in logs.
    pub linear: Vec<Vec<f64>>,
    pub flexible_names: Vec<String>,
    pub flexible: Vec<Vec<f64>>,
}

fn canonical_boston_name(h: &str) -> String {
    let up = h.trim().to_ascii_uppercase();
    match up.as_str() {
        "MV" => "MEDV".into(),
        "STAT" => "LSTAT".into(),
        _ => up,
    }
}

/// Reads the 14-column Boston housing CSV (header required). `DIS` is replaced by its logarithm.
pub fn load_boston(path: &Path) -> Result<BostonData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(canonical_boston_name).collect();
    let mut index = BTreeMap::new();
    for name in BOSTON_COLUMNS {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("Boston file lacks column {name}")))?;
        index.insert(name, pos);
    }
    let mut columns: BTreeMap<String, Vec<f64>> = BOSTON_COLUMNS.iter().map(|c| (c.to_string(), Vec::new())).collect();
    let mut rejected = 0;
    for rec in reader.records() {
        let rec = rec?;
        let row: Option<Vec<f64>> = BOSTON_COLUMNS
            .iter()
            .map(|c| rec.get(index[c]).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite()))
            .collect();
        match row {
            Some(vals) if vals[13] > 0.0 && vals[7] > 0.0 => {
                for (c, v) in BOSTON_COLUMNS.iter().zip(vals) {
                    columns.get_mut(*c).unwrap().push(v);
                }
            }
            _ => rejected += 1,
        }
    }
    if rejected > 0 {
        log::warn!("rejected {rejected} Boston rows with missing or invalid values");
    }
    let n_rows = columns["MEDV"].len();
    if n_rows != 506 {
        log::warn!("Boston file has {n_rows} usable rows, expected 506");
    }
    if n_rows < 10 {
        return Err(Error::Data(format!("only {n_rows} usable Boston rows")));
    }
    if let Some(dis) = columns.get_mut("DIS") {
        for v in dis.iter_mut() {
            *v = v.ln();
        }
    }
    let response = columns["MEDV"].iter().map(|v| v.ln()).collect();
    let linear = BOSTON_COLUMNS[..13].iter().map(|c| columns[*c].clone()).collect();
    let flexible = BOSTON_FLEXIBLE.iter().map(|c| columns[*c].clone()).collect();
    Ok(BostonData {
        dataset: Dataset {
            name: "boston".into(),
            columns,
            note: "Boston housing; DIS in logs".into(),
            n_rows,
            rejected_rows: rejected,
        },
        response,
        linear,
        flexible_names: BOSTON_FLEXIBLE.iter().map(|s| s.to_string()).collect(),
        flexible,
    })
}

/// `n` draws from `mix` where each draw after the first repeats its predecessor with
/// probability `duplicate_rate`.
pub fn synth_mixture_draws(mix: &MixtureOfNormals, n: usize, duplicate_rate: f64, seed: u64) -> Result<Vec<DVector<f64>>> {
    if !(0.0..1.0).contains(&duplicate_rate) {
        return Err(invalid("duplicate_rate must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let repeat = !out.is_empty() && rng.random::<f64>() < duplicate_rate;
        let z = if repeat { out.last().unwrap().clone() } else { mix.sample(&mut rng) };
        out.push(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn monthly(start: (i32, u32), values: &[f64]) -> Vec<((i32, u32), f64)> {
        let (mut y, mut m) = start;
        values
            .iter()
            .map(|&v| {
                let out = ((y, m), v);
                m += 1;
                if m == 13 {
                    m = 1;
                    y += 1;
                }
                out
            })
            .collect()
    }

    #[test]
    fn constant_prices_give_zero_inflation() {
        let s = inflation_from_monthly(&monthly((2000, 1), &[100.0; 24])).unwrap();
        assert_eq!(s.inflation.len(), 7);
        assert!(s.inflation.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_prices_give_four_hundred() {
        let levels: Vec<f64> = (0..8).flat_map(|q| vec![2f64.powi(q); 3]).collect();
        let s = inflation_from_monthly(&monthly((1990, 1), &levels)).unwrap();
        assert!(s.inflation.iter().all(|&v| (v - 400.0).abs() < 1e-9));
    }

    #[test]
    fn full_span_has_184_quarters() {
        // October 1959 through December 2005
        let n = 3 + 46 * 12;
        let s = inflation_from_monthly(&monthly((1959, 10), &vec![1.0; n])).unwrap();
        assert_eq!(s.inflation.len(), 184);
        assert_eq!(s.quarters[0], (1960, 1));
        assert_eq!(*s.quarters.last().unwrap(), (2005, 4));
    }

    #[test]
    fn edge_quarters_are_dropped_and_gaps_rejected() {
        let s = inflation_from_monthly(&monthly((2000, 2), &[1.0; 14])).unwrap();
        assert_eq!(s.quarters, vec![(2000, 3), (2000, 4), (2001, 1)]);
        let mut gap = monthly((2000, 1), &[1.0; 12]);
        gap.remove(5);
        assert!(inflation_from_monthly(&gap).is_err());
        let mut back = monthly((2000, 1), &[1.0; 12]);
        back.swap(3, 4);
        assert!(inflation_from_monthly(&back).is_err());
    }

    #[test]
    fn round_trip_through_levels() {
        let path: Vec<f64> = (0..40).map(|i| 3.0 + (i as f64 * 0.7).sin() * 4.0).collect();
        let levels = synthesize_cpi_levels(&path, (1980, 1), 50.0);
        let s = inflation_from_monthly(&levels).unwrap();
        assert_eq!(s.inflation.len(), path.len());
        for (a, b) in s.inflation.iter().zip(&path) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cpi_csv_is_loaded() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "DATE,CPIAUCSL").unwrap();
        for ((y, m), v) in synthesize_cpi_levels(&[4.0, 8.0], (2001, 1), 100.0) {
            writeln!(f, "{y}-{m:02}-01,{v}").unwrap();
        }
        let s = load_cpi(f.path()).unwrap();
        assert_eq!(s.inflation.len(), 2);
        assert!((s.inflation[1] - 8.0).abs() < 1e-10);
        assert_eq!(load_cpi(f.path()).unwrap(), s);
    }

    fn boston_file(rows: usize, bad_rows: usize) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", BOSTON_COLUMNS.join(",")).unwrap();
        for i in 0..rows {
            let vals: Vec<String> = (0..14).map(|j| format!("{}", 1.0 + (i * 14 + j) as f64 * 0.01)).collect();
            writeln!(f, "{}", vals.join(",")).unwrap();
        }
        for _ in 0..bad_rows {
            writeln!(f, "1,2,3,4,5,6,7,8,9,10,11,12,,14").unwrap();
        }
        f
    }

    #[test]
    fn boston_loader() {
        let f = boston_file(506, 2);
        let b = load_boston(f.path()).unwrap();
        assert_eq!(b.dataset.n_rows, 506);
        assert_eq!(b.dataset.rejected_rows, 2);
        assert_eq!(b.flexible.len(), 6);
        assert_eq!(b.linear.len(), 13);
        let medv = &b.dataset.columns["MEDV"];
        for (r, m) in b.response.iter().zip(medv) {
            assert_eq!(*r, m.ln());
        }
        let raw_dis = 1.0 + 7.0 * 0.01;
        assert!((b.dataset.columns["DIS"][0] - f64::ln(raw_dis)).abs() < 1e-15);
        assert!(b.dataset.to_json().unwrap().contains("boston"));
    }

    #[test]
    fn boston_missing_column_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "CRIM,ZN").unwrap();
        writeln!(f, "1,2").unwrap();
        assert!(matches!(load_boston(f.path()), Err(Error::Data(_))));
    }

    #[test]
    fn duplicate_injection() {
        let mix = MixtureOfNormals::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let fresh = synth_mixture_draws(&mix, 100, 0.0, 1).unwrap();
        for w in fresh.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        let dup = synth_mixture_draws(&mix, 100, 0.99, 2).unwrap();
        let mut distinct: Vec<f64> = dup.iter().map(|x| x[0]).collect();
        distinct.dedup();
        assert!(distinct.len() < 15);
        assert_eq!(synth_mixture_draws(&mix, 50, 0.5, 3).unwrap(), synth_mixture_draws(&mix, 50, 0.5, 3).unwrap());
        assert!(synth_mixture_draws(&mix, 5, 1.0, 1).is_err());
    }
}
