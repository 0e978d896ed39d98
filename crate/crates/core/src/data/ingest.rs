//! Cumulative confirmed-case CSV ingestion and day-0 alignment.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Observations, Population};

/// Cumulative confirmed cases for one region, one row per calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCaseSeries {
    pub region: String,
    pub dates: Vec<NaiveDate>,
    pub cumulative: Vec<f64>,
    pub population: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Day 0 is the first date whose cumulative count reaches this value.
    pub threshold: f64,
    /// Replacement for zero daily counts, which have no finite diagnosis rate.
    pub zero_floor: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { threshold: 100.0, zero_floor: 0.5 }
    }
}

/// Aligned window before the zero floor is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedCounts {
    pub day0: NaiveDate,
    pub i_d0: f64,
    /// Non-negative daily increments `B_0 ..= B_T`.
    pub daily: Vec<f64>,
}

impl AlignedCounts {
    /// Cumulative series implied by the cleaned increments, starting at day 0.
    pub fn cleaned_cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.daily.len() + 1);
        let mut acc = self.i_d0;
        out.push(acc);
        for b in &self.daily {
            acc += b;
            out.push(acc);
        }
        out
    }
}

pub fn align_counts(raw: &RawCaseSeries, threshold: f64) -> Result<AlignedCounts> {
    if raw.dates.len() != raw.cumulative.len() {
        return Err(Error::Dimension(format!(
            "{} dates but {} cumulative counts",
            raw.dates.len(),
            raw.cumulative.len()
        )));
    }
    for w in raw.dates.windows(2) {
        if w[1].signed_duration_since(w[0]).num_days() != 1 {
            return Err(Error::NonContiguousDates { prev: w[0], next: w[1] });
        }
    }
    let start = raw
        .cumulative
        .iter()
        .position(|&c| c >= threshold)
        .ok_or(Error::InsufficientData { threshold })?;
    let window = &raw.cumulative[start..];
    if window.len() < 2 {
        return Err(Error::InsufficientData { threshold });
    }
    let daily = window.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    Ok(AlignedCounts { day0: raw.dates[start], i_d0: window[0], daily })
}

/// Aligns the series at the first date with at least `threshold` cases and
/// differences it into daily counts. Downward revisions become zero days,
/// and zero days are replaced by `zero_floor`.
pub fn ingest_cases(raw: &RawCaseSeries, opts: IngestOptions) -> Result<Observations> {
    let aligned = align_counts(raw, opts.threshold)?;
    let cases = aligned
        .daily
        .iter()
        .map(|&b| if b == 0.0 { opts.zero_floor } else { b })
        .collect();
    Observations::new(cases, aligned.i_d0, Population::new(raw.population)?, aligned.day0)
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%y"))
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

fn parse_count(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Parse(format!("{what}: negative or non-finite count {v}")));
    }
    Ok(v)
}

/// Reads either a wide table (one row per region, one column per date, as in
/// the JHU time-series files) or a long table with `date` and a cumulative
/// count column. In the wide form, rows whose region columns match `region`
/// are summed, so county rows aggregate to a state.
pub fn read_case_csv<R: Read>(reader: R, region: Option<&str>) -> Result<(String, Vec<NaiveDate>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let date_cols: Vec<(usize, NaiveDate)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| parse_date(h).map(|d| (i, d)))
        .collect();
    if date_cols.len() >= 2 {
        read_wide(rdr, &header, &date_cols, region)
    } else {
        read_long(rdr, &header, region)
    }
}

fn read_wide<R: Read>(
    mut rdr: csv::Reader<R>,
    header: &[String],
    date_cols: &[(usize, NaiveDate)],
    region: Option<&str>,
) -> Result<(String, Vec<NaiveDate>, Vec<f64>)> {
    let label_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            let h = h.to_ascii_lowercase();
            ["province_state", "province/state", "country_region", "country/region", "region", "state"]
                .contains(&h.as_str())
        })
        .map(|(i, _)| i)
        .collect();
    let mut totals = vec![0.0; date_cols.len()];
    let mut matched = 0usize;
    let mut name = region.unwrap_or_default().to_string();
    for rec in rdr.records() {
        let rec = rec?;
        let hit = match region {
            None => true,
            Some(r) => label_cols
                .iter()
                .any(|&i| rec.get(i).is_some_and(|v| v.trim().eq_ignore_ascii_case(r))),
        };
        if !hit {
            continue;
        }
        if region.is_none() {
            if matched > 0 {
                return Err(Error::Config("wide table has several regions; choose one with --region".into()));
            }
            name = label_cols.first().and_then(|&i| rec.get(i)).unwrap_or("").trim().to_string();
        }
        matched += 1;
        for (k, (i, d)) in date_cols.iter().enumerate() {
            let cell = rec.get(*i).unwrap_or("");
            totals[k] += parse_count(cell, &d.to_string())?;
        }
    }
    if matched == 0 {
        return Err(Error::Config(format!("region `{name}` not found in the table")));
    }
    Ok((name, date_cols.iter().map(|(_, d)| *d).collect(), totals))
}

fn read_long<R: Read>(
    mut rdr: csv::Reader<R>,
    header: &[String],
    region: Option<&str>,
) -> Result<(String, Vec<NaiveDate>, Vec<f64>)> {
    let find = |names: &[&str]| header.iter().position(|h| names.contains(&h.to_ascii_lowercase().as_str()));
    let date_col = find(&["date", "day"]).ok_or_else(|| Error::Parse("no `date` column and no date-like headers".into()))?;
    let count_col = find(&["cumulative", "confirmed", "cases", "count"])
        .ok_or_else(|| Error::Parse("no cumulative count column (cumulative, confirmed, cases)".into()))?;
    let region_col = find(&["region", "state", "province_state"]);
    let mut rows: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let (Some(r), Some(i)) = (region, region_col) {
            if !rec.get(i).is_some_and(|v| v.trim().eq_ignore_ascii_case(r)) {
                continue;
            }
        }
        let ds = rec.get(date_col).unwrap_or("");
        let d = parse_date(ds).ok_or_else(|| Error::Parse(format!("bad date `{ds}`")))?;
        let v = parse_count(rec.get(count_col).unwrap_or(""), ds)?;
        if rows.insert(d, v).is_some() {
            return Err(Error::Parse(format!("duplicate date {d}")));
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData { threshold: 0.0 });
    }
    let (dates, counts) = rows.into_iter().unzip();
    Ok((region.unwrap_or("").to_string(), dates, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(counts: &[f64]) -> RawCaseSeries {
        let d0 = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
        RawCaseSeries {
            region: "X".into(),
            dates: (0..counts.len()).map(|i| d0 + chrono::Days::new(i as u64)).collect(),
            cumulative: counts.to_vec(),
            population: 1e6,
        }
    }

    #[test]
    fn day_zero_alignment() {
        let obs = ingest_cases(&series(&[5.0, 40.0, 98.0, 103.0, 110.0, 130.0]), IngestOptions::default()).unwrap();
        assert_eq!(obs.i_d0, 103.0);
        assert_eq!(obs.cases, vec![7.0, 20.0]);
        assert_eq!(obs.day0, NaiveDate::from_ymd_opt(2020, 3, 4).unwrap());
    }

    #[test]
    fn downward_revision_is_clamped() {
        let a = align_counts(&series(&[100.0, 500.0, 495.0, 510.0]), 100.0).unwrap();
        assert_eq!(a.daily, vec![400.0, 0.0, 15.0]);
        let obs = ingest_cases(&series(&[100.0, 500.0, 495.0, 510.0]), IngestOptions::default()).unwrap();
        assert_eq!(obs.cases, vec![400.0, 0.5, 15.0]);
    }

    #[test]
    fn cumulative_round_trip() {
        let a = align_counts(&series(&[120.0, 130.0, 130.0, 170.0]), 100.0).unwrap();
        assert_eq!(a.cleaned_cumulative(), vec![120.0, 130.0, 130.0, 170.0]);
    }

    #[test]
    fn threshold_never_reached() {
        let err = ingest_cases(&series(&[0.0; 10]), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn gaps_are_rejected() {
        let mut s = series(&[100.0, 120.0, 130.0]);
        s.dates[2] = s.dates[2] + chrono::Days::new(1);
        assert!(matches!(align_counts(&s, 100.0), Err(Error::NonContiguousDates { .. })));
    }

    #[test]
    fn reads_wide_and_long() {
        let wide = "UID,Province_State,Country_Region,3/1/20,3/2/20,3/3/20\n\
                    1,Illinois,US,1,2,3\n2,Illinois,US,100,120,140\n3,Ohio,US,5,6,7\n";
        let (name, dates, counts) = read_case_csv(wide.as_bytes(), Some("illinois")).unwrap();
        assert_eq!(name, "illinois");
        assert_eq!(dates.len(), 3);
        assert_eq!(counts, vec![101.0, 122.0, 143.0]);
        assert!(read_case_csv(wide.as_bytes(), None).is_err());

        let long = "date,cumulative\n2020-03-02,120\n2020-03-01,100\n";
        let (_, dates, counts) = read_case_csv(long.as_bytes(), None).unwrap();
        assert_eq!(dates[0], NaiveDate::from_ymd_opt(2020, 3, 1).unwrap());
        assert_eq!(counts, vec![100.0, 120.0]);
    }
}
