use std::fmt::Write as _;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Frequency, SampleSeries, TermQuery, TimeGrid};

/// Stored value for periods exported as `<1`: the midpoint of the censored
/// interval.
pub const LOW_VOLUME_VALUE: f64 = 0.5;

const DEFAULT_CATEGORY: &str = "All categories";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses one export:
///
/// ```text
/// Category: <name>
///
/// Month,<term>: (<geo>)        (or Day,...)
/// 2009-01,37
/// 2009-02,<1
/// ```
///
/// `<1` becomes 0.5 with its low-volume flag set. The sample id is the
/// download date.
pub fn parse_trends_csv(text: &str, download_date: NaiveDate) -> Result<SampleSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));

    let first = lines.next().unwrap_or_default();
    if first
        .strip_prefix("Category:")
        .map(str::trim)
        .is_none_or(str::is_empty)
    {
        return Err(parse_err(1, format!("expected `Category: <name>`, found `{first}`")));
    }
    match lines.next() {
        Some(l) if l.trim().is_empty() => {}
        other => {
            return Err(parse_err(
                2,
                format!("expected a blank line, found `{}`", other.unwrap_or("<eof>")),
            ))
        }
    }
    let header = lines
        .next()
        .ok_or_else(|| parse_err(3, "missing column header"))?;
    let (period_col, series_col) = header
        .split_once(',')
        .ok_or_else(|| parse_err(3, format!("malformed header `{header}`")))?;
    let frequency = match period_col {
        "Month" => Frequency::Monthly,
        "Day" => Frequency::Daily,
        other => {
            return Err(parse_err(
                3,
                format!("period column must be `Month` or `Day`, found `{other}`"),
            ))
        }
    };
    let (term, geo) = series_col
        .strip_suffix(')')
        .and_then(|s| s.rsplit_once(": ("))
        .filter(|(t, g)| !t.trim().is_empty() && !g.trim().is_empty())
        .ok_or_else(|| {
            parse_err(3, format!("series column must look like `<term>: (<geo>)`, found `{series_col}`"))
        })?;

    let mut periods = Vec::new();
    let mut values = Vec::new();
    let mut low_volume = Vec::new();
    let mut trailing_blank = None;
    for (i, line) in lines.enumerate() {
        let n = i + 4;
        if line.trim().is_empty() {
            trailing_blank.get_or_insert(n);
            continue;
        }
        if let Some(blank) = trailing_blank {
            return Err(parse_err(blank, "blank line inside the data block"));
        }
        let (period, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err(n, format!("expected `<period>,<value>`, found `{line}`")))?;
        let date = frequency.parse_label(period).ok_or_else(|| {
            parse_err(n, format!("period `{period}` is not a valid {frequency} label"))
        })?;
        let (v, flag) = if value == "<1" {
            (LOW_VOLUME_VALUE, true)
        } else {
            match value.parse::<u8>() {
                Ok(v) if v <= 100 => (v as f64, false),
                _ => {
                    return Err(parse_err(
                        n,
                        format!("value `{value}` is neither an integer in 0..=100 nor `<1`"),
                    ))
                }
            }
        };
        periods.push(date);
        values.push(v);
        low_volume.push(flag);
    }
    let grid = TimeGrid::new(frequency, periods).map_err(|e| parse_err(4, e.to_string()))?;
    let query = TermQuery::for_grid(term.trim(), geo.trim(), &grid);
    Ok(SampleSeries {
        query,
        values,
        low_volume,
        download_date,
        sample_id: download_date.format("%Y-%m-%d").to_string(),
    })
}

/// Canonical export text (UTF-8, LF line endings, no BOM). Fails for values
/// the export grammar cannot carry.
pub fn to_trends_csv(series: &SampleSeries) -> Result<String> {
    let q = &series.query;
    let grid = q.grid()?;
    if series.values.len() != grid.len() || series.low_volume.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: series.values.len(),
        });
    }
    let period_col = match q.frequency {
        Frequency::Monthly => "Month",
        Frequency::Daily => "Day",
    };
    let mut out = format!(
        "Category: {DEFAULT_CATEGORY}\n\n{period_col},{}: ({})\n",
        q.term, q.geo
    );
    for (i, (label, (&v, &flag))) in grid
        .labels()
        .zip(series.values.iter().zip(&series.low_volume))
        .enumerate()
    {
        if flag {
            if v != LOW_VOLUME_VALUE {
                return Err(Error::series(i, format!("low-volume period holds {v}, expected 0.5")));
            }
            let _ = writeln!(out, "{label},<1");
        } else if v.fract() == 0.0 && (0.0..=100.0).contains(&v) {
            let _ = writeln!(out, "{label},{}", v as u8);
        } else {
            return Err(Error::series(i, format!("value {v} is not an integer in 0..=100")));
        }
    }
    Ok(out)
}

/// First 8 bytes of the SHA-256 digest, as a big-endian integer.
pub fn checksum(content: &[u8]) -> u64 {
    let digest = Sha256::digest(content);
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 2, 3).unwrap()
    }

    const MINIMAL: &str = "Category: All categories\n\nMonth,gdp growth: (BR)\n2009-01,10\n2009-02,100\n2009-03,50\n";

    #[test]
    fn minimal_monthly_file() {
        let s = parse_trends_csv(MINIMAL, date()).unwrap();
        assert_eq!(s.values, vec![10.0, 100.0, 50.0]);
        assert_eq!(s.query.term, "gdp growth");
        assert_eq!(s.query.geo, "BR");
        assert_eq!(s.query.frequency, Frequency::Monthly);
        assert_eq!(s.query.len(), 3);
        assert_eq!(s.sample_id, "2021-02-03");
        assert!(!s.has_low_volume());
        assert_eq!(to_trends_csv(&s).unwrap(), MINIMAL);
    }

    #[test]
    fn low_volume_rows() {
        let text = "Category: All categories\n\nDay,refined petroleum: (US)\n2020-06-01,<1\n2020-06-02,100\n";
        let s = parse_trends_csv(text, date()).unwrap();
        assert_eq!(s.values, vec![0.5, 100.0]);
        assert_eq!(s.low_volume, vec![true, false]);
        assert_eq!(s.query.frequency, Frequency::Daily);
        let back = parse_trends_csv(&to_trends_csv(&s).unwrap(), date()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn tolerates_bom_and_crlf() {
        let text = format!("\u{feff}{}", MINIMAL.replace('\n', "\r\n"));
        assert_eq!(parse_trends_csv(&text, date()).unwrap().values, vec![10.0, 100.0, 50.0]);
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn header_errors_name_their_line() {
        let no_category = "\nMonth,x: (BR)\n2009-01,10\n2009-02,100\n";
        assert_eq!(line_of(parse_trends_csv(no_category, date()).unwrap_err()), 1);
        let no_blank = "Category: All categories\nMonth,x: (BR)\n2009-01,10\n";
        assert_eq!(line_of(parse_trends_csv(no_blank, date()).unwrap_err()), 2);
        let week = "Category: All categories\n\nWeek,x: (BR)\n2009-01,10\n2009-02,100\n";
        assert_eq!(line_of(parse_trends_csv(week, date()).unwrap_err()), 3);
        let no_geo = "Category: All categories\n\nMonth,x\n2009-01,10\n2009-02,100\n";
        assert_eq!(line_of(parse_trends_csv(no_geo, date()).unwrap_err()), 3);
    }

    #[test]
    fn body_errors() {
        let gap = "Category: c\n\nMonth,x: (BR)\n2009-01,10\n2009-03,100\n";
        assert!(parse_trends_csv(gap, date()).is_err());
        let over = "Category: c\n\nMonth,x: (BR)\n2009-01,101\n2009-02,100\n";
        assert_eq!(line_of(parse_trends_csv(over, date()).unwrap_err()), 4);
        let comma = "Category: c\n\nMonth,x: (BR)\n2009-01,100\n2009-02,\"1,5\"\n";
        assert_eq!(line_of(parse_trends_csv(comma, date()).unwrap_err()), 5);
        let daily_in_monthly = "Category: c\n\nMonth,x: (BR)\n2009-01-01,100\n2009-02-01,1\n";
        assert!(parse_trends_csv(daily_in_monthly, date()).is_err());
        let single = "Category: c\n\nMonth,x: (BR)\n2009-01,100\n";
        assert!(parse_trends_csv(single, date()).is_err());
    }

    #[test]
    fn unrepresentable_values_are_rejected() {
        let mut s = parse_trends_csv(MINIMAL, date()).unwrap();
        s.values[0] = 12.5;
        assert!(to_trends_csv(&s).is_err());
    }

    proptest! {
        #[test]
        fn serialization_round_trips(
            raw in prop::collection::vec(prop_oneof![Just(None), (0u8..=100).prop_map(Some)], 2..40),
            start_month in 1u32..=12,
            daily in any::<bool>(),
        ) {
            let freq = if daily { Frequency::Daily } else { Frequency::Monthly };
            let start = NaiveDate::from_ymd_opt(2010, start_month, 1).unwrap();
            let grid = TimeGrid::from_start(freq, start, raw.len()).unwrap();
            let values = raw.iter().map(|v| v.map_or(LOW_VOLUME_VALUE, f64::from)).collect();
            let series = SampleSeries {
                query: TermQuery::for_grid("some term", "US", &grid),
                values,
                low_volume: raw.iter().map(Option::is_none).collect(),
                download_date: date(),
                sample_id: "2021-02-03".into(),
            };
            let text = to_trends_csv(&series).unwrap();
            prop_assert_eq!(parse_trends_csv(&text, date()).unwrap(), series);
        }
    }
}
