//! The reference time-series store used as noisy supervision, plus the
//! consistency score and its thresholded label.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parser::ExtractionCandidate;
use crate::types::RelationKind;

/// Floor on `|v_ref|` in the relative-error denominator.
pub const SCORE_EPS: f64 = 1e-6;

/// Default label threshold: a squared relative error of 5%.
pub const DEFAULT_TAU: f64 = -0.0025;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefPoint {
    pub timestamp: i64,
    pub value: f64,
}

/// Symbol -> time-ordered points. Timestamps are strictly increasing per
/// symbol.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeriesStore {
    series: BTreeMap<String, Vec<RefPoint>>,
}

impl TimeSeriesStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a point, keeping the series sorted. Re-using a timestamp is an
    /// error, as is a non-finite value.
    pub fn insert(&mut self, symbol: &str, timestamp: i64, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Format {
                what: "store point",
                detail: format!("{symbol}@{timestamp} has non-finite value {value}"),
            });
        }
        let points = self.series.entry(symbol.to_owned()).or_default();
        match points.binary_search_by_key(&timestamp, |p| p.timestamp) {
            Ok(_) => Err(Error::Format {
                what: "store point",
                detail: format!("duplicate timestamp {timestamp} for {symbol}"),
            }),
            Err(pos) => {
                points.insert(pos, RefPoint { timestamp, value });
                Ok(())
            }
        }
    }

    /// Overwrite the value of an existing point.
    pub fn set_value(&mut self, symbol: &str, timestamp: i64, value: f64) -> Result<()> {
        let points = self
            .series
            .get_mut(symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_owned()))?;
        let pos = points
            .binary_search_by_key(&timestamp, |p| p.timestamp)
            .map_err(|_| Error::NoHistory {
                symbol: symbol.to_owned(),
                timestamp,
            })?;
        points[pos].value = value;
        Ok(())
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn series(&self, symbol: &str) -> Option<&[RefPoint]> {
        self.series.get(symbol).map(Vec::as_slice)
    }

    pub fn num_points(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    /// Index of the last point at or before `timestamp`.
    fn latest_index(&self, symbol: &str, timestamp: i64) -> Result<(&[RefPoint], usize)> {
        let points = self
            .series
            .get(symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_owned()))?;
        let after = points.partition_point(|p| p.timestamp <= timestamp);
        if after == 0 {
            return Err(Error::NoHistory {
                symbol: symbol.to_owned(),
                timestamp,
            });
        }
        Ok((points, after - 1))
    }

    /// Latest point with `point.timestamp <= timestamp`.
    pub fn lookup_reference(&self, symbol: &str, timestamp: i64) -> Result<RefPoint> {
        let (points, i) = self.latest_index(symbol, timestamp)?;
        Ok(points[i])
    }

    /// The two most recent points at or before `timestamp`, as
    /// `(previous, latest)`.
    pub fn lookup_with_previous(&self, symbol: &str, timestamp: i64) -> Result<(RefPoint, RefPoint)> {
        let (points, i) = self.latest_index(symbol, timestamp)?;
        if i == 0 {
            return Err(Error::NoHistory {
                symbol: symbol.to_owned(),
                timestamp,
            });
        }
        Ok((points[i - 1], points[i]))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let r = io::open(path)?;
        let mut store = TimeSeriesStore::new();
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .unwrap_or_default();
        if header.trim() != "symbol,timestamp,value" {
            return Err(Error::Format {
                what: "store csv",
                detail: format!("{}: unexpected header `{header}`", path.display()),
            });
        }
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |detail: &str| Error::Format {
                what: "store csv",
                detail: format!("{}:{}: {detail}", path.display(), lineno + 2),
            };
            let mut parts = line.split(',');
            let (Some(sym), Some(ts), Some(val), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected 3 fields"));
            };
            let ts: i64 = ts.trim().parse().map_err(|_| bad("bad timestamp"))?;
            let val: f64 = val.trim().parse().map_err(|_| bad("bad value"))?;
            store.insert(sym.trim(), ts, val)?;
        }
        Ok(store)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::create(path)?;
        let err = |e| Error::io(path, e);
        writeln!(w, "symbol,timestamp,value").map_err(err)?;
        for (sym, points) in &self.series {
            for p in points {
                // `{}` on f64 prints the shortest string that round-trips.
                writeln!(w, "{},{},{}", sym, p.timestamp, p.value).map_err(err)?;
            }
        }
        w.flush().map_err(err)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    /// Negative squared relative error; 0 is a perfect match.
    pub s: f64,
    pub reference_value: f64,
    pub reference_timestamp: i64,
}

fn relative_sq_error(value: f64, target: f64, level: f64) -> f64 {
    let denom = level.abs().max(SCORE_EPS);
    let r = (value - target) / denom;
    -(r * r)
}

/// Score how well a candidate's value fits the stored series at the
/// candidate's document timestamp.
///
/// Absolute ticks are compared to the latest level; changes are compared to
/// the difference of the two latest points, normalized by the level.
pub fn consistency_score(
    candidate: &ExtractionCandidate,
    store: &TimeSeriesStore,
) -> Result<ConsistencyScore> {
    match candidate.kind {
        RelationKind::TickAbs => {
            let r = store.lookup_reference(&candidate.symbol, candidate.timestamp)?;
            Ok(ConsistencyScore {
                s: relative_sq_error(candidate.value, r.value, r.value),
                reference_value: r.value,
                reference_timestamp: r.timestamp,
            })
        }
        RelationKind::TickRel => {
            let (prev, latest) = store.lookup_with_previous(&candidate.symbol, candidate.timestamp)?;
            let change = latest.value - prev.value;
            Ok(ConsistencyScore {
                s: relative_sq_error(candidate.value, change, latest.value),
                reference_value: change,
                reference_timestamp: latest.timestamp,
            })
        }
    }
}

/// `1` iff `s >= tau`.
pub fn label_from_score(s: f64, tau: f64) -> u8 {
    u8::from(s >= tau)
}

/// A candidate with its stage-two annotations. `s` is `None` when the
/// store had no usable reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(flatten)]
    pub candidate: ExtractionCandidate,
    pub s: Option<f64>,
    pub reference_value: Option<f64>,
    pub y: Option<u8>,
}

impl ScoredCandidate {
    pub fn score(candidate: ExtractionCandidate, store: &TimeSeriesStore, tau: f64) -> Self {
        match consistency_score(&candidate, store) {
            Ok(cs) => ScoredCandidate {
                candidate,
                s: Some(cs.s),
                reference_value: Some(cs.reference_value),
                y: Some(label_from_score(cs.s, tau)),
            },
            Err(_) => ScoredCandidate {
                candidate,
                s: None,
                reference_value: None,
                y: None,
            },
        }
    }

    /// The score with missing references mapped to negative infinity.
    pub fn s_or_neg_inf(&self) -> f64 {
        self.s.unwrap_or(f64::NEG_INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Span;

    fn store() -> TimeSeriesStore {
        let mut s = TimeSeriesStore::new();
        s.insert("S", 20, 5.2).unwrap();
        s.insert("S", 10, 5.0).unwrap();
        s
    }

    fn cand(kind: RelationKind, value: f64, timestamp: i64) -> ExtractionCandidate {
        ExtractionCandidate {
            doc_id: "d".into(),
            timestamp,
            kind,
            symbol: "S".into(),
            value,
            symbol_span: Span::new(0, 1),
            value_span: Span::new(2, 3),
            section_span: Span::new(0, 3),
            aux: Default::default(),
        }
    }

    #[test]
    fn lookup_picks_latest_prior_point() {
        let s = store();
        assert_eq!(
            s.lookup_reference("S", 15).unwrap(),
            RefPoint { timestamp: 10, value: 5.0 }
        );
        assert_eq!(
            s.lookup_reference("S", 20).unwrap(),
            RefPoint { timestamp: 20, value: 5.2 }
        );
        assert!(matches!(
            s.lookup_reference("S", 5),
            Err(Error::NoHistory { timestamp: 5, .. })
        ));
        assert!(matches!(s.lookup_reference("T", 15), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let mut s = store();
        assert!(s.insert("S", 10, 1.0).is_err());
        assert!(s.insert("S", 11, f64::NAN).is_err());
    }

    #[test]
    fn abs_score_examples() {
        let mut s = TimeSeriesStore::new();
        s.insert("S", 0, 5.0).unwrap();
        let exact = consistency_score(&cand(RelationKind::TickAbs, 5.0, 1), &s).unwrap();
        assert_eq!(exact.s, 0.0);
        let near = consistency_score(&cand(RelationKind::TickAbs, 4.9, 1), &s).unwrap();
        assert!((near.s - -4.0e-4).abs() < 1e-12);

        let mut s = TimeSeriesStore::new();
        s.insert("S", 0, 4.9).unwrap();
        let wild = consistency_score(&cand(RelationKind::TickAbs, 49.0, 1), &s).unwrap();
        assert!((wild.s - -81.0).abs() < 1e-9);
        assert_eq!(label_from_score(wild.s, DEFAULT_TAU), 0);
    }

    #[test]
    fn rel_score_uses_level_denominator() {
        let s = store();
        // change 5.0 -> 5.2 is +0.2; a reported +0.1 is off by 0.1 on a 5.2 level
        let sc = consistency_score(&cand(RelationKind::TickRel, 0.1, 25), &s).unwrap();
        assert!((sc.reference_value - 0.2).abs() < 1e-12);
        assert!((sc.s - -(0.1f64 / 5.2).powi(2)).abs() < 1e-12);
        assert!(matches!(
            consistency_score(&cand(RelationKind::TickRel, 0.1, 15), &s),
            Err(Error::NoHistory { .. })
        ));
    }

    #[test]
    fn near_zero_reference_uses_eps() {
        let mut s = TimeSeriesStore::new();
        s.insert("S", 0, 0.0).unwrap();
        let sc = consistency_score(&cand(RelationKind::TickAbs, 1e-6, 1), &s).unwrap();
        assert!((sc.s - -1.0).abs() < 1e-12);
    }

    #[test]
    fn label_threshold_is_inclusive() {
        assert_eq!(label_from_score(0.0, DEFAULT_TAU), 1);
        assert_eq!(label_from_score(-0.0025, DEFAULT_TAU), 1);
        assert_eq!(label_from_score(-0.0025000001, DEFAULT_TAU), 0);
        assert_eq!(label_from_score(-81.0, DEFAULT_TAU), 0);
    }

    #[test]
    fn missing_reference_scores_none() {
        let s = store();
        let mut c = cand(RelationKind::TickAbs, 1.0, 15);
        c.symbol = "nope".into();
        let sc = ScoredCandidate::score(c, &s, DEFAULT_TAU);
        assert_eq!(sc.s, None);
        assert_eq!(sc.y, None);
        assert_eq!(sc.s_or_neg_inf(), f64::NEG_INFINITY);
        let json = serde_json::to_value(&sc).unwrap();
        assert!(json["s"].is_null());
        assert_eq!(json["symbol"], "nope");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        let mut s = store();
        s.insert("T", 3, 0.1 + 0.2).unwrap();
        s.save_csv(&path).unwrap();
        let back = TimeSeriesStore::load_csv(&path).unwrap();
        assert_eq!(back, s);
    }
}
