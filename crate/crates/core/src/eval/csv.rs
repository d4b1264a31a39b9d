//! Plain comma-separated prediction and plot tables.

use std::path::Path;

use serde::Deserialize;

use super::MoviePrediction;
use crate::error::{Error, Result};

pub const PREDICTION_HEADER: &str = "movie_id,second,prediction,ground_truth";
pub const PLOT_HEADER: &str = "second,prediction,ground_truth";

/// Shortest decimal of `v` rounded to 9 significant digits.
pub fn sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictionRow {
    pub movie_id: String,
    pub second: usize,
    pub prediction: f64,
    pub ground_truth: f64,
}

pub fn prediction_rows(preds: &[MoviePrediction]) -> Vec<PredictionRow> {
    preds
        .iter()
        .flat_map(|p| {
            p.track
                .values
                .iter()
                .zip(&p.ground_truth)
                .enumerate()
                .map(|(s, (&y, &g))| PredictionRow {
                    movie_id: p.track.movie_id.clone(),
                    second: s,
                    prediction: y,
                    ground_truth: g,
                })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(PREDICTION_HEADER.split(','))
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.movie_id.clone(),
            r.second.to_string(),
            sig9(r.prediction),
            sig9(r.ground_truth),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != PREDICTION_HEADER {
        return Err(Error::Input(format!("{} lacks the header {PREDICTION_HEADER}", path.display())));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// One row per second: `second,prediction,ground_truth`.
pub fn emit_plot_data(track: &[f64], gt: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if track.len() != gt.len() {
        return Err(Error::Contract(format!(
            "track has {} seconds, ground truth {}",
            track.len(),
            gt.len()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(PLOT_HEADER.split(',')).map_err(|e| csv_error(path, e))?;
    for (s, (y, g)) in track.iter().zip(gt).enumerate() {
        w.write_record([s.to_string(), sig9(*y), sig9(*g)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Selects one movie's rows, ordered by second. Without a movie id the
/// table must hold exactly one movie.
pub fn movie_track(rows: &[PredictionRow], movie: Option<&str>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ids: Vec<&str> = rows.iter().map(|r| r.movie_id.as_str()).collect();
    ids.dedup();
    let id = match movie {
        Some(m) => m,
        None => match ids.as_slice() {
            [one] => one,
            [] => return Err(Error::Input("prediction table is empty".into())),
            many => {
                return Err(Error::Input(format!(
                    "table holds several movies ({}); pick one with --movie",
                    many.join(", ")
                )))
            }
        },
    };
    let mut sel: Vec<&PredictionRow> = rows.iter().filter(|r| r.movie_id == id).collect();
    if sel.is_empty() {
        return Err(Error::Input(format!("no rows for movie {id}")));
    }
    sel.sort_by_key(|r| r.second);
    if sel.iter().enumerate().any(|(i, r)| r.second != i) {
        return Err(Error::Input(format!("seconds of movie {id} are not 0..n without gaps")));
    }
    Ok((
        sel.iter().map(|r| r.prediction).collect(),
        sel.iter().map(|r| r.ground_truth).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn sig9_keeps_nine_digits() {
        assert_eq!(sig9(0.1), "0.1");
        assert_eq!(sig9(0.123456789123), "0.123456789");
        assert_eq!(sig9(-0.5), "-0.5");
        assert_eq!(sig9(0.0), "0");
        let v = -0.987654321987;
        let back: f64 = sig9(v).parse().unwrap();
        assert!((back - v).abs() <= 5e-9 * v.abs());
    }

    #[test]
    fn plot_table_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let track: Vec<f64> = (0..20).map(|i| i as f64 / 40.0).collect();
        let gt: Vec<f64> = track.iter().map(|v| -v).collect();
        emit_plot_data(&track, &gt, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], PLOT_HEADER);
        assert_eq!(lines[3], "2,0.05,-0.05");
        assert!(emit_plot_data(&track, &gt[1..], &path).is_err());
    }

    #[test]
    fn one_movie_needed_without_filter() {
        let row = |m: &str, s| PredictionRow {
            movie_id: m.into(),
            second: s,
            prediction: 0.0,
            ground_truth: 0.0,
        };
        let rows = vec![row("a", 0), row("a", 1), row("b", 0)];
        assert!(movie_track(&rows, None).is_err());
        assert_eq!(movie_track(&rows, Some("a")).unwrap().0.len(), 2);
        assert_eq!(movie_track(&rows[..2], None).unwrap().0.len(), 2);
    }

    #[test]
    fn prediction_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        let rows: Vec<PredictionRow> = (0..12)
            .map(|s| PredictionRow {
                movie_id: if s < 6 { "m1".into() } else { "m 2".into() },
                second: s % 6,
                prediction: (s as f64 * 0.7).sin(),
                ground_truth: -(s as f64) / 13.0,
            })
            .collect();
        write_predictions(&rows, &path).unwrap();
        let back = read_predictions(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((&a.movie_id, a.second), (&b.movie_id, b.second));
            assert!((a.prediction - b.prediction).abs() <= 5e-9 * a.prediction.abs());
            assert!((a.ground_truth - b.ground_truth).abs() <= 5e-9 * a.ground_truth.abs());
        }
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_predictions(&path), Err(Error::Input(_))));
    }
}
