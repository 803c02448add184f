//! CSV ingestion and plot-ready exports. Floats are written with Rust's
//! shortest round-trip formatting, so re-reading an export reproduces the
//! in-memory values exactly and identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use lddmd_core::TimeSeriesDataset;

use crate::config::{MissingPolicy, SchemaSection};
use crate::error::CliError;

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

/// A time cell: plain integer index or ISO date (daily resolution).
fn parse_time(cell: &str) -> Option<i64> {
    if let Ok(i) = cell.trim().parse::<i64>() {
        return Some(i);
    }
    cell.trim()
        .parse::<NaiveDate>()
        .ok()
        .map(|d| d.num_days_from_ce() as i64)
}

fn parse_value(cell: &str) -> Option<f64> {
    let v = cell.trim().parse::<f64>().ok()?;
    v.is_finite().then_some(v)
}

/// Loads a header-ed CSV against the schema: one time column (integer
/// index or ISO date), `d` feature columns, one target column. The time
/// stride must be constant; `dt` is the stride. Rows with gaps follow the
/// schema's missing policy.
pub fn load_csv(path: &Path, schema: &SchemaSection) -> Result<TimeSeriesDataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::input(format!(
                "{}: column {name:?} not found (header: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let time_idx = col(&schema.time_column)?;
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let target_idx = col(&schema.target_column)?;

    let mut times: Vec<(i64, u64)> = Vec::new(); // (tick, file line)
    let mut x: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2; // 1-based, after the header line
        let record = record
            .map_err(|e| CliError::input(format!("{}: line {line}: {e}", path.display())))?;
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let mut row_x = Vec::with_capacity(feature_idx.len());
        let mut gap = None;
        let time = match parse_time(cell(time_idx)) {
            Some(t) => t,
            None => {
                return Err(CliError::input(format!(
                    "{}: line {line}: unparseable time cell {:?}",
                    path.display(),
                    cell(time_idx)
                )))
            }
        };
        for (&idx, name) in feature_idx.iter().zip(&schema.feature_columns) {
            match parse_value(cell(idx)) {
                Some(v) => row_x.push(v),
                None => gap = gap.or(Some(name.as_str())),
            }
        }
        let target = parse_value(cell(target_idx));
        if target.is_none() {
            gap = gap.or(Some(schema.target_column.as_str()));
        }
        if let Some(column) = gap {
            match schema.missing_policy {
                MissingPolicy::Fail => {
                    return Err(CliError::input(format!(
                        "{}: line {line}: missing or non-numeric value in column {column:?}",
                        path.display()
                    )))
                }
                MissingPolicy::Drop => continue,
            }
        }
        times.push((time, line));
        x.extend_from_slice(&row_x);
        y.push(target.unwrap());
    }

    if times.len() < 2 {
        return Err(CliError::input(format!(
            "{}: needs at least 2 usable rows, found {}",
            path.display(),
            times.len()
        )));
    }
    let stride = times[1].0 - times[0].0;
    if stride <= 0 {
        return Err(CliError::input(format!(
            "{}: line {}: time must be strictly increasing",
            path.display(),
            times[1].1
        )));
    }
    for w in times.windows(2) {
        if w[1].0 - w[0].0 != stride {
            return Err(CliError::input(format!(
                "{}: line {}: non-constant time stride ({} after {}, expected stride {stride})",
                path.display(),
                w[1].1,
                w[1].0,
                w[0].0
            )));
        }
    }

    let mut dataset =
        TimeSeriesDataset::from_rows(x, y, feature_idx.len(), 1, stride as f64)?;
    dataset.feature_names = schema.feature_columns.clone();
    dataset.target_names = vec![schema.target_column.clone()];
    Ok(dataset)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes a dataset as `t,<features>,<target>` with integer time indices.
pub fn write_series(path: &Path, dataset: &TimeSeriesDataset) -> Result<(), CliError> {
    let mut out = String::from("t");
    for name in &dataset.feature_names {
        out.push(',');
        out.push_str(name);
    }
    for name in &dataset.target_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..dataset.n {
        write!(out, "{}", dataset.global_index(i)).unwrap();
        for v in dataset.row_x(i).iter().chain(dataset.row_y(i)) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Writes a latent trajectory as `j,z_1..z_dc`.
pub fn write_latent(path: &Path, rows: &[(u64, Vec<f64>)]) -> Result<(), CliError> {
    let dc = rows.first().map_or(0, |(_, z)| z.len());
    let mut out = String::from("j");
    for c in 1..=dc {
        write!(out, ",z_{c}").unwrap();
    }
    out.push('\n');
    for (j, z) in rows {
        write!(out, "{j}").unwrap();
        for v in z {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Writes predictions as `j,t,y_true,y_hat,split`, labelling rows with
/// global index below `train_end` as train.
pub fn write_predictions(
    path: &Path,
    rows: &[(u64, f64, f64, f64)],
    train_end: u64,
) -> Result<(), CliError> {
    let mut out = String::from("j,t,y_true,y_hat,split\n");
    for &(j, t, y_true, y_hat) in rows {
        let split = if j < train_end { "train" } else { "validation" };
        writeln!(
            out,
            "{j},{},{},{},{split}",
            fmt_f64(t),
            fmt_f64(y_true),
            fmt_f64(y_hat)
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Writes a loss history as `epoch,mean_loss`.
pub fn write_loss(path: &Path, losses: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        writeln!(out, "{epoch},{}", fmt_f64(*loss)).unwrap();
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SchemaSection;

    fn schema(time: &str, features: &[&str], target: &str, policy: MissingPolicy) -> SchemaSection {
        SchemaSection {
            time_column: time.into(),
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            target_column: target.into(),
            standardize: false,
            missing_policy: policy,
        }
    }

    fn write_temp(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn integer_time_column_sets_stride_dt() {
        let (_dir, path) = write_temp("t,a,q\n0,1.5,2\n3,2.5,4\n6,3.5,6\n");
        let ds = load_csv(&path, &schema("t", &["a"], "q", MissingPolicy::Fail)).unwrap();
        assert_eq!((ds.n, ds.d, ds.m), (3, 1, 1));
        assert_eq!(ds.dt, 3.0);
        assert_eq!(ds.x, vec![1.5, 2.5, 3.5]);
        assert_eq!(ds.y, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn iso_dates_with_daily_stride_give_unit_dt() {
        let (_dir, path) =
            write_temp("date,a,q\n2020-02-28,1,10\n2020-02-29,2,20\n2020-03-01,3,30\n");
        let ds = load_csv(&path, &schema("date", &["a"], "q", MissingPolicy::Fail)).unwrap();
        assert_eq!(ds.dt, 1.0);
        assert_eq!(ds.n, 3);
    }

    #[test]
    fn date_gap_names_the_offending_row() {
        let (_dir, path) =
            write_temp("date,a,q\n2020-01-01,1,10\n2020-01-02,2,20\n2020-01-04,3,30\n");
        let err = load_csv(&path, &schema("date", &["a"], "q", MissingPolicy::Fail)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-constant time stride"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn missing_value_fails_with_row_and_column() {
        let (_dir, path) = write_temp("t,a,q\n0,1,10\n1,,20\n2,3,30\n");
        let err = load_csv(&path, &schema("t", &["a"], "q", MissingPolicy::Fail)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("\"a\""), "{msg}");
    }

    #[test]
    fn drop_policy_skips_gap_rows_but_still_requires_constant_stride() {
        // Dropping a trailing bad row is fine.
        let (_dir, path) = write_temp("t,a,q\n0,1,10\n1,2,20\n2,NaN,30\n");
        let ds = load_csv(&path, &schema("t", &["a"], "q", MissingPolicy::Drop)).unwrap();
        assert_eq!(ds.n, 2);
        // Dropping an interior row leaves a stride gap, which fails.
        let (_dir2, path2) = write_temp("t,a,q\n0,1,10\n1,NaN,20\n2,3,30\n3,4,40\n");
        let err = load_csv(&path2, &schema("t", &["a"], "q", MissingPolicy::Drop)).unwrap_err();
        assert!(err.to_string().contains("non-constant time stride"));
    }

    #[test]
    fn missing_column_is_reported_by_name() {
        let (_dir, path) = write_temp("t,a,q\n0,1,10\n1,2,20\n");
        let err = load_csv(&path, &schema("t", &["b"], "q", MissingPolicy::Fail)).unwrap_err();
        assert!(err.to_string().contains("\"b\" not found"), "{err}");
    }

    #[test]
    fn export_then_load_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let data = lddmd_core::generate_synthetic(&lddmd_core::SyntheticConfig {
            n_steps: 50,
            ..Default::default()
        })
        .unwrap();
        write_series(&path, &data.noisy).unwrap();
        let loaded = load_csv(
            &path,
            &schema("t", &["x1", "x2"], "y", MissingPolicy::Fail),
        )
        .unwrap();
        assert_eq!(loaded.x, data.noisy.x);
        assert_eq!(loaded.y, data.noisy.y);
    }

    #[test]
    fn single_feature_schema_is_accepted() {
        let (_dir, path) = write_temp("t,a,q\n0,1,10\n1,2,20\n");
        let ds = load_csv(&path, &schema("t", &["a"], "q", MissingPolicy::Fail)).unwrap();
        assert_eq!(ds.d, 1);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let (_dir, path) = write_temp("t,a,q\n0,1,10\n");
        assert!(load_csv(&path, &schema("t", &["a"], "q", MissingPolicy::Fail)).is_err());
    }
}
