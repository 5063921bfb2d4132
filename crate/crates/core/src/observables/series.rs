use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observables of one trajectory sampled on a common field-time grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub trajectory_id: u64,
    pub times: Vec<f64>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

/// One row of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub trajectory_id: u64,
    pub field_time: f64,
    pub observable_name: String,
    pub value: f64,
}

impl ObservableSeries {
    pub fn new(trajectory_id: u64) -> Self {
        ObservableSeries {
            trajectory_id,
            ..Default::default()
        }
    }

    /// Append one grid time with its observable values.
    pub fn record(&mut self, t: f64, values: &[(&str, f64)]) -> Result<()> {
        let k = self.times.len();
        for (name, _) in values {
            let have = self.columns.get(*name).map_or(0, Vec::len);
            if have != k {
                return Err(Error::GridMismatch(format!(
                    "column `{name}` has {have} samples, grid has {k}"
                )));
            }
        }
        self.times.push(t);
        for (name, v) in values {
            self.columns.entry((*name).to_string()).or_default().push(*v);
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let col = self
            .columns
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no observable `{name}` in series")))?;
        if col.len() != self.times.len() {
            return Err(Error::GridMismatch(format!(
                "column `{name}` has {} samples, grid has {}",
                col.len(),
                self.times.len()
            )));
        }
        Ok(col)
    }

    pub fn rows(&self) -> impl Iterator<Item = SeriesRow> + '_ {
        self.columns.iter().flat_map(move |(name, col)| {
            col.iter().zip(&self.times).map(move |(v, t)| SeriesRow {
                trajectory_id: self.trajectory_id,
                field_time: *t,
                observable_name: name.clone(),
                value: *v,
            })
        })
    }

    /// Write rows (with header when `header` is set).
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Parse a long-format CSV into one series per trajectory.
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<ObservableSeries>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut by_id: BTreeMap<u64, BTreeMap<String, Vec<(f64, f64)>>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: SeriesRow = row?;
        by_id
            .entry(row.trajectory_id)
            .or_default()
            .entry(row.observable_name)
            .or_default()
            .push((row.field_time, row.value));
    }
    let mut out = Vec::with_capacity(by_id.len());
    for (id, cols) in by_id {
        let mut series = ObservableSeries::new(id);
        for (name, samples) in cols {
            let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
            if series.times.is_empty() {
                series.times = times;
            } else if series.times != times {
                return Err(Error::GridMismatch(format!(
                    "trajectory {id}: column `{name}` sampled on a different grid"
                )));
            }
            series
                .columns
                .insert(name, samples.into_iter().map(|s| s.1).collect());
        }
        out.push(series);
    }
    Ok(out)
}

/// Cumulative trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::GridMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Names of the columns used by [`martingale_residual`].
#[derive(Debug, Clone, Copy)]
pub struct MartingaleColumns<'a> {
    pub field: &'a str,
    pub i_rate: &'a str,
    pub a_rate: &'a str,
}

/// M_t = Y_t − Y_0 − ∫I' − ∫A' with trapezoid quadrature on the series grid.
pub fn martingale_residual(series: &ObservableSeries, names: MartingaleColumns) -> Result<Vec<f64>> {
    let y = series.column(names.field)?;
    let i = cumulative_trapezoid(&series.times, series.column(names.i_rate)?)?;
    let a = cumulative_trapezoid(&series.times, series.column(names.a_rate)?)?;
    let y0 = y.first().copied().unwrap_or(0.0);
    Ok(y.iter()
        .zip(i.iter().zip(&a))
        .map(|(y, (i, a))| y - y0 - i - a)
        .collect())
}

/// M_t from exactly integrated I and A columns sampled on the same grid as Y.
pub fn martingale_residual_exact(y: &[f64], i: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    if y.len() != i.len() || y.len() != a.len() {
        return Err(Error::GridMismatch(format!(
            "lengths {} / {} / {}",
            y.len(),
            i.len(),
            a.len()
        )));
    }
    let y0 = y.first().copied().unwrap_or(0.0);
    Ok((0..y.len()).map(|k| y[k] - y0 - i[k] - a[k]).collect())
}

/// Uniform grid 0, dt, 2dt, … up to and including `horizon`.
pub fn uniform_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("grid spacing {dt}, horizon {horizon}")));
    }
    let steps = (horizon / dt).round() as usize;
    if ((steps as f64) * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is not a multiple of the grid spacing {dt}"
        )));
    }
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}
