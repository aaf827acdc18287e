use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::OutputHeader;
use crate::error::{Error, IoError};
use crate::model::TimeGrid;
use crate::series::ObservationSeries;

/// Column layouts of observation files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesLayout {
    /// `t,y`
    Scalar,
    /// `t,x,vx`: one position-velocity axis.
    PlanarSingle,
    /// `t,x,y,vx,vy`: two position-velocity axes.
    PlanarPair,
}

impl SeriesLayout {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            SeriesLayout::Scalar => &["t", "y"],
            SeriesLayout::PlanarSingle => &["t", "x", "vx"],
            SeriesLayout::PlanarPair => &["t", "x", "y", "vx", "vy"],
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            SeriesLayout::Scalar => 1,
            _ => 2,
        }
    }

    pub fn n_axes(self) -> usize {
        match self {
            SeriesLayout::PlanarPair => 2,
            _ => 1,
        }
    }

    fn from_header(cols: &[&str]) -> Option<Self> {
        [SeriesLayout::Scalar, SeriesLayout::PlanarSingle, SeriesLayout::PlanarPair]
            .into_iter()
            .find(|l| l.columns() == cols)
    }

    pub fn for_series(y: &ObservationSeries) -> Result<Self, IoError> {
        match (y.state_dim(), y.n_axes()) {
            (1, 1) => Ok(SeriesLayout::Scalar),
            (2, 1) => Ok(SeriesLayout::PlanarSingle),
            (2, 2) => Ok(SeriesLayout::PlanarPair),
            (d, a) => Err(IoError::Header(format!("no CSV layout for {a} axes of dimension {d}"))),
        }
    }

    /// Maps a row's value columns (header order) to axis-major order.
    fn to_axis_major(self, row: &[f64]) -> Vec<f64> {
        match self {
            SeriesLayout::PlanarPair => vec![row[0], row[2], row[1], row[3]],
            _ => row.to_vec(),
        }
    }

    fn to_file_order(self, v: &[f64]) -> Vec<f64> {
        match self {
            SeriesLayout::PlanarPair => vec![v[0], v[2], v[1], v[3]],
            _ => v.to_vec(),
        }
    }
}

/// Names of the stacked state components, axis-major.
pub fn state_labels(state_dim: usize, n_axes: usize) -> Vec<String> {
    match (state_dim, n_axes) {
        (1, 1) => vec!["x".into()],
        (2, 1) => vec!["x".into(), "vx".into()],
        (2, 2) => vec!["x".into(), "vx".into(), "y".into(), "vy".into()],
        _ => (0..state_dim * n_axes).map(|i| format!("s{i}")).collect(),
    }
}

pub fn read_series(path: &Path) -> Result<ObservationSeries, IoError> {
    let file = File::open(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    read_series_from(file)
}

/// Parses an observation CSV. Lines starting with `#` are skipped; rows and columns in errors are 1-based file positions.
pub fn read_series_from(reader: impl Read) -> Result<ObservationSeries, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let layout = SeriesLayout::from_header(&cols).ok_or_else(|| IoError::Header(cols.join(",")))?;
    let width = layout.columns().len();
    let mut y = ObservationSeries::empty(layout.state_dim(), layout.n_axes());
    let mut vals = vec![0.0; width];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(IoError::Parse { row, col: rec.len().min(width) + 1, msg: format!("expected {width} fields, found {}", rec.len()) });
        }
        for (c, field) in rec.iter().enumerate() {
            vals[c] = field.parse::<f64>().map_err(|e| IoError::Parse { row, col: c + 1, msg: format!("{field:?}: {e}") })?;
            if !vals[c].is_finite() {
                return Err(IoError::Parse { row, col: c + 1, msg: format!("non-finite value {field:?}") });
            }
        }
        y.push(vals[0], &layout.to_axis_major(&vals[1..])).map_err(|e| match e {
            Error::DuplicateTimestamp { .. } => IoError::DuplicateTimestamp { row },
            Error::NonMonotoneTime { .. } => IoError::NonMonotoneTime { row },
            other => IoError::Model(other),
        })?;
    }
    Ok(y)
}

fn csv_error(e: &csv::Error) -> IoError {
    let row = e.position().map_or(0, |p| p.line() as usize);
    IoError::Parse { row, col: 0, msg: e.to_string() }
}

/// Writes a series with a comment header; values use shortest round-trip formatting.
pub fn write_series(w: &mut impl Write, y: &ObservationSeries, header: &OutputHeader) -> Result<(), IoError> {
    let layout = SeriesLayout::for_series(y)?;
    let wrap = |source| IoError::Io { path: "<output>".into(), source };
    header.write_to(w).map_err(wrap)?;
    if !y.units.is_empty() {
        writeln!(w, "# units={}", y.units).map_err(wrap)?;
    }
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| IoError::Parse { row: 0, col: 0, msg: e.to_string() };
    out.write_record(layout.columns()).map_err(csv_err)?;
    let grid: &TimeGrid = y.grid();
    for t in 0..y.len() {
        let mut rec = vec![grid.time(t).to_string()];
        rec.extend(layout.to_file_order(&y.row(t)).iter().map(f64::to_string));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(wrap)?;
    Ok(())
}
