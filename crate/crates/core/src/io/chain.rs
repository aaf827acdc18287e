use std::io::{BufRead, BufReader, Read, Write};

use super::OutputHeader;
use crate::error::IoError;
use crate::model::ModelKind;
use crate::sampler::Chain;

/// Column names of sampler coordinates, `log_` marking log-stored parameters.
pub fn coord_names(kind: ModelKind) -> Vec<String> {
    kind.param_names()
        .iter()
        .enumerate()
        .map(|(i, n)| if kind.is_log_coord(i) { format!("log_{n}") } else { n.to_string() })
        .collect()
}

/// One row per iteration; the sampling time goes into a `# wall_time=` comment.
pub fn write_chain(w: &mut impl Write, chain: &Chain, names: &[String], header: &OutputHeader) -> std::io::Result<()> {
    header.write_to(w)?;
    writeln!(w, "# wall_time={}", chain.wall_time)?;
    writeln!(w, "{}", names.join(","))?;
    for r in chain.rows() {
        writeln!(w, "{}", r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))?;
    }
    w.flush()
}

/// Reads any all-numeric CSV as a chain. Returns the column names.
pub fn read_chain(r: impl Read) -> Result<(Vec<String>, Chain), IoError> {
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut wall_time = f64::NAN;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|source| IoError::Io { path: "<chain>".into(), source })?;
        let line = line.trim();
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("wall_time=") {
                wall_time = v.trim().parse().map_err(|_| IoError::Parse { row, col: 1, msg: format!("bad wall time {v:?}") })?;
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &names {
            None => names = Some(fields.iter().map(|s| s.to_string()).collect()),
            Some(n) => {
                if fields.len() != n.len() {
                    return Err(IoError::Parse { row, col: fields.len().min(n.len()) + 1, msg: format!("expected {} fields", n.len()) });
                }
                let vals = fields
                    .iter()
                    .enumerate()
                    .map(|(c, f)| f.parse::<f64>().map_err(|e| IoError::Parse { row, col: c + 1, msg: format!("{f:?}: {e}") }))
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push(vals);
            }
        }
    }
    let names = names.ok_or_else(|| IoError::Header("empty chain file".into()))?;
    let mut chain = Chain::from_rows(names.len(), &rows);
    chain.wall_time = wall_time;
    Ok((names, chain))
}
