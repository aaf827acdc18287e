use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::config::parse_key_values;
use super::OutputHeader;
use crate::error::{Error, IoError};
use crate::model::ModelKind;
use crate::sampler::SurrogatePosterior;

/// Output of a learning run, enough to start a filter without relearning.
///
/// Stored as `key=value` lines: `model`, `names`, `mean`, `cov_lower`
/// (row-major lower triangle), `acceptance` and `steps`, all comma separated.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateArtifact {
    pub kind: ModelKind,
    pub surrogate: SurrogatePosterior,
    /// Per-coordinate acceptance over the second half of the learning chain.
    pub acceptance: Vec<f64>,
    /// Tuned random-walk step sizes.
    pub steps: Vec<f64>,
}

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_surrogate(w: &mut impl Write, a: &SurrogateArtifact, header: &OutputHeader) -> std::io::Result<()> {
    header.write_to(w)?;
    let d = a.surrogate.dim();
    writeln!(w, "model={}", a.kind)?;
    writeln!(w, "names={}", a.kind.param_names().join(","))?;
    writeln!(w, "mean={}", join(a.surrogate.mean.iter().copied()))?;
    writeln!(w, "cov_lower={}", join((0..d).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| a.surrogate.cov[(i, j)])))?;
    writeln!(w, "acceptance={}", join(a.acceptance.iter().copied()))?;
    writeln!(w, "steps={}", join(a.steps.iter().copied()))?;
    w.flush()
}

pub fn read_surrogate(mut r: impl Read) -> Result<SurrogateArtifact, IoError> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|source| IoError::Io { path: "<surrogate>".into(), source })?;
    let pairs = parse_key_values(&text).map_err(IoError::Model)?;
    let get = |key: &str| -> Result<(usize, &str), IoError> {
        pairs
            .iter()
            .find(|p| p.1 == key)
            .map(|p| (p.0, p.2.as_str()))
            .ok_or_else(|| IoError::Parse { row: 0, col: 0, msg: format!("missing key {key}") })
    };
    let numbers = |key: &str| -> Result<Vec<f64>, IoError> {
        let (row, v) = get(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .enumerate()
            .map(|(c, s)| s.trim().parse::<f64>().map_err(|e| IoError::Parse { row, col: c + 1, msg: format!("{key}: {e}") }))
            .collect()
    };
    let (row, model) = get("model")?;
    let kind: ModelKind = model.parse().map_err(|e: Error| IoError::Parse { row, col: 1, msg: e.to_string() })?;
    let d = kind.param_dim();
    let mean = numbers("mean")?;
    let lower = numbers("cov_lower")?;
    if mean.len() != d || lower.len() != d * (d + 1) / 2 {
        return Err(IoError::Model(Error::DimensionMismatch { expected: d, got: mean.len() }));
    }
    let mut cov = DMatrix::zeros(d, d);
    let mut it = lower.into_iter();
    for i in 0..d {
        for j in 0..=i {
            let v = it.next().expect("length checked");
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let surrogate = SurrogatePosterior::new(DVector::from_vec(mean), cov)?;
    Ok(SurrogateArtifact { kind, surrogate, acceptance: numbers("acceptance")?, steps: numbers("steps")? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cov = DMatrix::from_row_slice(3, 3, &[0.04, 0.001, -0.002, 0.001, 0.09, 0.0, -0.002, 0.0, 0.01]);
        let s = SurrogatePosterior::new(DVector::from_vec(vec![-0.7, -2.3, 0.1 / 3.0]), cov).unwrap();
        let a = SurrogateArtifact { kind: ModelKind::Ou1d, surrogate: s, acceptance: vec![0.44, 0.43, 0.45], steps: vec![0.3, 0.5, 0.1] };
        let mut buf = Vec::new();
        write_surrogate(&mut buf, &a, &OutputHeader::default()).unwrap();
        let back = read_surrogate(buf.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_wrong_sizes() {
        let text = "model=linear\nmean=1,2\ncov_lower=1,0,1\nacceptance=\nsteps=\n";
        assert!(read_surrogate(text.as_bytes()).is_err());
        assert!(matches!(read_surrogate("mean=1\n".as_bytes()), Err(IoError::Parse { .. })));
    }
}
