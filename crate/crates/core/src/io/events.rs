use std::io::Write;

use super::table::state_labels;
use super::OutputHeader;
use crate::window::FilterEvent;

/// Streams filter events as CSV, one row per event, flushing after each.
///
/// Columns: `step,t,mean_*,var_*,alpha1,alpha2,gap,event`, plus
/// `forecast_t,fmean_*,fvar_*` when a forecast horizon is set. Fields that do
/// not apply to an event are left empty.
pub struct EventWriter<W: Write> {
    out: W,
    width: usize,
    forecast: bool,
}

impl<W: Write> EventWriter<W> {
    pub fn new(mut out: W, header: &OutputHeader, state_dim: usize, n_axes: usize, forecast: bool) -> std::io::Result<Self> {
        header.write_to(&mut out)?;
        let labels = state_labels(state_dim, n_axes);
        let mut cols = vec!["step".to_string(), "t".to_string()];
        cols.extend(labels.iter().map(|l| format!("mean_{l}")));
        cols.extend(labels.iter().map(|l| format!("var_{l}")));
        cols.extend(["alpha1", "alpha2", "gap", "event"].map(String::from));
        if forecast {
            cols.push("forecast_t".into());
            cols.extend(labels.iter().map(|l| format!("fmean_{l}")));
            cols.extend(labels.iter().map(|l| format!("fvar_{l}")));
        }
        writeln!(out, "{}", cols.join(","))?;
        out.flush()?;
        Ok(Self { out, width: labels.len(), forecast })
    }

    /// Writes one row. `time` is the timestamp of the observation behind the event.
    pub fn write(&mut self, ev: &FilterEvent, time: f64) -> std::io::Result<()> {
        let blank = |k: usize| vec![String::new(); k];
        let mut row = vec![ev.step().to_string(), time.to_string()];
        let (tail, fc) = match ev {
            FilterEvent::Estimate { estimate, forecast, alpha1, alpha2, .. } => {
                row.extend(estimate.mean.iter().map(f64::to_string));
                row.extend(estimate.cov.diagonal().iter().map(f64::to_string));
                (vec![alpha1.to_string(), alpha2.to_string(), String::new(), "estimate".into()], forecast.as_ref())
            }
            FilterEvent::PhaseOneComplete { .. } => {
                row.extend(blank(2 * self.width));
                (vec![String::new(), String::new(), String::new(), "learned".into()], None)
            }
            FilterEvent::SurrogateRefreshed { .. } => {
                row.extend(blank(2 * self.width));
                (vec![String::new(), String::new(), String::new(), "refresh".into()], None)
            }
            FilterEvent::Halted { gap, .. } => {
                row.extend(blank(2 * self.width));
                (vec![String::new(), String::new(), gap.to_string(), "halted".into()], None)
            }
        };
        row.extend(tail);
        if self.forecast {
            match fc {
                Some(f) => {
                    row.push(f.timestamp.to_string());
                    row.extend(f.mean.iter().map(f64::to_string));
                    row.extend(f.cov.diagonal().iter().map(f64::to_string));
                }
                None => row.extend(blank(1 + 2 * self.width)),
            }
        }
        writeln!(self.out, "{}", row.join(","))?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::StateEstimate;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn rows_line_up_with_header() {
        let est = StateEstimate {
            mean: DVector::from_vec(vec![1.0, 2.0]),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25])),
            n_components: 3,
            t: 4,
            timestamp: 9.0,
        };
        let events = [
            FilterEvent::Estimate { step: 4, estimate: est.clone(), forecast: Some(est.at(4, 10.0)), alpha1: 0.2, alpha2: 0.9 },
            FilterEvent::SurrogateRefreshed { step: 4 },
            FilterEvent::Halted { step: 5, gap: 400.0 },
        ];
        let mut w = EventWriter::new(Vec::new(), &OutputHeader::default(), 2, 1, true).unwrap();
        for e in &events {
            w.write(e, 9.0).unwrap();
        }
        let text = String::from_utf8(w.into_inner()).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "step,t,mean_x,mean_vx,var_x,var_vx,alpha1,alpha2,gap,event,forecast_t,fmean_x,fmean_vx,fvar_x,fvar_vx");
        let width = rows[0].split(',').count();
        assert!(rows.iter().all(|r| r.split(',').count() == width));
        assert_eq!(rows[1], "4,9,1,2,0.5,0.25,0.2,0.9,,estimate,10,1,2,0.5,0.25");
        assert!(rows[3].starts_with("5,9,") && rows[3].contains(",400,halted,"));
    }
}
