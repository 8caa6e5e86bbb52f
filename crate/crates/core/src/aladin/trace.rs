use std::io::Write;

use serde::{Deserialize, Serialize};

/// Convergence quantities recorded after each decoupled step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖A x − b‖∞`
    pub primal_inf: f64,
    /// `max_ℓ ‖Σ_ℓ (x_ℓ − z_ℓ)‖∞`
    pub dual_inf: f64,
    /// `Σ_ℓ ½‖r_ℓ(x_ℓ)‖²`
    pub objective: f64,
    /// `|f(x) − f(x*)|`, with `f(x*) = 0` unless a reference is given.
    pub gap: f64,
    /// `‖x − x*‖∞`; only with a reference solution.
    pub deviation_inf: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn deviations(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.deviation_inf).collect()
    }

    /// CSV with header `iter,primal_inf,dual_inf,objective,gap,deviation_inf`;
    /// the deviation cell is empty without a reference.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "primal_inf", "dual_inf", "objective", "gap", "deviation_inf"])?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                format!("{:e}", r.primal_inf),
                format!("{:e}", r.dual_inf),
                format!("{:e}", r.objective),
                format!("{:e}", r.gap),
                r.deviation_inf.map(|d| format!("{d:e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per line, in iteration order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> IterationTrace {
        IterationTrace {
            records: vec![
                IterationRecord {
                    iter: 1,
                    primal_inf: 1e-2,
                    dual_inf: 3e-3,
                    objective: 0.5,
                    gap: 0.5,
                    deviation_inf: None,
                },
                IterationRecord {
                    iter: 2,
                    primal_inf: 1e-9,
                    dual_inf: 2e-10,
                    objective: 1e-19,
                    gap: 1e-19,
                    deviation_inf: Some(1e-10),
                },
            ],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        trace().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,primal_inf,dual_inf,objective,gap,deviation_inf"));
        assert!(lines.next().unwrap().ends_with(','));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][5].parse::<f64>().unwrap(), 1e-10);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut buf = Vec::new();
        trace().write_jsonl(&mut buf).unwrap();
        let parsed: Vec<IterationRecord> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, trace().records);
    }
}
