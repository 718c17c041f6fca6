use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Hmc,
    JointCt,
    GibbsCt,
    SimulatedTempering,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Hmc => "hmc",
            SamplerKind::JointCt => "joint_ct",
            SamplerKind::GibbsCt => "gibbs_ct",
            SamplerKind::SimulatedTempering => "simulated_tempering",
        }
    }
}

/// One iteration of a chain. `u` is present only for joint continuous
/// tempering and `delta` only for tempered samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub beta: f64,
    pub u: Option<f64>,
    pub delta: Option<f64>,
    pub hamiltonian: f64,
    pub accepted: bool,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub sampler: SamplerKind,
    pub dim: usize,
    pub records: Vec<TraceRecord>,
    pub n_divergent: usize,
}

impl ChainTrace {
    pub(crate) fn with_capacity(sampler: SamplerKind, dim: usize, n: usize) -> Self {
        Self { sampler, dim, records: Vec::with_capacity(n), n_divergent: 0 }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }

    /// Records left after dropping the leading `fraction` of the chain.
    pub fn after_burn_in(&self, fraction: f64) -> &[TraceRecord] {
        let skip = ((self.records.len() as f64) * fraction.clamp(0.0, 1.0)).floor() as usize;
        &self.records[skip.min(self.records.len())..]
    }

    pub fn header(dim: usize) -> Vec<String> {
        let mut h: Vec<String> = ["iter", "beta", "u", "delta", "hamiltonian", "accepted"].map(String::from).into();
        h.extend((0..dim).map(|i| format!("x{i}")));
        h
    }

    /// CSV with header `iter,beta,u,delta,hamiltonian,accepted,x0,...`.
    /// Floats are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header(self.dim))?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.iter.to_string(),
                r.beta.to_string(),
                opt(r.u),
                opt(r.delta),
                r.hamiltonian.to_string(),
                u8::from(r.accepted).to_string(),
            ];
            row.extend(r.x.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, sampler: SamplerKind) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let headers = rd.headers()?.clone();
        if headers.len() < 6 {
            return Err(Error::Usage("trace CSV has too few columns".into()));
        }
        let dim = headers.len() - 6;
        let expected = Self::header(dim);
        if headers.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(Error::Usage(format!("unexpected trace header {:?}", headers.iter().collect::<Vec<_>>())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Usage(format!("bad {what} value {s:?} in trace")))
        };
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        let mut trace = Self::with_capacity(sampler, dim, 0);
        for row in rd.records() {
            let row = row?;
            check_dim(dim + 6, row.len())?;
            let accepted = match &row[5] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Usage(format!("bad accepted flag {other:?} in trace"))),
            };
            trace.records.push(TraceRecord {
                iter: row[0].parse().map_err(|_| Error::Usage(format!("bad iteration {:?}", &row[0])))?,
                beta: num(&row[1], "beta")?,
                u: opt(&row[2], "u")?,
                delta: opt(&row[3], "delta")?,
                hamiltonian: num(&row[4], "hamiltonian")?,
                accepted,
                x: (6..dim + 6).map(|i| num(&row[i], "x")).collect::<Result<_>>()?,
            });
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = ChainTrace::with_capacity(SamplerKind::JointCt, 2, 2);
        t.records.push(TraceRecord {
            iter: 0,
            beta: 0.1 + 0.2,
            u: Some(-1.0 / 3.0),
            delta: Some(1e-300),
            hamiltonian: 12.345678901234567,
            accepted: true,
            x: vec![std::f64::consts::PI, -0.0],
        });
        t.records.push(TraceRecord {
            iter: 1,
            beta: 1.0,
            u: None,
            delta: None,
            hamiltonian: -2.5,
            accepted: false,
            x: vec![f64::MIN_POSITIVE, 7e22],
        });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,beta,u,delta,hamiltonian,accepted,x0,x1\n"));
        assert!(text.contains("\n1,1,,,-2.5,0,"));
        let back = ChainTrace::read_csv(buf.as_slice(), SamplerKind::JointCt).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ChainTrace::read_csv("a,b\n1,2\n".as_bytes(), SamplerKind::Hmc).is_err());
        let bad = "iter,beta,u,delta,hamiltonian,accepted,x0\n0,1,,,1,yes,0\n";
        assert!(ChainTrace::read_csv(bad.as_bytes(), SamplerKind::Hmc).is_err());
    }

    #[test]
    fn burn_in() {
        let mut t = ChainTrace::with_capacity(SamplerKind::Hmc, 1, 10);
        for i in 0..10 {
            t.records.push(TraceRecord { iter: i, beta: 1.0, u: None, delta: None, hamiltonian: 0.0, accepted: i % 2 == 0, x: vec![0.0] });
        }
        assert_eq!(t.after_burn_in(0.1)[0].iter, 1);
        assert_eq!(t.after_burn_in(0.0).len(), 10);
        assert!(t.after_burn_in(1.0).is_empty());
        assert_eq!(t.acceptance_rate(), 0.5);
    }
}
