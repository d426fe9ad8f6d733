//! Time-sampled curves with CSV export and exact round-trip parsing.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::DIM;
use crate::field::Chart;
use crate::nilpotent::from_adapted;
use crate::point::{AdaptedPoint, Configuration};

/// One sample: state plus optional momenta `h1..h7` and controls `u1..u4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: [f64; DIM],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub momenta: Option<[f64; DIM]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub controls: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub chart: Chart,
    pub samples: Vec<Sample>,
}

fn state_columns(chart: Chart) -> [&'static str; DIM] {
    match chart {
        Chart::Original => ["x", "y", "theta", "phi", "l1", "l2", "l3"],
        Chart::Adapted => ["x", "l1", "l2", "l3", "y1", "y2", "y3"],
    }
}

const MOMENTUM_COLUMNS: [&str; DIM] = ["h1", "h2", "h3", "h4", "h5", "h6", "h7"];
const CONTROL_COLUMNS: [&str; 4] = ["u1", "u2", "u3", "u4"];

/// 17 significant digits; parses back to the identical `f64`.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl Trajectory {
    pub fn new(chart: Chart) -> Self {
        Self {
            chart,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) {
        self.samples.push(sample);
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration {
            chart: self.chart,
            coords: self.samples[i].state,
        }
    }

    /// `state(end) − state(start)`.
    pub fn displacement(&self) -> [f64; DIM] {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => std::array::from_fn(|i| b.state[i] - a.state[i]),
            _ => [0.0; DIM],
        }
    }

    /// Re-expresses every state in the original chart.
    pub fn to_original(&self) -> Trajectory {
        if self.chart == Chart::Original {
            return self.clone();
        }
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                state: from_adapted(&AdaptedPoint(s.state)).coords,
                ..s.clone()
            })
            .collect();
        Trajectory {
            chart: Chart::Original,
            samples,
        }
    }

    fn layout(&self) -> Result<(bool, bool)> {
        let Some(first) = self.first() else {
            return Ok((false, false));
        };
        let layout = (first.momenta.is_some(), first.controls.is_some());
        if self
            .samples
            .iter()
            .any(|s| (s.momenta.is_some(), s.controls.is_some()) != layout)
        {
            return Err(Error::Csv("samples carry differing optional columns".into()));
        }
        Ok(layout)
    }

    pub fn header(&self) -> Result<Vec<&'static str>> {
        let (m, c) = self.layout()?;
        let mut h = vec!["t"];
        h.extend(state_columns(self.chart));
        if m {
            h.extend(MOMENTUM_COLUMNS);
        }
        if c {
            h.extend(CONTROL_COLUMNS);
        }
        Ok(h)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header()?).map_err(csv_err)?;
        for s in &self.samples {
            let mut row = vec![fmt(s.t)];
            row.extend(s.state.iter().map(|&v| fmt(v)));
            if let Some(h) = &s.momenta {
                row.extend(h.iter().map(|&v| fmt(v)));
            }
            if let Some(u) = &s.controls {
                row.extend(u.iter().map(|&v| fmt(v)));
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let chart = [Chart::Original, Chart::Adapted]
            .into_iter()
            .find(|&c| header.len() > DIM && header[1..=DIM] == state_columns(c))
            .ok_or_else(|| Error::Csv(format!("unrecognised header {header:?}")))?;
        let rest = &header[DIM + 1..];
        let (momenta, controls) = match rest.len() {
            0 => (false, false),
            4 if rest == CONTROL_COLUMNS => (false, true),
            7 if rest == MOMENTUM_COLUMNS => (true, false),
            11 if rest[..7] == MOMENTUM_COLUMNS && rest[7..] == CONTROL_COLUMNS => (true, true),
            _ => return Err(Error::Csv(format!("unrecognised header {header:?}"))),
        };
        if header[0] != "t" {
            return Err(Error::Csv("first column must be t".into()));
        }
        let mut traj = Trajectory::new(chart);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Csv(format!("row {}: {e}", line + 1)))?;
            if vals.len() != header.len() {
                return Err(Error::Csv(format!("row {} has {} fields", line + 1, vals.len())));
            }
            let mut k = 1;
            let mut take = |n: usize| {
                let s = &vals[k..k + n];
                k += n;
                s.to_vec()
            };
            let state: [f64; DIM] = take(DIM).try_into().expect("length checked");
            let momenta = momenta.then(|| take(DIM).try_into().expect("length checked"));
            let controls = controls.then(|| take(4).try_into().expect("length checked"));
            traj.push(Sample {
                t: vals[0],
                state,
                momenta,
                controls,
            });
        }
        Ok(traj)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> Sample {
        Sample {
            t,
            state: [t, 0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, -0.0, 7.0],
            momenta: Some([0.5; DIM]),
            controls: Some([0.5, 0.5, 0.5, 0.5]),
        }
    }

    #[test]
    fn header_follows_chart_and_options() {
        let mut t = Trajectory::new(Chart::Original);
        t.push(Sample {
            t: 0.0,
            state: [0.0; DIM],
            momenta: None,
            controls: None,
        });
        assert_eq!(t.header().unwrap().join(","), "t,x,y,theta,phi,l1,l2,l3");
        let mut a = Trajectory::new(Chart::Adapted);
        a.push(sample(0.0));
        assert_eq!(
            a.header().unwrap().join(","),
            "t,x,l1,l2,l3,y1,y2,y3,h1,h2,h3,h4,h5,h6,h7,u1,u2,u3,u4"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut a = Trajectory::new(Chart::Adapted);
        for k in 0..5 {
            a.push(sample(k as f64 * 0.1));
        }
        let text = a.to_csv_string().unwrap();
        assert_eq!(Trajectory::from_csv_str(&text).unwrap(), a);
    }

    #[test]
    fn mixed_layouts_are_rejected() {
        let mut a = Trajectory::new(Chart::Adapted);
        a.push(sample(0.0));
        a.push(Sample {
            momenta: None,
            ..sample(1.0)
        });
        assert!(a.to_csv_string().is_err());
        assert!(Trajectory::from_csv_str("t,a,b\n1,2,3\n").is_err());
    }
}
