//! Averaging of nonuniformly sampled monitor signals.
//!
//! The trailing part of a signal is trimmed to whole periods (between two
//! mean crossings of the same slope) and resampled onto equidistant times
//! with a natural cubic spline.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Signal(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Signal("empty signal".into()));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Signal(format!(
                "times not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    fn slice(&self, lo: usize, hi: usize) -> Signal {
        Signal {
            times: self.times[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

/// Time average by the trapezoidal rule; a single sample is its own mean.
pub fn mean(s: &Signal) -> f64 {
    if s.len() == 1 {
        return s.values[0];
    }
    let area: f64 = s
        .times
        .windows(2)
        .zip(s.values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    area / s.span()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trimmed {
    pub signal: Signal,
    /// Set when no pair of same-slope mean crossings was found and the
    /// window was returned uncut.
    pub untrimmed: bool,
}

/// Keeps the trailing `tail_window` and cuts it to the samples bracketing
/// the first mean crossing and the last crossing with the same slope.
pub fn trim_to_periods(s: &Signal, tail_window: f64) -> Result<Trimmed> {
    if !(tail_window > 0.0) {
        return Err(Error::Signal(format!("tail window {tail_window} must be positive")));
    }
    let t_end = s.times[s.len() - 1];
    let start = s.times.partition_point(|&t| t < t_end - tail_window);
    let tail = s.slice(start, s.len());
    let m = mean(&tail);
    let above = |k: usize| tail.values[k] >= m;
    let crossings: Vec<(usize, bool)> = (0..tail.len().saturating_sub(1))
        .filter(|&k| above(k) != above(k + 1))
        .map(|k| (k, tail.values[k + 1] > tail.values[k]))
        .collect();
    let cut = crossings.first().and_then(|&(k0, rising)| {
        crossings
            .iter()
            .rev()
            .find(|&&(k, r)| r == rising && k > k0)
            .map(|&(k1, _)| (k0, k1 + 1))
    });
    Ok(match cut {
        Some((lo, hi)) => Trimmed {
            signal: tail.slice(lo, hi + 1),
            untrimmed: false,
        },
        None => {
            log::warn!("no two same-slope mean crossings in the last {tail_window} time units; signal left uncut");
            Trimmed {
                signal: tail,
                untrimmed: true,
            }
        }
    })
}

/// Natural cubic spline through the samples.
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior second derivatives
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (0..k).rev() {
                let next = if i + 1 < k { m[i + 2] } else { 0.0 };
                m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
            }
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        if t == self.x[i] {
            return self.y[i];
        }
        if t == self.x[i + 1] {
            return self.y[i + 1];
        }
        let h = self.x[i + 1] - self.x[i];
        let (a, b) = ((self.x[i + 1] - t) / h, (t - self.x[i]) / h);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// `factor * n` equidistant samples over the span of `s`, interpolated by a
/// natural cubic spline. Both endpoints are reproduced exactly.
pub fn resample_uniform(s: &Signal, factor: usize) -> Result<Signal> {
    if s.len() < 4 {
        return Err(Error::Signal(format!(
            "resampling needs at least 4 samples, got {}",
            s.len()
        )));
    }
    if factor == 0 {
        return Err(Error::Signal("resampling factor must be positive".into()));
    }
    let spline = Spline::new(&s.times, &s.values);
    let count = factor * s.len();
    let (t0, t1) = (s.times[0], s.times[s.len() - 1]);
    let h = (t1 - t0) / (count - 1) as f64;
    let times: Vec<f64> = (0..count)
        .map(|k| if k + 1 == count { t1 } else { t0 + k as f64 * h })
        .collect();
    let values = times.iter().map(|&t| spline.eval(t)).collect();
    Ok(Signal { times, values })
}

/// Reads the time column `t` and one named column of a monitor CSV.
pub fn read_signal_csv(path: &Path, column: &str) -> Result<Signal> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(1, format!("no column `{name}`")))
    };
    let (ct, cv) = (find("t")?, find(column)?);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let num = |c: usize| {
            let f = rec.get(c).unwrap_or("").trim();
            f.parse::<f64>().map_err(|e| parse_err(line, format!("`{f}`: {e}")))
        };
        times.push(num(ct)?);
        values.push(num(cv)?);
    }
    Signal::new(times, values)
}

pub fn write_signal_csv(s: &Signal, column: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["t", column]).map_err(io)?;
    for (t, v) in s.times.iter().zip(&s.values) {
        w.write_record([format!("{t:.17e}"), format!("{v:.17e}")]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
