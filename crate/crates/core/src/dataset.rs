//! Time series recorded on one shaft, or on the n joints of a coupled group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pwm: f64,
    pub omega: f64,
    pub omega_dot: f64,
    pub tau: f64,
}

impl Sample {
    pub fn is_finite(&self) -> bool {
        [self.t, self.pwm, self.omega, self.omega_dot, self.tau]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub shaft: String,
    pub sample_rate: f64,
    /// `omega_dot` was reconstructed from `omega` rather than measured.
    pub derived_acceleration: bool,
    /// Rows dropped at ingestion for non-finite values.
    #[serde(default)]
    pub dropped_rows: usize,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            shaft: "shaft".into(),
            sample_rate: 0.0,
            derived_acceleration: false,
            dropped_rows: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

fn check_monotone<I: Iterator<Item = f64>>(times: I) -> Result<()> {
    let mut prev: Option<f64> = None;
    for (row, t) in times.enumerate() {
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at row {row} (t = {t} after {p})"
                )));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Mean sample rate from the time span, zero for fewer than two samples.
fn rate_from_times(first: f64, last: f64, len: usize) -> f64 {
    if len < 2 || last <= first {
        0.0
    } else {
        (len - 1) as f64 / (last - first)
    }
}

impl Dataset {
    /// Validates finiteness and strictly increasing time. An empty dataset is
    /// allowed here; fits reject it.
    pub fn new(samples: Vec<Sample>, meta: DatasetMeta) -> Result<Self> {
        if let Some(row) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!("non-finite value at row {row}")));
        }
        check_monotone(samples.iter().map(|s| s.t))?;
        let mut meta = meta;
        if meta.sample_rate <= 0.0 {
            meta.sample_rate = match (samples.first(), samples.last()) {
                (Some(a), Some(b)) => rate_from_times(a.t, b.t, samples.len()),
                _ => 0.0,
            };
        }
        Ok(Self { samples, meta })
    }

    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        Self::new(samples, DatasetMeta::default())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Replaces `omega_dot` by a finite-difference estimate of `omega`
    /// smoothed with a centred moving average of `window` samples.
    pub fn with_derived_acceleration(mut self, window: usize) -> Self {
        let t: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        let w: Vec<f64> = self.samples.iter().map(|s| s.omega).collect();
        let acc = derive_acceleration(&t, &w, window);
        for (s, a) in self.samples.iter_mut().zip(acc) {
            s.omega_dot = a;
        }
        self.meta.derived_acceleration = true;
        self
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;
    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

/// Centred moving average; the window shrinks symmetrically at the edges.
pub fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..x.len())
        .map(|i| {
            let r = half.min(i).min(x.len() - 1 - i);
            let slice = &x[i - r..=i + r];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Central differences of the smoothed signal, one-sided at the ends.
pub fn derive_acceleration(t: &[f64], omega: &[f64], window: usize) -> Vec<f64> {
    let n = omega.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let w = moving_average(omega, window);
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (w[b] - w[a]) / (t[b] - t[a])
        })
        .collect()
}

/// One time step of an n-joint coupled group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSample {
    pub t: f64,
    /// One PWM value per motor.
    pub pwm: Vec<f64>,
    pub omega_j: Vec<f64>,
    pub tau_j: Vec<f64>,
    /// Joint accelerations when measured or simulated.
    pub omega_dot_j: Option<Vec<f64>>,
    /// Motor-shaft velocities at the gearbox output, from motor encoders.
    pub omega_m: Option<Vec<f64>>,
}

impl CoupledSample {
    fn check(&self, n: usize, row: usize) -> Result<()> {
        let lens = [
            Some(self.pwm.len()),
            Some(self.omega_j.len()),
            Some(self.tau_j.len()),
            self.omega_dot_j.as_ref().map(Vec::len),
            self.omega_m.as_ref().map(Vec::len),
        ];
        if lens.iter().flatten().any(|&l| l != n) {
            return Err(Error::Data(format!("row {row}: channel count differs from {n}")));
        }
        let finite = std::iter::once(&self.t)
            .chain(&self.pwm)
            .chain(&self.omega_j)
            .chain(&self.tau_j)
            .chain(self.omega_dot_j.iter().flatten())
            .chain(self.omega_m.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data(format!("non-finite value at row {row}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDataset {
    n: usize,
    samples: Vec<CoupledSample>,
    pub meta: DatasetMeta,
}

impl CoupledDataset {
    pub fn new(n: usize, samples: Vec<CoupledSample>, meta: DatasetMeta) -> Result<Self> {
        if n == 0 {
            return Err(Error::Data("coupled dataset needs at least one channel".into()));
        }
        for (row, s) in samples.iter().enumerate() {
            s.check(n, row)?;
        }
        if samples.iter().any(|s| s.omega_m.is_some()) && samples.iter().any(|s| s.omega_m.is_none()) {
            return Err(Error::Data("motor-encoder channels present on some rows only".into()));
        }
        check_monotone(samples.iter().map(|s| s.t))?;
        let mut meta = meta;
        if meta.sample_rate <= 0.0 {
            meta.sample_rate = match (samples.first(), samples.last()) {
                (Some(a), Some(b)) => rate_from_times(a.t, b.t, samples.len()),
                _ => 0.0,
            };
        }
        Ok(Self { n, samples, meta })
    }

    pub fn channels(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[CoupledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_motor_encoders(&self) -> bool {
        self.samples.first().is_some_and(|s| s.omega_m.is_some())
    }

    pub fn has_acceleration(&self) -> bool {
        self.samples.first().is_some_and(|s| s.omega_dot_j.is_some())
    }
}
