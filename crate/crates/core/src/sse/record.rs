//! Sampled trajectory output and its binary dump format.
//!
//! Layout (little endian): 8-byte magic, `u64` version, `u64` sample count,
//! `u64` column count, `f64` dt, `f64` sample interval, then one row of
//! `t, x1, x2, Re C, Im C, S` per sample. Undefined values are NaN.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};
use crate::metrics::{pearson, phase_difference, IndicatorSample, Snapshot, WindowSpec};

pub const RECORD_MAGIC: &[u8; 8] = b"VDPTRAJ1";
const RECORD_VERSION: u64 = 1;
const RECORD_COLUMNS: u64 = 6;

/// Measured currents and the quadrature expectations that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentSample {
    pub t: f64,
    pub currents: Vec<f64>,
    pub quadratures: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    dt: f64,
    sample_interval: f64,
    times: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    correlator: Vec<Option<C64>>,
    entropy: Vec<f64>,
    channels: usize,
    currents: Option<Vec<CurrentSample>>,
    final_state: Option<StateVector>,
    steps: u64,
}

impl TrajectoryRecord {
    pub(crate) fn with_capacity(
        dt: f64,
        sample_interval: f64,
        n: usize,
        channels: usize,
        currents: bool,
    ) -> Self {
        Self {
            dt,
            sample_interval,
            times: Vec::with_capacity(n),
            x1: Vec::with_capacity(n),
            x2: Vec::with_capacity(n),
            correlator: Vec::with_capacity(n),
            entropy: Vec::with_capacity(n),
            channels,
            currents: currents.then(Vec::new),
            final_state: None,
            steps: 0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, snap: &Snapshot) {
        self.times.push(t);
        self.x1.push(snap.x1);
        self.x2.push(snap.x2);
        self.correlator.push(snap.correlator);
        self.entropy.push(snap.entropy);
    }

    pub(crate) fn push_currents(&mut self, c: CurrentSample) {
        if let Some(v) = self.currents.as_mut() {
            v.push(c);
        }
    }

    pub(crate) fn set_final(&mut self, psi: StateVector, steps: u64) {
        self.final_state = Some(psi);
        self.steps = steps;
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn correlator(&self) -> &[Option<C64>] {
        &self.correlator
    }

    pub fn entropy(&self) -> &[f64] {
        &self.entropy
    }

    pub fn currents(&self) -> Option<&[CurrentSample]> {
        self.currents.as_deref()
    }

    /// State at the end of the run. Records read back from disk have none.
    pub fn final_state(&self) -> &StateVector {
        self.final_state
            .as_ref()
            .expect("final state is only available on freshly integrated records")
    }

    pub fn try_final_state(&self) -> Option<&StateVector> {
        self.final_state.as_ref()
    }

    /// Indicators at every sample; Pearson uses `window` (its stride must
    /// equal the sample interval).
    pub fn indicator_samples(&self, window: &WindowSpec) -> Result<Vec<IndicatorSample>> {
        if (window.stride - self.sample_interval).abs() > 1e-9 * self.sample_interval {
            return Err(Error::InvalidParameter {
                field: "window.stride",
                reason: format!(
                    "{} does not match the sample interval {}",
                    window.stride, self.sample_interval
                ),
            });
        }
        Ok((0..self.len())
            .map(|i| {
                let t = self.times[i];
                let c = self.correlator[i];
                IndicatorSample {
                    t,
                    correlator: c,
                    delta_phi: c.and_then(|c| phase_difference(c).ok()),
                    pearson: pearson(&self.x1, &self.x2, window, t),
                    entropy: self.entropy[i],
                }
            })
            .collect())
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(RECORD_MAGIC)?;
        for v in [RECORD_VERSION, self.len() as u64, RECORD_COLUMNS] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.sample_interval.to_le_bytes())?;
        for i in 0..self.len() {
            let c = self.correlator[i].unwrap_or(C64::new(f64::NAN, f64::NAN));
            for v in [self.times[i], self.x1[i], self.x2[i], c.re, c.im, self.entropy[i]] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != RECORD_MAGIC {
            return Err(Error::Io("not a trajectory dump".into()));
        }
        let mut word = [0u8; 8];
        let mut u64_of = |r: &mut dyn Read| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let version = u64_of(r)?;
        let n = u64_of(r)? as usize;
        let cols = u64_of(r)?;
        if version != RECORD_VERSION || cols != RECORD_COLUMNS {
            return Err(Error::Io(format!("unsupported dump version {version} with {cols} columns")));
        }
        let f64_of = |r: &mut dyn Read| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let dt = f64_of(r)?;
        let interval = f64_of(r)?;
        let mut rec = Self::with_capacity(dt, interval, n, 0, false);
        for _ in 0..n {
            let mut row = [0.0; 6];
            for v in row.iter_mut() {
                *v = f64_of(r)?;
            }
            let c = C64::new(row[3], row[4]);
            rec.times.push(row[0]);
            rec.x1.push(row[1]);
            rec.x2.push(row[2]);
            rec.correlator.push(c.is_finite().then_some(c));
            rec.entropy.push(row[5]);
        }
        Ok(rec)
    }
}
