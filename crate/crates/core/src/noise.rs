//! Counter-based random streams for reproducible parallel trajectories.
//!
//! Each trajectory owns a ChaCha8 stream selected by its index under the
//! master seed. Step `n` always reads the same fixed block of words, so
//! increments are a pure function of `(seed, trajectory, step, channel)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tag separating initial-state draws from the per-step increments.
const INITIAL_STATE_DOMAIN: u64 = 0x5eed_1417_0000_0001;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    seed: u64,
    trajectory: u64,
    rng: ChaCha8Rng,
    /// 32-bit words per step block, fixed on first use.
    block_words: Option<u128>,
    next_step: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        Self {
            seed,
            trajectory,
            rng,
            block_words: None,
            next_step: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory(&self) -> u64 {
        self.trajectory
    }

    /// Independent generator for drawing the initial state.
    pub fn initial_state_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ INITIAL_STATE_DOMAIN);
        rng.set_stream(self.trajectory);
        rng
    }

    fn seek(&mut self, step: u64, words: u128) {
        match self.block_words {
            None => self.block_words = Some(words),
            Some(w) => assert_eq!(w, words, "block size changed within one stream"),
        }
        if step != self.next_step {
            self.rng.set_word_pos(u128::from(step) * words);
        }
        self.next_step = step + 1;
    }

    /// Fills `out` with independent standard normals for step `step`.
    pub fn standard_normals(&mut self, step: u64, out: &mut [f64]) {
        let pairs = out.len().div_ceil(2);
        self.seek(step, pairs as u128 * 4);
        for chunk in out.chunks_mut(2) {
            let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            chunk[0] = z0;
            if let Some(z) = chunk.get_mut(1) {
                *z = z1;
            }
        }
    }

    /// Wiener increments `sqrt(dt) N(0, 1)` for step `step`.
    pub fn wiener_increments(&mut self, step: u64, dt: f64, out: &mut [f64]) {
        self.standard_normals(step, out);
        let s = dt.sqrt();
        for z in out.iter_mut() {
            *z *= s;
        }
    }

    /// Uniform in `(0, 1]` for step `step`.
    pub fn uniform(&mut self, step: u64) -> f64 {
        self.seek(step, 2);
        unit_open_closed(self.rng.next_u64())
    }
}

/// Uniform in (0, 1] from the top 53 bits.
pub(crate) fn unit_open_closed(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(u: u64, v: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open_closed(u).ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * unit_open_closed(v)).sin_cos();
    (r * c, r * s)
}
