//! The MRG31k3p combined multiple recursive generator.
//!
//! The generator combines two order-3 recurrences
//!
//! ```text
//! x1[n] = (2^22 x1[n-2] + (2^7 + 1) x1[n-3])  mod m1,   m1 = 2^31 - 1
//! x2[n] = (2^15 x2[n-1] + (2^15 + 1) x2[n-3]) mod m2,   m2 = 2^31 - 21069
//! z[n]  = (x1[n] - x2[n]) mod m1, with 0 reported as m1
//! ```
//!
//! State triplets are stored newest first, so `g1[0]` is `x1[n-1]` before a
//! step. Streams are disjoint segments of length 2^134 of the full sequence;
//! they are reached by raising each component's 3x3 transition matrix to the
//! required power.

mod file;
mod stream;

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub use file::{load_streams, read_streams, save_streams, write_streams, FILE_MAGIC};
pub use stream::{Creator, StreamSet, StreamState};

/// Modulus of the first component, 2^31 - 1.
pub const M1: u32 = 2_147_483_647;
/// Modulus of the second component, 2^31 - 21069.
pub const M2: u32 = 2_147_462_579;
/// Scale from the integer output in [1, m1] to (0, 1).
pub const NORM: f64 = 1.0 / 2_147_483_648.0;
/// log2 of the distance between successive streams.
pub const STREAM_JUMP_EXPONENT: u32 = 134;
/// log2 (approximately) of the generator period.
pub const PERIOD_EXPONENT: u32 = 185;
/// Initial creator seed used when none is given.
pub const DEFAULT_SEED: [u32; 6] = [12345; 6];

const A12: u64 = 1 << 22;
const A13: u64 = (1 << 7) + 1;
const A21: u64 = 1 << 15;
const A23: u64 = (1 << 15) + 1;

/// Six-integer generator state: three values per component, newest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct State {
    g1: [u32; 3],
    g2: [u32; 3],
}

impl State {
    /// Validates and wraps six integers `(g1[0], g1[1], g1[2], g2[0], g2[1], g2[2])`.
    pub fn new(values: [u32; 6]) -> Result<Self> {
        let g1 = [values[0], values[1], values[2]];
        let g2 = [values[3], values[4], values[5]];
        if let Some(v) = g1.iter().find(|&&v| v >= M1) {
            return Err(Error::InvalidSeed(format!("component-1 value {v} is not below m1 = {M1}")));
        }
        if let Some(v) = g2.iter().find(|&&v| v >= M2) {
            return Err(Error::InvalidSeed(format!("component-2 value {v} is not below m2 = {M2}")));
        }
        if g1 == [0; 3] {
            return Err(Error::InvalidSeed("component-1 triplet is all zero".into()));
        }
        if g2 == [0; 3] {
            return Err(Error::InvalidSeed("component-2 triplet is all zero".into()));
        }
        Ok(State { g1, g2 })
    }

    pub fn to_array(&self) -> [u32; 6] {
        [self.g1[0], self.g1[1], self.g1[2], self.g2[0], self.g2[1], self.g2[2]]
    }

    pub fn g1(&self) -> [u32; 3] {
        self.g1
    }

    pub fn g2(&self) -> [u32; 3] {
        self.g2
    }

    /// Advances both components one step and returns the combined output in `[1, m1]`.
    #[inline]
    pub fn next_int(&mut self) -> u32 {
        let g1 = &mut self.g1;
        let y1 = ((A12 * g1[1] as u64 + A13 * g1[2] as u64) % M1 as u64) as u32;
        g1[2] = g1[1];
        g1[1] = g1[0];
        g1[0] = y1;

        let g2 = &mut self.g2;
        let y2 = ((A21 * g2[0] as u64 + A23 * g2[2] as u64) % M2 as u64) as u32;
        g2[2] = g2[1];
        g2[1] = g2[0];
        g2[0] = y2;

        if y1 <= y2 {
            y1 + (M1 - y2)
        } else {
            y1 - y2
        }
    }

    /// Returns the state reached after `2^exponent` steps.
    pub fn jump_pow2(&self, exponent: u32) -> State {
        let (a1, a2) = TransitionPair::one_step().pow2(exponent);
        self.apply(&a1, &a2)
    }

    /// Returns the state reached after `steps` steps.
    pub fn advance(&self, steps: u128) -> State {
        let (a1, a2) = TransitionPair::one_step().pow(steps);
        self.apply(&a1, &a2)
    }

    /// Jumps to the start of the next stream (2^134 steps ahead).
    pub fn next_stream(&self) -> State {
        let (a1, a2) = stream_jump();
        self.apply(a1, a2)
    }

    fn apply(&self, a1: &Mat3, a2: &Mat3) -> State {
        State { g1: a1.apply(&self.g1, M1 as u64), g2: a2.apply(&self.g2, M2 as u64) }
    }
}

impl Default for State {
    fn default() -> Self {
        State::new(DEFAULT_SEED).expect("default seed is valid")
    }
}

/// 3x3 matrix over Z/mZ, entries below 2^31.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Mat3([[u64; 3]; 3]);

impl Mat3 {
    const IDENTITY: Mat3 = Mat3([[1, 0, 0], [0, 1, 0], [0, 0, 1]]);

    // Each product is below 2^62, so a row sum of three fits in u64.
    fn mul(&self, rhs: &Mat3, m: u64) -> Mat3 {
        let mut out = [[0u64; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let s: u64 = (0..3).map(|k| self.0[i][k] * rhs.0[k][j] % m).sum();
                *cell = s % m;
            }
        }
        Mat3(out)
    }

    fn apply(&self, v: &[u32; 3], m: u64) -> [u32; 3] {
        let mut out = [0u32; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let s: u64 = (0..3).map(|k| self.0[i][k] * v[k] as u64 % m).sum();
            *o = (s % m) as u32;
        }
        out
    }
}

#[derive(Clone, Copy)]
struct TransitionPair {
    a1: Mat3,
    a2: Mat3,
}

impl TransitionPair {
    fn one_step() -> Self {
        TransitionPair {
            a1: Mat3([[0, A12, A13], [1, 0, 0], [0, 1, 0]]),
            a2: Mat3([[A21, 0, A23], [1, 0, 0], [0, 1, 0]]),
        }
    }

    fn square(&self) -> Self {
        TransitionPair { a1: self.a1.mul(&self.a1, M1 as u64), a2: self.a2.mul(&self.a2, M2 as u64) }
    }

    fn pow2(self, exponent: u32) -> (Mat3, Mat3) {
        let p = (0..exponent).fold(self, |acc, _| acc.square());
        (p.a1, p.a2)
    }

    fn pow(self, mut steps: u128) -> (Mat3, Mat3) {
        let mut base = self;
        let (mut r1, mut r2) = (Mat3::IDENTITY, Mat3::IDENTITY);
        while steps > 0 {
            if steps & 1 == 1 {
                r1 = r1.mul(&base.a1, M1 as u64);
                r2 = r2.mul(&base.a2, M2 as u64);
            }
            base = base.square();
            steps >>= 1;
        }
        (r1, r2)
    }
}

fn stream_jump() -> &'static (Mat3, Mat3) {
    static JUMP: OnceLock<(Mat3, Mat3)> = OnceLock::new();
    JUMP.get_or_init(|| TransitionPair::one_step().pow2(STREAM_JUMP_EXPONENT))
}
