//! Two-point exploration sequence and the odd maps `h`, `g`.
//!
//! Draws `w` are i.i.d. on `{-omega, +omega}` with equal probability. The
//! shipped map pair is linear, `h(w) = sqrt(chi) * w / omega` and
//! `g(w) = sqrt(psi) * w / omega`, so that `E[h^2] = chi` and `E[g^2] = psi`
//! hold exactly for any `omega > 0`.
//!
//! Randomness comes from [`RandomStream`], a counter-addressed ChaCha8
//! stream: the draw for `(seed, trajectory, slot, lane)` is a pure function
//! of those four numbers, so trajectories can be simulated on any thread in
//! any order and still reproduce bit for bit.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Law of the exploration sequence together with the scales of `h` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherSpec {
    omega: f64,
    chi: f64,
    psi: f64,
}

/// One realisation of the dither and the mapped values `h(w)`, `g(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherDraw {
    pub w: f64,
    pub h: f64,
    pub g: f64,
}

/// Odd maps applied to the dither. Implementors must satisfy
/// `sign(h(w)) == sign(g(w))` and vanish only at `w = 0`.
pub trait OddMaps {
    fn h(&self, w: f64) -> f64;
    fn g(&self, w: f64) -> f64;
}

impl DitherSpec {
    /// Unit support (`omega = 1`) with the given second moments.
    pub fn new(chi: f64, psi: f64) -> Result<Self> {
        Self::with_support(1.0, chi, psi)
    }

    pub fn with_support(omega: f64, chi: f64, psi: f64) -> Result<Self> {
        check_positive("omega", omega)?;
        check_positive("chi", chi)?;
        check_positive("psi", psi)?;
        Ok(Self { omega, chi, psi })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// `gamma = E[h g] = sqrt(chi * psi)`.
    pub fn gamma(&self) -> f64 {
        (self.chi * self.psi).sqrt()
    }

    /// Builds the draw corresponding to a sign (`+1.0` or `-1.0`).
    pub fn draw_from_sign(&self, sign: f64) -> DitherDraw {
        let w = if sign < 0.0 { -self.omega } else { self.omega };
        DitherDraw {
            w,
            h: self.h(w),
            g: self.g(w),
        }
    }

    /// Draw for `slot` / `lane` of `stream`.
    pub fn sample(&self, stream: &mut RandomStream, slot: u64, lane: usize) -> DitherDraw {
        self.draw_from_sign(stream.sign(slot, lane))
    }

    /// Exact `E[h^m g^p]` by enumerating the two support points.
    pub fn moment(&self, m: u32, p: u32) -> f64 {
        if (m + p) % 2 == 1 {
            return 0.0;
        }
        let plus = self.h(self.omega).powi(m as i32) * self.g(self.omega).powi(p as i32);
        let minus = self.h(-self.omega).powi(m as i32) * self.g(-self.omega).powi(p as i32);
        0.5 * (plus + minus)
    }
}

impl OddMaps for DitherSpec {
    fn h(&self, w: f64) -> f64 {
        self.chi.sqrt() * w / self.omega
    }

    fn g(&self, w: f64) -> f64 {
        self.psi.sqrt() * w / self.omega
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Counter-addressed random stream for one trajectory.
///
/// Each slot holds `width` 32-bit words; lane `j` of slot `s` is word
/// `s * width + j` of ChaCha8 stream `trajectory` under key `seed`.
/// Sequential reads never reseek the cipher.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    width: usize,
    next_word: u128,
}

impl RandomStream {
    pub fn new(seed: u64, trajectory: u64, width: usize) -> Self {
        assert!(width > 0, "stream width must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        Self {
            rng,
            width,
            next_word: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Raw word at `(slot, lane)`.
    pub fn word(&mut self, slot: u64, lane: usize) -> u32 {
        debug_assert!(lane < self.width);
        let pos = slot as u128 * self.width as u128 + lane as u128;
        if pos != self.next_word {
            self.rng.set_word_pos(pos);
        }
        self.next_word = pos + 1;
        self.rng.next_u32()
    }

    /// `+1.0` or `-1.0` from the top bit of the word at `(slot, lane)`.
    pub fn sign(&mut self, slot: u64, lane: usize) -> f64 {
        if self.word(slot, lane) >> 31 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}
