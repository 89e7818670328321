//! Random streams for simulation.
//!
//! [`replicate_rng`] derives an independent ChaCha stream from `(seed, stream)`:
//! the seed is the key and the stream id selects a disjoint counter space, so a
//! replicate's draws do not depend on which thread runs it or in what order.
//!
//! [`RCompatRng`] reproduces R's default generator (Mersenne-Twister with
//! `set.seed` scrambling and inversion Normals) so published R scripts can be
//! regenerated draw for draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based stream keyed by `seed` and addressed by `stream`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for replicate `rep` of scenario `cell`.
pub fn cell_stream(cell: usize, rep: usize) -> u64 {
    ((cell as u64) << 32) | rep as u64
}

const MT_N: usize = 624;
const MT_M: usize = 397;
const MATRIX_A: u32 = 0x9908_b0df;
const UPPER_MASK: u32 = 0x8000_0000;
const LOWER_MASK: u32 = 0x7fff_ffff;
const I2_32M1: f64 = 2.328_306_437_080_797e-10;

/// R's `Mersenne-Twister` / `Inversion` generator pair.
#[derive(Debug, Clone)]
pub struct RCompatRng {
    mt: [u32; MT_N],
    mti: usize,
}

impl RCompatRng {
    /// Equivalent to `set.seed(seed)` with default `kind` and `normal.kind`.
    pub fn new(seed: i32) -> Self {
        let mut s = seed as u32;
        for _ in 0..50 {
            s = s.wrapping_mul(69069).wrapping_add(1);
        }
        // R fills 625 words; the first is overwritten by the position counter.
        s = s.wrapping_mul(69069).wrapping_add(1);
        let mut mt = [0u32; MT_N];
        for slot in mt.iter_mut() {
            s = s.wrapping_mul(69069).wrapping_add(1);
            *slot = s;
        }
        Self { mt, mti: MT_N }
    }

    fn next_u32(&mut self) -> u32 {
        if self.mti >= MT_N {
            let mt = &mut self.mt;
            for kk in 0..MT_N {
                let y = (mt[kk] & UPPER_MASK) | (mt[(kk + 1) % MT_N] & LOWER_MASK);
                let mag = if y & 1 == 1 { MATRIX_A } else { 0 };
                mt[kk] = mt[(kk + MT_M) % MT_N] ^ (y >> 1) ^ mag;
            }
            self.mti = 0;
        }
        let mut y = self.mt[self.mti];
        self.mti += 1;
        y ^= y >> 11;
        y ^= (y << 7) & 0x9d2c_5680;
        y ^= (y << 15) & 0xefc6_0000;
        y ^= y >> 18;
        y
    }

    /// `runif(1)`.
    pub fn unif_rand(&mut self) -> f64 {
        let v = self.next_u32() as f64 * 2.328_306_436_538_696_3e-10;
        if v <= 0.0 {
            0.5 * I2_32M1
        } else if 1.0 - v <= 0.0 {
            1.0 - 0.5 * I2_32M1
        } else {
            v
        }
    }

    /// `rnorm(1)`.
    pub fn norm_rand(&mut self) -> f64 {
        const BIG: f64 = 134_217_728.0;
        let mut u = self.unif_rand();
        u = (BIG * u).trunc() + self.unif_rand();
        qnorm_as241(u / BIG)
    }
}

/// Wichura's AS 241 (PPND16) standard Normal quantile.
#[allow(clippy::excessive_precision)]
pub fn qnorm_as241(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
