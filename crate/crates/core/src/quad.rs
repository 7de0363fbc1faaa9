//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_41,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Piece { a, b, value: k * h, err: ((k - g) * h).abs() }
}

/// Integral of `f` over `[a, b]` to absolute accuracy `tol`. `splits` are
/// interior points where `f` may be non-smooth. Returns the value and the
/// error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, splits: &[f64], tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    edges.extend(splits.iter().copied().filter(|&s| s > lo && s < hi));
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    let mut heap: BinaryHeap<Piece> = edges.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    for _ in 0..10_000 {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        if total_err <= tol {
            let value: f64 = heap.iter().map(|p| p.value).sum();
            if !value.is_finite() {
                return Err(Error::NonFinite { t: lo });
            }
            return Ok((sign * value, total_err));
        }
        let worst = heap.pop().expect("non-empty");
        let m = 0.5 * (worst.a + worst.b);
        heap.push(gk15(&f, worst.a, m));
        heap.push(gk15(&f, m, worst.b));
    }
    let total_err: f64 = heap.iter().map(|p| p.err).sum();
    Err(Error::Precondition(format!("quadrature did not reach tolerance {tol:e} (estimate {total_err:e})")))
}
