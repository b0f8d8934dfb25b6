//! Exact summation and correctly rounded means.
//!
//! The mean returned here is the arithmetic mean of the inputs rounded once to
//! the nearest `f64` (ties to even). It is therefore independent of input
//! order, exact on constant inputs, and never exceeds the input maximum.

use std::cmp::Ordering;

/// Non-overlapping expansion whose exact sum equals the sum of everything
/// added to it (Shewchuk's grow-expansion, as used by `math.fsum`).
#[derive(Debug, Clone, Default)]
struct Expansion {
    parts: Vec<f64>,
}

impl Expansion {
    fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for j in 0..self.parts.len() {
            let mut y = self.parts[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.parts[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.parts.truncate(kept);
        self.parts.push(x);
    }

    /// Adds `-(q · n)` exactly, using an fma for the product's rounding error.
    fn sub_product(&mut self, q: f64, n: f64) {
        let p = q * n;
        let e = q.mul_add(n, -p);
        self.add(-p);
        self.add(-e);
    }

    /// Sign of the exact value; the largest-magnitude component dominates.
    fn sign(&self) -> Ordering {
        self.parts
            .iter()
            .rev()
            .find(|&&v| v != 0.0)
            .map_or(Ordering::Equal, |v| v.partial_cmp(&0.0).unwrap_or(Ordering::Equal))
    }

    fn approx(&self) -> f64 {
        self.parts.iter().sum()
    }
}

/// Exact sum of `values`, rounded once.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = Expansion::default();
    for &v in values {
        acc.add(v);
    }
    // Round the expansion: take the top component, then decide using the rest.
    let mut parts = acc.parts;
    let Some(mut hi) = parts.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = parts.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Half-way case, same correction as CPython's fsum.
    if let Some(&next) = parts.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Correctly rounded arithmetic mean. Returns `None` for empty input.
pub fn exact_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mut total = Expansion::default();
    for &v in values {
        total.add(v);
    }
    let residual = |q: f64| {
        let mut r = total.clone();
        r.sub_product(q, n);
        r.sign()
    };

    let guess = total.approx() / n;
    if !guess.is_finite() {
        return Some(guess);
    }
    // Bracket the exact mean between adjacent floats lo <= m <= hi.
    let (mut lo, mut hi) = match residual(guess) {
        Ordering::Equal => return Some(guess),
        Ordering::Greater => (guess, guess.next_up()),
        Ordering::Less => (guess.next_down(), guess),
    };
    loop {
        match residual(hi) {
            Ordering::Equal => return Some(hi),
            Ordering::Greater => {
                lo = hi;
                hi = hi.next_up();
                continue;
            }
            Ordering::Less => {}
        }
        match residual(lo) {
            Ordering::Equal => return Some(lo),
            Ordering::Less => {
                hi = lo;
                lo = lo.next_down();
                continue;
            }
            Ordering::Greater => break,
        }
    }
    // Nearest of lo/hi: sign of 2·S − (lo + hi)·n.
    let mut twice = Expansion::default();
    for &p in &total.parts {
        twice.add(2.0 * p);
    }
    twice.sub_product(lo, n);
    twice.sub_product(hi, n);
    Some(match twice.sign() {
        Ordering::Less => lo,
        Ordering::Greater => hi,
        Ordering::Equal => {
            if lo.to_bits() & 1 == 0 {
                lo
            } else {
                hi
            }
        }
    })
}
