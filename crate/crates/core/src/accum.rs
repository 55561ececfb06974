//! Compensated summation used by every quadrature in the crate.
//!
//! Sums are always taken in index order so results never depend on thread
//! scheduling.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = Neumaier::new();
    for x in iter {
        acc.add(x);
    }
    acc.total()
}

/// `|x|^p`, with a fast path for small integer exponents.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p.fract() == 0.0 && (0.0..=64.0).contains(&p) {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `|x|^(p-2) x`, exactly odd in `x`.
#[inline]
pub fn signed_pow(x: f64, p: f64) -> f64 {
    let m = abs_pow(x, p - 1.0);
    if x < 0.0 {
        -m
    } else if x > 0.0 {
        m
    } else {
        0.0
    }
}
