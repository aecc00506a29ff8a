//! Small numeric helpers shared across modules.

/// Compensated (Kahan) accumulator.
///
/// Mass budgets and total-variation sums are compared against 1e-12 relative
/// tolerances; naive summation over tens of thousands of cells can lose that
/// many digits, compensated summation cannot.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator of values.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Kahan::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// FNV-1a hash of a byte string, used for scenario digests in run summaries.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        // 1.0 followed by many terms below the f64 ulp of the running sum.
        let n = 100_000;
        let tiny = 1e-18;
        let mut naive = 1.0f64;
        for _ in 0..n {
            naive += tiny;
        }
        let mut k = Kahan::new();
        k.add(1.0);
        for _ in 0..n {
            k.add(tiny);
        }
        let exact = 1.0 + n as f64 * tiny;
        assert_eq!(naive, 1.0); // the point of the exercise
        assert!((k.value() - exact).abs() <= 1e-15);
    }

    #[test]
    fn fnv1a_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_ne!(fnv1a(b"a"), fnv1a(b"b"));
    }
}
