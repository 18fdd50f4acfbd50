//! Small numeric helpers shared by the trajectory, bound and checker modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

/// How a running sum is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// Neumaier's variant of Kahan summation.
    #[default]
    Compensated,
    /// Plain left-to-right `+=`.
    Naive,
}

/// Running sum with an optional compensation term.
///
/// The compensation is the Neumaier form, which also handles addends larger
/// in magnitude than the running total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    mode: Summation,
}

impl CompensatedSum {
    pub fn new(mode: Summation) -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
            mode,
        }
    }

    pub fn add(&mut self, x: f64) {
        match self.mode {
            Summation::Naive => self.sum += x,
            Summation::Compensated => {
                let t = self.sum + x;
                if self.sum.abs() >= x.abs() {
                    self.comp += (self.sum - t) + x;
                } else {
                    self.comp += (x - t) + self.sum;
                }
                self.sum = t;
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn mode(&self) -> Summation {
        self.mode
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new(Summation::Compensated);
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Euclidean norm with compensated accumulation of the squares.
pub fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).collect::<CompensatedSum>().value().sqrt()
}

/// Exact rational value of the shortest round-trip decimal spelling of `x`.
///
/// Hyperparameters are typed as decimals (`0.9`, `0.99`); comparing them in
/// binary floating point puts boundary cases like `0.99 = 2*0.9 - 0.81` on the
/// wrong side. Region tests therefore run on the decimal the user wrote.
///
/// Panics on non-finite input.
pub fn decimal_rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "decimal_rational: non-finite input {x}");
    // `Display` for f64 prints the shortest round-trip decimal without exponent.
    let text = format!("{x}");
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut numer: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .expect("decimal digits");
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    BigRational::new(numer, denom)
}

/// Nearest f64 to a rational.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// `1 - x`, exact on the decimal spelling of `x`, rounded once.
pub fn decimal_complement(x: f64) -> f64 {
    let one = BigRational::one();
    rational_to_f64(&(one - decimal_rational(x)))
}

/// `n` log-spaced points covering `[lo, hi]`, both ends included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log_spaced needs 0 < lo <= hi");
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}
