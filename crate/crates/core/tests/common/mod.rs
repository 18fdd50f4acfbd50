//! Independent 200-bit recomputation of the moment recurrence and `s_T`.
//! Shares no code with the library; inputs are converted from f64 exactly.

use adamlab::HyperParams;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

type F = FBig<HalfEven, 2>;

const PRECISION: usize = 200;

fn exact(x: f64) -> F {
    F::try_from(x).expect("finite input").with_precision(PRECISION).value()
}

fn to_f64(x: &F) -> f64 {
    x.to_f64().value()
}

/// `s_T` for the given gradients, every operation at 200 bits.
pub fn s_oracle(hyper: &HyperParams, gradients: &[f64]) -> f64 {
    let one = exact(1.0);
    let zero = exact(0.0);
    let (b1, b2) = (exact(hyper.beta1), exact(hyper.beta2));
    let (lm, lg) = (exact(hyper.lambda_m), exact(hyper.lambda_g));
    let (mut m, mut v, mut s) = (zero.clone(), zero.clone(), zero.clone());
    let (mut b1_pow, mut b2_pow) = (one.clone(), one.clone());
    // lambda^(t-1)
    let (mut lm_pow, mut lg_pow) = (one.clone(), one.clone());
    for (i, &g) in gradients.iter().enumerate() {
        let t = exact((i + 1) as f64);
        let g = exact(g);
        m = &b1 * &lm_pow * &m + (&one - &b1 * &lg_pow) * &g;
        v = &b2 * &v + (&one - &b2) * &g * &g;
        b1_pow = &b1_pow * &b1;
        b2_pow = &b2_pow * &b2;
        let m_hat = &m / (&one - &b1_pow);
        let v_hat = &v / (&one - &b2_pow);
        if m_hat != zero {
            s += &m_hat * &m_hat / (t * v_hat).sqrt();
        }
        lm_pow = &lm_pow * &lm;
        lg_pow = &lg_pow * &lg;
    }
    to_f64(&s)
}

pub fn relative_error(a: f64, reference: f64) -> f64 {
    (a - reference).abs() / reference.abs()
}
