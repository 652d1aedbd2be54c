//! Small numeric helpers shared across modules.

/// Neumaier compensated sum; result is independent of chunking because it
/// is always evaluated sequentially in iteration order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Round to `digits` significant decimal digits, the precision used in
/// every text artifact.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float parses")
}

/// Text form of `x` at 6 significant digits, shortest representation of
/// the rounded value. Used for every CSV and JSON float.
pub fn fmt6(x: f64) -> String {
    let r = round_sig(x, 6);
    if r == 0.0 {
        // Collapses -0 so that signs never differ between runs.
        return "0".into();
    }
    format!("{r}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(1723.3333333, 6), 1723.33);
        assert_eq!(round_sig(-0.000123456789, 6), -0.000123457);
        assert_eq!(round_sig(0.0, 6), 0.0);
        assert_eq!(fmt6(1723.333333), "1723.33");
        assert_eq!(fmt6(-0.0), "0");
        assert_eq!(fmt6(2.0), "2");
        assert_eq!(fmt6(1.0e-7 / 3.0), "0.0000000333333");
    }
}
