//! Shared numeric formatting and summation helpers.

/// Fixed scientific notation with 16 fractional digits.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Neumaier compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_round_trips() {
        for x in [0.0, 1.0, -2.5e-300, std::f64::consts::PI, 1e300] {
            assert_eq!(sci(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sci(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn compensated_sum() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}
