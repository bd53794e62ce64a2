//! Built-in test functions, selectable by name.

/// A scalar test function returned as a one-component vector.
pub type TestFn = fn(&[f64]) -> Vec<f64>;

/// `exp(y_1 + ... + y_N)`.
pub fn expsum(y: &[f64]) -> Vec<f64> {
    vec![y.iter().sum::<f64>().exp()]
}

/// `1 + sum_n (n + 1) y_n`.
pub fn linear(y: &[f64]) -> Vec<f64> {
    vec![1.0 + y.iter().enumerate().map(|(n, v)| (n + 1) as f64 * v).sum::<f64>()]
}

/// `1 / (1 + 25 |y|^2)`.
pub fn runge(y: &[f64]) -> Vec<f64> {
    vec![1.0 / (1.0 + 25.0 * y.iter().map(|v| v * v).sum::<f64>())]
}

pub const NAMES: [&str; 3] = ["expsum", "linear", "runge"];

pub fn by_name(name: &str) -> Option<TestFn> {
    match name {
        "expsum" => Some(expsum),
        "linear" => Some(linear),
        "runge" => Some(runge),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        for name in NAMES {
            assert!(by_name(name).is_some());
        }
        assert!(by_name("rosenbrock").is_none());
        assert_eq!(expsum(&[0.0, 0.0]), vec![1.0]);
        assert_eq!(linear(&[1.0, 1.0]), vec![4.0]);
        assert_eq!(runge(&[0.2]), vec![0.5]);
    }
}
