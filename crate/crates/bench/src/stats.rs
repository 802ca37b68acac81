use statrs::distribution::{ContinuousCDF, StudentsT};

/// Paired t-test of the alternative `mean(a - b) < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

/// One-sided paired t-test that `a` is smaller than `b` on average.
/// Returns `None` for fewer than two pairs.
pub fn paired_t_test_less(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let n = a.len();
    if n < 2 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = crate::metrics::mean(&d);
    let sd = crate::metrics::std_dev(&d);
    if sd == 0.0 {
        let p = if m < 0.0 { 0.0 } else { 1.0 };
        let t = if m < 0.0 { f64::NEG_INFINITY } else if m > 0.0 { f64::INFINITY } else { 0.0 };
        return Some(PairedTest { n, mean_diff: m, t, p_value: p });
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    Some(PairedTest { n, mean_diff: m, t, p_value: dist.cdf(t) })
}
