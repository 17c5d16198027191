//! Small numeric helpers shared across modules.

/// `n` evenly spaced values from `a` to `b` inclusive. `n = 1` yields `[a]`.
pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

/// `n` log-spaced values from `a` to `b` inclusive; requires `0 < a <= b`.
pub(crate) fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    debug_assert!(a > 0.0 && a <= b);
    linspace(a.ln(), b.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}
