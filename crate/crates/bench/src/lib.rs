//! Benchmark fixtures shared by the criterion targets.

use leakynorm::DataSet;

/// `n` evenly spaced scalar points on `[-1, 1]` with alternating labels.
pub fn alternating(n: usize) -> DataSet {
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n.max(2) - 1) as f64).collect();
    let ys: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    DataSet::from_scalars(&xs, &ys).expect("finite fixture")
}

/// `n` points on the unit circle in the plane, labelled by quadrant parity.
pub fn circle(n: usize) -> DataSet {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| if p[0] * p[1] >= 0.0 { 1.0 } else { -1.0 }).collect();
    DataSet::from_points(&points, &ys).expect("finite fixture")
}
