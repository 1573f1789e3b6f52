//! Composite five-point Gauss-Legendre quadrature.

/// Abscissae on `[-1, 1]`.
const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];

const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Nodes and weights of the 5-point rule mapped onto `[a, b]`.
pub fn gauss_legendre_5(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    NODES
        .iter()
        .zip(WEIGHTS.iter())
        .map(move |(x, w)| (mid + half * x, half * w))
}

/// Panel boundaries splitting `[a, b]` into `panels` equal pieces.
pub fn panel_edges(a: f64, b: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    (0..n).map(move |i| {
        let lo = a + h * i as f64;
        let hi = if i + 1 == n {
            b
        } else {
            a + h * (i + 1) as f64
        };
        (lo, hi)
    })
}
