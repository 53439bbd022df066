//! Finite-difference weights on arbitrary node sets.

/// Weights for derivatives of order `0..=max_order` at `x0` from values at `nodes`.
///
/// Returns `w[d][j]`, the weight of node `j` in the order-`d` derivative.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Offsets and weights of a width-5 stencil on a uniform grid at `pos` of `len` nodes.
///
/// Interior nodes use the centered stencil; near the ends the stencil is shifted
/// so that all offsets stay inside `0..len`.
pub fn uniform_stencil(pos: usize, len: usize, h: f64, order: usize) -> (Vec<isize>, Vec<f64>) {
    let width = 5.min(len) as isize;
    let half = width / 2;
    let mut start = pos as isize - half;
    start = start.max(0).min(len as isize - width);
    let offsets: Vec<isize> = (start..start + width).map(|j| j - pos as isize).collect();
    let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64 * h).collect();
    let w = fornberg_weights(0.0, &nodes, order);
    (offsets, w[order].clone())
}
