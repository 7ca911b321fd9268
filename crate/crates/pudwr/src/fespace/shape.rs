//! Tensor-product Lagrange shape functions on the reference square.
//!
//! Local node `b * (s + 1) + a` sits at `(a / s, b / s)`.

/// 1D Lagrange basis function `a` of degree `s` and its derivative.
#[inline]
pub fn lagrange_1d(s: usize, a: usize, x: f64) -> (f64, f64) {
    match (s, a) {
        (1, 0) => (1.0 - x, -1.0),
        (1, _) => (x, 1.0),
        (2, 0) => (2.0 * (x - 0.5) * (x - 1.0), 4.0 * x - 3.0),
        (2, 1) => (-4.0 * x * (x - 1.0), -8.0 * x + 4.0),
        (2, _) => (2.0 * x * (x - 0.5), 4.0 * x - 1.0),
        _ => panic!("unsupported order {s}"),
    }
}

pub fn n_local(s: usize) -> usize {
    (s + 1) * (s + 1)
}

/// Value and reference gradient of local node `node`.
pub fn shape_eval(s: usize, node: usize, r: [f64; 2]) -> (f64, [f64; 2]) {
    let (a, b) = (node % (s + 1), node / (s + 1));
    let (vx, dx) = lagrange_1d(s, a, r[0]);
    let (vy, dy) = lagrange_1d(s, b, r[1]);
    (vx * vy, [dx * vy, vx * dy])
}

/// All local values and reference gradients at `r`.
#[inline]
pub fn shape_all(s: usize, r: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]]) {
    let n = s + 1;
    let mut lx = [(0.0, 0.0); 3];
    let mut ly = [(0.0, 0.0); 3];
    for a in 0..n {
        lx[a] = lagrange_1d(s, a, r[0]);
        ly[a] = lagrange_1d(s, a, r[1]);
    }
    for b in 0..n {
        for a in 0..n {
            let k = b * n + a;
            vals[k] = lx[a].0 * ly[b].0;
            grads[k] = [lx[a].1 * ly[b].0, lx[a].0 * ly[b].1];
        }
    }
}

/// Local nodes on a cell side, ordered by increasing coordinate along it.
pub fn side_nodes(s: usize, side: usize) -> Vec<usize> {
    let n = s + 1;
    (0..n)
        .map(|t| match side {
            0 => t * n,
            1 => t * n + s,
            2 => t,
            _ => s * n + t,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_property() {
        for s in 1..=2 {
            for node in 0..n_local(s) {
                for other in 0..n_local(s) {
                    let p = [(other % (s + 1)) as f64 / s as f64, (other / (s + 1)) as f64 / s as f64];
                    let (v, _) = shape_eval(s, node, p);
                    let expect = if node == other { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for s in 1..=2 {
            for &r in &[[0.3, 0.7], [0.0, 1.0], [0.91, 0.12]] {
                let mut v = [0.0; 9];
                let mut g = [[0.0; 2]; 9];
                shape_all(s, r, &mut v, &mut g);
                let sum: f64 = v[..n_local(s)].iter().sum();
                let gs = g[..n_local(s)].iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
                assert!((sum - 1.0).abs() < 1e-14);
                assert!(gs[0].abs() < 1e-13 && gs[1].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn q1_corner_values() {
        assert_eq!(shape_eval(1, 0, [0.0, 0.0]).0, 1.0);
        assert_eq!(shape_eval(1, 0, [1.0, 1.0]).0, 0.0);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let h = 1e-6;
        for s in 1..=2 {
            for node in 0..n_local(s) {
                let r = [0.37, 0.61];
                let (_, g) = shape_eval(s, node, r);
                let dx = (shape_eval(s, node, [r[0] + h, r[1]]).0 - shape_eval(s, node, [r[0] - h, r[1]]).0) / (2.0 * h);
                let dy = (shape_eval(s, node, [r[0], r[1] + h]).0 - shape_eval(s, node, [r[0], r[1] - h]).0) / (2.0 * h);
                assert!((g[0] - dx).abs() < 1e-8 && (g[1] - dy).abs() < 1e-8);
            }
        }
    }
}
