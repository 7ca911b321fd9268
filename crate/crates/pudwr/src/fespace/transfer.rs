//! Interpolation between Q1 and Q2 in space, dG(0) and piecewise linear in time.

use std::sync::Arc;

use super::dofmap::DofMap;
use super::shape::lagrange_1d;
use crate::error::FeError;
use crate::mesh::TemporalMesh;

fn same_mesh(a: &DofMap, b: &DofMap) -> Result<(), FeError> {
    if Arc::ptr_eq(a.mesh(), b.mesh()) && a.ncomp() == b.ncomp() {
        Ok(())
    } else {
        Err(FeError::MeshMismatch)
    }
}

/// `i_h^2`: Q2 coefficients to the Q1 function with the same vertex values.
pub fn spatial_interp_down(high: &DofMap, u: &[f64], low: &DofMap) -> Result<Vec<f64>, FeError> {
    same_mesh(high, low)?;
    let nc = low.ncomp();
    let mut out = vec![0.0; low.n_dofs()];
    for n in 0..low.n_nodes() {
        let h = high.node_at(low.node_lattice(n)).expect("Q1 vertices are Q2 nodes");
        out[n * nc..(n + 1) * nc].copy_from_slice(&u[h * nc..(h + 1) * nc]);
    }
    Ok(out)
}

/// `i_{2h}^2`: on every 2x2 sibling patch, the biquadratic interpolant of the
/// nine Q1 nodal values. Vertex values are kept, so `i_h^2` undoes it.
pub fn spatial_reconstruct_up(low: &DofMap, u: &[f64], high: &DofMap) -> Result<Vec<f64>, FeError> {
    same_mesh(high, low)?;
    let mesh = low.mesh();
    if !mesh.is_patch_structured() {
        return Err(FeError::NotPatchStructured);
    }
    let nc = low.ncomp();
    let mut out = vec![0.0; high.n_dofs()];
    let mut set = vec![false; high.n_nodes()];
    for n in 0..low.n_nodes() {
        let h = high.node_at(low.node_lattice(n)).unwrap();
        out[h * nc..(h + 1) * nc].copy_from_slice(&u[n * nc..(n + 1) * nc]);
        set[h] = true;
    }
    let mut w = [[0.0; 3]; 5];
    for (a, row) in w.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = lagrange_1d(2, b, a as f64 / 4.0).0;
        }
    }
    for (key, _) in mesh.patches() {
        let (x0, y0) = key.lattice_origin();
        let q = key.span() / 4;
        let h2 = key.span() / 2;
        let mut vals = [[0.0; 2]; 9];
        for b in 0..3u64 {
            for a in 0..3u64 {
                let n = low.node_at((x0 + a * h2, y0 + b * h2)).expect("patch vertex");
                for c in 0..nc {
                    vals[(b * 3 + a) as usize][c] = u[n * nc + c];
                }
            }
        }
        for b in 0..5usize {
            for a in 0..5usize {
                let Some(h) = high.node_at((x0 + a as u64 * q, y0 + b as u64 * q)) else { continue };
                if set[h] {
                    continue;
                }
                for c in 0..nc {
                    let mut v = 0.0;
                    for j in 0..3 {
                        for i in 0..3 {
                            v += w[a][i] * w[b][j] * vals[j * 3 + i][c];
                        }
                    }
                    out[h * nc + c] = v;
                }
                set[h] = true;
            }
        }
    }
    high.apply_hanging(&mut out);
    Ok(out)
}

/// `i_k^1`: the dG(0) value of a linear-in-time function on an interval is
/// its right endpoint value.
pub fn temporal_interp_down(left: f64, right: f64) -> f64 {
    let _ = left;
    right
}

/// Linear combination of slab values `sum c_j v_j` describing an endpoint
/// value of a temporal reconstruction.
pub type Combination = Vec<(usize, f64)>;

/// `i_{2k}^1` endpoint values on interval `m`: the line through
/// `(t_{m-1}, z_{m-1})` and `(t_m, z_m)`. On the first interval the line
/// of the second interval is extended backwards.
pub fn reconstruction_endpoints(tmesh: &TemporalMesh, m: usize) -> (Combination, Combination) {
    let right = vec![(m, 1.0)];
    if m > 0 {
        return (vec![(m - 1, 1.0)], right);
    }
    if tmesh.len() < 2 {
        return (vec![(0, 1.0)], right);
    }
    let r = tmesh.k(0) / tmesh.k(1);
    (vec![(0, 1.0 + r), (1, -r)], right)
}

/// Forward-shifted reconstruction used for the primal weights of the
/// adjoint estimator: on `I_m` the line from `u_m` at `t_{m-1}` to
/// `u_{m+1}` at `t_m`. On the last interval the line through
/// `(u_{M-1}, u_M)` is extended forward.
pub fn shifted_reconstruction_endpoints(tmesh: &TemporalMesh, m: usize) -> (Combination, Combination) {
    let last = tmesh.len() - 1;
    let left = vec![(m, 1.0)];
    if m < last {
        return (left, vec![(m + 1, 1.0)]);
    }
    if tmesh.len() < 2 {
        return (left.clone(), left);
    }
    let r = tmesh.k(last) / tmesh.k(last - 1);
    (left, vec![(last, 1.0 + r), (last - 1, -r)])
}

/// Scalar `i_{2k}^1`: endpoint values `(left, right)` per interval.
pub fn temporal_reconstruct_up(tmesh: &TemporalMesh, values: &[f64]) -> Vec<(f64, f64)> {
    let eval = |c: &Combination| c.iter().map(|&(j, w)| w * values[j]).sum::<f64>();
    (0..tmesh.len())
        .map(|m| {
            let (l, r) = reconstruction_endpoints(tmesh, m);
            (eval(&l), eval(&r))
        })
        .collect()
}

/// Value of the linear reconstruction at time `t` inside interval `m`.
pub fn eval_linear(tmesh: &TemporalMesh, m: usize, ends: (f64, f64), t: f64) -> f64 {
    let (a, b) = tmesh.interval(m);
    let s = (t - a) / (b - a);
    (1.0 - s) * ends.0 + s * ends.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CoarseGrid, SpatialMesh};

    fn spaces(mesh: SpatialMesh) -> (DofMap, DofMap) {
        let m = Arc::new(mesh);
        (DofMap::new(m.clone(), 1, 1).unwrap(), DofMap::new(m, 2, 1).unwrap())
    }

    #[test]
    fn interp_down_samples_vertices() {
        let (q1, q2) = spaces(SpatialMesh::new(CoarseGrid::unit_square(2)));
        let u2 = q2.interpolate(|_, x| x[0] * x[0]);
        let u1 = spatial_interp_down(&q2, &u2, &q1).unwrap();
        for n in 0..q1.n_nodes() {
            let p = q1.node_position(n);
            assert_eq!(u1[n], p[0] * p[0]);
        }
    }

    #[test]
    fn reconstruction_exact_for_biquadratics() {
        let (q1, q2) = spaces(SpatialMesh::patched(CoarseGrid::unit_square(2)));
        let f = |x: [f64; 2]| 1.0 + x[0] - 2.0 * x[1] + 3.0 * x[0] * x[0] * x[1] * x[1] - x[0] * x[1];
        let u1 = q1.interpolate(|_, x| f(x));
        let u2 = spatial_reconstruct_up(&q1, &u1, &q2).unwrap();
        for n in 0..q2.n_nodes() {
            assert!((u2[n] - f(q2.node_position(n))).abs() < 1e-13);
        }
    }

    #[test]
    fn reconstruction_requires_patches() {
        let (q1, q2) = spaces(SpatialMesh::new(CoarseGrid::unit_square(2)));
        let u = vec![0.0; q1.n_dofs()];
        assert_eq!(spatial_reconstruct_up(&q1, &u, &q2), Err(FeError::NotPatchStructured));
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_interp_down(1.0, 3.0), 3.0);
        let t = TemporalMesh::uniform(1.0, 2);
        let ends = temporal_reconstruct_up(&t, &[1.0, 3.0]);
        assert_eq!(eval_linear(&t, 1, ends[1], 0.75), 2.0);
        assert_eq!(ends[0], (-1.0, 1.0));
        let c = temporal_reconstruct_up(&t, &[4.0, 4.0]);
        assert_eq!(c, vec![(4.0, 4.0), (4.0, 4.0)]);
    }
}
