//! Element loops producing slab matrices and vectors.

use crate::error::ProblemError;
use crate::fespace::overlay::{overlay, side_point, SubCell};
use crate::fespace::shape::n_local;
use crate::fespace::{gauss_legendre, shape_all, DofMap, QuadRule, TimeRule};
use crate::linalg::CsrMatrix;
use crate::mesh::SpatialMesh;
use crate::problems::ParabolicProblem;

/// Gauss points used for nonlinear and higher-order integrands.
pub const N_QUAD: usize = 3;

pub const NO_FACE: u8 = u8::MAX;

/// Shape values and reference gradients tabulated at the points of a rule.
#[derive(Clone, Debug)]
pub struct ShapeTable {
    pub order: usize,
    pub rule: QuadRule,
    pub vals: Vec<[f64; 9]>,
    pub grads: Vec<[[f64; 2]; 9]>,
}

impl ShapeTable {
    pub fn new(order: usize, n: usize) -> Self {
        let rule = QuadRule::gauss(n);
        let mut vals = Vec::with_capacity(rule.len());
        let mut grads = Vec::with_capacity(rule.len());
        for p in &rule.points {
            let mut v = [0.0; 9];
            let mut g = [[0.0; 2]; 9];
            shape_all(order, *p, &mut v, &mut g);
            vals.push(v);
            grads.push(g);
        }
        ShapeTable { order, rule, vals, grads }
    }
}

/// Boundary tag per cell side, [`NO_FACE`] for interior sides.
pub fn face_tags(mesh: &SpatialMesh) -> Vec<[u8; 4]> {
    let mut t = vec![[NO_FACE; 4]; mesh.n_active()];
    for f in mesh.boundary_faces() {
        t[f.cell][f.side] = f.tag;
    }
    t
}

/// Global dofs of a cell, node-major: `local_node * ncomp + c`.
pub fn cell_dofs(dm: &DofMap, cell: usize, out: &mut Vec<usize>) {
    out.clear();
    let nc = dm.ncomp();
    for &n in dm.cell_nodes(cell) {
        for c in 0..nc {
            out.push(n as usize * nc + c);
        }
    }
}

/// Zero matrix with the full element coupling pattern (all components).
pub fn dof_pattern(dm: &DofMap) -> CsrMatrix {
    let mut blocks = Vec::with_capacity(dm.mesh().n_active());
    let mut buf = Vec::new();
    for cell in 0..dm.mesh().n_active() {
        cell_dofs(dm, cell, &mut buf);
        blocks.push(buf.clone());
    }
    CsrMatrix::from_blocks(dm.n_dofs(), blocks.iter().map(|b| b.as_slice()))
}

/// Physical gradients of all local shape functions at tabulated point `q`.
#[inline]
fn phys_grads(t: &ShapeTable, q: usize, size: [f64; 2], out: &mut [[f64; 2]; 9]) {
    for k in 0..n_local(t.order) {
        out[k] = [t.grads[q][k][0] / size[0], t.grads[q][k][1] / size[1]];
    }
}

/// Mass matrix (block diagonal in the components) and the linear part of
/// `abar`: diffusion plus Robin terms.
pub fn assemble_mass_and_operator(problem: &ParabolicProblem, dm: &DofMap) -> (CsrMatrix, CsrMatrix) {
    let mesh = dm.mesh();
    let s = dm.order();
    let nl = n_local(s);
    let nc = dm.ncomp();
    let t = ShapeTable::new(s, s + 1);
    let mut mass = dof_pattern(dm);
    let mut oper = mass.clone();
    let tags = face_tags(mesh);
    let (gx, gw) = gauss_legendre(s + 1);
    let mut g = [[0.0; 2]; 9];
    for cell in 0..mesh.n_active() {
        let (_, size) = mesh.cell_bounds(cell);
        let area = size[0] * size[1];
        let nodes = dm.cell_nodes(cell);
        let mut lm = [[0.0; 9]; 9];
        let mut ls = [[0.0; 9]; 9];
        for q in 0..t.rule.len() {
            let w = t.rule.weights[q] * area;
            phys_grads(&t, q, size, &mut g);
            for i in 0..nl {
                for j in 0..nl {
                    lm[i][j] += w * t.vals[q][i] * t.vals[q][j];
                    ls[i][j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                for c in 0..nc {
                    let (a, b) = (nodes[i] as usize * nc + c, nodes[j] as usize * nc + c);
                    mass.add(a, b, lm[i][j]);
                    oper.add(a, b, problem.diffusion[c] * ls[i][j]);
                }
            }
        }
        for side in 0..4 {
            let tag = tags[cell][side];
            if tag == NO_FACE {
                continue;
            }
            let len = if side < 2 { size[1] } else { size[0] };
            for c in 0..nc {
                let kappa = problem.robin_coeff(tag, c);
                if kappa == 0.0 {
                    continue;
                }
                let mut v = [0.0; 9];
                let mut gr = [[0.0; 2]; 9];
                for (x, w) in gx.iter().zip(&gw) {
                    shape_all(s, side_point(side, *x), &mut v, &mut gr);
                    for i in 0..nl {
                        for j in 0..nl {
                            let val = kappa * w * len * v[i] * v[j];
                            if val != 0.0 {
                                oper.add(nodes[i] as usize * nc + c, nodes[j] as usize * nc + c, val);
                            }
                        }
                    }
                }
            }
        }
    }
    (mass, oper)
}

/// `B_{ij} = (phi_i^cur, phi_j^prev)` integrated exactly on the common
/// refinement of both meshes.
pub fn assemble_cross_mass(cur: &DofMap, prev: &DofMap) -> CsrMatrix {
    let (sc, sp) = (cur.order(), prev.order());
    let nc = cur.ncomp();
    let rule = QuadRule::gauss(sc.max(sp) + 1);
    let meshes = [cur.mesh().as_ref(), prev.mesh().as_ref()];
    let mut subs: Vec<SubCell> = Vec::new();
    let mut trip = Vec::new();
    let (mut vc, mut vp) = ([0.0; 9], [0.0; 9]);
    let mut gdummy = [[0.0; 2]; 9];
    for cell in 0..cur.mesh().n_active() {
        overlay(&meshes, cell, &mut subs);
        let cn = cur.cell_nodes(cell);
        let mut local: Vec<(usize, usize, f64)> = Vec::new();
        for sub in &subs {
            let area = sub.size[0] * sub.size[1];
            let pcell = sub.maps[1].cell;
            let pn = prev.cell_nodes(pcell);
            let mut lm = [[0.0; 9]; 9];
            for q in 0..rule.len() {
                let r = rule.points[q];
                shape_all(sc, sub.maps[0].map(r), &mut vc, &mut gdummy);
                shape_all(sp, sub.maps[1].map(r), &mut vp, &mut gdummy);
                let w = rule.weights[q] * area;
                for i in 0..n_local(sc) {
                    for j in 0..n_local(sp) {
                        lm[i][j] += w * vc[i] * vp[j];
                    }
                }
            }
            for i in 0..n_local(sc) {
                for j in 0..n_local(sp) {
                    local.push((cn[i] as usize, pn[j] as usize, lm[i][j]));
                }
            }
        }
        for (i, j, v) in local {
            for c in 0..nc {
                trip.push(((i * nc + c) as u32, (j * nc + c) as u32, v));
            }
        }
    }
    CsrMatrix::from_triplets(cur.n_dofs(), prev.n_dofs(), trip)
}

/// `int_{t0}^{t1} (f(t), phi_i) dt` for component 0.
pub fn assemble_load(problem: &ParabolicProblem, dm: &DofMap, t0: f64, t1: f64, rule: TimeRule, n_space: usize) -> Vec<f64> {
    let mut b = vec![0.0; dm.n_dofs()];
    let Some(f) = problem.source.as_ref() else { return b };
    let mesh = dm.mesh();
    let s = dm.order();
    let nl = n_local(s);
    let nc = dm.ncomp();
    let t = ShapeTable::new(s, n_space);
    let tp: Vec<(f64, f64)> = rule.points().into_iter().map(|(tau, w)| (t0 + tau * (t1 - t0), w * (t1 - t0))).collect();
    for cell in 0..mesh.n_active() {
        let (_, size) = mesh.cell_bounds(cell);
        let area = size[0] * size[1];
        let nodes = dm.cell_nodes(cell);
        for q in 0..t.rule.len() {
            let x = mesh.map_to_physical(cell, t.rule.points[q]);
            let fv: f64 = tp.iter().map(|&(tt, w)| w * f(tt, x)).sum();
            let w = t.rule.weights[q] * area * fv;
            for i in 0..nl {
                b[nodes[i] as usize * nc] += w * t.vals[q][i];
            }
        }
    }
    b
}

/// Reaction vector `int R_c(u) phi_i^c` and, optionally, its Jacobian
/// `int dR_c/du_d(u) psi_j^d phi_i^c` on `test`'s pattern. The state lives on
/// `state` (same mesh, any order).
pub fn assemble_reaction(
    problem: &ParabolicProblem,
    test: &DofMap,
    state: (&DofMap, &[f64]),
    pattern: Option<&CsrMatrix>,
) -> Result<(Vec<f64>, Option<CsrMatrix>), ProblemError> {
    let nc = test.ncomp();
    let mut r = vec![0.0; test.n_dofs()];
    if problem.is_linear() {
        return Ok((r, pattern.map(|p| p.clone())));
    }
    let mesh = test.mesh();
    let s = test.order();
    let nl = n_local(s);
    let t = ShapeTable::new(s, N_QUAD);
    let mut jac = pattern.cloned();
    if let Some(j) = jac.as_mut() {
        j.clear_values();
    }
    let (sdm, su) = state;
    let mut uv = [0.0; 2];
    let mut ug = [[0.0; 2]; 2];
    for cell in 0..mesh.n_active() {
        let (_, size) = mesh.cell_bounds(cell);
        let area = size[0] * size[1];
        let nodes = test.cell_nodes(cell);
        let mut lj = [[[[0.0; 2]; 2]; 9]; 9];
        for q in 0..t.rule.len() {
            sdm.eval(su, cell, t.rule.points[q], &mut uv, &mut ug);
            let (rv, dr) = problem.reaction_terms(&uv)?;
            let w = t.rule.weights[q] * area;
            for i in 0..nl {
                let phi = t.vals[q][i];
                for c in 0..nc {
                    r[nodes[i] as usize * nc + c] += w * rv[c] * phi;
                }
                if jac.is_some() {
                    for j in 0..nl {
                        let pp = w * phi * t.vals[q][j];
                        for c in 0..nc {
                            for d in 0..nc {
                                lj[i][j][c][d] += dr[c][d] * pp;
                            }
                        }
                    }
                }
            }
        }
        if let Some(jm) = jac.as_mut() {
            for i in 0..nl {
                for j in 0..nl {
                    for c in 0..nc {
                        for d in 0..nc {
                            jm.add(nodes[i] as usize * nc + c, nodes[j] as usize * nc + d, lj[i][j][c][d]);
                        }
                    }
                }
            }
        }
    }
    Ok((r, jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CoarseGrid;
    use crate::problems::config1;
    use std::sync::Arc;

    #[test]
    fn unit_cell_q1_mass_and_stiffness() {
        let mesh = Arc::new(SpatialMesh::new(CoarseGrid::unit_square(1)));
        let dm = DofMap::new(mesh, 1, 1).unwrap();
        let (m, a) = assemble_mass_and_operator(&config1(1), &dm);
        // node order (0,0), (1,0), (0,1), (1,1)
        assert!((m.get(0, 0) - 1.0 / 9.0).abs() < 1e-15);
        assert!((m.get(0, 1) - 1.0 / 18.0).abs() < 1e-15);
        assert!((m.get(0, 3) - 1.0 / 36.0).abs() < 1e-15);
        assert!((a.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) + 1.0 / 6.0).abs() < 1e-15);
        assert!((a.get(0, 3) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_mass_on_identical_meshes_is_mass() {
        let mesh = Arc::new(SpatialMesh::patched(CoarseGrid::unit_square(2)).refine(&[0]));
        let dm = DofMap::new(mesh, 2, 1).unwrap();
        let (m, _) = assemble_mass_and_operator(&config1(2), &dm);
        let b = assemble_cross_mass(&dm, &dm);
        for (r, c, v) in m.triplets() {
            assert!((b.get(r as usize, c as usize) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_mass_preserves_total_mass() {
        let coarse = Arc::new(SpatialMesh::patched(CoarseGrid::unit_square(2)));
        let fine = Arc::new(coarse.refine(&[0, 5]));
        let a = DofMap::new(coarse, 1, 1).unwrap();
        let b = DofMap::new(fine, 2, 1).unwrap();
        let bm = assemble_cross_mass(&a, &b);
        let ones = vec![1.0; b.n_dofs()];
        let total: f64 = bm.matvec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let bt = assemble_cross_mass(&b, &a);
        let x = a.interpolate(|_, p| p[0]);
        let lhs: f64 = bt.matvec(&x).iter().sum();
        assert!((lhs - 0.5).abs() < 1e-14);
    }
}
