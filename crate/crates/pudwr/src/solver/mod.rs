//! dG(0) time stepping for the primal problem and backward adjoint solves.
//!
//! On slab `m` the primal equation is
//! `(u_m - u_{m-1}, phi) + k_m abar(u_m)(phi) = int_{I_m} (f, phi) dt`
//! for all discrete `phi`, where `u_{m-1}` lives on the previous slab's mesh
//! and the pairing is integrated on the common refinement. The adjoint is the
//! exact transpose of the assembled space-time system.

pub mod assembly;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{FeError, SolverError};
use crate::fespace::overlay::side_point;
use crate::fespace::shape::n_local;
use crate::fespace::{gauss_legendre, ConstraintSet, DofMap, TimeRule};
use crate::goals::GoalDerivative;
use crate::linalg::{condense_matrix, minimum_degree, norm2, CsrMatrix, SparseLu};
use crate::mesh::{SlabMeshes, SpatialMesh, TemporalMesh};
use crate::problems::ParabolicProblem;
use assembly::{
    assemble_cross_mass, assemble_load, assemble_mass_and_operator, assemble_reaction, face_tags, ShapeTable,
    NO_FACE,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Absolute tolerance on the Euclidean norm of the condensed residual.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// The Jacobian is kept while the residual reduction factor stays below this.
    pub rho_skip: f64,
    /// Smallest damping factor tried by the line search.
    pub alpha_min: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { abs_tol: 1e-10, max_iter: 30, rho_skip: 0.1, alpha_min: 1.0 / 1024.0 }
    }
}

/// Quadrature and Newton settings shared by primal and adjoint solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub newton: NewtonConfig,
    /// Temporal rule for `int_{I_m} (f, phi) dt`.
    pub load_rule: TimeRule,
    /// Spatial Gauss points per direction for the load.
    pub load_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { newton: NewtonConfig::default(), load_rule: TimeRule::RightBox, load_points: 4 }
    }
}

/// Convergence history of one slab's Newton loop.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonStats {
    /// Residual norms, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// Accepted damping factor per iteration.
    pub alphas: Vec<f64>,
    pub reassemblies: usize,
}

impl NewtonStats {
    pub fn iterations(&self) -> usize {
        self.alphas.len()
    }
}

/// dG(0) primal solution: one coefficient vector per slab.
#[derive(Clone, Debug)]
pub struct SpaceTimeSolution {
    pub order: usize,
    pub spaces: Vec<Arc<DofMap>>,
    pub constraints: Vec<ConstraintSet>,
    /// Nodal interpolant of the initial value on the first slab's space.
    pub initial: Vec<f64>,
    pub slabs: Vec<Vec<f64>>,
    pub newton: Vec<NewtonStats>,
}

impl SpaceTimeSolution {
    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    /// Space-time dofs `sum_m dim V_m`.
    pub fn total_dofs(&self) -> usize {
        self.spaces.iter().map(|s| s.n_dofs()).sum()
    }

    /// Value of slab `m-1` seen from slab `m` (the initial value for `m = 0`).
    pub fn previous(&self, m: usize) -> (&Arc<DofMap>, &[f64]) {
        if m == 0 {
            (&self.spaces[0], &self.initial)
        } else {
            (&self.spaces[m - 1], &self.slabs[m - 1])
        }
    }
}

/// Backward-in-time adjoint: one vector per slab, zero terminal datum.
#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub order: usize,
    pub spaces: Vec<Arc<DofMap>>,
    pub slabs: Vec<Vec<f64>>,
}

/// One space per slab; slabs sharing a mesh share the space.
pub fn build_spaces(meshes: &[Arc<SpatialMesh>], order: usize, ncomp: usize) -> Result<Vec<Arc<DofMap>>, FeError> {
    let mut seen: HashMap<*const SpatialMesh, Arc<DofMap>> = HashMap::new();
    meshes
        .iter()
        .map(|m| {
            if let Some(d) = seen.get(&Arc::as_ptr(m)) {
                return Ok(d.clone());
            }
            let d = Arc::new(DofMap::new(m.clone(), order, ncomp)?);
            seen.insert(Arc::as_ptr(m), d.clone());
            Ok(d)
        })
        .collect()
}

/// Re-use the spaces of `like` when the order matches.
pub fn spaces_like(sol_spaces: &[Arc<DofMap>], order: usize) -> Result<Vec<Arc<DofMap>>, FeError> {
    if sol_spaces.first().map(|s| s.order()) == Some(order) {
        return Ok(sol_spaces.to_vec());
    }
    let meshes: Vec<Arc<SpatialMesh>> = sol_spaces.iter().map(|s| s.mesh().clone()).collect();
    build_spaces(&meshes, order, sol_spaces[0].ncomp())
}

/// Nodal interpolation of a finite element function onto another space.
pub fn transfer(from: &DofMap, u: &[f64], to: &DofMap) -> Vec<f64> {
    if std::ptr::eq(from, to) {
        return u.to_vec();
    }
    let nc = to.ncomp();
    let mut out = vec![0.0; to.n_dofs()];
    let mut v = [0.0; 2];
    for n in 0..to.n_nodes() {
        from.eval_at(u, to.node_position(n), &mut v).expect("node inside domain");
        out[n * nc..(n + 1) * nc].copy_from_slice(&v[..nc]);
    }
    to.apply_hanging(&mut out);
    out
}

/// Per-space slab operators, cached by space identity.
pub struct SlabOperators {
    pub mass: CsrMatrix,
    /// Diffusion plus Robin terms.
    pub oper: CsrMatrix,
    ordering: OnceLock<Vec<usize>>,
}

impl SlabOperators {
    fn ordering(&self, a: &CsrMatrix, block: usize) -> &[usize] {
        self.ordering.get_or_init(|| minimum_degree(a, block))
    }
}

#[derive(Default)]
pub struct OperatorCache {
    map: HashMap<*const DofMap, (Arc<DofMap>, Arc<SlabOperators>)>,
}

impl OperatorCache {
    pub fn get(&mut self, problem: &ParabolicProblem, dm: &Arc<DofMap>) -> Arc<SlabOperators> {
        self.map
            .entry(Arc::as_ptr(dm))
            .or_insert_with(|| {
                let (mass, oper) = assemble_mass_and_operator(problem, dm);
                (dm.clone(), Arc::new(SlabOperators { mass, oper, ordering: OnceLock::new() }))
            })
            .1
            .clone()
    }
}

/// Dirichlet and hanging constraints of slab `m` (data taken at `t`).
pub fn slab_constraints(problem: &ParabolicProblem, dm: &DofMap, t: f64) -> ConstraintSet {
    let dv = problem.dirichlet_value.clone();
    dm.constraints(|c, tag| (problem.dirichlet)(c, tag), move |c, x| dv(c, t, x))
}

pub fn homogeneous_constraints(problem: &ParabolicProblem, dm: &DofMap) -> ConstraintSet {
    dm.constraints(|c, tag| (problem.dirichlet)(c, tag), |_, _| 0.0)
}

/// Everything needed to evaluate the slab residual
/// `r(u) = M u - B u_prev + k (L u + R(u)) - F`.
struct PrimalSlab<'a> {
    problem: &'a ParabolicProblem,
    dm: &'a Arc<DofMap>,
    ops: &'a SlabOperators,
    bprev: Vec<f64>,
    load: Vec<f64>,
    k: f64,
}

impl PrimalSlab<'_> {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mu = self.ops.mass.matvec(u);
        let lu = self.ops.oper.matvec(u);
        let (rr, _) = assemble_reaction(self.problem, self.dm, (self.dm, u), None)?;
        Ok((0..u.len()).map(|i| mu[i] - self.bprev[i] + self.k * (lu[i] + rr[i]) - self.load[i]).collect())
    }

    fn jacobian(&self, u: &[f64]) -> Result<CsrMatrix, SolverError> {
        let mut j = self.ops.mass.clone();
        j.set_combination(&self.ops.mass, self.k, &self.ops.oper);
        if !self.problem.is_linear() {
            let (_, kr) = assemble_reaction(self.problem, self.dm, (self.dm, u), Some(&self.ops.mass))?;
            let kr = kr.unwrap();
            let base = j.clone();
            j.set_combination(&base, self.k, &kr);
        }
        Ok(j)
    }
}

fn condensed_norm(cs: &ConstraintSet, r: &[f64]) -> f64 {
    let mut rc = r.to_vec();
    cs.condense_vector(&mut rc);
    norm2(&rc)
}

fn factor(ops: &SlabOperators, j: &CsrMatrix, cs: &ConstraintSet, block: usize) -> Result<SparseLu, SolverError> {
    let a = condense_matrix(j, cs);
    let q = ops.ordering(&a, block).to_vec();
    Ok(SparseLu::factor_with_order(&a, q)?)
}

/// Cache key for a linear slab factorization: space identity and step size.
type FactorKey = (*const DofMap, u64);

fn build_primal_slab<'a>(
    problem: &'a ParabolicProblem,
    sol_spaces: &'a [Arc<DofMap>],
    prev: (&Arc<DofMap>, &[f64]),
    tmesh: &TemporalMesh,
    m: usize,
    ops: &'a SlabOperators,
    opts: &SolverOptions,
) -> PrimalSlab<'a> {
    let dm = &sol_spaces[m];
    let (t0, t1) = tmesh.interval(m);
    let (pdm, pu) = prev;
    let bprev =
        if Arc::ptr_eq(dm, pdm) { ops.mass.matvec(pu) } else { assemble_cross_mass(dm, pdm).matvec(pu) };
    let load = assemble_load(problem, dm, t0, t1, opts.load_rule, opts.load_points);
    PrimalSlab { problem, dm, ops, bprev, load, k: t1 - t0 }
}

/// Forward dG(0) time stepping with damped Newton on every slab.
pub fn solve_primal(
    problem: &ParabolicProblem,
    slabs: &SlabMeshes,
    tmesh: &TemporalMesh,
    order: usize,
    opts: &SolverOptions,
) -> Result<SpaceTimeSolution, SolverError> {
    assert_eq!(slabs.len(), tmesh.len(), "one mesh per interval");
    let spaces = build_spaces(&slabs.meshes, order, problem.ncomp)?;
    let initial = spaces[0].interpolate(|c, x| (problem.initial)(c, x));
    let mut cache = OperatorCache::default();
    let mut lin_factor: Option<(FactorKey, SparseLu)> = None;
    let mut out = SpaceTimeSolution {
        order,
        spaces: spaces.clone(),
        constraints: Vec::with_capacity(tmesh.len()),
        initial: initial.clone(),
        slabs: Vec::with_capacity(tmesh.len()),
        newton: Vec::with_capacity(tmesh.len()),
    };
    for m in 0..tmesh.len() {
        let dm = &spaces[m];
        let ops = cache.get(problem, dm);
        let (pdm, pu) = if m == 0 { (&spaces[0], initial.as_slice()) } else { (&spaces[m - 1], out.slabs[m - 1].as_slice()) };
        let slab = build_primal_slab(problem, &spaces, (pdm, pu), tmesh, m, &ops, opts);
        let cs = slab_constraints(problem, dm, tmesh.interval(m).1);
        let mut u = transfer(pdm, pu, dm);
        cs.distribute(&mut u);
        let stats = newton_slab(&slab, &cs, &mut u, &opts.newton, m, &mut lin_factor)?;
        out.slabs.push(u);
        out.constraints.push(cs);
        out.newton.push(stats);
    }
    Ok(out)
}

fn newton_slab(
    slab: &PrimalSlab,
    cs: &ConstraintSet,
    u: &mut Vec<f64>,
    cfg: &NewtonConfig,
    m: usize,
    lin_factor: &mut Option<(FactorKey, SparseLu)>,
) -> Result<NewtonStats, SolverError> {
    let linear = slab.problem.is_linear();
    let block = slab.dm.ncomp();
    let mut stats = NewtonStats::default();
    let mut r = slab.residual(u)?;
    let mut rn = condensed_norm(cs, &r);
    stats.residuals.push(rn);
    let mut lu: Option<SparseLu> = None;
    let mut fresh = false;
    for _ in 0..cfg.max_iter {
        if rn <= cfg.abs_tol {
            return Ok(stats);
        }
        if linear {
            let key = (Arc::as_ptr(slab.dm), slab.k.to_bits());
            if lin_factor.as_ref().map(|f| f.0) != Some(key) {
                let j = slab.jacobian(u)?;
                *lin_factor = Some((key, factor(slab.ops, &j, cs, block)?));
                stats.reassemblies += 1;
            }
        } else if lu.is_none() {
            lu = Some(factor(slab.ops, &slab.jacobian(u)?, cs, block)?);
            stats.reassemblies += 1;
            fresh = true;
        }
        let f = if linear { &lin_factor.as_ref().unwrap().1 } else { lu.as_ref().unwrap() };
        let mut rc = r.clone();
        cs.condense_vector(&mut rc);
        rc.iter_mut().for_each(|v| *v = -*v);
        let mut du = f.solve(&rc);
        cs.distribute_homogeneous(&mut du);
        if linear {
            for (a, b) in u.iter_mut().zip(&du) {
                *a += b;
            }
            r = slab.residual(u)?;
            rn = condensed_norm(cs, &r);
            stats.residuals.push(rn);
            stats.alphas.push(1.0);
            continue;
        }
        // damped update
        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + alpha * b).collect();
            if let Ok(rt) = slab.residual(&trial) {
                let tn = condensed_norm(cs, &rt);
                if tn < (1.0 - 1e-4 * alpha) * rn {
                    break Some((trial, rt, tn));
                }
            }
            alpha *= 0.5;
            if alpha < cfg.alpha_min {
                break None;
            }
        };
        match accepted {
            Some((trial, rt, tn)) => {
                let ratio = tn / rn;
                *u = trial;
                r = rt;
                rn = tn;
                stats.residuals.push(rn);
                stats.alphas.push(alpha);
                fresh = false;
                if ratio >= cfg.rho_skip {
                    lu = None;
                }
            }
            None if !fresh => lu = None,
            None => return Err(SolverError::NewtonDiverged { slab: m, residual: rn }),
        }
    }
    if rn <= cfg.abs_tol {
        Ok(stats)
    } else {
        Err(SolverError::NewtonDiverged { slab: m, residual: rn })
    }
}

/// Condensed primal residual `C^T r(u_m)` of a computed solution.
pub fn primal_residual(
    problem: &ParabolicProblem,
    sol: &SpaceTimeSolution,
    tmesh: &TemporalMesh,
    m: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>, SolverError> {
    let mut cache = OperatorCache::default();
    let ops = cache.get(problem, &sol.spaces[m]);
    let slab = build_primal_slab(problem, &sol.spaces, sol.previous(m), tmesh, m, &ops, opts);
    let mut r = slab.residual(&sol.slabs[m])?;
    sol.constraints[m].condense_vector(&mut r);
    Ok(r)
}

/// `int_{I_m} J'(u)(phi_i) dt` on `test`, linearized at `state` (same mesh).
pub fn goal_rhs(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    test: &DofMap,
    state: (&DofMap, &[f64]),
    t0: f64,
    t1: f64,
) -> Result<Vec<f64>, SolverError> {
    let nc = test.ncomp();
    let mut b = vec![0.0; test.n_dofs()];
    let mesh = test.mesh();
    let s = test.order();
    let nl = n_local(s);
    let k = t1 - t0;
    let (sdm, su) = state;
    let mut uv = [0.0; 2];
    let mut ug = [[0.0; 2]; 2];
    if goal.has_volume() {
        let t = ShapeTable::new(s, goal.n_space().max(s + 1));
        let tp: Vec<(f64, f64)> = if goal.time_dependent() {
            goal.time_rule().points().into_iter().map(|(tau, w)| (t0 + tau * k, w * k)).collect()
        } else {
            vec![(0.5 * (t0 + t1), k)]
        };
        for cell in 0..mesh.n_active() {
            let area = mesh.cell_area(cell);
            let nodes = test.cell_nodes(cell);
            for q in 0..t.rule.len() {
                let r = t.rule.points[q];
                sdm.eval(su, cell, r, &mut uv, &mut ug);
                let x = mesh.map_to_physical(cell, r);
                let mut d = [0.0; 2];
                for &(tt, wt) in &tp {
                    let dd = goal.volume_density(problem, tt, x, &uv)?;
                    d[0] += wt * dd[0];
                    d[1] += wt * dd[1];
                }
                let w = t.rule.weights[q] * area;
                for i in 0..nl {
                    for c in 0..nc {
                        b[nodes[i] as usize * nc + c] += w * d[c] * t.vals[q][i];
                    }
                }
            }
        }
    }
    if goal.has_boundary() {
        let tags = face_tags(mesh);
        let (gx, gw) = gauss_legendre(goal.n_space());
        let mut v = [0.0; 9];
        let mut g = [[0.0; 2]; 9];
        for cell in 0..mesh.n_active() {
            for side in 0..4 {
                if tags[cell][side] == NO_FACE {
                    continue;
                }
                let d = goal.boundary_density(tags[cell][side]);
                if d == [0.0; 2] {
                    continue;
                }
                let (_, size) = mesh.cell_bounds(cell);
                let len = if side < 2 { size[1] } else { size[0] };
                let nodes = test.cell_nodes(cell);
                for (x, w) in gx.iter().zip(&gw) {
                    shape_all_into(s, side_point(side, *x), &mut v, &mut g);
                    for i in 0..nl {
                        for c in 0..nc {
                            b[nodes[i] as usize * nc + c] += k * w * len * d[c] * v[i];
                        }
                    }
                }
            }
        }
    }
    Ok(b)
}

#[inline]
fn shape_all_into(s: usize, r: [f64; 2], v: &mut [f64; 9], g: &mut [[f64; 2]; 9]) {
    crate::fespace::shape_all(s, r, v, g);
}

/// Slab system of the adjoint: matrix `(M + k abar'(u_m))^T` and right-hand
/// side `j_m + B_{m+1}^T z_{m+1}`.
fn adjoint_slab(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    state: &SpaceTimeSolution,
    spaces: &[Arc<DofMap>],
    ops: &SlabOperators,
    tmesh: &TemporalMesh,
    m: usize,
    next: Option<&[f64]>,
) -> Result<(Option<CsrMatrix>, Vec<f64>), SolverError> {
    let dm = &spaces[m];
    let (t0, t1) = tmesh.interval(m);
    let k = t1 - t0;
    let st = (state.spaces[m].as_ref(), state.slabs[m].as_slice());
    let mut rhs = goal_rhs(problem, goal, dm, st, t0, t1)?;
    if let Some(zn) = next {
        let ndm = &spaces[m + 1];
        let add = if Arc::ptr_eq(ndm, dm) {
            ops.mass.matvec(zn)
        } else {
            assemble_cross_mass(ndm, dm).matvec_transpose(zn)
        };
        for (a, b) in rhs.iter_mut().zip(&add) {
            *a += b;
        }
    }
    let jac = if problem.is_linear() {
        None
    } else {
        let (_, kr) = assemble_reaction(problem, dm, st, Some(&ops.mass))?;
        let mut j = ops.mass.clone();
        j.set_combination(&ops.mass, k, &ops.oper);
        let base = j.clone();
        j.set_combination(&base, k, &kr.unwrap());
        Some(j.transpose())
    };
    Ok((jac, rhs))
}

/// Backward adjoint solve in the space of order `order`, linearized at `state`.
pub fn solve_adjoint(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    state: &SpaceTimeSolution,
    tmesh: &TemporalMesh,
    order: usize,
) -> Result<AdjointSolution, SolverError> {
    let spaces = spaces_like(&state.spaces, order)?;
    let mut cache = OperatorCache::default();
    let mut slabs: Vec<Vec<f64>> = vec![Vec::new(); tmesh.len()];
    let mut lin_factor: Option<(FactorKey, SparseLu)> = None;
    for m in (0..tmesh.len()).rev() {
        let dm = &spaces[m];
        let ops = cache.get(problem, dm);
        let k = tmesh.k(m);
        let next = (m + 1 < tmesh.len()).then(|| slabs[m + 1].as_slice());
        let (jac, mut rhs) = adjoint_slab(problem, goal, state, &spaces, &ops, tmesh, m, next)?;
        let cs = homogeneous_constraints(problem, dm);
        cs.condense_vector(&mut rhs);
        let mut z = match jac {
            None => {
                let key = (Arc::as_ptr(dm), k.to_bits());
                if lin_factor.as_ref().map(|f| f.0) != Some(key) {
                    let mut a = ops.mass.clone();
                    a.set_combination(&ops.mass, k, &ops.oper);
                    lin_factor = Some((key, factor(&ops, &a.transpose(), &cs, dm.ncomp())?));
                }
                lin_factor.as_ref().unwrap().1.solve(&rhs)
            }
            Some(a) => factor(&ops, &a, &cs, dm.ncomp())?.solve(&rhs),
        };
        cs.distribute_homogeneous(&mut z);
        slabs[m] = z;
    }
    Ok(AdjointSolution { order, spaces, slabs })
}

/// Condensed adjoint residual `C^T (A_m^T z_m - B_{m+1}^T z_{m+1} - j_m)`.
pub fn adjoint_residual(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    state: &SpaceTimeSolution,
    adj: &AdjointSolution,
    tmesh: &TemporalMesh,
    m: usize,
) -> Result<Vec<f64>, SolverError> {
    let mut cache = OperatorCache::default();
    let dm = &adj.spaces[m];
    let ops = cache.get(problem, dm);
    let k = tmesh.k(m);
    let next = (m + 1 < tmesh.len()).then(|| adj.slabs[m + 1].as_slice());
    let (jac, rhs) = adjoint_slab(problem, goal, state, &adj.spaces, &ops, tmesh, m, next)?;
    let a = jac.unwrap_or_else(|| {
        let mut a = ops.mass.clone();
        a.set_combination(&ops.mass, k, &ops.oper);
        a.transpose()
    });
    let az = a.matvec(&adj.slabs[m]);
    let mut r: Vec<f64> = az.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    homogeneous_constraints(problem, dm).condense_vector(&mut r);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CoarseGrid;
    use crate::problems::config1;

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut p = config1(2);
        p.source = None;
        let tm = TemporalMesh::uniform(1.0, 3);
        let slabs = SlabMeshes::uniform(SpatialMesh::patched(p.grid.clone()), 3);
        let sol = solve_primal(&p, &slabs, &tm, 1, &SolverOptions::default()).unwrap();
        assert!(sol.slabs.iter().all(|u| u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_cell_implicit_euler_matches_hand_assembly() {
        // unit cell, no Dirichlet, f = 1, k = 0.1, u0 = 0: (M + kA) u = k M 1.
        // The constant vector solves it exactly since A 1 = 0: u = k.
        let mut p = config1(1);
        p.dirichlet = |_, _| false;
        p.source = Some(Arc::new(|_, _| 1.0));
        let tm = TemporalMesh::uniform(0.1, 1);
        let slabs = SlabMeshes::uniform(SpatialMesh::new(CoarseGrid::unit_square(1)), 1);
        let opts = SolverOptions { load_rule: TimeRule::RightBox, ..Default::default() };
        let sol = solve_primal(&p, &slabs, &tm, 1, &opts).unwrap();
        for v in &sol.slabs[0] {
            assert!((v - 0.1).abs() < 1e-14);
        }
    }
}
