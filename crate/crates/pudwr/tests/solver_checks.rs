use std::sync::Arc;

use pudwr::fespace::{DofMap, TimeRule};
use pudwr::goals::{Goal, GoalKind};
use pudwr::linalg::norm2;
use pudwr::mesh::{SlabMeshes, SpatialMesh, TemporalMesh};
use pudwr::problems::{config1, config2, config3, omega, omega_derivatives, CombustionParams};
use pudwr::solver::assembly::assemble_reaction;
use pudwr::solver::{adjoint_residual, primal_residual, solve_adjoint, solve_primal, SolverOptions};

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn galerkin_orthogonality_after_solve() {
    let p = config2(2);
    let mesh = SpatialMesh::patched(p.grid.clone());
    let (c, _) = mesh.locate_point([0.3, 0.7]).unwrap();
    let fine = mesh.refine(&[c]);
    let tm = TemporalMesh::uniform(p.t_end, 6);
    let mut slabs = SlabMeshes::uniform(mesh, 6);
    slabs.meshes[2] = Arc::new(fine.clone());
    slabs.meshes[3] = Arc::new(fine);
    let opts = SolverOptions::default();
    for order in [1, 2] {
        let sol = solve_primal(&p, &slabs, &tm, order, &opts).unwrap();
        for m in 0..tm.len() {
            let r = primal_residual(&p, &sol, &tm, m, &opts).unwrap();
            assert!(max_abs(&r) < 1e-10, "order {order} slab {m}: {:e}", max_abs(&r));
        }
    }
}

#[test]
fn adjoint_consistency_on_config1_coarse() {
    let p = config1(2);
    let mesh = SpatialMesh::patched(p.grid.clone());
    let tm = TemporalMesh::uniform(1.0, 10);
    let slabs = SlabMeshes::uniform(mesh.clone(), 10);
    let opts = SolverOptions { load_rule: TimeRule::Midpoint, ..Default::default() };
    let sol = solve_primal(&p, &slabs, &tm, 1, &opts).unwrap();
    for kind in [GoalKind::Average, GoalKind::L2Error] {
        let gd = Goal::new(kind, &p, &mesh).linearize(&p, &tm, &sol).unwrap();
        for order in [1, 2] {
            let adj = solve_adjoint(&p, &gd, &sol, &tm, order).unwrap();
            for m in 0..tm.len() {
                let r = adjoint_residual(&p, &gd, &sol, &adj, &tm, m).unwrap();
                assert!(max_abs(&r) < 1e-10, "{kind} order {order} slab {m}");
            }
        }
    }
}

#[test]
fn adjoint_of_linear_goal_is_primal_dual_pair() {
    // zero initial value: J(u_kh) = sum_m (b_m, z_m)
    let p = config1(2);
    let mesh = SpatialMesh::patched(p.grid.clone());
    let tm = TemporalMesh::uniform(1.0, 8);
    let slabs = SlabMeshes::uniform(mesh.clone(), 8);
    let opts = SolverOptions { load_rule: TimeRule::Midpoint, ..Default::default() };
    let sol = solve_primal(&p, &slabs, &tm, 1, &opts).unwrap();
    let goal = Goal::new(GoalKind::Average, &p, &mesh);
    let j = goal.value(&p, &tm, &sol).unwrap();
    let gd = goal.linearize(&p, &tm, &sol).unwrap();
    let adj = solve_adjoint(&p, &gd, &sol, &tm, 1).unwrap();
    let dm = &sol.spaces[0];
    let mut dual = 0.0;
    for m in 0..tm.len() {
        let (t0, t1) = tm.interval(m);
        let b = pudwr::solver::assembly::assemble_load(&p, dm, t0, t1, opts.load_rule, opts.load_points);
        dual += b.iter().zip(&adj.slabs[m]).map(|(a, z)| a * z).sum::<f64>();
    }
    assert!((j - dual).abs() < 1e-12 * j.abs().max(1e-3), "{j} vs {dual}");
}

#[test]
fn omega_partials_match_finite_differences() {
    let p = CombustionParams::default();
    for &(t, y) in &[(0.2, 0.9), (0.7, 0.4), (1.0, 0.05), (0.95, 0.6), (0.0, 1.0)] {
        let (wt, wy) = omega_derivatives(t, y, &p).unwrap();
        let h = 1e-6;
        let ft = (omega(t + h, y, &p).unwrap() - omega(t - h, y, &p).unwrap()) / (2.0 * h);
        let fy = (omega(t, y + h, &p).unwrap() - omega(t, y - h, &p).unwrap()) / (2.0 * h);
        assert!((wt - ft).abs() <= 1e-6 * wt.abs().max(1e-8), "theta partial at ({t},{y})");
        assert!((wy - fy).abs() <= 1e-6 * wy.abs().max(1e-8), "Y partial at ({t},{y})");
    }
}

#[test]
fn reaction_jacobian_matches_finite_differences_of_assembled_residual() {
    let p = config3(CombustionParams::default());
    let mesh = Arc::new(SpatialMesh::patched(p.grid.clone()));
    for order in [1, 2] {
        let dm = DofMap::new(mesh.clone(), order, 2).unwrap();
        let u: Vec<f64> = dm.interpolate(|c, x| {
            let s = 0.5 + 0.45 * (0.37 * x[0] + 0.11 * x[1] + c as f64).sin();
            if c == 0 { s } else { 1.0 - 0.8 * s }
        });
        let pattern = pudwr::solver::assembly::dof_pattern(&dm);
        let (r0, jac) = assemble_reaction(&p, &dm, (&dm, &u), Some(&pattern)).unwrap();
        let jac = jac.unwrap();
        let h = 1e-7;
        let scale = max_abs(&r0);
        for j in (0..dm.n_dofs()).step_by(97) {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            let rp = assemble_reaction(&p, &dm, (&dm, &up), None).unwrap().0;
            let rm = assemble_reaction(&p, &dm, (&dm, &um), None).unwrap().0;
            let col: Vec<f64> = (0..dm.n_dofs()).map(|i| (rp[i] - rm[i]) / (2.0 * h)).collect();
            let exact: Vec<f64> = (0..dm.n_dofs()).map(|i| jac.get(i, j)).collect();
            let diff: Vec<f64> = col.iter().zip(&exact).map(|(a, b)| a - b).collect();
            assert!(norm2(&diff) <= 1e-5 * norm2(&exact).max(1e-3 * scale), "order {order} column {j}");
        }
    }
}

#[test]
fn combustion_newton_converges_on_coarse_mesh() {
    let p = config3(CombustionParams::default());
    let mesh = SpatialMesh::patched(p.grid.clone());
    let tm = TemporalMesh::uniform(p.t_end, 256);
    let tm = TemporalMesh::from_nodes(tm.nodes()[..=24].to_vec()).unwrap();
    let slabs = SlabMeshes::uniform(mesh, tm.len());
    for rho_skip in [0.1, 0.0] {
        let mut opts = SolverOptions { load_rule: TimeRule::Midpoint, ..Default::default() };
        opts.newton.rho_skip = rho_skip;
        let sol = solve_primal(&p, &slabs, &tm, 1, &opts).unwrap();
        for (m, st) in sol.newton.iter().enumerate() {
            let r = &st.residuals;
            assert!(*r.last().unwrap() <= opts.newton.abs_tol, "slab {m}");
            assert!(st.iterations() <= 12, "slab {m}: {} iterations", st.iterations());
            if rho_skip == 0.0 {
                // full Newton ends quadratically
                let n = r.len();
                assert!(r[n - 1] / r[n - 2] < 0.05, "slab {m}: {r:?}");
                assert!(st.iterations() <= 8, "slab {m}: {} iterations", st.iterations());
            }
        }
    }
}
