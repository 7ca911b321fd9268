//! Solve, estimate, mark, refine.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{ConfigError, EstimatorError};
use crate::estimator::{estimate, Estimate, EstimateReport, EstimatorConfig, IndicatorField};
use crate::goals::Goal;
use crate::mesh::{SlabMeshes, SpatialMesh, TemporalMesh};
use crate::problems::ParabolicProblem;
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkingConfig {
    /// Equilibration factor between temporal and spatial estimates.
    pub c: f64,
    /// Fraction of intervals bisected when the temporal branch fires.
    pub theta_t: f64,
    /// Fraction of cells per slab refined when the spatial branch fires
    /// (counting the sibling patches that marks are promoted to).
    pub theta_x: f64,
    /// Number of solve-estimate passes.
    pub max_loops: usize,
    /// Stop once a pass used at least this many primal space-time dofs.
    pub dof_budget: Option<usize>,
}

impl Default for MarkingConfig {
    fn default() -> Self {
        MarkingConfig { c: 5.0, theta_t: 0.95, theta_x: 0.40, max_loops: 5, dof_budget: None }
    }
}

impl MarkingConfig {
    /// Refine everything every loop.
    pub fn global(loops: usize) -> Self {
        MarkingConfig { c: f64::INFINITY, theta_t: 1.0, theta_x: 1.0, max_loops: loops, dof_budget: None }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| Err(ConfigError::InvalidValue { key: key.into(), msg: msg.into() });
        if !(self.c > 0.0) {
            return bad("c", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.theta_t) {
            return bad("theta_t", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.theta_x) {
            return bad("theta_x", "must lie in [0, 1]");
        }
        if self.max_loops == 0 {
            return bad("loops", "must be at least 1");
        }
        Ok(())
    }
}

/// Which refinement branches fire for global estimates `eta_k`, `eta_h`.
pub fn branches(eta_k: f64, eta_h: f64, c: f64) -> (bool, bool) {
    let (k, h) = (eta_k.abs(), eta_h.abs());
    if c == f64::INFINITY {
        return (true, true);
    }
    (k * c >= h, h * c >= k)
}

/// Number of entities marked by a fixed fraction `theta` of `n`.
pub fn marked_count(theta: f64, n: usize) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004
    ((theta * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Indices of the `ceil(theta n)` largest `|values|`, ties by ascending index.
pub fn select_largest(values: &[f64], theta: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(marked_count(theta, values.len()));
    idx.sort_unstable();
    idx
}

/// Spatial marks on `mesh`: cells are taken by decreasing `|values|`
/// together with their sibling patch (on patch-structured meshes) until
/// `ceil(theta n)` cells are covered.
pub fn select_cells(mesh: &SpatialMesh, values: &[f64], theta: f64) -> Vec<usize> {
    let target = marked_count(theta, values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut chosen = BTreeSet::new();
    for c in order {
        if chosen.len() >= target {
            break;
        }
        if mesh.is_patch_structured() {
            chosen.extend(mesh.siblings(c));
        } else {
            chosen.insert(c);
        }
    }
    chosen.into_iter().collect()
}

/// What one call of [`mark_and_refine`] did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkSummary {
    pub temporal: bool,
    pub spatial: bool,
    pub intervals: BTreeSet<usize>,
    /// Marked cells per slab, before the one-irregular closure.
    pub cells: Vec<Vec<usize>>,
}

/// Equilibrate, mark and refine. Spatial marks are applied to each slab mesh
/// first; bisected intervals then hand the refined mesh to both children.
pub fn mark_and_refine(
    report: &EstimateReport,
    field: &IndicatorField,
    slabs: &SlabMeshes,
    tmesh: &TemporalMesh,
    cfg: &MarkingConfig,
) -> (TemporalMesh, SlabMeshes, MarkSummary) {
    let (temporal, spatial) = branches(report.eta_k, report.eta_h, cfg.c);
    let mut summary = MarkSummary { temporal, spatial, ..Default::default() };
    let mut meshes = slabs.meshes.clone();
    if spatial {
        // slabs sharing one mesh object are refined once per distinct marking
        for (m, mesh) in meshes.iter_mut().enumerate() {
            let marks = select_cells(mesh, &field.element_indicators(m), cfg.theta_x);
            if !marks.is_empty() {
                *mesh = Arc::new(mesh.refine(&marks));
            }
            summary.cells.push(marks);
        }
        share_identical(&mut meshes, slabs);
    }
    let mut slabs = SlabMeshes { meshes };
    let mut tmesh = tmesh.clone();
    if temporal {
        summary.intervals = select_largest(&field.temporal(), cfg.theta_t).into_iter().collect();
        tmesh = tmesh.refine(&summary.intervals);
        slabs = slabs.split_slabs(&summary.intervals);
    }
    (tmesh, slabs, summary)
}

/// Re-share mesh objects between consecutive slabs that started from the same
/// mesh and received the same marks, so that operators can be cached.
fn share_identical(new: &mut [Arc<SpatialMesh>], old: &SlabMeshes) {
    for m in 1..new.len() {
        if Arc::ptr_eq(&old.meshes[m], &old.meshes[m - 1]) && same_cells(&new[m], &new[m - 1]) {
            new[m] = new[m - 1].clone();
        }
    }
}

fn same_cells(a: &SpatialMesh, b: &SpatialMesh) -> bool {
    a.n_active() == b.n_active() && (0..a.n_active()).all(|c| a.cell_key(c) == b.cell_key(c))
}

/// One row of the run history.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub loop_index: usize,
    pub m: usize,
    pub n_max: usize,
    pub st_cells: usize,
    pub st_dofs_primal: usize,
    /// Primal plus adjoint space-time dofs.
    pub st_dofs_total: usize,
    pub report: EstimateReport,
    pub wall_seconds: f64,
}

#[derive(Debug, Default)]
pub struct RunHistory {
    pub rows: Vec<HistoryRow>,
    /// Set when a pass failed; rows before it are kept.
    pub error: Option<EstimatorError>,
}

/// Everything the loop hands to its observer after a pass.
pub struct LoopState<'a> {
    pub row: &'a HistoryRow,
    pub estimate: &'a Estimate,
    pub tmesh: &'a TemporalMesh,
    pub slabs: &'a SlabMeshes,
}

#[allow(clippy::too_many_arguments)]
pub fn adaptive_loop(
    problem: &ParabolicProblem,
    goal: &Goal,
    tmesh: TemporalMesh,
    slabs: SlabMeshes,
    est: &EstimatorConfig,
    opts: &SolverOptions,
    marking: &MarkingConfig,
    reference: Option<f64>,
    mut observe: impl FnMut(&LoopState<'_>),
) -> RunHistory {
    let mut history = RunHistory::default();
    let (mut tmesh, mut slabs) = (tmesh, slabs);
    for loop_index in 0..marking.max_loops {
        let start = Instant::now();
        let e = match estimate(problem, goal, &slabs, &tmesh, est, opts, reference) {
            Ok(e) => e,
            Err(err) => {
                history.error = Some(err);
                break;
            }
        };
        let st_dofs_primal = e.primal.total_dofs();
        let adjoint_dofs: usize = e.adjoint.spaces.iter().map(|s| s.n_dofs()).sum();
        let row = HistoryRow {
            loop_index,
            m: tmesh.len(),
            n_max: slabs.max_cells(),
            st_cells: slabs.total_cells(),
            st_dofs_primal,
            st_dofs_total: st_dofs_primal + adjoint_dofs,
            report: e.report.clone(),
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        observe(&LoopState { row: &row, estimate: &e, tmesh: &tmesh, slabs: &slabs });
        history.rows.push(row);
        let last = loop_index + 1 == marking.max_loops;
        let spent = marking.dof_budget.is_some_and(|b| st_dofs_primal >= b);
        let nothing_to_do = marking.c != f64::INFINITY && e.indicators.sum_abs() == 0.0;
        if last || spent || nothing_to_do {
            break;
        }
        let (t, s, _) = mark_and_refine(&e.report, &e.indicators, &slabs, &tmesh, marking);
        tmesh = t;
        slabs = s;
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibration_examples() {
        assert_eq!(branches(10.0, 1.0, 1.0), (true, false));
        assert_eq!(branches(-1.0, 1.0, 1.0), (true, true));
        assert_eq!(branches(1.0, 3.0, 5.0), (true, true));
        assert_eq!(branches(0.0, 0.0, f64::INFINITY), (true, true));
    }

    #[test]
    fn fixed_rate_counts() {
        assert_eq!(marked_count(0.95, 16), 16);
        assert_eq!(marked_count(0.3, 10), 3);
        assert_eq!(marked_count(0.4, 64), 26);
        assert_eq!(marked_count(0.0, 64), 0);
        assert_eq!(marked_count(1.0, 7), 7);
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(select_largest(&[1.0, -3.0, 3.0, 0.5], 0.25), vec![1]);
        assert_eq!(select_largest(&[2.0, 2.0, 2.0], 0.5), vec![0, 1]);
    }
}
