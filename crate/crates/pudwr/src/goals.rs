//! Goal functionals and their derivative densities.
//!
//! All shipped goals are space-time integrals over `(0, T)` without an end
//! time term, so the terminal adjoint datum is zero. A goal's derivative is
//! exposed pointwise: `J'(u)(psi) = int_I int_Omega d(t, x, u) . psi + int_I
//! int_{Gamma} b(u) . psi`, which is what both the adjoint right-hand side and
//! the estimator integrate.

use std::fmt;
use std::str::FromStr;

use crate::error::SolverError;
use crate::fespace::overlay::side_point;
use crate::fespace::{gauss_legendre, QuadRule, TimeRule};
use crate::mesh::{SpatialMesh, TemporalMesh};
use crate::problems::{omega, omega_derivatives, ParabolicProblem, TAG_ROBIN};
use crate::solver::SpaceTimeSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalKind {
    /// Space-time average of the solution.
    Average,
    /// Space-time L2 norm of the error against the closed-form solution.
    L2Error,
    /// Space-time average of the reaction rate.
    ReactionRate,
    /// Average species concentration on the Robin boundary.
    RodSpecies,
}

impl GoalKind {
    pub fn name(self) -> &'static str {
        match self {
            GoalKind::Average => "avg",
            GoalKind::L2Error => "l2err",
            GoalKind::ReactionRate => "j1",
            GoalKind::RodSpecies => "j2",
        }
    }
}

impl fmt::Display for GoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GoalKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "avg" => Ok(GoalKind::Average),
            "l2err" => Ok(GoalKind::L2Error),
            "j1" => Ok(GoalKind::ReactionRate),
            "j2" => Ok(GoalKind::RodSpecies),
            _ => Err(format!("unknown goal '{s}' (expected avg, l2err, j1, j2)")),
        }
    }
}

/// Total length of the faces tagged `tag`.
pub fn boundary_measure(mesh: &SpatialMesh, tag: u8) -> f64 {
    mesh.boundary_faces()
        .iter()
        .filter(|f| f.tag == tag)
        .map(|f| {
            let (_, size) = mesh.cell_bounds(f.cell);
            if f.side < 2 {
                size[1]
            } else {
                size[0]
            }
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Goal {
    pub kind: GoalKind,
    /// Multiplies the functional (and hence every adjoint and indicator).
    pub scale: f64,
    /// `T |Omega|` or `T |Gamma_R|`.
    normalization: f64,
    /// Spatial Gauss points per direction for values and derivatives.
    pub n_space: usize,
    /// Temporal rule for time-dependent integrands.
    pub time_rule: TimeRule,
}

impl Goal {
    pub fn new(kind: GoalKind, problem: &ParabolicProblem, mesh: &SpatialMesh) -> Self {
        let t = problem.t_end;
        let normalization = match kind {
            GoalKind::Average | GoalKind::ReactionRate => t * problem.grid.area(),
            GoalKind::RodSpecies => t * boundary_measure(mesh, TAG_ROBIN),
            GoalKind::L2Error => 1.0,
        };
        let (n_space, time_rule) = match kind {
            GoalKind::L2Error => (2, TimeRule::RightBox),
            _ => (3, TimeRule::Midpoint),
        };
        Goal { kind, scale: 1.0, normalization, n_space, time_rule }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Is the goal linear in `u`?
    pub fn is_linear(&self) -> bool {
        matches!(self.kind, GoalKind::Average | GoalKind::RodSpecies)
    }

    /// `J(u_kh)` for a dG(0) solution.
    pub fn value(&self, problem: &ParabolicProblem, tmesh: &TemporalMesh, sol: &SpaceTimeSolution) -> Result<f64, SolverError> {
        let mut total = 0.0;
        let rule = QuadRule::gauss(self.n_space);
        let (gx, gw) = gauss_legendre(self.n_space);
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for m in 0..tmesh.len() {
            let (t0, t1) = tmesh.interval(m);
            let k = t1 - t0;
            let dm = &sol.spaces[m];
            let u = &sol.slabs[m];
            let mesh = dm.mesh();
            let mut slab = 0.0;
            match self.kind {
                GoalKind::RodSpecies => {
                    for f in mesh.boundary_faces().iter().filter(|f| f.tag == TAG_ROBIN) {
                        let (_, size) = mesh.cell_bounds(f.cell);
                        let len = if f.side < 2 { size[1] } else { size[0] };
                        for (x, w) in gx.iter().zip(&gw) {
                            dm.eval(u, f.cell, side_point(f.side, *x), &mut v, &mut g);
                            slab += w * len * v[1];
                        }
                    }
                    slab *= k;
                }
                _ => {
                    let tp = self.time_rule.points();
                    for cell in 0..mesh.n_active() {
                        let area = mesh.cell_area(cell);
                        for (q, r) in rule.points.iter().enumerate() {
                            dm.eval(u, cell, *r, &mut v, &mut g);
                            let w = rule.weights[q] * area;
                            slab += w * match self.kind {
                                GoalKind::Average => k * v[0],
                                GoalKind::ReactionRate => {
                                    let p = problem.combustion_params().ok_or_else(|| {
                                        SolverError::Goal("reaction-rate goal needs a combustion problem".into())
                                    })?;
                                    k * omega(v[0], v[1], p)?
                                }
                                GoalKind::L2Error => {
                                    let exact = problem.exact.as_ref().ok_or_else(|| {
                                        SolverError::Goal("L2-error goal needs a closed-form solution".into())
                                    })?;
                                    let x = mesh.map_to_physical(cell, *r);
                                    tp.iter()
                                        .map(|&(tau, wt)| {
                                            let e = exact(t0 + tau * k, x) - v[0];
                                            wt * k * e * e
                                        })
                                        .sum::<f64>()
                                }
                                GoalKind::RodSpecies => unreachable!(),
                            };
                        }
                    }
                }
            }
            total += slab;
        }
        Ok(self.scale
            * match self.kind {
                GoalKind::L2Error => total.sqrt(),
                _ => total / self.normalization,
            })
    }

    /// Freeze the linearization point: for the L2 error this fixes `||e||`.
    pub fn linearize(
        &self,
        problem: &ParabolicProblem,
        tmesh: &TemporalMesh,
        state: &SpaceTimeSolution,
    ) -> Result<GoalDerivative, SolverError> {
        let norm = match self.kind {
            GoalKind::L2Error => {
                let n = self.value(problem, tmesh, state)? / self.scale;
                if n == 0.0 {
                    return Err(SolverError::Goal("L2 error is zero; derivative undefined".into()));
                }
                n
            }
            _ => 1.0,
        };
        Ok(GoalDerivative { goal: self.clone(), norm })
    }
}

/// Pointwise derivative densities of a goal at a fixed linearization point.
#[derive(Clone, Debug)]
pub struct GoalDerivative {
    pub goal: Goal,
    /// Frozen `||u - u_kh||` for the L2 error, 1 otherwise.
    pub norm: f64,
}

impl GoalDerivative {
    pub fn time_rule(&self) -> TimeRule {
        self.goal.time_rule
    }

    pub fn n_space(&self) -> usize {
        self.goal.n_space
    }

    /// Does the volume density depend on time (for fixed `u`)?
    pub fn time_dependent(&self) -> bool {
        self.goal.kind == GoalKind::L2Error
    }

    pub fn has_volume(&self) -> bool {
        self.goal.kind != GoalKind::RodSpecies
    }

    pub fn has_boundary(&self) -> bool {
        self.goal.kind == GoalKind::RodSpecies
    }

    /// Coefficients `d_c` of `psi_c` in the volume integrand.
    pub fn volume_density(&self, problem: &ParabolicProblem, t: f64, x: [f64; 2], u: &[f64]) -> Result<[f64; 2], SolverError> {
        let g = &self.goal;
        Ok(match g.kind {
            GoalKind::Average => [g.scale / g.normalization, 0.0],
            GoalKind::ReactionRate => {
                let p = problem.combustion_params().ok_or_else(|| SolverError::Goal("not a combustion problem".into()))?;
                let (wt, wy) = omega_derivatives(u[0], u[1], p)?;
                [g.scale * wt / g.normalization, g.scale * wy / g.normalization]
            }
            GoalKind::L2Error => {
                let exact = problem.exact.as_ref().ok_or_else(|| SolverError::Goal("no closed-form solution".into()))?;
                [-g.scale * (exact(t, x) - u[0]) / self.norm, 0.0]
            }
            GoalKind::RodSpecies => [0.0; 2],
        })
    }

    /// Coefficients of `psi_c` in the boundary integrand on faces tagged `tag`.
    pub fn boundary_density(&self, tag: u8) -> [f64; 2] {
        let g = &self.goal;
        match g.kind {
            GoalKind::RodSpecies if tag == TAG_ROBIN => [0.0, g.scale / g.normalization],
            _ => [0.0; 2],
        }
    }
}
