//! Heat and combustion problems and the three shipped configurations.
//!
//! Every problem has the form `d_t u_c - D_c Lap u_c + R_c(u) = f_c` with
//! Dirichlet, homogeneous Neumann or Robin `d_n u_c = -kappa u_c` data, so the
//! spatial form is
//! `abar(u)(phi) = sum_c (D_c grad u_c, grad phi_c) + (R_c(u), phi_c) + <kappa u_c, phi_c>_R`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::ProblemError;
use crate::mesh::{CoarseGrid, Side};

pub type ScalarField = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
pub type ComponentField = Arc<dyn Fn(usize, f64, [f64; 2]) -> f64 + Send + Sync>;
pub type InitialField = Arc<dyn Fn(usize, [f64; 2]) -> f64 + Send + Sync>;

pub const TAG_NEUMANN: u8 = 0;
pub const TAG_DIRICHLET: u8 = 1;
pub const TAG_ROBIN: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombustionParams {
    /// Lewis number.
    pub le: f64,
    /// Gas expansion.
    pub alpha: f64,
    /// Activation energy.
    pub beta: f64,
    /// Robin cooling coefficient on the rods.
    pub kappa: f64,
}

impl Default for CombustionParams {
    fn default() -> Self {
        CombustionParams { le: 1.0, alpha: 0.8, beta: 10.0, kappa: 0.1 }
    }
}

fn arrhenius(theta: f64, p: &CombustionParams) -> Result<(f64, f64), ProblemError> {
    let den = 1.0 + p.alpha * (theta - 1.0);
    if den.abs() < 1e-12 {
        return Err(ProblemError::ArrheniusSingular(theta));
    }
    Ok((p.beta * p.beta / (2.0 * p.le) * (p.beta * (theta - 1.0) / den).exp(), den))
}

/// Arrhenius reaction rate.
pub fn omega(theta: f64, y: f64, p: &CombustionParams) -> Result<f64, ProblemError> {
    Ok(y * arrhenius(theta, p)?.0)
}

/// `(d omega / d theta, d omega / d Y)`.
pub fn omega_derivatives(theta: f64, y: f64, p: &CombustionParams) -> Result<(f64, f64), ProblemError> {
    let (e, den) = arrhenius(theta, p)?;
    Ok((y * e * p.beta / (den * den), e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reaction {
    None,
    Arrhenius(CombustionParams),
}

/// Element-level description of a parabolic problem.
#[derive(Clone)]
pub struct ParabolicProblem {
    pub name: &'static str,
    pub ncomp: usize,
    pub diffusion: [f64; 2],
    pub reaction: Reaction,
    /// Volume source of component 0 (heat problems); `None` means zero.
    pub source: Option<ScalarField>,
    /// `(tag, component, kappa)` Robin terms.
    pub robin: Vec<(u8, usize, f64)>,
    /// Does boundary tag `tag` carry Dirichlet data for component `c`?
    pub dirichlet: fn(usize, u8) -> bool,
    pub dirichlet_value: ComponentField,
    pub initial: InitialField,
    pub grid: CoarseGrid,
    pub t_end: f64,
    /// Closed-form solution of component 0, if known.
    pub exact: Option<ScalarField>,
}

impl fmt::Debug for ParabolicProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParabolicProblem")
            .field("name", &self.name)
            .field("ncomp", &self.ncomp)
            .field("reaction", &self.reaction)
            .field("t_end", &self.t_end)
            .finish()
    }
}

impl ParabolicProblem {
    pub fn is_linear(&self) -> bool {
        matches!(self.reaction, Reaction::None)
    }

    pub fn combustion_params(&self) -> Option<&CombustionParams> {
        match &self.reaction {
            Reaction::Arrhenius(p) => Some(p),
            Reaction::None => None,
        }
    }

    pub fn source_at(&self, t: f64, x: [f64; 2]) -> f64 {
        self.source.as_ref().map_or(0.0, |f| f(t, x))
    }

    /// Robin coefficient for component `c` on faces tagged `tag`.
    pub fn robin_coeff(&self, tag: u8, c: usize) -> f64 {
        self.robin.iter().filter(|r| r.0 == tag && r.1 == c).map(|r| r.2).sum()
    }

    /// Reaction terms `R_c(u)` and their Jacobian `dR_c / du_d`.
    pub fn reaction_terms(&self, u: &[f64]) -> Result<([f64; 2], [[f64; 2]; 2]), ProblemError> {
        match &self.reaction {
            Reaction::None => Ok(([0.0; 2], [[0.0; 2]; 2])),
            Reaction::Arrhenius(p) => {
                let w = omega(u[0], u[1], p)?;
                let (wt, wy) = omega_derivatives(u[0], u[1], p)?;
                Ok(([-w, w], [[-wt, -wy], [wt, wy]]))
            }
        }
    }

    /// Pointwise `abar` integrand against test values/gradients (no boundary terms).
    pub fn abar_point(
        &self,
        u: &[f64],
        gu: &[[f64; 2]],
        phi: &[f64],
        gphi: &[[f64; 2]],
    ) -> Result<f64, ProblemError> {
        let (r, _) = self.reaction_terms(u)?;
        let mut s = 0.0;
        for c in 0..self.ncomp {
            s += self.diffusion[c] * (gu[c][0] * gphi[c][0] + gu[c][1] * gphi[c][1]) + r[c] * phi[c];
        }
        Ok(s)
    }

    /// Pointwise `abar'_u(u)(psi, phi)` integrand.
    pub fn abar_derivative_point(
        &self,
        u: &[f64],
        psi: &[f64],
        gpsi: &[[f64; 2]],
        phi: &[f64],
        gphi: &[[f64; 2]],
    ) -> Result<f64, ProblemError> {
        let (_, dr) = self.reaction_terms(u)?;
        let mut s = 0.0;
        for c in 0..self.ncomp {
            s += self.diffusion[c] * (gpsi[c][0] * gphi[c][0] + gpsi[c][1] * gphi[c][1]);
            for d in 0..self.ncomp {
                s += dr[c][d] * psi[d] * phi[c];
            }
        }
        Ok(s)
    }
}

fn heat_dirichlet(_: usize, _: u8) -> bool {
    true
}

pub fn config1_exact(t: f64, x: [f64; 2]) -> f64 {
    -(x[0] * x[0] - x[0]) * (x[1] * x[1] - x[1]) * t / 4.0
}

pub fn config1_source(t: f64, x: [f64; 2]) -> f64 {
    let px = x[0] * x[0] - x[0];
    let py = x[1] * x[1] - x[1];
    -px * py / 4.0 + px * t / 2.0 + py * t / 2.0
}

/// Heat equation on the unit square with a separable polynomial solution.
/// The coarse grid has `n x n` cells.
pub fn config1(n: u32) -> ParabolicProblem {
    ParabolicProblem {
        name: "config1",
        ncomp: 1,
        diffusion: [1.0, 1.0],
        reaction: Reaction::None,
        source: Some(Arc::new(config1_source)),
        robin: Vec::new(),
        dirichlet: heat_dirichlet,
        dirichlet_value: Arc::new(|_, _, _| 0.0),
        initial: Arc::new(|_, _| 0.0),
        grid: CoarseGrid::unit_square(n),
        t_end: 1.0,
        exact: Some(Arc::new(config1_exact)),
    }
}

/// Reference value of the space-time average of the config 1 solution.
pub fn config1_average(t_end: f64) -> f64 {
    -t_end / 288.0
}

fn hill_center(t: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = (2.0 * PI * t).sin_cos();
    ([0.5 + 0.25 * c, 0.5 + 0.25 * s], [-0.5 * PI * s, 0.5 * PI * c])
}

/// Rotating hill.
pub fn config2_exact(t: f64, x: [f64; 2]) -> f64 {
    let (x0, _) = hill_center(t);
    let r2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2);
    1.0 / (1.0 + 50.0 * r2)
}

pub fn config2_source(t: f64, x: [f64; 2]) -> f64 {
    let (x0, v) = hill_center(t);
    let (dx, dy) = (x[0] - x0[0], x[1] - x0[1]);
    let r2 = dx * dx + dy * dy;
    let s = 1.0 + 50.0 * r2;
    let s2 = s * s;
    let dr2_dt = -2.0 * dx * v[0] - 2.0 * dy * v[1];
    let ut = -50.0 * dr2_dt / s2;
    let lap = -200.0 / s2 + 20000.0 * r2 / (s2 * s);
    ut - lap
}

/// Heat equation with the rotating-hill solution; Dirichlet data and initial
/// value are traces of the exact solution.
pub fn config2(n: u32) -> ParabolicProblem {
    ParabolicProblem {
        name: "config2",
        ncomp: 1,
        diffusion: [1.0, 1.0],
        reaction: Reaction::None,
        source: Some(Arc::new(config2_source)),
        robin: Vec::new(),
        dirichlet: heat_dirichlet,
        dirichlet_value: Arc::new(|_, t, x| config2_exact(t, x)),
        initial: Arc::new(|_, x| config2_exact(0.0, x)),
        grid: CoarseGrid::unit_square(n),
        t_end: 1.0,
        exact: Some(Arc::new(config2_exact)),
    }
}

pub const CHANNEL_LENGTH: f64 = 60.0;
pub const CHANNEL_HEIGHT: f64 = 16.0;
const EPS: f64 = 1e-9;

fn on_rod(p: [f64; 2]) -> bool {
    let (l, h) = (CHANNEL_LENGTH, CHANNEL_HEIGHT);
    let (x0, x1) = (l / 4.0, l / 2.0);
    let in_rod_y = p[1] <= h / 4.0 + EPS || p[1] >= 3.0 * h / 4.0 - EPS;
    let vertical = ((p[0] - x0).abs() < EPS || (p[0] - x1).abs() < EPS) && in_rod_y;
    let horizontal =
        p[0] >= x0 - EPS && p[0] <= x1 + EPS && ((p[1] - h / 4.0).abs() < EPS || (p[1] - 3.0 * h / 4.0).abs() < EPS);
    vertical || horizontal
}

fn channel_tag(p: [f64; 2], _side: Side) -> u8 {
    if p[0] < EPS {
        TAG_DIRICHLET
    } else if on_rod(p) {
        TAG_ROBIN
    } else {
        TAG_NEUMANN
    }
}

fn combustion_dirichlet(_: usize, tag: u8) -> bool {
    tag == TAG_DIRICHLET
}

/// Channel of length 60 and height 16 with two cooled rods occupying
/// `[15, 30] x [0, 4]` and `[15, 30] x [12, 16]`. The coarse grid has 32 x 8
/// cells of size 1.875 x 2 minus the rods (224 cells); one patch refinement
/// gives 896 cells.
pub fn config3_grid() -> CoarseGrid {
    let (l, h) = (CHANNEL_LENGTH, CHANNEL_HEIGHT);
    CoarseGrid::rectangle([0.0, 0.0], [l, h], 32, 8)
        .remove_box([l / 4.0, 0.0], [l / 2.0, h / 4.0])
        .remove_box([l / 4.0, 3.0 * h / 4.0], [l / 2.0, h])
        .with_tags(channel_tag)
}

pub fn config3_initial(c: usize, x: [f64; 2], le: f64) -> f64 {
    let x = x[0];
    match (c, x <= 9.0) {
        (0, true) => 1.0,
        (0, false) => (9.0 - x).exp(),
        (_, true) => 0.0,
        (_, false) => 1.0 - (le * (9.0 - x)).exp(),
    }
}

/// Flame front in a channel cooled by two rods.
pub fn config3(p: CombustionParams) -> ParabolicProblem {
    let le = p.le;
    ParabolicProblem {
        name: "config3",
        ncomp: 2,
        diffusion: [1.0, 1.0 / p.le],
        reaction: Reaction::Arrhenius(p),
        source: None,
        robin: vec![(TAG_ROBIN, 0, p.kappa)],
        dirichlet: combustion_dirichlet,
        dirichlet_value: Arc::new(|c, _, _| if c == 0 { 1.0 } else { 0.0 }),
        initial: Arc::new(move |c, x| config3_initial(c, x, le)),
        grid: config3_grid(),
        t_end: 60.0,
        exact: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialMesh;

    #[test]
    fn omega_examples() {
        let p = CombustionParams::default();
        assert_eq!(omega(1.0, 1.0, &p).unwrap(), 50.0);
        assert_eq!(omega(0.3, 0.0, &p).unwrap(), 0.0);
        let w = omega(0.5, 1.0, &p).unwrap();
        assert!((w - 0.0120184738209757104985592208115).abs() < 1e-16);
        assert_eq!(omega_derivatives(1.0, 1.0, &p).unwrap(), (500.0, 50.0));
        assert_eq!(omega_derivatives(1.0, 0.0, &p).unwrap().1, 50.0);
        let (wt, wy) = omega_derivatives(0.3, 0.7, &p).unwrap();
        assert!((wt / 0.000222808778368909967775107641766 - 1.0).abs() < 1e-13);
        assert!((wy / 0.0000061622542131744242516086913494 - 1.0).abs() < 1e-13);
        assert!(matches!(omega(-0.25, 1.0, &p), Err(ProblemError::ArrheniusSingular(_))));
    }

    #[test]
    fn config1_examples() {
        assert_eq!(config1_source(1.0, [0.5, 0.5]), -0.265625);
        assert_eq!(config1_exact(0.0, [0.3, 0.2]), 0.0);
        assert_eq!(config1_exact(0.7, [1.0, 0.2]), 0.0);
    }

    #[test]
    fn config2_examples() {
        for t in [0.0, 0.13, 0.5, 0.91] {
            let (c, _) = hill_center(t);
            assert!((config2_exact(t, c) - 1.0).abs() < 1e-15);
        }
        assert!((config2_exact(0.0, [0.5, 0.5]) - 1.0 / 4.125).abs() < 1e-16);
    }

    #[test]
    fn config3_geometry() {
        let g = config3_grid();
        assert_eq!(g.active.iter().filter(|a| **a).count(), 224);
        assert!((g.area() - (60.0 * 16.0 - 2.0 * 15.0 * 4.0)).abs() < 1e-12);
        let m = SpatialMesh::patched(g);
        assert_eq!(m.n_active(), 896);
        let mut rod = 0.0;
        for f in m.boundary_faces() {
            if f.tag == TAG_ROBIN {
                let (_, size) = m.cell_bounds(f.cell);
                rod += if f.side < 2 { size[1] } else { size[0] };
            }
        }
        assert!((rod - 46.0).abs() < 1e-12);
        assert_eq!(config3_initial(0, [9.0, 3.0], 1.0), 1.0);
        assert_eq!(config3_initial(1, [9.0, 3.0], 1.0), 0.0);
        assert!((config3_initial(0, [10.0, 0.0], 1.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((config3_initial(1, [10.0, 0.0], 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-16);
    }

    #[test]
    fn combustion_reaction_signs() {
        let pr = config3(CombustionParams::default());
        let (r, dr) = pr.reaction_terms(&[1.0, 1.0]).unwrap();
        assert_eq!(r, [-50.0, 50.0]);
        assert_eq!(dr, [[-500.0, -50.0], [500.0, 50.0]]);
        assert!(!pr.is_linear() && config1(2).is_linear());
    }
}
