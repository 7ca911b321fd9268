//! Partition-of-unity DWR indicators for dG(0) time stepping.
//!
//! Every indicator is one of two space-time residuals tested with a weight
//! that is linear in time on `I_m`. For the primal side, with weight values
//! `wa` at `t_{m-1}^+` and `wb` at `t_m^-` and temporal PU `psi`,
//!
//! `R_m(W) = int_{I_m} (f, W psi) - k int_0^1 psi abar(u_m)(W) - psi(0) (u_m - u_{m-1}, wa)`,
//!
//! and for the adjoint side, with primal weights `pa`, `pb`,
//!
//! `R*_m(P) = int_{I_m} J'(u_m)(P) - k abar'(u_m)(P_mean, z_m) + (pb, z_{m+1} - z_m)`.
//!
//! The temporal weights use the linear reconstruction in time of the high
//! order fields, the spatial weights the difference between high and low order
//! at `t_m`, and the joint weight is their sum. Each weight is multiplied by
//! the Q1 hat `chi_i` of the slab mesh (hanging hats folded into their
//! masters), which localizes the residual to vertex `i`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{EstimatorError, FeError};
use crate::fespace::overlay::{overlay, side_point, LeafMap, SubCell};
use crate::fespace::transfer::{
    reconstruction_endpoints, shifted_reconstruction_endpoints, spatial_interp_down, spatial_reconstruct_up,
    Combination,
};
use crate::fespace::{gauss_legendre, shape_all, DofMap, QuadRule, TimeRule};
use crate::goals::{Goal, GoalDerivative};
use crate::mesh::{SlabMeshes, SpatialMesh, TemporalMesh};
use crate::problems::ParabolicProblem;
use crate::solver::assembly::{face_tags, NO_FACE};
use crate::solver::{
    build_spaces, slab_constraints, solve_adjoint, solve_primal, spaces_like, AdjointSolution, SolverOptions,
    SpaceTimeSolution,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorPart {
    Primal,
    Adjoint,
    /// Mean of the primal and adjoint estimators.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Joint,
    Split,
}

/// Temporal partition of unity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PuKind {
    /// Indicator function of each interval.
    Dg0,
    /// Piecewise linear tents at the time nodes.
    Cg1,
}

macro_rules! named_enum {
    ($t:ty, $what:literal, $($v:path => $s:literal),+) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $($v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(format!(concat!("unknown ", $what, " '{}'"), s)),
                }
            }
        }
    };
}

named_enum!(EstimatorPart, "estimator part", EstimatorPart::Primal => "primal", EstimatorPart::Adjoint => "adjoint", EstimatorPart::Full => "full");
named_enum!(Variant, "variant", Variant::Joint => "joint", Variant::Split => "split");
named_enum!(PuKind, "partition of unity", PuKind::Dg0 => "dg0", PuKind::Cg1 => "cg1");

/// Spatial orders `(s, s~)` of the primal and adjoint solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Orders {
    pub primal: usize,
    pub adjoint: usize,
}

impl Orders {
    pub const LOW: Orders = Orders { primal: 1, adjoint: 1 };
    pub const MIXED: Orders = Orders { primal: 1, adjoint: 2 };
    pub const HIGH: Orders = Orders { primal: 2, adjoint: 2 };
}

impl fmt::Display for Orders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.primal, self.adjoint)
    }
}

impl FromStr for Orders {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "1/1" => Ok(Orders::LOW),
            "1/2" => Ok(Orders::MIXED),
            "2/2" => Ok(Orders::HIGH),
            _ => Err(format!("unknown orders '{s}' (expected 1/1, 1/2 or 2/2)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub part: EstimatorPart,
    pub variant: Variant,
    pub pu: PuKind,
    pub orders: Orders,
    /// Temporal rule for `int (f, W)`. `None` follows the load rule of the
    /// solve, which keeps the residual orthogonal to the discrete space.
    pub f_rule: Option<TimeRule>,
    /// Gauss points per direction on every overlay sub-cell.
    pub n_space: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            part: EstimatorPart::Primal,
            variant: Variant::Split,
            pu: PuKind::Dg0,
            orders: Orders::MIXED,
            f_rule: None,
            n_space: 4,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self, problem: &ParabolicProblem) -> Result<(), EstimatorError> {
        if self.pu == PuKind::Cg1
            && !(problem.is_linear() && self.variant == Variant::Split && self.part == EstimatorPart::Primal)
        {
            return Err(EstimatorError::Unsupported(
                "the cG(1) partition of unity is only available for the split primal heat estimator".into(),
            ));
        }
        Ok(())
    }

    fn wants_primal(&self) -> bool {
        self.part != EstimatorPart::Adjoint
    }

    fn wants_adjoint(&self) -> bool {
        self.part != EstimatorPart::Primal
    }
}

/// A dG(0) function: one space and coefficient vector per slab.
#[derive(Clone, Debug)]
pub struct SlabField {
    pub spaces: Vec<Arc<DofMap>>,
    pub slabs: Vec<Vec<f64>>,
}

impl SlabField {
    pub fn order(&self) -> usize {
        self.spaces[0].order()
    }

    fn eval(&self, j: usize, lm: &LeafMap, r: [f64; 2]) -> Val {
        eval_vec(&self.spaces[j], &self.slabs[j], lm, r)
    }

    fn eval_combination(&self, c: &Combination, maps: &[LeafMap], slot: impl Fn(usize) -> usize, r: [f64; 2]) -> Val {
        let mut out = Val::default();
        for &(j, w) in c {
            out.axpy(w, &self.eval(j, &maps[slot(j)], r));
        }
        out
    }

    /// `i_{2h}^2` slab by slab.
    pub fn reconstruct_up(&self) -> Result<SlabField, FeError> {
        let spaces = spaces_like(&self.spaces, 2)?;
        let slabs = (0..self.slabs.len())
            .map(|m| spatial_reconstruct_up(&self.spaces[m], &self.slabs[m], &spaces[m]))
            .collect::<Result<_, _>>()?;
        Ok(SlabField { spaces, slabs })
    }

    /// `i_h^2` slab by slab.
    pub fn interp_down(&self) -> Result<SlabField, FeError> {
        let spaces = spaces_like(&self.spaces, 1)?;
        let slabs = (0..self.slabs.len())
            .map(|m| spatial_interp_down(&self.spaces[m], &self.slabs[m], &spaces[m]))
            .collect::<Result<_, _>>()?;
        Ok(SlabField { spaces, slabs })
    }
}

/// Everything the indicators read. The low fields are Q1, the high fields
/// are the order-raised (or natively high order) counterparts.
#[derive(Clone, Debug)]
pub struct Fields {
    pub u_low: SlabField,
    /// Initial value on `u_low.spaces[0]`.
    pub u_initial: Vec<f64>,
    pub u_high: SlabField,
    pub z_low: SlabField,
    pub z_high: SlabField,
}

impl Fields {
    /// Weights per the order pair of the solves: a Q1 field is lifted by
    /// `i_{2h}^2`, a Q2 field is lowered by `i_h^2`.
    pub fn from_solutions(primal: &SpaceTimeSolution, adjoint: &AdjointSolution) -> Result<Fields, FeError> {
        let u = SlabField { spaces: primal.spaces.clone(), slabs: primal.slabs.clone() };
        let z = SlabField { spaces: adjoint.spaces.clone(), slabs: adjoint.slabs.clone() };
        let (u_low, u_high, u_initial) = if u.order() == 1 {
            let high = u.reconstruct_up()?;
            (u, high, primal.initial.clone())
        } else {
            let low = u.interp_down()?;
            let init = spatial_interp_down(&primal.spaces[0], &primal.initial, &low.spaces[0])?;
            (low, u, init)
        };
        let (z_low, z_high) = if z.order() == 1 {
            let high = z.reconstruct_up()?;
            (z, high)
        } else {
            (z.interp_down()?, z)
        };
        Ok(Fields { u_low, u_initial, u_high, z_low, z_high })
    }

    fn initial_eval(&self, lm: &LeafMap, r: [f64; 2]) -> Val {
        eval_vec(&self.u_low.spaces[0], &self.u_initial, lm, r)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Val {
    v: [f64; 2],
    g: [[f64; 2]; 2],
}

impl Val {
    fn axpy(&mut self, a: f64, o: &Val) {
        for c in 0..2 {
            self.v[c] += a * o.v[c];
            self.g[c][0] += a * o.g[c][0];
            self.g[c][1] += a * o.g[c][1];
        }
    }

    fn lin(a: f64, x: &Val, b: f64, y: &Val) -> Val {
        let mut out = Val::default();
        out.axpy(a, x);
        out.axpy(b, y);
        out
    }
}

fn eval_vec(dm: &DofMap, u: &[f64], lm: &LeafMap, r: [f64; 2]) -> Val {
    let mut out = Val::default();
    dm.eval(u, lm.cell, lm.map(r), &mut out.v, &mut out.g);
    out
}

/// Pointwise contributions to the residuals of the temporal and the spatial
/// weight: `A chi_i + B . grad chi_i`.
type PointTerms = [(f64, [f64; 2]); 2];

/// Integrate per-point terms against the Q1 hats of `pu` over the common
/// refinement of `meshes` (the first entry is the mesh of `pu`).
fn localize(
    pu: &DofMap,
    meshes: &[&SpatialMesh],
    n_space: usize,
    mut volume: impl FnMut(&SubCell, [f64; 2], [f64; 2]) -> Result<PointTerms, EstimatorError>,
    mut boundary: impl FnMut(&SubCell, [f64; 2], [f64; 2], u8) -> Result<[f64; 2], EstimatorError>,
) -> Result<[Vec<f64>; 2], EstimatorError> {
    let mesh = pu.mesh();
    let n = pu.n_nodes();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    let tags = face_tags(mesh);
    let rule = QuadRule::gauss(n_space);
    let (gx, gw) = gauss_legendre(n_space);
    let mut hanging = vec![usize::MAX; n];
    for (h, hn) in pu.hanging_nodes().iter().enumerate() {
        hanging[hn.node] = h;
    }
    let mut subs = Vec::new();
    let mut sv = [0.0; 9];
    let mut sg = [[0.0; 2]; 9];
    for cell in 0..mesh.n_active() {
        let (_, csize) = mesh.cell_bounds(cell);
        overlay(meshes, cell, &mut subs);
        let mut loc = [[0.0; 4]; 2];
        for sc in &subs {
            let area = sc.size[0] * sc.size[1];
            for (q, r) in rule.points.iter().enumerate() {
                let w = rule.weights[q] * area;
                let x = [sc.lo[0] + r[0] * sc.size[0], sc.lo[1] + r[1] * sc.size[1]];
                let terms = volume(sc, *r, x)?;
                shape_all(1, sc.maps[0].map(*r), &mut sv, &mut sg);
                for i in 0..4 {
                    let gi = [sg[i][0] / csize[0], sg[i][1] / csize[1]];
                    for (s, (a, b)) in terms.iter().enumerate() {
                        loc[s][i] += w * (a * sv[i] + b[0] * gi[0] + b[1] * gi[1]);
                    }
                }
            }
            for side in 0..4 {
                if sc.boundary & (1 << side) == 0 {
                    continue;
                }
                let tag = tags[cell][side];
                debug_assert_ne!(tag, NO_FACE);
                let len = if side < 2 { sc.size[1] } else { sc.size[0] };
                for (s1, w1) in gx.iter().zip(&gw) {
                    let r = side_point(side, *s1);
                    let x = [sc.lo[0] + r[0] * sc.size[0], sc.lo[1] + r[1] * sc.size[1]];
                    let terms = boundary(sc, r, x, tag)?;
                    if terms == [0.0; 2] {
                        continue;
                    }
                    shape_all(1, sc.maps[0].map(r), &mut sv, &mut sg);
                    for i in 0..4 {
                        for s in 0..2 {
                            loc[s][i] += w1 * len * terms[s] * sv[i];
                        }
                    }
                }
            }
        }
        for (i, &node) in pu.cell_nodes(cell).iter().enumerate() {
            let node = node as usize;
            for s in 0..2 {
                if hanging[node] == usize::MAX {
                    out[s][node] += loc[s][i];
                } else {
                    for &(mst, w) in &pu.hanging_nodes()[hanging[node]].masters {
                        out[s][mst] += w * loc[s][i];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Slab meshes entering the overlay of slab `m`: current, previous, next.
fn neighbour_meshes(spaces: &[Arc<DofMap>], m: usize) -> [&SpatialMesh; 3] {
    let cur = spaces[m].mesh().as_ref();
    let prev = if m > 0 { spaces[m - 1].mesh().as_ref() } else { cur };
    let next = if m + 1 < spaces.len() { spaces[m + 1].mesh().as_ref() } else { cur };
    [cur, prev, next]
}

fn slot_of(m: usize) -> impl Fn(usize) -> usize {
    move |j| {
        if j == m {
            0
        } else if j + 1 == m {
            1
        } else {
            debug_assert_eq!(j, m + 1);
            2
        }
    }
}

/// Localized primal residuals `(R_m(W_k chi_i), R_m(W_h chi_i))` with
/// temporal PU values `psi` at `t_{m-1}` and `t_m`.
fn primal_slab(
    problem: &ParabolicProblem,
    fields: &Fields,
    pu: &DofMap,
    tmesh: &TemporalMesh,
    m: usize,
    cfg: &EstimatorConfig,
    psi: [f64; 2],
) -> Result<[Vec<f64>; 2], EstimatorError> {
    let (t0, t1) = tmesh.interval(m);
    let k = t1 - t0;
    let meshes = neighbour_meshes(&fields.u_low.spaces, m);
    let slot = slot_of(m);
    let (zleft, _) = reconstruction_endpoints(tmesh, m);
    let ca = psi[0] / 3.0 + psi[1] / 6.0;
    let cb = psi[0] / 6.0 + psi[1] / 3.0;
    let ftimes: Vec<(f64, f64)> = cfg.f_rule.unwrap_or(TimeRule::Gauss2).points();
    let nc = problem.ncomp;
    let has_source = problem.source.is_some();
    let volume = |sc: &SubCell, r: [f64; 2], x: [f64; 2]| -> Result<PointTerms, EstimatorError> {
        let u = fields.u_low.eval(m, &sc.maps[0], r);
        let up = if m == 0 { fields.initial_eval(&sc.maps[0], r) } else { fields.u_low.eval(m - 1, &sc.maps[1], r) };
        let zk = fields.z_high.eval(m, &sc.maps[0], r);
        let zkh = fields.z_low.eval(m, &sc.maps[0], r);
        let zl = fields.z_high.eval_combination(&zleft, &sc.maps, &slot, r);
        let wk_a = Val::lin(1.0, &zl, -1.0, &zk);
        let wh = Val::lin(1.0, &zk, -1.0, &zkh);
        let (react, _) = problem.reaction_terms(&u.v)?;
        let mut out = [(0.0, [0.0; 2]); 2];
        // (wa, wb) for the temporal and spatial weights
        let zero = Val::default();
        let sets = [(&wk_a, &zero), (&wh, &wh)];
        for (s, (wa, wb)) in sets.iter().enumerate() {
            let wbar = Val::lin(ca, wa, cb, wb);
            let mut a = 0.0;
            let mut b = [0.0; 2];
            if has_source {
                for &(tau, wt) in &ftimes {
                    let ps = psi[0] * (1.0 - tau) + psi[1] * tau;
                    let wv = (1.0 - tau) * wa.v[0] + tau * wb.v[0];
                    a += wt * k * problem.source_at(t0 + tau * k, x) * ps * wv;
                }
            }
            for c in 0..nc {
                let d = problem.diffusion[c];
                a -= k * (d * (u.g[c][0] * wbar.g[c][0] + u.g[c][1] * wbar.g[c][1]) + react[c] * wbar.v[c]);
                a -= psi[0] * (u.v[c] - up.v[c]) * wa.v[c];
                b[0] -= k * d * wbar.v[c] * u.g[c][0];
                b[1] -= k * d * wbar.v[c] * u.g[c][1];
            }
            out[s] = (a, b);
        }
        Ok(out)
    };
    let boundary = |sc: &SubCell, r: [f64; 2], _x: [f64; 2], tag: u8| -> Result<[f64; 2], EstimatorError> {
        let kappa: Vec<f64> = (0..nc).map(|c| problem.robin_coeff(tag, c)).collect();
        if kappa.iter().all(|v| *v == 0.0) {
            return Ok([0.0; 2]);
        }
        let u = fields.u_low.eval(m, &sc.maps[0], r);
        let zk = fields.z_high.eval(m, &sc.maps[0], r);
        let zkh = fields.z_low.eval(m, &sc.maps[0], r);
        let zl = fields.z_high.eval_combination(&zleft, &sc.maps, &slot, r);
        let mut out = [0.0; 2];
        for c in 0..nc {
            let wk = ca * (zl.v[c] - zk.v[c]);
            let wh = (ca + cb) * (zk.v[c] - zkh.v[c]);
            out[0] -= k * kappa[c] * u.v[c] * wk;
            out[1] -= k * kappa[c] * u.v[c] * wh;
        }
        Ok(out)
    };
    localize(pu, &meshes, cfg.n_space, volume, boundary)
}

/// Localized adjoint residuals `(R*_m(P_k chi_i), R*_m(P_h chi_i))`.
fn adjoint_slab(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    fields: &Fields,
    pu: &DofMap,
    tmesh: &TemporalMesh,
    m: usize,
    cfg: &EstimatorConfig,
) -> Result<[Vec<f64>; 2], EstimatorError> {
    let (t0, t1) = tmesh.interval(m);
    let k = t1 - t0;
    let last = tmesh.len() - 1;
    let meshes = neighbour_meshes(&fields.u_low.spaces, m);
    let slot = slot_of(m);
    let (_, uright) = shifted_reconstruction_endpoints(tmesh, m);
    let nc = problem.ncomp;
    let jtimes: Vec<(f64, f64)> =
        if goal.time_dependent() { goal.time_rule().points() } else { vec![(0.5, 1.0)] };
    let volume = |sc: &SubCell, r: [f64; 2], x: [f64; 2]| -> Result<PointTerms, EstimatorError> {
        let u = fields.u_low.eval(m, &sc.maps[0], r);
        let uk = fields.u_high.eval(m, &sc.maps[0], r);
        let ur = fields.u_high.eval_combination(&uright, &sc.maps, &slot, r);
        let z = fields.z_low.eval(m, &sc.maps[0], r);
        let zn = if m < last { fields.z_low.eval(m + 1, &sc.maps[2], r) } else { Val::default() };
        let pk_b = Val::lin(1.0, &ur, -1.0, &uk);
        let ph = Val::lin(1.0, &uk, -1.0, &u);
        let (_, dr) = problem.reaction_terms(&u.v)?;
        let zero = Val::default();
        let sets = [(&zero, &pk_b), (&ph, &ph)];
        let mut dens = Vec::with_capacity(jtimes.len());
        if goal.has_volume() {
            for &(tau, wt) in &jtimes {
                dens.push((tau, wt, goal.volume_density(problem, t0 + tau * k, x, &u.v)?));
            }
        }
        let mut out = [(0.0, [0.0; 2]); 2];
        for (s, (pa, pb)) in sets.iter().enumerate() {
            let pbar = Val::lin(0.5, pa, 0.5, pb);
            let mut a = 0.0;
            let mut b = [0.0; 2];
            for &(tau, wt, d) in &dens {
                for c in 0..nc {
                    a += wt * k * d[c] * ((1.0 - tau) * pa.v[c] + tau * pb.v[c]);
                }
            }
            for c in 0..nc {
                let dc = problem.diffusion[c];
                a -= k * dc * (pbar.g[c][0] * z.g[c][0] + pbar.g[c][1] * z.g[c][1]);
                for e in 0..nc {
                    a -= k * dr[c][e] * pbar.v[e] * z.v[c];
                }
                a += pb.v[c] * (zn.v[c] - z.v[c]);
                b[0] -= k * dc * pbar.v[c] * z.g[c][0];
                b[1] -= k * dc * pbar.v[c] * z.g[c][1];
            }
            out[s] = (a, b);
        }
        Ok(out)
    };
    let boundary = |sc: &SubCell, r: [f64; 2], _x: [f64; 2], tag: u8| -> Result<[f64; 2], EstimatorError> {
        let kappa: Vec<f64> = (0..nc).map(|c| problem.robin_coeff(tag, c)).collect();
        let gd = if goal.has_boundary() { goal.boundary_density(tag) } else { [0.0; 2] };
        if kappa.iter().all(|v| *v == 0.0) && gd == [0.0; 2] {
            return Ok([0.0; 2]);
        }
        let u = fields.u_low.eval(m, &sc.maps[0], r);
        let uk = fields.u_high.eval(m, &sc.maps[0], r);
        let ur = fields.u_high.eval_combination(&uright, &sc.maps, &slot, r);
        let z = fields.z_low.eval(m, &sc.maps[0], r);
        let mut out = [0.0; 2];
        for c in 0..nc {
            let pk = 0.5 * (ur.v[c] - uk.v[c]);
            let ph = uk.v[c] - u.v[c];
            out[0] += k * (gd[c] - kappa[c] * z.v[c]) * pk;
            out[1] += k * (gd[c] - kappa[c] * z.v[c]) * ph;
        }
        Ok(out)
    };
    localize(pu, &meshes, cfg.n_space, volume, boundary)
}

/// Indicators of one estimator half on one slab.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartIndicators {
    /// Temporal indicator `eta_k^m`.
    pub eta_k: f64,
    /// Spatial indicators `eta_h^{i,m}` per PU vertex.
    pub eta_h: Vec<f64>,
    /// Joint indicators `eta_kh^{i,m}` per PU vertex.
    pub eta_kh: Vec<f64>,
}

impl PartIndicators {
    fn from_localized([tk, th]: [Vec<f64>; 2]) -> Self {
        let eta_k = tk.iter().sum();
        let eta_kh = tk.iter().zip(&th).map(|(a, b)| a + b).collect();
        PartIndicators { eta_k, eta_h: th, eta_kh }
    }

    fn mean(a: &PartIndicators, b: &PartIndicators) -> PartIndicators {
        let avg = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect();
        PartIndicators { eta_k: 0.5 * (a.eta_k + b.eta_k), eta_h: avg(&a.eta_h, &b.eta_h), eta_kh: avg(&a.eta_kh, &b.eta_kh) }
    }

    pub fn eta_h_sum(&self) -> f64 {
        self.eta_h.iter().sum()
    }

    pub fn eta_kh_sum(&self) -> f64 {
        self.eta_kh.iter().sum()
    }
}

/// The two tent families of the cG(1) temporal PU on slab `m`: the part of
/// the tent at `t_{m-1}` (`left`) and at `t_m` (`right`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cg1Indicators {
    pub k_left: f64,
    pub k_right: f64,
    pub h_left: Vec<f64>,
    pub h_right: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlabIndicators {
    pub primal: Option<PartIndicators>,
    pub adjoint: Option<PartIndicators>,
    pub cg1: Option<Cg1Indicators>,
}

/// Indicators of all slabs. `pu_spaces[m]` numbers the PU vertices of slab `m`.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    pub config: EstimatorConfig,
    pub pu_spaces: Vec<Arc<DofMap>>,
    pub slabs: Vec<SlabIndicators>,
}

/// Indicators on every slab (an unset `f_rule` means Gauss-2). Slabs are
/// independent and evaluated in parallel.
pub fn estimate_slabs(
    problem: &ParabolicProblem,
    goal: &GoalDerivative,
    fields: &Fields,
    tmesh: &TemporalMesh,
    cfg: &EstimatorConfig,
) -> Result<IndicatorField, EstimatorError> {
    cfg.validate(problem)?;
    let meshes: Vec<_> = fields.u_low.spaces.iter().map(|s| s.mesh().clone()).collect();
    let pu_spaces = build_spaces(&meshes, 1, 1).map_err(|e| EstimatorError::Solver(e.into()))?;
    let slabs = (0..tmesh.len())
        .into_par_iter()
        .map(|m| -> Result<SlabIndicators, EstimatorError> {
            let pu = &pu_spaces[m];
            let mut out = SlabIndicators::default();
            if cfg.wants_primal() {
                if cfg.pu == PuKind::Cg1 {
                    let [kl, hl] = primal_slab(problem, fields, pu, tmesh, m, cfg, [1.0, 0.0])?;
                    let [kr, hr] = primal_slab(problem, fields, pu, tmesh, m, cfg, [0.0, 1.0])?;
                    let tk: Vec<f64> = kl.iter().zip(&kr).map(|(a, b)| a + b).collect();
                    let th: Vec<f64> = hl.iter().zip(&hr).map(|(a, b)| a + b).collect();
                    out.primal = Some(PartIndicators::from_localized([tk, th]));
                    out.cg1 = Some(Cg1Indicators {
                        k_left: kl.iter().sum(),
                        k_right: kr.iter().sum(),
                        h_left: hl,
                        h_right: hr,
                    });
                } else {
                    out.primal =
                        Some(PartIndicators::from_localized(primal_slab(problem, fields, pu, tmesh, m, cfg, [1.0, 1.0])?));
                }
            }
            if cfg.wants_adjoint() {
                out.adjoint = Some(PartIndicators::from_localized(adjoint_slab(problem, goal, fields, pu, tmesh, m, cfg)?));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IndicatorField { config: *cfg, pu_spaces, slabs })
}

impl IndicatorField {
    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    /// Indicators of the configured estimator part on slab `m`.
    pub fn part(&self, m: usize) -> PartIndicators {
        let s = &self.slabs[m];
        match (&s.primal, &s.adjoint) {
            (Some(p), Some(a)) => PartIndicators::mean(p, a),
            (Some(p), None) => p.clone(),
            (None, Some(a)) => a.clone(),
            (None, None) => PartIndicators::default(),
        }
    }

    /// Global `(eta_k, eta_h)`; `eta = eta_k + eta_h` equals the sum of all
    /// joint indicators.
    pub fn global(&self) -> (f64, f64) {
        let mut ek = 0.0;
        let mut eh = 0.0;
        for m in 0..self.len() {
            let p = self.part(m);
            ek += p.eta_k;
            eh += p.eta_h_sum();
        }
        (ek, eh)
    }

    /// `sum_m sum_i |eta^{i,m}|` for the indicator index.
    pub fn sum_abs(&self) -> f64 {
        (0..self.len())
            .map(|m| {
                let p = self.part(m);
                match self.config.variant {
                    Variant::Joint => p.eta_kh.iter().map(|v| v.abs()).sum::<f64>(),
                    Variant::Split => p.eta_k.abs() + p.eta_h.iter().map(|v| v.abs()).sum::<f64>(),
                }
            })
            .sum()
    }

    /// Per-interval indicators used for temporal marking.
    pub fn temporal(&self) -> Vec<f64> {
        let n = self.len();
        if self.config.pu == PuKind::Cg1 {
            // tent at t_m collects the right part of I_m and the left part of I_{m+1}
            let tents: Vec<f64> = (0..=n)
                .map(|j| {
                    let mut v = 0.0;
                    if j > 0 {
                        v += self.slabs[j - 1].cg1.as_ref().map_or(0.0, |c| c.k_right);
                    }
                    if j < n {
                        v += self.slabs[j].cg1.as_ref().map_or(0.0, |c| c.k_left);
                    }
                    v
                })
                .collect();
            return (0..n).map(|m| tents[m] + tents[m + 1]).collect();
        }
        (0..n)
            .map(|m| {
                let p = self.part(m);
                match self.config.variant {
                    Variant::Split => p.eta_k,
                    Variant::Joint => p.eta_kh_sum(),
                }
            })
            .collect()
    }

    /// Spatial vertex indicators of slab `m` used for marking.
    pub fn spatial_vertices(&self, m: usize) -> Vec<f64> {
        if let (PuKind::Cg1, Some(c)) = (self.config.pu, &self.slabs[m].cg1) {
            let here = &self.pu_spaces[m];
            let mut v: Vec<f64> = c.h_left.iter().zip(&c.h_right).map(|(a, b)| a + b).collect();
            if m > 0 {
                if let Some(p) = &self.slabs[m - 1].cg1 {
                    let t = crate::solver::transfer(&self.pu_spaces[m - 1], &p.h_right, here);
                    v.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
                }
            }
            if m + 1 < self.len() {
                if let Some(n) = &self.slabs[m + 1].cg1 {
                    let t = crate::solver::transfer(&self.pu_spaces[m + 1], &n.h_left, here);
                    v.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
                }
            }
            return v;
        }
        let p = self.part(m);
        match self.config.variant {
            Variant::Split => p.eta_h,
            Variant::Joint => p.eta_kh,
        }
    }

    /// `eta_K = sum_{i in K} eta^{i,m}` for every active cell of slab `m`.
    pub fn element_indicators(&self, m: usize) -> Vec<f64> {
        element_sums(&self.pu_spaces[m], &self.spatial_vertices(m))
    }
}

/// Sum vertex values over the vertices of each cell. Hanging vertices carry
/// no PU function; they contribute the constrained combination of their
/// masters.
pub fn element_sums(pu: &DofMap, vertex: &[f64]) -> Vec<f64> {
    let mut vals = vertex.to_vec();
    for h in pu.hanging_nodes() {
        vals[h.node] = h.masters.iter().map(|&(mst, w)| w * vertex[mst]).sum();
    }
    (0..pu.mesh().n_active())
        .map(|c| pu.cell_nodes(c).iter().map(|&n| vals[n as usize]).sum())
        .collect()
}

/// Global quantities of one estimate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateReport {
    pub eta_k: f64,
    pub eta_h: f64,
    pub eta: f64,
    /// `J(u_kh)`.
    pub j_value: f64,
    /// `J(u) - J(u_kh)` when a reference value is known.
    pub error: Option<f64>,
    /// `eta / error`.
    pub i_eff: Option<f64>,
    /// `|error| / sum |eta^{i,m}|`.
    pub i_ind: Option<f64>,
}

pub fn aggregate(field: &IndicatorField, j_value: f64, reference: Option<f64>) -> EstimateReport {
    let (eta_k, eta_h) = field.global();
    let eta = eta_k + eta_h;
    let error = reference.map(|r| r - j_value);
    let i_eff = error.filter(|e| *e != 0.0).map(|e| eta / e);
    let denom = field.sum_abs();
    let i_ind = error.filter(|_| denom > 0.0).map(|e| e.abs() / denom);
    EstimateReport { eta_k, eta_h, eta, j_value, error, i_eff, i_ind }
}

/// One solve-estimate pass.
#[derive(Clone, Debug)]
pub struct Estimate {
    /// Solution of order `s`.
    pub primal: SpaceTimeSolution,
    /// The Q1 solution whose goal error is estimated: the primal itself for
    /// `s = 1`, a native Q1 solve otherwise.
    pub low: Option<SpaceTimeSolution>,
    pub adjoint: AdjointSolution,
    pub indicators: IndicatorField,
    pub report: EstimateReport,
}

impl Estimate {
    pub fn low_solution(&self) -> &SpaceTimeSolution {
        self.low.as_ref().unwrap_or(&self.primal)
    }
}

/// The Q1 state `i_h^2 u` of a Q2 solution, with slab constraints rebuilt.
pub fn lowered_solution(
    problem: &ParabolicProblem,
    sol: &SpaceTimeSolution,
    tmesh: &TemporalMesh,
) -> Result<SpaceTimeSolution, FeError> {
    let f = SlabField { spaces: sol.spaces.clone(), slabs: sol.slabs.clone() }.interp_down()?;
    let initial = spatial_interp_down(&sol.spaces[0], &sol.initial, &f.spaces[0])?;
    let constraints = (0..f.spaces.len()).map(|m| slab_constraints(problem, &f.spaces[m], tmesh.interval(m).1)).collect();
    Ok(SpaceTimeSolution {
        order: 1,
        spaces: f.spaces,
        constraints,
        initial,
        slabs: f.slabs,
        newton: sol.newton.clone(),
    })
}

/// Primal solve, adjoint solve and indicators on given meshes.
pub fn estimate(
    problem: &ParabolicProblem,
    goal: &Goal,
    slabs: &SlabMeshes,
    tmesh: &TemporalMesh,
    cfg: &EstimatorConfig,
    opts: &SolverOptions,
    reference: Option<f64>,
) -> Result<Estimate, EstimatorError> {
    cfg.validate(problem)?;
    let mut cfg = *cfg;
    cfg.f_rule.get_or_insert(opts.load_rule);
    let cfg = &cfg;
    let primal = solve_primal(problem, slabs, tmesh, cfg.orders.primal, opts)?;
    let (state, low) = if primal.order == 1 {
        (primal.clone(), None)
    } else {
        let state = lowered_solution(problem, &primal, tmesh).map_err(|e| EstimatorError::Solver(e.into()))?;
        let low = solve_primal(problem, slabs, tmesh, 1, opts)?;
        (state, Some(low))
    };
    let j_value = goal.value(problem, tmesh, low.as_ref().unwrap_or(&state))?;
    // The backward tangent of a nonlinear problem is only stable along a
    // trajectory of the same discretization, so a Q2 adjoint is linearized at
    // a Q2 primal solution.
    let high_state = if !problem.is_linear() && cfg.orders.adjoint == 2 {
        Some(if primal.order == 2 { primal.clone() } else { solve_primal(problem, slabs, tmesh, 2, opts)? })
    } else {
        None
    };
    let lin = high_state.as_ref().unwrap_or(&state);
    let gd = goal.linearize(problem, tmesh, lin)?;
    let adjoint = solve_adjoint(problem, &gd, lin, tmesh, cfg.orders.adjoint)?;
    let fields = Fields::from_solutions(&primal, &adjoint).map_err(|e| EstimatorError::Solver(e.into()))?;
    let indicators = estimate_slabs(problem, &gd, &fields, tmesh, cfg)?;
    let report = aggregate(&indicators, j_value, reference);
    Ok(Estimate { primal, low, adjoint, indicators, report })
}
