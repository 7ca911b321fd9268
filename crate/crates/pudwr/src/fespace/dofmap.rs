//! Lagrange node numbering on a quadtree mesh.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::constraints::{ConstraintKind, ConstraintSet};
use super::shape::{lagrange_1d, n_local, shape_all, side_nodes};
use crate::error::FeError;
use crate::mesh::{SpatialMesh, MAX_LEVEL};

/// Node-level hanging constraint: `node = sum w * master`.
#[derive(Clone, Debug)]
pub struct HangingNode {
    pub node: usize,
    pub masters: Vec<(usize, f64)>,
}

/// Global numbering of Q_s Lagrange nodes; dof = node * ncomp + component.
#[derive(Debug)]
pub struct DofMap {
    mesh: Arc<SpatialMesh>,
    order: usize,
    ncomp: usize,
    cell_nodes: Vec<u32>,
    lattice: Vec<(u64, u64)>,
    lookup: HashMap<(u64, u64), u32>,
    hanging: Vec<HangingNode>,
    boundary: Vec<(u32, u8)>,
}

impl DofMap {
    pub fn new(mesh: Arc<SpatialMesh>, order: usize, ncomp: usize) -> Result<Self, FeError> {
        if !(1..=2).contains(&order) {
            return Err(FeError::UnsupportedOrder(order));
        }
        let nl = n_local(order);
        let mut cell_nodes = Vec::with_capacity(mesh.n_active() * nl);
        let mut lattice = Vec::new();
        let mut lookup = HashMap::new();
        for cell in 0..mesh.n_active() {
            let key = mesh.cell_key(cell);
            debug_assert!(key.level < MAX_LEVEL);
            let (x0, y0) = key.lattice_origin();
            let step = key.span() / order as u64;
            for b in 0..=order as u64 {
                for a in 0..=order as u64 {
                    let p = (x0 + a * step, y0 + b * step);
                    let id = *lookup.entry(p).or_insert_with(|| {
                        lattice.push(p);
                        (lattice.len() - 1) as u32
                    });
                    cell_nodes.push(id);
                }
            }
        }
        let mut dm = DofMap { mesh, order, ncomp, cell_nodes, lattice, lookup, hanging: Vec::new(), boundary: Vec::new() };
        dm.find_hanging()?;
        let mut bset = BTreeSet::new();
        for f in dm.mesh.boundary_faces() {
            for ln in side_nodes(order, f.side) {
                bset.insert((dm.cell_nodes(f.cell)[ln], f.tag));
            }
        }
        dm.boundary = bset.into_iter().collect();
        Ok(dm)
    }

    fn find_hanging(&mut self) -> Result<(), FeError> {
        let s = self.order;
        let mut found: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        let mut order_seen = Vec::new();
        for cell in 0..self.mesh.n_active() {
            let level = self.mesh.cell_level(cell);
            for side in 0..4 {
                let Some(nb) = self.mesh.neighbor(cell, side) else { continue };
                if !nb.leaf || nb.key.level + 1 != level {
                    continue;
                }
                let coarse = nb.active.unwrap();
                let opp = side ^ 1;
                let cnodes: Vec<usize> =
                    side_nodes(s, opp).iter().map(|&l| self.cell_nodes(coarse)[l] as usize).collect();
                // coordinate along the side (y for vertical sides, x otherwise)
                let along = |p: (u64, u64)| if side < 2 { p.1 } else { p.0 };
                let (cx0, cy0) = nb.key.lattice_origin();
                let c_start = if side < 2 { cy0 } else { cx0 };
                let c_span = nb.key.span() as f64;
                for ln in side_nodes(s, side) {
                    let node = self.cell_nodes(cell)[ln] as usize;
                    if cnodes.contains(&node) {
                        continue;
                    }
                    let tau = (along(self.lattice[node]) - c_start) as f64 / c_span;
                    let masters: Vec<(usize, f64)> =
                        (0..=s).map(|a| (cnodes[a], lagrange_1d(s, a, tau).0)).filter(|m| m.1 != 0.0).collect();
                    if let std::collections::hash_map::Entry::Vacant(e) = found.entry(node) {
                        e.insert(masters);
                        order_seen.push(node);
                    }
                }
            }
        }
        // resolve chains through a temporary constraint set
        let mut cs = ConstraintSet::new(self.n_nodes());
        for &n in &order_seen {
            cs.add_line(n, found[&n].clone(), 0.0, ConstraintKind::Hanging);
        }
        cs.close()?;
        self.hanging = cs.lines().iter().map(|l| HangingNode { node: l.dof, masters: l.entries.clone() }).collect();
        Ok(())
    }

    pub fn mesh(&self) -> &Arc<SpatialMesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn n_nodes(&self) -> usize {
        self.lattice.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.lattice.len() * self.ncomp
    }

    pub fn nodes_per_cell(&self) -> usize {
        n_local(self.order)
    }

    #[inline]
    pub fn cell_nodes(&self, cell: usize) -> &[u32] {
        let n = n_local(self.order);
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    pub fn node_lattice(&self, node: usize) -> (u64, u64) {
        self.lattice[node]
    }

    pub fn node_at(&self, p: (u64, u64)) -> Option<usize> {
        self.lookup.get(&p).map(|&n| n as usize)
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        let (x, y) = self.lattice[node];
        self.mesh.lattice_to_point(x, y)
    }

    pub fn hanging_nodes(&self) -> &[HangingNode] {
        &self.hanging
    }

    /// `(node, tag)` pairs for nodes on boundary faces.
    pub fn boundary_nodes(&self) -> &[(u32, u8)] {
        &self.boundary
    }

    /// Constraint set for the given Dirichlet specification. Dirichlet lines
    /// take precedence over hanging lines at the same dof.
    pub fn constraints(
        &self,
        is_dirichlet: impl Fn(usize, u8) -> bool,
        value: impl Fn(usize, [f64; 2]) -> f64,
    ) -> ConstraintSet {
        let nc = self.ncomp;
        let mut cs = ConstraintSet::new(self.n_dofs());
        for &(node, tag) in &self.boundary {
            for c in 0..nc {
                if is_dirichlet(c, tag) {
                    let dof = node as usize * nc + c;
                    let g = value(c, self.node_position(node as usize));
                    cs.add_line(dof, Vec::new(), g, ConstraintKind::Dirichlet);
                }
            }
        }
        for h in &self.hanging {
            for c in 0..nc {
                let entries = h.masters.iter().map(|&(m, w)| (m * nc + c, w)).collect();
                cs.add_line(h.node * nc + c, entries, 0.0, ConstraintKind::Hanging);
            }
        }
        cs.close().expect("hanging constraints are acyclic by construction");
        cs
    }

    /// Constraints containing only the hanging-node lines.
    pub fn hanging_constraints(&self) -> ConstraintSet {
        self.constraints(|_, _| false, |_, _| 0.0)
    }

    /// Overwrite hanging-node entries of a dof vector with their constrained values.
    pub fn apply_hanging(&self, u: &mut [f64]) {
        let nc = self.ncomp;
        for h in &self.hanging {
            for c in 0..nc {
                u[h.node * nc + c] = h.masters.iter().map(|&(m, w)| w * u[m * nc + c]).sum();
            }
        }
    }

    /// Nodal interpolant of `f(component, x)`, continuous across hanging edges.
    pub fn interpolate(&self, f: impl Fn(usize, [f64; 2]) -> f64) -> Vec<f64> {
        let nc = self.ncomp;
        let mut u = vec![0.0; self.n_dofs()];
        for n in 0..self.n_nodes() {
            let p = self.node_position(n);
            for c in 0..nc {
                u[n * nc + c] = f(c, p);
            }
        }
        self.apply_hanging(&mut u);
        u
    }

    /// Values and physical gradients of all components at reference point `r` of `cell`.
    pub fn eval(&self, u: &[f64], cell: usize, r: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let s = self.order;
        let nl = n_local(s);
        let mut sv = [0.0; 9];
        let mut sg = [[0.0; 2]; 9];
        shape_all(s, r, &mut sv, &mut sg);
        let (_, size) = self.mesh.cell_bounds(cell);
        let nc = self.ncomp;
        for c in 0..nc {
            vals[c] = 0.0;
            grads[c] = [0.0; 2];
        }
        let nodes = self.cell_nodes(cell);
        for k in 0..nl {
            let base = nodes[k] as usize * nc;
            for c in 0..nc {
                let v = u[base + c];
                vals[c] += v * sv[k];
                grads[c][0] += v * sg[k][0] / size[0];
                grads[c][1] += v * sg[k][1] / size[1];
            }
        }
    }

    /// Point value at a physical location (tree descent from the coarse grid).
    pub fn eval_at(&self, u: &[f64], p: [f64; 2], vals: &mut [f64]) -> Result<(), crate::error::MeshError> {
        let (cell, r) = self.mesh.locate_point(p)?;
        let mut g = [[0.0; 2]; 2];
        let mut v = [0.0; 2];
        self.eval(u, cell, r, &mut v, &mut g);
        vals[..self.ncomp].copy_from_slice(&v[..self.ncomp]);
        Ok(())
    }
}

/// Build a space with Dirichlet constraints: `is_dirichlet(component, tag)`
/// selects constrained boundary nodes, `value(component, x)` their data.
pub fn build_space(
    mesh: Arc<SpatialMesh>,
    order: usize,
    ncomp: usize,
    is_dirichlet: impl Fn(usize, u8) -> bool,
    value: impl Fn(usize, [f64; 2]) -> f64,
) -> Result<(Arc<DofMap>, ConstraintSet), FeError> {
    let dm = Arc::new(DofMap::new(mesh, order, ncomp)?);
    let cs = dm.constraints(is_dirichlet, value);
    Ok((dm, cs))
}
