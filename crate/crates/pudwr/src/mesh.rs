//! Temporal partitions and quadtree quadrilateral meshes.
//!
//! Spatial meshes live on a structured coarse grid of axis-aligned
//! rectangles (some of which may be masked out). Every cell is addressed by
//! integer lattice coordinates `(level, i, j)`, so cells of different slab
//! meshes descended from the same grid can be compared without geometry.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::MeshError;

/// Finest lattice resolution used for node keys. Cells may go down to
/// `MAX_LEVEL - 1` so that Q2 nodes still land on lattice points.
pub const MAX_LEVEL: u8 = 20;

const NONE: u32 = u32::MAX;

/// Partition of `(0, T)` into intervals `I_m = (t_{m-1}, t_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalMesh {
    nodes: Vec<f64>,
}

impl TemporalMesh {
    pub fn uniform(t_end: f64, m: usize) -> Self {
        assert!(m > 0 && t_end > 0.0);
        let nodes = (0..=m).map(|i| t_end * i as f64 / m as f64).collect();
        TemporalMesh { nodes }
    }

    /// Build from explicit nodes `t_0 < t_1 < ... < t_M`.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, MeshError> {
        if nodes.len() < 2 {
            return Err(MeshError::InvalidTemporal("need at least one interval".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MeshError::InvalidTemporal("nodes must increase strictly".into()));
        }
        Ok(TemporalMesh { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Interval `m` (zero based) as `(t_start, t_end)`.
    pub fn interval(&self, m: usize) -> (f64, f64) {
        (self.nodes[m], self.nodes[m + 1])
    }

    pub fn k(&self, m: usize) -> f64 {
        self.nodes[m + 1] - self.nodes[m]
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0]
    }

    /// Bisect every marked interval (zero-based indices) at its midpoint.
    pub fn refine(&self, marks: &BTreeSet<usize>) -> TemporalMesh {
        let mut nodes = Vec::with_capacity(self.nodes.len() + marks.len());
        for m in 0..self.len() {
            let (a, b) = self.interval(m);
            nodes.push(a);
            if marks.contains(&m) {
                nodes.push(0.5 * (a + b));
            }
        }
        nodes.push(self.t_end());
        TemporalMesh { nodes }
    }
}

/// Which side of a cell: 0 = x-, 1 = x+, 2 = y-, 3 = y+.
pub type Side = usize;

/// Boundary classifier: receives the face midpoint and the side of the
/// owning cell, returns a boundary tag.
pub type TagFn = fn([f64; 2], Side) -> u8;

fn tag_zero(_: [f64; 2], _: Side) -> u8 {
    0
}

/// Structured grid of coarse rectangles with an activity mask.
#[derive(Clone, Debug)]
pub struct CoarseGrid {
    pub origin: [f64; 2],
    pub h: [f64; 2],
    pub nx: u32,
    pub ny: u32,
    pub active: Vec<bool>,
    pub tag: TagFn,
}

impl CoarseGrid {
    pub fn rectangle(origin: [f64; 2], size: [f64; 2], nx: u32, ny: u32) -> Self {
        CoarseGrid {
            origin,
            h: [size[0] / nx as f64, size[1] / ny as f64],
            nx,
            ny,
            active: vec![true; (nx * ny) as usize],
            tag: tag_zero,
        }
    }

    pub fn unit_square(n: u32) -> Self {
        Self::rectangle([0.0, 0.0], [1.0, 1.0], n, n)
    }

    pub fn with_tags(mut self, tag: TagFn) -> Self {
        self.tag = tag;
        self
    }

    /// Deactivate every coarse cell whose center lies inside `[lo, hi]`.
    pub fn remove_box(mut self, lo: [f64; 2], hi: [f64; 2]) -> Self {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = [
                    self.origin[0] + (i as f64 + 0.5) * self.h[0],
                    self.origin[1] + (j as f64 + 0.5) * self.h[1],
                ];
                if c[0] > lo[0] && c[0] < hi[0] && c[1] > lo[1] && c[1] < hi[1] {
                    self.active[(j * self.nx + i) as usize] = false;
                }
            }
        }
        self
    }

    fn is_active(&self, ci: i64, cj: i64) -> bool {
        ci >= 0
            && cj >= 0
            && ci < self.nx as i64
            && cj < self.ny as i64
            && self.active[(cj as u32 * self.nx + ci as u32) as usize]
    }

    pub fn area(&self) -> f64 {
        self.active.iter().filter(|a| **a).count() as f64 * self.h[0] * self.h[1]
    }
}

/// Lattice address of a quadtree cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub level: u8,
    pub i: u32,
    pub j: u32,
}

impl CellKey {
    pub fn child(self, c: usize) -> CellKey {
        CellKey {
            level: self.level + 1,
            i: 2 * self.i + (c & 1) as u32,
            j: 2 * self.j + (c >> 1) as u32,
        }
    }

    /// Size of this cell in lattice units.
    pub fn span(self) -> u64 {
        1u64 << (MAX_LEVEL - self.level)
    }

    pub fn lattice_origin(self) -> (u64, u64) {
        (self.i as u64 * self.span(), self.j as u64 * self.span())
    }

    /// Does `self` contain (or equal) `other`?
    pub fn contains(self, other: CellKey) -> bool {
        if other.level < self.level {
            return false;
        }
        let d = other.level - self.level;
        other.i >> d == self.i && other.j >> d == self.j
    }
}

#[derive(Clone, Debug)]
struct TreeNode {
    key: CellKey,
    parent: u32,
    first_child: u32,
}

/// A boundary face of an active cell.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    pub tag: u8,
}

/// One-irregular quadtree forest over a [`CoarseGrid`].
#[derive(Clone, Debug)]
pub struct SpatialMesh {
    grid: Arc<CoarseGrid>,
    nodes: Vec<TreeNode>,
    roots: Vec<u32>,
    active: Vec<u32>,
    active_of: Vec<u32>,
    patch_mode: bool,
    boundary: Vec<BoundaryFace>,
}

impl SpatialMesh {
    /// Mesh whose active cells are exactly the coarse cells.
    pub fn new(grid: CoarseGrid) -> Self {
        let grid = Arc::new(grid);
        let mut nodes = Vec::new();
        let mut roots = vec![NONE; (grid.nx * grid.ny) as usize];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = (j * grid.nx + i) as usize;
                if grid.active[idx] {
                    roots[idx] = nodes.len() as u32;
                    nodes.push(TreeNode {
                        key: CellKey { level: 0, i, j },
                        parent: NONE,
                        first_child: NONE,
                    });
                }
            }
        }
        let mut mesh = SpatialMesh {
            grid,
            nodes,
            roots,
            active: Vec::new(),
            active_of: Vec::new(),
            patch_mode: false,
            boundary: Vec::new(),
        };
        mesh.rebuild();
        mesh
    }

    /// Coarse grid refined once globally, so that every active cell belongs
    /// to a 2x2 sibling patch. Later refinements keep patches intact.
    pub fn patched(grid: CoarseGrid) -> Self {
        let mut mesh = Self::new(grid).refine_all();
        mesh.patch_mode = true;
        mesh
    }

    pub fn grid(&self) -> &CoarseGrid {
        &self.grid
    }

    pub fn is_patch_structured(&self) -> bool {
        self.patch_mode
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn cell_key(&self, cell: usize) -> CellKey {
        self.nodes[self.active[cell] as usize].key
    }

    pub fn cell_level(&self, cell: usize) -> u8 {
        self.cell_key(cell).level
    }

    pub fn max_level(&self) -> u8 {
        self.active.iter().map(|&n| self.nodes[n as usize].key.level).max().unwrap_or(0)
    }

    /// Physical lower-left corner and size of a lattice cell.
    pub fn key_bounds(&self, key: CellKey) -> ([f64; 2], [f64; 2]) {
        let s = 0.5f64.powi(key.level as i32);
        let size = [self.grid.h[0] * s, self.grid.h[1] * s];
        let lo = [
            self.grid.origin[0] + key.i as f64 * size[0],
            self.grid.origin[1] + key.j as f64 * size[1],
        ];
        (lo, size)
    }

    pub fn cell_bounds(&self, cell: usize) -> ([f64; 2], [f64; 2]) {
        self.key_bounds(self.cell_key(cell))
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let (_, s) = self.cell_bounds(cell);
        s[0] * s[1]
    }

    pub fn area(&self) -> f64 {
        (0..self.n_active()).map(|c| self.cell_area(c)).sum()
    }

    /// Physical position of a lattice point.
    pub fn lattice_to_point(&self, x: u64, y: u64) -> [f64; 2] {
        let scale = 0.5f64.powi(MAX_LEVEL as i32);
        [
            self.grid.origin[0] + x as f64 * scale * self.grid.h[0],
            self.grid.origin[1] + y as f64 * scale * self.grid.h[1],
        ]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    /// Map reference coordinates of a cell to physical coordinates.
    pub fn map_to_physical(&self, cell: usize, r: [f64; 2]) -> [f64; 2] {
        let (lo, s) = self.cell_bounds(cell);
        [lo[0] + r[0] * s[0], lo[1] + r[1] * s[1]]
    }

    fn root_of(&self, key: CellKey) -> Option<u32> {
        let ci = key.i >> key.level;
        let cj = key.j >> key.level;
        if ci >= self.grid.nx || cj >= self.grid.ny {
            return None;
        }
        let r = self.roots[(cj * self.grid.nx + ci) as usize];
        (r != NONE).then_some(r)
    }

    /// Deepest tree node with level <= `key.level` that contains `key`.
    fn find_node(&self, key: CellKey) -> Option<u32> {
        let mut n = self.root_of(key)?;
        loop {
            let node = &self.nodes[n as usize];
            if node.first_child == NONE || node.key.level >= key.level {
                return Some(n);
            }
            let d = key.level - node.key.level - 1;
            let c = (((key.j >> d) & 1) << 1 | ((key.i >> d) & 1)) as u32;
            n = node.first_child + c;
        }
    }

    /// Tree lookup by key: returns `(level, is_leaf, active id)` of the
    /// deepest node at or above `key`, or `None` outside the domain.
    pub fn lookup(&self, key: CellKey) -> Option<Lookup> {
        let n = self.find_node(key)?;
        let node = &self.nodes[n as usize];
        Some(Lookup {
            key: node.key,
            leaf: node.first_child == NONE,
            active: if node.first_child == NONE { Some(self.active_of[n as usize] as usize) } else { None },
        })
    }

    /// Active cell that covers the lattice cell `key` (which must not be
    /// finer than the mesh there), or `None` if the mesh is finer.
    pub fn leaf_containing(&self, key: CellKey) -> Option<usize> {
        let l = self.lookup(key)?;
        l.active
    }

    fn neighbor_key(&self, key: CellKey, side: Side) -> Option<CellKey> {
        let (di, dj): (i64, i64) = match side {
            0 => (-1, 0),
            1 => (1, 0),
            2 => (0, -1),
            _ => (0, 1),
        };
        let ni = key.i as i64 + di;
        let nj = key.j as i64 + dj;
        if ni < 0 || nj < 0 {
            return None;
        }
        let nk = CellKey { level: key.level, i: ni as u32, j: nj as u32 };
        if !self.grid.is_active((nk.i >> nk.level) as i64, (nk.j >> nk.level) as i64) {
            return None;
        }
        Some(nk)
    }

    /// Neighbor across `side`: `None` on the boundary, otherwise the
    /// deepest node at the cell's level covering the adjacent position.
    pub fn neighbor(&self, cell: usize, side: Side) -> Option<Lookup> {
        let key = self.cell_key(cell);
        self.neighbor_key(key, side).and_then(|nk| self.lookup(nk))
    }

    fn split(&mut self, n: u32) {
        let key = self.nodes[n as usize].key;
        assert!(key.level + 1 < MAX_LEVEL, "refinement depth exhausted");
        let first = self.nodes.len() as u32;
        for c in 0..4 {
            self.nodes.push(TreeNode { key: key.child(c), parent: n, first_child: NONE });
        }
        self.nodes[n as usize].first_child = first;
    }

    fn is_leaf(&self, n: u32) -> bool {
        self.nodes[n as usize].first_child == NONE
    }

    /// In patch mode refinement acts on whole sibling groups.
    fn refinement_unit(&self, n: u32, out: &mut BTreeSet<u32>) {
        let parent = self.nodes[n as usize].parent;
        if self.patch_mode && parent != NONE {
            let first = self.nodes[parent as usize].first_child;
            for c in 0..4 {
                if self.is_leaf(first + c) {
                    out.insert(first + c);
                }
            }
        } else if self.is_leaf(n) {
            out.insert(n);
        }
    }

    fn rebuild(&mut self) {
        self.active.clear();
        self.active_of = vec![NONE; self.nodes.len()];
        let mut stack = Vec::new();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let r = self.roots[(j * self.grid.nx + i) as usize];
                if r == NONE {
                    continue;
                }
                stack.push(r);
                while let Some(n) = stack.pop() {
                    let fc = self.nodes[n as usize].first_child;
                    if fc == NONE {
                        self.active_of[n as usize] = self.active.len() as u32;
                        self.active.push(n);
                    } else {
                        for c in (0..4).rev() {
                            stack.push(fc + c);
                        }
                    }
                }
            }
        }
        self.boundary.clear();
        for cell in 0..self.active.len() {
            let key = self.cell_key(cell);
            for side in 0..4 {
                if self.neighbor_key(key, side).is_none() {
                    let (lo, s) = self.key_bounds(key);
                    let mid = match side {
                        0 => [lo[0], lo[1] + 0.5 * s[1]],
                        1 => [lo[0] + s[0], lo[1] + 0.5 * s[1]],
                        2 => [lo[0] + 0.5 * s[0], lo[1]],
                        _ => [lo[0] + 0.5 * s[0], lo[1] + s[1]],
                    };
                    let tag = (self.grid.tag)(mid, side);
                    self.boundary.push(BoundaryFace { cell, side, tag });
                }
            }
        }
    }

    pub fn refine_all(&self) -> SpatialMesh {
        let marks: Vec<usize> = (0..self.n_active()).collect();
        self.refine(&marks)
    }

    /// Refine the marked active cells, then close the mesh so that
    /// edge-adjacent cells differ by at most one level.
    pub fn refine(&self, marks: &[usize]) -> SpatialMesh {
        let mut mesh = self.clone();
        let mut todo = BTreeSet::new();
        for &c in marks {
            let n = self.active[c];
            mesh.refinement_unit(n, &mut todo);
        }
        if todo.is_empty() {
            return mesh;
        }
        while !todo.is_empty() {
            for &n in &todo {
                if mesh.is_leaf(n) {
                    mesh.split(n);
                }
            }
            todo.clear();
            let leaves: Vec<u32> =
                (0..mesh.nodes.len() as u32).filter(|&n| mesh.is_leaf(n)).collect();
            for n in leaves {
                let key = mesh.nodes[n as usize].key;
                if key.level < 2 {
                    continue;
                }
                for side in 0..4 {
                    if let Some(nk) = mesh.neighbor_key(key, side) {
                        let m = mesh.find_node(nk).unwrap();
                        if mesh.nodes[m as usize].key.level + 1 < key.level {
                            mesh.refinement_unit(m, &mut todo);
                        }
                    }
                }
            }
        }
        mesh.rebuild();
        mesh
    }

    /// Maximum level jump across any edge (1 for a one-irregular mesh with
    /// local refinement, 0 for a uniform one).
    pub fn max_level_jump(&self) -> u8 {
        let mut worst = 0;
        for cell in 0..self.n_active() {
            let key = self.cell_key(cell);
            for side in 0..4 {
                if let Some(nk) = self.neighbor_key(key, side) {
                    let l = self.lookup(nk).unwrap();
                    if l.leaf {
                        worst = worst.max(key.level - l.key.level);
                    }
                }
            }
        }
        worst
    }

    /// Find the active cell containing `p` and the reference coordinates.
    pub fn locate_point(&self, p: [f64; 2]) -> Result<(usize, [f64; 2]), MeshError> {
        let g = &*self.grid;
        let fx = (p[0] - g.origin[0]) / g.h[0];
        let fy = (p[1] - g.origin[1]) / g.h[1];
        let tol = 1e-12;
        if !(fx >= -tol && fy >= -tol && fx <= g.nx as f64 + tol && fy <= g.ny as f64 + tol) {
            return Err(MeshError::OutsideDomain(p));
        }
        let cands = |f: f64, n: u32| -> Vec<i64> {
            let base = f.floor() as i64;
            let mut v = vec![base.clamp(0, n as i64 - 1)];
            if (f - f.round()).abs() <= tol {
                let r = f.round() as i64;
                for c in [r - 1, r] {
                    let c = c.clamp(0, n as i64 - 1);
                    if !v.contains(&c) {
                        v.push(c);
                    }
                }
            }
            v
        };
        for ci in cands(fx, g.nx) {
            for cj in cands(fy, g.ny) {
                if !g.is_active(ci, cj) {
                    continue;
                }
                let mut rx = (fx - ci as f64).clamp(0.0, 1.0);
                let mut ry = (fy - cj as f64).clamp(0.0, 1.0);
                if (fx - ci as f64) < -tol
                    || (fx - ci as f64) > 1.0 + tol
                    || (fy - cj as f64) < -tol
                    || (fy - cj as f64) > 1.0 + tol
                {
                    continue;
                }
                let mut n = self.roots[(cj as u32 * g.nx + ci as u32) as usize];
                loop {
                    let fc = self.nodes[n as usize].first_child;
                    if fc == NONE {
                        return Ok((self.active_of[n as usize] as usize, [rx, ry]));
                    }
                    let dx = (rx >= 0.5) as u32;
                    let dy = (ry >= 0.5) as u32;
                    rx = 2.0 * rx - dx as f64;
                    ry = 2.0 * ry - dy as f64;
                    n = fc + (dy << 1 | dx);
                }
            }
        }
        Err(MeshError::OutsideDomain(p))
    }

    /// Parent keys of sibling patches whose four children are all active.
    pub fn patches(&self) -> Vec<(CellKey, [usize; 4])> {
        let mut out = Vec::new();
        for n in 0..self.nodes.len() {
            let fc = self.nodes[n].first_child;
            if fc == NONE {
                continue;
            }
            if (0..4).all(|c| self.is_leaf(fc + c)) {
                let kids = [0, 1, 2, 3].map(|c| self.active_of[(fc + c) as usize] as usize);
                out.push((self.nodes[n].key, kids));
            }
        }
        out.sort_by_key(|p| p.1[0]);
        out
    }

    /// Sibling group of an active cell (the cell itself if it has no parent).
    pub fn siblings(&self, cell: usize) -> Vec<usize> {
        let n = self.active[cell];
        let parent = self.nodes[n as usize].parent;
        if parent == NONE {
            return vec![cell];
        }
        let fc = self.nodes[parent as usize].first_child;
        (0..4)
            .filter(|&c| self.is_leaf(fc + c))
            .map(|c| self.active_of[(fc + c) as usize] as usize)
            .collect()
    }

    /// Legacy ASCII VTK of the active cells with optional point data given
    /// per cell corner (4 values per cell, ordered as the cell's vertices).
    pub fn write_vtk<W: Write>(
        &self,
        w: &mut W,
        title: &str,
        cell_data: &[(&str, &[f64])],
        corner_data: &[(&str, &[f64])],
    ) -> io::Result<()> {
        let n = self.n_active();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.replace('\n', " "))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", 4 * n)?;
        for c in 0..n {
            let (lo, s) = self.cell_bounds(c);
            for (a, b) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
                writeln!(w, "{} {} 0", lo[0] + a * s[0], lo[1] + b * s[1])?;
            }
        }
        writeln!(w, "CELLS {} {}", n, 5 * n)?;
        for c in 0..n {
            writeln!(w, "4 {} {} {} {}", 4 * c, 4 * c + 1, 4 * c + 2, 4 * c + 3)?;
        }
        writeln!(w, "CELL_TYPES {}", n)?;
        for _ in 0..n {
            writeln!(w, "9")?;
        }
        if !cell_data.is_empty() {
            writeln!(w, "CELL_DATA {}", n)?;
            for (name, vals) in cell_data {
                writeln!(w, "SCALARS {} double 1", name)?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in vals.iter() {
                    writeln!(w, "{}", v)?;
                }
            }
        }
        if !corner_data.is_empty() {
            writeln!(w, "POINT_DATA {}", 4 * n)?;
            for (name, vals) in corner_data {
                writeln!(w, "SCALARS {} double 1", name)?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in vals.iter() {
                    writeln!(w, "{}", v)?;
                }
            }
        }
        Ok(())
    }
}

/// Result of a tree lookup.
#[derive(Clone, Copy, Debug)]
pub struct Lookup {
    pub key: CellKey,
    pub leaf: bool,
    pub active: Option<usize>,
}

/// One spatial mesh per time slab, all descended from the same grid.
#[derive(Clone, Debug)]
pub struct SlabMeshes {
    pub meshes: Vec<Arc<SpatialMesh>>,
}

impl SlabMeshes {
    pub fn uniform(mesh: SpatialMesh, m: usize) -> Self {
        let mesh = Arc::new(mesh);
        SlabMeshes { meshes: vec![mesh; m] }
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn max_cells(&self) -> usize {
        self.meshes.iter().map(|m| m.n_active()).max().unwrap_or(0)
    }

    pub fn total_cells(&self) -> usize {
        self.meshes.iter().map(|m| m.n_active()).sum()
    }

    /// Apply temporal marks: each marked slab is duplicated (two children
    /// share the parent's mesh).
    pub fn split_slabs(&self, marks: &BTreeSet<usize>) -> SlabMeshes {
        let mut meshes = Vec::with_capacity(self.meshes.len() + marks.len());
        for (m, mesh) in self.meshes.iter().enumerate() {
            meshes.push(mesh.clone());
            if marks.contains(&m) {
                meshes.push(mesh.clone());
            }
        }
        SlabMeshes { meshes }
    }
}
