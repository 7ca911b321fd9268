//! Common refinement of several slab meshes restricted to one cell.
//!
//! All slab meshes descend from the same coarse grid, so the common
//! refinement of a cell is found by walking the lattice: a sub-cell is split
//! further as long as any mesh is finer there.

use crate::mesh::{CellKey, Side, SpatialMesh};

/// Affine map from sub-cell reference coordinates into a mesh's leaf.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeafMap {
    pub cell: usize,
    pub offset: [f64; 2],
    pub scale: f64,
}

impl LeafMap {
    #[inline]
    pub fn map(&self, r: [f64; 2]) -> [f64; 2] {
        [self.offset[0] + self.scale * r[0], self.offset[1] + self.scale * r[1]]
    }
}

pub const MAX_MESHES: usize = 4;

#[derive(Clone, Debug)]
pub struct SubCell {
    pub key: CellKey,
    pub lo: [f64; 2],
    pub size: [f64; 2],
    /// Bit `s` set when side `s` lies on the domain boundary.
    pub boundary: u8,
    pub maps: [LeafMap; MAX_MESHES],
}

fn leaf_map(leaf: CellKey, region: CellKey, cell: usize) -> LeafMap {
    let d = region.level - leaf.level;
    let scale = 0.5f64.powi(d as i32);
    LeafMap {
        cell,
        offset: [
            (region.i - (leaf.i << d)) as f64 * scale,
            (region.j - (leaf.j << d)) as f64 * scale,
        ],
        scale,
    }
}

/// Sub-cells of active cell `cell` of `meshes[0]` in the common refinement
/// of all `meshes`.
pub fn overlay(meshes: &[&SpatialMesh], cell: usize, out: &mut Vec<SubCell>) {
    assert!(!meshes.is_empty() && meshes.len() <= MAX_MESHES);
    out.clear();
    let base = meshes[0];
    let key = base.cell_key(cell);
    let mut bsides = 0u8;
    for f in base.boundary_faces().iter().filter(|f| f.cell == cell) {
        bsides |= 1 << f.side;
    }
    let mut stack = vec![key];
    while let Some(k) = stack.pop() {
        let mut maps = [LeafMap::default(); MAX_MESHES];
        maps[0] = leaf_map(key, k, cell);
        let mut split = false;
        for (j, m) in meshes.iter().enumerate().skip(1) {
            let l = m.lookup(k).expect("meshes share the coarse grid");
            if !l.leaf {
                split = true;
                break;
            }
            maps[j] = leaf_map(l.key, k, l.active.unwrap());
        }
        if split {
            for c in (0..4).rev() {
                stack.push(k.child(c));
            }
            continue;
        }
        let d = k.level - key.level;
        let (ri, rj) = (k.i - (key.i << d), k.j - (key.j << d));
        let last = (1u32 << d) - 1;
        let mut boundary = 0u8;
        let touches = [ri == 0, ri == last, rj == 0, rj == last];
        for s in 0..4 {
            if bsides & (1 << s) != 0 && touches[s] {
                boundary |= 1 << s;
            }
        }
        let (lo, size) = base.key_bounds(k);
        out.push(SubCell { key: k, lo, size, boundary, maps });
    }
}

/// Reference-coordinate parametrization of a side: point at `s` in [0, 1].
#[inline]
pub fn side_point(side: Side, s: f64) -> [f64; 2] {
    match side {
        0 => [0.0, s],
        1 => [1.0, s],
        2 => [s, 0.0],
        _ => [s, 1.0],
    }
}

/// Midpoint of a side of a sub-cell in physical coordinates.
pub fn side_midpoint(lo: [f64; 2], size: [f64; 2], side: Side) -> [f64; 2] {
    let r = side_point(side, 0.5);
    [lo[0] + r[0] * size[0], lo[1] + r[1] * size[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CoarseGrid;

    #[test]
    fn overlay_of_identical_meshes_is_the_cell() {
        let m = SpatialMesh::new(CoarseGrid::unit_square(2));
        let mut out = Vec::new();
        overlay(&[&m, &m], 3, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].maps[1].cell, 3);
        assert_eq!(out[0].boundary, 0b1010);
    }

    #[test]
    fn overlay_follows_finer_mesh() {
        let coarse = SpatialMesh::new(CoarseGrid::unit_square(1));
        let fine = coarse.refine(&[0]).refine(&[0]);
        let mut out = Vec::new();
        overlay(&[&coarse, &fine], 0, &mut out);
        assert_eq!(out.len(), fine.n_active());
        let area: f64 = out.iter().map(|s| s.size[0] * s.size[1]).sum();
        assert!((area - 1.0).abs() < 1e-15);
        for s in &out {
            let p = [s.lo[0] + 0.3 * s.size[0], s.lo[1] + 0.6 * s.size[1]];
            let r0 = s.maps[0].map([0.3, 0.6]);
            assert!((r0[0] - p[0]).abs() < 1e-15 && (r0[1] - p[1]).abs() < 1e-15);
            let r1 = s.maps[1].map([0.3, 0.6]);
            let q = fine.map_to_physical(s.maps[1].cell, r1);
            assert!((q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15);
        }
        overlay(&[&fine, &coarse], 0, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].maps[1].scale, 0.25);
    }
}
