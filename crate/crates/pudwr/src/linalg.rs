//! Sparse matrices, constraint condensation and direct/iterative solvers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::LinalgError;
use crate::fespace::ConstraintSet;

/// Compressed sparse row matrix with sorted, unique column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed; explicit zeros are kept (they carry pattern).
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut t: Vec<(u32, u32, f64)>) -> Self {
        t.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = (u32::MAX, u32::MAX);
        for (r, c, v) in t {
            if (r, c) == last {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = (r, c);
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n_rows, n_cols, row_ptr, cols, vals }
    }

    /// Zero matrix with the union pattern of dense blocks given by index lists.
    pub fn from_blocks<'a>(n: usize, blocks: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for b in blocks {
            for &r in b {
                rows[r].extend(b.iter().map(|&c| c as u32));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr[r + 1] = cols.len();
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { n_rows: n, n_cols: n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n as u32).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let m = if n > 0 { a[0].len() } else { 0 };
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i as u32, j as u32, v));
                }
            }
        }
        Self::from_triplets(n, m, t)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&(c as u32)).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Add to an existing pattern entry; panics if the entry is absent.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        let k = self.cols[a..b].binary_search(&(c as u32)).expect("entry outside sparsity pattern");
        self.vals[a + k] += v;
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn clear_values(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn triplets(&self) -> Vec<(u32, u32, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (c, v) = self.row(r);
            for k in 0..c.len() {
                t.push((r as u32, c[k], v[k]));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (c, v) = self.row(r);
            *yr = c.iter().zip(v).map(|(&c, &v)| v * x[c as usize]).sum();
        }
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        for (r, xr) in x.iter().enumerate() {
            let (c, v) = self.row(r);
            for k in 0..c.len() {
                y[c[k] as usize] += v[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, t)
    }

    /// `self + alpha * other`, patterns merged.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)));
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, t)
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// Pattern-compatible in-place `self = a + alpha * b` (all three share a pattern).
    pub fn set_combination(&mut self, a: &CsrMatrix, alpha: f64, b: &CsrMatrix) {
        debug_assert!(self.same_pattern(a) && self.same_pattern(b));
        for k in 0..self.vals.len() {
            self.vals[k] = a.vals[k] + alpha * b.vals[k];
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, v) in self.triplets() {
            d[r as usize][c as usize] = v;
        }
        d
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// `C^T A C` with unit diagonal on constrained rows (constraint values are
/// not involved: this is the homogeneous part).
pub fn condense_matrix(a: &CsrMatrix, cs: &ConstraintSet) -> CsrMatrix {
    if cs.is_empty() {
        return a.clone();
    }
    let expand = |d: usize| -> Vec<(usize, f64)> {
        match cs.line(d) {
            Some(l) => l.entries.clone(),
            None => vec![(d, 1.0)],
        }
    };
    let mut t = Vec::with_capacity(a.nnz() * 2);
    for r in 0..a.n_rows() {
        let er = expand(r);
        let (cols, vals) = a.row(r);
        for k in 0..cols.len() {
            let c = cols[k] as usize;
            let v = vals[k];
            if !cs.is_constrained(c) && !cs.is_constrained(r) {
                t.push((r as u32, c as u32, v));
                continue;
            }
            let ec = expand(c);
            for &(ri, wr) in &er {
                for &(ci, wc) in &ec {
                    t.push((ri as u32, ci as u32, wr * wc * v));
                }
            }
        }
    }
    for l in cs.lines() {
        t.push((l.dof as u32, l.dof as u32, 1.0));
    }
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), t)
}

/// Matrix, right-hand side and the constraints they are subject to.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: ConstraintSet,
    condensed: bool,
}

impl LinearSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, constraints: ConstraintSet) -> Self {
        LinearSystem { matrix, rhs, constraints, condensed: false }
    }

    pub fn is_condensed(&self) -> bool {
        self.condensed
    }

    /// Eliminate constrained dofs symmetrically. The returned system's
    /// solution, after [`ConstraintSet::distribute`], satisfies every
    /// constraint and the equations on the unconstrained subspace.
    pub fn condense(&self) -> Result<LinearSystem, LinalgError> {
        if self.condensed {
            return Ok(self.clone());
        }
        let mut cs = self.constraints.clone();
        cs.close()?;
        // shift the inhomogeneity into the right-hand side: b - A g
        let mut g = vec![0.0; self.rhs.len()];
        for l in cs.lines() {
            g[l.dof] = l.inhomogeneity;
        }
        let ag = self.matrix.matvec(&g);
        let mut rhs: Vec<f64> = self.rhs.iter().zip(&ag).map(|(b, a)| b - a).collect();
        cs.condense_vector(&mut rhs);
        let matrix = condense_matrix(&self.matrix, &cs);
        Ok(LinearSystem { matrix, rhs, constraints: cs, condensed: true })
    }

    /// Condense, factor, solve and distribute.
    pub fn solve(&self) -> Result<Vec<f64>, LinalgError> {
        let c = self.condense()?;
        let mut x = factor_solve(&c.matrix, &c.rhs)?;
        c.constraints.distribute(&mut x);
        Ok(x)
    }
}

/// Minimum degree ordering of the symmetrized pattern, computed on blocks of
/// `block` consecutive unknowns (pass 1 for scalar problems).
pub fn minimum_degree(a: &CsrMatrix, block: usize) -> Vec<usize> {
    let n = a.n_rows();
    assert!(block >= 1 && n % block == 0);
    let nb = n / block;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nb];
    for r in 0..n {
        let (cols, _) = a.row(r);
        for &c in cols {
            let (br, bc) = (r / block, c as usize / block);
            if br != bc {
                adj[br].push(bc as u32);
                adj[bc].push(br as u32);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let mut heap: BinaryHeap<Reverse<(usize, u32)>> =
        (0..nb).map(|v| Reverse((adj[v].len(), v as u32))).collect();
    let mut done = vec![false; nb];
    let mut order = Vec::with_capacity(nb);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        let v = v as usize;
        if done[v] || adj[v].len() != deg {
            continue;
        }
        done[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            let u = u as usize;
            let cur = std::mem::take(&mut adj[u]);
            merged.clear();
            let (mut i, mut j) = (0, 0);
            while i < cur.len() || j < nbrs.len() {
                let x = if j >= nbrs.len() || (i < cur.len() && cur[i] < nbrs[j]) {
                    i += 1;
                    cur[i - 1]
                } else if i >= cur.len() || nbrs[j] < cur[i] {
                    j += 1;
                    nbrs[j - 1]
                } else {
                    i += 1;
                    j += 1;
                    cur[i - 1]
                };
                if x as usize != u && x as usize != v {
                    merged.push(x);
                }
            }
            adj[u] = merged.clone();
            heap.push(Reverse((adj[u].len(), u as u32)));
        }
    }
    let mut perm = Vec::with_capacity(n);
    for b in order {
        for k in 0..block {
            perm.push(b * block + k);
        }
    }
    perm
}

/// Left-looking sparse LU with threshold partial pivoting, `P A Q = L U`.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<u32>,
    ux: Vec<f64>,
}

/// Pivot threshold relative to the largest candidate in the column; the
/// diagonal is preferred whenever it is within this factor.
const PIVOT_TOL: f64 = 0.1;

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinalgError> {
        let q = minimum_degree(a, 1);
        Self::factor_with_order(a, q)
    }

    pub fn factor_with_order(a: &CsrMatrix, q: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.n_rows();
        if a.n_cols() != n || q.len() != n {
            return Err(LinalgError::Dimension(format!("{}x{} matrix, order {}", n, a.n_cols(), q.len())));
        }
        // column access to A
        let at = a.transpose();
        let amax = a.max_abs();
        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let mut li: Vec<u32> = Vec::with_capacity(4 * a.nnz());
        let mut lx: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        let mut ui: Vec<u32> = Vec::with_capacity(4 * a.nnz());
        let mut ux: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];
            let (bi, bx) = at.row(col);
            // reach: DFS in the graph of L from the pattern of A(:, col)
            let mut top = n;
            for &b in bi {
                let b = b as usize;
                if mark[b] == k {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = b;
                while head != usize::MAX {
                    let j = stack[head];
                    let jn = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        pstack[head] = if jn == UNSET { 0 } else { lp[jn] };
                    }
                    let mut done = true;
                    if jn != UNSET {
                        let end = lp[jn + 1];
                        let mut p = pstack[head];
                        while p < end {
                            let i = li[p] as usize;
                            p += 1;
                            if mark[i] != k {
                                pstack[head] = p;
                                head += 1;
                                stack[head] = i;
                                done = false;
                                break;
                            }
                        }
                        if done {
                            pstack[head] = end;
                        }
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        head = head.wrapping_sub(1);
                    }
                }
            }
            // numeric triangular solve
            for &i in &xi[top..n] {
                x[i] = 0.0;
            }
            for (&b, &v) in bi.iter().zip(bx) {
                x[b as usize] = v;
            }
            for px in top..n {
                let j = xi[px];
                let jn = pinv[j];
                if jn == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in lp[jn] + 1..lp[jn + 1] {
                    x[li[p] as usize] -= lx[p] * xj;
                }
            }
            // pivot selection
            let mut ipiv = UNSET;
            let mut amax_col = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    if x[i].abs() > amax_col {
                        amax_col = x[i].abs();
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i] as u32);
                    ux.push(x[i]);
                }
            }
            if ipiv == UNSET || amax_col <= 1e-14 * amax.max(f64::MIN_POSITIVE) {
                return Err(LinalgError::SingularPivot { column: col, row: if ipiv == UNSET { col } else { ipiv } });
            }
            if pinv[col] == UNSET && mark[col] == k && x[col].abs() >= PIVOT_TOL * amax_col {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k as u32);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv as u32);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    li.push(i as u32);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for r in li.iter_mut() {
            *r = pinv[*r as usize] as u32;
        }
        Ok(SparseLu { n, q, pinv, lp, li, lx, up, ui, ux })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fill of the factors (nonzeros of L plus U).
    pub fn nnz(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p] as usize] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.up[j + 1] - 1;
            y[j] /= self.ux[d];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..d {
                    y[self.ui[p] as usize] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        x
    }
}

/// One-shot sparse direct solve.
pub fn factor_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.n_rows() {
        return Err(LinalgError::Dimension(format!("rhs {} vs matrix {}", b.len(), a.n_rows())));
    }
    Ok(SparseLu::factor(a)?.solve(b))
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    let dinv: Vec<f64> = (0..n).map(|i| 1.0 / a.get(i, i)).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = norm2(&r);
        if rn <= rel_tol * bn {
            return Ok(x);
        }
        if it + 1 == max_iter {
            return Err(LinalgError::NoConvergence { iterations: max_iter, residual: rn / bn });
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NoConvergence { iterations: max_iter, residual: norm2(&r) / bn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::ConstraintKind;

    fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
        let n = d.len();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / b[0];
        dp[0] = d[0] / b[0];
        for i in 1..n {
            let m = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / m;
            dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(factor_solve(&CsrMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn poisson_tridiagonal_matches_thomas() {
        let n = 4;
        let h: f64 = 0.2;
        let s = 1.0 / (h * h);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i as u32, i as u32, 2.0 * s));
            if i > 0 {
                t.push((i as u32, i as u32 - 1, -s));
            }
            if i + 1 < n {
                t.push((i as u32, i as u32 + 1, -s));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b = vec![1.0; n];
        let x = factor_solve(&a, &b).unwrap();
        let lo = vec![-s; n];
        let di = vec![2.0 * s; n];
        let up = vec![-s; n];
        let xt = thomas(&lo, &di, &up, &b);
        for i in 0..n {
            assert!((x[i] - xt[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_pivot_reports_column() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(factor_solve(&a, &[1.0, 1.0]), Err(LinalgError::SingularPivot { .. })));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut t = CsrMatrix::from_dense(&[vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 3.0, 4.0]]).triplets();
        t.push((0, 0, 0.0));
        let a = CsrMatrix::from_triplets(3, 3, t);
        let x = factor_solve(&a, &[2.0, 1.0, 7.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15 && (x[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_dof_constraint_elimination() {
        let a = CsrMatrix::from_dense(&[vec![4.0, -1.0, -1.0], vec![-1.0, 4.0, -1.0], vec![-1.0, -1.0, 4.0]]);
        let mut cs = ConstraintSet::new(3);
        cs.add_line(2, vec![(0, 0.5), (1, 0.5)], 0.0, ConstraintKind::Hanging);
        cs.close().unwrap();
        let sys = LinearSystem::new(a, vec![1.0, 2.0, 3.0], cs.clone());
        let x = sys.solve().unwrap();
        assert!((x[2] - 0.5 * (x[0] + x[1])).abs() < 1e-14);
        // hand elimination: C = [[1,0],[0,1],[.5,.5]], (C^T A C) y = C^T b
        // C^T A C = [[4,-1],[-1,4]], C^T b = [2.5, 3.5]
        let (y0, y1) = (0.9, 1.1);
        assert!((x[0] - y0).abs() < 1e-14 && (x[1] - y1).abs() < 1e-14);
        let c1 = sys.condense().unwrap();
        let c2 = c1.condense().unwrap();
        assert_eq!(c1.matrix, c2.matrix);
        assert_eq!(c1.rhs, c2.rhs);
    }

    #[test]
    fn dirichlet_passthrough() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let mut cs = ConstraintSet::new(2);
        cs.add_line(0, vec![], 5.0, ConstraintKind::Dirichlet);
        cs.close().unwrap();
        let x = LinearSystem::new(a, vec![1.0, 3.0], cs).solve().unwrap();
        assert_eq!(x, vec![5.0, 1.0]);
    }

    #[test]
    fn empty_constraints_leave_system_unchanged() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let sys = LinearSystem::new(a.clone(), vec![1.0, 2.0], ConstraintSet::new(2));
        let c = sys.condense().unwrap();
        assert_eq!(c.matrix, a);
        assert_eq!(c.rhs, vec![1.0, 2.0]);
    }

    #[test]
    fn cg_on_poisson() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i as u32, i as u32, 2.0));
            if i > 0 {
                t.push((i as u32, i as u32 - 1, -1.0));
                t.push((i as u32 - 1, i as u32, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b = vec![1.0; n];
        let x = cg_solve(&a, &b, 1e-13, 200).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) / norm2(&b) < 1e-12);
    }
}
