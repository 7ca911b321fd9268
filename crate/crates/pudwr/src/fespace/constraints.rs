//! Affine constraints `u_d = sum_j w_j u_j + g` for hanging and Dirichlet dofs.

use crate::error::FeError;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Hanging,
    Dirichlet,
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintLine {
    pub dof: usize,
    pub entries: Vec<(usize, f64)>,
    pub inhomogeneity: f64,
    pub kind: ConstraintKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    index: Vec<u32>,
    lines: Vec<ConstraintLine>,
    closed: bool,
}

impl ConstraintSet {
    pub fn new(n_dofs: usize) -> Self {
        ConstraintSet { index: vec![NONE; n_dofs], lines: Vec::new(), closed: true }
    }

    pub fn n_dofs(&self) -> usize {
        self.index.len()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[ConstraintLine] {
        &self.lines
    }

    /// Add a line; an existing line for the same dof wins.
    pub fn add_line(&mut self, dof: usize, entries: Vec<(usize, f64)>, inhomogeneity: f64, kind: ConstraintKind) {
        if self.index[dof] != NONE {
            return;
        }
        self.index[dof] = self.lines.len() as u32;
        self.lines.push(ConstraintLine { dof, entries, inhomogeneity, kind });
        self.closed = false;
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.index[dof] != NONE
    }

    pub fn line(&self, dof: usize) -> Option<&ConstraintLine> {
        let i = self.index[dof];
        (i != NONE).then(|| &self.lines[i as usize])
    }

    /// Substitute constrained masters until every master is free.
    pub fn close(&mut self) -> Result<(), FeError> {
        if self.closed {
            return Ok(());
        }
        // 0 = unvisited, 1 = in progress, 2 = done
        let mut state = vec![0u8; self.lines.len()];
        for l in 0..self.lines.len() {
            self.resolve(l, &mut state)?;
        }
        self.closed = true;
        Ok(())
    }

    fn resolve(&mut self, l: usize, state: &mut [u8]) -> Result<(), FeError> {
        match state[l] {
            2 => return Ok(()),
            1 => return Err(FeError::CyclicConstraint(self.lines[l].dof)),
            _ => {}
        }
        state[l] = 1;
        let entries = std::mem::take(&mut self.lines[l].entries);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        let mut g = self.lines[l].inhomogeneity;
        for (j, w) in entries {
            let lj = self.index[j];
            if lj == NONE {
                out.push((j, w));
            } else {
                self.resolve(lj as usize, state)?;
                let sub = &self.lines[lj as usize];
                g += w * sub.inhomogeneity;
                for &(k, wk) in &sub.entries {
                    out.push((k, w * wk));
                }
            }
        }
        out.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
        for (k, w) in out {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += w,
                _ => merged.push((k, w)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.lines[l].entries = merged;
        self.lines[l].inhomogeneity = g;
        state[l] = 2;
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Same lines with zero inhomogeneities.
    pub fn homogeneous(&self) -> ConstraintSet {
        let mut c = self.clone();
        for l in &mut c.lines {
            l.inhomogeneity = 0.0;
        }
        c
    }

    /// Overwrite constrained entries of `u` with their constrained values.
    pub fn distribute(&self, u: &mut [f64]) {
        debug_assert!(self.closed);
        for l in &self.lines {
            u[l.dof] = l.entries.iter().map(|&(j, w)| w * u[j]).sum::<f64>() + l.inhomogeneity;
        }
    }

    pub fn distribute_homogeneous(&self, u: &mut [f64]) {
        for l in &self.lines {
            u[l.dof] = l.entries.iter().map(|&(j, w)| w * u[j]).sum::<f64>();
        }
    }

    /// `C^T r`: constrained entries are moved onto their masters and zeroed.
    pub fn condense_vector(&self, r: &mut [f64]) {
        for l in &self.lines {
            let v = r[l.dof];
            for &(j, w) in &l.entries {
                r[j] += w * v;
            }
            r[l.dof] = 0.0;
        }
    }

    pub fn zero_constrained(&self, u: &mut [f64]) {
        for l in &self.lines {
            u[l.dof] = 0.0;
        }
    }

    /// Largest violation `|u_d - sum w u_j - g|` over all lines.
    pub fn max_violation(&self, u: &[f64]) -> f64 {
        self.lines
            .iter()
            .map(|l| (u[l.dof] - l.entries.iter().map(|&(j, w)| w * u[j]).sum::<f64>() - l.inhomogeneity).abs())
            .fold(0.0, f64::max)
    }
}
