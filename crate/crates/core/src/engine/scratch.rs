//! Per-query working arrays with constant-time reset.

/// A table of fixed-width state-set cells. Cells whose stamp is older than the
/// current version read as empty, so a reset only bumps the version.
#[derive(Debug, Default, Clone)]
pub(crate) struct Cells {
    stamp: Vec<u32>,
    data: Vec<u64>,
    wpc: usize,
    version: u32,
    zero: Vec<u64>,
}

impl Cells {
    pub(crate) fn reset(&mut self, len: usize, words_per_cell: usize) {
        if len != self.stamp.len() || words_per_cell != self.wpc {
            self.stamp = vec![0; len];
            self.data = vec![0; len * words_per_cell];
            self.wpc = words_per_cell;
            self.zero = vec![0; words_per_cell];
            self.version = 1;
            return;
        }
        self.version = self.version.wrapping_add(1);
        if self.version == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.version = 1;
        }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize) -> &[u64] {
        if self.stamp[i] == self.version {
            &self.data[i * self.wpc..(i + 1) * self.wpc]
        } else {
            &self.zero
        }
    }

    #[inline]
    pub(crate) fn get_mut(&mut self, i: usize) -> &mut [u64] {
        let cell = &mut self.data[i * self.wpc..(i + 1) * self.wpc];
        if self.stamp[i] != self.version {
            self.stamp[i] = self.version;
            cell.iter_mut().for_each(|w| *w = 0);
        }
        cell
    }

    #[inline]
    pub(crate) fn is_set(&self, i: usize) -> bool {
        self.stamp[i] == self.version
    }

    #[inline]
    pub(crate) fn or_into(&mut self, i: usize, src: &[u64]) {
        for (d, s) in self.get_mut(i).iter_mut().zip(src) {
            *d |= s;
        }
    }
}

/// Reusable working memory for query evaluation. One per thread.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    /// `B[v]` over the `L_p` tree, heap order.
    pub(crate) bmask: Cells,
    /// `D[s]` over graph nodes.
    pub(crate) ds: Cells,
    /// `D[v]` over the `L_s` tree, heap order.
    pub(crate) dv: Cells,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

#[inline]
pub(crate) fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

#[inline]
pub(crate) fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_clears_lazily() {
        let mut c = Cells::default();
        c.reset(4, 2);
        c.or_into(1, &[1, 2]);
        assert_eq!(c.get(1), &[1, 2]);
        assert_eq!(c.get(2), &[0, 0]);
        c.reset(4, 2);
        assert_eq!(c.get(1), &[0, 0]);
        assert!(!c.is_set(1));
        c.or_into(1, &[4, 0]);
        assert_eq!(c.get(1), &[4, 0]);
        c.reset(3, 1);
        assert_eq!(c.stamp.len(), 3);
        assert_eq!(c.get(0), &[0]);
    }

    #[test]
    fn version_wraparound() {
        let mut c = Cells::default();
        c.reset(2, 1);
        c.version = u32::MAX;
        c.or_into(0, &[7]);
        c.reset(2, 1);
        assert_eq!(c.get(0), &[0]);
    }
}
