//! Compressed sparse column matrices with a fixed 3×3 block pattern.

use nalgebra::{DMatrix, Matrix3};

/// Square CSC matrix with sorted row indices and full (both-triangle) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn identity(n: usize) -> Self {
        CscMatrix {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of range for n = {n}");
            cols[j].push((i, v));
        }
        let mut m = CscMatrix {
            n,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        };
        for mut col in cols {
            col.sort_by_key(|&(i, _)| i);
            for (i, v) in col {
                if m.row_idx.len() > *m.col_ptr.last().unwrap() && *m.row_idx.last().unwrap() == i {
                    *m.values.last_mut().unwrap() += v;
                } else {
                    m.row_idx.push(i);
                    m.values.push(v);
                }
            }
            m.col_ptr.push(m.row_idx.len());
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// y = A x.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            let xj = x[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[(self.row_idx[k], j)] += self.values[k];
            }
        }
        d
    }
}

/// Node adjacency expanded to 3×3 blocks. Every column of a block column has
/// the same row structure, so block (I, J) lives at
/// `values[col_ptr[3J + j] + 3·slot + i]` where `slot = block_slot(I, J)`.
#[derive(Debug, Clone)]
pub struct BlockPattern {
    pub n_nodes: usize,
    /// Sorted neighbour nodes (including self) of every node.
    pub neighbours: Vec<Vec<usize>>,
}

impl BlockPattern {
    /// Pattern of the union of cliques formed by each element's nodes.
    pub fn from_elements<'a>(n_nodes: usize, elements: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut neighbours: Vec<Vec<usize>> = (0..n_nodes).map(|i| vec![i]).collect();
        for e in elements {
            for &a in e {
                neighbours[a].extend_from_slice(e);
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        BlockPattern { n_nodes, neighbours }
    }

    /// Adds the cliques of `elements` to the pattern.
    pub fn extend<'a>(&mut self, elements: impl IntoIterator<Item = &'a [usize]>) {
        for e in elements {
            for &a in e {
                self.neighbours[a].extend_from_slice(e);
            }
        }
        for list in &mut self.neighbours {
            list.sort_unstable();
            list.dedup();
        }
    }

    pub fn block_slot(&self, row_node: usize, col_node: usize) -> usize {
        self.neighbours[col_node]
            .binary_search(&row_node)
            .unwrap_or_else(|_| panic!("block ({row_node}, {col_node}) not in pattern"))
    }

    pub fn zeros(&self) -> CscMatrix {
        let n = 3 * self.n_nodes;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for list in &self.neighbours {
            for _ in 0..3 {
                for &r in list {
                    row_idx.extend([3 * r, 3 * r + 1, 3 * r + 2]);
                }
                col_ptr.push(row_idx.len());
            }
        }
        let nnz = row_idx.len();
        CscMatrix {
            n,
            col_ptr,
            row_idx,
            values: vec![0.0; nnz],
        }
    }
}

/// Adds `block` (scaled by `s`) at block position (row node, col node) given its slot.
#[inline]
pub fn add_block(m: &mut CscMatrix, slot: usize, col_node: usize, block: &Matrix3<f64>, s: f64) {
    for j in 0..3 {
        let base = m.col_ptr[3 * col_node + j] + 3 * slot;
        for i in 0..3 {
            m.values[base + i] += s * block[(i, j)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CscMatrix::from_triplets(3, &[(0, 0, 1.0), (2, 0, 2.0), (0, 0, 3.0), (1, 2, -1.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(2, 0), 2.0);
        assert_eq!(m.get(1, 2), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![4.0, -1.0, 2.0]);
    }

    #[test]
    fn block_slots_address_the_right_entries() {
        let p = BlockPattern::from_elements(4, [&[0usize, 2][..], &[2, 3][..]]);
        let mut m = p.zeros();
        let b = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0);
        add_block(&mut m, p.block_slot(0, 2), 2, &b, 2.0);
        let d = m.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, 6 + j)], 2.0 * b[(i, j)]);
            }
        }
        assert_eq!(d.iter().filter(|v| **v != 0.0).count(), 9);
        assert_eq!(p.neighbours[1], vec![1]);
    }
}
