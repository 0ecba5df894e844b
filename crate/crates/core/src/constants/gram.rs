//! Matrix-free masked Gram operators over the scaled, permuted rows
//! `b_i = √w_{π_i} a_{π_i}`.
//!
//! With 1-based block index `p(k) = ⌈k/b⌉`, the prefix operator is
//! `M_kl = min(p(k), p(l)) b_kᵀb_l`, i.e. the sum over `j` of the Gram matrix
//! with its first `b(j−1)` rows and columns masked out. The block-diagonal
//! operator keeps only the diagonal `b × b` blocks of the Gram matrix.

use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::spectral::SymmetricOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramMode {
    Prefix,
    BlockDiagonal,
}

pub struct MaskedGramOperator<'a, F> {
    ds: &'a SparseDataset<F>,
    perm: &'a [usize],
    /// `√w_{π_i}` in permuted order.
    scale: Vec<F>,
    batch: usize,
    mode: GramMode,
}

impl<'a, F: Scalar> MaskedGramOperator<'a, F> {
    pub fn new(
        ds: &'a SparseDataset<F>,
        weights: &[F],
        perm: &'a [usize],
        batch: usize,
        mode: GramMode,
    ) -> Result<Self> {
        let n = ds.n();
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        if !crate::dataset::is_permutation(perm, n) {
            return Err(Error::Config(format!("not a permutation of 0..{n}")));
        }
        check_batch(n, batch)?;
        let scale = perm.iter().map(|&p| weights[p].sqrt()).collect();
        Ok(Self {
            ds,
            perm,
            scale,
            batch,
            mode,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn blocks(&self) -> usize {
        self.n() / self.batch
    }

    fn row_dot(&self, k: usize, u: &[F]) -> F {
        self.scale[k] * self.ds.row(self.perm[k]).dot(u)
    }

    fn row_axpy(&self, k: usize, alpha: F, u: &mut [F]) {
        self.ds.row(self.perm[k]).axpy(alpha * self.scale[k], u);
    }

    fn zero_row_support(&self, k: usize, u: &mut [F]) {
        for &j in self.ds.row(self.perm[k]).indices {
            u[j] = F::zero();
        }
    }

    fn apply_prefix(&self, v: &[F], out: &mut [F]) {
        let (b, m, d) = (self.batch, self.blocks(), self.ds.d());
        // Backward pass: s_k = b_kᵀ Σ_{p(l) ≥ p(k)} v_l b_l.
        let mut acc = vec![F::zero(); d];
        for p in (0..m).rev() {
            for l in p * b..(p + 1) * b {
                self.row_axpy(l, v[l], &mut acc);
            }
            for k in p * b..(p + 1) * b {
                out[k] = F::of_usize(p + 1) * self.row_dot(k, &acc);
            }
        }
        // Forward pass: t_k = b_kᵀ Σ_{p(l) < p(k)} p(l) v_l b_l.
        acc.iter_mut().for_each(|a| *a = F::zero());
        for p in 0..m {
            if p > 0 {
                for k in p * b..(p + 1) * b {
                    out[k] += self.row_dot(k, &acc);
                }
            }
            let weight = F::of_usize(p + 1);
            for l in p * b..(p + 1) * b {
                self.row_axpy(l, weight * v[l], &mut acc);
            }
        }
    }

    fn apply_block_diagonal(&self, v: &[F], out: &mut [F]) {
        let b = self.batch;
        let mut acc = vec![F::zero(); self.ds.d()];
        for p in 0..self.blocks() {
            let block = p * b..(p + 1) * b;
            for l in block.clone() {
                self.row_axpy(l, v[l], &mut acc);
            }
            for k in block.clone() {
                out[k] = self.row_dot(k, &acc);
            }
            for l in block {
                self.zero_row_support(l, &mut acc);
            }
        }
    }

    /// The operator `B_j B_jᵀ` of the 0-based block `j`.
    pub fn block(&self, j: usize) -> BlockGram<'_, 'a, F> {
        BlockGram { parent: self, block: j }
    }

    /// `tr(B_j B_jᵀ) = Σ_{k ∈ block j} ‖b_k‖²`.
    pub fn block_trace(&self, j: usize) -> F {
        (j * self.batch..(j + 1) * self.batch)
            .map(|k| self.scale[k] * self.scale[k] * self.ds.row(self.perm[k]).sq_norm())
            .sum()
    }
}

impl<F: Scalar> SymmetricOperator<F> for MaskedGramOperator<'_, F> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, v: &[F], out: &mut [F]) {
        match self.mode {
            GramMode::Prefix => self.apply_prefix(v, out),
            GramMode::BlockDiagonal => self.apply_block_diagonal(v, out),
        }
    }
}

/// One diagonal block of a [`MaskedGramOperator`] as a `b × b` operator.
pub struct BlockGram<'p, 'a, F> {
    parent: &'p MaskedGramOperator<'a, F>,
    block: usize,
}

impl<F: Scalar> SymmetricOperator<F> for BlockGram<'_, '_, F> {
    fn dim(&self) -> usize {
        self.parent.batch
    }

    fn apply(&self, v: &[F], out: &mut [F]) {
        let start = self.block * self.parent.batch;
        let mut acc = vec![F::zero(); self.parent.ds.d()];
        for (j, &vj) in v.iter().enumerate() {
            self.parent.row_axpy(start + j, vj, &mut acc);
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.parent.row_dot(start + j, &acc);
        }
    }
}

pub(crate) fn check_batch(n: usize, b: usize) -> Result<()> {
    if b == 0 || !n.is_multiple_of(b) {
        return Err(Error::BatchDivisibility { n, b });
    }
    Ok(())
}
