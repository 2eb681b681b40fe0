use super::LinearOperator;
use crate::error::Result;
use crate::fem1d::TridiagonalLu;
use crate::heat::HeatJacobianBlocks;

/// One blockwise Gauss–Seidel sweep for the heat Newton system, started
/// from `q̂ = 0`: a forward-in-time solve `K11·û = f` followed by a
/// backward-in-time solve `K11ᵀ·q̂ = g − K21·û`.
///
/// This equals an exact solve of the system with `K12` set to zero.
pub struct HeatGaussSeidel<'a> {
    blocks: &'a HeatJacobianBlocks,
    factors: Vec<TridiagonalLu>,
}

impl<'a> HeatGaussSeidel<'a> {
    pub fn new(blocks: &'a HeatJacobianBlocks) -> Result<Self> {
        let factors = blocks
            .k11_diag()
            .iter()
            .map(|b| b.factor())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, factors })
    }

    pub fn sweep(&self, rhs: &[f64]) -> Vec<f64> {
        self.apply_vec(rhs)
    }
}

impl LinearOperator for HeatGaussSeidel<'_> {
    fn dim(&self) -> usize {
        self.blocks.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nn = self.blocks.n_nodes();
        let ns = self.blocks.n_steps();
        let mass = self.blocks.mass();
        let (f, g) = x.split_at(ns * nn);
        let (u_hat, q_hat) = y.split_at_mut(ns * nn);

        for n in 0..ns {
            let mut rhs = f[n * nn..(n + 1) * nn].to_vec();
            if n > 0 {
                mass.mul_add(1.0, &u_hat[(n - 1) * nn..n * nn], &mut rhs);
            }
            self.factors[n].solve_in_place(&mut rhs);
            u_hat[n * nn..(n + 1) * nn].copy_from_slice(&rhs);
        }
        for n in (0..ns).rev() {
            let mut rhs = g[n * nn..(n + 1) * nn].to_vec();
            self.blocks.k21_diag()[n].mul_add(-1.0, &u_hat[n * nn..(n + 1) * nn], &mut rhs);
            if n + 1 < ns {
                mass.mul_add(1.0, &q_hat[(n + 1) * nn..(n + 2) * nn], &mut rhs);
            }
            // K11 diagonal blocks are symmetric, so K11ᵀ shares their factors
            self.factors[n].solve_in_place(&mut rhs);
            q_hat[n * nn..(n + 1) * nn].copy_from_slice(&rhs);
        }
    }
}
