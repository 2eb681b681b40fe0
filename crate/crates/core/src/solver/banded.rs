use super::LinearOperator;
use crate::error::{Error, Result};

/// A block-structured space-time Jacobian that can be handed to the direct solver.
pub trait BlockSystem: LinearOperator {
    /// Nonzero entries `(row, col, value)` in the stacked (field-major) ordering.
    /// Duplicate positions are summed.
    fn triplets(&self) -> Vec<(usize, usize, f64)>;

    /// `order[p]` is the stacked index placed at position `p` when unknowns
    /// and equations are sorted by time step. Rows and columns share it.
    fn time_ordering(&self) -> Vec<usize>;

    /// Number of unknowns per time block in the reordered system.
    fn time_block_len(&self) -> usize;
}

/// Square band matrix; row `i` stores columns `i−kl ..= i+kl+ku` so that
/// partial pivoting has room for fill.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// Builds the band from triplets; bandwidths are the tightest that contain every entry.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, v) in triplets {
            if v != 0.0 {
                kl = kl.max(i.saturating_sub(j));
                ku = ku.max(j.saturating_sub(i));
            }
        }
        let mut band = Self::zeros(n, kl, ku);
        for &(i, j, v) in triplets {
            if v != 0.0 {
                band.add(i, j, v);
            }
        }
        band
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Gaussian elimination with partial pivoting restricted to the band.
    pub fn factor(mut self) -> std::result::Result<BandedLu, usize> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.kl + self.ku;
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut scale = 0.0f64;
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        let tiny = scale * f64::EPSILON * 1e-3;

        for c in 0..n {
            let last_row = (c + kl).min(n - 1);
            let mut p = c;
            let mut best = self.data[self.slot(c, c)].abs();
            for r in c + 1..=last_row {
                let v = self.data[self.slot(r, c)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(c);
            }
            pivots[c] = p;
            let last_col = (c + reach).min(n - 1);
            if p != c {
                for j in c..=last_col {
                    let a = self.slot(c, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(c, c)];
            for r in c + 1..=last_row {
                let sr = self.slot(r, c);
                let m = self.data[sr] / pivot;
                self.data[sr] = 0.0;
                multipliers[c * kl + (r - c - 1)] = m;
                if m != 0.0 {
                    for j in c + 1..=last_col {
                        let src = self.data[self.slot(c, j)];
                        let dst = self.slot(r, j);
                        self.data[dst] -= m * src;
                    }
                }
            }
        }
        Ok(BandedLu {
            band: self,
            pivots,
            multipliers,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    band: BandedMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.band.n;
        let kl = self.band.kl;
        let reach = self.band.kl + self.band.ku;
        for c in 0..n {
            let p = self.pivots[c];
            if p != c {
                b.swap(c, p);
            }
            let last_row = (c + kl).min(n - 1);
            for r in c + 1..=last_row {
                b[r] -= self.multipliers[c * kl + (r - c - 1)] * b[c];
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=last_col {
                acc -= self.band.data[self.band.slot(i, j)] * b[j];
            }
            b[i] = acc / self.band.data[self.band.slot(i, i)];
        }
    }
}

/// Exact solve of a space-time Newton system after reordering it by time step,
/// which confines the nonzeros to a band of width `O(spatial unknowns)`.
pub fn banded_direct_solve(system: &dyn BlockSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = system.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let band = time_ordered_band(system);
    let order = system.time_ordering();
    let block = system.time_block_len().max(1);
    let lu = band.factor().map_err(|row| Error::SingularPivot {
        row: order[row],
        block: row / block,
    })?;
    let mut b: Vec<f64> = order.iter().map(|&i| rhs[i]).collect();
    lu.solve_in_place(&mut b);
    let mut x = vec![0.0; n];
    for (p, &i) in order.iter().enumerate() {
        x[i] = b[p];
    }
    Ok(x)
}

/// The reordered system matrix in band storage.
pub fn time_ordered_band(system: &dyn BlockSystem) -> BandedMatrix {
    let n = system.dim();
    let order = system.time_ordering();
    let mut position = vec![0usize; n];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    let permuted: Vec<_> = system
        .triplets()
        .into_iter()
        .map(|(i, j, v)| (position[i], position[j], v))
        .collect();
    BandedMatrix::from_triplets(n, &permuted)
}
