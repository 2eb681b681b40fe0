//! Piecewise-linear finite elements on a uniform interval.
//!
//! Nodal fields are plain `Vec<f64>` of length `n_elements + 1`; per-element
//! quantities (coefficients, gradients) use [`ElementField`].

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// One scalar per mesh node.
pub type NodalField = Vec<f64>;

/// Uniform partition of `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    a: f64,
    b: f64,
    n_elements: usize,
    nodes: Vec<f64>,
}

impl SpaceGrid {
    pub fn new(a: f64, b: f64, n_elements: usize) -> Result<Self> {
        if n_elements == 0 || !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidInput(format!(
                "space grid needs a < b and at least one element, got [{a}, {b}] with {n_elements}"
            )));
        }
        let h = (b - a) / n_elements as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| a + h * i as f64).collect();
        nodes[n_elements] = b;
        Ok(Self {
            a,
            b,
            n_elements,
            nodes,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements + 1
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_elements as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_centers(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub(crate) fn check_nodal(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                got: field.len(),
            });
        }
        Ok(())
    }
}

/// Uniform partition `t_i = k·i` of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time grid needs T > 0 and N >= 1, got T = {final_time}, N = {n_steps}"
            )));
        }
        Ok(Self {
            final_time,
            n_steps,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn k(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.n_steps {
            self.final_time
        } else {
            self.k() * level as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// Piecewise-constant field, one value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementField(Vec<f64>);

impl ElementField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(n_elements: usize, value: f64) -> Self {
        Self(vec![value; n_elements])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ElementField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for ElementField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ElementField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Square tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    lower: Vec<f64>,
    main: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(lower: Vec<f64>, main: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = main.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "tridiagonal diagonals have inconsistent lengths {}/{}/{}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(Self { lower, main, upper })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            main: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn size(&self) -> usize {
        self.main.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_symmetric(&self) -> bool {
        self.lower == self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.main[i]
        } else if j + 1 == i {
            self.lower[j]
        } else if i + 1 == j {
            self.upper[i]
        } else {
            0.0
        }
    }

    pub fn add_diagonal(&mut self, i: usize, value: f64) {
        self.main[i] += value;
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, other: &Self, alpha: f64) -> Self {
        let zip = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + alpha * b).collect();
        Self {
            lower: zip(&self.lower, &other.lower),
            main: zip(&self.main, &other.main),
            upper: zip(&self.upper, &other.upper),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |x: &[f64]| x.iter().map(|a| alpha * a).collect();
        Self {
            lower: s(&self.lower),
            main: s(&self.main),
            upper: s(&self.upper),
        }
    }

    /// `y += alpha·A·x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = self.size();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.main[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] += alpha * acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size()];
        self.mul_add(1.0, x, &mut y);
        y
    }

    /// Row-major dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// LU factorization with partial pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Factored tridiagonal matrix (row interchanges introduce a second superdiagonal).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(a: &TridiagonalMatrix) -> Result<Self> {
        let n = a.size();
        let mut dl = a.lower.clone();
        let mut d = a.main.clone();
        let mut du = a.upper.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::Singular(format!(
                "tridiagonal matrix of size {n} has a zero pivot at row {i}"
            )));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn size(&self) -> usize {
        self.d.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        debug_assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            if i + 1 < n {
                acc -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                acc -= self.du2[i] * b[i + 2];
            }
            b[i] = acc / self.d[i];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Consistent mass matrix `∫ φᵢφⱼ dx`.
pub fn assemble_mass(grid: &SpaceGrid) -> TridiagonalMatrix {
    let n = grid.n_nodes();
    let h = grid.h();
    let mut m = TridiagonalMatrix::zeros(n);
    for e in 0..grid.n_elements() {
        m.main[e] += h / 3.0;
        m.main[e + 1] += h / 3.0;
        m.lower[e] += h / 6.0;
        m.upper[e] += h / 6.0;
    }
    m
}

/// Row-sum lumped mass matrix.
pub fn assemble_lumped_mass(grid: &SpaceGrid) -> TridiagonalMatrix {
    let n = grid.n_nodes();
    let h = grid.h();
    let mut m = TridiagonalMatrix::zeros(n);
    for e in 0..grid.n_elements() {
        m.main[e] += h / 2.0;
        m.main[e + 1] += h / 2.0;
    }
    m
}

/// `Σ_e coeff_e ∫_e φᵢ'φⱼ' dx`.
pub fn assemble_weighted_stiffness(grid: &SpaceGrid, coeff: &[f64]) -> TridiagonalMatrix {
    assert_eq!(coeff.len(), grid.n_elements(), "one coefficient per element");
    let n = grid.n_nodes();
    let inv_h = 1.0 / grid.h();
    let mut a = TridiagonalMatrix::zeros(n);
    for (e, c) in coeff.iter().enumerate() {
        let w = c * inv_h;
        a.main[e] += w;
        a.main[e + 1] += w;
        a.lower[e] -= w;
        a.upper[e] -= w;
    }
    a
}

/// Piecewise-constant gradient of a nodal field.
pub fn element_gradient(grid: &SpaceGrid, field: &[f64]) -> ElementField {
    assert_eq!(field.len(), grid.n_nodes(), "nodal field length");
    let inv_h = 1.0 / grid.h();
    field.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect::<Vec<_>>().into()
}

/// Endpoint load vector: in 1D the boundary integral is the sum of the two endpoint values.
pub fn boundary_load(grid: &SpaceGrid, left_value: f64, right_value: f64) -> NodalField {
    let mut load = vec![0.0; grid.n_nodes()];
    load[0] += left_value;
    let last = grid.n_nodes() - 1;
    load[last] += right_value;
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> SpaceGrid {
        SpaceGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grids_are_uniform() {
        let g = SpaceGrid::new(-1.0, 2.0, 7).unwrap();
        assert_eq!(g.nodes()[0], -1.0);
        assert_eq!(g.nodes()[7], 2.0);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - g.h()).abs() < 1e-14);
        }
        let t = TimeGrid::new(1.5, 30).unwrap();
        assert!((t.k() * 30.0 - 1.5).abs() < 1e-14);
        assert_eq!(t.times().len(), 31);
        assert!(SpaceGrid::new(1.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn mass_two_elements() {
        let m = assemble_mass(&grid(2));
        let expect_main = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (a, b) in m.main().iter().zip(expect_main) {
            assert!((a - b).abs() < 1e-15);
        }
        for v in m.lower().iter().chain(m.upper()) {
            assert!((v - 1.0 / 12.0).abs() < 1e-15);
        }
        assert!(m.is_symmetric());
    }

    #[test]
    fn mass_row_sums_and_cholesky() {
        let g = grid(5);
        let m = assemble_mass(&g);
        let sums = m.matvec(&vec![1.0; 6]);
        let h = g.h();
        for (i, s) in sums.iter().enumerate() {
            let expect = if i == 0 || i == 5 { h / 2.0 } else { h };
            assert!((s - expect).abs() < 1e-15);
        }
        // tridiagonal Cholesky: all pivots positive
        let mut d = m.main()[0];
        assert!(d > 0.0);
        for i in 1..6 {
            d = m.main()[i] - m.lower()[i - 1] * m.upper()[i - 1] / d;
            assert!(d > 0.0);
        }
    }

    #[test]
    fn unit_stiffness_stencil() {
        let g = grid(2);
        let a = assemble_weighted_stiffness(&g, &[1.0, 1.0]);
        assert_eq!(a.main(), &[2.0, 4.0, 2.0]);
        assert_eq!(a.lower(), &[-2.0, -2.0]);
        assert_eq!(a.upper(), &[-2.0, -2.0]);
        assert!(a.matvec(&[3.0; 3]).iter().all(|v| v.abs() < 1e-14));
        let scaled = assemble_weighted_stiffness(&g, &[2.5, 2.5]);
        assert_eq!(scaled, a.scaled(2.5));
    }

    #[test]
    fn stiffness_null_space_is_constants() {
        let g = grid(6);
        let coeff: Vec<f64> = (0..6).map(|e| 0.5 + 0.1 * e as f64).collect();
        let a = assemble_weighted_stiffness(&g, &coeff);
        // pin the first node: the reduced matrix must be nonsingular, so the
        // only null vectors of the full matrix are constants
        let reduced = TridiagonalMatrix::new(
            a.lower()[1..].to_vec(),
            a.main()[1..].to_vec(),
            a.upper()[1..].to_vec(),
        )
        .unwrap();
        let rhs: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let x = reduced.solve(&rhs).unwrap();
        let back = reduced.matvec(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients() {
        let g = grid(4);
        let grads = element_gradient(&g, g.nodes());
        assert!(grads.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(element_gradient(&g, &[2.0; 5]).iter().all(|v| *v == 0.0));
        let one = SpaceGrid::new(0.0, 0.5, 1).unwrap();
        assert_eq!(element_gradient(&one, &[0.0, 1.0])[0], 2.0);
    }

    #[test]
    fn boundary_loads() {
        let g = grid(2);
        assert_eq!(boundary_load(&g, 0.0, 0.0), vec![0.0; 3]);
        assert_eq!(boundary_load(&g, 1.0, 1.0), vec![1.0, 0.0, 1.0]);
        let l = boundary_load(&g, 0.3, -1.2);
        assert!((l.iter().sum::<f64>() - (0.3 - 1.2)).abs() < 1e-15);
    }

    #[test]
    fn pivoting_solve_handles_zero_diagonal() {
        let a = TridiagonalMatrix::new(vec![1.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let x_true = [1.0, -2.0, 3.0];
        let b = a.matvec(&x_true);
        let x = a.solve(&b).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-14);
        }
        let singular = TridiagonalMatrix::new(vec![0.0], vec![0.0, 1.0], vec![0.0]).unwrap();
        assert!(singular.solve(&[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn stiffness_quadrature_identity(
            w in proptest::collection::vec(-2.0f64..2.0, 8),
            v in proptest::collection::vec(-2.0f64..2.0, 8),
            coeff in proptest::collection::vec(0.1f64..3.0, 7),
        ) {
            let g = grid(7);
            let a = assemble_weighted_stiffness(&g, &coeff);
            prop_assert!(a.is_symmetric());
            let lhs: f64 = w.iter().zip(a.matvec(&v)).map(|(x, y)| x * y).sum();
            let gw = element_gradient(&g, &w);
            let gv = element_gradient(&g, &v);
            let rhs: f64 = (0..7).map(|e| coeff[e] * gw[e] * gv[e] * g.h()).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn gradient_is_linear(
            u in proptest::collection::vec(-2.0f64..2.0, 6),
            v in proptest::collection::vec(-2.0f64..2.0, 6),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let g = grid(5);
            let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = element_gradient(&g, &combo);
            let gu = element_gradient(&g, &u);
            let gv = element_gradient(&g, &v);
            for e in 0..5 {
                prop_assert!((lhs[e] - (alpha * gu[e] + beta * gv[e])).abs() < 1e-12);
            }
        }

        #[test]
        fn tridiagonal_solve_roundtrip(
            main in proptest::collection::vec(-4.0f64..4.0, 9),
            off in proptest::collection::vec(-4.0f64..4.0, 16),
            x in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let a = TridiagonalMatrix::new(off[..8].to_vec(), main, off[8..].to_vec()).unwrap();
            let b = a.matvec(&x);
            if let Ok(sol) = a.solve(&b) {
                let resid: f64 = a.matvec(&sol).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
                prop_assume!(sol.iter().all(|v| v.abs() < 1e6));
                prop_assert!(resid < 1e-8 * scale);
            }
        }
    }
}
