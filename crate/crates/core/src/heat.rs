//! Heat-equation reconstruction: symplectic backward Euler for the
//! regularized Hamiltonian system and its Newton linearization.
//!
//! Unknowns are stacked field-major as `[u_1, …, u_N, q_0, …, q_{N−1}]`
//! (each a nodal vector); `u_0` is the given initial state and `q_N = 0`.
//! Residuals are stacked the same way as `[F_0, …, F_{N−1}, G_0, …, G_{N−1}]`.
//! Every step `n` pairs `u_{n+1}` with `q_n`, which is what makes the
//! scheme symplectic.

use crate::error::{Error, Result};
use crate::fem1d::{
    assemble_mass, assemble_weighted_stiffness, boundary_load, element_gradient, ElementField,
    NodalField, SpaceGrid, TimeGrid, TridiagonalMatrix,
};
use crate::regularization::RegularizedHamiltonian;
use crate::solver::{BlockSystem, LinearOperator};
use crate::trace::{BoundaryTrace, ElementTrace, Observation};

/// State `u` and adjoint `q` at all time levels `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTrajectory {
    pub u: Vec<NodalField>,
    pub q: Vec<NodalField>,
}

fn check_coefficients(sigma: &[ElementField], grid: &SpaceGrid, n_steps: usize) -> Result<()> {
    if sigma.len() != 1 && sigma.len() != n_steps {
        return Err(Error::InvalidInput(format!(
            "coefficient must be given once or per step ({n_steps}), got {}",
            sigma.len()
        )));
    }
    for field in sigma {
        if field.len() != grid.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_elements(),
                got: field.len(),
            });
        }
        if let Some(e) = field.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Singular(format!(
                "coefficient must be positive, element {e} has {}",
                field[e]
            )));
        }
    }
    Ok(())
}

/// Backward-Euler heat solve `(M + k·A(σ))u_{n+1} = M·u_n + k·b(j_{n+1})`.
///
/// `sigma` holds either one field for all steps or one per step.
pub fn forward_heat_solve(
    space: &SpaceGrid,
    time: &TimeGrid,
    sigma: &[ElementField],
    flux: &BoundaryTrace,
    initial: Option<&[f64]>,
) -> Result<Vec<NodalField>> {
    let n_steps = time.n_steps();
    check_coefficients(sigma, space, n_steps)?;
    flux.check_levels(time.n_levels())?;
    let k = time.k();
    let mass = assemble_mass(space);
    let u0 = match initial {
        Some(u0) => {
            space.check_nodal(u0)?;
            u0.to_vec()
        }
        None => vec![0.0; space.n_nodes()],
    };
    let mut levels = Vec::with_capacity(n_steps + 1);
    levels.push(u0);
    let mut lu = None;
    for n in 0..n_steps {
        if lu.is_none() || sigma.len() > 1 {
            let sys = mass.add_scaled(&assemble_weighted_stiffness(space, &sigma[n.min(sigma.len() - 1)]), k);
            lu = Some(sys.factor()?);
        }
        let (jl, jr) = flux.at(n + 1);
        let mut rhs = mass.matvec(&levels[n]);
        rhs[0] += k * jl;
        let last = rhs.len() - 1;
        rhs[last] += k * jr;
        lu.as_ref().expect("factored").solve_in_place(&mut rhs);
        levels.push(rhs);
    }
    Ok(levels)
}

/// Backward-in-time adjoint solve for a fixed coefficient:
/// `(M + k·A(σ_n))q_n = M·q_{n+1} + 2k·B(u_{n+1} − u*_{n+1})`, `q_N = 0`.
pub fn adjoint_heat_solve(
    space: &SpaceGrid,
    time: &TimeGrid,
    sigma: &[ElementField],
    u: &[NodalField],
    data: &BoundaryTrace,
    observation: Observation,
) -> Result<Vec<NodalField>> {
    let n_steps = time.n_steps();
    check_coefficients(sigma, space, n_steps)?;
    data.check_levels(time.n_levels())?;
    let k = time.k();
    let mass = assemble_mass(space);
    let mut levels = vec![vec![0.0; space.n_nodes()]; n_steps + 1];
    for n in (0..n_steps).rev() {
        let sys = mass.add_scaled(
            &assemble_weighted_stiffness(space, &sigma[n.min(sigma.len() - 1)]),
            k,
        );
        let mut rhs = mass.matvec(&levels[n + 1]);
        let misfit = observation.misfit_load(space, &u[n + 1], data.at(n + 1));
        for (r, m) in rhs.iter_mut().zip(misfit) {
            *r += 2.0 * k * m;
        }
        levels[n] = sys.solve(&rhs)?;
    }
    Ok(levels)
}

/// Rectangle-rule boundary misfit `k·Σ_{n=1..N} Σ_ends (u_n − u*_n)²`.
pub fn heat_objective(
    u: &[NodalField],
    data: &BoundaryTrace,
    time: &TimeGrid,
    observation: Observation,
) -> f64 {
    let k = time.k();
    (1..u.len())
        .map(|n| k * observation.misfit(&u[n], data.at(n)))
        .sum()
}

/// The coupled space-time system of one heat reconstruction problem.
#[derive(Debug, Clone)]
pub struct HeatSystem {
    space: SpaceGrid,
    time: TimeGrid,
    mass: TridiagonalMatrix,
    flux: BoundaryTrace,
    data: BoundaryTrace,
    observation: Observation,
    initial_state: NodalField,
}

impl HeatSystem {
    pub fn new(
        space: SpaceGrid,
        time: TimeGrid,
        flux: BoundaryTrace,
        data: BoundaryTrace,
    ) -> Result<Self> {
        flux.check_levels(time.n_levels())?;
        data.check_levels(time.n_levels())?;
        let mass = assemble_mass(&space);
        let initial_state = vec![0.0; space.n_nodes()];
        Ok(Self {
            space,
            time,
            mass,
            flux,
            data,
            observation: Observation::BOTH,
            initial_state,
        })
    }

    pub fn with_observation(mut self, observation: Observation) -> Self {
        self.observation = observation;
        self
    }

    pub fn with_initial_state(mut self, u0: NodalField) -> Result<Self> {
        self.space.check_nodal(&u0)?;
        self.initial_state = u0;
        Ok(self)
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn mass(&self) -> &TridiagonalMatrix {
        &self.mass
    }

    pub fn flux(&self) -> &BoundaryTrace {
        &self.flux
    }

    pub fn data(&self) -> &BoundaryTrace {
        &self.data
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.time.n_steps() * self.space.n_nodes()
    }

    pub fn unpack(&self, x: &[f64]) -> HeatTrajectory {
        let nn = self.space.n_nodes();
        let n_steps = self.time.n_steps();
        assert_eq!(x.len(), self.n_unknowns(), "stacked heat vector length");
        let (xu, xq) = x.split_at(n_steps * nn);
        let mut u = Vec::with_capacity(n_steps + 1);
        u.push(self.initial_state.clone());
        u.extend(xu.chunks(nn).map(<[f64]>::to_vec));
        let mut q: Vec<NodalField> = xq.chunks(nn).map(<[f64]>::to_vec).collect();
        q.push(vec![0.0; nn]);
        HeatTrajectory { u, q }
    }

    pub fn pack(&self, traj: &HeatTrajectory) -> Vec<f64> {
        let n_steps = self.time.n_steps();
        let mut x = Vec::with_capacity(self.n_unknowns());
        for level in &traj.u[1..=n_steps] {
            x.extend_from_slice(level);
        }
        for level in &traj.q[..n_steps] {
            x.extend_from_slice(level);
        }
        x
    }

    /// `∇u_{n+1}·∇q_n` per element, with the two gradients.
    fn step_gradients(&self, n: usize, traj: &HeatTrajectory) -> (ElementField, ElementField) {
        (
            element_gradient(&self.space, &traj.u[n + 1]),
            element_gradient(&self.space, &traj.q[n]),
        )
    }

    fn control(&self, n: usize, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> Vec<f64> {
        let (gu, gq) = self.step_gradients(n, traj);
        gu.iter().zip(gq.iter()).map(|(a, b)| reg.h_prime(a * b)).collect()
    }

    /// `M(u_{n+1}−u_n) + k·A(σ̃_n)·u_{n+1} − k·b(j_{n+1})`.
    pub fn residual_f(&self, n: usize, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> NodalField {
        let k = self.time.k();
        let diff: Vec<f64> = traj.u[n + 1].iter().zip(&traj.u[n]).map(|(a, b)| a - b).collect();
        let mut r = self.mass.matvec(&diff);
        let a = assemble_weighted_stiffness(&self.space, &self.control(n, traj, reg));
        a.mul_add(k, &traj.u[n + 1], &mut r);
        let (jl, jr) = self.flux.at(n + 1);
        let load = boundary_load(&self.space, jl, jr);
        for (ri, li) in r.iter_mut().zip(load) {
            *ri -= k * li;
        }
        r
    }

    /// `M(q_n−q_{n+1}) + k·A(σ̃_n)·q_n − 2k·B(u_{n+1} − u*_{n+1})`.
    pub fn residual_g(&self, n: usize, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> NodalField {
        let k = self.time.k();
        let diff: Vec<f64> = traj.q[n].iter().zip(&traj.q[n + 1]).map(|(a, b)| a - b).collect();
        let mut r = self.mass.matvec(&diff);
        let a = assemble_weighted_stiffness(&self.space, &self.control(n, traj, reg));
        a.mul_add(k, &traj.q[n], &mut r);
        let misfit = self
            .observation
            .misfit_load(&self.space, &traj.u[n + 1], self.data.at(n + 1));
        for (ri, mi) in r.iter_mut().zip(misfit) {
            *ri -= 2.0 * k * mi;
        }
        r
    }

    /// Stacked `[F_0..F_{N−1}, G_0..G_{N−1}]`.
    pub fn residual(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> Vec<f64> {
        let n_steps = self.time.n_steps();
        let mut out = Vec::with_capacity(self.n_unknowns());
        for n in 0..n_steps {
            out.extend(self.residual_f(n, traj, reg));
        }
        for n in 0..n_steps {
            out.extend(self.residual_g(n, traj, reg));
        }
        out
    }

    pub fn jacobian(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> HeatJacobianBlocks {
        let k = self.time.k();
        let n_steps = self.time.n_steps();
        let (wl, wr) = self.observation.boundary_weights();
        let mut k11 = Vec::with_capacity(n_steps);
        let mut k12 = Vec::with_capacity(n_steps);
        let mut k21 = Vec::with_capacity(n_steps);
        for n in 0..n_steps {
            let (gu, gq) = self.step_gradients(n, traj);
            let ne = gu.len();
            let mut c11 = vec![0.0; ne];
            let mut c12 = vec![0.0; ne];
            let mut c21 = vec![0.0; ne];
            for e in 0..ne {
                let s = gu[e] * gq[e];
                let h1 = reg.h_prime(s);
                let h2 = reg.h_second(s);
                c11[e] = k * (h1 + h2 * gq[e] * gu[e]);
                c12[e] = k * h2 * gu[e] * gu[e];
                c21[e] = k * h2 * gq[e] * gq[e];
            }
            k11.push(self.mass.add_scaled(&assemble_weighted_stiffness(&self.space, &c11), 1.0));
            k12.push(assemble_weighted_stiffness(&self.space, &c12));
            let mut b21 = assemble_weighted_stiffness(&self.space, &c21);
            b21.add_diagonal(0, -2.0 * k * wl);
            let last = b21.size() - 1;
            b21.add_diagonal(last, -2.0 * k * wr);
            k21.push(b21);
        }
        HeatJacobianBlocks {
            n_nodes: self.space.n_nodes(),
            mass: self.mass.clone(),
            k11_diag: k11,
            k12_diag: k12,
            k21_diag: k21,
        }
    }

    pub fn objective(&self, traj: &HeatTrajectory) -> f64 {
        heat_objective(&traj.u, &self.data, &self.time, self.observation)
    }

    /// `σ̃_n = h'_δ(∇u_{n+1}·∇q_n)`, labelled with time `t_{n+1}`.
    pub fn extract_control(&self, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> ElementTrace {
        let n_steps = self.time.n_steps();
        let mut products = Vec::with_capacity(n_steps);
        let mut sigma = Vec::with_capacity(n_steps);
        for n in 0..n_steps {
            let (gu, gq) = self.step_gradients(n, traj);
            let s: Vec<f64> = gu.iter().zip(gq.iter()).map(|(a, b)| a * b).collect();
            sigma.push(s.iter().map(|v| reg.h_prime(*v)).collect());
            products.push(s);
        }
        ElementTrace {
            times: (1..=n_steps).map(|n| self.time.time(n)).collect(),
            products,
            sigma,
        }
    }
}

/// Newton matrix of the heat system in block form.
///
/// `K11` is lower block-bidiagonal with `M+S_n` on the diagonal and `−M`
/// below it; `K12`, `K21` are block-diagonal; the `(2,2)` block is `K11ᵀ`.
#[derive(Debug, Clone)]
pub struct HeatJacobianBlocks {
    n_nodes: usize,
    mass: TridiagonalMatrix,
    k11_diag: Vec<TridiagonalMatrix>,
    k12_diag: Vec<TridiagonalMatrix>,
    k21_diag: Vec<TridiagonalMatrix>,
}

impl HeatJacobianBlocks {
    pub fn n_steps(&self) -> usize {
        self.k11_diag.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn mass(&self) -> &TridiagonalMatrix {
        &self.mass
    }

    /// Diagonal blocks `M + S_n` of `K11`.
    pub fn k11_diag(&self) -> &[TridiagonalMatrix] {
        &self.k11_diag
    }

    pub fn k12_diag(&self) -> &[TridiagonalMatrix] {
        &self.k12_diag
    }

    pub fn k21_diag(&self) -> &[TridiagonalMatrix] {
        &self.k21_diag
    }

    /// The same operator with `K12` dropped.
    pub fn without_k12(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.k12_diag {
            *b = TridiagonalMatrix::zeros(self.n_nodes);
        }
        out
    }
}

impl LinearOperator for HeatJacobianBlocks {
    fn dim(&self) -> usize {
        2 * self.n_steps() * self.n_nodes
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nn = self.n_nodes;
        let ns = self.n_steps();
        let (xu, xq) = x.split_at(ns * nn);
        y.fill(0.0);
        let (yf, yg) = y.split_at_mut(ns * nn);
        for n in 0..ns {
            let blk = n * nn..(n + 1) * nn;
            let fu = &mut yf[blk.clone()];
            self.k11_diag[n].mul_add(1.0, &xu[blk.clone()], fu);
            if n > 0 {
                self.mass.mul_add(-1.0, &xu[(n - 1) * nn..n * nn], fu);
            }
            self.k12_diag[n].mul_add(1.0, &xq[blk.clone()], fu);

            let gq = &mut yg[blk.clone()];
            self.k21_diag[n].mul_add(1.0, &xu[blk.clone()], gq);
            self.k11_diag[n].mul_add(1.0, &xq[blk.clone()], gq);
            if n + 1 < ns {
                self.mass.mul_add(-1.0, &xq[(n + 1) * nn..(n + 2) * nn], gq);
            }
        }
    }
}

pub(crate) fn push_tridiagonal(
    out: &mut Vec<(usize, usize, f64)>,
    row0: usize,
    col0: usize,
    block: &TridiagonalMatrix,
    scale: f64,
) {
    let n = block.size();
    for i in 0..n {
        out.push((row0 + i, col0 + i, scale * block.main()[i]));
        if i + 1 < n {
            out.push((row0 + i + 1, col0 + i, scale * block.lower()[i]));
            out.push((row0 + i, col0 + i + 1, scale * block.upper()[i]));
        }
    }
}

impl BlockSystem for HeatJacobianBlocks {
    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let nn = self.n_nodes;
        let ns = self.n_steps();
        let q0 = ns * nn;
        let mut t = Vec::with_capacity(ns * nn * 3 * 6);
        for n in 0..ns {
            let b = n * nn;
            push_tridiagonal(&mut t, b, b, &self.k11_diag[n], 1.0);
            if n > 0 {
                push_tridiagonal(&mut t, b, b - nn, &self.mass, -1.0);
            }
            push_tridiagonal(&mut t, b, q0 + b, &self.k12_diag[n], 1.0);
            push_tridiagonal(&mut t, q0 + b, b, &self.k21_diag[n], 1.0);
            push_tridiagonal(&mut t, q0 + b, q0 + b, &self.k11_diag[n], 1.0);
            if n + 1 < ns {
                push_tridiagonal(&mut t, q0 + b, q0 + b + nn, &self.mass, -1.0);
            }
        }
        t
    }

    fn time_ordering(&self) -> Vec<usize> {
        let nn = self.n_nodes;
        let ns = self.n_steps();
        let mut order = Vec::with_capacity(2 * ns * nn);
        for n in 0..ns {
            for i in 0..nn {
                order.push(n * nn + i);
                order.push(ns * nn + n * nn + i);
            }
        }
        order
    }

    fn time_block_len(&self) -> usize {
        2 * self.n_nodes
    }
}
