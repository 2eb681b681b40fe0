//! Wave-speed reconstruction with the implicit midpoint rule for the
//! four-field Hamiltonian system `(u, v, p, q)`, plus the explicit
//! three-level scheme used to synthesize measurements.
//!
//! Unknowns are stacked `[u_1..u_N, v_1..v_N, p_0..p_{N−1}, q_0..q_{N−1}]`
//! with `u_0 = v_0 = 0` and `p_N = q_N = 0`; residuals are stacked
//! `[F¹, F², G¹, G²]` over `n = 0..N−1`.

use crate::error::{Error, Result};
use crate::fem1d::{
    assemble_lumped_mass, assemble_mass, assemble_weighted_stiffness, boundary_load,
    element_gradient, ElementField, NodalField, SpaceGrid, TimeGrid, TridiagonalLu,
    TridiagonalMatrix,
};
use crate::heat::push_tridiagonal;
use crate::regularization::RegularizedHamiltonian;
use crate::solver::{dot, BlockSystem, LinearOperator};
use crate::trace::{BoundaryTrace, ElementTrace, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

impl MassKind {
    pub fn assemble(self, grid: &SpaceGrid) -> TridiagonalMatrix {
        match self {
            MassKind::Consistent => assemble_mass(grid),
            MassKind::Lumped => assemble_lumped_mass(grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeapfrogConfig {
    pub mass: MassKind,
    /// Fraction of the stability limit the time step may use.
    pub cfl_safety: f64,
    /// Any `|u|` above this aborts the solve.
    pub blow_up: f64,
}

impl Default for LeapfrogConfig {
    fn default() -> Self {
        Self {
            mass: MassKind::Consistent,
            cfl_safety: 0.9,
            blow_up: 1e8,
        }
    }
}

impl LeapfrogConfig {
    /// Largest admissible step for coefficient maximum `sigma_max`.
    ///
    /// The largest eigenvalue of `M⁻¹A` is `12σ/h²` with consistent mass and
    /// `4σ/h²` with lumped mass; leapfrog needs `k²λ_max ≤ 4`.
    pub fn step_limit(&self, h: f64, sigma_max: f64) -> f64 {
        let factor = match self.mass {
            MassKind::Consistent => 3.0,
            MassKind::Lumped => 1.0,
        };
        self.cfl_safety * h / (factor * sigma_max).sqrt()
    }
}

/// One step of `M(u_{n+1} − 2u_n + u_{n−1}) = k²(b(j_n) − A·u_n)`, in either direction.
pub struct LeapfrogStepper {
    space: SpaceGrid,
    k: f64,
    mass: TridiagonalMatrix,
    mass_lu: TridiagonalLu,
    stiffness: TridiagonalMatrix,
}

impl LeapfrogStepper {
    pub fn new(space: &SpaceGrid, k: f64, sigma: &[f64], cfg: &LeapfrogConfig) -> Result<Self> {
        if sigma.len() != space.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: space.n_elements(),
                got: sigma.len(),
            });
        }
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("wave coefficient must be positive".into()));
        }
        let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
        let limit = cfg.step_limit(space.h(), sigma_max);
        if k > limit {
            return Err(Error::StabilityBound { k, limit });
        }
        let mass = cfg.mass.assemble(space);
        Ok(Self {
            space: space.clone(),
            k,
            mass_lu: mass.factor()?,
            mass,
            stiffness: assemble_weighted_stiffness(space, sigma),
        })
    }

    /// Given levels `(a, b)` returns `2b − a + k²M⁻¹(b(j) − A·b)`.
    pub fn step(&self, a: &[f64], b: &[f64], flux: (f64, f64)) -> NodalField {
        let mut rhs = boundary_load(&self.space, flux.0, flux.1);
        self.stiffness.mul_add(-1.0, b, &mut rhs);
        self.mass_lu.solve_in_place(&mut rhs);
        let k2 = self.k * self.k;
        rhs.iter()
            .zip(a.iter().zip(b))
            .map(|(r, (ai, bi))| 2.0 * bi - ai + k2 * r)
            .collect()
    }

    pub fn mass(&self) -> &TridiagonalMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &TridiagonalMatrix {
        &self.stiffness
    }
}

/// Explicit data-generation solve with `u_0 = u_1 = 0`; returns all levels.
pub fn forward_wave_solve(
    space: &SpaceGrid,
    time: &TimeGrid,
    sigma: &ElementField,
    flux: &BoundaryTrace,
    cfg: &LeapfrogConfig,
) -> Result<Vec<NodalField>> {
    flux.check_levels(time.n_levels())?;
    let stepper = LeapfrogStepper::new(space, time.k(), sigma, cfg)?;
    let nn = space.n_nodes();
    let mut levels = vec![vec![0.0; nn]; 2.min(time.n_levels())];
    for n in 1..time.n_steps() {
        let next = stepper.step(&levels[n - 1], &levels[n], flux.at(n));
        if next.iter().any(|v| !(v.abs() <= cfg.blow_up)) {
            return Err(Error::BlowUp { level: n + 1 });
        }
        levels.push(next);
    }
    Ok(levels)
}

/// `½(vᵀMv + uᵀAu)`.
pub fn wave_energy(mass: &TridiagonalMatrix, stiffness: &TridiagonalMatrix, u: &[f64], v: &[f64]) -> f64 {
    0.5 * (dot(v, &mass.matvec(v)) + dot(u, &stiffness.matvec(u)))
}

/// Implicit midpoint rule for the forward pair `(u, v)` with a frozen
/// coefficient: `M(v_{n+1}−v_n) + k·A·u_{n+½} = k·b(j_{n+½})`,
/// `u_{n+1} − u_n = k·v_{n+½}`.
pub fn midpoint_wave_forward(
    space: &SpaceGrid,
    time: &TimeGrid,
    sigma: &ElementField,
    flux: &BoundaryTrace,
    initial: Option<(&[f64], &[f64])>,
) -> Result<(Vec<NodalField>, Vec<NodalField>)> {
    flux.check_levels(time.n_levels())?;
    let k = time.k();
    let nn = space.n_nodes();
    let mass = assemble_mass(space);
    let stiffness = assemble_weighted_stiffness(space, sigma);
    let lu = mass.scaled(2.0 / k).add_scaled(&stiffness, 0.5 * k).factor()?;
    let (u0, v0) = match initial {
        Some((u0, v0)) => {
            space.check_nodal(u0)?;
            space.check_nodal(v0)?;
            (u0.to_vec(), v0.to_vec())
        }
        None => (vec![0.0; nn], vec![0.0; nn]),
    };
    let mut us = vec![u0];
    let mut vs = vec![v0];
    for n in 0..time.n_steps() {
        let (u, v) = (&us[n], &vs[n]);
        let (jl, jr) = flux.midpoint(n);
        let mut rhs = boundary_load(space, k * jl, k * jr);
        mass.mul_add(2.0 / k, u, &mut rhs);
        mass.mul_add(2.0, v, &mut rhs);
        stiffness.mul_add(-0.5 * k, u, &mut rhs);
        lu.solve_in_place(&mut rhs);
        let v_next: Vec<f64> = rhs
            .iter()
            .zip(u.iter().zip(v))
            .map(|(un, (uo, vo))| 2.0 / k * (un - uo) - vo)
            .collect();
        us.push(rhs);
        vs.push(v_next);
    }
    Ok((us, vs))
}

/// Time step factor of the adjoint update in the time-symmetric scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointStepScaling {
    /// `k²`, matching the state update.
    #[default]
    KSquared,
    /// A single factor `k`, as the scheme is sometimes written.
    K,
}

/// Residuals of the time-symmetric scheme for `n = 1..N−1`, with
/// `σ̃_n = h'_δ(∇u_n·∇q_n)`:
/// `M(u_{n+1}−2u_n+u_{n−1}) − k²(b(j_n) − A(σ̃_n)u_n)` and
/// `M(q_{n+1}−2q_n+q_{n−1}) − c(2B(u_n−u*_n) − A(σ̃_n)q_n)`.
pub fn time_symmetric_residuals(
    space: &SpaceGrid,
    time: &TimeGrid,
    u: &[NodalField],
    q: &[NodalField],
    flux: &BoundaryTrace,
    data: &BoundaryTrace,
    reg: &RegularizedHamiltonian,
    scaling: AdjointStepScaling,
) -> Vec<(NodalField, NodalField)> {
    let k = time.k();
    let c = match scaling {
        AdjointStepScaling::KSquared => k * k,
        AdjointStepScaling::K => k,
    };
    let mass = assemble_mass(space);
    let second_diff = |x: &[NodalField], n: usize| -> Vec<f64> {
        let d: Vec<f64> = (0..x[n].len()).map(|i| x[n + 1][i] - 2.0 * x[n][i] + x[n - 1][i]).collect();
        mass.matvec(&d)
    };
    (1..time.n_steps())
        .map(|n| {
            let gu = element_gradient(space, &u[n]);
            let gq = element_gradient(space, &q[n]);
            let coeff: Vec<f64> = gu.iter().zip(gq.iter()).map(|(a, b)| reg.h_prime(a * b)).collect();
            let a = assemble_weighted_stiffness(space, &coeff);
            let mut ru = second_diff(u, n);
            let (jl, jr) = flux.at(n);
            let load = boundary_load(space, jl, jr);
            for (r, l) in ru.iter_mut().zip(load) {
                *r -= k * k * l;
            }
            a.mul_add(k * k, &u[n], &mut ru);
            let mut rq = second_diff(q, n);
            let misfit = Observation::BOTH.misfit_load(space, &u[n], data.at(n));
            for (r, m) in rq.iter_mut().zip(misfit) {
                *r -= 2.0 * c * m;
            }
            a.mul_add(c, &q[n], &mut rq);
            (ru, rq)
        })
        .collect()
}

/// All four fields at every level `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveTrajectory {
    pub u: Vec<NodalField>,
    pub v: Vec<NodalField>,
    pub p: Vec<NodalField>,
    pub q: Vec<NodalField>,
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Midpoint-rule misfit `k·Σ_n Σ_ends (u_{n+½} − u*_{n+½})²`.
pub fn wave_objective(u: &[NodalField], data: &BoundaryTrace, time: &TimeGrid, observation: Observation) -> f64 {
    let k = time.k();
    (0..time.n_steps())
        .map(|n| k * observation.misfit(&midpoint(&u[n], &u[n + 1]), data.midpoint(n)))
        .sum()
}

#[derive(Debug, Clone)]
pub struct WaveSystem {
    space: SpaceGrid,
    time: TimeGrid,
    mass: TridiagonalMatrix,
    flux: BoundaryTrace,
    data: BoundaryTrace,
    observation: Observation,
}

impl WaveSystem {
    pub fn new(space: SpaceGrid, time: TimeGrid, flux: BoundaryTrace, data: BoundaryTrace) -> Result<Self> {
        flux.check_levels(time.n_levels())?;
        data.check_levels(time.n_levels())?;
        Ok(Self {
            mass: assemble_mass(&space),
            space,
            time,
            flux,
            data,
            observation: Observation::BOTH,
        })
    }

    pub fn with_observation(mut self, observation: Observation) -> Self {
        self.observation = observation;
        self
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

    pub fn n_unknowns(&self) -> usize {
        4 * self.time.n_steps() * self.space.n_nodes()
    }

    pub fn unpack(&self, x: &[f64]) -> WaveTrajectory {
        let nn = self.space.n_nodes();
        let ns = self.time.n_steps();
        assert_eq!(x.len(), self.n_unknowns(), "stacked wave vector length");
        let chunk = ns * nn;
        let field = |idx: usize| x[idx * chunk..(idx + 1) * chunk].chunks(nn).map(<[f64]>::to_vec);
        let zero = vec![0.0; nn];
        let mut u = vec![zero.clone()];
        u.extend(field(0));
        let mut v = vec![zero.clone()];
        v.extend(field(1));
        let mut p: Vec<NodalField> = field(2).collect();
        p.push(zero.clone());
        let mut q: Vec<NodalField> = field(3).collect();
        q.push(zero);
        WaveTrajectory { u, v, p, q }
    }

    pub fn pack(&self, traj: &WaveTrajectory) -> Vec<f64> {
        let ns = self.time.n_steps();
        let mut x = Vec::with_capacity(self.n_unknowns());
        for f in [&traj.u[1..=ns], &traj.v[1..=ns], &traj.p[..ns], &traj.q[..ns]] {
            for level in f {
                x.extend_from_slice(level);
            }
        }
        x
    }

    fn midpoint_gradients(&self, n: usize, traj: &WaveTrajectory) -> (ElementField, ElementField) {
        (
            element_gradient(&self.space, &midpoint(&traj.u[n], &traj.u[n + 1])),
            element_gradient(&self.space, &midpoint(&traj.q[n], &traj.q[n + 1])),
        )
    }

    /// `[F¹_n, F²_n, G¹_n, G²_n]` with `σ̃ = h'_δ(∇u_{n+½}·∇q_{n+½})`.
    pub fn midpoint_residuals(&self, n: usize, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> [NodalField; 4] {
        let k = self.time.k();
        let nn = self.space.n_nodes();
        let (gu, gq) = self.midpoint_gradients(n, traj);
        let coeff: Vec<f64> = gu.iter().zip(gq.iter()).map(|(a, b)| reg.h_prime(a * b)).collect();
        let a = assemble_weighted_stiffness(&self.space, &coeff);
        let u_mid = midpoint(&traj.u[n], &traj.u[n + 1]);
        let q_mid = midpoint(&traj.q[n], &traj.q[n + 1]);

        let diff = |x: &[NodalField], sign: f64| -> Vec<f64> {
            (0..nn).map(|i| sign * (x[n + 1][i] - x[n][i])).collect()
        };

        let mut f1 = self.mass.matvec(&diff(&traj.v, 1.0));
        a.mul_add(k, &u_mid, &mut f1);
        let (jl, jr) = self.flux.midpoint(n);
        f1[0] -= k * jl;
        f1[nn - 1] -= k * jr;

        let v_mid = midpoint(&traj.v[n], &traj.v[n + 1]);
        let mut kin: Vec<f64> = diff(&traj.u, 1.0);
        for (d, vm) in kin.iter_mut().zip(&v_mid) {
            *d -= k * vm;
        }
        let f2 = self.mass.matvec(&kin);

        let p_mid = midpoint(&traj.p[n], &traj.p[n + 1]);
        let mut adj: Vec<f64> = diff(&traj.q, -1.0);
        for (d, pm) in adj.iter_mut().zip(&p_mid) {
            *d -= k * pm;
        }
        let g1 = self.mass.matvec(&adj);

        let mut g2 = self.mass.matvec(&diff(&traj.p, -1.0));
        a.mul_add(k, &q_mid, &mut g2);
        let misfit = self.observation.misfit_load(&self.space, &u_mid, self.data.midpoint(n));
        for (g, m) in g2.iter_mut().zip(misfit) {
            *g -= 2.0 * k * m;
        }
        [f1, f2, g1, g2]
    }

    pub fn residual(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> Vec<f64> {
        let ns = self.time.n_steps();
        let per_step: Vec<[NodalField; 4]> = (0..ns).map(|n| self.midpoint_residuals(n, traj, reg)).collect();
        let mut out = Vec::with_capacity(self.n_unknowns());
        for field in 0..4 {
            for r in &per_step {
                out.extend_from_slice(&r[field]);
            }
        }
        out
    }

    pub fn jacobian(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> WaveJacobianBlocks {
        let k = self.time.k();
        let ns = self.time.n_steps();
        let (wl, wr) = self.observation.boundary_weights();
        let mut k11 = Vec::with_capacity(ns);
        let mut k14 = Vec::with_capacity(ns);
        let mut k41 = Vec::with_capacity(ns);
        let mut k44 = Vec::with_capacity(ns);
        for n in 0..ns {
            let (gu, gq) = self.midpoint_gradients(n, traj);
            let ne = gu.len();
            let mut c11 = vec![0.0; ne];
            let mut c14 = vec![0.0; ne];
            let mut c41 = vec![0.0; ne];
            let mut c44 = vec![0.0; ne];
            for e in 0..ne {
                let s = gu[e] * gq[e];
                let h1 = reg.h_prime(s);
                let h2 = reg.h_second(s);
                c11[e] = 0.5 * k * (h2 * gq[e] * gu[e] + h1);
                c44[e] = 0.5 * k * (h2 * gu[e] * gq[e] + h1);
                c14[e] = 0.5 * k * h2 * gu[e] * gu[e];
                c41[e] = 0.5 * k * h2 * gq[e] * gq[e];
            }
            k11.push(assemble_weighted_stiffness(&self.space, &c11));
            k44.push(assemble_weighted_stiffness(&self.space, &c44));
            k14.push(assemble_weighted_stiffness(&self.space, &c14));
            let mut b41 = assemble_weighted_stiffness(&self.space, &c41);
            b41.add_diagonal(0, -k * wl);
            let last = b41.size() - 1;
            b41.add_diagonal(last, -k * wr);
            k41.push(b41);
        }
        WaveJacobianBlocks {
            n_nodes: self.space.n_nodes(),
            k,
            mass: self.mass.clone(),
            k11,
            k14,
            k41,
            k44,
        }
    }

    pub fn objective(&self, traj: &WaveTrajectory) -> f64 {
        wave_objective(&traj.u, &self.data, &self.time, self.observation)
    }

    /// `σ̃_n = h'_δ(∇u_{n+½}·∇q_{n+½})`, labelled with `t_{n+½}`.
    pub fn extract_control(&self, traj: &WaveTrajectory, reg: &RegularizedHamiltonian) -> ElementTrace {
        let ns = self.time.n_steps();
        let mut products = Vec::with_capacity(ns);
        let mut sigma = Vec::with_capacity(ns);
        for n in 0..ns {
            let (gu, gq) = self.midpoint_gradients(n, traj);
            let s: Vec<f64> = gu.iter().zip(gq.iter()).map(|(a, b)| a * b).collect();
            sigma.push(s.iter().map(|v| reg.h_prime(*v)).collect());
            products.push(s);
        }
        ElementTrace {
            times: (0..ns).map(|n| 0.5 * (self.time.time(n) + self.time.time(n + 1))).collect(),
            products,
            sigma,
        }
    }
}

/// Newton matrix of the midpoint wave system.
///
/// Nonzero blocks: `K11`, `K41` lower and `K14`, `K44` upper block-bidiagonal
/// with the same step-`n` matrix on both diagonals; `K12 = K21` lower
/// bidiagonal `(M, −M)`; `K34 = K43` upper bidiagonal `(M, −M)`; `K22` lower
/// and `K33` upper bidiagonal with `−kM/2` on both diagonals.
#[derive(Debug, Clone)]
pub struct WaveJacobianBlocks {
    n_nodes: usize,
    k: f64,
    mass: TridiagonalMatrix,
    k11: Vec<TridiagonalMatrix>,
    k14: Vec<TridiagonalMatrix>,
    k41: Vec<TridiagonalMatrix>,
    k44: Vec<TridiagonalMatrix>,
}

impl WaveJacobianBlocks {
    pub fn n_steps(&self) -> usize {
        self.k11.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn mass(&self) -> &TridiagonalMatrix {
        &self.mass
    }

    pub fn step(&self) -> f64 {
        self.k
    }

    pub fn k11(&self) -> &[TridiagonalMatrix] {
        &self.k11
    }

    pub fn k14(&self) -> &[TridiagonalMatrix] {
        &self.k14
    }

    pub fn k41(&self) -> &[TridiagonalMatrix] {
        &self.k41
    }

    pub fn k44(&self) -> &[TridiagonalMatrix] {
        &self.k44
    }

    pub fn without_k14(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.k14 {
            *b = TridiagonalMatrix::zeros(self.n_nodes);
        }
        out
    }

    /// Applies the `K12` block (`M` on the diagonal, `−M` below) to a stacked field.
    pub fn apply_k12(&self, x: &[f64]) -> Vec<f64> {
        let nn = self.n_nodes;
        let mut y = vec![0.0; x.len()];
        for n in 0..self.n_steps() {
            let out = &mut y[n * nn..(n + 1) * nn];
            self.mass.mul_add(1.0, &x[n * nn..(n + 1) * nn], out);
            if n > 0 {
                self.mass.mul_add(-1.0, &x[(n - 1) * nn..n * nn], out);
            }
        }
        y
    }
}

impl LinearOperator for WaveJacobianBlocks {
    fn dim(&self) -> usize {
        4 * self.n_steps() * self.n_nodes
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nn = self.n_nodes;
        let ns = self.n_steps();
        let chunk = ns * nn;
        let (xu, rest) = x.split_at(chunk);
        let (xv, rest) = rest.split_at(chunk);
        let (xp, xq) = rest.split_at(chunk);
        y.fill(0.0);
        let (yf1, rest) = y.split_at_mut(chunk);
        let (yf2, rest) = rest.split_at_mut(chunk);
        let (yg1, yg2) = rest.split_at_mut(chunk);
        let half_k = 0.5 * self.k;
        fn blk(v: &[f64], n: usize, nn: usize) -> &[f64] {
            &v[n * nn..(n + 1) * nn]
        }
        let zero = vec![0.0; nn];
        for n in 0..ns {
            let r = n * nn..(n + 1) * nn;
            let u_prev = if n > 0 { blk(xu, n - 1, nn) } else { &zero[..] };
            let v_prev = if n > 0 { blk(xv, n - 1, nn) } else { &zero[..] };
            let p_next = if n + 1 < ns { blk(xp, n + 1, nn) } else { &zero[..] };
            let q_next = if n + 1 < ns { blk(xq, n + 1, nn) } else { &zero[..] };

            let f1 = &mut yf1[r.clone()];
            self.k11[n].mul_add(1.0, blk(xu, n, nn), f1);
            self.k11[n].mul_add(1.0, u_prev, f1);
            self.mass.mul_add(1.0, blk(xv, n, nn), f1);
            self.mass.mul_add(-1.0, v_prev, f1);
            self.k14[n].mul_add(1.0, blk(xq, n, nn), f1);
            self.k14[n].mul_add(1.0, q_next, f1);

            let f2 = &mut yf2[r.clone()];
            self.mass.mul_add(1.0, blk(xu, n, nn), f2);
            self.mass.mul_add(-1.0, u_prev, f2);
            self.mass.mul_add(-half_k, blk(xv, n, nn), f2);
            self.mass.mul_add(-half_k, v_prev, f2);

            let g1 = &mut yg1[r.clone()];
            self.mass.mul_add(-half_k, blk(xp, n, nn), g1);
            self.mass.mul_add(-half_k, p_next, g1);
            self.mass.mul_add(1.0, blk(xq, n, nn), g1);
            self.mass.mul_add(-1.0, q_next, g1);

            let g2 = &mut yg2[r];
            self.k41[n].mul_add(1.0, blk(xu, n, nn), g2);
            self.k41[n].mul_add(1.0, u_prev, g2);
            self.mass.mul_add(1.0, blk(xp, n, nn), g2);
            self.mass.mul_add(-1.0, p_next, g2);
            self.k44[n].mul_add(1.0, blk(xq, n, nn), g2);
            self.k44[n].mul_add(1.0, q_next, g2);
        }
    }
}

impl BlockSystem for WaveJacobianBlocks {
    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let nn = self.n_nodes;
        let ns = self.n_steps();
        let chunk = ns * nn;
        let (u0, v0, p0, q0) = (0, chunk, 2 * chunk, 3 * chunk);
        let half_k = 0.5 * self.k;
        let m = &self.mass;
        let mut t = Vec::new();
        for n in 0..ns {
            let b = n * nn;
            // F¹ rows
            push_tridiagonal(&mut t, u0 + b, u0 + b, &self.k11[n], 1.0);
            push_tridiagonal(&mut t, u0 + b, v0 + b, m, 1.0);
            push_tridiagonal(&mut t, u0 + b, q0 + b, &self.k14[n], 1.0);
            // F² rows
            push_tridiagonal(&mut t, v0 + b, u0 + b, m, 1.0);
            push_tridiagonal(&mut t, v0 + b, v0 + b, m, -half_k);
            // G¹ rows
            push_tridiagonal(&mut t, p0 + b, p0 + b, m, -half_k);
            push_tridiagonal(&mut t, p0 + b, q0 + b, m, 1.0);
            // G² rows
            push_tridiagonal(&mut t, q0 + b, u0 + b, &self.k41[n], 1.0);
            push_tridiagonal(&mut t, q0 + b, p0 + b, m, 1.0);
            push_tridiagonal(&mut t, q0 + b, q0 + b, &self.k44[n], 1.0);
            if n > 0 {
                let c = b - nn;
                push_tridiagonal(&mut t, u0 + b, u0 + c, &self.k11[n], 1.0);
                push_tridiagonal(&mut t, u0 + b, v0 + c, m, -1.0);
                push_tridiagonal(&mut t, v0 + b, u0 + c, m, -1.0);
                push_tridiagonal(&mut t, v0 + b, v0 + c, m, -half_k);
                push_tridiagonal(&mut t, q0 + b, u0 + c, &self.k41[n], 1.0);
            }
            if n + 1 < ns {
                let c = b + nn;
                push_tridiagonal(&mut t, u0 + b, q0 + c, &self.k14[n], 1.0);
                push_tridiagonal(&mut t, p0 + b, p0 + c, m, -half_k);
                push_tridiagonal(&mut t, p0 + b, q0 + c, m, -1.0);
                push_tridiagonal(&mut t, q0 + b, p0 + c, m, -1.0);
                push_tridiagonal(&mut t, q0 + b, q0 + c, &self.k44[n], 1.0);
            }
        }
        t
    }

    fn time_ordering(&self) -> Vec<usize> {
        let nn = self.n_nodes;
        let chunk = self.n_steps() * nn;
        let mut order = Vec::with_capacity(4 * chunk);
        for n in 0..self.n_steps() {
            for i in 0..nn {
                for field in 0..4 {
                    order.push(field * chunk + n * nn + i);
                }
            }
        }
        order
    }

    fn time_block_len(&self) -> usize {
        4 * self.n_nodes
    }
}

/// One sweep of the 2×2 block Gauss–Seidel method from `q̂ = 0`.
///
/// The Schur complements `K11 − K12·K22⁻¹·K21` and `K44 − K43·K33⁻¹·K34`
/// are applied implicitly: forward substitution in time for `(û, v̂)` and
/// backward substitution for `(p̂, q̂)`, one tridiagonal solve with
/// `K_step + (2/k)M` per step and direction plus mass solves.
pub struct WaveGaussSeidel<'a> {
    blocks: &'a WaveJacobianBlocks,
    mass_lu: TridiagonalLu,
    forward: Vec<TridiagonalLu>,
    backward: Vec<TridiagonalLu>,
}

impl<'a> WaveGaussSeidel<'a> {
    pub fn new(blocks: &'a WaveJacobianBlocks) -> Result<Self> {
        let two_over_k = 2.0 / blocks.k;
        let shifted = |b: &TridiagonalMatrix| b.add_scaled(&blocks.mass, two_over_k).factor();
        Ok(Self {
            blocks,
            mass_lu: blocks.mass.factor()?,
            forward: blocks.k11.iter().map(shifted).collect::<Result<_>>()?,
            backward: blocks.k44.iter().map(shifted).collect::<Result<_>>()?,
        })
    }
}

impl LinearOperator for WaveGaussSeidel<'_> {
    fn dim(&self) -> usize {
        self.blocks.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let b = self.blocks;
        let nn = b.n_nodes;
        let ns = b.n_steps();
        let chunk = ns * nn;
        let k = b.k;
        let m = &b.mass;
        let (f1, rest) = x.split_at(chunk);
        let (f2, rest) = rest.split_at(chunk);
        let (g1, g2) = rest.split_at(chunk);
        let (yu, rest) = y.split_at_mut(chunk);
        let (yv, rest) = rest.split_at_mut(chunk);
        let (yp, yq) = rest.split_at_mut(chunk);

        let mut u_prev = vec![0.0; nn];
        let mut v_prev = vec![0.0; nn];
        for n in 0..ns {
            let r = n * nn..(n + 1) * nn;
            let mut rhs: Vec<f64> = f1[r.clone()].iter().zip(&f2[r.clone()]).map(|(a, c)| a + 2.0 / k * c).collect();
            m.mul_add(2.0, &v_prev, &mut rhs);
            m.mul_add(2.0 / k, &u_prev, &mut rhs);
            b.k11[n].mul_add(-1.0, &u_prev, &mut rhs);
            self.forward[n].solve_in_place(&mut rhs);
            let minv_f2 = self.mass_lu.solve(&f2[r.clone()]);
            let v: Vec<f64> = (0..nn)
                .map(|i| 2.0 / k * (rhs[i] - u_prev[i] - minv_f2[i]) - v_prev[i])
                .collect();
            yu[r.clone()].copy_from_slice(&rhs);
            yv[r].copy_from_slice(&v);
            u_prev = rhs;
            v_prev = v;
        }

        let mut p_next = vec![0.0; nn];
        let mut q_next = vec![0.0; nn];
        for n in (0..ns).rev() {
            let r = n * nn..(n + 1) * nn;
            let mut rhs: Vec<f64> = g2[r.clone()].iter().zip(&g1[r.clone()]).map(|(a, c)| a + 2.0 / k * c).collect();
            b.k41[n].mul_add(-1.0, &yu[r.clone()], &mut rhs);
            if n > 0 {
                b.k41[n].mul_add(-1.0, &yu[(n - 1) * nn..n * nn], &mut rhs);
            }
            m.mul_add(2.0, &p_next, &mut rhs);
            m.mul_add(2.0 / k, &q_next, &mut rhs);
            b.k44[n].mul_add(-1.0, &q_next, &mut rhs);
            self.backward[n].solve_in_place(&mut rhs);
            let minv_g1 = self.mass_lu.solve(&g1[r.clone()]);
            let p: Vec<f64> = (0..nn)
                .map(|i| 2.0 / k * (rhs[i] - q_next[i] - minv_g1[i]) - p_next[i])
                .collect();
            yq[r.clone()].copy_from_slice(&rhs);
            yp[r].copy_from_slice(&p);
            q_next = rhs;
            p_next = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularization::ControlBounds;
    use crate::solver::banded_direct_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reg(delta: f64) -> RegularizedHamiltonian {
        RegularizedHamiltonian::new(ControlBounds::new(0.5, 1.0).unwrap(), delta).unwrap()
    }

    fn random_system(ne: usize, ns: usize, seed: u64) -> (WaveSystem, WaveTrajectory) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SpaceGrid::new(0.0, 1.0, ne).unwrap();
        let time = TimeGrid::new(0.5, ns).unwrap();
        let mut rv = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let flux = BoundaryTrace::new(rv(ns + 1), rv(ns + 1)).unwrap();
        let data = BoundaryTrace::new(rv(ns + 1), rv(ns + 1)).unwrap();
        let sys = WaveSystem::new(space, time, flux, data).unwrap();
        let x = rv(sys.n_unknowns());
        let traj = sys.unpack(&x);
        (sys, traj)
    }

    fn burst(time: &TimeGrid) -> BoundaryTrace {
        let j: Vec<f64> = time
            .times()
            .iter()
            .map(|t| if *t < 0.5 { (4.0 * t).sin() } else { 0.0 })
            .collect();
        BoundaryTrace::new(j.clone(), j).unwrap()
    }

    #[test]
    fn leapfrog_zero_flux_stays_zero() {
        let space = SpaceGrid::new(0.0, 1.0, 10).unwrap();
        let time = TimeGrid::new(1.0, 50).unwrap();
        let u = forward_wave_solve(&space, &time, &ElementField::constant(10, 1.0), &BoundaryTrace::zeros(51), &LeapfrogConfig::default()).unwrap();
        assert_eq!(u.len(), 51);
        assert!(u.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn leapfrog_rejects_large_steps() {
        let space = SpaceGrid::new(0.0, 1.0, 50).unwrap();
        let time = TimeGrid::new(1.0, 50).unwrap();
        let err = forward_wave_solve(&space, &time, &ElementField::constant(50, 1.0), &BoundaryTrace::zeros(51), &LeapfrogConfig::default()).unwrap_err();
        assert!(matches!(err, Error::StabilityBound { .. }));
    }

    #[test]
    fn leapfrog_is_reversible() {
        for mass in [MassKind::Consistent, MassKind::Lumped] {
            let cfg = LeapfrogConfig { mass, ..Default::default() };
            let space = SpaceGrid::new(0.0, 1.0, 20).unwrap();
            let time = TimeGrid::new(1.0, 200).unwrap();
            let sigma = ElementField::constant(20, 1.0);
            let flux = burst(&time);
            let u = forward_wave_solve(&space, &time, &sigma, &flux, &cfg).unwrap();
            let stepper = LeapfrogStepper::new(&space, time.k(), &sigma, &cfg).unwrap();
            let n = time.n_steps();
            let (mut a, mut b) = (u[n].clone(), u[n - 1].clone());
            for level in (1..n).rev() {
                let prev = stepper.step(&a, &b, flux.at(level));
                a = b;
                b = prev;
            }
            for (x, y) in a.iter().chain(&b).zip(u[1].iter().chain(&u[0])) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn leapfrog_energy_stays_bounded() {
        let space = SpaceGrid::new(0.0, 1.0, 20).unwrap();
        let time = TimeGrid::new(20.0, 2000).unwrap();
        let sigma = ElementField::constant(20, 1.0);
        let cfg = LeapfrogConfig::default();
        let u = forward_wave_solve(&space, &time, &sigma, &burst(&time), &cfg).unwrap();
        let stepper = LeapfrogStepper::new(&space, time.k(), &sigma, &cfg).unwrap();
        let k = time.k();
        // staggered energy after the burst has ended
        let energies: Vec<f64> = (100..2000)
            .map(|n| {
                let v: Vec<f64> = (0..21).map(|i| (u[n + 1][i] - u[n][i]) / k).collect();
                let mid: Vec<f64> = (0..21).map(|i| 0.5 * (u[n + 1][i] + u[n][i])).collect();
                wave_energy(stepper.mass(), stepper.stiffness(), &mid, &v)
            })
            .collect();
        let first: f64 = energies[..200].iter().sum::<f64>() / 200.0;
        let last: f64 = energies[energies.len() - 200..].iter().sum::<f64>() / 200.0;
        let max = energies.iter().cloned().fold(0.0, f64::max);
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(first > 0.0);
        assert!((last - first).abs() / first < 1e-2, "drift {}", (last - first) / first);
        assert!(max / min < 1.5);
    }

    #[test]
    fn midpoint_conserves_energy_without_flux() {
        let space = SpaceGrid::new(0.0, 1.0, 16).unwrap();
        let time = TimeGrid::new(1.0, 100).unwrap();
        let sigma = ElementField::constant(16, 1.0);
        let u0: Vec<f64> = space.nodes().iter().map(|x| (3.0 * x).cos()).collect();
        let v0: Vec<f64> = space.nodes().iter().map(|x| x * x).collect();
        let (us, vs) = midpoint_wave_forward(&space, &time, &sigma, &BoundaryTrace::zeros(101), Some((&u0, &v0))).unwrap();
        let m = assemble_mass(&space);
        let a = assemble_weighted_stiffness(&space, &sigma);
        let e0 = wave_energy(&m, &a, &us[0], &vs[0]);
        for n in 1..=100 {
            let e = wave_energy(&m, &a, &us[n], &vs[n]);
            assert!((e - e0).abs() / e0 < 1e-10);
        }
    }

    #[test]
    fn zero_everything_gives_zero_residuals() {
        let space = SpaceGrid::new(0.0, 1.0, 4).unwrap();
        let time = TimeGrid::new(1.0, 3).unwrap();
        let sys = WaveSystem::new(space, time, BoundaryTrace::zeros(4), BoundaryTrace::zeros(4)).unwrap();
        let traj = sys.unpack(&vec![0.0; sys.n_unknowns()]);
        assert!(sys.residual(&traj, &reg(0.1)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kinematic_residual_vanishes_on_consistent_trajectory() {
        let (sys, mut traj) = random_system(5, 4, 3);
        let k = sys.time().k();
        for n in 0..4 {
            traj.u[n + 1] = (0..6).map(|i| traj.u[n][i] + k * 0.5 * (traj.v[n][i] + traj.v[n + 1][i])).collect();
        }
        for n in 0..4 {
            let [_, f2, _, _] = sys.midpoint_residuals(n, &traj, &reg(0.1));
            assert!(f2.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn residuals_match_dense_oracle() {
        let (sys, traj) = random_system(4, 3, 17);
        let r = reg(0.3);
        let k = sys.time().k();
        let h = sys.space().h();
        let nn = 5;
        // hat-function mass and stiffness with Simpson's rule per element
        let mut m = vec![vec![0.0; nn]; nn];
        for e in 0..4 {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let phi = |loc: usize, xi: f64| if loc == 0 { 1.0 - xi } else { xi };
                let f = |xi: f64| phi(i, xi) * phi(j, xi);
                m[e + i][e + j] += h / 6.0 * (f(0.0) + 4.0 * f(0.5) + f(1.0));
            }
        }
        let mul = |a: &Vec<Vec<f64>>, x: &[f64]| -> Vec<f64> { a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect() };
        for n in 0..3 {
            let mid = |x: &Vec<NodalField>| -> Vec<f64> { (0..nn).map(|i| 0.5 * (x[n][i] + x[n + 1][i])).collect() };
            let (um, vm, pm, qm) = (mid(&traj.u), mid(&traj.v), mid(&traj.p), mid(&traj.q));
            let mut a = vec![vec![0.0; nn]; nn];
            for e in 0..4 {
                let s = (um[e + 1] - um[e]) / h * (qm[e + 1] - qm[e]) / h;
                let c = r.h_prime(s) / h;
                a[e][e] += c;
                a[e + 1][e + 1] += c;
                a[e][e + 1] -= c;
                a[e + 1][e] -= c;
            }
            let dv: Vec<f64> = (0..nn).map(|i| traj.v[n + 1][i] - traj.v[n][i]).collect();
            let mut f1 = mul(&m, &dv);
            let au = mul(&a, &um);
            for i in 0..nn {
                f1[i] += k * au[i];
            }
            let (jl, jr) = sys.flux().midpoint(n);
            f1[0] -= k * jl;
            f1[nn - 1] -= k * jr;
            let kin: Vec<f64> = (0..nn).map(|i| traj.u[n + 1][i] - traj.u[n][i] - k * vm[i]).collect();
            let f2 = mul(&m, &kin);
            let adj: Vec<f64> = (0..nn).map(|i| traj.q[n][i] - traj.q[n + 1][i] - k * pm[i]).collect();
            let g1 = mul(&m, &adj);
            let dp: Vec<f64> = (0..nn).map(|i| traj.p[n][i] - traj.p[n + 1][i]).collect();
            let mut g2 = mul(&m, &dp);
            let aq = mul(&a, &qm);
            for i in 0..nn {
                g2[i] += k * aq[i];
            }
            let (dl, dr) = sys.data().midpoint(n);
            g2[0] -= 2.0 * k * (um[0] - dl);
            g2[nn - 1] -= 2.0 * k * (um[nn - 1] - dr);

            let got = sys.midpoint_residuals(n, &traj, &r);
            for (oracle, imp) in [f1, f2, g1, g2].iter().zip(got.iter()) {
                for i in 0..nn {
                    assert!((oracle[i] - imp[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (sys, traj) = random_system(5, 5, 23);
        let r = reg(0.5);
        let x = sys.pack(&traj);
        let jac = sys.jacobian(&traj, &r);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let d: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eps = 1e-6;
            let plus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
            let rp = sys.residual(&sys.unpack(&plus), &r);
            let rm = sys.residual(&sys.unpack(&minus), &r);
            let jd = jac.apply_vec(&d);
            let err: f64 = rp.iter().zip(&rm).zip(&jd).map(|((a, b), c)| ((a - b) / (2.0 * eps) - c).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = jd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / scale < 1e-5, "relative error {}", err / scale);
        }
    }

    #[test]
    fn second_derivative_blocks_vanish_for_large_delta() {
        let (sys, traj) = random_system(5, 3, 8);
        let jac = sys.jacobian(&traj, &reg(1e12));
        let k = sys.time().k();
        for b in jac.k14() {
            assert!(b.main().iter().all(|v| v.abs() < 1e-9));
        }
        let plain = assemble_weighted_stiffness(sys.space(), &[0.5 * k * 0.75; 5]);
        for b in jac.k11().iter().chain(jac.k44()) {
            for (x, y) in b.main().iter().zip(plain.main()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        for b in jac.k41() {
            assert!(b.main()[1..5].iter().all(|v| v.abs() < 1e-9));
            assert!((b.main()[0] + k).abs() < 1e-9);
        }
    }

    #[test]
    fn k12_is_mass_difference_stencil() {
        let (sys, traj) = random_system(4, 3, 1);
        let jac = sys.jacobian(&traj, &reg(0.2));
        let x: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let y = jac.apply_k12(&x);
        let m = sys.mass();
        for n in 0..3 {
            let mut diff = x[n * 5..(n + 1) * 5].to_vec();
            if n > 0 {
                for i in 0..5 {
                    diff[i] -= x[(n - 1) * 5 + i];
                }
            }
            let expect = m.matvec(&diff);
            for i in 0..5 {
                assert!((y[n * 5 + i] - expect[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gauss_seidel_sweep_solves_system_without_k14() {
        let (sys, traj) = random_system(2, 2, 31);
        let jac = sys.jacobian(&traj, &reg(0.4));
        let gs = WaveGaussSeidel::new(&jac).unwrap();
        let rhs: Vec<f64> = (0..jac.dim()).map(|i| ((i * 7) as f64).cos()).collect();
        let sweep = gs.apply_vec(&rhs);
        let reduced = jac.without_k14();
        let back = reduced.apply_vec(&sweep);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-10);
        }
        let direct = banded_direct_solve(&reduced, &rhs).unwrap();
        for (a, b) in sweep.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        assert!(gs.apply_vec(&vec![0.0; jac.dim()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn triplets_agree_with_operator() {
        let (sys, traj) = random_system(3, 3, 4);
        let jac = sys.jacobian(&traj, &reg(0.3));
        let n = jac.dim();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, j, v) in jac.triplets() {
            dense[i][j] += v;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos()).collect();
        let y = jac.apply_vec(&x);
        for i in 0..n {
            let yd: f64 = dense[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((y[i] - yd).abs() < 1e-13);
        }
    }

    #[test]
    fn time_symmetric_scheme_switches_adjoint_factor() {
        let space = SpaceGrid::new(0.0, 1.0, 6).unwrap();
        let time = TimeGrid::new(1.0, 200).unwrap();
        let sigma = ElementField::constant(6, 0.75);
        let flux = burst(&time);
        let u = forward_wave_solve(&space, &time, &sigma, &flux, &LeapfrogConfig::default()).unwrap();
        let q = vec![vec![0.0; 7]; 201];
        let data = BoundaryTrace::from_levels(&u);
        // q ≡ 0 and matching data: σ̃ = σ̄ and both residuals vanish
        let res = time_symmetric_residuals(&space, &time, &u, &q, &flux, &data, &reg(0.1), AdjointStepScaling::KSquared);
        for (ru, rq) in &res {
            assert!(ru.iter().chain(rq).all(|v| v.abs() < 1e-12));
        }
        let shifted = BoundaryTrace::new(vec![1.0; 201], vec![1.0; 201]).unwrap();
        let a = time_symmetric_residuals(&space, &time, &u, &q, &flux, &shifted, &reg(0.1), AdjointStepScaling::KSquared);
        let b = time_symmetric_residuals(&space, &time, &u, &q, &flux, &shifted, &reg(0.1), AdjointStepScaling::K);
        let ratio = b[10].1[0] / a[10].1[0];
        assert!((ratio - 1.0 / time.k()).abs() < 1e-6 * ratio);
    }
}
