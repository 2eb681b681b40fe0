//! Discrete value function of the heat problem, used to check that the
//! discrete adjoint is the gradient of the discrete value.

use crate::error::{Error, Result};
use crate::fem1d::{element_gradient, NodalField};
use crate::heat::{HeatSystem, HeatTrajectory};
use crate::regularization::RegularizedHamiltonian;
use crate::solver::{KrylovConfig, NewtonConfig};

use super::continuation::{newton_stage, LinearSolver};

/// `k·Σ_n [ℓ(u_{n+1}) + Σ_e h·(h'_δ(s)·s − h_δ(s))]` with `s = ∇u_{n+1}·∇q_n`
/// and `ℓ` the observed endpoint misfit.
pub fn trajectory_value(system: &HeatSystem, traj: &HeatTrajectory, reg: &RegularizedHamiltonian) -> f64 {
    let k = system.time().k();
    let h = system.space().h();
    let obs = system.observation();
    (0..system.time().n_steps())
        .map(|n| {
            let gu = element_gradient(system.space(), &traj.u[n + 1]);
            let gq = element_gradient(system.space(), &traj.q[n]);
            let correction: f64 = gu
                .iter()
                .zip(gq.iter())
                .map(|(a, b)| {
                    let s = a * b;
                    h * (reg.h_prime(s) * s - reg.h_delta(s))
                })
                .sum();
            k * (obs.misfit(&traj.u[n + 1], system.data().at(n + 1)) + correction)
        })
        .sum()
}

/// Solves the coupled system started from `phi0` and returns its value and trajectory.
pub fn discrete_value(
    phi0: NodalField,
    reg: &RegularizedHamiltonian,
    system: &HeatSystem,
    newton: &NewtonConfig,
    guess: Option<&HeatTrajectory>,
) -> Result<(f64, HeatTrajectory)> {
    let sys = system.clone().with_initial_state(phi0)?;
    let x0 = guess.map_or_else(|| vec![0.0; sys.n_unknowns()], |g| sys.pack(g));
    let (report, _) = newton_stage(&sys, reg, x0, newton, &KrylovConfig::default(), LinearSolver::Direct);
    if !report.converged() {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual(),
        });
    }
    let traj = sys.unpack(&report.solution);
    Ok((trajectory_value(&sys, &traj, reg), traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::{SpaceGrid, TimeGrid};
    use crate::regularization::ControlBounds;
    use crate::trace::BoundaryTrace;

    fn reg(delta: f64) -> RegularizedHamiltonian {
        RegularizedHamiltonian::new(ControlBounds::new(0.5, 1.0).unwrap(), delta).unwrap()
    }

    fn system(zero: bool) -> HeatSystem {
        let space = SpaceGrid::new(0.0, 1.0, 5).unwrap();
        let time = TimeGrid::new(0.5, 5).unwrap();
        if zero {
            return HeatSystem::new(space, time, BoundaryTrace::zeros(6), BoundaryTrace::zeros(6)).unwrap();
        }
        let flux = BoundaryTrace::new((0..6).map(|n| (n as f64 * 0.7).sin()).collect(), vec![0.3; 6]).unwrap();
        let data = BoundaryTrace::new((0..6).map(|n| 0.1 * n as f64).collect(), (0..6).map(|n| -0.05 * n as f64).collect()).unwrap();
        HeatSystem::new(space, time, flux, data).unwrap()
    }

    #[test]
    fn zero_problem_has_zero_value() {
        let (v, _) = discrete_value(vec![0.0; 6], &reg(0.1), &system(true), &NewtonConfig::default(), None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn value_without_adjoint_is_the_objective() {
        let sys = system(false);
        let u: Vec<NodalField> = (0..6).map(|n| (0..6).map(|i| (n * i) as f64 * 0.1).collect()).collect();
        let traj = HeatTrajectory { u, q: vec![vec![0.0; 6]; 6] };
        let r = reg(0.01);
        assert!((trajectory_value(&sys, &traj, &r) - sys.objective(&traj)).abs() < 1e-15);
    }

    #[test]
    fn value_gradient_is_mass_times_initial_adjoint() {
        let sys = system(false);
        let r = reg(1e-2);
        let newton = NewtonConfig {
            residual_tol: 1e-13,
            max_iters: 100,
            ..Default::default()
        };
        let phi0: Vec<f64> = (0..6).map(|i| 0.2 * (i as f64).cos()).collect();
        let (_, traj) = discrete_value(phi0.clone(), &r, &sys, &newton, None).unwrap();
        let mq0 = sys.mass().matvec(&traj.q[0]);
        let eps = 1e-6;
        for i in 0..6 {
            let mut plus = phi0.clone();
            plus[i] += eps;
            let mut minus = phi0.clone();
            minus[i] -= eps;
            let (vp, _) = discrete_value(plus, &r, &sys, &newton, Some(&traj)).unwrap();
            let (vm, _) = discrete_value(minus, &r, &sys, &newton, Some(&traj)).unwrap();
            let fd = (vp - vm) / (2.0 * eps);
            assert!((fd - mq0[i]).abs() <= 1e-4 * mq0[i].abs().max(1e-3), "i={i}: fd {fd} vs {}", mq0[i]);
        }
    }
}
