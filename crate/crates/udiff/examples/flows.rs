//! Pendulum periodic orbits and a symplectic integration of a series Hamiltonian.

use udiff::flows::{integrate, pendulum_periodic_point, IntegratorKind, SeriesHamiltonian};
use udiff::series::{FTSeries, Layout};

fn main() -> udiff::Result<()> {
    for b in [3u64, 10, 30] {
        let o = pendulum_periodic_point(b)?;
        println!("B = {b:>2}: I_B - 2 = {:.3e}, period check {:.12}", o.excess, o.period());
    }
    let lay = Layout::new(1, 0, 2, 2, 0)?;
    let h = FTSeries::action_monomial(lay.clone(), &[2], 0.5)?.add_series(&FTSeries::cos_mode(lay, &[1], &[0], -0.1)?)?;
    let traj = integrate(&SeriesHamiltonian::new(h), &[0.0], &[0.5], 10.0, 1e-10, 10, IntegratorKind::ImplicitMidpoint)?;
    println!("pendulum-like orbit: energy error {:.1e} after {} steps", traj.energy_error(), traj.steps);
    Ok(())
}
