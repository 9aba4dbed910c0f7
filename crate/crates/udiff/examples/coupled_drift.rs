//! Synchronized coupled-map construction and the drift of `I₁` from 0 to 1.

use udiff::instability::{build_ms, psi_q_orbit, CoupledMap, CouplingMode, MsOptions};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    println!("psi_7^5(0, 0) = {:?}", psi_q_orbit(7, 5));
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let msc = build_ms(3, 2, 0.01, &sp, &MsOptions::default())?;
    println!("A = {}, B = {}, q = {}, q^-1 cert(g) A^2 = {:.3e}", msc.a, msc.b, msc.q, msc.cert_ratio);
    for mode in [CouplingMode::Exact, CouplingMode::Pendulum] {
        let map = CoupledMap::from_ms(&msc, msc.a, mode, 1e-10)?;
        let r = map.run(msc.a)?;
        println!("{mode:?}: I1 = {:.15} after {} steps, error {:.1e}", r.i1.last().unwrap(), r.steps.last().unwrap(), r.drift_error);
    }
    Ok(())
}
