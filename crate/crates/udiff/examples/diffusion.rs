//! Linear diffusion examples along the golden convergents, closed form against the integrator.

use udiff::diophantine::FrequencyProfile;
use udiff::instability::{build_linear_diffusion, run_linear_diffusion};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let fp = FrequencyProfile::golden();
    for j in 3..=6 {
        let ex = build_linear_diffusion(&fp, 3, j, 0.01, &sp)?;
        let run = run_linear_diffusion(&ex, &[0.0; 3], &[0.0; 3], 1e3, 20, 1e-8)?;
        println!(
            "j = {j}: k = {:?}, rate {:.3e} in [{:.3e}, {:.3e}], deviation {:.1e}",
            ex.k,
            ex.drift_rate(),
            ex.rate_lower,
            ex.rate_upper,
            run.max_deviation
        );
    }
    Ok(())
}
