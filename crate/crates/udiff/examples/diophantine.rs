//! Small-divisor function of (1, golden mean), a Z-basis of periodic approximations
//! and the dyadic convergence test.

use udiff::diophantine::{br_test, zbasis_approx, BrParams, FrequencyProfile};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let fp = FrequencyProfile::golden();
    for q in [2.0, 5.0, 13.0, 89.0] {
        let p = fp.psi(q)?;
        println!("Psi({q}) = {:.6} at k = {:?}", p.value, p.k);
    }
    let basis = zbasis_approx(&fp, 50.0)?;
    for v in &basis.vectors {
        println!("periodic vector T v = {:?}, T = {:.4}", v.tv, v.period);
    }
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let r = br_test(&sp, &fp, &BrParams::default())?;
    println!("dyadic test: {:?}, Q0 = {:?}, sum sigma = {:.4e} (budget {:.4e})", r.verdict, r.q0, r.partial_sums.last().unwrap(), r.budget);
    Ok(())
}
