//! Bessi-type perturbations on a constructed Liouville frequency.

use udiff::instability::{build_bessi, BessiSource};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let ex = build_bessi(&BessiSource::ConstructedLiouville { terms: 6 }, &sp, 0.05, 0.025, 1.0, 0.5)?;
    println!("partial quotients {:?}", ex.quotients);
    for t in &ex.terms {
        println!("j = {}: k = {:?}, cert {:.3e} <= {:.3e}, ln growth {:.3}", t.j, t.k, t.cert, ex.cert_bound, t.ln_growth);
    }
    println!("certificates hold: {}, growth increasing: {}", ex.certificates_hold, ex.growth_increasing);
    Ok(())
}
