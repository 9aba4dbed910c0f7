//! KAM iteration for `|I|²/2 + ε f` with the golden frequency.

use udiff::diophantine::{br_test, BrParams, FrequencyProfile};
use udiff::normal_forms::{kam_iterate, KamConfig, KamSchedule};
use udiff::series::{FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let fp = FrequencyProfile::golden();
    let eps = 1e-4;
    let q0 = br_test(&sp, &fp, &BrParams::default())?.q0.expect("golden mean passes the dyadic test");
    let sch = KamSchedule::new(&sp, &fp, q0, eps, eps, 0.5, 1.0, 1.0, 0.0, 1.0, 6)?;
    let lay = Layout::new(2, 0, 32, 2, 0)?;
    let mut h = FTSeries::action_monomial(lay.clone(), &[2, 0], 0.5)?.add_series(&FTSeries::action_monomial(lay, &[0, 2], 0.5)?)?;
    for k in [[1, 0], [0, 1], [1, 1]] {
        h.add_cos(&k, &[0, 0], eps)?;
    }
    let r = kam_iterate(&h, &fp, &sp, &sch, &KamConfig::default())?;
    println!("defects {:?}", r.defects);
    println!("converged {}, distance to the unperturbed torus {:.3e}, orbit deviation {:?}", r.converged, r.distance, r.orbit_deviation);
    Ok(())
}
