//! Periodic normal form with the Neishtadt schedule on a two-degree-of-freedom toy.

use udiff::diophantine::PeriodicVector;
use udiff::normal_forms::{periodic_normal_form, NFSchedule};
use udiff::series::{norm_upper, FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    let (eta, eps, s) = (1e-4, 1e-4, 0.5);
    let lay = Layout::new(2, 0, 16, 2, 0)?;
    let integ = FTSeries::action_monomial(lay.clone(), &[1, 0], 1.0)?.add_series(&FTSeries::action_monomial(lay.clone(), &[0, 2], 0.5 * eta)?)?;
    let mut f = FTSeries::zero(lay);
    for k in [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1]] {
        f.add_cos(&k, &[0, 0], eps)?;
    }
    let v = PeriodicVector::new(vec![1, 0], 1.0)?;
    let nu = norm_upper(&f.sub_series(&f.average_periodic(&v)?)?, &sp, s)?.bound;
    let sch = NFSchedule::neishtadt(&sp, s, 2.0, 1.0, eta, nu, 1.0)?;
    let r = periodic_normal_form(&integ, &integ.add_series(&f)?, &v, &sch, &sp, eta, None)?;
    for l in &r.log {
        println!("step {}: width {:.4}, remainder {:.3e} (budget {:.3e})", l.step, l.width, l.remainder_cert, l.budget);
    }
    println!("final remainder {:.3e} <= 2 nu e^-m = {:.3e}", r.cert_after, 2.0 * nu * (-(sch.m as f64)).exp());
    Ok(())
}
