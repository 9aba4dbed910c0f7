//! Fourier–Taylor series: products, brackets, averaging and the homological equation.

use udiff::diophantine::PeriodicVector;
use udiff::series::{norm_upper, FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile};

fn main() -> udiff::Result<()> {
    let lay = Layout::new(2, 0, 8, 1, 0)?;
    let mut f = FTSeries::zero(lay.clone());
    for k in [[1, 0], [0, 1], [1, 1], [2, -1]] {
        f.add_cos(&k, &[0, 0], 0.1)?;
    }
    let v = PeriodicVector::new(vec![1, 0], 1.0)?;
    let avg = f.average_periodic(&v)?;
    let y = f.solve_homological(&v, true)?;
    let n_v = FTSeries::action_monomial(lay.clone(), &[1, 0], 1.0)?;
    let residual = y.bracket(&n_v)?.sub_series(&f.sub_series(&avg)?)?.max_abs();
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 })?;
    println!("|f|_s <= {:.4e} at s = 0.05", norm_upper(&f, &sp, 0.05)?.bound);
    println!("[f]_v keeps {} nonzero coefficients", avg.coeffs().iter().filter(|c| c.norm() > 0.0).count());
    println!("homological residual {{Y, v.I}} - (f - [f]_v): {residual:.1e}");
    println!("f^2 at (0.1, 0.2): {:.6}", f.mul(&f)?.value(&[0.1, 0.2], &[0.0, 0.0]));
    Ok(())
}
