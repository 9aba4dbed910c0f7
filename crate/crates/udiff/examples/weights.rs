//! Growth function, Cauchy function and its inverse for the built-in weight families.

use udiff::weights::{check_conditions, log_grid, product_constant_scan, Family, ScaleProfile, NORM_CONSTANT};

fn main() -> udiff::Result<()> {
    for (name, alpha) in [("analytic", None), ("gevrey", Some(2.0)), ("explog", None), ("expsqrt", None)] {
        let sp = ScaleProfile::from_family(Family::from_name(name, alpha, None)?)?;
        let cr = check_conditions(sp.sequence());
        let scan = product_constant_scan(sp.sequence(), 300)?;
        println!("{name}: H1 {} MG {} product ratio {:.3} (<= {:.3})", cr.h1.pass, cr.mg.bounded, scan.product_max, NORM_CONSTANT);
        for y in log_grid(1e2, 1e6, 3) {
            println!("  y = {y:>9.1e}  Omega = {:>10.4}  C^-1 = {:.4e}", sp.omega(y)?.value, sp.c_inv(y)?);
        }
    }
    Ok(())
}
