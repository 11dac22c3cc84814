//! Supertrace hulls and the deterministic Loewner flow.

use num_complex::Complex64;
use supersle::sde::{loewner_flow, supertrace_hull, GridSpec};

fn main() -> supersle::Result<()> {
    let hull = supertrace_hull(2.0, 1.0, 1e-3, 3, 61, None)?;
    for t in [0.25, 0.5, 1.0] {
        println!("supertrace hull at t = {t}: {} cells", hull.hull_at(t).count());
    }
    println!("{}", hull.raster.to_pgm("supertrace kappa=2 T=1 seed=3").lines().take(3).collect::<Vec<_>>().join("\n"));

    let grid = GridSpec::new(-2.0, 2.0, 0.0, 3.0, 9, 6)?;
    let flow = loewner_flow(0.0, &grid, 1.0, 1e-4, 0)?;
    for p in flow.points.iter().filter(|p| p.z_re == 0.0) {
        let z = Complex64::new(p.z_re, p.z_im);
        match p.swallowed_at {
            Some(t) => println!("{z}: swallowed at t = {t:.4}"),
            None => println!("{z}: g_1 = {:.6}, exact {:.6}", Complex64::new(p.g_re, p.g_im), (z * z + 4.0).sqrt()),
        }
    }
    Ok(())
}
