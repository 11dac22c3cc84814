//! Euler–Maruyama against the closed-form solutions on shared Brownian paths.

use num_complex::Complex64;
use supersle::scalar::rational;
use supersle::sde::{closed_form_32alt, euler_maruyama, pathwise_convergence, BrownianPath, CGrassmann};
use supersle::walk::{allocation_32alt, SdeSystem, WalkSpec};
use supersle::{Scalar, SuperPoint, Surd};

fn main() -> supersle::Result<()> {
    let (ys, etas, _) = allocation_32alt::<Surd>();
    let spec = WalkSpec::spec_32alt(&rational(1, 1), &ys, &etas)?.map_scalars(|s| s.to_complex());
    let system = SdeSystem::from_spec(&spec);
    let (_, eta, theta) = allocation_32alt::<Complex64>();
    let init = SuperPoint::new(CGrassmann::scalar(2, Complex64::new(2.0, 0.0)), theta)?;

    let path = BrownianPath::sample(2, 1e-3, 500, 1);
    let em = euler_maruyama(&system, &init, &path)?;
    let (z, t) = em.terminal();
    println!("Euler at T = 0.5: z = {z}, θ = {t}");

    let study = pathwise_convergence(
        &system,
        |i, p| {
            let cf = closed_form_32alt(i, p, 1.0, &eta)?;
            let (z, t) = cf.terminal();
            Ok((z.clone(), t.clone()))
        },
        &init,
        0.5,
        &[1e-2, 1e-3, 1e-4],
        50,
        7,
        10,
    )?;
    for (dt, e) in study.dts.iter().zip(&study.mean_errors) {
        println!("dt = {dt:e}: mean terminal error {e:.3e}");
    }
    println!("empirical order {:?}", study.order);
    Ok(())
}
