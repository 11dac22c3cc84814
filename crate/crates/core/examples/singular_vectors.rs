//! The level-3/2 Neveu-Schwarz singular vector and the Virasoro level-2 vector.

use supersle::ns_algebra::{
    is_singular, is_singular_level2, params_from_kappa_ns, singular_vector_32, singularity_report,
    virasoro_level2_vector, ModuleParams,
};
use supersle::scalar::rational;
use supersle::GaussianRational as Q;

fn main() -> supersle::Result<()> {
    for k in [rational(1, 2), rational(2, 1), rational(4, 1)] {
        let params = params_from_kappa_ns(&k)?;
        let chi = singular_vector_32::<Q>(&params, 0);
        let check = is_singular(&chi)?;
        println!("κ = {k}: c = {}, Δ = {}, χ = {chi}, singular = {}", params.c, params.delta, check.singular);
    }

    let off = ModuleParams::ns(rational(1, 1), rational(1, 3));
    let report = singularity_report(&off, &is_singular(&singular_vector_32::<Q>(&off, 0))?);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());

    let v = virasoro_level2_vector::<Q>(&rational(8, 3), 0)?;
    println!("Virasoro κ = 8/3: {v}, singular = {}", is_singular_level2(&v)?.singular);
    Ok(())
}
