//! Checking `Dz' = θ' Dθ'` for a few coordinate changes.

use supersle::sde::closed_form_32_map;
use supersle::superfield::{check_gts, is_superconformal, DEFAULT_TOL};
use supersle::walk::allocation_32;
use supersle::{GaussianRational as Q, GrassmannNumber, LaurentSuperfunction, Scalar, Surd};

fn main() {
    let one = GrassmannNumber::<Q>::one(1);
    let id = (LaurentSuperfunction::z(1), LaurentSuperfunction::theta(1));
    let square = (LaurentSuperfunction::z_power(2, one.clone()), LaurentSuperfunction::theta(1));
    let shift = (&LaurentSuperfunction::z(1) + &LaurentSuperfunction::constant(one.scale(&Q::int(3))), LaurentSuperfunction::theta(1));
    for (name, (zp, tp)) in [("identity", id), ("z² with θ fixed", square), ("translation", shift)] {
        let check = is_superconformal(&zp, &tp, DEFAULT_TOL);
        println!("{name:>16}: superconformal = {}, residual = {}", check.holds, check.residual);
    }

    let k = supersle::scalar::rational(2, 1);
    let sk = Surd::sqrt_rational(&k).unwrap();
    let (y, eta, _) = allocation_32::<Surd>();
    let (zp, tp) = closed_form_32_map(4, &sk, &y, &eta, &Surd::from_i64(1), &Surd::from_rational(&supersle::scalar::rational(-1, 3)));
    println!("closed-form map at t = 1, B = -1/3:");
    println!("  z' = {zp}");
    println!("  θ' = {tp}");
    println!("  superconformal = {}, component form holds = {}", is_superconformal(&zp, &tp, 0.0).holds, check_gts(&zp, &tp));
}
