// temporary diagnostic: calibrate the propagation ball factor
use stratlie_core::*;
use stratlie_core::verify::*;

fn main() {
    let g = builtin_group(BuiltinFamily::Heisenberg(1)).unwrap();
    let f = Multiplier::band_rich_even_profile();
    let pieces = dyadic_multiplier_pieces(&f, 4, BandSplitConfig::default()).unwrap();
    let quad = QuadratureSpec { radial: 24, sphere: 4, xi: 16, grid: 0 };
    for iota in [0i32, 1, 2] {
        let t0 = std::time::Instant::now();
        let rep = propagation_support_fraction(
            &g, &pieces[(iota + 1) as usize], iota, 2.25,
            PropagationConfig::default(), &quad,
        ).unwrap();
        let frac = rep.measurements.iter().find(|m| m.name == "ball_mass_fraction").unwrap().measured;
        let c99 = rep.measurements.iter().find(|m| m.name == "c99_radius_factor").unwrap().measured;
        println!("iota {iota}: fraction(2.25) = {frac:.5}, c99 = {c99:.3} ({:.1}s)", t0.elapsed().as_secs_f64());
    }
}
