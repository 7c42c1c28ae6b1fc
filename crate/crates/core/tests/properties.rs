use lyapbound::extinction::{lower_bound_q_on_cell, upper_bound_q_on_cell, verify_upper_bound_k};
use lyapbound::genfun::phi_iter;
use lyapbound::lyapunov::{cell_bound, refine, BaseObservable, Cell, FibreObservable, Window};
use lyapbound::orbits::find_periodic_orbits;
use lyapbound::regularity::{certify_ratio, Attestation};
use lyapbound::{CircleMap, ConstantPoissonFamily, GenFamily, Interval, PoissonCosFamily};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100_000;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random interval in `[lo_min, lo_min + span]` with log-uniform width.
fn random_interval(r: &mut ChaCha8Rng, lo_min: f64, span: f64) -> Interval {
    let lo = lo_min + span * r.gen::<f64>();
    let width = 10f64.powf(r.gen_range(-15.0..0.5));
    Interval::new(lo, lo + width).unwrap()
}

fn random_point(r: &mut ChaCha8Rng, x: Interval) -> f64 {
    (x.lo() + (x.hi() - x.lo()) * r.gen::<f64>()).clamp(x.lo(), x.hi())
}

fn check_unary(name: &str, seed: u64, lo_min: f64, span: f64, f: impl Fn(Interval) -> Interval, g: impl Fn(f64) -> f64) {
    let mut r = rng(seed);
    for _ in 0..SAMPLES {
        let x = random_interval(&mut r, lo_min, span);
        let p = random_point(&mut r, x);
        let y = f(x);
        assert!(y.contains(g(p)), "{name}({x:?}) = {y:?} misses {name}({p}) = {}", g(p));
    }
}

fn check_binary(name: &str, seed: u64, f: impl Fn(Interval, Interval) -> Option<Interval>, g: impl Fn(f64, f64) -> f64) {
    let mut r = rng(seed);
    for _ in 0..SAMPLES {
        let a = random_interval(&mut r, -10.0, 20.0);
        let b = random_interval(&mut r, -10.0, 20.0);
        let (p, q) = (random_point(&mut r, a), random_point(&mut r, b));
        if let Some(y) = f(a, b) {
            assert!(y.contains(g(p, q)), "{name}({a:?}, {b:?}) = {y:?} misses {}", g(p, q));
        }
    }
}

#[test]
fn add_contains_samples() {
    check_binary("add", 1, |a, b| Some(a + b), |p, q| p + q);
}

#[test]
fn sub_contains_samples() {
    check_binary("sub", 2, |a, b| Some(a - b), |p, q| p - q);
}

#[test]
fn mul_contains_samples() {
    check_binary("mul", 3, |a, b| Some(a * b), |p, q| p * q);
}

#[test]
fn div_contains_samples() {
    check_binary("div", 4, |a, b| a.div(b).ok(), |p, q| p / q);
}

#[test]
fn exp_contains_samples() {
    check_unary("exp", 5, -30.0, 60.0, |x| x.exp().unwrap(), f64::exp);
}

#[test]
fn ln_contains_samples() {
    check_unary("ln", 6, 1e-6, 100.0, |x| x.ln().unwrap(), f64::ln);
}

#[test]
fn cos_contains_samples() {
    check_unary("cos", 7, -20.0, 40.0, Interval::cos, f64::cos);
}

#[test]
fn sin_contains_samples() {
    check_unary("sin", 8, -20.0, 40.0, Interval::sin, f64::sin);
}

#[test]
fn cos_tau_contains_samples() {
    check_unary("cos_tau", 9, -3.0, 6.0, Interval::cos_tau, |x| {
        (std::f64::consts::TAU * (x - x.floor())).cos()
    });
}

#[test]
fn pow_contains_samples() {
    let mut r = rng(10);
    for _ in 0..SAMPLES {
        let x = random_interval(&mut r, -3.0, 6.0);
        let k = r.gen_range(1..7);
        let p = random_point(&mut r, x);
        let y = x.pow_int(k).unwrap();
        // Repeated multiplication may differ from the exact power by a few ulps.
        let reference = p.powi(k as i32);
        assert!(y.inflate(8.0 * f64::EPSILON * reference.abs()).contains(reference));
        if k == 2 {
            assert!(y.lo() >= 0.0);
        }
    }
}

#[test]
fn map_images_contain_samples() {
    let map = CircleMap::sinusoidal(3, 0.2).unwrap();
    let mut r = rng(11);
    for _ in 0..SAMPLES {
        let x = random_interval(&mut r, 0.0, 1.0);
        if x.width() > 0.3 {
            continue;
        }
        let p = random_point(&mut r, x);
        let y = map.map_interval(x).unwrap();
        if y.width() < 1.0 {
            assert!(y.contains(map.lift_point(p)), "{x:?} -> {y:?}");
        }
    }
}

#[test]
fn phi_contains_samples() {
    let fam = PoissonCosFamily::new(1.05, 0.5).unwrap();
    let mut r = rng(12);
    for _ in 0..SAMPLES {
        let x = random_interval(&mut r, 0.0, 1.0);
        let s = random_interval(&mut r, 0.0, 0.5);
        let (xp, sp) = (random_point(&mut r, x), random_point(&mut r, s));
        let m = (1.05 + (std::f64::consts::TAU * (xp + 0.5)).cos()).exp();
        let exact = (m * (sp - 1.0)).exp();
        let y = fam.phi(x, s).unwrap();
        // The point reference itself carries a few roundings.
        assert!(y.inflate(1e-14).contains(exact), "phi({x:?}, {s:?}) = {y:?}, point {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn split_halves_cover_the_interval(lo in -1e3f64..1e3, w in 1e-12f64..1e3) {
        let x = Interval::new(lo, lo + w).unwrap();
        let (a, b) = x.split().unwrap();
        prop_assert_eq!(a.lo(), x.lo());
        prop_assert_eq!(b.hi(), x.hi());
        prop_assert_eq!(a.hi(), b.lo());
        prop_assert!(a.width() <= x.width() && b.width() <= x.width());
    }

    #[test]
    fn hull_contains_both(a in -1e3f64..1e3, b in -1e3f64..1e3, w in 0f64..10.0) {
        let x = Interval::new(a, a + w).unwrap();
        let y = Interval::point(b);
        let h = x.hull(y);
        prop_assert!(h.contains_interval(x) && h.contains(b));
    }

    #[test]
    fn phi_iter_semigroup(x in 0f64..1.0, s in 0f64..0.99, n in 0usize..8, m in 0usize..8) {
        let fam = PoissonCosFamily::new(0.8, 0.3).unwrap();
        let map = CircleMap::linear(2).unwrap();
        let xi = Interval::point(x);
        let whole = phi_iter(&fam, &map, xi, Interval::point(s), n + m).unwrap();
        let tail_start = map.iterate_lift(xi, n as u32).reduce_turns();
        let tail = phi_iter(&fam, &map, tail_start, Interval::point(s), m).unwrap();
        let composed = phi_iter(&fam, &map, xi, tail, n).unwrap();
        prop_assert!(whole.hi() >= composed.lo() && composed.hi() >= whole.lo(),
            "{:?} vs {:?}", whole, composed);
    }

    #[test]
    fn phi_iter_monotone_in_s(x in 0f64..1.0, s1 in 0f64..1.0, s2 in 0f64..1.0, n in 0usize..10) {
        let fam = PoissonCosFamily::new(1.05, 0.5).unwrap();
        let map = CircleMap::linear(2).unwrap();
        let (a, b) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let xi = Interval::point(x);
        let lo = phi_iter(&fam, &map, xi, Interval::point(a), n).unwrap();
        let hi = phi_iter(&fam, &map, xi, Interval::point(b), n).unwrap();
        prop_assert!(lo.lo() <= hi.hi());
    }

    #[test]
    fn q_lower_bounds_increase_with_depth(x in 0f64..1.0, n in 0usize..30) {
        let fam = PoissonCosFamily::new(0.7, 0.0).unwrap();
        let map = CircleMap::linear(2).unwrap();
        let xi = Interval::point(x);
        let a = lower_bound_q_on_cell(&fam, &map, xi, n).unwrap();
        let b = lower_bound_q_on_cell(&fam, &map, xi, n + 5).unwrap();
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn regularity_is_monotone(r1 in 0.001f64..20.0, r2 in 0.001f64..20.0) {
        let att = Attestation { smoothness: None, q_positive: true };
        let (a, b) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let ca = certify_ratio(a, 1e-6, &att).unwrap();
        let cb = certify_ratio(b, 1e-6, &att).unwrap();
        prop_assert!(f64::from(ca.k) + ca.alpha <= f64::from(cb.k) + cb.alpha);
        prop_assert!(f64::from(cb.k) + cb.alpha < b);
        prop_assert!(cb.alpha > 0.0 && cb.alpha <= 1.0);
    }

    #[test]
    fn base_cell_bound_dominates_pointwise_averages(depth in 1u32..20, i in 0u64..(1 << 19)) {
        let map = CircleMap::sinusoidal(2, 0.1).unwrap();
        let scale = (1u64 << depth) as f64;
        let i = i % (1u64 << depth);
        let cell = Cell {
            interval: Interval::new(i as f64 / scale, (i + 1) as f64 / scale).unwrap(),
            depth,
            is_new: true,
            bound: f64::INFINITY,
        };
        let bound = cell_bound(&BaseObservable { map: &map }, &cell, Window::HalfDepth).unwrap();
        let k_max = cell.k_max();
        for t in 0..100 {
            let mut x = cell.interval.lo() + cell.interval.width() * f64::from(t) / 99.0;
            x = x.min(cell.interval.hi());
            let (mut sum, mut best) = (0.0, f64::INFINITY);
            for k in 1..=k_max {
                let d = 2.0 + 0.2 * std::f64::consts::PI * (std::f64::consts::TAU * x).cos();
                sum += d.ln();
                best = best.min(sum / k as f64);
                x = map.lift_point(x).rem_euclid(1.0);
            }
            prop_assert!(bound >= best - 1e-12, "bound {} < pointwise {}", bound, best);
        }
    }
}

#[test]
fn fibre_cell_bound_dominates_pointwise_averages() {
    let fam = PoissonCosFamily::new(1.05, 0.5).unwrap();
    let map = CircleMap::linear(2).unwrap();
    let k = 0.94;
    let n_q = 60;
    let obs = FibreObservable::new(&fam, &map, k, n_q).unwrap();
    let mut r = rng(13);
    for _ in 0..30 {
        let depth = r.gen_range(2..16u32);
        let i = r.gen_range(0..(1u64 << depth));
        let scale = (1u64 << depth) as f64;
        let cell = Cell {
            interval: Interval::new(i as f64 / scale, (i + 1) as f64 / scale).unwrap(),
            depth,
            is_new: true,
            bound: f64::INFINITY,
        };
        let bound = cell_bound(&obs, &cell, Window::HalfDepth).unwrap();
        for t in 0..100 {
            // Pointwise averages of F with q replaced by the same kind of upper bound.
            let mut x = cell.interval.lo() + cell.interval.width() * f64::from(t) / 99.0;
            let (mut sum, mut best) = (0.0, f64::INFINITY);
            for kk in 1..=cell.k_max() {
                let next = Interval::point(map.lift_point(x).rem_euclid(1.0));
                let q_up = upper_bound_q_on_cell(&fam, &map, next, k, n_q).unwrap();
                sum += fam.log_phi_ds(Interval::point(x), Interval::point(q_up)).unwrap().mid();
                best = best.min(sum / kk as f64);
                x = next.lo();
            }
            assert!(bound >= best - 1e-9, "bound {bound} < pointwise {best} on {:?}", cell.interval);
        }
    }
}

#[test]
fn refinement_cells_tile_the_circle() {
    let map = CircleMap::sinusoidal(2, 0.1).unwrap();
    for n in [0, 5, 17, 30] {
        let mut cells = refine(&BaseObservable { map: &map }, 0.2, n, Window::HalfDepth).unwrap().cells;
        cells.sort_by(|a, b| a.interval.lo().total_cmp(&b.interval.lo()));
        assert_eq!(cells[0].interval.lo(), 0.0);
        assert_eq!(cells.last().unwrap().interval.hi(), 1.0);
        for w in cells.windows(2) {
            assert_eq!(w[0].interval.hi(), w[1].interval.lo());
        }
        for c in &cells {
            assert_eq!(c.interval.width(), 0.5f64.powi(c.depth as i32));
        }
    }
}

#[test]
fn sandwich_on_random_dyadic_cells() {
    let map = CircleMap::linear(2).unwrap();
    let mut r = rng(14);
    for (lambda, omega) in [(1.05, 0.5), (0.56, 0.0), (2.0, 0.25)] {
        let fam = PoissonCosFamily::new(lambda, omega).unwrap();
        let cert = verify_upper_bound_k(&fam, &map, 0.95, 24).unwrap();
        assert!(cert.certified);
        for _ in 0..200 {
            let depth = r.gen_range(1..30u32);
            let i = r.gen_range(0..(1u64 << depth));
            let scale = (1u64 << depth) as f64;
            let cell = Interval::new(i as f64 / scale, (i + 1) as f64 / scale).unwrap();
            let lower = lower_bound_q_on_cell(&fam, &map, cell, 40).unwrap();
            let upper = upper_bound_q_on_cell(&fam, &map, cell, cert.k, 40).unwrap();
            assert!(lower <= upper, "λ={lambda} ω={omega} {cell:?}: {lower} > {upper}");
        }
    }
}

#[test]
fn orbit_cells_contain_exact_periodic_points() {
    let map = CircleMap::linear(2).unwrap();
    for o in find_periodic_orbits(&map, 8, 1e-10).unwrap() {
        let denom = (1u64 << o.period()) - 1;
        let mut j = o.branch() % denom;
        for cell in o.cells() {
            let x = j as f64 / denom as f64;
            assert!(cell.inflate(1e-15).contains(x), "{cell:?} misses {x}");
            j = (2 * j) % denom;
        }
    }
}

#[test]
fn constant_family_upper_bound_matches_oracle() {
    let fam = ConstantPoissonFamily::new(2.0).unwrap();
    let map = CircleMap::linear(2).unwrap();
    let q_star = 0.203_187_869_979_979_95;
    let up = upper_bound_q_on_cell(&fam, &map, Interval::new(0.1, 0.1001).unwrap(), 0.9, 40).unwrap();
    assert!(up >= q_star && up <= q_star + 1e-4);
}
