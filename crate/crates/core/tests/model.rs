use std::f64::consts::PI;

use idfield::model::*;
use idfield::numcore::{adaptive_simpson, simpson, Grid1D, GridFunction};
use idfield::simulate::seeded_rng;
use idfield::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn normal(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn field_kernel() -> SimpleKernel {
    SimpleKernel::on_line(vec![1.3, 0.2, 0.1, 0.1], 1).unwrap()
}

fn std_normal() -> JumpLaw {
    JumpLaw::gaussian(0.0, 1.0, 1.0).unwrap()
}

#[test]
fn levy_density_image() {
    let k = field_kernel();
    let x = Grid1D::new(-3.0, 3.0, 61).unwrap();
    let v1 = forward_levy_density(&k, &normal, &x);
    for i in 0..x.len() {
        let t = x.node(i);
        let want = normal(t / 1.3) / 1.3 + normal(t / 0.2) / 0.2 + 2.0 * normal(t / 0.1) / 0.1;
        assert!((v1.values()[i] - want).abs() < 1e-12 * want.max(1.0));
    }

    let id = SimpleKernel::on_line(vec![1.0], 1).unwrap();
    let v1 = forward_levy_density(&id, &normal, &x);
    for i in 0..x.len() {
        assert_eq!(v1.values()[i], normal(x.node(i)));
    }

    let two = SimpleKernel::on_line(vec![2.0], 1).unwrap();
    let v1 = forward_levy_density(&two, &normal, &Grid1D::new(-1.0, 1.0, 3).unwrap());
    assert!((v1.values()[1] - 0.19947).abs() < 1e-5);
    assert!((v1.values()[1] - 0.5 * normal(0.0)).abs() < 1e-15);
}

#[test]
fn levy_density_mass_conservation() {
    let k = SimpleKernel::new(vec![1.3, -0.4, 0.7], vec![vec![0], vec![1], vec![3]], vec![1.0, 0.5, 2.0]).unwrap();
    let x = Grid1D::new(-12.0, 12.0, 24001).unwrap();
    let v1 = forward_levy_density(&k, &normal, &x);
    let want = 3.5;
    assert!((v1.integral() - want).abs() / want < 1e-6);
}

#[test]
fn gaussian_part_image() {
    let k = field_kernel();
    assert!((forward_gaussian(&k, 2.0).unwrap() - 3.5).abs() < 1e-12);
    assert_eq!(forward_gaussian(&k, 0.0).unwrap(), 0.0);
    let id = SimpleKernel::on_line(vec![1.0], 1).unwrap();
    assert_eq!(forward_gaussian(&id, 0.7).unwrap(), 0.7);
    assert!(matches!(forward_gaussian(&k, -1.0), Err(Error::InvalidInput(_))));
}

#[test]
fn u_function_cases() {
    let n = std_normal();
    for u in [0.05, 0.3, 1.0, 2.5, -4.0] {
        assert!(u_function(&n, 0.0, u).unwrap().abs() < 1e-8);
    }
    let e = JumpLaw::exponential(1.0, 1.0).unwrap();
    for a0 in [-2.0, 0.0, 0.37] {
        assert!((u_function(&e, a0, 1.0).unwrap() - a0).abs() < 1e-15);
    }
    // ∫ x e^{-x} dx = -(x + 1) e^{-x}
    let prim = |x: f64| -(x + 1.0) * (-x).exp();
    let want = 2.0 * (1.0 - (prim(1.0) - prim(0.5)));
    assert!((u_function(&e, 1.0, 2.0).unwrap() - want).abs() < 1e-12);
}

#[test]
fn tabulated_u_function_needs_coverage() {
    let g = Grid1D::new(-0.5, 0.5, 101).unwrap();
    let law = JumpLaw::tabulated(GridFunction::from_fn(g, |_| 1.0)).unwrap();
    assert!(matches!(u_function(&law, 0.0, 2.0), Err(Error::Coverage(_))));
}

#[test]
fn drift_image() {
    let n = LevyTriplet::new(0.0, 0.0, std_normal()).unwrap();
    assert!(forward_drift(&field_kernel(), &n).unwrap().abs() < 1e-8);

    let ones = SimpleKernel::new(vec![1.0, 1.0], vec![vec![0], vec![2]], vec![1.0, 0.5]).unwrap();
    let e = LevyTriplet::new(0.8, 0.0, JumpLaw::exponential(1.0, 1.0).unwrap()).unwrap();
    assert!((forward_drift(&ones, &e).unwrap() - 0.8 * 1.5).abs() < 1e-14);

    // brute-force trapezoid for ∫ x [1(|ux|≤1) - 1(|x|≤1)] e^{-x} dx
    let e0 = LevyTriplet::new(0.0, 0.0, JumpLaw::exponential(1.0, 1.0).unwrap()).unwrap();
    let shift = |u: f64| {
        let n = 400_000;
        let hi = 12.0;
        let h = hi / n as f64;
        (0..=n)
            .map(|i| {
                let x = i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let d = f64::from(u8::from((u * x).abs() <= 1.0)) - f64::from(u8::from(x <= 1.0));
                w * h * x * d * (-x).exp()
            })
            .sum::<f64>()
    };
    let want: f64 = [1.3, 0.2, 0.1, 0.1].iter().map(|&f| f * shift(f)).sum();
    let got = forward_drift(&field_kernel(), &e0).unwrap();
    assert!((got - want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn recovery() {
    let k = field_kernel();
    let law = std_normal();
    let (a0, b0) = recover_a0_b0(&k, &law, 0.0, forward_gaussian(&k, 2.0).unwrap()).unwrap();
    assert!((b0 - 2.0).abs() < 1e-12);
    assert!(a0.abs() < 1e-8);

    let bad = SimpleKernel::on_line(vec![1.0, -1.0], 1).unwrap();
    assert!(matches!(recover_a0_b0(&bad, &law, 0.0, 1.0), Err(Error::SingularRecovery(_))));
}

#[test]
fn cumulant_and_charfn_closed_forms() {
    let k = field_kernel();
    for law in [std_normal(), JumpLaw::exponential(1.0, 1.0).unwrap(), JumpLaw::gaussian(0.4, 0.7, 2.5).unwrap()] {
        let t = LevyTriplet::compound_poisson(law.clone());
        assert_eq!(cumulant(&t, 0.0), Complex64::new(0.0, 0.0));
        assert!((charfn_x0(&k, &t, 0.0) - 1.0).norm() < 1e-15);
        for u in [-3.0, -0.4, 0.9, 5.0] {
            let cf = |s: f64| match law.shape() {
                JumpShape::Gaussian { mean, sd } => Complex64::new(-0.5 * sd * sd * s * s, mean * s).exp(),
                JumpShape::Exponential { rate } => Complex64::new(*rate, 0.0) / Complex64::new(*rate, -s),
                JumpShape::Tabulated { .. } => unreachable!(),
            };
            let want: Complex64 =
                [1.3, 0.2, 0.1, 0.1].iter().map(|&f| (cf(u * f) - 1.0) * law.total_mass()).sum::<Complex64>().exp();
            assert!((charfn_x0(&k, &t, u) - want).norm() < 1e-12);
        }
    }

    let g = LevyTriplet::new(0.0, 1.0, JumpLaw::gaussian(0.0, 1.0, 0.0).unwrap()).unwrap();
    for u in [0.3f64, 1.0, 2.0] {
        let want = (-u * u * 1.75f64 / 2.0).exp();
        assert!((charfn_x0(&k, &g, u) - want).norm() < 1e-14);
    }
}

#[test]
fn theta_is_derivative_of_psi() {
    let k = SimpleKernel::on_line(vec![1.3, -0.2, 0.5], 1).unwrap();
    let t = LevyTriplet::new(0.3, 0.4, JumpLaw::exponential(2.0, 1.5).unwrap()).unwrap();
    let h = 1e-5;
    for u in [-2.0, -0.5, 0.0, 0.7, 3.0] {
        let d = (charfn_x0(&k, &t, u + h) - charfn_x0(&k, &t, u - h)) / (2.0 * h);
        let want = -Complex64::i() * d;
        assert!((theta_x0(&k, &t, u) - want).norm() < 1e-8);
    }
}

#[test]
fn exact_fourier_of_g1_matches_quadrature() {
    let k = field_kernel();
    for law in [std_normal(), JumpLaw::exponential(1.0, 1.0).unwrap()] {
        let v0 = |x: f64| law.density(x);
        for u in [0.0, 0.8, 2.0, -5.0] {
            let v1 = |x: f64| [1.3, 0.2, 0.1, 0.1].iter().map(|&f: &f64| v0(x / f) / f.abs()).sum::<f64>();
            let re = |x: f64| x * v1(x) * (u * x).cos();
            let im = |x: f64| x * v1(x) * (u * x).sin();
            let (lo, hi) = (-60.0, 60.0);
            let pieces = [lo, -1.0, 0.0, 1.0, hi];
            let mut want = Complex64::new(0.0, 0.0);
            for w in pieces.windows(2) {
                want += Complex64::new(simpson(re, w[0], w[1], 200_000), simpson(im, w[0], w[1], 200_000));
            }
            let got = fourier_g1_exact(&k, &law, u);
            assert!((got - want).norm() < 1e-4, "u={u}: {got} vs {want}");
        }
    }
}

#[test]
fn kernel_groups_and_invariants() {
    let k = SimpleKernel::on_line(vec![0.1, 1.3, 0.1 + 1e-14, 0.2, 1.3], 1).unwrap();
    let groups = k.groups();
    let mut seen: Vec<usize> = groups.iter().flat_map(|g| g.indices.clone()).collect();
    seen.sort();
    assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    assert_eq!(groups.len(), 3);
    assert!(groups.iter().all(|g| !g.indices.is_empty()));
    assert_eq!(k.m_range(), 4);

    assert!(SimpleKernel::on_line(vec![1.0, 0.0], 1).is_err());
    assert!(SimpleKernel::new(vec![1.0, 2.0], vec![vec![0], vec![0]], vec![1.0, 1.0]).is_err());
    assert!(SimpleKernel::new(vec![1.0], vec![vec![0]], vec![-1.0]).is_err());
    assert!(LevyTriplet::new(0.0, -1.0, std_normal()).is_err());
}

#[test]
fn weight_ratios() {
    let h = WeightH::abs_power(1.5).unwrap();
    assert!((h.sup_ratio(0.25) - 8.0).abs() < 1e-12);
    let s = WeightH::power(1);
    assert_eq!(s.eval(-2.0), -2.0);
    assert_eq!(s.ratio(-0.5), -2.0);
    assert!(WeightH::abs_power(-1.0).is_err());
}

#[test]
fn tabulated_sampler_matches_density() {
    // triangular density on [0, 2], CDF x²/2 on [0,1]
    let g = Grid1D::new(0.0, 2.0, 2001).unwrap();
    let law = JumpLaw::tabulated(GridFunction::from_fn(g, |x| if x <= 1.0 { x } else { 2.0 - x })).unwrap();
    assert!((law.total_mass() - 1.0).abs() < 1e-6);
    let cdf = |x: f64| if x <= 1.0 { 0.5 * x * x } else { 1.0 - 0.5 * (2.0 - x) * (2.0 - x) };
    let mut rng = seeded_rng(11, 0);
    let n = 20_000;
    let mut xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (cdf(x) - i as f64 / n as f64).abs().max((cdf(x) - (i + 1) as f64 / n as f64).abs()))
        .fold(0.0, f64::max);
    // 1% critical value ≈ 1.63/√n
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
}

#[test]
fn x0_moments_from_cumulants() {
    let k = SimpleKernel::on_line(vec![1.0], 1).unwrap();
    let law = JumpLaw::exponential(1.0, 1.0).unwrap();
    // CP with unit rate and Exp(1) jumps: κⱼ = j!
    assert!((x0_moment(&k, &law, 2) - 3.0).abs() < 1e-12);
    assert!((x0_moment(&k, &law, 4) - (24.0 + 4.0 * 6.0 + 3.0 * 4.0 + 6.0 * 2.0 + 1.0)).abs() < 1e-10);
    let shell = adaptive_simpson(&|x: f64| x * (-x).exp(), 0.0, 1.0, 1e-13);
    assert!((law.first_moment_shell(0.0, 1.0) - shell).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn charfn_bounded_and_hermitian(u in -20.0..20.0f64, mean in -1.0..1.0f64, sd in 0.2..2.0f64, mass in 0.1..3.0f64) {
        let k = SimpleKernel::on_line(vec![1.3, -0.2, 0.1], 1).unwrap();
        let t = LevyTriplet::new(mean, 0.3, JumpLaw::gaussian(mean, sd, mass).unwrap()).unwrap();
        let p = charfn_x0(&k, &t, u);
        prop_assert!(p.norm() <= 1.0 + 1e-14);
        prop_assert!((charfn_x0(&k, &t, -u) - p.conj()).norm() < 1e-14);
    }

    #[test]
    fn forward_then_recover_is_identity(
        a0 in -2.0..2.0f64,
        b0 in 0.0..3.0f64,
        coeffs in prop::collection::vec(prop_oneof![0.1..2.0f64, -2.0..-0.1f64], 1..5),
    ) {
        let k = SimpleKernel::on_line(coeffs.clone(), 1).unwrap();
        let s1: f64 = coeffs.iter().sum();
        prop_assume!(s1.abs() > 1e-3);
        for law in [JumpLaw::exponential(1.3, 0.7).unwrap(), JumpLaw::gaussian(0.5, 0.8, 1.0).unwrap()] {
            let t = LevyTriplet::new(a0, b0, law.clone()).unwrap();
            let a1 = forward_drift(&k, &t).unwrap();
            let b1 = forward_gaussian(&k, b0).unwrap();
            let (ra, rb) = recover_a0_b0(&k, &law, a1, b1).unwrap();
            prop_assert!((ra - a0).abs() < 1e-8, "{} vs {}", ra, a0);
            prop_assert!((rb - b0).abs() < 1e-8);
        }
    }
}
