//! Expansion operators checked against direct sums computed in the test.

use fmm2d::expansions::{
    evaluate_local, evaluate_multipole, p2p_direct, Expansion, ExpansionKind, Operators,
};
use fmm2d::generate::rng;
use fmm2d::{Charge, Complex64, Mode, Order};
use proptest::prelude::*;
use rand_core::RngCore;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Draw(rand_xoshiro::SplitMix64);

impl Draw {
    fn new(seed: u64) -> Self {
        Draw(rng(seed))
    }
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn sym(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }
    /// Point in the disk of radius `r` about `center`.
    fn in_disk(&mut self, center: Complex64, r: f64) -> Complex64 {
        loop {
            let (x, y) = (self.sym(), self.sym());
            if x * x + y * y <= 1.0 {
                return center + c(x, y) * r;
            }
        }
    }
    fn on_circle(&mut self, center: Complex64, r: f64) -> Complex64 {
        let t = 2.0 * std::f64::consts::PI * self.unit();
        center + Complex64::from_polar(r, t)
    }
}

/// Re of sum q log|z - z_j|, written from the definition.
fn direct_re_potential(charges: &[Charge], z: Complex64) -> f64 {
    charges
        .iter()
        .map(|ch| ch.q.re * (z - ch.z).norm().ln())
        .sum()
}

fn direct_field(charges: &[Charge], z: Complex64) -> Complex64 {
    charges.iter().map(|ch| ch.q / (z - ch.z)).sum()
}

fn random_charges(d: &mut Draw, n: usize, center: Complex64, r: f64) -> Vec<Charge> {
    (0..n)
        .map(|_| Charge::new(d.in_disk(center, r), c(d.sym(), 0.0)))
        .collect()
}

/// Least-squares slope of ln(err) against p, returned as a per-order ratio.
fn fitted_ratio(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(p, e)| (a + p, b + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = points.iter().map(|&(p, e)| (p - mx) * (e.ln() - my)).sum();
    let den: f64 = points.iter().map(|&(p, _)| (p - mx).powi(2)).sum();
    (num / den).exp()
}

#[test]
fn multipole_far_field_matches_direct() {
    let mut d = Draw::new(11);
    let zm = c(0.3, -0.2);
    let r = 0.1;
    let charges = random_charges(&mut d, 10, zm, r);
    let ops = Operators::new(Order::new(25).unwrap());
    let m = ops.p2m(&charges, zm);
    for _ in 0..20 {
        let z = d.on_circle(zm, 10.0 * r);
        let got = evaluate_multipole(&m, z, Mode::Potential).unwrap().re;
        let want = direct_re_potential(&charges, z);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn far_field_error_decays_geometrically() {
    // charges within r of zm, targets at distance R with r / R = 0.48
    let mut d = Draw::new(5);
    let zm = c(0.0, 0.0);
    let charges = random_charges(&mut d, 30, zm, 0.48);
    let targets: Vec<Complex64> = (0..100).map(|_| d.on_circle(zm, 1.0)).collect();
    let want: Vec<f64> = targets
        .iter()
        .map(|&z| direct_re_potential(&charges, z))
        .collect();
    let mut pts = Vec::new();
    for p in (4..=24).step_by(4) {
        let m = Operators::new(Order::new(p).unwrap()).p2m(&charges, zm);
        let err = targets
            .iter()
            .zip(&want)
            .map(|(&z, w)| (evaluate_multipole(&m, z, Mode::Potential).unwrap().re - w).abs())
            .fold(0.0, f64::max);
        pts.push((f64::from(p), err));
    }
    let ratio = fitted_ratio(&pts);
    assert!(ratio <= 0.55, "fitted ratio {ratio}, errors {pts:?}");
    assert!(pts.windows(2).all(|w| w[1].1 <= 1.1 * w[0].1), "{pts:?}");
}

#[test]
fn m2m_matches_p2m_about_new_center() {
    let mut d = Draw::new(2);
    let ops = Operators::new(Order::new(14).unwrap());
    for _ in 0..10 {
        let q = Charge::new(d.in_disk(c(0.0, 0.0), 0.25), c(d.sym(), d.sym()));
        let from = c(0.1 * d.sym(), 0.1 * d.sym());
        let to = c(0.25 * d.sym(), 0.25 * d.sym());
        let shifted = ops.m2m(&ops.p2m(&[q], from), to).unwrap();
        let fresh = ops.p2m(&[q], to);
        // coefficient k is a sum of terms of size |q| (|z - from| + |t|)^k / k,
        // which sets the floating-point scale of the comparison
        let reach = (q.z - from).norm() + (from - to).norm();
        for (k, (a, b)) in shifted.coeffs.iter().zip(&fresh.coeffs).enumerate() {
            let scale = q.q.norm() * reach.powi(k as i32) / (k.max(1) as f64);
            assert!((a - b).norm() <= 1e-13 * scale, "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn m2m_then_evaluate_agrees_with_original() {
    let mut d = Draw::new(8);
    let ops = Operators::new(Order::new(20).unwrap());
    let charges = random_charges(&mut d, 15, c(0.05, 0.05), 0.05);
    let child = ops.p2m(&charges, c(0.05, 0.05));
    let parent = ops.m2m(&child, c(0.0, 0.0)).unwrap();
    for _ in 0..10 {
        let z = d.on_circle(c(0.0, 0.0), 2.0);
        let a = evaluate_multipole(&child, z, Mode::Potential).unwrap().re;
        let b = evaluate_multipole(&parent, z, Mode::Potential).unwrap().re;
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn m2l_converges_for_well_separated_clusters() {
    // unit-width source and target boxes two widths apart, as for
    // interaction-list members: sources within sqrt(2)/2 of zm
    let mut d = Draw::new(17);
    let zm = c(0.0, 0.0);
    let zl = c(3.0, 1.0);
    let charges: Vec<Charge> = (0..40)
        .map(|_| Charge::new(zm + c(0.5 * d.sym(), 0.5 * d.sym()), c(d.sym(), 0.0)))
        .collect();
    let targets: Vec<Complex64> = (0..50)
        .map(|_| zl + c(0.5 * d.sym(), 0.5 * d.sym()))
        .collect();
    let want: Vec<f64> = targets
        .iter()
        .map(|&z| direct_re_potential(&charges, z))
        .collect();
    let mut pts = Vec::new();
    for p in (4..=24).step_by(4) {
        let ops = Operators::new(Order::new(p).unwrap());
        let local = ops.m2l(&ops.p2m(&charges, zm), zl).unwrap();
        let err = targets
            .iter()
            .zip(&want)
            .map(|(&z, w)| (evaluate_local(&local, z, Mode::Potential).unwrap().re - w).abs())
            .fold(0.0, f64::max);
        pts.push((f64::from(p), err));
    }
    let ratio = fitted_ratio(&pts);
    assert!(ratio <= 0.55, "fitted ratio {ratio}, errors {pts:?}");
    assert!(pts.last().unwrap().1 < 1e-6, "{pts:?}");
}

#[test]
fn l2l_is_exact() {
    let mut d = Draw::new(23);
    let ops = Operators::new(Order::new(12).unwrap());
    for _ in 0..20 {
        let mut l = Expansion::zero(ExpansionKind::Local, c(0.0, 0.0), ops.order());
        for b in l.coeffs.iter_mut() {
            *b = c(d.sym(), d.sym());
        }
        let child = c(0.25 * d.sym(), 0.25 * d.sym());
        let shifted = ops.l2l(&l, child).unwrap();
        for _ in 0..5 {
            let z = child + c(0.25 * d.sym(), 0.25 * d.sym());
            for mode in [Mode::Potential, Mode::Field] {
                let a = evaluate_local(&l, z, mode).unwrap();
                let b = evaluate_local(&shifted, z, mode).unwrap();
                assert!((a - b).norm() <= 1e-13 * a.norm().max(1.0), "{a} vs {b}");
            }
        }
    }
}

fn finite_difference(f: impl Fn(Complex64) -> Complex64, z: Complex64) -> Complex64 {
    let h = 1e-5;
    (f(z + h) - f(z - h)) / (2.0 * h)
}

#[test]
fn field_modes_match_finite_differences() {
    let mut d = Draw::new(31);
    let ops = Operators::new(Order::new(10).unwrap());
    let charges = random_charges(&mut d, 8, c(0.0, 0.0), 0.2);
    let m = ops.p2m(&charges, c(0.0, 0.0));
    let l = ops.m2l(&m, c(2.0, -1.0)).unwrap();
    for _ in 0..10 {
        // derivative of the analytic potential along the real axis; keep
        // clear of the log branch cut on the negative real axis
        let z = d.on_circle(c(0.0, 0.0), 1.0);
        let z = c(z.re.abs() + 0.2, z.im);
        let fd = finite_difference(|z| evaluate_multipole(&m, z, Mode::Potential).unwrap(), z);
        let an = evaluate_multipole(&m, z, Mode::Field).unwrap();
        assert!((fd - an).norm() <= 1e-6 * an.norm(), "{fd} vs {an}");
        assert!((an - direct_field(&charges, z)).norm() < 1e-8);

        let zt = c(2.0, -1.0) + c(0.3 * d.sym(), 0.3 * d.sym());
        let fd = finite_difference(|z| evaluate_local(&l, z, Mode::Potential).unwrap(), zt);
        let an = evaluate_local(&l, zt, Mode::Field).unwrap();
        assert!((fd - an).norm() <= 1e-6 * an.norm(), "{fd} vs {an}");
    }
}

#[test]
fn p2p_matches_dense_matvec() {
    let mut d = Draw::new(41);
    let charges = random_charges(&mut d, 50, c(0.5, 0.5), 0.5);
    // dense interaction matrix, then the product
    let n = charges.len();
    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix[i][j] = (charges[i].z - charges[j].z).ln();
            }
        }
    }
    let got = p2p_direct(&charges, &charges, Mode::Potential);
    for i in 0..n {
        let want: Complex64 = (0..n).map(|j| matrix[i][j] * charges[j].q).sum();
        assert!((got[i] - want).norm() <= 1e-14 * want.norm().max(1.0));
    }
}

fn assert_linear(ax: &Expansion, ay: &Expansion, axy: &Expansion, alpha: f64, beta: f64) {
    for ((x, y), xy) in ax.coeffs.iter().zip(&ay.coeffs).zip(&axy.coeffs) {
        let want = x * alpha + y * beta;
        assert!(
            (xy - want).norm() <= 1e-12 * want.norm().max(1.0),
            "{xy} vs {want}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_are_linear(seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut d = Draw::new(seed);
        let ops = Operators::new(Order::new(8).unwrap());
        let pos: Vec<Complex64> = (0..6).map(|_| d.in_disk(c(0.0, 0.0), 0.3)).collect();
        let qx: Vec<f64> = (0..6).map(|_| d.sym()).collect();
        let qy: Vec<f64> = (0..6).map(|_| d.sym()).collect();
        let mk = |q: &dyn Fn(usize) -> f64| -> Vec<Charge> {
            pos.iter().enumerate().map(|(i, &z)| Charge::new(z, c(q(i), 0.0))).collect()
        };
        let x = mk(&|i| qx[i]);
        let y = mk(&|i| qy[i]);
        let xy = mk(&|i| alpha * qx[i] + beta * qy[i]);
        let (mx, my, mxy) = (ops.p2m(&x, c(0.0, 0.0)), ops.p2m(&y, c(0.0, 0.0)), ops.p2m(&xy, c(0.0, 0.0)));
        assert_linear(&mx, &my, &mxy, alpha, beta);

        let shift = c(0.4, -0.3);
        assert_linear(
            &ops.m2m(&mx, shift).unwrap(),
            &ops.m2m(&my, shift).unwrap(),
            &ops.m2m(&mxy, shift).unwrap(),
            alpha,
            beta,
        );
        let zl = c(3.0, 0.5);
        let (lx, ly, lxy) = (
            ops.m2l(&mx, zl).unwrap(),
            ops.m2l(&my, zl).unwrap(),
            ops.m2l(&mxy, zl).unwrap(),
        );
        assert_linear(&lx, &ly, &lxy, alpha, beta);
        assert_linear(
            &ops.l2l(&lx, zl + 0.2).unwrap(),
            &ops.l2l(&ly, zl + 0.2).unwrap(),
            &ops.l2l(&lxy, zl + 0.2).unwrap(),
            alpha,
            beta,
        );
    }
}
