//! The assembled gradient and W against finite differences of the exact
//! sample cost, and the second-order model against the exact cost.

use cosetica_core::engine::hessian_at;
use cosetica_core::eval::{
    direct_cost, fd_gradient, fd_hessian, generate_mixture, Distribution, Mixing, MixtureSpec,
};
use cosetica_core::expm::matrix_exp;
use cosetica_core::tensor::build_p_tilde;
use cosetica_core::{estimate_moments, CostCase, CostModel, Mat, SignalMatrix};

const CASES: [CostCase; 2] = [CostCase::Kurtosis, CostCase::SquaredKurtosis];

/// Small deterministic generator for test matrices.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn mat(&mut self, n: usize, scale: f64) -> Mat {
        Mat::from_fn(n, n, |_, _| scale * self.next())
    }
}

fn data(n: usize, seed: u64) -> SignalMatrix {
    let dists = [
        Distribution::Uniform,
        Distribution::Laplacian,
        Distribution::TwoPoint(0.3),
        Distribution::Gaussian,
    ];
    generate_mixture(&MixtureSpec {
        distributions: (0..n).map(|i| dists[(i + seed as usize) % dists.len()]).collect(),
        mixing: Mixing::RandomCondition(50.0),
        samples: 10_000,
        seed,
    })
    .unwrap()
    .mixed
}

fn start(n: usize, seed: u64) -> Mat {
    let mut rng = Lcg(seed ^ 0x9e37);
    &Mat::identity(n) + &rng.mat(n, 0.3)
}

#[test]
fn gradient_matches_finite_differences() {
    for n in 2..=4 {
        for seed in 0..3 {
            let x = data(n, seed);
            let c = start(n, seed);
            for case in CASES {
                let m = estimate_moments(&x.transform(&c).unwrap()).unwrap();
                let g = case.gradient_vec(&m);
                let fd = fd_gradient(|c, x| direct_cost(case, c, x), &c, &x, 1e-5).unwrap();
                for (i, (a, b)) in g.as_slice().iter().zip(fd.as_slice()).enumerate() {
                    assert!(
                        (a - b).abs() <= 1e-4 * a.abs().max(b.abs()) + 1e-8,
                        "{case:?} n={n} seed={seed} slot {i}: {a} vs {b}"
                    );
                }
            }
        }
    }
}

#[test]
fn hessian_matches_finite_differences() {
    for n in 2..=4 {
        for seed in 0..3 {
            let x = data(n, seed);
            let c = start(n, seed);
            for case in CASES {
                let h = hessian_at(&c, &x, case).unwrap();
                let sel = build_p_tilde(n).unwrap().matrix;
                let fd_full = fd_hessian(|c, x| direct_cost(case, c, x), &c, &x, 1e-3).unwrap();
                let fd = &(&sel * &fd_full) * &sel.transpose();
                for i in 0..h.rows() {
                    for j in 0..h.cols() {
                        let (a, b) = (h[(i, j)], fd[(i, j)]);
                        if a.abs().max(b.abs()) > 1e-6 {
                            assert!(
                                (a - b).abs() <= 1e-3 * a.abs().max(b.abs()),
                                "{case:?} n={n} seed={seed} ({i},{j}): {a} vs {b}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn quadratic_model_remainder_is_cubic() {
    let ts = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
    for seed in 0..4 {
        let n = 3;
        let x = data(n, seed);
        let c = start(n, seed);
        let mut rng = Lcg(seed + 100);
        let mut delta = rng.mat(n, 0.5);
        for i in 0..n {
            delta[(i, i)] = 0.0;
        }
        let m = estimate_moments(&x.transform(&c).unwrap()).unwrap();
        for case in CASES {
            let pts: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| {
                    let d = delta.scale(t);
                    let exact = direct_cost(case, &(&matrix_exp(&d).unwrap() * &c), &x);
                    let model = case.quadratic_model(&d, &m);
                    (t.ln(), (exact - model).abs().ln())
                })
                .collect();
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            assert!(slope >= 2.7, "{case:?} seed={seed}: slope {slope}");
        }
    }
}
