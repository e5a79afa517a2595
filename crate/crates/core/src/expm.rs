//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13), selected by the 1-norm of the argument.

use crate::error::{Error, Result};
use crate::mat::{Lu, Mat};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn axpy_into(acc: &mut Mat, s: f64, x: &Mat) {
    for (a, v) in acc.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *a += s * v;
    }
}

/// Returns (U, V) with the [m/m] approximant r = (V − U)⁻¹(V + U).
fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.rows();
    let a2 = a * a;
    let mut powers = alloc::vec![Mat::identity(n)];
    for _ in 1..b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        axpy_into(&mut v, b[2 * k], p);
        axpy_into(&mut u_inner, b[2 * k + 1], p);
    }
    (a * &u_inner, v)
}

fn pade_13(a: &Mat) -> (Mat, Mat) {
    let n = a.rows();
    let b = &B13;
    let ident = Mat::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut w1 = a6.scale(b[13]);
    axpy_into(&mut w1, b[11], &a4);
    axpy_into(&mut w1, b[9], &a2);
    let mut w2 = a6.scale(b[7]);
    axpy_into(&mut w2, b[5], &a4);
    axpy_into(&mut w2, b[3], &a2);
    axpy_into(&mut w2, b[1], &ident);
    let u = a * &(&(&a6 * &w1) + &w2);

    let mut z1 = a6.scale(b[12]);
    axpy_into(&mut z1, b[10], &a4);
    axpy_into(&mut z1, b[8], &a2);
    let mut v = &a6 * &z1;
    axpy_into(&mut v, b[6], &a6);
    axpy_into(&mut v, b[4], &a4);
    axpy_into(&mut v, b[2], &a2);
    axpy_into(&mut v, b[0], &ident);
    (u, v)
}

/// e^A for a square matrix with finite entries.
pub fn matrix_exp(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            context: "matrix_exp",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "matrix_exp",
        });
    }
    let norm = a.norm_1();
    if norm == 0.0 {
        return Ok(Mat::identity(a.rows()));
    }

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            return pade_solve(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        libm::ceil(libm::log2(norm / THETA_13)) as i32
    } else {
        0
    };
    let scaled = a.scale(libm::ldexp(1.0, -s));
    let (u, v) = pade_13(&scaled);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve(u: &Mat, v: &Mat) -> Result<Mat> {
    let lu = Lu::factor(&(v - u))?;
    Ok(lu.solve_mat(&(v + u)))
}
