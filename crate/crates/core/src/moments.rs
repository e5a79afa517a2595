//! Sample signals and the fourth-order statistics both cost models consume.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{pairwise_sum, Mat};

/// N channels × S samples, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    data: Mat,
}

impl SignalMatrix {
    /// Wraps an N×S matrix. Requires N ≥ 1, S ≥ 2 and finite entries.
    pub fn new(data: Mat) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::ZeroDimension {
                context: "SignalMatrix channels",
            });
        }
        if data.cols() < 2 {
            return Err(Error::TooFewSamples {
                required: 2,
                found: data.cols(),
            });
        }
        if !data.is_finite() {
            return Err(Error::NonFinite {
                context: "SignalMatrix",
            });
        }
        Ok(SignalMatrix { data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        SignalMatrix::new(Mat::from_rows(rows))
    }

    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn into_inner(self) -> Mat {
        self.data
    }

    /// `C · self`, i.e. the signals seen through the unmixing matrix `c`.
    pub fn transform(&self, c: &Mat) -> Result<SignalMatrix> {
        if c.cols() != self.channels() {
            return Err(Error::DimensionMismatch {
                context: "unmixing matrix columns",
                expected: self.channels(),
                found: c.cols(),
            });
        }
        Ok(SignalMatrix {
            data: c.try_mul(&self.data)?,
        })
    }
}

/// Subtracts the per-channel sample mean.
pub fn center(x: &SignalMatrix) -> SignalMatrix {
    let s = x.samples();
    let mut data = x.data.clone();
    for i in 0..x.channels() {
        let row = data.row_mut(i);
        let mean = crate::mat::pairwise_sum(row) / s as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    SignalMatrix { data }
}

/// Per-iteration statistics of `Y = C X`.
///
/// All expectations are plain 1/S sample means of raw (uncentered) moments.
/// With `m2_i = E(Y_i²)`:
///
/// * `r1[(p, i)] = E(Y_i Y_p) / m2_i`
/// * `r3[(p, i)] = E(Y_i³ Y_p) / m2_i²`
/// * `u0[i][(p, q)] = E(Y_p Y_q) / m2_i`
/// * `u2[i][(p, q)] = E(Y_i² Y_p Y_q) / m2_i²`
/// * `kappa[i] = E(Y_i⁴) / m2_i²`
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// Raw second moments E(Y_i²).
    pub second: Vec<f64>,
    /// σ^(2)_i = E(Y_i²)^{1/2}.
    pub sigma2: Vec<f64>,
    /// Raw fourth moments E(Y_i⁴).
    pub fourth: Vec<f64>,
    /// σ^(4)_i = E(Y_i⁴)^{1/4}.
    pub sigma4: Vec<f64>,
    pub r1: Mat,
    pub r3: Mat,
    pub u0: Vec<Mat>,
    pub u2: Vec<Mat>,
    pub kappa: Vec<f64>,
}

impl MomentSet {
    pub fn dim(&self) -> usize {
        self.kappa.len()
    }

    /// Builds the derived statistics from raw moment tables.
    ///
    /// `m2[(p, q)] = E(Y_p Y_q)`, `m31[(p, i)] = E(Y_i³ Y_p)`,
    /// `m22[i][(p, q)] = E(Y_i² Y_p Y_q)`.
    pub fn from_raw(m2: &Mat, m31: &Mat, m22: &[Mat]) -> Result<Self> {
        let n = m2.rows();
        let second = m2.diagonal();
        let scale = second.iter().cloned().fold(0.0, f64::max);
        for (i, &s) in second.iter().enumerate() {
            if !(s > 0.0) || s < 1e-30 * scale {
                return Err(Error::DegenerateChannel {
                    channel: i,
                    second_moment: s,
                });
            }
        }
        let fourth = m31.diagonal();
        let sigma2 = second.iter().map(|&s| libm::sqrt(s)).collect();
        let sigma4 = fourth.iter().map(|&f| libm::pow(f.abs(), 0.25)).collect();
        let r1 = Mat::from_fn(n, n, |p, i| m2[(p, i)] / second[i]);
        let r3 = Mat::from_fn(n, n, |p, i| m31[(p, i)] / (second[i] * second[i]));
        let u0 = (0..n).map(|i| m2.scale(1.0 / second[i])).collect();
        let u2 = (0..n)
            .map(|i| m22[i].scale(1.0 / (second[i] * second[i])))
            .collect();
        let kappa = (0..n).map(|i| fourth[i] / (second[i] * second[i])).collect();
        Ok(MomentSet {
            second,
            sigma2,
            fourth,
            sigma4,
            r1,
            r3,
            u0,
            u2,
            kappa,
        })
    }
}

/// Index layout of the accumulated per-sample products.
struct Layout {
    n: usize,
}

impl Layout {
    fn pairs(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn len(&self) -> usize {
        // E(Y_p Y_q), E(Y_i³ Y_p), E(Y_i² Y_p Y_q) with p ≤ q
        self.pairs() + self.n * self.n + self.n * self.pairs()
    }

    fn pair(&self, p: usize, q: usize) -> usize {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        p * self.n - p * (p + 1) / 2 + q
    }

    fn m2(&self, p: usize, q: usize) -> usize {
        self.pair(p, q)
    }

    fn m31(&self, p: usize, i: usize) -> usize {
        self.pairs() + p * self.n + i
    }

    fn m22(&self, i: usize, p: usize, q: usize) -> usize {
        self.pairs() + self.n * self.n + i * self.pairs() + self.pair(p, q)
    }
}

const BLOCK: usize = 256;

fn accumulate(y: &Mat, layout: &Layout, lo: usize, hi: usize, out: &mut [f64]) {
    let n = layout.n;
    let mut col = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for t in lo..hi {
        for p in 0..n {
            col[p] = y[(p, t)];
            sq[p] = col[p] * col[p];
        }
        for p in 0..n {
            for q in p..n {
                let pq = col[p] * col[q];
                out[layout.m2(p, q)] += pq;
                for i in 0..n {
                    out[layout.m22(i, p, q)] += sq[i] * pq;
                }
            }
            for i in 0..n {
                out[layout.m31(p, i)] += sq[i] * col[i] * col[p];
            }
        }
    }
}

/// Sums the per-sample products over `[lo, hi)` in a fixed pairwise order.
fn pairwise_accumulate(y: &Mat, layout: &Layout, lo: usize, hi: usize) -> Vec<f64> {
    if hi - lo <= BLOCK {
        let mut out = vec![0.0; layout.len()];
        accumulate(y, layout, lo, hi, &mut out);
        out
    } else {
        let mid = lo + (hi - lo) / 2;
        let mut a = pairwise_accumulate(y, layout, lo, mid);
        let b = pairwise_accumulate(y, layout, mid, hi);
        for (x, v) in a.iter_mut().zip(b) {
            *x += v;
        }
        a
    }
}

/// Estimates every statistic of [`MomentSet`] from the samples of `y`.
///
/// Fails with [`Error::DegenerateChannel`] when a channel's second moment is
/// zero or below 10⁻³⁰ of the largest one.
pub fn estimate_moments(y: &SignalMatrix) -> Result<MomentSet> {
    let n = y.channels();
    let s = y.samples();
    let layout = Layout { n };
    let sums = pairwise_accumulate(&y.data, &layout, 0, s);
    let inv_s = 1.0 / s as f64;
    let m2 = Mat::from_fn(n, n, |p, q| sums[layout.m2(p, q)] * inv_s);
    let m31 = Mat::from_fn(n, n, |p, i| sums[layout.m31(p, i)] * inv_s);
    let m22: Vec<Mat> = (0..n)
        .map(|i| Mat::from_fn(n, n, |p, q| sums[layout.m22(i, p, q)] * inv_s))
        .collect();
    MomentSet::from_raw(&m2, &m31, &m22)
}

/// κ per channel straight from the samples, without the cross moments.
/// Cheaper than [`estimate_moments`] by a factor of about N².
pub fn sample_kurtosis(y: &SignalMatrix) -> Result<Vec<f64>> {
    let (second, fourth) = even_moments(y);
    check_second_moments(&second)?;
    Ok(second.iter().zip(&fourth).map(|(m2, m4)| m4 / (m2 * m2)).collect())
}

/// E(Y_p Y_q) for all pairs.
pub fn second_moment_matrix(y: &SignalMatrix) -> Mat {
    let n = y.channels();
    let s = y.samples() as f64;
    let mut products = vec![0.0; y.samples()];
    let mut out = Mat::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            for (t, (a, b)) in y.channel(p).iter().zip(y.channel(q)).enumerate() {
                products[t] = a * b;
            }
            let v = pairwise_sum(&products) / s;
            out[(p, q)] = v;
            out[(q, p)] = v;
        }
    }
    out
}

/// E(Y_i²) per channel.
pub fn second_moments(y: &SignalMatrix) -> Result<Vec<f64>> {
    let s = y.samples() as f64;
    let mut squares = vec![0.0; y.samples()];
    let second: Vec<f64> = (0..y.channels())
        .map(|i| {
            for (t, &v) in y.channel(i).iter().enumerate() {
                squares[t] = v * v;
            }
            pairwise_sum(&squares) / s
        })
        .collect();
    check_second_moments(&second)?;
    Ok(second)
}

fn check_second_moments(second: &[f64]) -> Result<()> {
    let scale = second.iter().cloned().fold(0.0, f64::max);
    for (i, &m2) in second.iter().enumerate() {
        if !(m2 > 0.0) || m2 < 1e-30 * scale {
            return Err(Error::DegenerateChannel {
                channel: i,
                second_moment: m2,
            });
        }
    }
    Ok(())
}

fn even_moments(y: &SignalMatrix) -> (Vec<f64>, Vec<f64>) {
    let s = y.samples();
    let mut squares = vec![0.0; s];
    let mut fourths = vec![0.0; s];
    let mut second = Vec::with_capacity(y.channels());
    let mut fourth = Vec::with_capacity(y.channels());
    for i in 0..y.channels() {
        for (t, &v) in y.channel(i).iter().enumerate() {
            squares[t] = v * v;
            fourths[t] = squares[t] * squares[t];
        }
        second.push(pairwise_sum(&squares) / s as f64);
        fourth.push(pairwise_sum(&fourths) / s as f64);
    }
    (second, fourth)
}

/// κ per channel.
pub fn kurtosis_vector(m: &MomentSet) -> Vec<f64> {
    m.kappa.clone()
}

/// κ − 3 per channel (zero for Gaussian channels).
pub fn excess_kurtosis(m: &MomentSet) -> Vec<f64> {
    m.kappa.iter().map(|k| k - 3.0).collect()
}
