// Straightforward reference implementations: explicit loops, two passes,
// and a dense Gaussian-elimination solve for the autoregressive fit.
#![allow(dead_code)]

pub fn iav(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v.abs();
    }
    s
}

pub fn mav(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v.abs();
    }
    s / x.len() as f64
}

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v;
    }
    s / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for &v in x {
        s += (v - m) * (v - m);
    }
    s / (x.len() - 1) as f64
}

pub fn sd(x: &[f64]) -> f64 {
    var(x).sqrt()
}

pub fn rms(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v * v;
    }
    (s / x.len() as f64).sqrt()
}

pub fn wl(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..x.len() {
        s += (x[i] - x[i - 1]).abs();
    }
    s
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for &v in x {
        s += (v - m).powi(k);
    }
    s / x.len() as f64
}

pub fn skew(x: &[f64]) -> f64 {
    central_moment(x, 3) / sd(x).powi(3)
}

pub fn kurt(x: &[f64]) -> f64 {
    central_moment(x, 4) / var(x).powi(2)
}

pub fn mobility(x: &[f64]) -> f64 {
    let d: Vec<f64> = (1..x.len()).map(|i| x[i] - x[i - 1]).collect();
    var(&d) / var(x)
}

/// Yule-Walker: solve the full Toeplitz system `R a = r` directly.
pub fn ar(x: &[f64], p: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let r: Vec<f64> = (0..=p)
        .map(|k| {
            let mut s = 0.0;
            for t in 0..n - k {
                s += (x[t] - m) * (x[t + k] - m);
            }
            s / n as f64
        })
        .collect();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = r[i.abs_diff(j)];
        }
        a[i][p] = r[i + 1];
    }
    solve(a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let p = a.len();
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut out = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = a[i][p];
        for j in i + 1..p {
            s -= a[i][j] * out[j];
        }
        out[i] = s / a[i][i];
    }
    out
}

/// One channel's features in table order.
pub fn channel(x: &[f64], p: usize) -> Vec<f64> {
    let mut v = vec![iav(x), mav(x), sd(x), rms(x), wl(x)];
    v.extend(ar(x, p));
    v.extend([skew(x), mobility(x), kurt(x)]);
    v
}

/// `|a − b| / max(|a|, |b|)`, with a 1e-12 floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`; used for coefficient vectors, whose small
/// entries carry the rounding of the large ones.
pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}
