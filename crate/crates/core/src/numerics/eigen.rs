//! Dense nonsymmetric eigenvalues: balancing, Hessenberg reduction by
//! stabilized elimination, then the Francis double-shift QR iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Row-major scratch copy used by the in-place kernels below.
struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    fn from_matrix(m: &Matrix) -> Self {
        let n = m.nrows();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = m[(i, j)];
            }
        }
        Dense { n, a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

fn balance(d: &mut Dense) {
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let n = d.n;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += d.at(j, i).abs();
                    r += d.at(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= SQRDX;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= SQRDX;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        *d.at_mut(i, j) *= g;
                    }
                    for j in 0..n {
                        *d.at_mut(j, i) *= f;
                    }
                }
            }
        }
    }
}

fn reduce_to_hessenberg(d: &mut Dense) {
    let n = d.n;
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = 0.0f64;
        let mut i = m;
        for j in m..n {
            if d.at(j, m - 1).abs() > x.abs() {
                x = d.at(j, m - 1);
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                d.a.swap(i * n + j, m * n + j);
            }
            for j in 0..n {
                d.a.swap(j * n + i, j * n + m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = d.at(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    *d.at_mut(i, m - 1) = y;
                    for j in m..n {
                        let v = d.at(m, j);
                        *d.at_mut(i, j) -= y * v;
                    }
                    for j in 0..n {
                        let v = d.at(j, i);
                        *d.at_mut(j, m) += y * v;
                    }
                }
            }
        }
    }
    // Multipliers were stored below the subdiagonal.
    for i in 2..n {
        for j in 0..i - 1 {
            *d.at_mut(i, j) = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix. The total number of QR sweeps is
/// capped at `max_sweeps`.
fn hessenberg_qr(d: &mut Dense, max_sweeps: usize) -> Result<Vec<Complex64>> {
    let n = d.n;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += d.at(i, j).abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut sweeps = 0usize;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 1 {
                let mut s = d.at(l - 1, l - 1).abs() + d.at(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if d.at(l, l - 1).abs() + s == s {
                    *d.at_mut(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = d.at(nu, nu);
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = d.at(nu - 1, nu - 1);
            let mut w = d.at(nu, nu - 1) * d.at(nu - 1, nu);
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }

            if sweeps >= max_sweeps {
                return Err(Error::NoConvergence(n));
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 0..=nu {
                    *d.at_mut(i, i) -= x;
                }
                let s = d.at(nu, nu - 1).abs() + d.at(nu - 1, nu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            let (mut p, mut q, mut r);
            let mut m = nu - 2;
            loop {
                let z = d.at(m, m);
                let r0 = x - z;
                let s0 = y - z;
                p = (r0 * s0 - w) / d.at(m + 1, m) + d.at(m, m + 1);
                q = d.at(m + 1, m + 1) - z - r0 - s0;
                r = d.at(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = d.at(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (d.at(m - 1, m - 1).abs() + z.abs() + d.at(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                *d.at_mut(i, i - 2) = 0.0;
                if i != m + 2 {
                    *d.at_mut(i, i - 3) = 0.0;
                }
            }
            let mut xk = 0.0;
            for k in m..nu {
                if k != m {
                    p = d.at(k, k - 1);
                    q = d.at(k + 1, k - 1);
                    r = 0.0;
                    if k != nu - 1 {
                        r = d.at(k + 2, k - 1);
                    }
                    xk = p.abs() + q.abs() + r.abs();
                    if xk != 0.0 {
                        p /= xk;
                        q /= xk;
                        r /= xk;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            *d.at_mut(k, k - 1) = -d.at(k, k - 1);
                        }
                    } else {
                        *d.at_mut(k, k - 1) = -s * xk;
                    }
                    p += s;
                    let xr = p / s;
                    let yr = q / s;
                    let zr = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = d.at(k, j) + q * d.at(k + 1, j);
                        if k != nu - 1 {
                            pp += r * d.at(k + 2, j);
                            *d.at_mut(k + 2, j) -= pp * zr;
                        }
                        *d.at_mut(k + 1, j) -= pp * yr;
                        *d.at_mut(k, j) -= pp * xr;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = xr * d.at(i, k) + yr * d.at(i, k + 1);
                        if k != nu - 1 {
                            pp += zr * d.at(i, k + 2);
                            *d.at_mut(i, k + 2) -= pp * r;
                        }
                        *d.at_mut(i, k + 1) -= pp * q;
                        *d.at_mut(i, k) -= pp;
                    }
                }
            }
        }
    }

    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// All eigenvalues of a square real matrix, with multiplicity. Ordering is
/// unspecified. Fails when the QR iteration exceeds `30·n` sweeps.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = m.nrows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        _ => {}
    }
    let mut d = Dense::from_matrix(m);
    balance(&mut d);
    reduce_to_hessenberg(&mut d);
    hessenberg_qr(&mut d, 30 * n)
}
