//! Per-cone operations used by the interior-point iteration: Nesterov-Todd
//! scaling, Jordan algebra, step lengths and interior shifts.
//!
//! All vectors are local to one cone block. PSD blocks use the column-wise
//! upper-triangle svec with off-diagonals scaled by sqrt(2).

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::SQRT_2;

use crate::program::ConeSpec;

/// Side length of the matrix whose svec has `len` entries.
pub fn svec_side(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (n * (n + 1) / 2 == len).then_some(n)
}

pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub fn smat(x: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = x[svec_index(i, j)];
            if i == j {
                m[(i, i)] = v;
            } else {
                m[(i, j)] = v / SQRT_2;
                m[(j, i)] = v / SQRT_2;
            }
        }
    }
    m
}

pub fn svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
        }
    }
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub enum Cone {
    Zero {
        dim: usize,
    },
    NonNeg {
        dim: usize,
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        dim: usize,
        eta: f64,
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        side: usize,
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
        lambda: Vec<f64>,
    },
}

impl Cone {
    pub fn new(spec: &ConeSpec) -> Cone {
        match *spec {
            ConeSpec::Zero(dim) => Cone::Zero { dim },
            ConeSpec::NonNeg(dim) => Cone::NonNeg {
                dim,
                w: vec![1.0; dim],
                lambda: vec![1.0; dim],
            },
            ConeSpec::Soc(dim) => Cone::Soc {
                dim,
                eta: 1.0,
                w: unit_soc(dim),
                lambda: unit_soc(dim),
            },
            ConeSpec::Psd(side) => Cone::Psd {
                side,
                r: DMatrix::identity(side, side),
                rinv: DMatrix::identity(side, side),
                lambda: vec![1.0; side],
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cone::Zero { dim } | Cone::NonNeg { dim, .. } | Cone::Soc { dim, .. } => *dim,
            Cone::Psd { side, .. } => svec_len(*side),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Cone::Zero { .. } => 0,
            Cone::NonNeg { dim, .. } => *dim,
            Cone::Soc { .. } => 1,
            Cone::Psd { side, .. } => *side,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Cone::Zero { .. })
    }

    /// Whether the Hessian block is diagonal (Zero and NonNeg) or dense.
    pub fn diagonal_hessian(&self) -> bool {
        matches!(self, Cone::Zero { .. } | Cone::NonNeg { .. })
    }

    /// Identity element e.
    pub fn unit(&self, e: &mut [f64]) {
        e.fill(0.0);
        match self {
            Cone::Zero { .. } => {}
            Cone::NonNeg { .. } => e.fill(1.0),
            Cone::Soc { .. } => e[0] = 1.0,
            Cone::Psd { side, .. } => {
                for i in 0..*side {
                    e[svec_index(i, i)] = 1.0;
                }
            }
        }
    }

    /// Smallest spectral value of x (how far x sits inside the cone).
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Cone::Zero { .. } => f64::INFINITY,
            Cone::NonNeg { .. } => x.iter().cloned().fold(f64::INFINITY, f64::min),
            Cone::Soc { .. } => x[0] - norm2(&x[1..]),
            Cone::Psd { side, .. } => min_eig(smat(x, *side)),
        }
    }

    /// Dual-cone membership test with tolerance relative to the size of x.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Cone::Zero { .. } => true,
            _ => {
                let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                self.margin(x) >= -tol * scale
            }
        }
    }

    /// Moves x into the interior by adding a multiple of e.
    pub fn shift_to_interior(&self, x: &mut [f64]) {
        if self.is_zero() {
            return;
        }
        let a = self.margin(x);
        if a < 1e-8 {
            let mut e = vec![0.0; x.len()];
            self.unit(&mut e);
            let t = 1.0 - a;
            for (xi, ei) in x.iter_mut().zip(&e) {
                *xi += t * ei;
            }
        }
    }

    /// Recomputes the NT scaling at (s, z). Returns false if either point is
    /// not strictly interior.
    pub fn update_scaling(&mut self, s: &[f64], z: &[f64]) -> bool {
        match self {
            Cone::Zero { .. } => true,
            Cone::NonNeg { w, lambda, .. } => {
                for i in 0..s.len() {
                    if !(s[i] > 0.0 && z[i] > 0.0) {
                        return false;
                    }
                    w[i] = (s[i] / z[i]).sqrt();
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                true
            }
            Cone::Soc { eta, w, lambda, .. } => {
                let sres = soc_residual(s);
                let zres = soc_residual(z);
                if !(s[0] > 0.0 && z[0] > 0.0 && sres > 0.0 && zres > 0.0) {
                    return false;
                }
                let sn = sres.sqrt();
                let zn = zres.sqrt();
                let dot_sz: f64 =
                    s.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() / (sn * zn);
                let gamma = ((1.0 + dot_sz) / 2.0).sqrt();
                w[0] = (s[0] / sn + z[0] / zn) / (2.0 * gamma);
                for i in 1..s.len() {
                    w[i] = (s[i] / sn - z[i] / zn) / (2.0 * gamma);
                }
                *eta = (sres / zres).sqrt().sqrt();
                let mut lam = vec![0.0; s.len()];
                soc_mul_w(*eta, w, z, &mut lam);
                lambda.copy_from_slice(&lam);
                true
            }
            Cone::Psd {
                side,
                r,
                rinv,
                lambda,
            } => {
                let n = *side;
                let sm = smat(s, n);
                let zm = smat(z, n);
                let l1 = match sm.cholesky() {
                    Some(c) => c.unpack(),
                    None => return false,
                };
                let l2 = match zm.cholesky() {
                    Some(c) => c.unpack(),
                    None => return false,
                };
                let prod = l2.transpose() * &l1;
                let svd = prod.svd(true, true);
                let (u, vt) = match (svd.u, svd.v_t) {
                    (Some(u), Some(vt)) => (u, vt),
                    _ => return false,
                };
                let sig = svd.singular_values;
                if sig.iter().any(|v| !(*v > 0.0)) {
                    return false;
                }
                let mut is = DMatrix::zeros(n, n);
                for i in 0..n {
                    is[(i, i)] = 1.0 / sig[i].sqrt();
                    lambda[i] = sig[i];
                }
                *r = &l1 * vt.transpose() * &is;
                *rinv = &is * u.transpose() * l2.transpose();
                true
            }
        }
    }

    /// Dense upper triangle (column-wise, i <= j) of W'W, or its diagonal for
    /// diagonal cones.
    pub fn hessian(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Cone::Zero { dim } => out.resize(*dim, 0.0),
            Cone::NonNeg { w, .. } => out.extend(w.iter().map(|v| v * v)),
            Cone::Soc { dim, eta, w, .. } => {
                // W'W = eta^2 (2 w w' - J)
                let e2 = eta * eta;
                for j in 0..*dim {
                    for i in 0..=j {
                        let mut v = 2.0 * w[i] * w[j];
                        if i == j {
                            v += if i == 0 { -1.0 } else { 1.0 };
                        }
                        out.push(e2 * v);
                    }
                }
            }
            Cone::Psd { side, r, .. } => {
                let n = *side;
                let q = r * r.transpose();
                let m = svec_len(n);
                let mut pairs = Vec::with_capacity(m);
                for j in 0..n {
                    for i in 0..=j {
                        pairs.push((i, j));
                    }
                }
                for col in 0..m {
                    let (k, l) = pairs[col];
                    for row in 0..=col {
                        let (i, j) = pairs[row];
                        let sij = if i == j { 1.0 } else { SQRT_2 };
                        let skl = if k == l { 1.0 } else { SQRT_2 };
                        out.push(0.5 * sij * skl * (q[(i, k)] * q[(j, l)] + q[(i, l)] * q[(j, k)]));
                    }
                }
            }
        }
    }

    pub fn lambda_sq(&self, out: &mut [f64]) {
        match self {
            Cone::Zero { .. } => out.fill(0.0),
            Cone::NonNeg { lambda, .. } => {
                for (o, l) in out.iter_mut().zip(lambda) {
                    *o = l * l;
                }
            }
            Cone::Soc { lambda, .. } => jordan_soc(lambda, lambda, out),
            Cone::Psd { side, lambda, .. } => {
                out.fill(0.0);
                for i in 0..*side {
                    out[svec_index(i, i)] = lambda[i] * lambda[i];
                }
            }
        }
    }

    /// out = W x
    pub fn mul_w(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Cone::Zero { .. } => out.fill(0.0),
            Cone::NonNeg { w, .. } => {
                for i in 0..x.len() {
                    out[i] = w[i] * x[i];
                }
            }
            Cone::Soc { eta, w, .. } => soc_mul_w(*eta, w, x, out),
            Cone::Psd { side, r, .. } => {
                let m = r.transpose() * smat(x, *side) * r;
                svec(&m, out);
            }
        }
    }

    /// out = W' x
    pub fn mul_wt(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Cone::Psd { side, r, .. } => {
                let m = r * smat(x, *side) * r.transpose();
                svec(&m, out);
            }
            _ => self.mul_w(x, out),
        }
    }

    /// out = W^{-T} x
    pub fn mul_winv_t(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Cone::Zero { .. } => out.fill(0.0),
            Cone::NonNeg { w, .. } => {
                for i in 0..x.len() {
                    out[i] = x[i] / w[i];
                }
            }
            Cone::Soc { eta, w, .. } => soc_mul_winv(*eta, w, x, out),
            Cone::Psd { side, rinv, .. } => {
                let m = rinv * smat(x, *side) * rinv.transpose();
                svec(&m, out);
            }
        }
    }

    /// Jordan product out = a o b.
    pub fn circ(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        match self {
            Cone::Zero { .. } => out.fill(0.0),
            Cone::NonNeg { .. } => {
                for i in 0..a.len() {
                    out[i] = a[i] * b[i];
                }
            }
            Cone::Soc { .. } => jordan_soc(a, b, out),
            Cone::Psd { side, .. } => {
                let am = smat(a, *side);
                let bm = smat(b, *side);
                let p = &am * &bm;
                let m = (&p + p.transpose()) * 0.5;
                svec(&m, out);
            }
        }
    }

    /// out = lambda \ d (inverse Jordan product with the scaled point).
    pub fn lambda_inv_circ(&self, d: &[f64], out: &mut [f64]) {
        match self {
            Cone::Zero { .. } => out.fill(0.0),
            Cone::NonNeg { lambda, .. } => {
                for i in 0..d.len() {
                    out[i] = d[i] / lambda[i];
                }
            }
            Cone::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let l1 = &lambda[1..];
                let det = (l0 - norm2(l1)) * (l0 + norm2(l1));
                let dot: f64 = l1.iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
                let w0 = (l0 * d[0] - dot) / det;
                out[0] = w0;
                for i in 1..d.len() {
                    out[i] = (d[i] - w0 * lambda[i]) / l0;
                }
            }
            Cone::Psd { side, lambda, .. } => {
                for j in 0..*side {
                    for i in 0..=j {
                        let k = svec_index(i, j);
                        out[k] = 2.0 * d[k] / (lambda[i] + lambda[j]);
                    }
                }
            }
        }
    }

    /// Largest step a in [0, amax] keeping s + a ds and z + a dz in the cone.
    pub fn step_length(&self, s: &[f64], z: &[f64], ds: &[f64], dz: &[f64], amax: f64) -> f64 {
        match self {
            Cone::Zero { .. } => amax,
            Cone::NonNeg { .. } => {
                let mut a = amax;
                for i in 0..s.len() {
                    if ds[i] < 0.0 {
                        a = a.min(-s[i] / ds[i]);
                    }
                    if dz[i] < 0.0 {
                        a = a.min(-z[i] / dz[i]);
                    }
                }
                a
            }
            Cone::Soc { .. } => amax.min(soc_step(s, ds)).min(soc_step(z, dz)),
            Cone::Psd {
                side,
                r,
                rinv,
                lambda,
            } => {
                let n = *side;
                let mut is = DMatrix::zeros(n, n);
                for i in 0..n {
                    is[(i, i)] = 1.0 / lambda[i].sqrt();
                }
                let ms = &is * (rinv * smat(ds, n) * rinv.transpose()) * &is;
                let mz = &is * (r.transpose() * smat(dz, n) * r) * &is;
                let mut a = amax;
                for m in [ms, mz] {
                    let sym = (&m + m.transpose()) * 0.5;
                    let e = min_eig(sym);
                    if e < 0.0 {
                        a = a.min(-1.0 / e);
                    }
                }
                a
            }
        }
    }
}

fn unit_soc(dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    if dim > 0 {
        e[0] = 1.0;
    }
    e
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// x0^2 - |x1|^2, computed as a product to limit cancellation.
fn soc_residual(x: &[f64]) -> f64 {
    let n = norm2(&x[1..]);
    (x[0] - n) * (x[0] + n)
}

fn jordan_soc(a: &[f64], b: &[f64], out: &mut [f64]) {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let (a0, b0) = (a[0], b[0]);
    for i in 1..a.len() {
        out[i] = a0 * b[i] + b0 * a[i];
    }
    out[0] = dot;
}

fn soc_mul_w(eta: f64, w: &[f64], x: &[f64], out: &mut [f64]) {
    let w1x1: f64 = w[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum();
    let c = x[0] + w1x1 / (1.0 + w[0]);
    out[0] = eta * (w[0] * x[0] + w1x1);
    for i in 1..x.len() {
        out[i] = eta * (x[i] + c * w[i]);
    }
}

fn soc_mul_winv(eta: f64, w: &[f64], x: &[f64], out: &mut [f64]) {
    let w1x1: f64 = w[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum();
    let c = -x[0] + w1x1 / (1.0 + w[0]);
    out[0] = (w[0] * x[0] - w1x1) / eta;
    for i in 1..x.len() {
        out[i] = (x[i] + c * w[i]) / eta;
    }
}

/// Largest a >= 0 with x + a d in the second-order cone (x interior).
fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
    let b = 2.0 * (x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>());
    let c = soc_residual(x).max(0.0);
    let mut best = f64::INFINITY;
    let mut consider = |r: f64| {
        if r > 0.0 && r < best {
            best = r;
        }
    };
    if a == 0.0 {
        if b < 0.0 {
            consider(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                consider(q / a);
                consider(c / q);
            } else {
                consider((-c / a).max(0.0).sqrt());
            }
        }
    }
    // the axis must stay nonnegative as well
    if d[0] < 0.0 {
        let r = -x[0] / d[0];
        if r < best {
            best = r;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc_cone(dim: usize) -> Cone {
        Cone::new(&ConeSpec::Soc(dim))
    }

    fn psd_point(n: usize, seed: f64) -> Vec<f64> {
        // B B' + I for a fixed pseudo-random B
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64 * seed).sin());
        let m = &b * b.transpose() + DMatrix::identity(n, n);
        let mut x = vec![0.0; svec_len(n)];
        svec(&m, &mut x);
        x
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn svec_roundtrip_and_inner_product() {
        let n = 4;
        let x = psd_point(n, 0.3);
        let y = psd_point(n, 0.7);
        let xm = smat(&x, n);
        let ym = smat(&y, n);
        let tr = (&xm * &ym).trace();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((tr - dot).abs() < 1e-12);
        let mut back = vec![0.0; x.len()];
        svec(&xm, &mut back);
        close(&x, &back, 1e-15);
        assert_eq!(svec_side(10), Some(4));
        assert_eq!(svec_side(11), None);
    }

    #[test]
    fn soc_scaling_maps_s_and_z_to_lambda() {
        let s = [3.0, 1.0, -0.5, 0.7];
        let z = [2.0, -0.3, 0.4, 1.1];
        let mut c = soc_cone(4);
        assert!(c.update_scaling(&s, &z));
        let mut wz = [0.0; 4];
        let mut ws = [0.0; 4];
        c.mul_w(&z, &mut wz);
        c.mul_winv_t(&s, &mut ws);
        close(&wz, &ws, 1e-12);
        // Hessian agrees with W'W applied to a vector
        let mut h = Vec::new();
        c.hessian(&mut h);
        let x = [0.3, -1.0, 2.0, 0.5];
        let mut wx = [0.0; 4];
        let mut wtwx = [0.0; 4];
        c.mul_w(&x, &mut wx);
        c.mul_wt(&wx, &mut wtwx);
        let mut hx = [0.0; 4];
        for j in 0..4 {
            for i in 0..4 {
                hx[i] += h[svec_index(i, j)] * x[j];
            }
        }
        close(&hx, &wtwx, 1e-12);
    }

    #[test]
    fn soc_inverse_jordan_product() {
        let s = [3.0, 1.0, -0.5];
        let z = [2.0, -0.3, 0.4];
        let mut c = soc_cone(3);
        c.update_scaling(&s, &z);
        let d = [0.4, 1.5, -2.0];
        let mut w = [0.0; 3];
        c.lambda_inv_circ(&d, &mut w);
        let lam = match &c {
            Cone::Soc { lambda, .. } => lambda.clone(),
            _ => unreachable!(),
        };
        let mut back = [0.0; 3];
        c.circ(&lam, &w, &mut back);
        close(&back, &d, 1e-12);
    }

    #[test]
    fn psd_scaling_maps_s_and_z_to_lambda() {
        let n = 3;
        let s = psd_point(n, 0.41);
        let z = psd_point(n, 1.3);
        let mut c = Cone::new(&ConeSpec::Psd(n));
        assert!(c.update_scaling(&s, &z));
        let mut wz = vec![0.0; 6];
        let mut ws = vec![0.0; 6];
        c.mul_w(&z, &mut wz);
        c.mul_winv_t(&s, &mut ws);
        close(&wz, &ws, 1e-10);
        let mut l2 = vec![0.0; 6];
        c.lambda_sq(&mut l2);
        let mut lam_from_w = vec![0.0; 6];
        c.circ(&wz, &wz, &mut lam_from_w);
        close(&l2, &lam_from_w, 1e-10);
        // dense Hessian block equals W'W as an operator
        let mut h = Vec::new();
        c.hessian(&mut h);
        let x = psd_point(n, 2.2);
        let mut wx = vec![0.0; 6];
        let mut wtwx = vec![0.0; 6];
        c.mul_w(&x, &mut wx);
        c.mul_wt(&wx, &mut wtwx);
        let mut hx = vec![0.0; 6];
        for j in 0..6 {
            for i in 0..6 {
                hx[i] += h[svec_index(i, j)] * x[j];
            }
        }
        close(&hx, &wtwx, 1e-10);
    }

    #[test]
    fn psd_inverse_jordan_product() {
        let n = 3;
        let mut c = Cone::new(&ConeSpec::Psd(n));
        c.update_scaling(&psd_point(n, 0.2), &psd_point(n, 0.9));
        let lam = match &c {
            Cone::Psd { lambda, .. } => lambda.clone(),
            _ => unreachable!(),
        };
        let mut lv = vec![0.0; 6];
        for i in 0..n {
            lv[svec_index(i, i)] = lam[i];
        }
        let d = [0.5, -1.0, 2.0, 0.1, 0.3, -0.7];
        let mut w = vec![0.0; 6];
        c.lambda_inv_circ(&d, &mut w);
        let mut back = vec![0.0; 6];
        c.circ(&lv, &w, &mut back);
        close(&back, &d, 1e-12);
    }

    #[test]
    fn soc_step_hits_boundary() {
        let x = [2.0, 0.0];
        let d = [-1.0, 1.0];
        // boundary where 2 - a = a -> a = 1
        assert!((soc_step(&x, &d) - 1.0).abs() < 1e-14);
        assert!(soc_step(&x, &[1.0, 0.5]).is_infinite());
    }

    #[test]
    fn psd_step_length_matches_eigen_boundary() {
        let n = 2;
        let mut c = Cone::new(&ConeSpec::Psd(n));
        let s = [1.0, 0.0, 1.0];
        c.update_scaling(&s, &s);
        // s + a * diag(-2, 1) leaves the cone at a = 0.5
        let ds = [-2.0, 0.0, 1.0];
        let a = c.step_length(&s, &s, &ds, &[0.0; 3], 10.0);
        assert!((a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shift_moves_into_interior() {
        let c = soc_cone(3);
        let mut x = [0.0, 1.0, 0.0];
        c.shift_to_interior(&mut x);
        assert!(c.margin(&x) > 0.5);
        let p = Cone::new(&ConeSpec::Psd(2));
        let mut y = [-1.0, 0.0, 0.5];
        p.shift_to_interior(&mut y);
        assert!(p.margin(&y) > 0.5);
    }
}
