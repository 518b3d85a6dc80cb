//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

pub const C: f64 = 299_792_458.0;

/// Malitson fused silica, written out independently.
pub fn silica(lambda_m: f64) -> f64 {
    let l2 = (lambda_m * 1e6).powi(2);
    let terms = [
        (0.696_166_3, 0.068_404_3f64),
        (0.407_942_6, 0.116_241_4),
        (0.897_479_4, 9.896_161),
    ];
    let s: f64 = terms.iter().map(|(b, c)| b * l2 / (l2 - c * c)).sum();
    (1.0 + s).sqrt()
}

fn series(x: f64, order: u32, sign: f64) -> f64 {
    // Σ sign^k (x/2)^(2k+order) / (k! (k+order)!)
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= sign * q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

pub fn bessel_j0(x: f64) -> f64 {
    series(x, 0, -1.0)
}
pub fn bessel_j1(x: f64) -> f64 {
    series(x, 1, -1.0)
}
fn bessel_i0(x: f64) -> f64 {
    series(x, 0, 1.0)
}
fn bessel_i1(x: f64) -> f64 {
    series(x, 1, 1.0)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// K0 from its ascending series (fine for the small W of single-mode fiber).
pub fn bessel_k0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        harmonic += 1.0 / k as f64;
        sum += term * harmonic;
        if term * harmonic < 1e-18 * sum {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * bessel_i0(x) + sum
}

pub fn bessel_k1(x: f64) -> f64 {
    // K1 = 1/x + I1 ln(x/2) − (x/4) Σ [ψ(k+1) + ψ(k+2)] q^k / (k!(k+1)!)
    let q = 0.25 * x * x;
    let psi = |n: usize| -> f64 { (1..n).map(|j| 1.0 / j as f64).sum::<f64>() - EULER_GAMMA };
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 0..200 {
        if k > 0 {
            term *= q / (k as f64 * (k + 1) as f64);
        }
        let t = term * (psi(k + 1) + psi(k + 2));
        sum += t;
        if k > 2 && t.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    1.0 / x + bessel_i1(x) * (0.5 * x).ln() - 0.25 * x * sum
}

/// LP01 effective index by plain bisection of U J1/J0 − W K1/K0 over b.
pub fn lp01_index(core_radius: f64, na: f64, lambda_m: f64) -> f64 {
    let v = 2.0 * std::f64::consts::PI * core_radius * na / lambda_m;
    let f = |b: f64| {
        let u = v * (1.0 - b).sqrt();
        let w = v * b.sqrt();
        u * bessel_j1(u) / bessel_j0(u) - w * bessel_k1(w) / bessel_k0(w)
    };
    let mut lo = (1.0 - (2.404_825_557_695_773 / v).powi(2)).max(0.0) + 1e-14;
    let mut hi = 1.0 - 1e-14;
    assert!(f(lo) > 0.0 && f(hi) < 0.0, "no LP01 bracket at V = {v}");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    let nc = silica(lambda_m);
    (nc * nc + b * na * na).sqrt()
}

/// cos² fringes of a birefringent fiber between crossed-at-45° polarizers.
pub fn fringes(dn: f64, length: f64, lo_nm: f64, hi_nm: f64, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (0..samples)
        .map(|k| (lo_nm + (hi_nm - lo_nm) * k as f64 / (samples - 1) as f64) * 1e-9)
        .collect();
    let i = w
        .iter()
        .map(|l| (std::f64::consts::PI * dn * length / l).cos().powi(2))
        .collect();
    (w, i)
}

/// Span and sample count giving about `periods` fringes around `center_nm`.
pub fn fringe_window(dn: f64, length: f64, center_nm: f64, periods: f64) -> (f64, f64, usize) {
    let spacing_nm = (center_nm * 1e-9).powi(2) / (dn * length) * 1e9;
    let half = 0.5 * periods * spacing_nm;
    let samples = ((2.0 * half / spacing_nm) * 60.0).ceil() as usize + 1;
    (center_nm - half, center_nm + half, samples.max(64))
}

/// Eigenvalues of a Hermitian matrix (row-major, n×n) by cyclic Jacobi on
/// its real 2n×2n embedding; each eigenvalue appears twice there.
pub fn hermitian_eigenvalues(re: &[f64], im: &[f64], n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut a = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (re[r * n + c], im[r * n + c]);
            a[r * m + c] = x;
            a[(r + n) * m + c + n] = x;
            a[r * m + c + n] = -y;
            a[(r + n) * m + c] = y;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|p| (0..m).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * m + q].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|k| a[k * m + k]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.into_iter().step_by(2).collect()
}

/// Click probabilities by explicit photon-number summation: total pair
/// number distribution (convolution of truncated thermal modes), then
/// multinomial routing of each arm's photons to (lost, d1, d2).
pub struct NumberBasis {
    pub signal: f64,
    pub idler: f64,
    pub coincidence: f64,
    pub s_d1: f64,
    pub s_d2: f64,
    pub s_both: f64,
    pub herald_i1: f64,
    pub herald_i2: f64,
    pub triple: f64,
}

pub const TRUNCATION: usize = 20;

pub fn number_basis(weights: &[f64], mu: f64, eta_s: f64, eta_i: f64) -> NumberBasis {
    let mut dist = vec![0.0; TRUNCATION + 1];
    dist[0] = 1.0;
    for w in weights {
        let m = mu * w;
        let thermal: Vec<f64> = (0..=TRUNCATION).map(|n| m.powi(n as i32) / (1.0 + m).powi(n as i32 + 1)).collect();
        let mut next = vec![0.0; TRUNCATION + 1];
        for (a, pa) in dist.iter().enumerate() {
            for (b, pb) in thermal.iter().enumerate() {
                if a + b <= TRUNCATION {
                    next[a + b] += pa * pb;
                }
            }
        }
        dist = next;
    }
    // probabilities of the four (d1 click?, d2 click?) outcomes for n photons
    let outcomes = |n: usize, eta: f64| -> [f64; 4] {
        // none, only d1, only d2, both
        let lost = 1.0 - eta;
        let half = 0.5 * eta;
        let none = lost.powi(n as i32);
        let only1 = (lost + half).powi(n as i32) - none;
        let only2 = only1;
        [none, only1, only2, 1.0 - none - only1 - only2]
    };
    let mut r = NumberBasis {
        signal: 0.0,
        idler: 0.0,
        coincidence: 0.0,
        s_d1: 0.0,
        s_d2: 0.0,
        s_both: 0.0,
        herald_i1: 0.0,
        herald_i2: 0.0,
        triple: 0.0,
    };
    for (n, p) in dist.iter().enumerate() {
        let s = outcomes(n, eta_s);
        let i = outcomes(n, eta_i);
        let s_click = 1.0 - s[0];
        let i_click = 1.0 - i[0];
        r.signal += p * s_click;
        r.idler += p * i_click;
        r.coincidence += p * s_click * i_click;
        r.s_d1 += p * (s[1] + s[3]);
        r.s_d2 += p * (s[2] + s[3]);
        r.s_both += p * s[3];
        r.herald_i1 += p * s_click * (i[1] + i[3]);
        r.herald_i2 += p * s_click * (i[2] + i[3]);
        r.triple += p * s_click * i[3];
    }
    r
}
