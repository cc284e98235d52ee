//! Oracles shared by the integration tests. Nothing here calls the solver.
#![allow(dead_code)]

use pantswalk::network::{ConductanceNetwork, VertexId};

/// Profile as a plain closure, evaluated without the expression parser.
pub fn profile_fn(name: &str) -> fn(f64) -> f64 {
    match name {
        "1" => |_| 1.0,
        "n" => |n| n,
        "n^2" => |n| n * n,
        "n*log(n)^2" => |n| n * n.ln().powi(2),
        other => panic!("no oracle for {other}"),
    }
}

/// Wired resistance of the level-shorted Cantor tree truncated at `radius`:
/// `Σ_{n=2}^{radius+1} 1/ψ(max(n, n_min))`.
pub fn chain_resistance(psi: fn(f64) -> f64, n_min: u64, radius: u32) -> f64 {
    (2..=radius as u64 + 1)
        .map(|n| 1.0 / psi(n.max(n_min) as f64))
        .sum()
}

/// Effective resistance between `source` and `sink` by dense Gaussian
/// elimination on the grounded Laplacian.
pub fn dense_resistance(net: &ConductanceNetwork, source: VertexId, sink: VertexId) -> f64 {
    let n = net.vertex_count();
    let idx: Vec<Option<usize>> = {
        let mut next = 0;
        (0..n)
            .map(|v| {
                if v == sink.0 {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let m = n - 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for e in net.edges() {
        if e.is_loop() {
            continue;
        }
        let (x, y, c) = (idx[e.a.0], idx[e.b.0], e.conductance);
        if let Some(i) = x {
            a[i][i] += c;
        }
        if let Some(j) = y {
            a[j][j] += c;
        }
        if let (Some(i), Some(j)) = (x, y) {
            a[i][j] -= c;
            a[j][i] -= c;
        }
    }
    let s = idx[source.0].unwrap();
    a[s][m] = 1.0;
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = a[row][m];
        for k in row + 1..m {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x[s]
}

fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `∫∫ |∇v|²` over the trapezoid `0 ≤ x ≤ L, 0 ≤ y ≤ h(x)` with
/// `h(x) = (l1 - l)x/L + l` and `v = l y / h(x)`, by nested adaptive
/// quadrature of the gradient.
pub fn trapezoid_quadrature(l: f64, l1: f64, leg: f64) -> f64 {
    let slope = (l1 - l) / leg;
    let tol = 1e-10 * l * leg;
    integrate(
        |x| {
            let h = slope * x + l;
            integrate(
                |y| {
                    let vx = -l * y * slope / (h * h);
                    let vy = l / h;
                    vx * vx + vy * vy
                },
                0.0,
                h,
                tol / leg,
            )
        },
        0.0,
        leg,
        tol,
    )
}

/// Conformal modulus of the standard collar of `length`: the annulus
/// `{|arg z - π/2| < θ} / ⟨z ↦ e^ℓ z⟩`, whose half-angle solves
/// `∫₀^θ sec t dt = width`, has modulus `ℓ / (2θ)`.
pub fn collar_modulus_numeric(length: f64) -> f64 {
    let width = (1.0 / (length / 2.0).sinh()).asinh();
    let sec_integral = |theta: f64| integrate(|t| 1.0 / t.cos(), 0.0, theta, 1e-13);
    let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sec_integral(mid) < width {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    length / (lo + hi)
}

/// `|M_n|` for the greedy perfect matching: `|M_1| = 0`,
/// `|M_{n+1}| = 2^n - |M_n|`.
pub fn matching_counts(depth: u32) -> Vec<u64> {
    let mut m = vec![0u64; depth as usize + 1];
    for n in 1..depth as usize {
        m[n + 1] = (1u64 << n) - m[n];
    }
    m
}

/// `ℓ coth(ℓ/2)` to 25 digits at selected lengths.
pub const COTH_TABLE: [(f64, f64); 10] = [
    (0.001, 2.000000166666663888888955),
    (0.01, 2.00001666663888895502629),
    (0.1, 2.001666388955009924809215),
    (0.5, 2.041494082536798284131103),
    (1.0, 2.163953413738652848770004),
    (1.7627, 2.492875824621323764348441),
    (2.0, 2.626070570998662607272322),
    (3.0, 3.314374178947535711831996),
    (5.0, 5.067836549063042310960199),
    (10.0, 10.00090803982019375536658),
];
