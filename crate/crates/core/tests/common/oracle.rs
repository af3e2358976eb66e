//! Exhaustive simplex-mesh search for D-optimal weights, m ≤ 3.
//!
//! Weights run over all compositions `k / steps` of the chosen support. For
//! `m = 2` every support of at most three rows is enumerated, which contains an
//! optimum by Carathéodory's bound `m(m+1)/2`; for `m = 3` the whole mesh over
//! all rows is enumerated, so it is only usable for a handful of rows.

/// Largest `Φ = det(M)^{1/m}` found on the mesh.
pub fn mesh_optimum(rows: &[Vec<f64>], steps: u32) -> f64 {
    let m = rows[0].len();
    let n = rows.len();
    let prods: Vec<Packed> = rows.iter().map(|f| upper(f)).collect();
    let best = match m {
        1 => prods.iter().map(|p| p[0]).fold(0.0, f64::max) * (steps as f64),
        2 => {
            let mut best: f64 = 0.0;
            if n < 3 {
                best = search(&prods, steps, 2);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    for l in (j + 1)..n {
                        let sub = [prods[i], prods[j], prods[l]];
                        best = best.max(search(&sub, steps, 2));
                    }
                }
            }
            best
        }
        3 => {
            assert!(n <= 6, "full mesh over {n} rows is too large");
            search(&prods, steps, 3)
        }
        _ => panic!("m = {m} not supported"),
    };
    // `best` is the determinant of the integer-weighted sum; rescale by steps.
    (best.max(0.0)).powf(1.0 / m as f64) / steps as f64
}

type Packed = [f64; 6];

fn upper(f: &[f64]) -> Packed {
    let m = f.len();
    let mut out = [0.0; 6];
    let mut t = 0;
    for i in 0..m {
        for j in i..m {
            out[t] = f[i] * f[j];
            t += 1;
        }
    }
    out
}

fn det(a: &Packed, m: usize) -> f64 {
    match m {
        2 => a[0] * a[2] - a[1] * a[1],
        3 => {
            let (a11, a12, a13, a22, a23, a33) = (a[0], a[1], a[2], a[3], a[4], a[5]);
            a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) + a13 * (a12 * a23 - a22 * a13)
        }
        _ => unreachable!(),
    }
}

/// Max determinant of `Σ kᵢ Pᵢ` over nonnegative integers `kᵢ` summing to `steps`.
fn search(prods: &[Packed], steps: u32, m: usize) -> f64 {
    recurse(prods, steps, [0.0; 6], m)
}

fn recurse(prods: &[Packed], remaining: u32, acc: Packed, m: usize) -> f64 {
    let p = &prods[0];
    let r = remaining as f64;
    if prods.len() == 1 {
        let mut full = acc;
        for t in 0..6 {
            full[t] += r * p[t];
        }
        return det(&full, m);
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..=remaining {
        let kf = k as f64;
        let mut next = acc;
        for t in 0..6 {
            next[t] += kf * p[t];
        }
        best = best.max(recurse(&prods[1..], remaining - k, next, m));
    }
    best
}
