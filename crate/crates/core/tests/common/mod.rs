//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use pcosync::graph::Graph;

/// Exact lower binomial tail `P(X < k)` for `X ~ Bin(d, num / den)`.
pub fn binomial_lower_tail(d: u32, k: u32, num: u32, den: u32) -> f64 {
    let q = BigUint::from(num);
    let r = BigUint::from(den - num);
    let mut total = BigUint::from(0u32);
    let mut choose = BigUint::from(1u32);
    for j in 0..k.min(d + 1) {
        if j > 0 {
            choose = choose * BigUint::from(d - j + 1) / BigUint::from(j);
        }
        total += &choose * q.pow(j) * r.pow(d - j);
    }
    ratio(&total, &BigUint::from(den).pow(d))
}

/// `a / b` as f64; both fit since `den^d` stays below `f64::MAX` here.
pub fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    a.to_f64().unwrap() / b.to_f64().unwrap()
}

/// Larger root of `y - ln y = 1 + 1/a` by Newton from the right, mapped back
/// to `c = a y` with `a = -2 / ln s`.
pub fn rgg_threshold_lambert(s: f64) -> f64 {
    let a = -2.0 / s.ln();
    let rhs = 1.0 + 1.0 / a;
    let mut y = rhs + rhs.ln() + 2.0;
    for _ in 0..200 {
        let next = y - (y - y.ln() - rhs) / (1.0 - 1.0 / y);
        if (next - y).abs() < 1e-15 * y {
            y = next;
            break;
        }
        y = next;
    }
    a * y
}

/// Plain bisection of `1/c = 1 + u - u ln(-u)`, `u = 2 / (c ln s)`, on a
/// bracket to the right of the minimum of the scaled residual.
pub fn rgg_threshold_bisect(s: f64) -> f64 {
    let l = s.ln();
    let f = |c: f64| {
        let u = 2.0 / (c * l);
        c * (1.0 + u - u * (-u).ln()) - 1.0
    };
    // the scaled residual has its minimum -1 at c = -2 / ln s and grows
    // without bound to the right
    let mut lo = -2.0 / l;
    let mut hi = lo * 2.0;
    assert!(f(lo) < 0.0);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Strong connectivity and cycle-length gcd from boolean matrix powers.
pub fn brute_structure(g: &Graph) -> (bool, Option<u64>) {
    let n = g.node_count();
    let mut adj = vec![vec![false; n]; n];
    for e in g.edges() {
        adj[e.src][e.dst] = true;
    }
    let mut reach = adj.clone();
    for i in 0..n {
        reach[i][i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let strongly = n > 0 && (0..n).all(|i| (0..n).all(|j| reach[i][j]));

    let mut power = adj.clone();
    let mut g_len = 0u64;
    for len in 1..=n as u64 {
        if (0..n).any(|i| power[i][i]) {
            g_len = gcd(g_len, len);
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if power[i][k] {
                    for j in 0..n {
                        if adj[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        power = next;
    }
    (strongly, (g_len > 0).then_some(g_len))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
