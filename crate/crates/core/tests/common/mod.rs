//! Brute-force oracles that avoid the library's LP and hull code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use maxplus::{TropicalPolynomial, TwoLayerNet};

pub type Key = Vec<i64>;

pub fn points(p: &TropicalPolynomial) -> Vec<(Key, f64)> {
    p.terms().iter().map(|t| (t.degree.iter().map(|v| v.round() as i64).collect(), t.coeff)).collect()
}

/// Upper-hull height by enumerating every simplex of at most `dim + 1`
/// points that contains `j` (dimensions 1 and 2).
pub fn hull_height(pts: &[(Key, f64)], j: &[i64]) -> Option<f64> {
    let jf: Vec<f64> = j.iter().map(|&v| v as f64).collect();
    let mut best: Option<f64> = None;
    let mut offer = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
    let n = pts.len();
    for a in 0..n {
        if pts[a].0 == j {
            offer(pts[a].1);
        }
        for b in a + 1..n {
            if let Some(t) = on_segment(&pts[a].0, &pts[b].0, &jf) {
                offer((1.0 - t) * pts[a].1 + t * pts[b].1);
            }
            if j.len() == 2 {
                for c in b + 1..n {
                    if let Some([la, lb, lc]) = barycentric(&pts[a].0, &pts[b].0, &pts[c].0, &jf) {
                        offer(la * pts[a].1 + lb * pts[b].1 + lc * pts[c].1);
                    }
                }
            }
        }
    }
    best
}

fn on_segment(a: &[i64], b: &[i64], j: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) as f64).collect();
    let len2: f64 = d.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return None;
    }
    let t = d.iter().zip(a).zip(j).map(|((dv, av), jv)| dv * (jv - *av as f64)).sum::<f64>() / len2;
    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
        return None;
    }
    let off: f64 = a.iter().zip(&d).zip(j).map(|((av, dv), jv)| (*av as f64 + t * dv - jv).powi(2)).sum();
    (off < 1e-18).then_some(t.clamp(0.0, 1.0))
}

fn barycentric(a: &[i64], b: &[i64], c: &[i64], j: &[f64]) -> Option<[f64; 3]> {
    let (ax, ay) = (a[0] as f64, a[1] as f64);
    let (bx, by) = (b[0] as f64, b[1] as f64);
    let (cx, cy) = (c[0] as f64, c[1] as f64);
    let det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
    if det == 0.0 {
        return None;
    }
    let lb = ((j[0] - ax) * (cy - ay) - (cx - ax) * (j[1] - ay)) / det;
    let lc = ((bx - ax) * (j[1] - ay) - (j[0] - ax) * (by - ay)) / det;
    let la = 1.0 - lb - lc;
    [la, lb, lc].iter().all(|&l| l >= -1e-12).then_some([la, lb, lc])
}

pub fn bounds(keys: &[Key]) -> (Key, Key) {
    let dim = keys[0].len();
    let lo = (0..dim).map(|k| keys.iter().map(|j| j[k]).min().unwrap()).collect();
    let hi = (0..dim).map(|k| keys.iter().map(|j| j[k]).max().unwrap()).collect();
    (lo, hi)
}

pub fn grid(lo: &[i64], hi: &[i64]) -> Vec<Key> {
    let mut out = vec![Vec::new()];
    for (l, h) in lo.iter().zip(hi) {
        out = out.into_iter().flat_map(|pre| (*l..=*h).map(move |v| [pre.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Hull height at every lattice point of the Newton polytope.
pub fn canonical(p: &TropicalPolynomial) -> BTreeMap<Key, f64> {
    let pts = points(p);
    let keys: Vec<Key> = pts.iter().map(|(k, _)| k.clone()).collect();
    let (lo, hi) = bounds(&keys);
    grid(&lo, &hi).into_iter().filter_map(|j| hull_height(&pts, &j).map(|h| (j, h))).collect()
}

/// Shifts `c` with every term degree of `d` landing in `Newt(p)`, and the
/// erosion `min_i (n_p(c + i) - n_d(i))` at each.
pub fn erosion(p: &TropicalPolynomial, d: &TropicalPolynomial) -> BTreeMap<Key, f64> {
    let np = canonical(p);
    let nd = canonical(d);
    let pk: Vec<Key> = np.keys().cloned().collect();
    let dk: Vec<Key> = nd.keys().cloned().collect();
    let (plo, phi) = bounds(&pk);
    let (dlo, dhi) = bounds(&dk);
    let lo: Key = plo.iter().zip(&dlo).map(|(a, b)| a - b).collect();
    let hi: Key = phi.iter().zip(&dhi).map(|(a, b)| a - b).collect();
    let mut out = BTreeMap::new();
    for c in grid(&lo, &hi) {
        let mut val = f64::INFINITY;
        let mut inside = true;
        for (i, di) in &nd {
            let j: Key = c.iter().zip(i).map(|(a, b)| a + b).collect();
            match np.get(&j) {
                Some(h) => val = val.min(h - di),
                None => inside = false,
            }
        }
        if inside {
            out.insert(c, val);
        }
    }
    out
}

pub fn eval(p: &TropicalPolynomial, x: &[f64]) -> f64 {
    p.terms()
        .iter()
        .map(|t| t.coeff + t.degree.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn net_preactivation(net: &TwoLayerNet, x: &[f64]) -> f64 {
    let mut z = net.b2();
    for i in 0..net.hidden() {
        let pre: f64 = net.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + net.b1()[i];
        z += net.w2()[i] * pre.max(0.0);
    }
    z
}
