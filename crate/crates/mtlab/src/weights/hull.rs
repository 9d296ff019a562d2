//! Convex hull volumes in dimensions 2 and 3.

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn orient3(a: &[f64], b: &[f64], c: &[f64], p: &[f64]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0])
}

fn monotone_chain_area(points: &[Vec<f64>]) -> f64 {
    let mut p: Vec<&Vec<f64>> = points.iter().collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<&Vec<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &&Vec<f64>>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for q in iter {
            while hull.len() >= start + 2
                && cross2(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let m = hull.len();
    0.5 * (0..m)
        .map(|i| hull[i][0] * hull[(i + 1) % m][1] - hull[(i + 1) % m][0] * hull[i][1])
        .sum::<f64>()
        .abs()
}

fn incremental_volume(points: &[Vec<f64>]) -> f64 {
    let eps = 1e-9;
    let n = points.len();
    if n < 4 {
        return 0.0;
    }
    let d2 = |a: &[f64], b: &[f64]| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    let i0 = 0;
    let i1 = (0..n)
        .max_by(|&a, &b| d2(&points[a], &points[i0]).total_cmp(&d2(&points[b], &points[i0])))
        .unwrap();
    let line = |p: &[f64]| {
        let u: Vec<f64> = (0..3).map(|k| points[i1][k] - points[i0][k]).collect();
        let w: Vec<f64> = (0..3).map(|k| p[k] - points[i0][k]).collect();
        let c = [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ];
        c.iter().map(|v| v * v).sum::<f64>()
    };
    let i2 = (0..n)
        .max_by(|&a, &b| line(&points[a]).total_cmp(&line(&points[b])))
        .unwrap();
    if line(&points[i2]) <= eps {
        return 0.0;
    }
    let i3 = (0..n)
        .max_by(|&a, &b| {
            orient3(&points[i0], &points[i1], &points[i2], &points[a])
                .abs()
                .total_cmp(&orient3(&points[i0], &points[i1], &points[i2], &points[b]).abs())
        })
        .unwrap();
    if orient3(&points[i0], &points[i1], &points[i2], &points[i3]).abs() <= eps {
        return 0.0;
    }
    let interior: Vec<f64> = (0..3)
        .map(|k| 0.25 * (points[i0][k] + points[i1][k] + points[i2][k] + points[i3][k]))
        .collect();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for f in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        if orient3(&points[f[0]], &points[f[1]], &points[f[2]], &interior) < 0.0 {
            faces.push(f);
        } else {
            faces.push([f[0], f[2], f[1]]);
        }
    }
    for p in 0..n {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| orient3(&points[f[0]], &points[f[1]], &points[f[2]], &points[p]) > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut horizon = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let shared = faces.iter().zip(&visible).any(|(g, v)| {
                    *v && [(g[0], g[1]), (g[1], g[2]), (g[2], g[0])].contains(&(e.1, e.0))
                });
                if !shared {
                    horizon.push(e);
                }
            }
        }
        faces = faces
            .into_iter()
            .zip(visible)
            .filter(|(_, v)| !v)
            .map(|(f, _)| f)
            .collect();
        for (a, b) in horizon {
            faces.push([a, b, p]);
        }
    }
    faces
        .iter()
        .map(|f| -orient3(&points[f[0]], &points[f[1]], &points[f[2]], &interior) / 6.0)
        .sum()
}

/// Volume of the convex hull: monotone chain in the plane, incremental hull in space.
pub fn hull_volume(points: &[Vec<f64>]) -> f64 {
    match points.first().map(|p| p.len()) {
        None => 0.0,
        Some(2) => monotone_chain_area(points),
        Some(3) => incremental_volume(points),
        Some(d) => panic!("hull volume implemented for dimensions 2 and 3, got {d}"),
    }
}

/// Volume by enumerating supporting lines or planes through point pairs or triples.
///
/// Quadratic or cubic in the point count; meant as a cross-check on small sets.
pub fn hull_volume_facets(points: &[Vec<f64>]) -> f64 {
    let eps = 1e-9;
    let n = points.len();
    let Some(d) = points.first().map(|p| p.len()) else {
        return 0.0;
    };
    let c: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64)
        .collect();
    let mut seen: Vec<Vec<bool>> = Vec::new();
    let mut vol = 0.0;
    match d {
        2 => {
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&points[i], &points[j]);
                    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                    if len <= eps {
                        continue;
                    }
                    let s: Vec<f64> = points.iter().map(|p| cross2(a, b, p)).collect();
                    let on: Vec<bool> = s.iter().map(|v| v.abs() <= eps).collect();
                    if on.iter().all(|&o| o) {
                        return 0.0;
                    }
                    let supporting = s.iter().all(|&v| v >= -eps) || s.iter().all(|&v| v <= eps);
                    if !supporting || seen.contains(&on) {
                        continue;
                    }
                    let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                    let proj: Vec<f64> = (0..n)
                        .filter(|&k| on[k])
                        .map(|k| (points[k][0] - a[0]) * u[0] + (points[k][1] - a[1]) * u[1])
                        .collect();
                    let edge = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        - proj.iter().copied().fold(f64::INFINITY, f64::min);
                    let h = cross2(a, b, &c).abs() / len;
                    vol += 0.5 * edge * h;
                    seen.push(on);
                }
            }
        }
        3 => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let (a, b, q) = (&points[i], &points[j], &points[k]);
                        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                        let v = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
                        let nrm = [
                            u[1] * v[2] - u[2] * v[1],
                            u[2] * v[0] - u[0] * v[2],
                            u[0] * v[1] - u[1] * v[0],
                        ];
                        let nl = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                        if nl <= eps {
                            continue;
                        }
                        let s: Vec<f64> = points.iter().map(|p| orient3(a, b, q, p)).collect();
                        let on: Vec<bool> = s.iter().map(|x| x.abs() <= eps).collect();
                        if on.iter().all(|&o| o) {
                            return 0.0;
                        }
                        let supporting =
                            s.iter().all(|&x| x >= -eps) || s.iter().all(|&x| x <= eps);
                        if !supporting || seen.contains(&on) {
                            continue;
                        }
                        let area = planar_polygon_area(points, &on, &nrm, nl);
                        let h = orient3(a, b, q, &c).abs() / nl;
                        vol += area * h / 3.0;
                        seen.push(on);
                    }
                }
            }
        }
        _ => panic!("facet enumeration implemented for dimensions 2 and 3"),
    }
    vol
}

/// Area of the convex polygon spanned by coplanar points, by gift wrapping in plane coordinates.
fn planar_polygon_area(points: &[Vec<f64>], on: &[bool], nrm: &[f64; 3], nl: f64) -> f64 {
    let sel: Vec<&Vec<f64>> = points
        .iter()
        .zip(on)
        .filter(|(_, o)| **o)
        .map(|(p, _)| p)
        .collect();
    let z = [nrm[0] / nl, nrm[1] / nl, nrm[2] / nl];
    let seed = if z[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let dz = seed[0] * z[0] + seed[1] * z[1] + seed[2] * z[2];
    let mut e1 = [
        seed[0] - dz * z[0],
        seed[1] - dz * z[1],
        seed[2] - dz * z[2],
    ];
    let l1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= l1);
    let e2 = [
        z[1] * e1[2] - z[2] * e1[1],
        z[2] * e1[0] - z[0] * e1[2],
        z[0] * e1[1] - z[1] * e1[0],
    ];
    let pts: Vec<(f64, f64)> = sel
        .iter()
        .map(|p| {
            (
                p[0] * e1[0] + p[1] * e1[1] + p[2] * e1[2],
                p[0] * e2[0] + p[1] * e2[1] + p[2] * e2[2],
            )
        })
        .collect();
    let k = pts.len();
    let start = (0..k)
        .min_by(|&a, &b| {
            pts[a]
                .0
                .total_cmp(&pts[b].0)
                .then(pts[a].1.total_cmp(&pts[b].1))
        })
        .unwrap();
    let mut hull = Vec::new();
    let mut cur = start;
    loop {
        hull.push(pts[cur]);
        let mut nxt = (cur + 1) % k;
        for cand in 0..k {
            let o = pts[cur];
            let a = (pts[nxt].0 - o.0, pts[nxt].1 - o.1);
            let b = (pts[cand].0 - o.0, pts[cand].1 - o.1);
            let cr = a.0 * b.1 - a.1 * b.0;
            if cr < -1e-12 || (cr.abs() <= 1e-12 && b.0 * b.0 + b.1 * b.1 > a.0 * a.0 + a.1 * a.1) {
                nxt = cand;
            }
        }
        cur = nxt;
        if cur == start || hull.len() > k {
            break;
        }
    }
    let m = hull.len();
    0.5 * (0..m)
        .map(|i| hull[i].0 * hull[(i + 1) % m].1 - hull[(i + 1) % m].0 * hull[i].1)
        .sum::<f64>()
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> Vec<Vec<f64>> {
        (0..8)
            .map(|m| (0..3).map(|k| ((m >> k) & 1) as f64 * 2.0).collect())
            .collect()
    }

    #[test]
    fn unit_shapes() {
        let sq = vec![
            vec![0.0, 0.0],
            vec![3.0, 0.0],
            vec![3.0, 2.0],
            vec![0.0, 2.0],
            vec![1.0, 1.0],
        ];
        assert!((hull_volume(&sq) - 6.0).abs() < 1e-12);
        assert!((hull_volume_facets(&sq) - 6.0).abs() < 1e-12);
        assert!((hull_volume(&cube()) - 8.0).abs() < 1e-12);
        assert!((hull_volume_facets(&cube()) - 8.0).abs() < 1e-12);
        let tet = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        assert!((hull_volume(&tet) - 1.0 / 6.0).abs() < 1e-15);
        assert!((hull_volume_facets(&tet) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_sets_have_zero_volume() {
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(hull_volume(&line), 0.0);
        assert_eq!(hull_volume_facets(&line), 0.0);
        let plane = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![3.0, 2.0, 1.0],
        ];
        assert_eq!(hull_volume(&plane), 0.0);
        assert_eq!(hull_volume_facets(&plane), 0.0);
    }
}
